#pragma once

#include "legav/contact.hpp"
#include "legav/types.hpp"

#include <optional>
#include <vector>

namespace legav {

/// A geodesic with its dense integrator output. Speed |gamma'|_g is constant
/// along the segment up to integration error.
struct GeodesicSegment {
    struct Node {
        double t;
        Vec3 x;
        Vec3 v;
    };
    ModelId model;
    double t0 = 0.0, t1 = 1.0;
    std::vector<Node> nodes; // accepted steps, ascending t

    const Vec3& start_x() const { return nodes.front().x; }
    const Vec3& start_v() const { return nodes.front().v; }
    const Vec3& end_x() const { return nodes.back().x; }
    const Vec3& end_v() const { return nodes.back().v; }
};

/// Geodesic through p with initial velocity v, integrated adaptively to the
/// configured local error over parameter span [0, t].
ManifoldPoint exp_map(const ContactModel& m, const ManifoldPoint& p, const Vec3& v, double t,
                      const Config& cfg = {});
GeodesicSegment exp_map_segment(const ContactModel& m, const Vec3& p, const Vec3& v, double t,
                                const Config& cfg = {});

namespace detail {
/// Fixed-step geodesic endpoint (+ optional end velocity). The step count is
/// a deterministic function of nsteps only, which keeps finite-difference
/// stencils through this kernel smooth.
Vec3 exp_fixed(const ContactModel& m, const Vec3& p, const Vec3& v, int nsteps,
               Vec3* end_v = nullptr);
int exp_steps_for(const ContactModel& m, double length);
} // namespace detail

/// Inverse of the exponential by shooting, warm-startable. Throws
/// Error(OutOfInjectivity) when the iteration does not converge.
Vec3 log_map(const ContactModel& m, const Vec3& p, const Vec3& q, const Config& cfg = {});

namespace detail {
/// Fixed-iteration-count shooting warm-started at v0; smooth in (p, q, v0).
Vec3 log_frozen(const ContactModel& m, const Vec3& p, const Vec3& q, const Vec3& v0, int iters,
                int exp_steps);
} // namespace detail

/// Parallel transport of w along the segment (re-integrates the geodesic
/// jointly with the transport equation).
Vec3 parallel_transport(const ContactModel& m, const GeodesicSegment& seg, const Vec3& w,
                        const Config& cfg = {});

/// Transport of a set of vectors along the geodesic t -> exp_p(t v), t in
/// [0,1], by fixed-step integration. Returns transported columns.
Mat3 transport_columns(const ContactModel& m, const Vec3& p, const Vec3& v, const Mat3& cols,
                       int nsteps);
/// Single-vector fixed-step transport along t -> exp_p(t v).
Vec3 transport_vector(const ContactModel& m, const Vec3& p, const Vec3& v, const Vec3& w,
                      int nsteps);

/// Weighted Riemannian center of mass: the fixed point of
/// m -> exp_m(sum_i w_i log_m(p_i)), iterated until the update step norm
/// drops below cfg.karcher_step_tol. Weights must sum to 1.
Vec3 karcher_mean(const ContactModel& m, const std::vector<Vec3>& points,
                  const std::vector<double>& weights, const Config& cfg = {});

/// Closed curve as a periodic cubic spline through its samples. The angle
/// coordinate is unwrapped before fitting on the cylinder model.
class CurveModel {
public:
    CurveModel() = default;
    /// knots: cumulative parameter values (size n); the period is the total
    /// parameter length (last knot + closing gap).
    CurveModel(const ContactModel& m, std::vector<Vec3> samples, std::vector<double> knots);
    /// Chord-length parameterization from the metric.
    static CurveModel from_samples(const ContactModel& m, const std::vector<Vec3>& samples);

    int size() const { return static_cast<int>(pts_.size()); }
    double period() const { return period_; }
    const ContactModel& model() const { return model_; }
    double knot(int i) const { return s_[i]; }
    const Vec3& sample(int i) const { return pts_[i]; }
    const std::vector<Vec3>& samples() const { return pts_; }

    Vec3 eval(double s) const;            // wrapped to the model's chart
    Vec3 eval_unwrapped(double s) const;  // spline value without re-wrapping
    Vec3 derivative(double s) const;      // d/ds of the spline
    Vec3 second_derivative(double s) const;
    Vec3 unit_tangent(double s) const;    // g-normalized derivative
    /// Covariant curvature vector nabla_tau tau (tau the unit tangent).
    Vec3 curvature_vector(double s) const;

    /// Index of the sample nearest to x in the chart metric, a cheap
    /// localization seed for the solvers.
    int locate(const Vec3& x) const;

private:
    ContactModel model_ = ContactModel::heisenberg();
    std::vector<Vec3> pts_;      // unwrapped coordinates
    std::vector<double> s_;      // knots, ascending, s_[0] == 0
    std::vector<Vec3> m2_;       // spline second derivatives at knots
    double period_ = 0.0;
    double wrap_jump_ = 0.0;     // total angle unwrap across one period

    int segment_of(double s, double* local) const;
};

struct FootResult {
    double s = 0.0;    // curve parameter of the foot
    Vec3 foot;         // foot point
    Vec3 log_x;        // log_foot(x): normal connecting vector
    double dist = 0.0; // g-length of the connecting geodesic
};

/// Nearest point of the curve to x. With hint < 0 a full scan is done and a
/// second near-minimizer within `uniq_rel` of the best (and well separated in
/// parameter) raises Error(NonUniqueNearest). With a hint the solve is local.
/// frozen_iters > 0 runs that fixed number of Newton corrections from the
/// hint (smooth warm evaluation for stencils) instead of iterating to the
/// configured tolerance.
FootResult nearest_point(const CurveModel& curve, const Vec3& x, const Config& cfg = {},
                         double hint = -1.0, int frozen_iters = 0, double uniq_rel = 1e-6);

struct D0Result {
    double value = 0.0;
    double resolution = 0.0; // sampling-resolution audit term
};

/// Asymmetric C0 distance: sup over samples (plus midpoints) of `from` of the
/// distance to the nearest point of `to`.
D0Result d0(const CurveModel& to, const CurveModel& from, const Config& cfg = {});

/// Largest principal angle between equal-dimensional subspaces spanned by the
/// columns of F and G, in the inner product `gram` (both in [0, pi/2]).
double subspace_distance(const Mat3& gram, const Eigen::Matrix<double, 3, Eigen::Dynamic>& F,
                         const Eigen::Matrix<double, 3, Eigen::Dynamic>& G);

struct D1Result {
    double value = 0.0;
    double max_length = 0.0;
    double max_angle = 0.0;
};

/// C1 distance from N to N': adds to d0 the angle between T N' and the
/// parallel translate of T N along the connecting geodesic. Verifies that
/// the nearest-point map N' -> N is a cyclically monotone section and raises
/// Error(NotASection) otherwise. `tangents` are the unit tangents of `from`
/// at its samples.
D1Result d1(const CurveModel& to, const CurveModel& from, const std::vector<Vec3>& tangents,
            const Config& cfg = {});

struct GentlenessReport {
    double normal_injectivity = 0.0; // radius estimate (curvature + gap)
    double curvature_sup = 0.0;      // sup |K| over tube samples
    double point_injectivity = 0.0;  // conjugate-point estimate, capped
    bool pass_normal_injectivity = false;
    bool pass_curvature = false;
    bool pass_point_injectivity = false;
    int tube_samples = 0;
    double probe_length = 0.0;       // cap used for the injectivity probes
    bool pass() const {
        return pass_normal_injectivity && pass_curvature && pass_point_injectivity;
    }
};

/// Sampled estimates of the three gentle-pair conditions (thresholds 1).
/// Conservative in the sense that sups/infs are over all probes tried.
GentlenessReport gentleness_report(const CurveModel& curve, double tube_radius, int n_samples,
                                   const Config& cfg = {});

} // namespace legav
