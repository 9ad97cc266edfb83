#pragma once

#include "legav/curves.hpp"
#include "legav/geometry.hpp"
#include "legav/spline.hpp"
#include "legav/types.hpp"

#include <vector>

namespace legav {

/// Tubular chart around the submanifold average N: per-member normal
/// sections sigma_g (components in the canonical normal frame along N) and
/// the data needed to evaluate the member tube maps phi_g.
struct TubularChart {
    ContactModel model = ContactModel::heisenberg();
    CurveModel base;      // the average curve N
    double radius = 0.05; // tube radius, min(0.05, safe radius)

    struct Member {
        CurveModel curve;
        double weight = 0.0;
        bool identity = false;    // member coincides with N
        PeriodicSpline1D sigma1;  // normal-section components in the frame
        PeriodicSpline1D sigma2;
        double sigma_max = 0.0;
        int steps_section = 4;    // fixed step counts for the bundle kernels
    };
    std::vector<Member> members;
    int steps_tube = 8;

    /// Canonical g-orthonormal frame at base parameter s: columns
    /// (tau, n1 ~ Reeb, n2 ~ I tau), equivariant under registered isometries.
    Mat3 frame_at(double s) const;
    /// World components of sigma_g at parameter s.
    Vec3 sigma_at(int g, double s) const;
};

struct WeinsteinResult {
    DiscreteLegendrian average; // tangents from the interpolating spline
    TubularChart chart;
    int max_iterations = 0;
    double final_step = 0.0;
};

/// Submanifold average of the family: per-sample fixed point of
/// x -> karcher_mean({nearest point on each member}, weights), started from
/// the lexicographically smallest member (a canonical choice, so jointly
/// permuting members and weights reproduces bit-identical output).
WeinsteinResult weinstein_average(const FamilyInput& family, const Config& cfg = {});

enum class TubeDirection { Forward, Inverse }; // forward: near N_g -> near N

/// Evaluate the member tube diffeomorphism. The inverse direction (near N to
/// near N_g) is the primitive bundle map; the forward direction solves it.
Vec3 tubular_diffeo_eval(const TubularChart& chart, int g, const Vec3& x, TubeDirection dir,
                         const Config& cfg = {});

/// Pullback data of the averaged contact form at a tube point x:
/// theta_dot = sum_g w_g (phi_g^{-1})^* theta - theta and its differential,
/// from Richardson-corrected finite-difference differentials of phi_g^{-1}.
struct FormDeficit {
    Vec3 theta_dot;
    Mat3 dtheta_dot;
    Vec3 theta0;     // theta at x
    Mat3 dtheta0;    // dtheta at x
    double foot_s = 0.0;
    double foot_dist = 0.0;

    Vec3 theta_t(double t) const { return theta0 + t * theta_dot; }
    Mat3 dtheta_t(double t) const { return dtheta0 + t * dtheta_dot; }
};

/// Mutable per-trajectory solver state (warm starts); one per worker.
struct TubeWorkspace {
    double foot_hint = -1.0;
};

FormDeficit averaged_form_deficit(const TubularChart& chart, const Vec3& x, TubeWorkspace& ws,
                                  const Config& cfg = {});

/// The contact Moser field at (x, t): the unique v in ker theta_t with
/// dtheta_t(v, .) = -theta_dot on ker theta_t. margin (optional out) is the
/// nondegeneracy of dtheta_t on the contact plane relative to t = 0.
Vec3 contact_moser_field(const TubularChart& chart, const Vec3& x, double t, TubeWorkspace& ws,
                         const Config& cfg = {}, double* margin = nullptr);
Vec3 contact_moser_field_from(const FormDeficit& d, double t, double* margin = nullptr);

/// omega = e^s (ds ^ theta + dtheta) evaluated on extended tangents (v, a),
/// (w, b) at the point p of M (s the symplectization coordinate).
double omega_bar_eval(const ContactModel& m, const Vec3& p, const Vec3& v, double a,
                      const Vec3& w, double b, double s = 0.0);

/// sup over samples of |omega_bar(tau, d/ds)| for the cylinder L x R; equals
/// the Legendrian residual by the algebraic identity omega_bar(tau, ds) =
/// -theta(tau).
double lagrangian_residual(const DiscreteLegendrian& curve);

/// The symplectization Moser field at (x, t, s): solves
/// omega_t((v, a), .) = -alpha with the canonical primitive alpha =
/// e^s theta_dot. Returns (v, a); the M-component equals the contact field
/// and a = -theta_dot(R_t), verified at runtime.
Vec4 symplectization_moser_field(const TubularChart& chart, const Vec3& x, double t, double s,
                                 TubeWorkspace& ws, const Config& cfg = {});
Vec4 symplectization_moser_field_from(const FormDeficit& d, double t, double s,
                                      bool cross_check = true);

/// Aggregated diagnostics of a Moser flow run (t from 1 down to 0).
struct MoserTrace {
    std::vector<double> t_grid;          // bin centers, descending from 1 to 0
    std::vector<double> min_margin;      // per bin, over all samples
    std::vector<double> sup_speed;       // per bin, sup |v_t|
    std::vector<double> max_residual;    // per bin, |theta_t(v_t)| residual
    double global_min_margin = 1.0;
    double global_sup_speed = 0.0;
    const char* direction = "t:1->0";
};

struct GateReport {
    double epsilon = 0.0;     // max (ordered) pairwise d1
    bool paper_regime = false;
    bool strict = false;
    bool refused = false;
    double threshold = 0.0;
};

/// epsilon = max pairwise d1; paper regime iff epsilon < 1/70000. In strict
/// mode a relaxed family is refused by the pipelines.
GateReport epsilon_gate(const FamilyInput& family, const Config& cfg = {});

struct AverageResult {
    DiscreteLegendrian curve;            // the Legendrian average L
    double epsilon = 0.0;
    std::vector<double> d0_member;       // d0(N_g, L) per member
    double residual = 0.0;               // legendrian residual of L
    double lagrangian = 0.0;             // lagrangian residual (identity check)
    MoserTrace trace;
    GateReport gate;
    double d0_over_eps = 0.0;
    bool bound_ok = true;
    double weinstein_step = 0.0;
    // symplectization-only diagnostics
    double s_drift_sup = 0.0;
    double s_drift_quadrature_gap = 0.0;
};

struct BoundReport {
    bool ok = true;
    double max_d0 = 0.0;
    double ratio = 0.0; // max_d0 / epsilon (0 when epsilon == 0)
};

BoundReport bound_check(const AverageResult& result, const Config& cfg = {});

/// The full averaging pipeline through the contact Moser flow: the average
/// curve is the time-one preimage of N under the flow of the contact field.
AverageResult contact_moser_average(const FamilyInput& family, const Config& cfg = {});

/// The same average computed in the symplectization: flows the extended
/// field (v, a) from (N, s = 0) and discards the s-drift.
AverageResult symplectization_average(const FamilyInput& family, const Config& cfg = {});

/// Both pipelines over a shared chart (the usual entry point for scenarios).
struct PipelinePair {
    WeinsteinResult weinstein;
    AverageResult contact;
    AverageResult sympl;
    double pipelines_d0_gap = 0.0; // d0 between the two outputs
};
PipelinePair run_both_pipelines(const FamilyInput& family, const Config& cfg = {});

} // namespace legav
