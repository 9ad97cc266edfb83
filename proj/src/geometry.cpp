#include "legav/geometry.hpp"

#include "legav/ode.hpp"
#include "legav/spline.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace legav {

namespace {

using ode::State;

/// Geodesic right-hand side: state (x, v).
struct GeoRhs {
    const ContactModel& m;
    void operator()(double, const State<6>& y, State<6>& dy) const {
        const Vec3 x = y.head<3>(), v = y.tail<3>();
        std::array<Mat3, 3> G;
        m.christoffel(x, G);
        dy.head<3>() = v;
        for (int k = 0; k < 3; ++k) dy[3 + k] = -v.dot(G[k] * v);
    }
};

} // namespace

namespace detail {

int exp_steps_for(const ContactModel& m, double length) {
    if (m.id() == ModelId::Cylinder) return 1; // flat chart: RK4 is exact
    const int n = static_cast<int>(std::ceil(std::abs(length) / 0.008));
    return std::clamp(n, 4, 96);
}

Vec3 exp_fixed(const ContactModel& m, const Vec3& p, const Vec3& v, int nsteps, Vec3* end_v) {
    if (m.id() == ModelId::Cylinder) {
        if (end_v) *end_v = v;
        return p + v;
    }
    State<6> y0;
    y0.head<3>() = p;
    y0.tail<3>() = v;
    const State<6> y = ode::rk4_fixed<6>(GeoRhs{m}, 0.0, 1.0, y0, nsteps);
    if (end_v) *end_v = y.tail<3>();
    return y.head<3>();
}

Vec3 log_frozen(const ContactModel& m, const Vec3& p, const Vec3& q, const Vec3& v0, int iters,
                int exp_steps) {
    if (m.id() == ModelId::Cylinder) return m.coord_delta(p, q);
    Vec3 v = v0;
    for (int i = 0; i < iters; ++i) v += q - exp_fixed(m, p, v, exp_steps);
    return v;
}

} // namespace detail

GeodesicSegment exp_map_segment(const ContactModel& m, const Vec3& p, const Vec3& v, double t,
                                const Config& cfg) {
    State<6> y0;
    y0.head<3>() = p;
    y0.tail<3>() = v;
    GeodesicSegment seg;
    seg.model = m.id();
    seg.t0 = 0.0;
    seg.t1 = t;
    const auto steps = ode::integrate_adaptive<6>(GeoRhs{m}, 0.0, t, y0, cfg.exp_tol, cfg.exp_tol);
    seg.nodes.reserve(steps.size());
    for (const auto& st : steps)
        seg.nodes.push_back({st.t, st.y.head<3>(), st.y.tail<3>()});
    return seg;
}

ManifoldPoint exp_map(const ContactModel& m, const ManifoldPoint& p, const Vec3& v, double t,
                      const Config& cfg) {
    if (p.model != m.id()) throw Error(Errc::InvalidInput, "exp_map: point from another model");
    const GeodesicSegment seg = exp_map_segment(m, p.c, v, t, cfg);
    return {m.id(), m.normalize_point(seg.end_x())};
}

Vec3 log_map(const ContactModel& m, const Vec3& p, const Vec3& q, const Config& cfg) {
    if (m.id() == ModelId::Cylinder) return m.coord_delta(p, q);

    // chord iteration, run down to the floating-point floor so that solvers
    // built on top (feet, centers of mass) can resolve 1e-11 steps
    const double tol_hard = 3e-14 * (1.0 + q.norm());
    Vec3 v = q - p;
    double res_prev = std::numeric_limits<double>::max();
    int grow_count = 0;
    for (int it = 0; it < cfg.log_max_iter; ++it) {
        const int steps = detail::exp_steps_for(m, m.g_norm(p, v));
        const Vec3 x = detail::exp_fixed(m, p, v, steps);
        const Vec3 r = q - x;
        const double res = r.norm();
        if (res < tol_hard) return v;
        // plateau at the roundoff floor within the configured tolerance
        if (res < cfg.log_tol * (1.0 + v.norm()) && res > 0.7 * res_prev) return v;
        if (res > res_prev) {
            if (++grow_count >= 3) break;
        } else {
            grow_count = 0;
        }
        res_prev = res;
        v += r;
    }

    // chord iteration stalled: Newton with a finite-difference Jacobian
    const double h = 1e-6;
    for (int it = 0; it < cfg.log_max_iter; ++it) {
        const int steps = detail::exp_steps_for(m, m.g_norm(p, v));
        const Vec3 x = detail::exp_fixed(m, p, v, steps);
        const Vec3 r = q - x;
        if (r.norm() < cfg.log_tol * (1.0 + q.norm())) return v;
        Mat3 J;
        for (int k = 0; k < 3; ++k) {
            Vec3 e = Vec3::Zero();
            e[k] = h;
            J.col(k) =
                (detail::exp_fixed(m, p, v + e, steps) - detail::exp_fixed(m, p, v - e, steps)) /
                (2.0 * h);
        }
        v += J.fullPivLu().solve(r);
    }
    throw Error(Errc::OutOfInjectivity, "log_map: shooting did not converge");
}

Vec3 parallel_transport(const ContactModel& m, const GeodesicSegment& seg, const Vec3& w,
                        const Config& cfg) {
    if (m.id() == ModelId::Cylinder) return w;
    State<9> y0;
    y0.head<3>() = seg.start_x();
    y0.segment<3>(3) = seg.start_v();
    y0.tail<3>() = w;
    auto rhs = [&m](double, const State<9>& y, State<9>& dy) {
        const Vec3 x = y.head<3>(), v = y.segment<3>(3), u = y.tail<3>();
        std::array<Mat3, 3> G;
        m.christoffel(x, G);
        dy.head<3>() = v;
        for (int k = 0; k < 3; ++k) {
            dy[3 + k] = -v.dot(G[k] * v);
            dy[6 + k] = -v.dot(G[k] * u);
        }
    };
    const double tol = std::min(cfg.exp_tol, 1e-11);
    const auto steps = ode::integrate_adaptive<9>(rhs, seg.t0, seg.t1, y0, tol, tol);
    return steps.back().y.tail<3>();
}

Mat3 transport_columns(const ContactModel& m, const Vec3& p, const Vec3& v, const Mat3& cols,
                       int nsteps) {
    if (m.id() == ModelId::Cylinder) return cols;
    State<15> y0;
    y0.head<3>() = p;
    y0.segment<3>(3) = v;
    for (int c = 0; c < 3; ++c) y0.segment<3>(6 + 3 * c) = cols.col(c);
    auto rhs = [&m](double, const State<15>& y, State<15>& dy) {
        const Vec3 x = y.head<3>(), vel = y.segment<3>(3);
        std::array<Mat3, 3> G;
        m.christoffel(x, G);
        dy.head<3>() = vel;
        for (int k = 0; k < 3; ++k) dy[3 + k] = -vel.dot(G[k] * vel);
        for (int c = 0; c < 3; ++c) {
            const Vec3 u = y.segment<3>(6 + 3 * c);
            for (int k = 0; k < 3; ++k) dy[6 + 3 * c + k] = -vel.dot(G[k] * u);
        }
    };
    const State<15> y = ode::rk4_fixed<15>(rhs, 0.0, 1.0, y0, nsteps);
    Mat3 out;
    for (int c = 0; c < 3; ++c) out.col(c) = y.segment<3>(6 + 3 * c);
    return out;
}

Vec3 transport_vector(const ContactModel& m, const Vec3& p, const Vec3& v, const Vec3& w,
                      int nsteps) {
    if (m.id() == ModelId::Cylinder) return w;
    State<9> y0;
    y0.head<3>() = p;
    y0.segment<3>(3) = v;
    y0.tail<3>() = w;
    auto rhs = [&m](double, const State<9>& y, State<9>& dy) {
        const Vec3 x = y.head<3>(), vel = y.segment<3>(3), u = y.tail<3>();
        std::array<Mat3, 3> G;
        m.christoffel(x, G);
        dy.head<3>() = vel;
        for (int k = 0; k < 3; ++k) {
            dy[3 + k] = -vel.dot(G[k] * vel);
            dy[6 + k] = -vel.dot(G[k] * u);
        }
    };
    return ode::rk4_fixed<9>(rhs, 0.0, 1.0, y0, nsteps).tail<3>();
}

Vec3 karcher_mean(const ContactModel& m, const std::vector<Vec3>& points,
                  const std::vector<double>& weights, const Config& cfg) {
    if (points.empty() || points.size() != weights.size())
        throw Error(Errc::InvalidInput, "karcher_mean: points/weights size mismatch");
    double wsum = 0.0;
    for (double w : weights) wsum += w;
    if (std::abs(wsum - 1.0) > 1e-12)
        throw Error(Errc::InvalidInput, "karcher_mean: weights must sum to 1");

    Vec3 mean = points.front();
    // canonical summation order, so jointly permuting inputs is exact
    std::vector<int> order(points.size());
    for (int it = 0; it < cfg.karcher_max_iter; ++it) {
        std::vector<Vec3> logs(points.size());
        for (size_t i = 0; i < points.size(); ++i) logs[i] = log_map(m, mean, points[i], cfg);
        std::iota(order.begin(), order.end(), 0);
        std::sort(order.begin(), order.end(), [&](int a, int b) {
            if (weights[a] != weights[b]) return weights[a] < weights[b];
            for (int k = 0; k < 3; ++k)
                if (logs[a][k] != logs[b][k]) return logs[a][k] < logs[b][k];
            return false;
        });
        Vec3 step = Vec3::Zero();
        for (int i : order) step += weights[i] * logs[i];
        const double len = m.g_norm(mean, step);
        mean = m.normalize_point(
            detail::exp_fixed(m, mean, step, detail::exp_steps_for(m, len)));
        if (len < cfg.karcher_step_tol) return mean;
    }
    throw Error(Errc::SpreadTooLarge, "karcher_mean: no convergence (family too spread)");
}

// -- CurveModel ---------------------------------------------------------------

CurveModel::CurveModel(const ContactModel& m, std::vector<Vec3> samples,
                       std::vector<double> knots)
    : model_(m), pts_(std::move(samples)), s_(std::move(knots)) {
    const int n = static_cast<int>(pts_.size());
    if (n < 3 || static_cast<int>(s_.size()) != n + 1)
        throw Error(Errc::InvalidInput, "CurveModel: need >= 3 samples and n+1 knots");
    period_ = s_[n] - s_[0];
    if (!(period_ > 0.0)) throw Error(Errc::InvalidInput, "CurveModel: bad parameterization");

    // unwrap the angle coordinate so the polyline is continuous
    wrap_jump_ = 0.0;
    if (model_.wraps_angle()) {
        for (int i = 1; i < n; ++i) {
            const double d = model_.coord_delta(pts_[i - 1], pts_[i])[2];
            pts_[i][2] = pts_[i - 1][2] + d;
        }
        const double back = model_.coord_delta(
            model_.normalize_point(pts_[n - 1]), model_.normalize_point(pts_[0]))[2];
        const double total = pts_[n - 1][2] + back - pts_[0][2];
        wrap_jump_ = total; // net angle advance over one period (multiple of 2*pi +- eps)
    }

    std::vector<double> h(n);
    for (int i = 0; i < n; ++i) h[i] = s_[i + 1] - s_[i];
    m2_.assign(n, Vec3::Zero());
    for (int c = 0; c < 3; ++c) {
        std::vector<double> y(n);
        const double trend = (c == 2) ? wrap_jump_ / period_ : 0.0;
        for (int i = 0; i < n; ++i) y[i] = pts_[i][c] - trend * (s_[i] - s_[0]);
        const std::vector<double> m2 = detail::periodic_spline_m2(h, y);
        for (int i = 0; i < n; ++i) m2_[i][c] = m2[i];
    }
}

CurveModel CurveModel::from_samples(const ContactModel& m, const std::vector<Vec3>& samples) {
    const int n = static_cast<int>(samples.size());
    std::vector<double> knots(n + 1);
    knots[0] = 0.0;
    for (int i = 0; i < n; ++i) {
        const Vec3 a = samples[i], b = samples[(i + 1) % n];
        const Vec3 d = m.coord_delta(a, b);
        const Vec3 mid = m.normalize_point(a + 0.5 * d);
        knots[i + 1] = knots[i] + std::max(1e-12, std::sqrt(d.dot(m.metric(mid) * d)));
    }
    return CurveModel(m, samples, knots);
}

int CurveModel::segment_of(double s, double* local) const {
    const int n = size();
    double u = std::fmod(s - s_[0], period_);
    if (u < 0.0) u += period_;
    // binary search over knots
    int lo = 0, hi = n;
    while (hi - lo > 1) {
        const int mid = (lo + hi) / 2;
        if (s_[mid] - s_[0] <= u)
            lo = mid;
        else
            hi = mid;
    }
    *local = u - (s_[lo] - s_[0]);
    return lo;
}

Vec3 CurveModel::eval_unwrapped(double s) const {
    double u;
    const int i = segment_of(s, &u);
    const int n = size();
    const double h = s_[i + 1] - s_[i];
    const Vec3& a = pts_[i];
    const Vec3 b = (i + 1 < n) ? pts_[i + 1]
                               : pts_[0] + Vec3(0.0, 0.0, wrap_jump_);
    const Vec3& ma = m2_[i];
    const Vec3& mb = m2_[(i + 1) % n];
    const double t = u / h;
    const double t1 = 1.0 - t;
    return a + t * (b - a) +
           (h * h / 6.0) * ((t * t * t - t) * mb + (t1 * t1 * t1 - t1) * ma);
}

Vec3 CurveModel::eval(double s) const { return model_.normalize_point(eval_unwrapped(s)); }

Vec3 CurveModel::derivative(double s) const {
    double u;
    const int i = segment_of(s, &u);
    const int n = size();
    const double h = s_[i + 1] - s_[i];
    const Vec3& a = pts_[i];
    const Vec3 b = (i + 1 < n) ? pts_[i + 1] : pts_[0] + Vec3(0.0, 0.0, wrap_jump_);
    const Vec3& ma = m2_[i];
    const Vec3& mb = m2_[(i + 1) % n];
    const double t = u / h;
    return (b - a) / h +
           (h / 6.0) * ((3.0 * t * t - 1.0) * mb - (3.0 * (1.0 - t) * (1.0 - t) - 1.0) * ma);
}

Vec3 CurveModel::second_derivative(double s) const {
    double u;
    const int i = segment_of(s, &u);
    const int n = size();
    const double h = s_[i + 1] - s_[i];
    const double t = u / h;
    return (1.0 - t) * m2_[i] + t * m2_[(i + 1) % n];
}

Vec3 CurveModel::unit_tangent(double s) const {
    const Vec3 d = derivative(s);
    const Vec3 p = eval(s);
    return d / model_.g_norm(p, d);
}

Vec3 CurveModel::curvature_vector(double s) const {
    const Vec3 p = eval(s);
    const Vec3 d = derivative(s);
    const Vec3 dd = second_derivative(s);
    std::array<Mat3, 3> G;
    model_.christoffel(p, G);
    Vec3 acc = dd;
    for (int k = 0; k < 3; ++k) acc[k] += d.dot(G[k] * d);
    const Mat3 g = model_.metric(p);
    const double c2 = d.dot(g * d);
    const Vec3 tau = d / std::sqrt(c2);
    const Vec3 normal = acc - acc.dot(g * tau) * tau;
    return normal / c2;
}

int CurveModel::locate(const Vec3& x) const {
    int best = 0;
    double bd = std::numeric_limits<double>::max();
    for (int i = 0; i < size(); ++i) {
        const double d = model_.coord_delta(pts_[i], x).squaredNorm();
        if (d < bd) {
            bd = d;
            best = i;
        }
    }
    return best;
}

// -- nearest point ------------------------------------------------------------

namespace {

struct FootSolver {
    const CurveModel& curve;
    const ContactModel& m;
    const Vec3& x;
    const Config& cfg;
    Vec3 warm_log = Vec3::Zero();
    bool have_warm = false;

    /// One orthogonality value and quasi-Newton slope at parameter s.
    double newton_update(double s, int log_iters, int exp_steps, double* res) {
        const Vec3 q = curve.eval(s);
        const Vec3 d = curve.derivative(s);
        Vec3 u;
        if (m.id() == ModelId::Cylinder) {
            u = m.coord_delta(q, x);
        } else {
            const Vec3 v0 = have_warm ? warm_log : Vec3(x - q);
            u = (log_iters > 0)
                    ? detail::log_frozen(m, q, x, v0, log_iters, exp_steps)
                    : log_map(m, q, x, cfg);
            warm_log = u;
            have_warm = true;
        }
        const Mat3 g = m.metric(q);
        const double F = u.dot(g * d);
        std::array<Mat3, 3> G;
        m.christoffel(q, G);
        Vec3 acc = curve.second_derivative(s);
        for (int k = 0; k < 3; ++k) acc[k] += d.dot(G[k] * d);
        const double slope = -d.dot(g * d) + u.dot(g * acc);
        *res = F;
        return F / slope;
    }
};

} // namespace

FootResult nearest_point(const CurveModel& curve, const Vec3& x, const Config& cfg, double hint,
                         int frozen_iters, double uniq_rel) {
    const ContactModel& m = curve.model();
    const int n = curve.size();
    double s0;

    if (hint >= 0.0) {
        s0 = hint;
    } else {
        // full scan with second-minimum detection
        std::vector<double> d2(n);
        for (int i = 0; i < n; ++i)
            d2[i] = m.coord_delta(curve.sample(i), x).squaredNorm();
        int best = 0;
        for (int i = 1; i < n; ++i)
            if (d2[i] < d2[best]) best = i;
        // second local minimum, well separated along the curve
        int second = -1;
        const double min_sep = std::min(0.2 * curve.period(), 12.0 * curve.period() / n);
        for (int i = 0; i < n; ++i) {
            if (d2[i] <= d2[(i + 1) % n] && d2[i] <= d2[(i + n - 1) % n]) {
                double sep = std::abs(curve.knot(i) - curve.knot(best));
                sep = std::min(sep, curve.period() - sep);
                if (sep > min_sep && (second < 0 || d2[i] < d2[second])) second = i;
            }
        }
        if (second >= 0) {
            const double db = std::sqrt(d2[best]), ds = std::sqrt(d2[second]);
            if (ds <= db * (1.0 + uniq_rel) + 1e-12 && db > 1e-12)
                throw Error(Errc::NonUniqueNearest,
                            "nearest_point: two near-minimizers (gentleness violation?)");
        }
        s0 = curve.knot(best);
    }

    FootSolver solver{curve, m, x, cfg};
    const double span = m.coord_delta(curve.eval(s0), x).norm() + 1e-6;
    const int exp_steps = detail::exp_steps_for(m, span);
    double s = s0;

    if (frozen_iters > 0) {
        for (int it = 0; it < frozen_iters; ++it) {
            double res;
            s -= solver.newton_update(s, 3, exp_steps, &res);
        }
    } else {
        bool done = false;
        for (int it = 0; it < cfg.foot_max_iter; ++it) {
            double res;
            const double ds = solver.newton_update(s, it < 2 ? 4 : 0, exp_steps, &res);
            s -= ds;
            if (std::abs(res) < cfg.foot_tol * (1.0 + span) && std::abs(ds) < 1e-12) {
                done = true;
                break;
            }
            if (std::abs(ds) < 1e-15) {
                done = true;
                break;
            }
        }
        if (!done) {
            double res;
            solver.newton_update(s, 0, exp_steps, &res);
            if (std::abs(res) > 1e6 * cfg.foot_tol * (1.0 + span))
                throw Error(Errc::NonUniqueNearest, "nearest_point: no convergence");
        }
    }

    FootResult out;
    out.s = s;
    out.foot = curve.eval(s);
    out.log_x = (m.id() == ModelId::Cylinder)
                    ? m.coord_delta(out.foot, x)
                    : (frozen_iters > 0
                           ? detail::log_frozen(m, out.foot, x,
                                                solver.have_warm ? solver.warm_log : Vec3(x - out.foot),
                                                3, exp_steps)
                           : log_map(m, out.foot, x, cfg));
    out.dist = m.g_norm(out.foot, out.log_x);
    return out;
}

// -- distances ----------------------------------------------------------------

D0Result d0(const CurveModel& to, const CurveModel& from, const Config& cfg) {
    D0Result r;
    const int n = from.size();
    for (int i = 0; i < n; ++i) {
        for (int half = 0; half < 2; ++half) {
            const double s =
                half ? 0.5 * (from.knot(i) + (i + 1 < n ? from.knot(i + 1)
                                                        : from.knot(0) + from.period()))
                     : from.knot(i);
            const Vec3 x = from.eval(s);
            const FootResult f = nearest_point(to, x, cfg);
            r.value = std::max(r.value, f.dist);
        }
    }
    double max_sp = 0.0, kappa = 0.0;
    for (int i = 0; i < n; ++i) {
        const double next = (i + 1 < n) ? from.knot(i + 1) : from.knot(0) + from.period();
        max_sp = std::max(max_sp, next - from.knot(i));
    }
    for (int i = 0; i < to.size(); ++i)
        kappa = std::max(kappa, to.curvature_vector(to.knot(i)).norm());
    r.resolution = max_sp * max_sp * std::max(kappa, 1.0);
    return r;
}

double subspace_distance(const Mat3& gram, const Eigen::Matrix<double, 3, Eigen::Dynamic>& F,
                         const Eigen::Matrix<double, 3, Eigen::Dynamic>& G) {
    if (F.cols() != G.cols() || F.cols() == 0 || F.cols() > 3)
        throw Error(Errc::InvalidInput, "subspace_distance: dimension mismatch");
    auto orthonormalize = [&](Eigen::Matrix<double, 3, Eigen::Dynamic> B) {
        for (int c = 0; c < B.cols(); ++c) {
            for (int k = 0; k < c; ++k) B.col(c) -= B.col(k).dot(gram * B.col(c)) * B.col(k);
            const double nrm = std::sqrt(B.col(c).dot(gram * B.col(c)));
            if (nrm < 1e-14)
                throw Error(Errc::InvalidInput, "subspace_distance: degenerate basis");
            B.col(c) /= nrm;
        }
        return B;
    };
    const auto Fo = orthonormalize(F);
    const auto Go = orthonormalize(G);
    const Eigen::MatrixXd M = Fo.transpose() * gram * Go;
    const auto sv = M.jacobiSvd().singularValues();
    const double smin = std::clamp(sv(sv.size() - 1), -1.0, 1.0);
    return std::acos(smin);
}

D1Result d1(const CurveModel& to, const CurveModel& from, const std::vector<Vec3>& tangents,
            const Config& cfg) {
    const ContactModel& m = to.model();
    const int n = from.size();
    if (static_cast<int>(tangents.size()) != n)
        throw Error(Errc::InvalidInput, "d1: tangent count mismatch");

    D1Result r;
    std::vector<double> feet(n);
    for (int i = 0; i < n; ++i) {
        const Vec3 x = from.eval(from.knot(i));
        const FootResult f = nearest_point(to, x, cfg);
        feet[i] = f.s;
        r.max_length = std::max(r.max_length, f.dist);

        Vec3 tn = to.unit_tangent(f.s);
        Vec3 transported = tn;
        if (f.dist > 1e-14 && m.id() != ModelId::Cylinder) {
            Mat3 cols = Mat3::Zero();
            cols.col(0) = tn;
            transported =
                transport_columns(m, f.foot, f.log_x, cols,
                                  detail::exp_steps_for(m, f.dist))
                    .col(0);
        }
        Eigen::Matrix<double, 3, Eigen::Dynamic> A(3, 1), B(3, 1);
        A.col(0) = tangents[i];
        B.col(0) = transported;
        const double ang = subspace_distance(m.metric(x), A, B);
        r.max_angle = std::max(r.max_angle, ang);
    }

    // section property: feet must advance cyclically monotonically
    double total = 0.0;
    for (int i = 0; i < n; ++i) {
        double d = feet[(i + 1) % n] - feet[i];
        d = std::fmod(d, to.period());
        if (d < -0.5 * to.period()) d += to.period();
        if (d > 0.5 * to.period()) d -= to.period();
        if (d < -1e-6 * to.period())
            throw Error(Errc::NotASection, "d1: nearest-point map is not a section");
        total += d;
    }
    if (std::abs(total - to.period()) > 0.5 * to.period())
        throw Error(Errc::NotASection, "d1: nearest-point map does not wind once");

    r.value = std::max(r.max_length, r.max_angle);
    return r;
}

// -- gentleness ---------------------------------------------------------------

GentlenessReport gentleness_report(const CurveModel& curve, double tube_radius, int n_samples,
                                   const Config& cfg) {
    const ContactModel& m = curve.model();
    GentlenessReport rep;
    const int n = curve.size();

    // (i) normal injectivity: curvature radius and half the non-local gap
    double kappa = 0.0;
    for (int i = 0; i < n; ++i)
        kappa = std::max(kappa, curve.curvature_vector(curve.knot(i)).norm());
    const double r_curv = kappa > 1e-12 ? 1.0 / kappa : 1e9;
    double gap = std::numeric_limits<double>::max();
    const double min_sep = std::min(0.25 * curve.period(), 3.0 * std::min(r_curv, 1.0));
    for (int i = 0; i < n; ++i) {
        for (int j = i + 1; j < n; ++j) {
            double sep = curve.knot(j) - curve.knot(i);
            sep = std::min(sep, curve.period() - sep);
            if (sep < min_sep) continue;
            const Vec3 d = m.coord_delta(curve.sample(i), curve.sample(j));
            const Vec3 mid = m.normalize_point(curve.sample(i) + 0.5 * d);
            gap = std::min(gap, std::sqrt(d.dot(m.metric(mid) * d)));
        }
    }
    rep.normal_injectivity = std::min(r_curv, 0.5 * gap);

    // (ii) curvature over the tube of radius one about the curve
    const int n_probe = std::max(8, n_samples / 8);
    rep.tube_samples = 0;
    double ksup = 0.0;
    uint64_t state = 88172645463325252ull; // xorshift64, deterministic probes
    auto next01 = [&state]() {
        state ^= state << 13;
        state ^= state >> 7;
        state ^= state << 17;
        return static_cast<double>(state >> 11) * 0x1.0p-53;
    };
    for (int i = 0; i < n_probe; ++i) {
        const double s = curve.period() * i / n_probe;
        const Vec3 q = curve.eval(s);
        const double r = std::min(1.0, 20.0 * tube_radius) * next01();
        Vec3 dir(next01() * 2.0 - 1.0, next01() * 2.0 - 1.0, next01() * 2.0 - 1.0);
        if (dir.norm() < 1e-6) dir = Vec3(1, 0, 0);
        dir /= m.g_norm(q, dir);
        const Vec3 p = m.normalize_point(
            detail::exp_fixed(m, q, r * dir, detail::exp_steps_for(m, r)));
        const Mat3 F = m.frame(p);
        for (int a = 0; a < 3; ++a)
            for (int b = a + 1; b < 3; ++b) {
                ksup = std::max(ksup, std::abs(m.sectional_curvature(p, F.col(a), F.col(b))));
                ++rep.tube_samples;
            }
    }
    rep.curvature_sup = ksup;

    // (iii) injectivity radius of tube points: Jacobi probes up to the cap
    rep.probe_length = 1.2;
    double inj = rep.probe_length;
    if (m.id() == ModelId::Heisenberg) {
        const int n_geo = 12;
        for (int i = 0; i < n_geo; ++i) {
            const Vec3 q = curve.eval(curve.period() * i / n_geo);
            Vec3 dir(next01() * 2.0 - 1.0, next01() * 2.0 - 1.0, next01() * 2.0 - 1.0);
            dir /= m.g_norm(q, dir);
            // joint geodesic + Jacobi system, J(0)=0, J'(0)=I
            ode::State<24> y0;
            y0.setZero();
            y0.head<3>() = q;
            y0.segment<3>(3) = dir;
            for (int c = 0; c < 3; ++c) y0[15 + 3 * c + c] = 1.0;
            // state: (x, v, J columns, K columns) with K = covariant DJ/dt
            auto rhs = [&m](double, const ode::State<24>& y, ode::State<24>& dy) {
                const Vec3 x = y.head<3>(), v = y.segment<3>(3);
                std::array<Mat3, 3> G;
                m.christoffel(x, G);
                dy.head<3>() = v;
                for (int k = 0; k < 3; ++k) dy[3 + k] = -v.dot(G[k] * v);
                for (int c = 0; c < 3; ++c) {
                    const Vec3 J = y.segment<3>(6 + 3 * c), K = y.segment<3>(15 + 3 * c);
                    const Vec3 R = m.riemann(x, J, v, v);
                    for (int k = 0; k < 3; ++k) {
                        dy[6 + 3 * c + k] = K[k] - v.dot(G[k] * J);
                        dy[15 + 3 * c + k] = -R[k] - v.dot(G[k] * K);
                    }
                }
            };
            ode::State<24> y = y0;
            const int nst = 48;
            const double h = rep.probe_length / nst;
            for (int stp = 0; stp < nst; ++stp) {
                y = ode::rk4_fixed<24>(rhs, 0.0, h, y, 1);
                Mat3 J;
                for (int c = 0; c < 3; ++c) J.col(c) = y.segment<3>(6 + 3 * c);
                const double t = (stp + 1) * h;
                const double smin = J.jacobiSvd().singularValues()(2);
                if (smin < 0.05 * t) {
                    inj = std::min(inj, t);
                    break;
                }
            }
        }
    } else {
        inj = std::min(rep.probe_length, kPi); // flat, but the angle circle closes at 2*pi
    }
    rep.point_injectivity = inj;

    rep.pass_normal_injectivity = rep.normal_injectivity >= 1.0;
    rep.pass_curvature = rep.curvature_sup <= 1.0;
    rep.pass_point_injectivity = rep.point_injectivity >= 1.0;
    (void)cfg;
    return rep;
}

} // namespace legav
