#include "legav/averaging.hpp"

#include "legav/ode.hpp"
#include "legav/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace legav {

namespace {

Mat3 canonical_frame(const ContactModel& m, const Vec3& q, const Vec3& tangent) {
    const Mat3 g = m.metric(q);
    Vec3 tau = tangent / std::sqrt(tangent.dot(g * tangent));
    Vec3 n1 = m.reeb(q);
    n1 -= n1.dot(g * tau) * tau;
    n1 /= std::sqrt(n1.dot(g * n1));
    Vec3 n2 = m.complex_rot(q, tau);
    n2 -= n2.dot(g * tau) * tau + n2.dot(g * n1) * n1;
    n2 /= std::sqrt(n2.dot(g * n2));
    Mat3 F;
    F.col(0) = tau;
    F.col(1) = n1;
    F.col(2) = n2;
    return F;
}

} // namespace

Mat3 TubularChart::frame_at(double s) const {
    return canonical_frame(model, base.eval(s), base.derivative(s));
}

Vec3 TubularChart::sigma_at(int g, double s) const {
    const Member& mem = members[g];
    if (mem.identity) return Vec3::Zero();
    const Mat3 F = frame_at(s);
    return mem.sigma1.eval(s) * F.col(1) + mem.sigma2.eval(s) * F.col(2);
}

// -- Weinstein average ----------------------------------------------------------

namespace {

/// Parameter on `curve` of the point cut out by the normal space at q:
/// <log_q(curve(s)), tau>_g(q) = 0, solved quasi-Newton.
double section_param(const ContactModel& m, const CurveModel& curve, const Vec3& q,
                     const Vec3& tau, double init) {
    const Mat3 g = m.metric(q);
    const Vec3 gtau = g * tau;
    double s = init;
    Vec3 warm = m.coord_delta(q, curve.eval(init));
    for (int it = 0; it < 40; ++it) {
        const Vec3 y = curve.eval(s);
        const Vec3 u = (m.id() == ModelId::Cylinder)
                           ? m.coord_delta(q, y)
                           : detail::log_frozen(m, q, y, warm, it < 2 ? 6 : 3,
                                                detail::exp_steps_for(m, warm.norm() + 1e-9));
        warm = u;
        const double G = u.dot(gtau);
        const double slope = curve.derivative(s).dot(gtau);
        const double ds = G / slope;
        s -= ds;
        if (std::abs(G) < 1e-14 * (1.0 + u.norm()) || std::abs(ds) < 1e-15) break;
    }
    return s;
}

} // namespace

WeinsteinResult weinstein_average(const FamilyInput& family, const Config& cfg) {
    family.validate();
    const ContactModel m = family.members.front().model;
    const int nm = family.size();

    std::vector<CurveModel> cms;
    cms.reserve(nm);
    for (const auto& mem : family.members) cms.push_back(mem.curve_model());

    // canonical start member: lexicographically smallest sample array, so a
    // joint permutation of (members, weights) reproduces identical output
    int start = 0;
    auto lex_less = [](const std::vector<Vec3>& a, const std::vector<Vec3>& b) {
        const size_t n = std::min(a.size(), b.size());
        for (size_t i = 0; i < n; ++i)
            for (int k = 0; k < 3; ++k) {
                if (a[i][k] < b[i][k]) return true;
                if (a[i][k] > b[i][k]) return false;
            }
        return a.size() < b.size();
    };
    for (int g = 1; g < nm; ++g)
        if (lex_less(family.members[g].points, family.members[start].points)) start = g;

    const int n = family.members[start].size();
    std::vector<Vec3> pts(n);
    std::vector<Vec3> tans(n);
    std::vector<int> iterations(n, 0);
    std::vector<double> final_step(n, 0.0);

    parallel_for(n, cfg.threads, [&](size_t i) {
        std::vector<double> hints(nm, -1.0);
        std::vector<Vec3> feet(nm);
        // The raw center-of-mass update carries an O(eps^2) drift along the
        // curve (the map is only neutral tangentially in the continuum), so
        // the iteration applies the update's component normal to a frozen
        // reference tangent. This pins the parameterization gauge; the limit
        // set is the same invariant curve.
        const Vec3 tau_ref = family.members[start].tangents[i];
        auto limit = [&](Vec3 x, int* iters, double* step_out) {
            for (int it = 0; it < cfg.karcher_max_iter; ++it) {
                for (int g = 0; g < nm; ++g) {
                    const FootResult f = nearest_point(cms[g], x, cfg, hints[g]);
                    hints[g] = f.s;
                    feet[g] = f.foot;
                }
                const Vec3 next = karcher_mean(m, feet, family.weights, cfg);
                Vec3 d = m.coord_delta(x, next);
                const Mat3 gx = m.metric(x);
                d -= (d.dot(gx * tau_ref) / tau_ref.dot(gx * tau_ref)) * tau_ref;
                const double step = std::sqrt(d.dot(gx * d));
                x = m.normalize_point(x + d);
                if (iters) *iters = it + 1;
                if (step_out) *step_out = step;
                if (step < cfg.karcher_step_tol) return x;
            }
            throw Error(Errc::SpreadTooLarge,
                        "weinstein_average: family too spread to converge");
        };
        const Vec3 x0 = family.members[start].points[i];
        pts[i] = limit(x0, &iterations[i], &final_step[i]);

        // tangent of the average via Richardson differences of the limit map,
        // seeded along the start member's exact tangent
        const double h = 1e-3;
        const Vec3 tau0 = family.members[start].tangents[i];
        const Vec3 lp = limit(detail::exp_fixed(m, x0, h * tau0, 2), nullptr, nullptr);
        const Vec3 lm = limit(detail::exp_fixed(m, x0, -h * tau0, 2), nullptr, nullptr);
        const Vec3 lp2 = limit(detail::exp_fixed(m, x0, 0.5 * h * tau0, 2), nullptr, nullptr);
        const Vec3 lm2 = limit(detail::exp_fixed(m, x0, -0.5 * h * tau0, 2), nullptr, nullptr);
        const Vec3 dh = m.coord_delta(lm, lp) / (2.0 * h);
        const Vec3 dh2 = m.coord_delta(lm2, lp2) / h;
        const Vec3 tau = (4.0 * dh2 - dh) / 3.0;
        tans[i] = tau / m.g_norm(pts[i], tau);
    });

    WeinsteinResult out;
    out.max_iterations = *std::max_element(iterations.begin(), iterations.end());
    out.final_step = *std::max_element(final_step.begin(), final_step.end());

    CurveModel base = CurveModel::from_samples(m, pts);
    DiscreteLegendrian avg;
    avg.model = m;
    avg.points = pts;
    avg.tangents = tans;
    avg.arclen.resize(n + 1);
    for (int i = 0; i < n; ++i) avg.arclen[i] = base.knot(i);
    avg.arclen[n] = base.knot(0) + base.period();
    avg.label = "weinstein-average";
    out.average = avg;

    // safe tube radius from the curvature and self-gap of N
    double kappa = 1e-12, gap = std::numeric_limits<double>::max();
    for (int i = 0; i < n; ++i)
        kappa = std::max(kappa, base.curvature_vector(base.knot(i)).norm());
    const double min_sep = std::min(0.25 * base.period(), 3.0 * std::min(1.0 / kappa, 1.0));
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j) {
            double sep = base.knot(j) - base.knot(i);
            sep = std::min(sep, base.period() - sep);
            if (sep < min_sep) continue;
            gap = std::min(gap, m.coord_delta(base.sample(i), base.sample(j)).norm());
        }
    const double safe = 0.5 * std::min(1.0 / kappa, 0.5 * gap);

    TubularChart chart;
    chart.model = m;
    chart.base = base;
    chart.radius = std::min(cfg.tube_radius, safe);

    std::vector<double> knots(n);
    for (int i = 0; i < n; ++i) knots[i] = base.knot(i);
    for (int g = 0; g < nm; ++g) {
        TubularChart::Member mem;
        mem.curve = cms[g];
        mem.weight = family.weights[g];
        std::vector<double> k1(n), k2(n);
        double smax = 0.0;
        double shint = -1.0;
        for (int i = 0; i < n; ++i) {
            const Vec3 q = base.sample(i);
            const Mat3 F = canonical_frame(m, q, base.derivative(base.knot(i)));
            double init = shint;
            if (init < 0.0) init = cms[g].knot(cms[g].locate(q));
            const double sg = section_param(m, cms[g], q, F.col(0), init);
            shint = sg + (i + 1 < n ? base.knot(i + 1) - base.knot(i) : 0.0) *
                             cms[g].period() / base.period();
            const Vec3 y = cms[g].eval(sg);
            const Vec3 u = (m.id() == ModelId::Cylinder) ? m.coord_delta(q, y)
                                                         : log_map(m, q, y, cfg);
            const Mat3 gq = m.metric(q);
            k1[i] = u.dot(gq * F.col(1));
            k2[i] = u.dot(gq * F.col(2));
            smax = std::max(smax, std::sqrt(u.dot(gq * u)));
        }
        mem.sigma_max = smax;
        mem.identity = smax < 1e-12;
        if (!mem.identity) {
            mem.sigma1 = PeriodicSpline1D(knots, base.period(), k1);
            mem.sigma2 = PeriodicSpline1D(knots, base.period(), k2);
        }
        mem.steps_section = detail::exp_steps_for(m, smax + 1e-9);
        if (smax > chart.radius)
            throw Error(Errc::SpreadTooLarge,
                        "weinstein_average: member section exceeds the tube radius");
        chart.members.push_back(std::move(mem));
    }
    chart.steps_tube = detail::exp_steps_for(m, 1.3 * chart.radius);
    out.chart = std::move(chart);
    return out;
}

// -- tube maps and the averaged form --------------------------------------------

namespace {

struct ChartOps {
    const TubularChart& chart;
    const Config& cfg;

    const ContactModel& model() const { return chart.model; }

    /// phi_g^{-1} given the (already solved) foot of x on N. Output aligned
    /// to x's chart representative so stencils stay smooth across the angle
    /// wrap.
    Vec3 member_map(int g, const FootResult& f, const Vec3& x) const {
        const TubularChart::Member& mem = chart.members[g];
        if (mem.identity) return x;
        const ContactModel& m = chart.model;
        const Mat3 F = canonical_frame(m, f.foot, chart.base.derivative(f.s));
        const Vec3 u = mem.sigma1.eval(f.s) * F.col(1) + mem.sigma2.eval(f.s) * F.col(2);
        const Vec3 qp = detail::exp_fixed(m, f.foot, u, mem.steps_section);
        const Vec3 wp = transport_vector(m, f.foot, u, f.log_x, mem.steps_section);
        const Vec3 x2 = detail::exp_fixed(m, qp, wp, chart.steps_tube);
        return x + m.coord_delta(x, x2);
    }

    FormDeficit deficit(const Vec3& x, TubeWorkspace& ws) const {
        const ContactModel& m = chart.model;
        double hint = ws.foot_hint;
        if (hint < 0.0) hint = chart.base.knot(chart.base.locate(x));
        const FootResult f = nearest_point(chart.base, x, cfg, hint);
        ws.foot_hint = f.s;
        if (f.dist > chart.radius)
            throw Error(Errc::TubeEscape, "averaging flow left the tubular neighborhood");

        FormDeficit d;
        d.theta0 = m.theta(x);
        d.dtheta0 = m.dtheta(x);
        d.foot_s = f.s;
        d.foot_dist = f.dist;
        d.theta_dot.setZero();
        d.dtheta_dot.setZero();

        std::vector<int> live;
        for (int g = 0; g < static_cast<int>(chart.members.size()); ++g)
            if (!chart.members[g].identity) live.push_back(g);
        if (live.empty()) return d;

        const int nl = static_cast<int>(live.size());
        std::vector<Vec3> yc(nl);
        for (int k = 0; k < nl; ++k) yc[k] = member_map(live[k], f, x);

        // Richardson-corrected central differences of phi^{-1}. Stencil foot
        // solves run a fixed two corrections from the converged center, which
        // keeps the difference quotients smooth.
        const double h = cfg.fd_step;
        std::vector<Mat3> J(nl);
        for (int c = 0; c < 3; ++c) {
            Vec3 e = Vec3::Zero();
            e[c] = 1.0;
            std::array<std::vector<Vec3>, 4> ys; // +h, -h, +h/2, -h/2
            const double offs[4] = {h, -h, 0.5 * h, -0.5 * h};
            for (int o = 0; o < 4; ++o) {
                const Vec3 xs = x + offs[o] * e;
                const FootResult fs = nearest_point(chart.base, xs, cfg, f.s, 2);
                ys[o].resize(nl);
                for (int k = 0; k < nl; ++k) ys[o][k] = member_map(live[k], fs, xs);
            }
            for (int k = 0; k < nl; ++k) {
                const Vec3 dh = (ys[0][k] - ys[1][k]) / (2.0 * h);
                const Vec3 dh2 = (ys[2][k] - ys[3][k]) / h;
                J[k].col(c) = (4.0 * dh2 - dh) / 3.0;
            }
        }

        // theta_g = J^T theta(y), dtheta_g = J^T D(y) J; canonical summation
        // order over (weight, components) so member permutations are exact
        std::vector<Vec3> th(nl);
        std::vector<Mat3> Dh(nl);
        for (int k = 0; k < nl; ++k) {
            th[k] = J[k].transpose() * m.theta(yc[k]);
            Dh[k] = J[k].transpose() * m.dtheta(yc[k]) * J[k];
        }
        std::vector<int> order(nl);
        std::iota(order.begin(), order.end(), 0);
        std::sort(order.begin(), order.end(), [&](int a, int b) {
            const double wa = chart.members[live[a]].weight;
            const double wb = chart.members[live[b]].weight;
            if (wa != wb) return wa < wb;
            for (int i = 0; i < 3; ++i)
                if (th[a][i] != th[b][i]) return th[a][i] < th[b][i];
            return false;
        });
        for (int idx : order) {
            const double w = chart.members[live[idx]].weight;
            d.theta_dot += w * (th[idx] - d.theta0);
            d.dtheta_dot += w * (Dh[idx] - d.dtheta0);
        }
        d.dtheta_dot = (0.5 * (d.dtheta_dot - d.dtheta_dot.transpose())).eval();
        return d;
    }
};

/// Two-vector basis of ker(theta_t) built from the coordinate frame.
void contact_basis(const Vec3& theta_t, Vec3& b1, Vec3& b2) {
    int iz = 0;
    for (int i = 1; i < 3; ++i)
        if (std::abs(theta_t[i]) > std::abs(theta_t[iz])) iz = i;
    const double tz = theta_t[iz];
    int j = 0;
    Vec3 b[2];
    for (int i = 0; i < 3; ++i) {
        if (i == iz) continue;
        Vec3 e = Vec3::Unit(i);
        b[j++] = e - (theta_t[i] / tz) * Vec3::Unit(iz);
    }
    b1 = b[0];
    b2 = b[1];
}

} // namespace

Vec3 contact_moser_field_from(const FormDeficit& d, double t, double* margin_out) {
    const Vec3 tht = d.theta_t(t);
    const Mat3 Dt = d.dtheta_t(t);
    Vec3 b1, b2;
    contact_basis(tht, b1, b2);
    const double a = b1.dot(Dt * b2);
    const double a0 = b1.dot(d.dtheta0 * b2);
    const double margin = (std::abs(a0) > 1e-300) ? a / a0 : 0.0;
    if (margin_out) *margin_out = margin;
    if (margin <= 1e-6)
        throw Error(Errc::DegenerateForm, "contact form family degenerated along the flow");
    const double c1 = -d.theta_dot.dot(b2) / a;
    const double c2 = d.theta_dot.dot(b1) / a;
    return c1 * b1 + c2 * b2;
}

Vec3 contact_moser_field(const TubularChart& chart, const Vec3& x, double t, TubeWorkspace& ws,
                         const Config& cfg, double* margin) {
    const FormDeficit d = ChartOps{chart, cfg}.deficit(x, ws);
    return contact_moser_field_from(d, t, margin);
}

FormDeficit averaged_form_deficit(const TubularChart& chart, const Vec3& x, TubeWorkspace& ws,
                                  const Config& cfg) {
    return ChartOps{chart, cfg}.deficit(x, ws);
}

Vec3 tubular_diffeo_eval(const TubularChart& chart, int g, const Vec3& x, TubeDirection dir,
                         const Config& cfg) {
    if (g < 0 || g >= static_cast<int>(chart.members.size()))
        throw Error(Errc::InvalidInput, "tubular_diffeo_eval: bad member index");
    const ChartOps ops{chart, cfg};
    const ContactModel& m = chart.model;
    if (dir == TubeDirection::Inverse) {
        const FootResult f = nearest_point(chart.base, x, cfg);
        if (f.dist > chart.radius)
            throw Error(Errc::DomainEscape, "tubular_diffeo_eval: point outside the tube");
        return m.normalize_point(ops.member_map(g, f, x));
    }
    // forward: solve phi^{-1}(y) = x by Newton on the bundle map
    Vec3 y = x;
    double hint = -1.0;
    for (int it = 0; it < 30; ++it) {
        const FootResult f = nearest_point(chart.base, y, cfg, hint);
        hint = f.s;
        if (f.dist > 2.0 * chart.radius)
            throw Error(Errc::DomainEscape, "tubular_diffeo_eval: left the tube while solving");
        const Vec3 r = m.coord_delta(x, ops.member_map(g, f, y));
        if (r.norm() < 1e-12 * (1.0 + x.norm())) return m.normalize_point(y);
        Mat3 J;
        const double h = cfg.fd_step;
        for (int c = 0; c < 3; ++c) {
            Vec3 e = Vec3::Zero();
            e[c] = h;
            const FootResult fp = nearest_point(chart.base, y + e, cfg, f.s, 2);
            const FootResult fm = nearest_point(chart.base, y - e, cfg, f.s, 2);
            J.col(c) = (ops.member_map(g, fp, y + e) - ops.member_map(g, fm, y - e)) / (2.0 * h);
        }
        y -= J.fullPivLu().solve(r);
    }
    throw Error(Errc::DomainEscape, "tubular_diffeo_eval: forward solve did not converge");
}

// -- symplectization -------------------------------------------------------------

double omega_bar_eval(const ContactModel& m, const Vec3& p, const Vec3& v, double a,
                      const Vec3& w, double b, double s) {
    const Vec3 th = m.theta(p);
    const double wedge = a * th.dot(w) - b * th.dot(v);
    return std::exp(s) * (wedge + v.dot(m.dtheta(p) * w));
}

double lagrangian_residual(const DiscreteLegendrian& curve) {
    double r = 0.0;
    for (int i = 0; i < curve.size(); ++i) {
        const double val = omega_bar_eval(curve.model, curve.points[i], curve.tangents[i], 0.0,
                                          Vec3::Zero(), 1.0, 0.0);
        r = std::max(r, std::abs(val));
    }
    return r;
}

Vec4 symplectization_moser_field_from(const FormDeficit& d, double t, double s,
                                      bool cross_check) {
    const Vec3 tht = d.theta_t(t);
    const Mat3 Dt = d.dtheta_t(t);
    const double es = std::exp(s);
    Mat4 Om = Mat4::Zero();
    Om.topLeftCorner<3, 3>() = es * Dt;
    for (int i = 0; i < 3; ++i) {
        Om(i, 3) = -es * tht[i];
        Om(3, i) = es * tht[i];
    }
    Vec4 rhs;
    rhs.head<3>() = -es * d.theta_dot;
    rhs[3] = 0.0;
    const Vec4 sol = Om.fullPivLu().solve(rhs);
    if ((Om * sol - rhs).norm() > 1e-10 * (1.0 + rhs.norm()))
        throw Error(Errc::DegenerateForm, "symplectization form degenerate");

    if (cross_check) {
        const Vec3 vc = contact_moser_field_from(d, t);
        if ((sol.head<3>() - vc).norm() > 1e-9 * (1.0 + vc.norm()))
            throw Error(Errc::DegenerateForm,
                        "symplectization field does not match the contact field");
        const Vec3 dvec(Dt(2, 1), Dt(0, 2), Dt(1, 0));
        const Vec3 Rt = dvec / tht.dot(dvec);
        if (std::abs(sol[3] + d.theta_dot.dot(Rt)) > 1e-9 * (1.0 + std::abs(sol[3])))
            throw Error(Errc::DegenerateForm,
                        "symplectization field s-component does not match -theta_dot(Reeb)");
    }
    return sol;
}

Vec4 symplectization_moser_field(const TubularChart& chart, const Vec3& x, double t, double s,
                                 TubeWorkspace& ws, const Config& cfg) {
    const FormDeficit d = ChartOps{chart, cfg}.deficit(x, ws);
    return symplectization_moser_field_from(d, t, s, true);
}

// -- gates -----------------------------------------------------------------------

GateReport epsilon_gate(const FamilyInput& family, const Config& cfg) {
    family.validate();
    GateReport rep;
    rep.threshold = cfg.epsilon_paper;
    rep.strict = cfg.strict;
    const int nm = family.size();
    std::vector<CurveModel> cms;
    for (const auto& mem : family.members) cms.push_back(mem.curve_model());
    double eps = 0.0;
    for (int i = 0; i < nm; ++i)
        for (int j = 0; j < nm; ++j) {
            if (i == j) continue;
            eps = std::max(eps, d1(cms[i], cms[j], family.members[j].tangents, cfg).value);
        }
    rep.epsilon = eps;
    rep.paper_regime = eps < cfg.epsilon_paper;
    rep.refused = cfg.strict && !rep.paper_regime;
    return rep;
}

BoundReport bound_check(const AverageResult& result, const Config& cfg) {
    BoundReport rep;
    for (double d : result.d0_member) rep.max_d0 = std::max(rep.max_d0, d);
    if (result.epsilon > 0.0) {
        rep.ratio = rep.max_d0 / result.epsilon;
        rep.ok = rep.max_d0 < cfg.d0_bound_factor * result.epsilon;
    } else {
        rep.ratio = 0.0;
        rep.ok = rep.max_d0 <= 1e-9;
    }
    return rep;
}

// -- the flows --------------------------------------------------------------------

namespace {

constexpr int kTraceBins = 11;

struct TraceAccum {
    double min_margin[kTraceBins];
    double sup_speed[kTraceBins];
    double max_resid[kTraceBins];
    TraceAccum() {
        std::fill_n(min_margin, kTraceBins, 1.0);
        std::fill_n(sup_speed, kTraceBins, 0.0);
        std::fill_n(max_resid, kTraceBins, 0.0);
    }
    void record(double t, double margin, double speed, double resid) {
        int b = static_cast<int>(std::lround((1.0 - t) * (kTraceBins - 1)));
        b = std::clamp(b, 0, kTraceBins - 1);
        min_margin[b] = std::min(min_margin[b], margin);
        sup_speed[b] = std::max(sup_speed[b], speed);
        max_resid[b] = std::max(max_resid[b], resid);
    }
    void merge(const TraceAccum& o) {
        for (int b = 0; b < kTraceBins; ++b) {
            min_margin[b] = std::min(min_margin[b], o.min_margin[b]);
            sup_speed[b] = std::max(sup_speed[b], o.sup_speed[b]);
            max_resid[b] = std::max(max_resid[b], o.max_resid[b]);
        }
    }
};

MoserTrace finalize_trace(const std::vector<TraceAccum>& accs) {
    MoserTrace tr;
    TraceAccum all;
    for (const auto& a : accs) all.merge(a);
    tr.t_grid.resize(kTraceBins);
    tr.min_margin.assign(all.min_margin, all.min_margin + kTraceBins);
    tr.sup_speed.assign(all.sup_speed, all.sup_speed + kTraceBins);
    tr.max_residual.assign(all.max_resid, all.max_resid + kTraceBins);
    for (int b = 0; b < kTraceBins; ++b) {
        tr.t_grid[b] = 1.0 - static_cast<double>(b) / (kTraceBins - 1);
        tr.global_min_margin = std::min(tr.global_min_margin, tr.min_margin[b]);
        tr.global_sup_speed = std::max(tr.global_sup_speed, tr.sup_speed[b]);
    }
    return tr;
}

struct FlowRecord {
    std::vector<double> t;
    std::vector<Vec3> x;
};

Vec3 flow_contact(const ChartOps& ops, const Vec3& x1, double hint, TraceAccum& acc) {
    TubeWorkspace ws{hint};
    auto rhs = [&](double tau, const ode::State<3>& y, ode::State<3>& dy) {
        const double t = 1.0 - tau;
        const FormDeficit d = ops.deficit(y, ws);
        double margin;
        const Vec3 v = contact_moser_field_from(d, t, &margin);
        acc.record(t, margin, ops.model().g_norm(y, v), std::abs(d.theta_t(t).dot(v)));
        dy = -v;
    };
    const auto steps = ode::integrate_adaptive<3>(rhs, 0.0, 1.0, ode::State<3>(x1),
                                                  ops.cfg.flow_tol, ops.cfg.flow_tol, 0.25);
    return steps.back().y;
}

Vec4 flow_sympl(const ChartOps& ops, const Vec3& x1, double hint, TraceAccum& acc,
                FlowRecord* rec) {
    TubeWorkspace ws{hint};
    ode::State<4> y0;
    y0.head<3>() = x1;
    y0[3] = 0.0;
    auto rhs = [&](double tau, const ode::State<4>& y, ode::State<4>& dy) {
        const double t = 1.0 - tau;
        const FormDeficit d = ops.deficit(y.head<3>(), ws);
        const Vec4 v = symplectization_moser_field_from(d, t, y[3], true);
        double margin;
        (void)contact_moser_field_from(d, t, &margin);
        acc.record(t, margin, ops.model().g_norm(y.head<3>(), v.head<3>()),
                   std::abs(d.theta_t(t).dot(v.head<3>())));
        dy = -v;
    };
    const auto steps = ode::integrate_adaptive<4>(rhs, 0.0, 1.0, y0, ops.cfg.flow_tol,
                                                  ops.cfg.flow_tol, 0.25);
    if (rec)
        for (const auto& st : steps) {
            rec->t.push_back(1.0 - st.t);
            rec->x.push_back(st.y.head<3>());
        }
    return steps.back().y;
}

AverageResult run_pipeline(const FamilyInput& family, const WeinsteinResult& W,
                           const GateReport& gate, const Config& cfg, bool sympl) {
    if (gate.refused)
        throw Error(Errc::GateRefused,
                    "epsilon gate: family outside the strict regime (eps = " +
                        std::to_string(gate.epsilon) + ")");
    const TubularChart& chart = W.chart;
    const ContactModel& m = chart.model;
    const ChartOps ops{chart, cfg};
    const int n = chart.base.size();

    AverageResult res;
    res.gate = gate;
    res.epsilon = gate.epsilon;
    res.weinstein_step = W.final_step;

    // All member sections vanish: the averaged form equals theta, the Moser
    // field is identically zero and the flow is stationary, so the average is
    // the common member curve itself (with its exact tangents).
    bool all_identity = true;
    for (const auto& mem : chart.members) all_identity = all_identity && mem.identity;
    if (all_identity) {
        const DiscreteLegendrian* src = nullptr;
        for (const auto& mem : family.members) {
            if (mem.size() != n) continue;
            double dev = 0.0;
            for (int i = 0; i < n; ++i)
                dev = std::max(dev,
                               m.coord_delta(mem.points[i], chart.base.sample(i)).norm());
            if (dev < 1e-11) {
                src = &mem;
                break;
            }
        }
        DiscreteLegendrian L = src ? *src : W.average;
        L.label = sympl ? "sympl-average" : "contact-average";
        res.curve = L;
        res.residual = legendrian_residual(L);
        res.lagrangian = lagrangian_residual(L);
        const CurveModel lcm = L.curve_model();
        for (const auto& mem : family.members)
            res.d0_member.push_back(d0(mem.curve_model(), lcm, cfg).value);
        const BoundReport br0 = bound_check(res, cfg);
        res.bound_ok = br0.ok;
        res.d0_over_eps = br0.ratio;
        res.trace = finalize_trace({TraceAccum{}});
        return res;
    }

    // coarse nondegeneracy pre-scan over tube samples and t
    {
        TubeWorkspace ws;
        const int stride = std::max(1, n / 16);
        for (int i = 0; i < n; i += stride) {
            ws.foot_hint = -1.0;
            const FormDeficit d = ops.deficit(chart.base.sample(i), ws);
            for (double t : {0.0, 0.5, 1.0}) {
                double margin;
                (void)contact_moser_field_from(d, t, &margin);
            }
        }
    }

    const double hps = 1e-3; // frame-probe offset for the output tangents
    std::vector<Vec3> Lpts(n), Lplus(n), Lminus(n);
    std::vector<double> sdrift(n, 0.0);
    std::vector<TraceAccum> accs(n);
    std::vector<FlowRecord> recs(sympl ? std::min(n, 4) : 0);

    parallel_for(n, cfg.threads, [&](size_t i) {
        const double s = chart.base.knot(static_cast<int>(i));
        const Vec3 x = chart.base.sample(static_cast<int>(i));
        const Vec3 tau = W.average.tangents[i];
        const Vec3 xp = detail::exp_fixed(m, x, hps * tau, 2);
        const Vec3 xm = detail::exp_fixed(m, x, -hps * tau, 2);
        if (!sympl) {
            Lpts[i] = flow_contact(ops, x, s, accs[i]);
            Lplus[i] = flow_contact(ops, xp, s, accs[i]);
            Lminus[i] = flow_contact(ops, xm, s, accs[i]);
        } else {
            FlowRecord* rec = (i < recs.size()) ? &recs[i] : nullptr;
            const Vec4 end = flow_sympl(ops, x, s, accs[i], rec);
            Lpts[i] = end.head<3>();
            sdrift[i] = end[3];
            Lplus[i] = flow_sympl(ops, xp, s, accs[i], nullptr).head<3>();
            Lminus[i] = flow_sympl(ops, xm, s, accs[i], nullptr).head<3>();
        }
    });

    DiscreteLegendrian L;
    L.model = m;
    L.points.resize(n);
    L.tangents.resize(n);
    for (int i = 0; i < n; ++i) {
        L.points[i] = m.normalize_point(Lpts[i]);
        Vec3 d = Lplus[i] - Lminus[i];
        if (m.wraps_angle()) d = m.coord_delta(Lminus[i], Lplus[i]);
        L.tangents[i] = d / m.g_norm(L.points[i], d);
    }
    const CurveModel lcm = CurveModel::from_samples(m, L.points);
    L.arclen.resize(n + 1);
    for (int i = 0; i < n; ++i) L.arclen[i] = lcm.knot(i);
    L.arclen[n] = lcm.knot(0) + lcm.period();
    L.label = sympl ? "sympl-average" : "contact-average";
    res.curve = L;
    res.residual = legendrian_residual(L);
    res.lagrangian = lagrangian_residual(L);
    if (res.residual > cfg.residual_tol)
        throw Error(Errc::IntegrationFailure,
                    "averaging: output tangency residual " + std::to_string(res.residual) +
                        " exceeds the budget");

    for (const auto& mem : family.members)
        res.d0_member.push_back(d0(mem.curve_model(), lcm, cfg).value);
    const BoundReport br = bound_check(res, cfg);
    res.bound_ok = br.ok;
    res.d0_over_eps = br.ratio;
    res.trace = finalize_trace(accs);

    if (sympl) {
        for (double sd : sdrift) res.s_drift_sup = std::max(res.s_drift_sup, std::abs(sd));
        // trapezoid quadrature of -theta_dot(R_t) along recorded trajectories
        double gap = 0.0;
        for (size_t r = 0; r < recs.size(); ++r) {
            const FlowRecord& fr = recs[r];
            TubeWorkspace ws{chart.base.knot(static_cast<int>(r))};
            auto integrand = [&](const Vec3& x, double t) {
                const FormDeficit d = ops.deficit(x, ws);
                const Mat3 Dt = d.dtheta_t(t);
                const Vec3 dvec(Dt(2, 1), Dt(0, 2), Dt(1, 0));
                const Vec3 Rt = dvec / d.theta_t(t).dot(dvec);
                return -d.theta_dot.dot(Rt);
            };
            double integral = 0.0;
            for (size_t k = 0; k + 1 < fr.t.size(); ++k) {
                const double t0 = fr.t[k], t1 = fr.t[k + 1];
                const Vec3 xm = fr.x[k] + 0.5 * m.coord_delta(fr.x[k], fr.x[k + 1]);
                const double f0 = integrand(fr.x[k], t0);
                const double fm = integrand(xm, 0.5 * (t0 + t1));
                const double f1 = integrand(fr.x[k + 1], t1);
                integral += (f0 + 4.0 * fm + f1) / 6.0 * (t1 - t0);
            }
            // s(0) = -integral_{1}^{0} a dt = integral recorded descending
            gap = std::max(gap, std::abs(integral - sdrift[r]));
        }
        res.s_drift_quadrature_gap = gap;
    }
    return res;
}

} // namespace

AverageResult contact_moser_average(const FamilyInput& family, const Config& cfg) {
    const GateReport gate = epsilon_gate(family, cfg);
    const WeinsteinResult W = weinstein_average(family, cfg);
    return run_pipeline(family, W, gate, cfg, false);
}

AverageResult symplectization_average(const FamilyInput& family, const Config& cfg) {
    const GateReport gate = epsilon_gate(family, cfg);
    const WeinsteinResult W = weinstein_average(family, cfg);
    return run_pipeline(family, W, gate, cfg, true);
}

PipelinePair run_both_pipelines(const FamilyInput& family, const Config& cfg) {
    PipelinePair out;
    const GateReport gate = epsilon_gate(family, cfg);
    out.weinstein = weinstein_average(family, cfg);
    out.contact = run_pipeline(family, out.weinstein, gate, cfg, false);
    out.sympl = run_pipeline(family, out.weinstein, gate, cfg, true);
    const CurveModel a = out.contact.curve.curve_model();
    const CurveModel b = out.sympl.curve.curve_model();
    out.pipelines_d0_gap = std::max(d0(a, b, cfg).value, d0(b, a, cfg).value);
    return out;
}

} // namespace legav
