#include "legav/curves.hpp"

#include "legav/rng.hpp"
#include "legav/spline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace legav {

namespace {

// Gauss-Legendre nodes on [-1, 1]
constexpr double kGL4x[] = {-0.8611363115940526, -0.3399810435848563, 0.3399810435848563,
                            0.8611363115940526};
constexpr double kGL4w[] = {0.3478548451374538, 0.6521451548625461, 0.6521451548625461,
                            0.3478548451374538};
constexpr double kGL8x[] = {-0.9602898564975363, -0.7966664774136267, -0.5255324099163290,
                            -0.1834346424956498, 0.1834346424956498,  0.5255324099163290,
                            0.7966664774136267,  0.9602898564975363};
constexpr double kGL8w[] = {0.1012285362903763, 0.2223810344533745, 0.3137066458778873,
                            0.3626837833783620, 0.3626837833783620, 0.3137066458778873,
                            0.2223810344533745, 0.1012285362903763};

/// Closed plane curve as a pair of periodic splines over uniform parameters.
struct PlanarSpline {
    PeriodicSpline1D x, y;
    int n = 0;

    explicit PlanarSpline(const std::vector<Vec2>& pts) : n(static_cast<int>(pts.size())) {
        if (n < 8) throw Error(Errc::InvalidInput, "planar curve needs >= 8 samples");
        std::vector<double> t(n), xs(n), ys(n);
        for (int i = 0; i < n; ++i) {
            t[i] = kTwoPi * i / n;
            xs[i] = pts[i][0];
            ys[i] = pts[i][1];
        }
        x = PeriodicSpline1D(t, kTwoPi, xs);
        y = PeriodicSpline1D(std::move(t), kTwoPi, ys);
    }

    Vec2 eval(double t) const { return {x.eval(t), y.eval(t)}; }
    Vec2 deriv(double t) const { return {x.deriv(t), y.deriv(t)}; }
    Vec2 second(double t) const { return {x.second(t), y.second(t)}; }

    double min_speed() const {
        double lo = std::numeric_limits<double>::max();
        const int grid = 8 * n;
        for (int i = 0; i < grid; ++i) lo = std::min(lo, deriv(kTwoPi * i / grid).norm());
        return lo;
    }

    /// (1/2) closed integral of (x y' - y x'); exact for the spline (degree 5
    /// integrand, 4-point Gauss per segment).
    double signed_area() const {
        double a = 0.0;
        for (int i = 0; i < n; ++i) {
            const double t0 = kTwoPi * i / n, h = kTwoPi / n;
            for (int q = 0; q < 4; ++q) {
                const double t = t0 + 0.5 * h * (1.0 + kGL4x[q]);
                const Vec2 p = eval(t), d = deriv(t);
                a += 0.5 * h * kGL4w[q] * 0.5 * (p[0] * d[1] - p[1] * d[0]);
            }
        }
        return a;
    }

    /// Integral of f over one parameter segment (8-point Gauss).
    template <class F>
    double segment_integral(int i, F&& f) const {
        const double t0 = kTwoPi * i / n, h = kTwoPi / n;
        double a = 0.0;
        for (int q = 0; q < 8; ++q) {
            const double t = t0 + 0.5 * h * (1.0 + kGL8x[q]);
            a += 0.5 * h * kGL8w[q] * f(t);
        }
        return a;
    }
};

std::vector<Vec2> scaled(const std::vector<Vec2>& pts, double s) {
    std::vector<Vec2> out(pts.size());
    for (size_t i = 0; i < pts.size(); ++i) out[i] = s * pts[i];
    return out;
}

void check_immersed(const PlanarSpline& P, double floor_scale) {
    if (P.min_speed() < 1e-8 * std::max(1.0, floor_scale))
        throw Error(Errc::NotImmersed, "planar generator has (nearly) vanishing speed");
}

} // namespace

double legendrian_residual(const DiscreteLegendrian& curve) {
    double r = 0.0;
    for (int i = 0; i < curve.size(); ++i)
        r = std::max(r, std::abs(curve.model.theta(curve.points[i]).dot(curve.tangents[i])));
    return r;
}

void validate_legendrian(const DiscreteLegendrian& curve, double residual_tol) {
    const int n = curve.size();
    if (n < 3 || static_cast<int>(curve.tangents.size()) != n ||
        static_cast<int>(curve.arclen.size()) != n + 1)
        throw Error(Errc::InvalidInput, "discrete curve: inconsistent array sizes");
    for (const Vec3& p : curve.points)
        if (!p.allFinite()) throw Error(Errc::InvalidInput, "discrete curve: non-finite point");
    if (legendrian_residual(curve) > residual_tol)
        throw Error(Errc::InvalidInput, "discrete curve: tangency residual too large");
    const double mean = curve.length() / n;
    for (int i = 0; i < n; ++i) {
        const double nf = curve.model.g_norm(curve.points[i], curve.tangents[i]);
        if (std::abs(nf - 1.0) > 1e-10)
            throw Error(Errc::InvalidInput, "discrete curve: tangent not unit");
        const double gap = curve.arclen[i + 1] - curve.arclen[i];
        if (gap < 0.2 * mean || gap > 5.0 * mean)
            throw Error(Errc::InvalidInput, "discrete curve: irregular sample spacing");
    }
}

DiscreteLegendrian lift_planar_heisenberg(const ContactModel& m, const std::vector<Vec2>& planar,
                                          double z0, const Config& cfg) {
    if (m.id() != ModelId::Heisenberg)
        throw Error(Errc::InvalidInput, "lift_planar_heisenberg: wrong model");
    const std::vector<Vec2> pts = scaled(planar, m.scale());
    const PlanarSpline P(pts);
    check_immersed(P, m.scale());

    const double area = P.signed_area();
    if (std::abs(area) > 1e-9 * std::max(1.0, m.scale() * m.scale()))
        throw Error(Errc::NonClosing, "planar generator has nonzero signed area");

    const int n = static_cast<int>(pts.size());
    DiscreteLegendrian c;
    c.model = m;
    c.points.resize(n);
    c.tangents.resize(n);
    c.arclen.assign(n + 1, 0.0);

    double z = z0;
    for (int i = 0; i < n; ++i) {
        const double t = kTwoPi * i / n;
        const Vec2 p = pts[i];
        const Vec2 d = P.deriv(t);
        const double tz = 0.5 * (p[1] * d[0] - p[0] * d[1]);
        c.points[i] = {p[0], p[1], z};
        Vec3 tau(d[0], d[1], tz);
        c.tangents[i] = tau / m.g_norm(c.points[i], tau);
        // advance z by the exact segment integral of (y x' - x y')/2
        z += P.segment_integral(i, [&P](double tt) {
            const Vec2 pp = P.eval(tt), dd = P.deriv(tt);
            return 0.5 * (pp[1] * dd[0] - pp[0] * dd[1]);
        });
        c.arclen[i + 1] =
            c.arclen[i] + P.segment_integral(i, [&P](double tt) { return P.deriv(tt).norm(); });
    }
    validate_legendrian(c, cfg.lift_residual_tol);
    CurveGenerator gen;
    gen.kind = CurveGenerator::Kind::PlanarHeisenberg;
    gen.planar = planar;
    gen.z0 = z0;
    c.generator = gen;
    return c;
}

DiscreteLegendrian lift_front_cylinder(const ContactModel& m, const std::vector<Vec2>& planar,
                                       const Config& cfg, double conormal_offset) {
    if (m.id() != ModelId::Cylinder)
        throw Error(Errc::InvalidInput, "lift_front_cylinder: wrong model");
    const std::vector<Vec2> pts = scaled(planar, m.scale());
    const PlanarSpline P(pts);
    check_immersed(P, m.scale());

    const int n = static_cast<int>(pts.size());
    // unwrap the tangent angle on a fine grid containing the sample params
    const int grid = 8 * n;
    std::vector<double> psi(grid + 1);
    for (int i = 0; i <= grid; ++i) {
        const Vec2 d = P.deriv(kTwoPi * i / grid);
        double a = std::atan2(d[1], d[0]);
        if (i > 0) {
            while (a - psi[i - 1] > kPi) a -= kTwoPi;
            while (a - psi[i - 1] < -kPi) a += kTwoPi;
        }
        psi[i] = a;
    }

    DiscreteLegendrian c;
    c.model = m;
    c.points.resize(n);
    c.tangents.resize(n);
    c.arclen.assign(n + 1, 0.0);
    auto dpsi = [&P](double t) {
        const Vec2 d = P.deriv(t), dd = P.second(t);
        return (d[0] * dd[1] - d[1] * dd[0]) / d.squaredNorm();
    };
    for (int i = 0; i < n; ++i) {
        const double t = kTwoPi * i / n;
        const Vec2 p = pts[i];
        const Vec2 d = P.deriv(t);
        const double phi = psi[8 * i] + conormal_offset;
        c.points[i] = m.normalize_point({p[0], p[1], phi});
        Vec3 tau(d[0], d[1], dpsi(t));
        c.tangents[i] = tau / m.g_norm(c.points[i], tau);
        c.arclen[i + 1] = c.arclen[i] + P.segment_integral(i, [&](double tt) {
            const Vec2 dd = P.deriv(tt);
            const double w = dpsi(tt);
            return std::sqrt(dd.squaredNorm() + w * w);
        });
    }
    validate_legendrian(c, cfg.lift_residual_tol);
    CurveGenerator gen;
    gen.kind = CurveGenerator::Kind::FrontCylinder;
    gen.planar = planar;
    gen.conormal_offset = conormal_offset;
    c.generator = gen;
    return c;
}

DiscreteLegendrian fiber_cylinder(const ContactModel& m, const Vec2& p, int n, const Config& cfg) {
    if (m.id() != ModelId::Cylinder) throw Error(Errc::InvalidInput, "fiber_cylinder: wrong model");
    if (n < 3) throw Error(Errc::InvalidInput, "fiber_cylinder: too few samples");
    DiscreteLegendrian c;
    c.model = m;
    c.points.resize(n);
    c.tangents.assign(n, Vec3(0.0, 0.0, 1.0));
    c.arclen.resize(n + 1);
    const Vec2 q = m.scale() * p;
    for (int i = 0; i <= n; ++i) {
        if (i < n) c.points[i] = {q[0], q[1], kTwoPi * i / n};
        c.arclen[i] = kTwoPi * i / n;
    }
    validate_legendrian(c, cfg.lift_residual_tol);
    CurveGenerator gen;
    gen.kind = CurveGenerator::Kind::FiberCylinder;
    gen.base = p;
    c.generator = gen;
    return c;
}

PerturbResult perturb(const DiscreteLegendrian& curve, double amplitude, uint64_t seed,
                      const Config& cfg) {
    if (amplitude == 0.0) return {curve, 0.0};
    if (!curve.generator)
        throw Error(Errc::InvalidInput, "perturb: curve has no planar generator");
    const CurveGenerator& gen = *curve.generator;
    Rng rng(seed);

    DiscreteLegendrian out;
    if (gen.kind == CurveGenerator::Kind::FiberCylinder) {
        const double ang = rng.uniform(0.0, kTwoPi);
        const Vec2 shift(amplitude * std::cos(ang), amplitude * std::sin(ang));
        out = fiber_cylinder(curve.model, gen.base + shift, curve.size(), cfg);
    } else {
        const int n = static_cast<int>(gen.planar.size());
        // smooth trig-polynomial bump, sup-normalized to 1
        double cx[4], sx[4], cy[4], sy[4];
        for (int k = 0; k < 4; ++k) {
            cx[k] = rng.uniform(-1.0, 1.0) / (k + 1);
            sx[k] = rng.uniform(-1.0, 1.0) / (k + 1);
            cy[k] = rng.uniform(-1.0, 1.0) / (k + 1);
            sy[k] = rng.uniform(-1.0, 1.0) / (k + 1);
        }
        auto bump = [&](double t) {
            Vec2 b = Vec2::Zero();
            for (int k = 0; k < 4; ++k) {
                b[0] += cx[k] * std::cos((k + 1) * t) + sx[k] * std::sin((k + 1) * t);
                b[1] += cy[k] * std::cos((k + 1) * t) + sy[k] * std::sin((k + 1) * t);
            }
            return b;
        };
        double sup = 0.0;
        for (int i = 0; i < 4 * n; ++i) sup = std::max(sup, bump(kTwoPi * i / (4 * n)).norm());

        const PlanarSpline base(gen.planar);
        std::vector<Vec2> pts(n);
        for (int i = 0; i < n; ++i)
            pts[i] = gen.planar[i] + (amplitude / sup) * bump(kTwoPi * i / n);

        if (gen.kind == CurveGenerator::Kind::PlanarHeisenberg) {
            // project back onto the zero-signed-area constraint along the
            // outward-normal reference field
            std::vector<Vec2> normal(n);
            for (int i = 0; i < n; ++i) {
                const Vec2 d = base.deriv(kTwoPi * i / n);
                normal[i] = Vec2(d[1], -d[0]) / d.norm();
            }
            double c0 = 0.0;
            for (int it = 0; it < 4; ++it) {
                std::vector<Vec2> trial(n);
                for (int i = 0; i < n; ++i) trial[i] = pts[i] + c0 * normal[i];
                const double a0 = PlanarSpline(trial).signed_area();
                if (std::abs(a0) < 1e-14) break;
                const double dc = 1e-7;
                for (int i = 0; i < n; ++i) trial[i] = pts[i] + (c0 + dc) * normal[i];
                const double a1 = PlanarSpline(trial).signed_area();
                c0 -= a0 * dc / (a1 - a0);
            }
            for (int i = 0; i < n; ++i) pts[i] += c0 * normal[i];
        }

        const double floor = base.min_speed();
        if (PlanarSpline(pts).min_speed() < 0.25 * floor)
            throw Error(Errc::AmplitudeTooLarge, "perturb: generator lost immersion");

        out = (gen.kind == CurveGenerator::Kind::PlanarHeisenberg)
                  ? lift_planar_heisenberg(curve.model, pts, gen.z0, cfg)
                  : lift_front_cylinder(curve.model, pts, cfg, gen.conormal_offset);
    }
    out.label = curve.label.empty() ? "perturbed" : curve.label + "~";

    const D1Result d = d1(curve.curve_model(), out.curve_model(), out.tangents, cfg);
    return {std::move(out), d.value};
}

DiscreteLegendrian apply_map(const DiscreteLegendrian& curve, const IsometryMap& map) {
    const ContactModel& m = curve.model;
    DiscreteLegendrian out = curve;
    for (int i = 0; i < curve.size(); ++i) {
        out.points[i] = map.apply_point(m, curve.points[i]);
        out.tangents[i] = map.linear_at(m, curve.points[i]) * curve.tangents[i];
    }
    if (curve.generator) {
        CurveGenerator gen = *curve.generator;
        const double sc = m.scale();
        switch (map.kind) {
            case IsometryMap::Kind::Identity: break;
            case IsometryMap::Kind::HeisRotationZ:
            case IsometryMap::Kind::CylRotation: {
                const double c = std::cos(map.params[0]), s = std::sin(map.params[0]);
                for (Vec2& p : gen.planar) p = Vec2(c * p[0] - s * p[1], s * p[0] + c * p[1]);
                gen.base = Vec2(c * gen.base[0] - s * gen.base[1],
                                s * gen.base[0] + c * gen.base[1]);
                break;
            }
            case IsometryMap::Kind::HeisTranslation: {
                const double a = map.params[0], b = map.params[1], cc = map.params[2];
                const Vec2 p0 = sc * gen.planar.front();
                gen.z0 += cc + 0.5 * (b * p0[0] - a * p0[1]);
                for (Vec2& p : gen.planar) p += Vec2(a, b) / sc;
                break;
            }
            case IsometryMap::Kind::CylTranslation:
                for (Vec2& p : gen.planar) p += Vec2(map.params[0], map.params[1]) / sc;
                gen.base += Vec2(map.params[0], map.params[1]) / sc;
                break;
            case IsometryMap::Kind::CylInvolution:
                if (gen.kind == CurveGenerator::Kind::FrontCylinder) {
                    gen.conormal_offset += kPi;
                    if (gen.conormal_offset > kPi) gen.conormal_offset -= kTwoPi;
                }
                break;
        }
        out.generator = gen;
    }
    return out;
}

DiscreteLegendrian resample(const DiscreteLegendrian& curve, int n, const Config& cfg) {
    if (n < 16) throw Error(Errc::InvalidInput, "resample: need n >= 16");
    if (!curve.generator)
        throw Error(Errc::InvalidInput, "resample: curve has no planar generator");
    const CurveGenerator& gen = *curve.generator;
    if (gen.kind == CurveGenerator::Kind::FiberCylinder)
        return fiber_cylinder(curve.model, gen.base, n, cfg);

    const std::vector<Vec2> pts = scaled(gen.planar, curve.model.scale());
    const PlanarSpline P(pts);
    const bool heis = gen.kind == CurveGenerator::Kind::PlanarHeisenberg;
    auto speed = [&](double t) {
        const Vec2 d = P.deriv(t);
        if (heis) return d.norm();
        const Vec2 dd = P.second(t);
        const double w = (d[0] * dd[1] - d[1] * dd[0]) / d.squaredNorm();
        return std::sqrt(d.squaredNorm() + w * w);
    };
    // cumulative g-arclength over a fine grid, then invert per target
    const int m0 = static_cast<int>(gen.planar.size());
    std::vector<double> cum(m0 + 1, 0.0);
    for (int i = 0; i < m0; ++i)
        cum[i + 1] = cum[i] + P.segment_integral(i, speed);
    const double L = cum[m0];
    std::vector<Vec2> newpts(n);
    for (int j = 0; j < n; ++j) {
        const double target = L * j / n;
        int seg = static_cast<int>(std::upper_bound(cum.begin(), cum.end(), target) -
                                   cum.begin()) -
                  1;
        seg = std::clamp(seg, 0, m0 - 1);
        double t = kTwoPi * seg / m0 +
                   (kTwoPi / m0) * (target - cum[seg]) /
                       std::max(1e-300, cum[seg + 1] - cum[seg]);
        for (int it = 0; it < 8; ++it) {
            // Newton on the running arclength (integrand is the derivative)
            double acc = cum[seg];
            const double t0 = kTwoPi * seg / m0;
            const int qn = 8;
            for (int q = 0; q < qn; ++q) {
                const double tt = t0 + 0.5 * (t - t0) * (1.0 + kGL8x[q]);
                acc += 0.5 * (t - t0) * kGL8w[q] * speed(tt);
            }
            const double err = acc - target;
            t -= err / speed(t);
            if (std::abs(err) < 1e-13 * std::max(1.0, L)) break;
        }
        newpts[j] = P.eval(t) / curve.model.scale();
    }
    DiscreteLegendrian out = heis ? lift_planar_heisenberg(curve.model, newpts, gen.z0, cfg)
                                  : lift_front_cylinder(curve.model, newpts, cfg,
                                                        gen.conormal_offset);
    out.label = curve.label;
    return out;
}

// -- serialization ------------------------------------------------------------

void write_curve_csv(const std::string& path, const DiscreteLegendrian& curve,
                     const std::vector<int>* components) {
    std::ofstream f(path);
    if (!f) throw Error(Errc::MissingFile, "cannot open for writing: " + path);
    f << "t,x,y,z_or_phi,tx,ty,tz_or_tphi";
    if (components) f << ",component";
    f << "\n";
    char buf[512];
    for (int i = 0; i < curve.size(); ++i) {
        const Vec3& p = curve.points[i];
        const Vec3& t = curve.tangents[i];
        std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g",
                      curve.arclen[i], p[0], p[1], p[2], t[0], t[1], t[2]);
        f << buf;
        if (components) f << "," << (*components)[i];
        f << "\n";
    }
}

DiscreteLegendrian read_curve_csv(const std::string& path, const ContactModel& m,
                                  std::vector<int>* components) {
    std::ifstream f(path);
    if (!f) throw Error(Errc::MissingFile, "cannot open: " + path);
    std::string line;
    if (!std::getline(f, line)) throw Error(Errc::InvalidInput, "empty curve file: " + path);
    const bool has_comp = line.find("component") != std::string::npos;
    DiscreteLegendrian c;
    c.model = m;
    std::vector<double> t;
    while (std::getline(f, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string cell;
        std::vector<double> row;
        while (std::getline(ss, cell, ',')) row.push_back(std::stod(cell));
        if (row.size() < 7) throw Error(Errc::InvalidInput, "short row in " + path);
        t.push_back(row[0]);
        c.points.push_back(m.normalize_point({row[1], row[2], row[3]}));
        c.tangents.emplace_back(row[4], row[5], row[6]);
        if (components && has_comp) components->push_back(static_cast<int>(row[7]));
    }
    const int n = c.size();
    if (n < 3) throw Error(Errc::InvalidInput, "too few samples in " + path);
    c.arclen = t;
    // closing knot from the metric gap back to the first sample
    const Vec3 d = m.coord_delta(c.points[n - 1], c.points[0]);
    const Vec3 mid = m.normalize_point(c.points[n - 1] + 0.5 * d);
    c.arclen.push_back(t[n - 1] + std::sqrt(d.dot(m.metric(mid) * d)));
    c.label = path;
    return c;
}

void FamilyInput::validate() const {
    if (members.empty()) throw Error(Errc::InvalidInput, "family: no members");
    if (weights.size() != members.size())
        throw Error(Errc::InvalidInput, "family: weight count mismatch");
    double sum = 0.0;
    for (double w : weights) {
        if (!(w > 0.0)) throw Error(Errc::InvalidInput, "family: weights must be positive");
        sum += w;
    }
    if (std::abs(sum - 1.0) > 1e-12)
        throw Error(Errc::InvalidInput, "family: weights must sum to 1");
    for (const auto& mem : members)
        if (!(mem.model == members.front().model))
            throw Error(Errc::InvalidInput, "family: members on different models");
}

} // namespace legav
