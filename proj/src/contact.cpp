#include "legav/contact.hpp"

#include "legav/rng.hpp"

#include <cmath>

namespace legav {

namespace {

double wrap_2pi(double a) {
    a = std::fmod(a, kTwoPi);
    if (a < 0.0) a += kTwoPi;
    // fmod can return exactly 2*pi after the add when a was a tiny negative
    if (a >= kTwoPi) a -= kTwoPi;
    return a;
}

double wrap_pm_pi(double a) {
    a = std::fmod(a, kTwoPi);
    if (a > kPi) a -= kTwoPi;
    if (a <= -kPi) a += kTwoPi;
    return a;
}

} // namespace

ContactModel ContactModel::from_name(const std::string& name, double scale) {
    if (name == "heisenberg") return heisenberg(scale);
    if (name == "cylinder") return cylinder(scale);
    throw Error(Errc::InvalidInput, "unknown model id: " + name);
}

Vec3 ContactModel::normalize_point(const Vec3& p) const {
    if (id_ == ModelId::Cylinder) return {p[0], p[1], wrap_2pi(p[2])};
    return p;
}

Vec3 ContactModel::coord_delta(const Vec3& from, const Vec3& to) const {
    Vec3 d = to - from;
    if (id_ == ModelId::Cylinder) d[2] = wrap_pm_pi(d[2]);
    return d;
}

Vec3 ContactModel::theta(const Vec3& p) const {
    if (id_ == ModelId::Heisenberg) return sign_ * Vec3(-0.5 * p[1], 0.5 * p[0], 1.0);
    return sign_ * Vec3(std::cos(p[2]), std::sin(p[2]), 0.0);
}

Mat3 ContactModel::dtheta(const Vec3& p) const {
    Mat3 D = Mat3::Zero();
    if (id_ == ModelId::Heisenberg) {
        D(0, 1) = 1.0;
        D(1, 0) = -1.0;
    } else {
        const double c = std::cos(p[2]), s = std::sin(p[2]);
        D(0, 2) = s;
        D(2, 0) = -s;
        D(1, 2) = -c;
        D(2, 1) = c;
    }
    return sign_ * D;
}

Vec3 ContactModel::reeb(const Vec3& p) const {
    if (id_ == ModelId::Heisenberg) return sign_ * Vec3(0.0, 0.0, 1.0);
    return sign_ * Vec3(std::cos(p[2]), std::sin(p[2]), 0.0);
}

Mat3 ContactModel::metric(const Vec3& p) const {
    if (id_ == ModelId::Cylinder) return Mat3::Identity();
    const double x = p[0], y = p[1];
    Mat3 g;
    g << 1.0 + 0.25 * y * y, -0.25 * x * y, -0.5 * y, //
        -0.25 * x * y, 1.0 + 0.25 * x * x, 0.5 * x,   //
        -0.5 * y, 0.5 * x, 1.0;
    return g;
}

Mat3 ContactModel::metric_inv(const Vec3& p) const {
    if (id_ == ModelId::Cylinder) return Mat3::Identity();
    const double x = p[0], y = p[1];
    Mat3 gi;
    gi << 1.0, 0.0, 0.5 * y, //
        0.0, 1.0, -0.5 * x,  //
        0.5 * y, -0.5 * x, 1.0 + 0.25 * (x * x + y * y);
    return gi;
}

Mat3 ContactModel::dmetric(const Vec3& p, int k) const {
    Mat3 d = Mat3::Zero();
    if (id_ == ModelId::Cylinder) return d;
    const double x = p[0], y = p[1];
    if (k == 0) {
        d << 0.0, -0.25 * y, 0.0, //
            -0.25 * y, 0.5 * x, 0.5, //
            0.0, 0.5, 0.0;
    } else if (k == 1) {
        d << 0.5 * y, -0.25 * x, -0.5, //
            -0.25 * x, 0.0, 0.0,       //
            -0.5, 0.0, 0.0;
    }
    return d;
}

void ContactModel::christoffel(const Vec3& p, std::array<Mat3, 3>& G) const {
    if (id_ == ModelId::Cylinder) {
        G[0].setZero();
        G[1].setZero();
        G[2].setZero();
        return;
    }
    const Mat3 gi = metric_inv(p);
    const std::array<Mat3, 3> dg = {dmetric(p, 0), dmetric(p, 1), dmetric(p, 2)};
    for (int k = 0; k < 3; ++k) {
        for (int i = 0; i < 3; ++i) {
            for (int j = i; j < 3; ++j) {
                double s = 0.0;
                for (int l = 0; l < 3; ++l)
                    s += gi(k, l) * (dg[i](j, l) + dg[j](i, l) - dg[l](i, j));
                G[k](i, j) = 0.5 * s;
                G[k](j, i) = G[k](i, j);
            }
        }
    }
}

Mat3 ContactModel::frame(const Vec3& p) const {
    Mat3 F;
    if (id_ == ModelId::Heisenberg) {
        F.col(0) = Vec3(1.0, 0.0, 0.5 * p[1]);
        F.col(1) = Vec3(0.0, 1.0, -0.5 * p[0]);
    } else {
        const double c = std::cos(p[2]), s = std::sin(p[2]);
        F.col(0) = Vec3(-s, c, 0.0);
        F.col(1) = Vec3(0.0, 0.0, 1.0);
    }
    F.col(2) = reeb(p);
    return F;
}

Vec3 ContactModel::complex_rot(const Vec3& p, const Vec3& h) const {
    if (id_ == ModelId::Heisenberg) {
        // h = a X1 + b X2 (+ E component, discarded); I X1 = X2, I X2 = -X1
        const double a = h[0], b = h[1];
        return sign_ * (a * Vec3(0.0, 1.0, -0.5 * p[0]) - b * Vec3(1.0, 0.0, 0.5 * p[1]));
    }
    const double c = std::cos(p[2]), s = std::sin(p[2]);
    const Vec3 w(-s, c, 0.0);
    const double a = h.dot(w), b = h[2];
    return sign_ * (b * w - a * Vec3(0.0, 0.0, 1.0));
}

Vec3 ContactModel::nabla_theta(const Vec3& p, const Vec3& X) const {
    // (nabla_X theta)_j = X^i (d_i theta_j - Gamma^k_{ij} theta_k)
    Vec3 out;
    const Vec3 th = theta(p);
    std::array<Mat3, 3> G;
    christoffel(p, G);
    Mat3 dth = Mat3::Zero(); // dth(i, j) = d_i theta_j
    if (id_ == ModelId::Heisenberg) {
        dth(0, 1) = 0.5 * sign_;
        dth(1, 0) = -0.5 * sign_;
    } else {
        const double c = std::cos(p[2]), s = std::sin(p[2]);
        dth(2, 0) = -s * sign_;
        dth(2, 1) = c * sign_;
    }
    for (int j = 0; j < 3; ++j) {
        double v = 0.0;
        for (int i = 0; i < 3; ++i) {
            double gkij_thk = 0.0;
            for (int k = 0; k < 3; ++k) gkij_thk += G[k](i, j) * th[k];
            v += X[i] * (dth(i, j) - gkij_thk);
        }
        out[j] = v;
    }
    return out;
}

Mat3 ContactModel::nabla_dtheta(const Vec3& p, const Vec3& X) const {
    // (nabla_X D)_{jk} = X^i (d_i D_{jk} - Gamma^l_{ij} D_{lk} - Gamma^l_{ik} D_{jl})
    const Mat3 D = dtheta(p);
    std::array<Mat3, 3> G;
    christoffel(p, G);
    std::array<Mat3, 3> dD = {Mat3::Zero(), Mat3::Zero(), Mat3::Zero()};
    if (id_ == ModelId::Cylinder) {
        const double c = std::cos(p[2]), s = std::sin(p[2]);
        dD[2](0, 2) = c * sign_;
        dD[2](2, 0) = -c * sign_;
        dD[2](1, 2) = s * sign_;
        dD[2](2, 1) = -s * sign_;
    }
    Mat3 out = Mat3::Zero();
    for (int j = 0; j < 3; ++j) {
        for (int k = 0; k < 3; ++k) {
            double v = 0.0;
            for (int i = 0; i < 3; ++i) {
                double corr = 0.0;
                for (int l = 0; l < 3; ++l)
                    corr += G[l](i, j) * D(l, k) + G[l](i, k) * D(j, l);
                v += X[i] * (dD[i](j, k) - corr);
            }
            out(j, k) = v;
        }
    }
    return out;
}

FormNorms ContactModel::nabla_form_norms(const Vec3& p) const {
    const Mat3 F = frame(p);
    Mat3 M1; // M1(a, b) = (nabla_{f_a} theta)(f_b)
    std::array<Mat3, 3> M2;
    for (int a = 0; a < 3; ++a) {
        const Vec3 nt = nabla_theta(p, F.col(a));
        const Mat3 nd = nabla_dtheta(p, F.col(a));
        for (int b = 0; b < 3; ++b) M1(a, b) = nt.dot(F.col(b));
        M2[a] = F.transpose() * nd * F;
    }
    double f1 = 0.0, f2 = 0.0;
    for (int a = 0; a < 3; ++a) {
        for (int b = 0; b < 3; ++b) f1 += M1(a, b) * M1(a, b);
        for (int b = 0; b < 3; ++b)
            for (int c = b + 1; c < 3; ++c) f2 += M2[a](b, c) * M2[a](b, c);
    }
    // sampled operator norms (diagnostic)
    double op1 = M1.jacobiSvd().singularValues()(0);
    double op2 = 0.0;
    for (int k = 0; k < 64; ++k) {
        const double u = (k + 0.5) / 64.0;
        const double z = 1.0 - 2.0 * u;
        const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
        const double ph = kTwoPi * 0.61803398874989484820 * k;
        const Vec3 dir(r * std::cos(ph), r * std::sin(ph), z);
        Mat3 slice = dir[0] * M2[0] + dir[1] * M2[1] + dir[2] * M2[2];
        op2 = std::max(op2, slice.jacobiSvd().singularValues()(0));
    }
    return {std::sqrt(f1), std::sqrt(f2), op1, op2};
}

Vec3 ContactModel::riemann(const Vec3& p, const Vec3& u, const Vec3& v, const Vec3& w) const {
    if (id_ == ModelId::Cylinder) return Vec3::Zero();
    // dGamma by Richardson-extrapolated central differences of the closed form
    std::array<std::array<Mat3, 3>, 3> dG; // dG[i][l] = d Gamma^l / d x^i
    const double h = 1e-4;
    for (int i = 0; i < 3; ++i) {
        std::array<Mat3, 3> gp, gm, gp2, gm2;
        Vec3 e = Vec3::Zero();
        e[i] = 1.0;
        christoffel(p + h * e, gp);
        christoffel(p - h * e, gm);
        christoffel(p + 0.5 * h * e, gp2);
        christoffel(p - 0.5 * h * e, gm2);
        for (int l = 0; l < 3; ++l) {
            const Mat3 d1 = (gp[l] - gm[l]) / (2.0 * h);
            const Mat3 d2 = (gp2[l] - gm2[l]) / h;
            dG[i][l] = (4.0 * d2 - d1) / 3.0;
        }
    }
    std::array<Mat3, 3> G;
    christoffel(p, G);
    Vec3 out = Vec3::Zero();
    for (int l = 0; l < 3; ++l) {
        double s = 0.0;
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j)
                for (int k = 0; k < 3; ++k) {
                    double term = dG[i][l](j, k) - dG[j][l](i, k);
                    for (int m = 0; m < 3; ++m)
                        term += G[l](i, m) * G[m](j, k) - G[l](j, m) * G[m](i, k);
                    s += u[i] * v[j] * w[k] * term;
                }
        out[l] = s;
    }
    return out;
}

double ContactModel::sectional_curvature(const Vec3& p, const Vec3& u, const Vec3& v) const {
    const Mat3 g = metric(p);
    const double uu = u.dot(g * u), vv = v.dot(g * v), uv = u.dot(g * v);
    const double gram = uu * vv - uv * uv;
    if (gram < 1e-12 * std::max(1.0, uu * vv))
        throw Error(Errc::DegeneratePlane, "sectional_curvature: spanning vectors are dependent");
    if (id_ == ModelId::Cylinder) return 0.0;
    const Vec3 r = riemann(p, u, v, v);
    return r.dot(g * u) / gram;
}

double ContactModel::nabla_omega_bar_norm(const Vec3& p, const Vec3& X) const {
    const Mat3 F = frame(p);
    const Vec3 nt = nabla_theta(p, X);
    const Mat3 nd = nabla_dtheta(p, X);
    // omega_bar = ds ^ theta + dtheta on M x R; nabla ds = 0 for the product
    // metric, so nabla_X omega_bar = ds ^ nabla_X theta + nabla_X dtheta.
    // Form norm over the orthonormal frame {f1, f2, f3, ds}.
    double s2 = 0.0;
    for (int b = 0; b < 3; ++b) {
        const double c = nt.dot(F.col(b)); // component on (f_b, d/ds)
        s2 += c * c;
        for (int c2 = b + 1; c2 < 3; ++c2) {
            const double m = F.col(b).dot(nd * F.col(c2));
            s2 += m * m;
        }
    }
    return std::sqrt(s2);
}

double ContactModel::contact_volume(const Vec3& p) const {
    const Mat3 F = frame(p);
    const Vec3 th = theta(p);
    const Mat3 D = dtheta(p);
    const Vec3 u = F.col(0), v = F.col(1), w = F.col(2);
    return th.dot(u) * v.dot(D * w) - th.dot(v) * u.dot(D * w) + th.dot(w) * u.dot(D * v);
}

// -- checked wrappers ---------------------------------------------------------

namespace {
void require_same_base(const ContactModel& m, const TangentVector& v, const TangentVector& w) {
    if (v.base.model != w.base.model ||
        m.coord_delta(v.base.c, w.base.c).norm() > 1e-12 * (1.0 + v.base.c.norm()))
        throw Error(Errc::MismatchedBase, "tangent vectors based at different points");
}
} // namespace

double eval_theta(const ContactModel& m, const TangentVector& v) {
    return m.theta(v.base.c).dot(v.v);
}

double eval_dtheta(const ContactModel& m, const TangentVector& v, const TangentVector& w) {
    require_same_base(m, v, w);
    return v.v.dot(m.dtheta(v.base.c) * w.v);
}

TangentVector reeb(const ContactModel& m, const ManifoldPoint& p) {
    return {p, m.reeb(p.c)};
}

double metric(const ContactModel& m, const TangentVector& v, const TangentVector& w) {
    require_same_base(m, v, w);
    return m.g_inner(v.base.c, v.v, w.v);
}

double step3_bound_check(const ContactModel& m, const std::vector<Vec3>& samples,
                         int dirs_per_point, uint64_t seed) {
    Rng rng(seed);
    double sup = 0.0;
    for (const Vec3& p : samples) {
        const Mat3 F = m.frame(p);
        for (int d = 0; d < dirs_per_point + 3; ++d) {
            Vec3 u = d < 3 ? Vec3(Vec3::Unit(d)) : rng.unit3();
            const Vec3 X = F * u; // g-unit since the frame is orthonormal
            sup = std::max(sup, m.nabla_omega_bar_norm(p, X));
        }
    }
    return sup;
}

// -- isometries ---------------------------------------------------------------

IsometryMap IsometryMap::heis_rotation(double angle) {
    return {Kind::HeisRotationZ, {angle, 0.0, 0.0}};
}
IsometryMap IsometryMap::heis_translation(const Vec3& abc) {
    return {Kind::HeisTranslation, abc};
}
IsometryMap IsometryMap::cyl_translation(const Vec2& ab) {
    return {Kind::CylTranslation, {ab[0], ab[1], 0.0}};
}
IsometryMap IsometryMap::cyl_rotation(double angle) {
    return {Kind::CylRotation, {angle, 0.0, 0.0}};
}
IsometryMap IsometryMap::cyl_involution() { return {Kind::CylInvolution, Vec3::Zero()}; }

bool IsometryMap::valid_for(ModelId m) const {
    switch (kind) {
        case Kind::Identity: return true;
        case Kind::HeisRotationZ:
        case Kind::HeisTranslation: return m == ModelId::Heisenberg;
        default: return m == ModelId::Cylinder;
    }
}

Vec3 IsometryMap::apply_point(const ContactModel& m, const Vec3& p) const {
    if (!valid_for(m.id()))
        throw Error(Errc::UnregisteredMap, "map not registered for model " +
                                               std::string(to_string(m.id())));
    switch (kind) {
        case Kind::Identity: return p;
        case Kind::HeisRotationZ: {
            const double c = std::cos(params[0]), s = std::sin(params[0]);
            return {c * p[0] - s * p[1], s * p[0] + c * p[1], p[2]};
        }
        case Kind::HeisTranslation: {
            const double a = params[0], b = params[1], c = params[2];
            return {p[0] + a, p[1] + b, p[2] + c + 0.5 * (b * p[0] - a * p[1])};
        }
        case Kind::CylTranslation:
            return m.normalize_point({p[0] + params[0], p[1] + params[1], p[2]});
        case Kind::CylRotation: {
            const double c = std::cos(params[0]), s = std::sin(params[0]);
            return m.normalize_point({c * p[0] - s * p[1], s * p[0] + c * p[1], p[2] + params[0]});
        }
        case Kind::CylInvolution: return m.normalize_point({p[0], p[1], p[2] + kPi});
    }
    return p;
}

Mat3 IsometryMap::linear_at(const ContactModel& m, const Vec3&) const {
    if (!valid_for(m.id()))
        throw Error(Errc::UnregisteredMap, "map not registered for model " +
                                               std::string(to_string(m.id())));
    Mat3 L = Mat3::Identity();
    switch (kind) {
        case Kind::HeisRotationZ:
        case Kind::CylRotation: {
            const double c = std::cos(params[0]), s = std::sin(params[0]);
            L(0, 0) = c;
            L(0, 1) = -s;
            L(1, 0) = s;
            L(1, 1) = c;
            break;
        }
        case Kind::HeisTranslation:
            L(2, 0) = 0.5 * params[1];
            L(2, 1) = -0.5 * params[0];
            break;
        default: break;
    }
    return L;
}

IsometryMap IsometryMap::inverse() const {
    switch (kind) {
        case Kind::HeisRotationZ:
        case Kind::CylRotation: return {kind, {-params[0], 0.0, 0.0}};
        case Kind::HeisTranslation:
        case Kind::CylTranslation: return {kind, -params};
        default: return *this;
    }
}

std::string IsometryMap::describe() const {
    switch (kind) {
        case Kind::Identity: return "identity";
        case Kind::HeisRotationZ: return "heis_rotation(" + std::to_string(params[0]) + ")";
        case Kind::HeisTranslation: return "heis_translation";
        case Kind::CylTranslation: return "cyl_translation";
        case Kind::CylRotation: return "cyl_rotation(" + std::to_string(params[0]) + ")";
        case Kind::CylInvolution: return "cyl_involution";
    }
    return "?";
}

} // namespace legav
