#include "legav/spline.hpp"

#include <cmath>

namespace legav {

namespace detail {

std::vector<double> periodic_spline_m2(const std::vector<double>& h,
                                       const std::vector<double>& y) {
    const int n = static_cast<int>(y.size());
    auto Y = [&](int i) { return y[((i % n) + n) % n]; };
    auto H = [&](int i) { return h[((i % n) + n) % n]; };
    std::vector<double> rhs(n), diag(n), sub(n), sup(n);
    for (int i = 0; i < n; ++i) {
        sub[i] = H(i - 1) / 6.0;
        diag[i] = (H(i - 1) + H(i)) / 3.0;
        sup[i] = H(i) / 6.0;
        rhs[i] = (Y(i + 1) - Y(i)) / H(i) - (Y(i) - Y(i - 1)) / H(i - 1);
    }
    if (n == 1) return {0.0};
    if (n == 2) {
        Eigen::Matrix2d A;
        A << diag[0], sub[0] + sup[0], sub[1] + sup[1], diag[1];
        const Eigen::Vector2d x = A.fullPivLu().solve(Eigen::Vector2d(rhs[0], rhs[1]));
        return {x[0], x[1]};
    }
    // Sherman-Morrison removal of the cyclic corners
    const double alpha = sub[0], beta = sup[n - 1];
    const double gamma = -diag[0];
    std::vector<double> d(diag), u(n, 0.0);
    d[0] -= gamma;
    d[n - 1] -= alpha * beta / gamma;
    u[0] = gamma;
    u[n - 1] = alpha;
    auto thomas = [&](std::vector<double> b) {
        std::vector<double> c(n), x(n);
        c[0] = sup[0] / d[0];
        b[0] /= d[0];
        for (int i = 1; i < n; ++i) {
            const double m = d[i] - sub[i] * c[i - 1];
            c[i] = sup[i] / m;
            b[i] = (b[i] - sub[i] * b[i - 1]) / m;
        }
        x[n - 1] = b[n - 1];
        for (int i = n - 2; i >= 0; --i) x[i] = b[i] - c[i] * x[i + 1];
        return x;
    };
    const std::vector<double> xs = thomas(rhs);
    const std::vector<double> zs = thomas(u);
    const double vx = xs[0] + beta / gamma * xs[n - 1];
    const double vz = 1.0 + zs[0] + beta / gamma * zs[n - 1];
    std::vector<double> out(n);
    for (int i = 0; i < n; ++i) out[i] = xs[i] - vx / vz * zs[i];
    return out;
}

} // namespace detail

PeriodicSpline1D::PeriodicSpline1D(std::vector<double> knots, double period,
                                   std::vector<double> values)
    : t_(std::move(knots)), y_(std::move(values)), period_(period) {
    const int n = static_cast<int>(y_.size());
    if (static_cast<int>(t_.size()) != n || n < 2 || !(period_ > 0.0))
        throw Error(Errc::InvalidInput, "PeriodicSpline1D: bad inputs");
    std::vector<double> h(n);
    for (int i = 0; i + 1 < n; ++i) h[i] = t_[i + 1] - t_[i];
    h[n - 1] = t_[0] + period_ - t_[n - 1];
    m2_ = detail::periodic_spline_m2(h, y_);
}

double PeriodicSpline1D::gap(int i) const {
    const int n = size();
    return (i + 1 < n) ? t_[i + 1] - t_[i] : t_[0] + period_ - t_[n - 1];
}

int PeriodicSpline1D::segment_of(double t, double* local) const {
    const int n = size();
    double u = std::fmod(t - t_[0], period_);
    if (u < 0.0) u += period_;
    int lo = 0, hi = n;
    while (hi - lo > 1) {
        const int mid = (lo + hi) / 2;
        if (t_[mid] - t_[0] <= u)
            lo = mid;
        else
            hi = mid;
    }
    *local = u - (t_[lo] - t_[0]);
    return lo;
}

double PeriodicSpline1D::eval(double t) const {
    double u;
    const int i = segment_of(t, &u);
    const int n = size();
    const double h = gap(i);
    const double a = y_[i], b = y_[(i + 1) % n];
    const double ma = m2_[i], mb = m2_[(i + 1) % n];
    const double s = u / h, s1 = 1.0 - s;
    return a + s * (b - a) + (h * h / 6.0) * ((s * s * s - s) * mb + (s1 * s1 * s1 - s1) * ma);
}

double PeriodicSpline1D::deriv(double t) const {
    double u;
    const int i = segment_of(t, &u);
    const int n = size();
    const double h = gap(i);
    const double a = y_[i], b = y_[(i + 1) % n];
    const double ma = m2_[i], mb = m2_[(i + 1) % n];
    const double s = u / h, s1 = 1.0 - s;
    return (b - a) / h + (h / 6.0) * ((3.0 * s * s - 1.0) * mb - (3.0 * s1 * s1 - 1.0) * ma);
}

double PeriodicSpline1D::second(double t) const {
    double u;
    const int i = segment_of(t, &u);
    const double h = gap(i);
    const double s = u / h;
    return (1.0 - s) * m2_[i] + s * m2_[(i + 1) % size()];
}

double PeriodicSpline1D::third(double t) const {
    double u;
    const int i = segment_of(t, &u);
    return (m2_[(i + 1) % size()] - m2_[i]) / gap(i);
}

} // namespace legav
