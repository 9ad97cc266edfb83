#include "legav/planar.hpp"

#include <cmath>

namespace legav {

namespace {
constexpr double kGL4x[] = {-0.8611363115940526, -0.3399810435848563, 0.3399810435848563,
                            0.8611363115940526};
constexpr double kGL4w[] = {0.3478548451374538, 0.6521451548625461, 0.6521451548625461,
                            0.3478548451374538};
} // namespace

PlanarSpline::PlanarSpline(const std::vector<Vec2>& pts) : n_(static_cast<int>(pts.size())) {
    if (n_ < 8) throw Error(Errc::InvalidInput, "planar curve needs >= 8 samples");
    std::vector<double> t(n_), xs(n_), ys(n_);
    for (int i = 0; i < n_; ++i) {
        t[i] = kTwoPi * i / n_;
        xs[i] = pts[i][0];
        ys[i] = pts[i][1];
    }
    x_ = PeriodicSpline1D(t, kTwoPi, xs);
    y_ = PeriodicSpline1D(std::move(t), kTwoPi, ys);
}

Vec2 PlanarSpline::third(double t) const { return {x_.third(t), y_.third(t)}; }

double PlanarSpline::min_speed() const {
    double lo = std::numeric_limits<double>::max();
    const int grid = 8 * n_;
    for (int i = 0; i < grid; ++i) lo = std::min(lo, deriv(kTwoPi * i / grid).norm());
    return lo;
}

double PlanarSpline::signed_area() const {
    double a = 0.0;
    for (int i = 0; i < n_; ++i) {
        const double t0 = kTwoPi * i / n_, h = kTwoPi / n_;
        for (int q = 0; q < 4; ++q) {
            const double t = t0 + 0.5 * h * (1.0 + kGL4x[q]);
            const Vec2 p = eval(t), d = deriv(t);
            a += 0.5 * h * kGL4w[q] * 0.5 * (p[0] * d[1] - p[1] * d[0]);
        }
    }
    return a;
}

} // namespace legav
