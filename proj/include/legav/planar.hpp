#pragma once

#include "legav/spline.hpp"
#include "legav/types.hpp"

#include <vector>

namespace legav {

/// Closed plane curve as a pair of periodic cubic splines over the uniform
/// parameter grid t_i = 2 pi i / n.
class PlanarSpline {
public:
    PlanarSpline() = default;
    explicit PlanarSpline(const std::vector<Vec2>& pts);

    int size() const { return n_; }
    Vec2 eval(double t) const { return {x_.eval(t), y_.eval(t)}; }
    Vec2 deriv(double t) const { return {x_.deriv(t), y_.deriv(t)}; }
    Vec2 second(double t) const { return {x_.second(t), y_.second(t)}; }
    /// Piecewise-constant third derivative of the cubic pieces.
    Vec2 third(double t) const;

    double min_speed() const;
    /// (1/2) closed integral of (x y' - y x'); exact for the spline.
    double signed_area() const;
    /// 8-point Gauss integral of f over [a, b] (within one period).
    template <class F>
    double integrate(double a, double b, F&& f) const {
        static constexpr double gx[] = {-0.9602898564975363, -0.7966664774136267,
                                        -0.5255324099163290, -0.1834346424956498,
                                        0.1834346424956498,  0.5255324099163290,
                                        0.7966664774136267,  0.9602898564975363};
        static constexpr double gw[] = {0.1012285362903763, 0.2223810344533745,
                                        0.3137066458778873, 0.3626837833783620,
                                        0.3626837833783620, 0.3137066458778873,
                                        0.2223810344533745, 0.1012285362903763};
        double acc = 0.0;
        for (int q = 0; q < 8; ++q)
            acc += 0.5 * (b - a) * gw[q] * f(a + 0.5 * (b - a) * (1.0 + gx[q]));
        return acc;
    }

private:
    PeriodicSpline1D x_, y_;
    int n_ = 0;
};

} // namespace legav
