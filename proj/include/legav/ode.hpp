#pragma once

#include "legav/types.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

namespace legav::ode {

/// Dormand-Prince 5(4) coefficients.
namespace dp {
constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
constexpr double a21 = 1.0 / 5;
constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                 a54 = -212.0 / 729;
constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247,
                 a64 = 49.0 / 176, a65 = -5103.0 / 18656;
constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192, b5 = -2187.0 / 6784,
                 b6 = 11.0 / 84;
// embedded 4th-order weights
constexpr double e1 = 5179.0 / 57600, e3 = 7571.0 / 16695, e4 = 393.0 / 640,
                 e5 = -92097.0 / 339200, e6 = 187.0 / 2100, e7 = 1.0 / 40;
} // namespace dp

template <int N>
using State = Eigen::Matrix<double, N, 1>;

/// One accepted step of an adaptive integration, recorded for dense access.
template <int N>
struct Step {
    double t;
    State<N> y;
    State<N> dy;
};

/// Adaptive Dormand-Prince 5(4) with a PI step controller. `rhs(t, y, dydt)`
/// must be safe to call at trial states. Records every accepted step.
/// Throws Error(IntegrationFailure) on step-size underflow.
template <int N, class Rhs>
std::vector<Step<N>> integrate_adaptive(Rhs&& rhs, double t0, double t1, const State<N>& y0,
                                        double rtol, double atol, double h_init = 0.0) {
    using namespace dp;
    const double dir = (t1 >= t0) ? 1.0 : -1.0;
    const double span = std::abs(t1 - t0);
    std::vector<Step<N>> out;
    if (span == 0.0) {
        State<N> d;
        rhs(t0, y0, d);
        out.push_back({t0, y0, d});
        return out;
    }

    double h = (h_init > 0.0 ? std::min(h_init, span) : std::min(0.1 * span + 1e-4, span)) * dir;
    double t = t0;
    State<N> y = y0;
    State<N> k1, k2, k3, k4, k5, k6, k7, ytmp, y5;
    rhs(t, y, k1);
    out.push_back({t, y, k1});

    const double hmin = span * 1e-14 + 1e-300;
    double err_prev = 1.0;
    int n_steps = 0;
    const int max_steps = 1000000;

    while (dir * (t1 - t) > 0.0) {
        if (dir * (t + h - t1) > 0.0) h = t1 - t;
        if (std::abs(h) < hmin)
            throw Error(Errc::IntegrationFailure, "ode: step size underflow");
        if (++n_steps > max_steps)
            throw Error(Errc::IntegrationFailure, "ode: step budget exhausted");

        ytmp = y + h * (a21 * k1);
        rhs(t + c2 * h, ytmp, k2);
        ytmp = y + h * (a31 * k1 + a32 * k2);
        rhs(t + c3 * h, ytmp, k3);
        ytmp = y + h * (a41 * k1 + a42 * k2 + a43 * k3);
        rhs(t + c4 * h, ytmp, k4);
        ytmp = y + h * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4);
        rhs(t + c5 * h, ytmp, k5);
        ytmp = y + h * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5);
        rhs(t + h, ytmp, k6);
        y5 = y + h * (b1 * k1 + b3 * k3 + b4 * k4 + b5 * k5 + b6 * k6);
        rhs(t + h, y5, k7);

        State<N> y4 = y + h * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);
        double err = 0.0;
        for (int i = 0; i < N; ++i) {
            const double sc = atol + rtol * std::max(std::abs(y[i]), std::abs(y5[i]));
            const double e = (y5[i] - y4[i]) / sc;
            err += e * e;
        }
        err = std::sqrt(err / N);

        if (err <= 1.0) {
            t += h;
            y = y5;
            k1 = k7; // FSAL
            out.push_back({t, y, k1});
            const double fac =
                0.9 * std::pow(std::max(err, 1e-10), -0.7 / 5.0) * std::pow(err_prev, 0.4 / 5.0);
            h *= std::clamp(fac, 0.2, 5.0);
            err_prev = std::max(err, 1e-10);
        } else {
            h *= std::clamp(0.9 * std::pow(err, -0.2), 0.1, 0.9);
        }
    }
    return out;
}

/// Classical RK4 with a fixed step count. Noise-free in the sense that the
/// result is a fixed composition of arithmetic in the inputs, which keeps
/// finite-difference stencils through it smooth.
template <int N, class Rhs>
State<N> rk4_fixed(Rhs&& rhs, double t0, double t1, const State<N>& y0, int nsteps) {
    const double h = (t1 - t0) / nsteps;
    State<N> y = y0, k1, k2, k3, k4, ytmp;
    double t = t0;
    for (int i = 0; i < nsteps; ++i) {
        rhs(t, y, k1);
        ytmp = y + 0.5 * h * k1;
        rhs(t + 0.5 * h, ytmp, k2);
        ytmp = y + 0.5 * h * k2;
        rhs(t + 0.5 * h, ytmp, k3);
        ytmp = y + h * k3;
        rhs(t + h, ytmp, k4);
        y += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        t += h;
    }
    return y;
}

} // namespace legav::ode
