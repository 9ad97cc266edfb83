#pragma once

#include "legav/types.hpp"

#include <vector>

namespace legav {

namespace detail {
/// Second derivatives of the periodic cubic spline through (knots, values),
/// where h[i] is the knot gap i -> i+1 (cyclically).
std::vector<double> periodic_spline_m2(const std::vector<double>& h,
                                       const std::vector<double>& y);
} // namespace detail

/// Scalar periodic cubic spline. Knots ascend; the period is knots.back() -
/// knots.front() + the closing gap supplied at construction.
class PeriodicSpline1D {
public:
    PeriodicSpline1D() = default;
    PeriodicSpline1D(std::vector<double> knots, double period, std::vector<double> values);

    double eval(double t) const;
    double deriv(double t) const;
    double second(double t) const;
    double third(double t) const; // piecewise constant
    double period() const { return period_; }
    int size() const { return static_cast<int>(y_.size()); }

private:
    std::vector<double> t_, y_, m2_;
    double period_ = 0.0;

    int segment_of(double t, double* local) const;
    double gap(int i) const;
};

} // namespace legav
