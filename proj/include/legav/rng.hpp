#pragma once

#include "legav/types.hpp"

#include <random>

namespace legav {

/// Deterministic random source. Draws are derived from raw mt19937_64 output
/// so sequences are identical across platforms and standard libraries
/// (std::uniform_real_distribution makes no such promise).
class Rng {
public:
    explicit Rng(uint64_t seed) : eng_(seed) {}

    double uniform01() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

    uint64_t below(uint64_t n) { return eng_() % n; }

    /// Marsaglia polar method on deterministic uniforms.
    double normal() {
        double u, v, s;
        do {
            u = 2.0 * uniform01() - 1.0;
            v = 2.0 * uniform01() - 1.0;
            s = u * u + v * v;
        } while (s >= 1.0 || s == 0.0);
        return u * std::sqrt(-2.0 * std::log(s) / s);
    }

    Vec3 vec3(double lo, double hi) {
        const double a = uniform(lo, hi), b = uniform(lo, hi), c = uniform(lo, hi);
        return {a, b, c};
    }

    Vec3 unit3() {
        Vec3 v;
        do {
            v = vec3(-1.0, 1.0);
        } while (v.squaredNorm() < 1e-8 || v.squaredNorm() > 1.0);
        return v.normalized();
    }

private:
    std::mt19937_64 eng_;
};

} // namespace legav
