#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <stdexcept>
#include <string>

namespace legav {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Vec4 = Eigen::Vector4d;
using Mat2 = Eigen::Matrix2d;
using Mat3 = Eigen::Matrix3d;
using Mat4 = Eigen::Matrix4d;

constexpr double kTwoPi = 6.283185307179586476925286766559;
constexpr double kPi = 3.1415926535897932384626433832795;

enum class ModelId { Heisenberg, Cylinder };

inline const char* to_string(ModelId m) {
    return m == ModelId::Heisenberg ? "heisenberg" : "cylinder";
}

enum class Errc {
    InvalidInput,
    MismatchedBase,
    DegeneratePlane,
    IntegrationFailure,
    OutOfInjectivity,
    SpreadTooLarge,
    NonUniqueNearest,
    NotASection,
    NonClosing,
    NotImmersed,
    AmplitudeTooLarge,
    UnregisteredMap,
    DomainEscape,
    DegenerateForm,
    TubeEscape,
    GateRefused,
    NotInvariant,
    EquivarianceFailure,
    SchemaViolation,
    MissingFile,
};

/// Library-wide error: a code for programmatic handling plus a human message.
class Error : public std::runtime_error {
public:
    Error(Errc code, const std::string& msg) : std::runtime_error(msg), code_(code) {}
    Errc code() const { return code_; }

private:
    Errc code_;
};

/// Central tolerance/configuration record. Defaults are the contract values
/// used across the library; tests and the CLI may override individual knobs.
struct Config {
    double exp_tol = 1e-10;          // local error target of adaptive geodesic integration
    double log_tol = 1e-10;          // shooting residual for log_map
    int log_max_iter = 50;
    double foot_tol = 1e-13;         // orthogonality residual of nearest-point solves
    int foot_max_iter = 40;
    double karcher_step_tol = 1e-11; // update-step norm for center-of-mass iteration
    int karcher_max_iter = 200;
    double tube_radius = 0.05;       // normal tube radius for tubular charts
    double fd_step = 1e-6;           // pullback differentials, Richardson-corrected
    double flow_tol = 1e-10;         // adaptive tolerance of the averaging flows
    double epsilon_paper = 1.0 / 70000.0; // strict-regime gate on max pairwise d1
    double d0_bound_factor = 1000.0;      // output bound: max d0(member, L) < factor * eps
    double residual_tol = 1e-6;      // tangency budget of the averaged output
    double lift_residual_tol = 1e-9; // tangency required of constructed lifts
    bool strict = false;             // strict mode refuses relaxed-regime families
    int threads = 0;                 // 0 = hardware concurrency
};

} // namespace legav
