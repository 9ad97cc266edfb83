#pragma once

#include "legav/types.hpp"

#include <array>
#include <optional>
#include <string>
#include <vector>

namespace legav {

/// A point of one of the concrete models. Coordinates are (x, y, z) on the
/// Heisenberg model and (x, y, phi) on the cylinder model, phi normalized to
/// [0, 2*pi).
struct ManifoldPoint {
    ModelId model;
    Vec3 c;
};

struct TangentVector {
    ManifoldPoint base;
    Vec3 v;
};

struct CovectorAt {
    ManifoldPoint base;
    Vec3 xi; // components in the coordinate coframe
};

/// Pointwise norms of the covariant derivatives of the contact form and its
/// differential. Frobenius values are taken in a g-orthonormal frame with
/// antisymmetric index pairs counted once; operator values are sampled sups.
struct FormNorms {
    double theta_frob;
    double dtheta_frob;
    double theta_op;
    double dtheta_op;
};

/// One of the two concrete contact 3-manifolds together with its contact
/// form, compatible metric and Levi-Civita data.
///
///  - Heisenberg: R^3, theta = dz + (x dy - y dx)/2, E = dz-dual, metric
///    declared orthonormal on the frame {dx + (y/2)dz, dy - (x/2)dz, dz}.
///  - Cylinder: R^2 x S^1, theta = cos(phi) dx + sin(phi) dy, flat product
///    metric.
///
/// `scale` is a dilation applied by the curve generators (not to the
/// structure fields) so curves can be sized to meet gentleness thresholds.
/// `theta_sign` flips theta (and with it E and the complex rotation); the
/// metric is unchanged. Used by the sign-invariance machinery.
class ContactModel {
public:
    static ContactModel heisenberg(double scale = 1.0) {
        return ContactModel(ModelId::Heisenberg, scale, +1.0);
    }
    static ContactModel cylinder(double scale = 1.0) {
        return ContactModel(ModelId::Cylinder, scale, +1.0);
    }
    static ContactModel from_name(const std::string& name, double scale = 1.0);

    ModelId id() const { return id_; }
    double scale() const { return scale_; }
    double theta_sign() const { return sign_; }
    ContactModel with_theta_sign(double s) const { return ContactModel(id_, scale_, s); }
    bool wraps_angle() const { return id_ == ModelId::Cylinder; }

    bool operator==(const ContactModel& o) const {
        return id_ == o.id_ && scale_ == o.scale_ && sign_ == o.sign_;
    }

    // -- chart helpers ------------------------------------------------------
    Vec3 normalize_point(const Vec3& p) const;
    /// Coordinate difference to - from, with the angle component wrapped to
    /// (-pi, pi] on the cylinder.
    Vec3 coord_delta(const Vec3& from, const Vec3& to) const;

    // -- structure fields ---------------------------------------------------
    /// Components of theta in the coordinate coframe.
    Vec3 theta(const Vec3& p) const;
    /// D(i,j) = dtheta(e_i, e_j) in coordinates.
    Mat3 dtheta(const Vec3& p) const;
    Vec3 reeb(const Vec3& p) const;
    Mat3 metric(const Vec3& p) const;
    Mat3 metric_inv(const Vec3& p) const;
    /// Hand-differentiated metric coefficients: d g / d x^k.
    Mat3 dmetric(const Vec3& p, int k) const;
    /// G[k](i,j) = Gamma^k_{ij}, from the closed-form metric derivatives.
    void christoffel(const Vec3& p, std::array<Mat3, 3>& G) const;
    /// Columns: a g-orthonormal frame (f1, f2 horizontal, f3 = Reeb).
    Mat3 frame(const Vec3& p) const;
    /// The compatibility endomorphism I on the contact plane (input must be
    /// horizontal; the Reeb component of the input is discarded).
    Vec3 complex_rot(const Vec3& p, const Vec3& h) const;

    double g_inner(const Vec3& p, const Vec3& v, const Vec3& w) const {
        return v.dot(metric(p) * w);
    }
    double g_norm(const Vec3& p, const Vec3& v) const { return std::sqrt(g_inner(p, v, v)); }

    // -- covariant derivatives ---------------------------------------------
    /// Components of (nabla_X theta).
    Vec3 nabla_theta(const Vec3& p, const Vec3& X) const;
    /// M(i,j) = (nabla_X dtheta)(e_i, e_j).
    Mat3 nabla_dtheta(const Vec3& p, const Vec3& X) const;
    FormNorms nabla_form_norms(const Vec3& p) const;

    /// R(u, v) w via finite differences of the closed-form Christoffels.
    Vec3 riemann(const Vec3& p, const Vec3& u, const Vec3& v, const Vec3& w) const;
    double sectional_curvature(const Vec3& p, const Vec3& u, const Vec3& v) const;

    /// |nabla_X omega_bar| at p for the symplectization form
    /// omega_bar = ds ^ theta + dtheta, X a horizontal vector.
    double nabla_omega_bar_norm(const Vec3& p, const Vec3& X) const;

    /// Value of theta ^ dtheta on the orthonormal frame (contact-condition
    /// margin; equals +-1 for both models).
    double contact_volume(const Vec3& p) const;

private:
    ContactModel(ModelId id, double scale, double sign) : id_(id), scale_(scale), sign_(sign) {
        if (!(scale > 0.0)) throw Error(Errc::InvalidInput, "model scale must be positive");
    }

    ModelId id_;
    double scale_;
    double sign_;
};

// -- spec-level checked wrappers -------------------------------------------

double eval_theta(const ContactModel& m, const TangentVector& v);
double eval_dtheta(const ContactModel& m, const TangentVector& v, const TangentVector& w);
TangentVector reeb(const ContactModel& m, const ManifoldPoint& p);
double metric(const ContactModel& m, const TangentVector& v, const TangentVector& w);

/// sup over samples and unit horizontal directions of |nabla_X omega_bar|,
/// with `dirs_per_point` random horizontal directions plus the frame ones.
double step3_bound_check(const ContactModel& m, const std::vector<Vec3>& samples,
                         int dirs_per_point = 8, uint64_t seed = 12345);

// -- registered isometries ---------------------------------------------------

/// Descriptor of a registered isometric (anti-)contactomorphism of a model.
/// Heisenberg: z-axis rotations and left translations. Cylinder: plane
/// translations, simultaneous plane/phi rotations, and the involution
/// (x, y, phi) -> (x, y, phi + pi), which reverses the sign of theta.
struct IsometryMap {
    enum class Kind {
        Identity,
        HeisRotationZ,    // params[0] = angle
        HeisTranslation,  // params = (a, b, c), left translation
        CylTranslation,   // params = (a, b, 0)
        CylRotation,      // params[0] = angle (plane and phi together)
        CylInvolution,
    };

    Kind kind = Kind::Identity;
    Vec3 params = Vec3::Zero();

    static IsometryMap identity() { return {}; }
    static IsometryMap heis_rotation(double angle);
    static IsometryMap heis_translation(const Vec3& abc);
    static IsometryMap cyl_translation(const Vec2& ab);
    static IsometryMap cyl_rotation(double angle);
    static IsometryMap cyl_involution();

    bool valid_for(ModelId m) const;
    /// +1 if the map preserves theta, -1 if it maps theta to -theta.
    double theta_sign() const { return kind == Kind::CylInvolution ? -1.0 : 1.0; }
    Vec3 apply_point(const ContactModel& m, const Vec3& p) const;
    /// The (constant or point-dependent) linear part acting on tangents.
    Mat3 linear_at(const ContactModel& m, const Vec3& p) const;
    IsometryMap inverse() const;
    std::string describe() const;
};

} // namespace legav
