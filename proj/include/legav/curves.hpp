#pragma once

#include "legav/contact.hpp"
#include "legav/geometry.hpp"
#include "legav/types.hpp"

#include <optional>
#include <string>
#include <vector>

namespace legav {

/// The planar data a discrete Legendrian was generated from; kept so the
/// curve can be perturbed and resampled exactly (perturbations act on the
/// generator and are re-lifted, never on the space curve directly).
struct CurveGenerator {
    enum class Kind { PlanarHeisenberg, FrontCylinder, FiberCylinder };
    Kind kind;
    std::vector<Vec2> planar; // uniform parameter samples on [0, 2*pi); unscaled
    double z0 = 0.0;          // Heisenberg lift anchor
    Vec2 base = Vec2::Zero(); // fiber base point (unscaled)
    double conormal_offset = kPi / 2; // cylinder front: phi = psi + offset
};

/// A sampled closed Legendrian curve: ordered samples, unit tangents and
/// cumulative arc-length knots (size n + 1, last = total length).
struct DiscreteLegendrian {
    ContactModel model = ContactModel::heisenberg();
    std::vector<Vec3> points;
    std::vector<Vec3> tangents;
    std::vector<double> arclen;
    std::string label;
    std::optional<CurveGenerator> generator;

    int size() const { return static_cast<int>(points.size()); }
    double length() const { return arclen.back() - arclen.front(); }
    CurveModel curve_model() const { return CurveModel(model, points, arclen); }
};

/// sup_i |theta(tau_i)| with the stored unit tangents.
double legendrian_residual(const DiscreteLegendrian& curve);

/// Checks the discrete-Legendrian invariants: tangency residual below
/// `residual_tol`, unit tangents, sane spacing, closure. Throws
/// Error(InvalidInput) on violation.
void validate_legendrian(const DiscreteLegendrian& curve, double residual_tol);

/// Horizontal lift of a closed planar curve into the Heisenberg model,
/// solving theta(gamma') = 0 for z. The planar samples are uniform-parameter
/// samples; the model's scale dilates them before lifting. Requires zero
/// signed area (closure) and an immersed generator.
DiscreteLegendrian lift_planar_heisenberg(const ContactModel& m, const std::vector<Vec2>& planar,
                                          double z0, const Config& cfg = {});

/// Conormal lift of an immersed closed plane curve into the cylinder model:
/// phi = tangent angle + offset so that cos(phi) x' + sin(phi) y' = 0.
DiscreteLegendrian lift_front_cylinder(const ContactModel& m, const std::vector<Vec2>& planar,
                                       const Config& cfg = {}, double conormal_offset = kPi / 2);

/// The fiber {p} x S^1 as a sampled Legendrian of the cylinder model.
DiscreteLegendrian fiber_cylinder(const ContactModel& m, const Vec2& p, int n,
                                  const Config& cfg = {});

struct PerturbResult {
    DiscreteLegendrian curve;
    double d1_reported = 0.0;
};

/// A new exact Legendrian near `curve`: the planar generator is perturbed by
/// a smooth random bump (re-projected onto the zero-signed-area constraint on
/// the Heisenberg model) and re-lifted. Deterministic in (curve, amplitude,
/// seed).
PerturbResult perturb(const DiscreteLegendrian& curve, double amplitude, uint64_t seed,
                      const Config& cfg = {});

/// Transforms the curve by a registered isometric (anti-)contactomorphism.
DiscreteLegendrian apply_map(const DiscreteLegendrian& curve, const IsometryMap& map);

/// Arc-length-uniform resampling through the planar generator, n >= 16.
DiscreteLegendrian resample(const DiscreteLegendrian& curve, int n, const Config& cfg = {});

// -- serialization ------------------------------------------------------------

/// CSV with header t,x,y,z_or_phi,tx,ty,tz_or_tphi (plus an optional
/// `component` column for cover preimages), 17 significant digits.
void write_curve_csv(const std::string& path, const DiscreteLegendrian& curve,
                     const std::vector<int>* components = nullptr);
DiscreteLegendrian read_curve_csv(const std::string& path, const ContactModel& m,
                                  std::vector<int>* components = nullptr);

// -- families -----------------------------------------------------------------

/// Weighted finite family of Legendrian curves (the probability space).
struct FamilyInput {
    std::vector<DiscreteLegendrian> members;
    std::vector<double> weights;
    std::vector<std::string> labels;

    int size() const { return static_cast<int>(members.size()); }
    void validate() const;
};

} // namespace legav
