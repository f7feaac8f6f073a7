#pragma once

#include <memory>
#include <vector>

#include "kfsi/assembly.hpp"
#include "kfsi/geometry.hpp"
#include "kfsi/mesh.hpp"
#include "kfsi/shell.hpp"

namespace kfsi {

/// Exponential transport factor of the tube extension,
///   exp( -int_{eta(q)}^{s} div(nu o q)(q + tau nu) dtau ),
/// with div(nu o q) = W(q) / (1 + tau W(q)); 8-point Gauss per fiber.
double tube_exp_factor(const Geometry& geom, const ShellField& eta, double q, double s,
                       int fiber_points = 8);

/// (F_eta b)(x) = factor(q,s) b(q) nu(q) evaluated pointwise in the tube.
Vec2 tube_extension_value(const Geometry& geom, const ShellField& eta, const ShellField& b,
                          const Vec2& x, int fiber_points = 8);
Mat2 tube_extension_jacobian(const Geometry& geom, const ShellField& eta, const ShellField& b,
                             const Vec2& x, int fiber_points = 8);
/// dt(F_eta b) on the tube given rates of b and eta.
Vec2 tube_extension_dt(const Geometry& geom, const ShellField& eta, const ShellField& b,
                       const ShellField& b_t, const ShellField& eta_t, const Vec2& x,
                       int fiber_points = 8);

/// Divergence-free lift of one shell function into the channel B_alpha:
/// the closed-form tube field on y >= 1 - alpha glued to the compensated
/// Stokes solution on the box below. Both parts live in physical coordinates
/// (B_alpha is a fixed domain).
class ExtendedShellVelocity {
 public:
  Vec2 value(const Vec2& x) const;
  Mat2 jacobian(const Vec2& x) const;

  double interface_flux() const { return flux_; }          // int_{M_-^alpha} F . nu^alpha dA
  double compensated_boundary_flux() const { return net_flux_; }
  const VectorX& lift_dofs() const { return lift_u_; }
  const MixedSpace& lift_space() const { return *lift_space_; }

 private:
  friend class ShellExtensionOperator;
  const Geometry* geom_ = nullptr;
  std::shared_ptr<const ShellField> eta_;
  std::shared_ptr<const ShellField> b_;
  std::shared_ptr<const MixedSpace> lift_space_;
  VectorX lift_u_;
  double interface_y_ = 0.0;
  double flux_ = 0.0;
  double net_flux_ = 0.0;
};

/// Materialized extension operator F_eta for a whole shell basis: one
/// compensated Stokes factorization, one lift solve per mode. Linear in the
/// shell coefficients by construction.
class ShellExtensionOperator {
 public:
  ShellExtensionOperator(const MixedSpace& global_space, const Geometry& geom,
                         const ShellBasis& basis, std::shared_ptr<const ShellField> eta,
                         int order = 5);

  int n_modes() const { return static_cast<int>(modes_.size()); }
  const ExtendedShellVelocity& mode(int k) const { return modes_[k]; }

  /// F_eta applied to an arbitrary coefficient vector.
  Vec2 value(const VectorX& coeffs, const Vec2& x) const;
  Mat2 jacobian(const VectorX& coeffs, const Vec2& x) const;

  /// Lift a single non-basis shell function (same factorization).
  ExtendedShellVelocity lift_field(std::shared_ptr<const ShellField> b) const;

 private:
  const Geometry* geom_;
  std::shared_ptr<const ShellField> eta_;
  std::shared_ptr<const MixedSpace> lift_space_;
  std::shared_ptr<SpMat> lift_visc_, lift_div_;
  std::vector<ExtendedShellVelocity> modes_;
  int order_;

  ExtendedShellVelocity build(std::shared_ptr<const ShellField> b) const;
};

/// C^2 bump on the central third of the bottom edge, unit integral.
double compensation_profile(double x, double L);

}  // namespace kfsi
