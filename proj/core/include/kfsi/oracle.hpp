#pragma once

#include <functional>

#include "kfsi/types.hpp"

// Independent brute-force and finite-difference verifiers. This module must
// not call into the assembly/geometry code paths it is used to check; it
// carries its own Gauss-Legendre node generation.
namespace kfsi::oracle {

/// Central-difference Jacobian of a 2D map, step h.
Mat2 fd_jacobian(const std::function<Vec2(const Vec2&)>& map, const Vec2& x, double h = 1e-6);

/// Tensor Gauss quadrature of f over [ax,bx] x [ay,by]; `order` points per
/// dimension per cell, `cells` cells per dimension.
double quad_integral(const std::function<double(double, double)>& f, double ax, double bx,
                     double ay, double by, int order, int cells = 1);

/// 1D version on [a, b].
double quad_integral_1d(const std::function<double(double)>& f, double a, double b, int order,
                        int cells = 1);

/// Iterated integral over the moving domain in tube coordinates, independent
/// of any Hanzawa machinery: region { (q,s) : 0<q<L, -kappa<s<eta(q) } plus the
/// box below the tube.
double moving_domain_integral(const std::function<double(double, double)>& f_xy, double L,
                              double H, double kappa, const std::function<double(double)>& eta,
                              int order, int cells);

/// Centered difference (K(eta + h zeta) - K(eta - h zeta)) / (2h).
double fd_energy_gradient(const std::function<double(const VectorX&)>& energy,
                          const VectorX& eta, const VectorX& zeta, double h = 1e-5);

/// Closed-form trajectory of  mass * eta'' + stiffness * eta = 0.
struct OscillatorReference {
  double mass;
  double stiffness;
  double eta0;
  double eta1;

  double omega() const { return std::sqrt(stiffness / mass); }
  double displacement(double t) const;
  double velocity(double t) const;
  double energy() const;  // 0.5 m eta1^2 + 0.5 s eta0^2, conserved
};

}  // namespace kfsi::oracle
