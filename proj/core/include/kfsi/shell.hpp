#pragma once

#include <memory>
#include <vector>

#include "kfsi/geometry.hpp"
#include "kfsi/quadrature.hpp"
#include "kfsi/types.hpp"

namespace kfsi {

/// Homogeneous isotropic shell material. The elasticity tensor contracts to a
/// single scalar in the 2D instantiation (arclength metric, g = 1):
///   C = 4 mu lambda / (lambda + 2 mu) + 4 mu.
struct KoiterMaterial {
  double lame_lambda = 1.0;
  double lame_mu = 1.0;
  double thickness_half = 1.0;  // eps_s
  double shell_density = 1.0;   // rho_s

  double elasticity_scalar() const {
    return 4.0 * lame_mu * lame_lambda / (lame_lambda + 2.0 * lame_mu) + 4.0 * lame_mu;
  }
  void validate() const {
    if (!(lame_mu > 0.0) || lame_lambda < 0.0 || !(thickness_half > 0.0) ||
        !(shell_density > 0.0))
      throw ConfigError("KoiterMaterial: need mu > 0, lambda >= 0, eps_s > 0, rho_s > 0");
  }
};

enum class ShellBasisKind { ClampedBeam, ClampedBspline };

ShellBasisKind parse_shell_basis_kind(const std::string& name);

/// Clamped basis of the shell space on [0, L]: every mode and its slope vanish
/// at both ends. Modes are L^2-normalized. Beam eigenfunctions use a
/// cancellation-free evaluation so high modes stay accurate.
class ShellBasis {
 public:
  ShellBasis(ShellBasisKind kind, int n_modes, double length, int subintervals = 16,
             int points_per_subinterval = 8);

  int n_modes() const { return n_; }
  double length() const { return length_; }
  ShellBasisKind kind() const { return kind_; }

  double value(int k, double q) const;
  double d1(int k, double q) const;
  double d2(int k, double q) const;

  const Interval1dQuadrature& quadrature() const { return quad_; }
  const MatrixX& mass() const { return mass_; }

  /// Field eta = sum_k coeffs[k] Y_k.
  double eval(const VectorX& coeffs, double q) const;
  double eval_d1(const VectorX& coeffs, double q) const;
  double eval_d2(const VectorX& coeffs, double q) const;

  /// L^2(M) projection of an arbitrary field onto the basis.
  VectorX project(const ShellField& f) const;

 private:
  double raw_value(int k, double q, int deriv) const;

  ShellBasisKind kind_;
  int n_;
  double length_;
  Interval1dQuadrature quad_;
  std::vector<double> lambda_;  // beam eigenvalue parameters
  std::vector<double> sigma_;
  std::vector<double> a_coef_;
  std::vector<double> scale_;   // L^2 normalization
  std::vector<double> knots_;   // bspline knot vector
  MatrixX mass_;
};

/// ShellField view of a coefficient vector.
class BasisShellField final : public ShellField {
 public:
  BasisShellField(const ShellBasis& basis, VectorX coeffs)
      : basis_(&basis), coeffs_(std::move(coeffs)) {}
  double value(double q) const override { return basis_->eval(coeffs_, q); }
  double d1(double q) const override { return basis_->eval_d1(coeffs_, q); }
  double d2(double q) const override { return basis_->eval_d2(coeffs_, q); }
  const VectorX& coeffs() const { return coeffs_; }

 private:
  const ShellBasis* basis_;
  VectorX coeffs_;
};

/// Koiter energy K(eta, zeta) with strains sigma(eta) = -h eta and
/// xi(eta) = eta'' - k eta, evaluated by shell quadrature.
double koiter_energy(const KoiterMaterial& mat, const ShellCurve& curve, const ShellField& eta,
                     const ShellField& zeta, const Interval1dQuadrature& quad);

/// Stiffness in the 2K convention: S_jk = 2 K(Y_k, Y_j), so 2K(eta,zeta) = zeta^T S eta.
MatrixX koiter_stiffness_2k(const KoiterMaterial& mat, const ShellCurve& curve,
                            const ShellBasis& basis);

/// Basis-dual representer of the L^2 gradient: <grad K(eta), zeta>_{L^2} = zeta_coeffs . result.
VectorX koiter_gradient_dual(const MatrixX& stiffness_2k, const VectorX& eta_coeffs);

/// Coefficients of the L^2(M) representer function grad K(eta) itself.
VectorX koiter_gradient_l2(const ShellBasis& basis, const MatrixX& stiffness_2k,
                           const VectorX& eta_coeffs);

}  // namespace kfsi
