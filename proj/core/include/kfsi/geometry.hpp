#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <utility>

#include "kfsi/shell_curve.hpp"
#include "kfsi/types.hpp"

namespace kfsi {

/// Scalar displacement field on the shell surface with two q-derivatives.
class ShellField {
 public:
  virtual ~ShellField() = default;
  virtual double value(double q) const = 0;
  virtual double d1(double q) const = 0;
  virtual double d2(double q) const = 0;

  double sup_norm(double q0, double q1, int samples = 512) const;
};

class AnalyticShellField final : public ShellField {
 public:
  AnalyticShellField(std::function<double(double)> v, std::function<double(double)> dv,
                     std::function<double(double)> ddv)
      : v_(std::move(v)), dv_(std::move(dv)), ddv_(std::move(ddv)) {}
  double value(double q) const override { return v_(q); }
  double d1(double q) const override { return dv_(q); }
  double d2(double q) const override { return ddv_(q); }

 private:
  std::function<double(double)> v_, dv_, ddv_;
};

class ZeroShellField final : public ShellField {
 public:
  double value(double) const override { return 0.0; }
  double d1(double) const override { return 0.0; }
  double d2(double) const override { return 0.0; }
};

/// Cutoff profile of the Hanzawa transform: quintic smoothstep in
/// sigma = s/kappa, identically 1 on [-0.1, 0] and 0 on [-1, -0.9],
/// C^2 monotone in between. Extended by its plateau values outside [-1, 0].
struct CutoffBeta {
  static constexpr double kPlateauHi = -0.1;
  static constexpr double kPlateauLo = -0.9;
  static constexpr double kMaxSlope = 1.875 / 0.8;  // max |d beta / d sigma|

  double value(double sigma) const;
  double d1(double sigma) const;
  double d2(double sigma) const;
};

/// dPsi_eta together with everything assembly needs: tube-coordinate partials,
/// Cartesian derivatives, and the time rates induced by a displacement rate.
/// Every entry reduces to the identity data outside the closed tube.
struct MovingJacobian {
  Mat2 dpsi = Mat2::Identity();
  double det = 1.0;
  Mat2 ddpsi_dx0 = Mat2::Zero();  // d(dPsi)/dx_0
  Mat2 ddpsi_dx1 = Mat2::Zero();  // d(dPsi)/dx_1
  Vec2 ddet_dx = Vec2::Zero();
  Mat2 dpsi_t = Mat2::Zero();  // time rate of dPsi (needs eta_t)
  double det_t = 0.0;
  Vec2 psi_t = Vec2::Zero();  // ALE velocity dPsi/dt at the reference point
  bool in_tube = false;
  double q = 0.0, s = 0.0;
};

struct PiolaData {
  Mat2 P;           // dPsi / det
  Mat2 dP_dx0, dP_dx1;
  Mat2 P_t;         // time rate of P
};

/// Reference geometry: shell curve, tube parameters, cutoff, and (for the
/// channel instantiation) the reference box (0,L) x (0,H) with M the top edge.
class Geometry {
 public:
  Geometry(std::shared_ptr<const ShellCurve> curve, double kappa, double alpha);

  const ShellCurve& curve() const { return *curve_; }
  double kappa() const { return kappa_; }
  double alpha() const { return alpha_; }
  const CutoffBeta& beta() const { return beta_; }

  bool has_channel() const { return channel_.has_value(); }
  double channel_length() const;
  double channel_height() const;

  /// ||eta||_inf < kappa, sampled densely; throws AdmissibilityError.
  void require_admissible(const ShellField& eta) const;
  /// Largest displacement for which det dPsi stays positive with the fixed beta.
  double monotone_bound() const { return kappa_ / CutoffBeta::kMaxSlope; }

  bool in_tube(const Vec2& x) const;
  std::pair<double, double> tube_coords(const Vec2& x) const;

  Vec2 hanzawa(const ShellField& eta, const Vec2& x) const;
  MovingJacobian hanzawa_jacobian(const ShellField& eta, const Vec2& x,
                                  const ShellField* eta_t = nullptr) const;
  /// Newton iteration on the normal fiber (tol 1e-12, bisection fallback).
  Vec2 hanzawa_inverse(const ShellField& eta, const Vec2& y) const;

  PiolaData piola_data(const MovingJacobian& J) const;
  /// Value of T_eta phi at Psi_eta(x) for a reference value phi(x).
  Vec2 piola_push_value(const ShellField& eta, const Vec2& x, const Vec2& phi_ref) const;

  /// gamma(eta) = 1 - 2 H eta + G eta^2.
  double gamma(const ShellField& eta, double q) const;
  /// Scaled pseudonormal v_eta = (1 + eta W) nu - eta' e1.
  Vec2 pseudonormal(const ShellField& eta, double q) const;
  /// Boundary scale factor g = (dPsi nu) . nu at the surface point q.
  double boundary_factor(const ShellField& eta, double q) const;

 private:
  std::shared_ptr<const ShellCurve> curve_;
  double kappa_;
  double alpha_;
  CutoffBeta beta_;
  std::optional<std::array<double, 2>> channel_;

  friend Geometry make_channel_geometry(double, double, double, double);
};

Geometry make_channel_geometry(double length, double height, double kappa, double alpha);
Geometry make_arc_geometry(Vec2 center, double radius, double theta0, double arc_length,
                           bool nu_inward, double kappa, double alpha);

/// Analytic vector/scalar test fields on the moving domain.
struct VectorField2 {
  std::function<Vec2(const Vec2&)> value;
  std::function<Mat2(const Vec2&)> jacobian;
  double divergence(const Vec2& y) const { return jacobian(y).trace(); }
};

struct ScalarField2 {
  std::function<double(const Vec2&)> value;
  std::function<Vec2(const Vec2&)> gradient;
};

/// Both sides of the Green-type pairing on Omega_eta:
///   lhs = int phi . grad psi + int (div phi) psi
///   rhs = int_M (tr phi . v_eta)(tr psi) dA + int_Gamma (tr phi . nu)(tr psi)|det dPhi| dA
struct GreenPairing {
  double lhs;
  double rhs;
};

GreenPairing green_pairing(const Geometry& geom, const ShellField& eta, const VectorField2& phi,
                           const ScalarField2& psi, int order = 6, int cells = 8,
                           int required_poly_degree = 0);

/// int_{Omega_eta} f dy by pullback, with the transverse rule split at the
/// cutoff-profile joints so the weight det dPsi is smooth per segment.
double moving_integral(const Geometry& geom, const ShellField& eta,
                       const std::function<double(const Vec2&)>& f_phys, int order = 6,
                       int cells = 8);

/// ||grad phi||_{L^r} / (||D phi||_{L^p} + ||phi||_{L^p}) on Omega_eta, r < p.
double korn_ratio(const Geometry& geom, const ShellField& eta, const VectorField2& phi, double r,
                  double p, int order = 6, int cells = 8);

}  // namespace kfsi
