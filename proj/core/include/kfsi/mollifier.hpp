#pragma once

#include <functional>
#include <memory>
#include <vector>

#include "kfsi/geometry.hpp"
#include "kfsi/shell.hpp"

namespace kfsi {

/// Piecewise-linear-in-time trajectory of shell coefficient vectors on
/// [0, T], extended constantly outside; analytic in q through the basis.
class ShellTrajectory {
 public:
  ShellTrajectory(const ShellBasis& basis, double dt, std::vector<VectorX> samples);

  static ShellTrajectory constant(const ShellBasis& basis, const VectorX& coeffs, double T,
                                  int samples);

  const ShellBasis& basis() const { return *basis_; }
  double dt() const { return dt_; }
  double horizon() const { return dt_ * (static_cast<int>(samples_.size()) - 1); }
  int n_samples() const { return static_cast<int>(samples_.size()); }
  const VectorX& sample(int i) const { return samples_[i]; }

  VectorX coeffs_at(double t) const;       // linear interpolation, constant extension
  VectorX coeffs_rate_at(double t) const;  // piecewise-constant slope, zero outside [0,T]

  double value(double t, double q) const;
  double d1(double t, double q) const;
  double d2(double t, double q) const;
  double dt_value(double t, double q) const;
  double dt_d1(double t, double q) const;
  double dt_d2(double t, double q) const;

  double sup_norm() const;

 private:
  const ShellBasis* basis_;
  double dt_;
  std::vector<VectorX> samples_;
};

/// Chart-wise space-time mollification of the displacement with the one-sided
/// kernel supported in {0 < t < eps, |z| < eps}, even reflection beyond the
/// shell ends (single chart, unit partition), and the eps^{1/2} upward shift.
/// The kernel quadrature is normalized to unit mass so constants reproduce
/// exactly; derivatives fall on the (analytic-in-q) trajectory.
class DisplacementMollifier {
 public:
  DisplacementMollifier(std::shared_ptr<const ShellTrajectory> delta, double eps,
                        int quad_points = 10);

  double eps() const { return eps_; }

  double value(double t, double q) const;
  double dt(double t, double q) const;
  double dq(double t, double q) const;
  double dqq(double t, double q) const;
  double dt_dq(double t, double q) const;
  double dt_dqq(double t, double q) const;

  /// ShellField views of the time slice and of its time derivative.
  class Slice;
  Slice slice(double t) const;
  Slice slice_rate(double t) const;

  double sup_norm(double T, int t_samples = 64, int q_samples = 128) const;

 private:
  template <typename F>
  double convolve(double t, double q, F&& f) const;

  std::shared_ptr<const ShellTrajectory> delta_;
  double eps_;
  std::vector<double> tau_, wtau_, zeta_, wzeta_;
  std::vector<double> kernel_;  // kernel value per (tau, zeta) pair / discrete mass
};

class DisplacementMollifier::Slice final : public ShellField {
 public:
  Slice(const DisplacementMollifier* m, double t, bool rate) : m_(m), t_(t), rate_(rate) {}
  double value(double q) const override { return rate_ ? m_->dt(t_, q) : m_->value(t_, q); }
  double d1(double q) const override { return rate_ ? m_->dt_dq(t_, q) : m_->dq(t_, q); }
  double d2(double q) const override { return rate_ ? m_->dt_dqq(t_, q) : m_->dqq(t_, q); }

 private:
  const DisplacementMollifier* m_;
  double t_;
  bool rate_;
};

/// Space-time velocity sample source for the classical mollification
/// R_eps v = w_eps * v (zero extension is the caller's responsibility).
struct SpaceTimeVelocity {
  std::function<Vec2(double, const Vec2&)> eval;
};

/// Symmetric product bump on [-eps, eps]^3 in (t, y1, y2), unit discrete mass.
class VelocityMollifier {
 public:
  VelocityMollifier(SpaceTimeVelocity v, double eps, int quad_points = 4);
  Vec2 value(double t, const Vec2& y) const;

 private:
  SpaceTimeVelocity v_;
  double eps_;
  std::vector<double> nodes_, weights_;
  double mass_;
};

}  // namespace kfsi
