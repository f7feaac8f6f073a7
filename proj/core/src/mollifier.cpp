#include "kfsi/mollifier.hpp"

#include <cmath>

#include "kfsi/quadrature.hpp"

namespace kfsi {

namespace {

// smooth bump on (0,1), zero outside
double bump01(double u) {
  if (u <= 0.0 || u >= 1.0) return 0.0;
  return std::exp(-1.0 / (u * (1.0 - u)));
}

// even bump on (-1,1)
double bump_sym(double u) {
  if (u <= -1.0 || u >= 1.0) return 0.0;
  return std::exp(-1.0 / (1.0 - u * u));
}

// even reflection of [0,L] onto the line; sign tracks odd derivatives
struct Reflected {
  double q;
  double sign;
};

Reflected reflect(double q, double L) {
  double period = 2.0 * L;
  double r = std::fmod(q, period);
  if (r < 0.0) r += period;
  if (r <= L) return {r, 1.0};
  return {period - r, -1.0};
}

}  // namespace

ShellTrajectory::ShellTrajectory(const ShellBasis& basis, double dt, std::vector<VectorX> samples)
    : basis_(&basis), dt_(dt), samples_(std::move(samples)) {
  if (samples_.size() < 2) throw ConfigError("ShellTrajectory: need at least two samples");
  if (!(dt_ > 0.0)) throw ConfigError("ShellTrajectory: dt must be positive");
}

ShellTrajectory ShellTrajectory::constant(const ShellBasis& basis, const VectorX& coeffs, double T,
                                          int samples) {
  std::vector<VectorX> s(std::max(samples, 2), coeffs);
  return ShellTrajectory(basis, T / (s.size() - 1), std::move(s));
}

VectorX ShellTrajectory::coeffs_at(double t) const {
  const int n = n_samples();
  if (t <= 0.0) return samples_.front();
  if (t >= horizon()) return samples_.back();
  const int i = std::min(static_cast<int>(t / dt_), n - 2);
  const double w = (t - i * dt_) / dt_;
  return (1.0 - w) * samples_[i] + w * samples_[i + 1];
}

VectorX ShellTrajectory::coeffs_rate_at(double t) const {
  if (t < 0.0 || t > horizon()) return VectorX::Zero(samples_.front().size());
  const int i = std::min(static_cast<int>(t / dt_), n_samples() - 2);
  return (samples_[i + 1] - samples_[i]) / dt_;
}

double ShellTrajectory::value(double t, double q) const { return basis_->eval(coeffs_at(t), q); }
double ShellTrajectory::d1(double t, double q) const { return basis_->eval_d1(coeffs_at(t), q); }
double ShellTrajectory::d2(double t, double q) const { return basis_->eval_d2(coeffs_at(t), q); }
double ShellTrajectory::dt_value(double t, double q) const {
  return basis_->eval(coeffs_rate_at(t), q);
}
double ShellTrajectory::dt_d1(double t, double q) const {
  return basis_->eval_d1(coeffs_rate_at(t), q);
}
double ShellTrajectory::dt_d2(double t, double q) const {
  return basis_->eval_d2(coeffs_rate_at(t), q);
}

double ShellTrajectory::sup_norm() const {
  double m = 0.0;
  for (int i = 0; i < n_samples(); ++i) {
    BasisShellField f(*basis_, samples_[i]);
    m = std::max(m, f.sup_norm(0.0, basis_->length(), 256));
  }
  return m;
}

DisplacementMollifier::DisplacementMollifier(std::shared_ptr<const ShellTrajectory> delta,
                                             double eps, int quad_points)
    : delta_(std::move(delta)), eps_(eps) {
  if (!(eps_ > 0.0)) throw ConfigError("DisplacementMollifier: eps must be in (0, eps_0)");
  auto qt = gauss_on_interval(0.0, eps_, quad_points);
  auto qz = gauss_on_interval(-eps_, eps_, quad_points);
  tau_ = qt.points;
  wtau_ = qt.weights;
  zeta_ = qz.points;
  wzeta_ = qz.weights;
  kernel_.resize(tau_.size() * zeta_.size());
  double mass = 0.0;
  for (std::size_t i = 0; i < tau_.size(); ++i)
    for (std::size_t j = 0; j < zeta_.size(); ++j) {
      const double k = bump01(tau_[i] / eps_) * bump_sym(zeta_[j] / eps_);
      kernel_[i * zeta_.size() + j] = k;
      mass += wtau_[i] * wzeta_[j] * k;
    }
  for (double& k : kernel_) k /= mass;
}

template <typename F>
double DisplacementMollifier::convolve(double t, double q, F&& f) const {
  const double L = delta_->basis().length();
  double acc = 0.0;
  for (std::size_t i = 0; i < tau_.size(); ++i)
    for (std::size_t j = 0; j < zeta_.size(); ++j) {
      const Reflected r = reflect(q - zeta_[j], L);
      acc += wtau_[i] * wzeta_[j] * kernel_[i * zeta_.size() + j] * f(t - tau_[i], r);
    }
  return acc;
}

double DisplacementMollifier::value(double t, double q) const {
  return convolve(t, q, [&](double s, const Reflected& r) { return delta_->value(s, r.q); }) +
         std::sqrt(eps_);
}

double DisplacementMollifier::dt(double t, double q) const {
  return convolve(t, q, [&](double s, const Reflected& r) { return delta_->dt_value(s, r.q); });
}

double DisplacementMollifier::dq(double t, double q) const {
  return convolve(t, q,
                  [&](double s, const Reflected& r) { return r.sign * delta_->d1(s, r.q); });
}

double DisplacementMollifier::dqq(double t, double q) const {
  return convolve(t, q, [&](double s, const Reflected& r) { return delta_->d2(s, r.q); });
}

double DisplacementMollifier::dt_dq(double t, double q) const {
  return convolve(t, q,
                  [&](double s, const Reflected& r) { return r.sign * delta_->dt_d1(s, r.q); });
}

double DisplacementMollifier::dt_dqq(double t, double q) const {
  return convolve(t, q, [&](double s, const Reflected& r) { return delta_->dt_d2(s, r.q); });
}

DisplacementMollifier::Slice DisplacementMollifier::slice(double t) const {
  return Slice(this, t, false);
}
DisplacementMollifier::Slice DisplacementMollifier::slice_rate(double t) const {
  return Slice(this, t, true);
}

double DisplacementMollifier::sup_norm(double T, int t_samples, int q_samples) const {
  const double L = delta_->basis().length();
  double m = 0.0;
  for (int i = 0; i <= t_samples; ++i)
    for (int j = 0; j <= q_samples; ++j)
      m = std::max(m, std::abs(value(T * i / t_samples, L * j / q_samples)));
  return m;
}

VelocityMollifier::VelocityMollifier(SpaceTimeVelocity v, double eps, int quad_points)
    : v_(std::move(v)), eps_(eps) {
  if (!(eps_ > 0.0)) throw ConfigError("VelocityMollifier: eps must be positive");
  auto q = gauss_on_interval(-eps_, eps_, quad_points);
  nodes_ = q.points;
  weights_ = q.weights;
  mass_ = 0.0;
  for (std::size_t i = 0; i < nodes_.size(); ++i)
    for (std::size_t j = 0; j < nodes_.size(); ++j)
      for (std::size_t k = 0; k < nodes_.size(); ++k)
        mass_ += weights_[i] * weights_[j] * weights_[k] * bump_sym(nodes_[i] / eps_) *
                 bump_sym(nodes_[j] / eps_) * bump_sym(nodes_[k] / eps_);
}

Vec2 VelocityMollifier::value(double t, const Vec2& y) const {
  Vec2 acc = Vec2::Zero();
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    const double kt = bump_sym(nodes_[i] / eps_);
    for (std::size_t j = 0; j < nodes_.size(); ++j) {
      const double ky = kt * bump_sym(nodes_[j] / eps_);
      for (std::size_t k = 0; k < nodes_.size(); ++k) {
        const double w =
            weights_[i] * weights_[j] * weights_[k] * ky * bump_sym(nodes_[k] / eps_) / mass_;
        acc += w * v_.eval(t - nodes_[i], Vec2(y[0] - nodes_[j], y[1] - nodes_[k]));
      }
    }
  }
  return acc;
}

}  // namespace kfsi
