#include "kfsi/shell_curve.hpp"

#include <cmath>

namespace kfsi {

double ShellCurve::initial_guess(const Vec2& x) const {
  // Coarse scan; subclasses override with a closed-form guess.
  const int n = 64;
  double best_q = 0.0, best_d = std::numeric_limits<double>::max();
  for (int i = 0; i <= n; ++i) {
    const double q = length() * i / n;
    const double d = (x - point(q)).squaredNorm();
    if (d < best_d) {
      best_d = d;
      best_q = q;
    }
  }
  return best_q;
}

ShellCurve::TubeCoords ShellCurve::tube_coords(const Vec2& x, double kappa) const {
  double q = initial_guess(x);
  const double L = length();
  q = std::clamp(q, 0.0, L);
  double s = 0.0;
  bool converged = false;
  for (int it = 0; it < 50; ++it) {
    const Vec2 d = x - point(q);
    const double f = d.dot(tangent(q));
    s = d.dot(normal(q));
    const double fp = -(1.0 + s * weingarten(q));
    if (std::abs(fp) < 1e-14) break;
    const double dq = f / fp;
    q -= dq;
    if (q < -0.05 * L || q > 1.05 * L)
      throw OutOfTubeError("tube_coords: foot point left the shell parameter range");
    q = std::clamp(q, 0.0, L);
    if (std::abs(dq) < 1e-14 * std::max(1.0, L)) {
      converged = true;
      break;
    }
  }
  if (!converged) {
    const double f = (x - point(q)).dot(tangent(q));
    if (std::abs(f) > 1e-10 * std::max(1.0, L))
      throw OutOfTubeError("tube_coords: Newton iteration did not converge");
  }
  s = (x - point(q)).dot(normal(q));
  if (std::abs(s) > kappa * (1.0 + 1e-12))
    throw OutOfTubeError("tube_coords: point outside the kappa-tube");
  return {q, std::clamp(s, -kappa, kappa)};
}

CircleArc::CircleArc(Vec2 center, double radius, double theta0, double arc_length, bool nu_inward)
    : center_(std::move(center)),
      radius_(radius),
      theta0_(theta0),
      length_(arc_length),
      nu_inward_(nu_inward) {
  if (radius <= 0.0 || arc_length <= 0.0) throw ConfigError("CircleArc: radius and length must be positive");
}

Vec2 CircleArc::point(double q) const {
  const double t = theta(q);
  return center_ + radius_ * Vec2(std::cos(t), std::sin(t));
}

Vec2 CircleArc::tangent(double q) const {
  const double t = theta(q);
  return {-std::sin(t), std::cos(t)};
}

Vec2 CircleArc::normal(double q) const {
  const double t = theta(q);
  const Vec2 out(std::cos(t), std::sin(t));
  return nu_inward_ ? Vec2(-out) : out;
}

double CircleArc::initial_guess(const Vec2& x) const {
  const Vec2 d = x - center_;
  double ang = std::atan2(d[1], d[0]) - theta0_;
  // wrap into the arc's parameter range
  while (ang < -M_PI) ang += 2.0 * M_PI;
  while (ang > M_PI) ang += -2.0 * M_PI;
  return std::clamp(ang * radius_, 0.0, length_);
}

}  // namespace kfsi
