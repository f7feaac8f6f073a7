#include "kfsi/geometry.hpp"

#include <cmath>

#include "kfsi/quadrature.hpp"

namespace kfsi {

double ShellField::sup_norm(double q0, double q1, int samples) const {
  double m = 0.0;
  for (int i = 0; i <= samples; ++i) {
    const double q = q0 + (q1 - q0) * i / samples;
    m = std::max(m, std::abs(value(q)));
  }
  return m;
}

namespace {

// Quintic smoothstep u^3 (10 - 15 u + 6 u^2) on the transition interval.
inline double smoothstep(double u) { return u * u * u * (10.0 + u * (-15.0 + 6.0 * u)); }
inline double smoothstep_d1(double u) { return 30.0 * u * u * (1.0 - u) * (1.0 - u); }
inline double smoothstep_d2(double u) { return 60.0 * u * (1.0 - u) * (1.0 - 2.0 * u); }

constexpr double kWidth = CutoffBeta::kPlateauHi - CutoffBeta::kPlateauLo;  // 0.8

}  // namespace

double CutoffBeta::value(double sigma) const {
  if (sigma >= kPlateauHi) return 1.0;
  if (sigma <= kPlateauLo) return 0.0;
  return smoothstep((sigma - kPlateauLo) / kWidth);
}

double CutoffBeta::d1(double sigma) const {
  if (sigma >= kPlateauHi || sigma <= kPlateauLo) return 0.0;
  return smoothstep_d1((sigma - kPlateauLo) / kWidth) / kWidth;
}

double CutoffBeta::d2(double sigma) const {
  if (sigma >= kPlateauHi || sigma <= kPlateauLo) return 0.0;
  return smoothstep_d2((sigma - kPlateauLo) / kWidth) / (kWidth * kWidth);
}

Geometry::Geometry(std::shared_ptr<const ShellCurve> curve, double kappa, double alpha)
    : curve_(std::move(curve)), kappa_(kappa), alpha_(alpha) {
  if (!(0.0 < alpha_ && alpha_ < kappa_))
    throw ConfigError("Geometry: need 0 < alpha < kappa");
  if (alpha_ * CutoffBeta::kMaxSlope >= kappa_)
    throw ConfigError("Geometry: alpha too large for the fixed cutoff (alpha*max|beta'| must stay below kappa)");
}

double Geometry::channel_length() const {
  if (!channel_) throw ConfigError("Geometry: no channel box attached");
  return (*channel_)[0];
}

double Geometry::channel_height() const {
  if (!channel_) throw ConfigError("Geometry: no channel box attached");
  return (*channel_)[1];
}

void Geometry::require_admissible(const ShellField& eta) const {
  const double m = eta.sup_norm(0.0, curve_->length());
  if (m >= kappa_)
    throw AdmissibilityError("displacement not admissible: ||eta||_inf = " + std::to_string(m) +
                             " >= kappa = " + std::to_string(kappa_));
}

bool Geometry::in_tube(const Vec2& x) const {
  try {
    auto [q, s] = curve_->tube_coords(x, kappa_);
    (void)q;
    return std::abs(s) <= kappa_;
  } catch (const OutOfTubeError&) {
    return false;
  }
}

std::pair<double, double> Geometry::tube_coords(const Vec2& x) const {
  auto tc = curve_->tube_coords(x, kappa_);
  return {tc.q, tc.s};
}

Vec2 Geometry::hanzawa(const ShellField& eta, const Vec2& x) const {
  if (!in_tube(x)) return x;
  auto [q, s] = tube_coords(x);
  const double e = eta.value(q);
  if (std::abs(e) >= kappa_)
    throw AdmissibilityError("hanzawa: |eta(q)| >= kappa at q = " + std::to_string(q));
  return x + e * beta_.value(s / kappa_) * curve_->normal(q);
}

MovingJacobian Geometry::hanzawa_jacobian(const ShellField& eta, const Vec2& x,
                                          const ShellField* eta_t) const {
  MovingJacobian J;
  if (!in_tube(x)) return J;
  auto [q, s] = tube_coords(x);
  J.in_tube = true;
  J.q = q;
  J.s = s;

  const Vec2 e1 = curve_->tangent(q);
  const Vec2 nu = curve_->normal(q);
  const double W = curve_->weingarten(q);
  const double Wp = curve_->weingarten_d1(q);
  const double fiber = 1.0 + s * W;  // metric factor of the tube chart

  const double e = eta.value(q), ep = eta.d1(q), epp = eta.d2(q);
  if (std::abs(e) >= kappa_)
    throw AdmissibilityError("hanzawa_jacobian: |eta(q)| >= kappa");
  const double sig = s / kappa_;
  const double b = beta_.value(sig), b1 = beta_.d1(sig), b2 = beta_.d2(sig);

  const Mat2 E = e1 * e1.transpose();
  const Mat2 N1 = nu * e1.transpose();
  const Mat2 NN = nu * nu.transpose();
  // frame rotation along q: e1' = -W nu, nu' = W e1
  const Mat2 E_q = -W * (N1 + N1.transpose());
  const Mat2 N1_q = W * (E - NN);
  const Mat2 NN_q = W * (N1 + N1.transpose());

  // dPsi = I + a e1 e1^T + b_c nu e1^T + c nu nu^T in the moving frame
  const double a = e * b * W / fiber;
  const double bc = ep * b / fiber;
  const double c = e * b1 / kappa_;

  const double a_q = b * (ep * W + e * Wp) / fiber - e * b * W * s * Wp / (fiber * fiber);
  const double bc_q = epp * b / fiber - ep * b * s * Wp / (fiber * fiber);
  const double c_q = ep * b1 / kappa_;

  const double a_s = e * (b1 / kappa_) * W / fiber - e * b * W * W / (fiber * fiber);
  const double bc_s = ep * (b1 / kappa_) / fiber - ep * b * W / (fiber * fiber);
  const double c_s = e * b2 / (kappa_ * kappa_);

  J.dpsi = Mat2::Identity() + a * E + bc * N1 + c * NN;
  J.det = (1.0 + a) * (1.0 + c);

  const Mat2 dpsi_q = a_q * E + bc_q * N1 + c_q * NN + a * E_q + bc * N1_q + c * NN_q;
  const Mat2 dpsi_s = a_s * E + bc_s * N1 + c_s * NN;
  const double det_q = a_q * (1.0 + c) + (1.0 + a) * c_q;
  const double det_s = a_s * (1.0 + c) + (1.0 + a) * c_s;

  const Vec2 grad_q = e1 / fiber;
  const Vec2 grad_s = nu;
  J.ddpsi_dx0 = dpsi_q * grad_q[0] + dpsi_s * grad_s[0];
  J.ddpsi_dx1 = dpsi_q * grad_q[1] + dpsi_s * grad_s[1];
  J.ddet_dx = det_q * grad_q + det_s * grad_s;

  if (eta_t != nullptr) {
    const double et = eta_t->value(q), etp = eta_t->d1(q);
    const double a_t = et * b * W / fiber;
    const double bc_t = etp * b / fiber;
    const double c_t = et * b1 / kappa_;
    J.dpsi_t = a_t * E + bc_t * N1 + c_t * NN;
    J.det_t = a_t * (1.0 + c) + (1.0 + a) * c_t;
    J.psi_t = et * b * nu;
  }
  return J;
}

Vec2 Geometry::hanzawa_inverse(const ShellField& eta, const Vec2& y) const {
  ShellCurve::TubeCoords tc;
  try {
    tc = curve_->tube_coords(y, kappa_);
  } catch (const OutOfTubeError&) {
    return y;  // outside the closed tube the transform is the identity
  }
  const double q = tc.q, shat = tc.s;
  const double e = eta.value(q);
  if (std::abs(e) >= kappa_) throw AdmissibilityError("hanzawa_inverse: |eta(q)| >= kappa");
  if (shat > e + 1e-10)
    throw OutOfTubeError("hanzawa_inverse: point above the moving boundary");

  // solve s + eta(q) beta(s/kappa) = shat on [-kappa, 0]; strictly monotone
  // by the cutoff slope bound enforced at construction
  double lo = -kappa_, hi = 0.0;
  double s = std::clamp(shat, lo, hi);
  for (int it = 0; it < 50; ++it) {
    const double f = s + e * beta_.value(s / kappa_) - shat;
    if (std::abs(f) < 1e-12) break;
    if (f > 0.0)
      hi = s;
    else
      lo = s;
    const double fp = 1.0 + e * beta_.d1(s / kappa_) / kappa_;
    double snew = (fp > 1e-12) ? s - f / fp : 0.5 * (lo + hi);
    if (snew <= lo || snew >= hi) snew = 0.5 * (lo + hi);  // bisection fallback
    s = snew;
  }
  return y + (s - shat) * curve_->normal(q);
}

PiolaData Geometry::piola_data(const MovingJacobian& J) const {
  PiolaData P;
  const double inv = 1.0 / J.det;
  P.P = J.dpsi * inv;
  P.dP_dx0 = J.ddpsi_dx0 * inv - J.dpsi * (J.ddet_dx[0] * inv * inv);
  P.dP_dx1 = J.ddpsi_dx1 * inv - J.dpsi * (J.ddet_dx[1] * inv * inv);
  P.P_t = J.dpsi_t * inv - J.dpsi * (J.det_t * inv * inv);
  return P;
}

Vec2 Geometry::piola_push_value(const ShellField& eta, const Vec2& x, const Vec2& phi_ref) const {
  const MovingJacobian J = hanzawa_jacobian(eta, x);
  return (J.dpsi / J.det) * phi_ref;
}

double Geometry::gamma(const ShellField& eta, double q) const {
  const double e = eta.value(q);
  const double H = curve_->mean_curvature(q);
  const double G = curve_->gauss_curvature(q);
  return 1.0 - 2.0 * H * e + G * e * e;
}

Vec2 Geometry::pseudonormal(const ShellField& eta, double q) const {
  const double e = eta.value(q), ep = eta.d1(q);
  const double W = curve_->weingarten(q);
  return (1.0 + e * W) * curve_->normal(q) - ep * curve_->tangent(q);
}

double Geometry::boundary_factor(const ShellField& eta, double q) const {
  const MovingJacobian J = hanzawa_jacobian(eta, curve_->point(q));
  const Vec2 nu = curve_->normal(q);
  return nu.dot(J.dpsi * nu);
}

Geometry make_channel_geometry(double length, double height, double kappa, double alpha) {
  if (length <= 0.0 || height <= 0.0) throw ConfigError("channel: positive dimensions required");
  if (kappa >= height) throw ConfigError("channel: kappa must stay below the channel height");
  Geometry g(std::make_shared<FlatTopEdge>(length, height), kappa, alpha);
  g.channel_ = {length, height};
  return g;
}

Geometry make_arc_geometry(Vec2 center, double radius, double theta0, double arc_length,
                           bool nu_inward, double kappa, double alpha) {
  if (kappa >= radius)
    throw ConfigError("arc: kappa must stay below the injectivity radius of the tube map");
  return Geometry(std::make_shared<CircleArc>(center, radius, theta0, arc_length, nu_inward),
                  kappa, alpha);
}

namespace {

// 1D rule split at the cutoff-profile joints, where the pullback weight is
// only C^2 in the transverse coordinate.
Interval1dQuadrature transverse_rule(const Geometry& geom, double H, int order, int cells) {
  const double y1 = H + CutoffBeta::kPlateauLo * geom.kappa();
  const double y2 = H + CutoffBeta::kPlateauHi * geom.kappa();
  Interval1dQuadrature q;
  for (auto [a, b] : {std::pair{0.0, y1}, std::pair{y1, y2}, std::pair{y2, H}}) {
    auto part = composite_gauss(a, b, cells, order);
    q.points.insert(q.points.end(), part.points.begin(), part.points.end());
    q.weights.insert(q.weights.end(), part.weights.begin(), part.weights.end());
  }
  return q;
}

// Tensor quadrature over the reference box, pulled back through Psi_eta.
template <typename F>
double integrate_moving(const Geometry& geom, const ShellField& eta, int order, int cells, F&& f) {
  const double L = geom.channel_length(), H = geom.channel_height();
  double acc = 0.0;
  auto qx = composite_gauss(0.0, L, cells, order);
  auto qy = transverse_rule(geom, H, order, cells);
  for (std::size_t i = 0; i < qx.points.size(); ++i) {
    for (std::size_t j = 0; j < qy.points.size(); ++j) {
      const Vec2 x(qx.points[i], qy.points[j]);
      const MovingJacobian J = geom.hanzawa_jacobian(eta, x);
      const Vec2 y = geom.hanzawa(eta, x);
      acc += qx.weights[i] * qy.weights[j] * J.det * f(y);
    }
  }
  return acc;
}

}  // namespace

double moving_integral(const Geometry& geom, const ShellField& eta,
                       const std::function<double(const Vec2&)>& f_phys, int order, int cells) {
  return integrate_moving(geom, eta, order, cells, f_phys);
}

GreenPairing green_pairing(const Geometry& geom, const ShellField& eta, const VectorField2& phi,
                           const ScalarField2& psi, int order, int cells,
                           int required_poly_degree) {
  if (required_poly_degree > 0 && 2 * order - 1 < required_poly_degree)
    throw ConfigError("green_pairing: quadrature order insufficient for requested exactness");
  geom.require_admissible(eta);

  GreenPairing out{};
  out.lhs = integrate_moving(geom, eta, order, cells, [&](const Vec2& y) {
    return phi.value(y).dot(psi.gradient(y)) + phi.divergence(y) * psi.value(y);
  });

  const double L = geom.channel_length(), H = geom.channel_height();
  double rhs = 0.0;
  // shell part against the scaled pseudonormal
  auto qm = composite_gauss(0.0, L, cells, order);
  for (std::size_t i = 0; i < qm.points.size(); ++i) {
    const double q = qm.points[i];
    const Vec2 y = geom.curve().point(q) + eta.value(q) * geom.curve().normal(q);
    rhs += qm.weights[i] * phi.value(y).dot(geom.pseudonormal(eta, q)) * psi.value(y);
  }
  // fixed boundary Gamma = left + right + bottom; the channel edges map onto
  // themselves, tangential stretch |dPsi t| carries the surface Jacobian
  struct Edge {
    Vec2 base, dir, nu;
    double len;
  };
  const Edge edges[3] = {
      {{0.0, 0.0}, {0.0, 1.0}, {-1.0, 0.0}, H},
      {{L, 0.0}, {0.0, 1.0}, {1.0, 0.0}, H},
      {{0.0, 0.0}, {1.0, 0.0}, {0.0, -1.0}, L},
  };
  for (const Edge& eg : edges) {
    const bool lateral = eg.dir[1] != 0.0;
    auto qe = lateral ? transverse_rule(geom, H, order, cells)
                      : composite_gauss(0.0, eg.len, cells, order);
    for (std::size_t i = 0; i < qe.points.size(); ++i) {
      const Vec2 x = eg.base + qe.points[i] * eg.dir;
      const MovingJacobian J = geom.hanzawa_jacobian(eta, x);
      const Vec2 y = geom.hanzawa(eta, x);
      const double stretch = (J.dpsi * eg.dir).norm();
      rhs += qe.weights[i] * phi.value(y).dot(eg.nu) * psi.value(y) * stretch;
    }
  }
  out.rhs = rhs;
  return out;
}

double korn_ratio(const Geometry& geom, const ShellField& eta, const VectorField2& phi, double r,
                  double p, int order, int cells) {
  if (r >= p) throw ConfigError("korn_ratio: need r < p");
  geom.require_admissible(eta);
  const double grad_r = integrate_moving(geom, eta, order, cells, [&](const Vec2& y) {
    return std::pow(phi.jacobian(y).norm(), r);
  });
  const double sym_p = integrate_moving(geom, eta, order, cells, [&](const Vec2& y) {
    const Mat2 Jy = phi.jacobian(y);
    return std::pow((0.5 * (Jy + Jy.transpose())).norm(), p);
  });
  const double val_p = integrate_moving(geom, eta, order, cells, [&](const Vec2& y) {
    return std::pow(phi.value(y).norm(), p);
  });
  const double num = std::pow(grad_r, 1.0 / r);
  const double den = std::pow(sym_p, 1.0 / p) + std::pow(val_p, 1.0 / p);
  if (num == 0.0) return 0.0;
  return num / den;
}

}  // namespace kfsi
