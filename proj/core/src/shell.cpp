#include "kfsi/shell.hpp"

#include <Eigen/Dense>

#include <cmath>

namespace kfsi {

namespace {

// Roots of cosh(x) cos(x) = 1 (clamped-clamped beam), refined by Newton on
// f(x) = cos(x) - 1/cosh(x), which stays O(1) for large x.
double beam_root(int k) {
  double x = (2 * k + 1) * M_PI / 2.0;
  if (k == 1) x = 4.73;
  for (int it = 0; it < 60; ++it) {
    const double f = std::cos(x) - 1.0 / std::cosh(x);
    const double fp = -std::sin(x) + std::sinh(x) / (std::cosh(x) * std::cosh(x));
    const double dx = f / fp;
    x -= dx;
    if (std::abs(dx) < 1e-15) break;
  }
  return x;
}

// Mode on [0,1]: Y = cosh(lu) - cos(lu) - sigma (sinh(lu) - sin(lu)).
// The growing/cancelling hyperbolic parts are recombined through
// exp(l(u-1)) and exp(-lu) so no large intermediates appear.
struct BeamMode {
  double lambda, sigma, A;

  explicit BeamMode(double l) : lambda(l) {
    const double em = std::exp(-l);
    const double em2 = em * em;
    const double D = 1.0 - em2 - 2.0 * std::sin(l) * em;      // (sinh l - sin l) * 2 e^{-l}
    sigma = (1.0 + em2 - 2.0 * std::cos(l) * em) / D;
    A = 2.0 * (std::cos(l) - std::sin(l) - em) / D;           // (1 - sigma) e^{l}
  }
  BeamMode(double l, double s, double a) : lambda(l), sigma(s), A(a) {}

  // deriv 0/1/2; each d/du brings a factor lambda and flips trig signs
  double eval(double u, int deriv) const {
    const double grow = 0.5 * A * std::exp(lambda * (u - 1.0));
    const double decay = 0.5 * (1.0 + sigma) * std::exp(-lambda * u);
    const double c = std::cos(lambda * u), s = std::sin(lambda * u);
    double v = 0.0;
    switch (deriv) {
      case 0: v = grow + decay - c + sigma * s; break;
      case 1: v = lambda * (grow - decay + s + sigma * c); break;
      case 2: v = lambda * lambda * (grow + decay + c - sigma * s); break;
      default: throw ConfigError("BeamMode: derivative order not supported");
    }
    return v;
  }
};

// Cox-de Boor with derivatives for one cubic B-spline over `knots`.
double bspline_eval(const std::vector<double>& knots, int i, int p, double q, int deriv) {
  if (deriv > 0) {
    // derivative recursion on degree
    double left = 0.0, right = 0.0;
    if (knots[i + p] > knots[i])
      left = p / (knots[i + p] - knots[i]) * bspline_eval(knots, i, p - 1, q, deriv - 1);
    if (knots[i + p + 1] > knots[i + 1])
      right = p / (knots[i + p + 1] - knots[i + 1]) * bspline_eval(knots, i + 1, p - 1, q, deriv - 1);
    return left - right;
  }
  if (p == 0) {
    const bool last = (knots[i + 1] == knots.back()) && q == knots.back();
    return ((q >= knots[i] && q < knots[i + 1]) || (last && knots[i] < knots[i + 1])) ? 1.0 : 0.0;
  }
  double left = 0.0, right = 0.0;
  if (knots[i + p] > knots[i])
    left = (q - knots[i]) / (knots[i + p] - knots[i]) * bspline_eval(knots, i, p - 1, q, 0);
  if (knots[i + p + 1] > knots[i + 1])
    right = (knots[i + p + 1] - q) / (knots[i + p + 1] - knots[i + 1]) *
            bspline_eval(knots, i + 1, p - 1, q, 0);
  return left + right;
}

}  // namespace

ShellBasisKind parse_shell_basis_kind(const std::string& name) {
  if (name == "clamped-beam-eigenfunctions" || name == "beam") return ShellBasisKind::ClampedBeam;
  if (name == "cubic-bsplines-clamped" || name == "bspline") return ShellBasisKind::ClampedBspline;
  throw ConfigError("unsupported shell basis kind: " + name);
}

ShellBasis::ShellBasis(ShellBasisKind kind, int n_modes, double length, int subintervals,
                       int points_per_subinterval)
    : kind_(kind), n_(n_modes), length_(length) {
  if (n_modes < 1) throw ConfigError("ShellBasis: need n_modes >= 1");
  quad_ = composite_gauss(0.0, length, std::max(subintervals, n_modes), points_per_subinterval);

  if (kind_ == ShellBasisKind::ClampedBeam) {
    for (int k = 1; k <= n_; ++k) {
      const BeamMode mode(beam_root(k));
      lambda_.push_back(mode.lambda);
      sigma_.push_back(mode.sigma);
      a_coef_.push_back(mode.A);
    }
  } else {
    // open-uniform cubic knots; dropping two splines at each end enforces the
    // clamped value and slope exactly
    const int nseg = n_ + 1;
    const double h = length / nseg;
    for (int i = 0; i < 4; ++i) knots_.push_back(0.0);
    for (int i = 1; i < nseg; ++i) knots_.push_back(i * h);
    for (int i = 0; i < 4; ++i) knots_.push_back(length);
  }

  scale_.assign(n_, 1.0);
  for (int k = 0; k < n_; ++k) {
    double m = 0.0;
    for (std::size_t i = 0; i < quad_.points.size(); ++i) {
      const double v = raw_value(k, quad_.points[i], 0);
      m += quad_.weights[i] * v * v;
    }
    scale_[k] = 1.0 / std::sqrt(m);
  }

  mass_.resize(n_, n_);
  for (int j = 0; j < n_; ++j)
    for (int k = 0; k < n_; ++k) {
      double m = 0.0;
      for (std::size_t i = 0; i < quad_.points.size(); ++i)
        m += quad_.weights[i] * value(j, quad_.points[i]) * value(k, quad_.points[i]);
      mass_(j, k) = m;
    }
}

double ShellBasis::raw_value(int k, double q, int deriv) const {
  if (kind_ == ShellBasisKind::ClampedBeam) {
    BeamMode mode(lambda_[k], sigma_[k], a_coef_[k]);
    return mode.eval(q / length_, deriv) / std::pow(length_, deriv);
  }
  return bspline_eval(knots_, k + 2, 3, q, deriv);
}

double ShellBasis::value(int k, double q) const { return scale_[k] * raw_value(k, q, 0); }
double ShellBasis::d1(int k, double q) const { return scale_[k] * raw_value(k, q, 1); }
double ShellBasis::d2(int k, double q) const { return scale_[k] * raw_value(k, q, 2); }

double ShellBasis::eval(const VectorX& coeffs, double q) const {
  double v = 0.0;
  for (int k = 0; k < n_; ++k) v += coeffs[k] * value(k, q);
  return v;
}
double ShellBasis::eval_d1(const VectorX& coeffs, double q) const {
  double v = 0.0;
  for (int k = 0; k < n_; ++k) v += coeffs[k] * d1(k, q);
  return v;
}
double ShellBasis::eval_d2(const VectorX& coeffs, double q) const {
  double v = 0.0;
  for (int k = 0; k < n_; ++k) v += coeffs[k] * d2(k, q);
  return v;
}

VectorX ShellBasis::project(const ShellField& f) const {
  VectorX rhs = VectorX::Zero(n_);
  for (std::size_t i = 0; i < quad_.points.size(); ++i) {
    const double q = quad_.points[i], w = quad_.weights[i];
    const double fv = f.value(q);
    for (int k = 0; k < n_; ++k) rhs[k] += w * fv * value(k, q);
  }
  return mass_.ldlt().solve(rhs);
}

double koiter_energy(const KoiterMaterial& mat, const ShellCurve& curve, const ShellField& eta,
                     const ShellField& zeta, const Interval1dQuadrature& quad) {
  mat.validate();
  const double C = mat.elasticity_scalar();
  const double es = mat.thickness_half;
  double acc = 0.0;
  for (std::size_t i = 0; i < quad.points.size(); ++i) {
    const double q = quad.points[i], w = quad.weights[i];
    const double h = curve.second_form(q);
    const double k = curve.k_contraction(q);
    const double se = -h * eta.value(q), sz = -h * zeta.value(q);
    const double xe = eta.d2(q) - k * eta.value(q);
    const double xz = zeta.d2(q) - k * zeta.value(q);
    acc += w * (es * C * se * sz + (es * es * es / 3.0) * C * xe * xz);
  }
  return 0.5 * acc;
}

MatrixX koiter_stiffness_2k(const KoiterMaterial& mat, const ShellCurve& curve,
                            const ShellBasis& basis) {
  const int n = basis.n_modes();
  MatrixX S(n, n);
  for (int j = 0; j < n; ++j)
    for (int k = j; k < n; ++k) {
      VectorX ej = VectorX::Zero(n), ek = VectorX::Zero(n);
      ej[j] = 1.0;
      ek[k] = 1.0;
      const double K = koiter_energy(mat, curve, BasisShellField(basis, ek),
                                     BasisShellField(basis, ej), basis.quadrature());
      S(j, k) = 2.0 * K;
      S(k, j) = S(j, k);
    }
  return S;
}

VectorX koiter_gradient_dual(const MatrixX& stiffness_2k, const VectorX& eta_coeffs) {
  return stiffness_2k * eta_coeffs;
}

VectorX koiter_gradient_l2(const ShellBasis& basis, const MatrixX& stiffness_2k,
                           const VectorX& eta_coeffs) {
  return basis.mass().ldlt().solve(stiffness_2k * eta_coeffs);
}

}  // namespace kfsi
