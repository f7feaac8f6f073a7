#include "kfsi/oracle.hpp"

#include <cmath>
#include <vector>

namespace kfsi::oracle {

namespace {

// Own Gauss-Legendre nodes (Newton on the Legendre recurrence) so the oracle
// shares no tables with the assembly path.
void gauss_nodes(int n, std::vector<double>& x, std::vector<double>& w) {
  x.resize(n);
  w.resize(n);
  for (int i = 0; i < n; ++i) {
    double t = std::cos(M_PI * (4.0 * i + 3.0) / (4.0 * n + 2.0));
    double p1 = 0.0, p2 = 0.0;
    for (int it = 0; it < 100; ++it) {
      p1 = 1.0;
      p2 = 0.0;
      for (int k = 0; k < n; ++k) {
        const double p3 = p2;
        p2 = p1;
        p1 = ((2.0 * k + 1.0) * t * p2 - k * p3) / (k + 1.0);
      }
      const double dp = n * (t * p1 - p2) / (t * t - 1.0);
      const double dt = p1 / dp;
      t -= dt;
      if (std::abs(dt) < 1e-15) break;
    }
    double p = 1.0, pm = 0.0;
    for (int k = 0; k < n; ++k) {
      const double p3 = pm;
      pm = p;
      p = ((2.0 * k + 1.0) * t * pm - k * p3) / (k + 1.0);
    }
    const double dp = n * (t * p - pm) / (t * t - 1.0);
    x[i] = t;
    w[i] = 2.0 / ((1.0 - t * t) * dp * dp);
  }
}

}  // namespace

Mat2 fd_jacobian(const std::function<Vec2(const Vec2&)>& map, const Vec2& x, double h) {
  Mat2 J;
  for (int m = 0; m < 2; ++m) {
    Vec2 xp = x, xm = x;
    xp[m] += h;
    xm[m] -= h;
    const Vec2 d = (map(xp) - map(xm)) / (2.0 * h);
    J.col(m) = d;
  }
  return J;
}

double quad_integral_1d(const std::function<double(double)>& f, double a, double b, int order,
                        int cells) {
  std::vector<double> x, w;
  gauss_nodes(order, x, w);
  const double h = (b - a) / cells;
  double acc = 0.0;
  for (int c = 0; c < cells; ++c) {
    const double mid = a + (c + 0.5) * h;
    for (int i = 0; i < order; ++i) acc += 0.5 * h * w[i] * f(mid + 0.5 * h * x[i]);
  }
  return acc;
}

double quad_integral(const std::function<double(double, double)>& f, double ax, double bx,
                     double ay, double by, int order, int cells) {
  return quad_integral_1d(
      [&](double x) {
        return quad_integral_1d([&](double y) { return f(x, y); }, ay, by, order, cells);
      },
      ax, bx, order, cells);
}

double moving_domain_integral(const std::function<double(double, double)>& f_xy, double L,
                              double H, double kappa, const std::function<double(double)>& eta,
                              int order, int cells) {
  // box below the tube
  double acc = quad_integral(f_xy, 0.0, L, 0.0, H - kappa, order, cells);
  // tube part, fiber by fiber up to the moving boundary (flat edge: x = q, y = H + s)
  acc += quad_integral_1d(
      [&](double q) {
        return quad_integral_1d([&](double s) { return f_xy(q, H + s); }, -kappa, eta(q), order,
                                cells);
      },
      0.0, L, order, cells);
  return acc;
}

double fd_energy_gradient(const std::function<double(const VectorX&)>& energy,
                          const VectorX& eta, const VectorX& zeta, double h) {
  return (energy(eta + h * zeta) - energy(eta - h * zeta)) / (2.0 * h);
}

double OscillatorReference::displacement(double t) const {
  const double om = omega();
  return eta0 * std::cos(om * t) + eta1 / om * std::sin(om * t);
}

double OscillatorReference::velocity(double t) const {
  const double om = omega();
  return -eta0 * om * std::sin(om * t) + eta1 * std::cos(om * t);
}

double OscillatorReference::energy() const {
  return 0.5 * mass * eta1 * eta1 + 0.5 * stiffness * eta0 * eta0;
}

}  // namespace kfsi::oracle
