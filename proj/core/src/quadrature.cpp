#include "kfsi/quadrature.hpp"

#include <cmath>
#include <map>

namespace kfsi {

namespace {

// Newton iteration on P_n with the Chebyshev initial guess.
GaussRule compute_rule(int n) {
  GaussRule rule;
  rule.nodes.resize(n);
  rule.weights.resize(n);
  for (int i = 0; i < n; ++i) {
    double x = std::cos(M_PI * (i + 0.75) / (n + 0.5));
    double p0 = 0.0, p1 = 0.0;
    for (int it = 0; it < 100; ++it) {
      p0 = 1.0;
      p1 = x;
      for (int k = 2; k <= n; ++k) {
        double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      double dp = n * (x * p1 - p0) / (x * x - 1.0);
      double dx = p1 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-15) break;
    }
    p0 = 1.0;
    p1 = x;
    for (int k = 2; k <= n; ++k) {
      double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
      p0 = p1;
      p1 = p2;
    }
    double dp = n * (x * p1 - p0) / (x * x - 1.0);
    rule.nodes[n - 1 - i] = x;
    rule.weights[n - 1 - i] = 2.0 / ((1.0 - x * x) * dp * dp);
  }
  return rule;
}

}  // namespace

const GaussRule& gauss_rule(int n) {
  if (n < 1) throw ConfigError("gauss_rule: need at least one point");
  static std::map<int, GaussRule> cache;
  auto it = cache.find(n);
  if (it == cache.end()) it = cache.emplace(n, compute_rule(n)).first;
  return it->second;
}

Interval1dQuadrature gauss_on_interval(double a, double b, int n) {
  const GaussRule& g = gauss_rule(n);
  Interval1dQuadrature q;
  q.points.resize(n);
  q.weights.resize(n);
  const double mid = 0.5 * (a + b), half = 0.5 * (b - a);
  for (int i = 0; i < n; ++i) {
    q.points[i] = mid + half * g.nodes[i];
    q.weights[i] = half * g.weights[i];
  }
  return q;
}

Interval1dQuadrature composite_gauss(double a, double b, int nsub, int n) {
  Interval1dQuadrature q;
  const double h = (b - a) / nsub;
  for (int s = 0; s < nsub; ++s) {
    auto part = gauss_on_interval(a + s * h, a + (s + 1) * h, n);
    q.points.insert(q.points.end(), part.points.begin(), part.points.end());
    q.weights.insert(q.weights.end(), part.weights.begin(), part.weights.end());
  }
  return q;
}

}  // namespace kfsi
