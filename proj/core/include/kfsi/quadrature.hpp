#pragma once

#include <vector>

#include "kfsi/types.hpp"

namespace kfsi {

/// Gauss-Legendre nodes and weights on [-1, 1].
struct GaussRule {
  std::vector<double> nodes;
  std::vector<double> weights;
};

/// n-point Gauss-Legendre rule, exact for polynomials of degree 2n-1.
const GaussRule& gauss_rule(int n);

/// Nodes/weights mapped to [a, b].
struct Interval1dQuadrature {
  std::vector<double> points;
  std::vector<double> weights;
};

Interval1dQuadrature gauss_on_interval(double a, double b, int n);

/// Composite rule: nsub equal subintervals of [a, b], n Gauss points each.
Interval1dQuadrature composite_gauss(double a, double b, int nsub, int n);

}  // namespace kfsi
