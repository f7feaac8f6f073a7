#include <doctest.h>

#include <cmath>

#include "kfsi/oracle.hpp"

using namespace kfsi;

TEST_CASE("fd_jacobian reproduces the identity map") {
  auto id = [](const Vec2& x) { return x; };
  Mat2 J = oracle::fd_jacobian(id, Vec2(0.3, -0.7), 1e-6);
  CHECK((J - Mat2::Identity()).norm() < 1e-10);
}

TEST_CASE("fd_jacobian is exact on a linear map") {
  Mat2 A;
  A << 2.0, -1.0, 0.5, 3.0;
  auto lin = [&](const Vec2& x) { return Vec2(A * x); };
  Mat2 J = oracle::fd_jacobian(lin, Vec2(1.0, 2.0), 1e-6);
  CHECK((J - A).norm() < 1e-9);
}

TEST_CASE("quad_integral: constant over the unit square") {
  double v = oracle::quad_integral([](double, double) { return 1.0; }, 0, 1, 0, 1, 4);
  CHECK(v == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("quad_integral: x^2 y^2 integrates to 1/9") {
  double v = oracle::quad_integral([](double x, double y) { return x * x * y * y; }, 0, 1, 0, 1, 4);
  CHECK(std::abs(v - 1.0 / 9.0) < 1e-15);
}

TEST_CASE("fd_energy_gradient: quadratic energy, zero point") {
  auto energy = [](const VectorX& e) { return 0.5 * e.squaredNorm(); };
  VectorX eta = VectorX::Zero(3), zeta = VectorX::Ones(3);
  CHECK(std::abs(oracle::fd_energy_gradient(energy, eta, zeta)) < 1e-12);
}

TEST_CASE("fd_energy_gradient: second-order step scaling on a smooth quartic") {
  auto energy = [](const VectorX& e) { return std::pow(e.sum(), 4); };
  VectorX eta = VectorX::Ones(2), zeta(2);
  zeta << 1.0, -0.3;
  const double exact = 4.0 * std::pow(eta.sum(), 3) * zeta.sum();
  const double d1 = std::abs(oracle::fd_energy_gradient(energy, eta, zeta, 1e-2) - exact);
  const double d2 = std::abs(oracle::fd_energy_gradient(energy, eta, zeta, 5e-3) - exact);
  CHECK(d2 < d1 / 3.2);  // ~4x per halving
  CHECK(d2 < 1e-4);
}

TEST_CASE("oscillator_reference closed form") {
  oracle::OscillatorReference osc{2.0, 8.0, 0.7, 0.0};
  const double om = osc.omega();
  CHECK(om == doctest::Approx(2.0));
  SUBCASE("eta1 = 0 gives a pure cosine") {
    for (double t : {0.0, 0.3, 1.1}) {
      CHECK(osc.displacement(t) == doctest::Approx(0.7 * std::cos(om * t)));
    }
  }
  SUBCASE("energy of the exact solution is constant") {
    for (double t : {0.0, 0.5, 2.0}) {
      const double e = 0.5 * osc.mass * std::pow(osc.velocity(t), 2) +
                       0.5 * osc.stiffness * std::pow(osc.displacement(t), 2);
      CHECK(e == doctest::Approx(osc.energy()).epsilon(1e-13));
    }
  }
  SUBCASE("quarter-period zero crossing by root bracketing") {
    const double target = M_PI / (2.0 * om);
    double lo = 0.9 * target, hi = 1.1 * target;
    REQUIRE(osc.displacement(lo) * osc.displacement(hi) < 0.0);
    for (int it = 0; it < 80; ++it) {
      const double mid = 0.5 * (lo + hi);
      if (osc.displacement(lo) * osc.displacement(mid) <= 0.0)
        hi = mid;
      else
        lo = mid;
    }
    CHECK(0.5 * (lo + hi) == doctest::Approx(target).epsilon(1e-10));
  }
}

TEST_CASE("moving_domain_integral: area of the undeformed channel") {
  const double area = oracle::moving_domain_integral(
      [](double, double) { return 1.0; }, 2.0, 1.0, 0.8, [](double) { return 0.0; }, 6, 4);
  CHECK(area == doctest::Approx(2.0).epsilon(1e-12));
}
