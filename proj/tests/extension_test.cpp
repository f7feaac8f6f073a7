#include <doctest.h>

#include <cmath>
#include <memory>
#include <random>

#include "kfsi/extension.hpp"
#include "kfsi/oracle.hpp"

using namespace kfsi;

namespace {

Geometry default_channel() { return make_channel_geometry(2.0, 1.0, 0.8, 0.125); }

std::shared_ptr<BasisShellField> random_field(const ShellBasis& basis, double target_sup,
                                              unsigned seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> dist;
  VectorX c(basis.n_modes());
  for (int k = 0; k < basis.n_modes(); ++k) c[k] = dist(rng);
  BasisShellField raw(basis, c);
  const double sup = raw.sup_norm(0.0, basis.length(), 1024);
  return std::make_shared<BasisShellField>(basis, c * (target_sup / sup));
}

}  // namespace

TEST_CASE("flat edge: the tube field is constant along fibers for any eta") {
  Geometry geom = default_channel();
  ShellBasis basis(ShellBasisKind::ClampedBeam, 6, 2.0);
  auto eta = random_field(basis, 0.2, 3);
  auto b = random_field(basis, 1.0, 5);
  for (double q : {0.3, 1.0, 1.7})
    for (double s : {-0.7, -0.3, 0.0, 0.1}) {
      const Vec2 x(q, 1.0 + s);
      const Vec2 v = tube_extension_value(geom, *eta, *b, x);
      CHECK((v - b->value(q) * Vec2(0.0, 1.0)).norm() == 0.0);  // factor is exactly 1
    }
  SUBCASE("b == 0 gives the zero field") {
    ZeroShellField zb;
    CHECK(tube_extension_value(geom, *eta, zb, Vec2(0.5, 0.9)).norm() == 0.0);
  }
}

TEST_CASE("constant-curvature exponential factor matches the closed form") {
  const double R = 2.0, kappa_c = 1.0 / R;
  Geometry arc = make_arc_geometry(Vec2(0, 0), R, 0.1, 1.5, /*nu_inward=*/true, 0.5, 0.2);
  ShellBasis basis(ShellBasisKind::ClampedBeam, 5, 1.5);
  auto eta = random_field(basis, 0.15, 7);
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> uq(0.05, 1.45), us(-0.45, 0.45);
  for (int i = 0; i < 100; ++i) {
    const double q = uq(rng), s = us(rng);
    const double factor = tube_exp_factor(arc, *eta, q, s);
    const double ev = eta->value(q);
    const double closed = (1.0 - kappa_c * ev) / (1.0 - kappa_c * s);
    CHECK(std::abs(factor - closed) < 1e-10);
  }
}

TEST_CASE("tube jacobian agrees with finite differences and is trace free") {
  const double R = 2.0;
  Geometry arc = make_arc_geometry(Vec2(0, 0), R, 0.1, 1.5, true, 0.5, 0.2);
  ShellBasis basis(ShellBasisKind::ClampedBeam, 5, 1.5);
  auto eta = random_field(basis, 0.15, 13);
  auto b = random_field(basis, 1.0, 17);
  std::mt19937_64 rng(19);
  std::uniform_real_distribution<double> uq(0.1, 1.4), us(-0.4, 0.4);
  for (int i = 0; i < 40; ++i) {
    const double q = uq(rng), s = us(rng);
    const Vec2 x = arc.curve().point(q) + s * arc.curve().normal(q);
    const Mat2 J = tube_extension_jacobian(arc, *eta, *b, x);
    const Mat2 fd = oracle::fd_jacobian(
        [&](const Vec2& y) { return tube_extension_value(arc, *eta, *b, y); }, x, 1e-6);
    CHECK((J - fd).norm() < 1e-6);
    CHECK(std::abs(J.trace()) < 1e-12);  // pointwise divergence-free
  }
}

TEST_CASE("stokes lift and the composite extension") {
  Geometry geom = default_channel();
  MixedSpace space{ReferenceMesh(8, 8, 2.0, 1.0)};
  ShellBasis basis(ShellBasisKind::ClampedBeam, 4, 2.0);
  auto eta = random_field(basis, 0.1, 23);
  ShellExtensionOperator ext(space, geom, basis, eta, 4);

  SUBCASE("compensated boundary flux vanishes") {
    for (int k = 0; k < ext.n_modes(); ++k)
      CHECK(std::abs(ext.mode(k).compensated_boundary_flux()) < 1e-12);
  }

  SUBCASE("flat geometry: interface flux equals the shell integral of b") {
    for (int k = 0; k < ext.n_modes(); ++k) {
      const double ib = oracle::quad_integral_1d([&](double q) { return basis.value(k, q); }, 0.0,
                                                 2.0, 10, 8);
      CHECK(std::abs(std::abs(ext.mode(k).interface_flux()) - std::abs(ib)) < 1e-10);
    }
  }

  SUBCASE("zero-flux tube field needs no compensation") {
    // odd-symmetric b integrates to zero across the shell
    VectorX c = VectorX::Zero(4);
    c[1] = 1.0;  // second beam mode is antisymmetric about the midpoint
    auto b = std::make_shared<BasisShellField>(basis, c);
    ExtendedShellVelocity f = ext.lift_field(b);
    CHECK(std::abs(f.interface_flux()) < 1e-10);
    // boundary data on the compensation patch is flux * mu: vanishes with the flux
    CHECK(std::abs(f.value(Vec2(1.0, 0.0))[1]) < 1e-10);
  }

  SUBCASE("trace identity at shell quadrature nodes") {
    for (int k = 0; k < ext.n_modes(); ++k) {
      const auto& quad = basis.quadrature();
      double worst = 0.0;
      for (std::size_t i = 0; i < quad.points.size(); ++i) {
        const double q = quad.points[i];
        const Vec2 y(q, 1.0 + eta->value(q));  // Phi_eta(q)
        const Vec2 tr = ext.mode(k).value(y);
        worst = std::max(worst, (tr - basis.value(k, q) * Vec2(0.0, 1.0)).norm());
      }
      CHECK(worst < 1e-10);
    }
  }

  SUBCASE("zero trace on the lateral tube boundary") {
    for (int k = 0; k < ext.n_modes(); ++k) {
      for (double y : {0.9, 0.95, 1.0}) {
        CHECK(ext.mode(k).value(Vec2(0.0, y)).norm() < 1e-10);
        CHECK(ext.mode(k).value(Vec2(2.0, y)).norm() < 1e-10);
      }
    }
  }

  SUBCASE("global discrete divergence residual") {
    for (int k = 0; k < ext.n_modes(); ++k) {
      const auto& mode = ext.mode(k);
      const double r = divergence_residual_field(
          space, [&](const Vec2& x) { return mode.jacobian(x); }, 4);
      CHECK(r < 1e-10);
    }
  }

  SUBCASE("linearity is exact") {
    VectorX c1 = VectorX::Zero(4), c2 = VectorX::Zero(4);
    c1[0] = 1.0;
    c2[2] = 1.0;
    auto combo = std::make_shared<BasisShellField>(basis, (c1 + 2.0 * c2).eval());
    ExtendedShellVelocity fc = ext.lift_field(combo);
    std::mt19937_64 rng(29);
    std::uniform_real_distribution<double> ux(0.0, 2.0), uy(0.0, 1.0);
    for (int i = 0; i < 50; ++i) {
      const Vec2 x(ux(rng), uy(rng));
      const Vec2 lin = ext.mode(0).value(x) + 2.0 * ext.mode(2).value(x);
      CHECK((fc.value(x) - lin).norm() < 1e-12);
    }
  }
}

TEST_CASE("extension continuity constant stays bounded (recorded regression)") {
  Geometry geom = default_channel();
  MixedSpace space{ReferenceMesh(8, 8, 2.0, 1.0)};
  ShellBasis basis(ShellBasisKind::ClampedBeam, 5, 2.0);
  double worst = 0.0;
  for (unsigned rep = 0; rep < 20; ++rep) {
    auto eta = random_field(basis, 0.05 + 0.005 * rep, 100 + rep);
    auto b = random_field(basis, 1.0, 200 + rep);
    ShellExtensionOperator ext(space, geom, basis, eta, 4);
    ExtendedShellVelocity f = ext.lift_field(b);
    // H1 norm over the channel by quadrature
    const double h1 = std::sqrt(oracle::quad_integral(
        [&](double x, double y) {
          const Vec2 v = f.value(Vec2(x, y));
          const Mat2 J = f.jacobian(Vec2(x, y));
          return v.squaredNorm() + J.squaredNorm();
        },
        0.0, 2.0, 0.0, 1.0, 5, 6));
    // H2 norm of b on the shell
    const double h2 = std::sqrt(oracle::quad_integral_1d(
        [&](double q) {
          return std::pow(b->value(q), 2) + std::pow(b->d1(q), 2) + std::pow(b->d2(q), 2);
        },
        0.0, 2.0, 8, 8));
    worst = std::max(worst, h1 / h2);
  }
  CHECK(worst > 0.0);
  CHECK(worst < 5.0);  // recorded regression bound for the default channel
}

TEST_CASE("time-dependent extension") {
  const double R = 2.0;
  Geometry arc = make_arc_geometry(Vec2(0, 0), R, 0.1, 1.5, true, 0.5, 0.2);
  ShellBasis basis(ShellBasisKind::ClampedBeam, 5, 1.5);
  auto eta0 = random_field(basis, 0.12, 31);
  auto etadot = random_field(basis, 0.05, 37);
  auto b0 = random_field(basis, 1.0, 41);
  auto bdot = random_field(basis, 0.5, 43);

  SUBCASE("time-constant data has zero rate") {
    ZeroShellField zero;
    const Vec2 r =
        tube_extension_dt(arc, *eta0, *b0, zero, zero, arc.curve().point(0.7) + 0.2 * arc.curve().normal(0.7));
    CHECK(r.norm() == 0.0);
  }

  SUBCASE("flat edge: rate reduces to (dt b) nu exactly") {
    Geometry flat = default_channel();
    ShellBasis fb(ShellBasisKind::ClampedBeam, 5, 2.0);
    auto fe = random_field(fb, 0.1, 47);
    auto fbd = random_field(fb, 0.4, 53);
    const Vec2 x(0.8, 0.93);
    const Vec2 r = tube_extension_dt(flat, *fe, *fbd, *fbd, *fe, x);
    CHECK((r - fbd->value(0.8) * Vec2(0.0, 1.0)).norm() < 1e-15);
  }

  SUBCASE("centered difference matches the analytic rate on the arc") {
    const double dt = 1e-4;
    std::mt19937_64 rng(59);
    std::uniform_real_distribution<double> uq(0.1, 1.4), us(-0.4, 0.4);
    for (int i = 0; i < 30; ++i) {
      const double q = uq(rng), s = us(rng);
      const Vec2 x = arc.curve().point(q) + s * arc.curve().normal(q);
      auto at = [&](double t) {
        BasisShellField eta_t(basis, eta0->coeffs() + t * etadot->coeffs());
        BasisShellField b_t(basis, b0->coeffs() + t * bdot->coeffs());
        return tube_extension_value(arc, eta_t, b_t, x);
      };
      const Vec2 fd = (at(dt) - at(-dt)) / (2.0 * dt);
      const Vec2 an = tube_extension_dt(arc, *eta0, *b0, *bdot, *etadot, x);
      CHECK((fd - an).norm() < 1e-6);
    }
  }
}
