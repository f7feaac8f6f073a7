#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <random>

#include "kfsi/oracle.hpp"
#include "kfsi/shell.hpp"

using namespace kfsi;

namespace {
constexpr double kLen = 2.0;

KoiterMaterial unit_material() { return KoiterMaterial{1.0, 1.0, 1.0, 1.0}; }
}  // namespace

TEST_CASE("clamped bases satisfy the boundary conditions") {
  for (ShellBasisKind kind : {ShellBasisKind::ClampedBeam, ShellBasisKind::ClampedBspline}) {
    ShellBasis basis(kind, 12, kLen);
    for (int k = 0; k < basis.n_modes(); ++k) {
      CHECK(std::abs(basis.value(k, 0.0)) < 1e-12);
      CHECK(std::abs(basis.value(k, kLen)) < 1e-12);
      CHECK(std::abs(basis.d1(k, 0.0)) < 1e-12);
      CHECK(std::abs(basis.d1(k, kLen)) < 1e-12);
    }
  }
}

TEST_CASE("unsupported basis kind") {
  CHECK_THROWS_AS(parse_shell_basis_kind("hermite"), ConfigError);
  CHECK(parse_shell_basis_kind("clamped-beam-eigenfunctions") == ShellBasisKind::ClampedBeam);
  CHECK(parse_shell_basis_kind("cubic-bsplines-clamped") == ShellBasisKind::ClampedBspline);
}

TEST_CASE("mass matrix is SPD for 12 modes") {
  for (ShellBasisKind kind : {ShellBasisKind::ClampedBeam, ShellBasisKind::ClampedBspline}) {
    ShellBasis basis(kind, 12, kLen);
    Eigen::SelfAdjointEigenSolver<MatrixX> es(basis.mass());
    CHECK(es.eigenvalues().minCoeff() > 0.0);
  }
}

TEST_CASE("Koiter stiffness is SPD and has finite condition number up to 32 modes") {
  const KoiterMaterial mat = unit_material();
  FlatTopEdge curve(kLen, 1.0);
  ShellBasis basis(ShellBasisKind::ClampedBeam, 32, kLen);
  const MatrixX S = koiter_stiffness_2k(mat, curve, basis);
  CHECK((S - S.transpose()).norm() < 1e-10 * S.norm());
  Eigen::SelfAdjointEigenSolver<MatrixX> es(S);
  const double lmin = es.eigenvalues().minCoeff(), lmax = es.eigenvalues().maxCoeff();
  CHECK(lmin > 0.0);
  const double cond = lmax / lmin;
  CHECK(std::isfinite(cond));
  // recorded baseline: beam modes nearly diagonalize the flat stiffness
  CHECK(cond < 1e7);
}

TEST_CASE("K(0, zeta) = 0 and symmetry of K") {
  const KoiterMaterial mat = unit_material();
  FlatTopEdge curve(kLen, 1.0);
  ShellBasis basis(ShellBasisKind::ClampedBeam, 8, kLen);
  std::mt19937_64 rng(5);
  std::normal_distribution<double> dist;
  for (int rep = 0; rep < 20; ++rep) {
    VectorX a(8), b(8);
    for (int i = 0; i < 8; ++i) {
      a[i] = dist(rng);
      b[i] = dist(rng);
    }
    BasisShellField eta(basis, a), zeta(basis, b);
    ZeroShellField zero;
    CHECK(std::abs(koiter_energy(mat, curve, zero, zeta, basis.quadrature())) < 1e-16);
    const double kab = koiter_energy(mat, curve, eta, zeta, basis.quadrature());
    const double kba = koiter_energy(mat, curve, zeta, eta, basis.quadrature());
    CHECK(std::abs(kab - kba) <= 1e-14 * std::max(1.0, std::abs(kab)));
  }
}

TEST_CASE("flat-case energy of the sin^2 bump against the independent oracle") {
  // h = k = 0, lambda = mu = eps_s = 1: K = (1/6) C int (eta'')^2,
  // C = 4*1*1/3 + 4 = 16/3; eta = sin^2(pi q / L) gives int (eta'')^2 = 2 pi^4 / L^3,
  // hence K = (16/9) pi^4 / L^3 (= 2 pi^4 / 9 at L = 2).
  const KoiterMaterial mat = unit_material();
  FlatTopEdge curve(kLen, 1.0);
  ShellBasis basis(ShellBasisKind::ClampedBeam, 8, kLen);
  auto eta_v = [](double q) { return std::pow(std::sin(M_PI * q / kLen), 2); };
  auto eta_d1 = [](double q) {
    return M_PI / kLen * std::sin(2.0 * M_PI * q / kLen);
  };
  auto eta_d2 = [](double q) {
    return 2.0 * std::pow(M_PI / kLen, 2) * std::cos(2.0 * M_PI * q / kLen);
  };
  AnalyticShellField eta(eta_v, eta_d1, eta_d2);
  const double K = koiter_energy(mat, curve, eta, eta, basis.quadrature());

  const double C = mat.elasticity_scalar();
  const double oracle_val = 0.5 * (1.0 / 3.0) * C *
                            oracle::quad_integral_1d(
                                [&](double q) { return eta_d2(q) * eta_d2(q); }, 0.0, kLen, 10, 8);
  CHECK(std::abs(K - oracle_val) < 1e-10);
  CHECK(K == doctest::Approx(2.0 * std::pow(M_PI, 4) / 9.0).epsilon(1e-12));
}

TEST_CASE("curved-case energy feeds the membrane strain") {
  // constant curvature: sigma(eta) = -W eta contributes through eps_s C h^2
  const KoiterMaterial mat = unit_material();
  CircleArc curve(Vec2(0, 0), 2.0, 0.0, kLen, true);
  ShellBasis basis(ShellBasisKind::ClampedBeam, 6, kLen);
  VectorX c = VectorX::Zero(6);
  c[0] = 0.4;
  BasisShellField eta(basis, c);
  const double K_curved = koiter_energy(mat, curve, eta, eta, basis.quadrature());
  FlatTopEdge flat(kLen, 1.0);
  const double K_flat = koiter_energy(mat, flat, eta, eta, basis.quadrature());
  CHECK(K_curved > K_flat);  // membrane part is strictly positive for W != 0
}

TEST_CASE("gradient representer: two code paths agree to 1e-12") {
  const KoiterMaterial mat = unit_material();
  FlatTopEdge curve(kLen, 1.0);
  ShellBasis basis(ShellBasisKind::ClampedBeam, 8, kLen);
  const MatrixX S = koiter_stiffness_2k(mat, curve, basis);
  std::mt19937_64 rng(9);
  std::normal_distribution<double> dist;
  for (int rep = 0; rep < 50; ++rep) {
    VectorX a(8), b(8);
    for (int i = 0; i < 8; ++i) {
      a[i] = dist(rng);
      b[i] = dist(rng);
    }
    const double lhs = 2.0 * koiter_energy(mat, curve, BasisShellField(basis, a),
                                           BasisShellField(basis, b), basis.quadrature());
    const double rhs = koiter_gradient_dual(S, a).dot(b);
    CHECK(std::abs(lhs - rhs) <= 1e-12 * std::max(1.0, std::abs(lhs)));
    // the L^2 representer integrates to the same pairing
    const VectorX g = koiter_gradient_l2(basis, S, a);
    const double rhs2 = (basis.mass() * g).dot(b);
    CHECK(std::abs(lhs - rhs2) <= 1e-11 * std::max(1.0, std::abs(lhs)));
  }
  SUBCASE("zero displacement gives the zero gradient") {
    CHECK(koiter_gradient_dual(S, VectorX::Zero(8)).norm() == 0.0);
  }
}

TEST_CASE("gradient against the finite-difference oracle") {
  const KoiterMaterial mat = unit_material();
  FlatTopEdge curve(kLen, 1.0);
  ShellBasis basis(ShellBasisKind::ClampedBeam, 8, kLen);
  const MatrixX S = koiter_stiffness_2k(mat, curve, basis);
  auto energy = [&](const VectorX& e) {
    BasisShellField f(basis, e);
    return koiter_energy(mat, curve, f, f, basis.quadrature());
  };
  std::mt19937_64 rng(13);
  std::normal_distribution<double> dist;
  VectorX a(8), b(8);
  for (int i = 0; i < 8; ++i) {
    a[i] = dist(rng);
    b[i] = dist(rng);
  }
  // d/dt K(eta + t zeta)|_0 = 2 K(eta, zeta) = <grad, zeta>
  const double fd = oracle::fd_energy_gradient(energy, a, b, 1e-5);
  const double an = koiter_gradient_dual(S, a).dot(b);
  CHECK(std::abs(fd - an) <= 1e-6 * std::max(1.0, std::abs(an)));
  SUBCASE("at eta = 0 the FD of the quadratic is zero to rounding") {
    const double fd0 = oracle::fd_energy_gradient(energy, VectorX::Zero(8), b, 1e-5);
    CHECK(std::abs(fd0) < 1e-10);
  }
}

TEST_CASE("coercivity surrogate on the flat edge") {
  // K(eta,eta) = (eps_s^3/6) C ||eta''||^2: the constant is recorded per material
  const KoiterMaterial mat = unit_material();
  FlatTopEdge curve(kLen, 1.0);
  ShellBasis basis(ShellBasisKind::ClampedBeam, 8, kLen);
  std::mt19937_64 rng(17);
  std::normal_distribution<double> dist;
  const double c_expected = mat.elasticity_scalar() / 6.0;
  for (int rep = 0; rep < 10; ++rep) {
    VectorX a(8);
    for (int i = 0; i < 8; ++i) a[i] = dist(rng);
    BasisShellField eta(basis, a);
    const double K = koiter_energy(mat, curve, eta, eta, basis.quadrature());
    double d2n = 0.0;
    const auto& quad = basis.quadrature();
    for (std::size_t i = 0; i < quad.points.size(); ++i)
      d2n += quad.weights[i] * std::pow(eta.d2(quad.points[i]), 2);
    CHECK(K >= 0.999 * c_expected * d2n);
    CHECK(K <= 1.001 * c_expected * d2n);
  }
}

TEST_CASE("material validation") {
  KoiterMaterial bad = unit_material();
  bad.lame_mu = 0.0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("projection reproduces basis combinations") {
  ShellBasis basis(ShellBasisKind::ClampedBeam, 6, kLen);
  VectorX c(6);
  c << 0.3, -0.1, 0.05, 0.2, 0.0, -0.07;
  BasisShellField f(basis, c);
  const VectorX p = basis.project(f);
  CHECK((p - c).norm() < 1e-10);
}
