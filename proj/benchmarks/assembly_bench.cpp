#include <benchmark/benchmark.h>

#include <memory>

#include "kfsi/assembly.hpp"
#include "kfsi/coupled.hpp"
#include "kfsi/extension.hpp"
#include "kfsi/mollifier.hpp"

using namespace kfsi;

namespace {

Geometry channel() { return make_channel_geometry(2.0, 1.0, 0.8, 0.125); }

BasisShellField smooth_eta(const ShellBasis& basis, double amp) {
  VectorX c = VectorX::Zero(basis.n_modes());
  c[0] = amp;
  if (basis.n_modes() > 2) c[2] = -0.4 * amp;
  return BasisShellField(basis, c);
}

}  // namespace

static void BM_HanzawaJacobian(benchmark::State& state) {
  Geometry geom = channel();
  ShellBasis basis(ShellBasisKind::ClampedBeam, 6, 2.0);
  BasisShellField eta = smooth_eta(basis, 0.1);
  Vec2 x(0.7, 0.9);
  for (auto _ : state) {
    benchmark::DoNotOptimize(geom.hanzawa_jacobian(eta, x));
    x[0] = 0.1 + std::fmod(x[0] + 0.37, 1.8);
  }
}
BENCHMARK(BM_HanzawaJacobian);

static void BM_MovingFormsAssembly(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  MixedSpace space{ReferenceMesh(n, n, 2.0, 1.0)};
  Geometry geom = channel();
  ShellBasis basis(ShellBasisKind::ClampedBeam, 5, 2.0);
  BasisShellField eta = smooth_eta(basis, 0.1);
  for (auto _ : state) {
    benchmark::DoNotOptimize(assemble_moving_forms(space, geom, eta, nullptr, nullptr, 4));
  }
  state.SetComplexityN(n * n);
}
BENCHMARK(BM_MovingFormsAssembly)->Arg(4)->Arg(8)->Arg(16)->Complexity();

static void BM_StokesLift(benchmark::State& state) {
  MixedSpace space{ReferenceMesh(8, 8, 2.0, 1.0)};
  Geometry geom = channel();
  ShellBasis basis(ShellBasisKind::ClampedBeam, 4, 2.0);
  auto eta = std::make_shared<ZeroShellField>();
  for (auto _ : state) {
    ShellExtensionOperator ext(space, geom, basis, eta, 4);
    benchmark::DoNotOptimize(ext.mode(0).interface_flux());
  }
}
BENCHMARK(BM_StokesLift);

static void BM_MollifierSlice(benchmark::State& state) {
  ShellBasis basis(ShellBasisKind::ClampedBeam, 5, 2.0);
  auto traj = std::make_shared<ShellTrajectory>(
      ShellTrajectory::constant(basis, VectorX::Constant(5, 0.02), 1.0, 16));
  DisplacementMollifier moll(traj, 0.01);
  double q = 0.0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(moll.value(0.5, q));
    q = std::fmod(q + 0.17, 2.0);
  }
}
BENCHMARK(BM_MollifierSlice);

static void BM_CoupledStep(benchmark::State& state) {
  MixedSpace space{ReferenceMesh(8, 8, 2.0, 1.0)};
  Geometry geom = channel();
  PhysicalConstants pc;
  auto basis = std::make_shared<ShellBasis>(ShellBasisKind::ClampedBeam, 4, 2.0);
  CoupledWorkspace ws(space, geom, pc, basis, 6, 4);
  InitialData d;
  d.eta0 = VectorX::Zero(4);
  d.eta1 = VectorX::Unit(4, 0) * 0.05;
  d.u0_interior = VectorX::Zero(6);
  SolverParams params;
  TimeGrid grid{0.02, 2};
  auto delta = std::make_shared<ShellTrajectory>(
      ShellTrajectory::constant(*basis, d.eta0, grid.T(), grid.steps + 1));
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        solve_decoupled(ws, grid, params, ForcingSpec::zero(), d, delta, VelocityGrid(), 0.004));
  }
}
BENCHMARK(BM_CoupledStep);

BENCHMARK_MAIN();
