#pragma once

#include <functional>
#include <memory>
#include <vector>

#include "kfsi/assembly.hpp"
#include "kfsi/extension.hpp"
#include "kfsi/mollifier.hpp"

namespace kfsi {

struct PhysicalConstants {
  double rho = 1.0;    // fluid density
  double sigma = 1.0;  // dynamic viscosity
  KoiterMaterial shell;
};

struct ForcingSpec {
  std::function<Vec2(double, const Vec2&)> f;  // body force density f(t, y)
  std::function<double(double, double)> g;     // shell forcing g(t, q)
  bool is_zero = false;

  static ForcingSpec zero();
};

struct TimeGrid {
  double dt = 0.01;
  int steps = 10;
  double T() const { return dt * steps; }
};

struct SolverParams {
  int quad_order = 5;
  double theta = 0.5;           // implicit-midpoint realization at 1/2
  bool include_fluid = true;    // test-only reduction to the bare shell
  bool noslip_bottom = false;   // optional rigid-bottom boundary condition
  double alpha_cap = 0.125;     // horizon guard on ||eta||_inf
};

struct EnergyLedgerRow {
  double t = 0.0;
  double e_kin_fluid = 0.0;
  double dissipation_cum = 0.0;
  double e_kin_shell = 0.0;
  double e_koiter = 0.0;
  double e_total = 0.0;
  double groenwall_envelope = 0.0;  // squared envelope, comparable to e_total
  double defect = 0.0;              // per-step energy identity defect
};

struct EnergyLedger {
  std::vector<EnergyLedgerRow> rows;
  double e0_data = 0.0;  // energy of the (adapted) data before projection

  double max_defect() const;
  bool dissipation_monotone() const;
  double max_envelope_violation() const;  // max over rows of sqrt(E) - sqrt(env)
};

/// Immutable per-run machinery: mixed space, shell basis, reference coupled
/// pairs (Y_k, F_0 Y_k) and (0, X_k) with values tabulated at the quadrature
/// points, and the shell matrices.
class CoupledWorkspace {
 public:
  CoupledWorkspace(MixedSpace space, Geometry geom, PhysicalConstants constants,
                   std::shared_ptr<ShellBasis> shell_basis, int n_fluid_modes, int quad_order,
                   bool noslip_bottom = false);

  const MixedSpace& space() const { return space_; }
  const Geometry& geometry() const { return geom_; }
  const PhysicalConstants& constants() const { return constants_; }
  const ShellBasis& shell() const { return *shell_; }
  int n_shell_modes() const { return shell_->n_modes(); }
  int n_fluid_modes() const { return n_fluid_; }
  int n_modes() const { return n_shell_modes() + n_fluid_; }
  const QuadratureLayout& layout() const { return layout_; }
  const MatrixX& stiffness_2k() const { return stiffness_2k_; }
  const MatrixX& shell_mass() const { return shell_mass_; }

  /// Reference pair values at quadrature point i (fluid part of mode k).
  const Vec2& ref_value(int k, std::size_t i) const { return val_[k][i]; }
  const Mat2& ref_jacobian(int k, std::size_t i) const { return jac_[k][i]; }
  /// Off-grid evaluation (grid sampling, mollified transport).
  Vec2 ref_value_at(int k, const Vec2& x) const;
  Mat2 ref_jacobian_at(int k, const Vec2& x) const;

  /// Transported pair at a displacement slice: bold W_k in the reference
  /// representation P(x) W_hat_k(x) and the shell part g (det dPsi|_M)^{-1} Y_k.
  Vec2 transported_fluid_value(int k, const ShellField& delta, const Vec2& x) const;
  double transported_shell_value(int k, const ShellField& delta, double q) const;
  /// max_k || tr(bold W_k) - W_k nu ||_inf over the shell quadrature nodes.
  double basis_trace_residual(const ShellField& delta) const;

  const ShellExtensionOperator& lift_operator() const { return *ext0_; }

 private:
  MixedSpace space_;
  Geometry geom_;
  PhysicalConstants constants_;
  std::shared_ptr<ShellBasis> shell_;
  int n_fluid_;
  QuadratureLayout layout_;
  MatrixX stiffness_2k_, shell_mass_;
  std::shared_ptr<ShellExtensionOperator> ext0_;  // F_0 applied to the shell basis
  std::vector<VectorX> interior_;                 // X_k DOF vectors
  std::vector<std::vector<Vec2>> val_;
  std::vector<std::vector<Mat2>> jac_;
};

/// Time samples of a velocity field on a fixed physical grid over the channel
/// and its tube, zero outside; the carrier of the Picard transport iterate.
class VelocityGrid {
 public:
  VelocityGrid() = default;
  VelocityGrid(double L, double ymax, int nx, int ny, double dt, int steps);

  bool empty() const { return data_.empty(); }
  double dt() const { return dt_; }
  int steps() const { return steps_; }

  Vec2 eval(double t, const Vec2& y) const;
  void relax(double omega, const VelocityGrid& target);  // this = (1-w) this + w target
  double l2_space_time_diff(const VelocityGrid& other) const;
  double l2_space_time_norm() const;

  Vec2& at(int step, int i, int j);
  const Vec2& at(int step, int i, int j) const;
  int nx() const { return nx_; }
  int ny() const { return ny_; }
  double hx() const { return L_ / nx_; }
  double hy() const { return ymax_ / ny_; }

 private:
  double L_ = 0.0, ymax_ = 0.0, dt_ = 0.0;
  int nx_ = 0, ny_ = 0, steps_ = 0;
  std::vector<Vec2> data_;  // (steps+1) * (nx+1) * (ny+1)
};

struct InitialData {
  VectorX eta0;         // shell coefficients
  VectorX eta1;         // shell coefficients
  VectorX u0_interior;  // optional coefficients on the interior fluid modes
};

struct AdaptedInitialData {
  VectorX eta1_eps;                              // shell coefficients of eta1^eps
  std::function<Vec2(const Vec2&)> u0_eps_phys;  // physical evaluator
  std::function<Vec2(const Vec2&)> u0_phys;      // unadapted, on Omega_{eta0}
  double u0_norm = 0.0, u0_eps_norm = 0.0;
  double eta1_norm = 0.0, eta1_eps_norm = 0.0;
  double u0_diff = 0.0, eta1_diff = 0.0;  // L2 differences to the unadapted data
  double compatibility_residual = 0.0;    // gamma-weighted normal-trace pairing
  double e0_data = 0.0;                   // energy of the adapted data
};

AdaptedInitialData adapt_initial_data(const CoupledWorkspace& ws, const InitialData& data,
                                      const DisplacementMollifier& delta_eps);

struct DecoupledResult {
  std::vector<double> times;
  std::vector<VectorX> alpha;  // modal coefficients per step
  std::vector<VectorX> eta;    // shell displacement coefficients per step
  EnergyLedger ledger;
  double max_trace_residual = 0.0;
  double max_div_residual = 0.0;
  double max_solve_residual = 0.0;
  double max_eta_sup = 0.0;

  std::shared_ptr<ShellTrajectory> eta_trajectory(const ShellBasis& basis) const;
};

/// Weak solution of the decoupled, regularised and linearised problem:
/// Galerkin time stepping in the coupled basis with geometry R_eps delta and
/// frozen transport R_eps v.
DecoupledResult solve_decoupled(const CoupledWorkspace& ws, const TimeGrid& grid,
                                const SolverParams& params, const ForcingSpec& forcing,
                                const InitialData& data,
                                std::shared_ptr<const ShellTrajectory> delta,
                                const VelocityGrid& v, double eps);

struct PicardParams {
  double tol = 1e-6;
  int max_iters = 25;
  double omega = 0.7;  // under-relaxation
  int horizon_bisections = 3;
};

struct PicardResult {
  DecoupledResult solution;
  std::shared_ptr<ShellTrajectory> delta;  // converged displacement iterate
  VelocityGrid v;                          // converged transport iterate
  std::vector<double> diffs;               // stopping-norm history
  bool converged = false;
  int iterations = 0;
  double horizon = 0.0;  // possibly bisected T
};

/// Fixed-point restoration of the geometry and convection couplings by
/// relaxed Picard iteration around solve_decoupled.
PicardResult picard_couple(const CoupledWorkspace& ws, const TimeGrid& grid,
                           const SolverParams& params, const PicardParams& picard,
                           const ForcingSpec& forcing, const InitialData& data, double eps);

/// Largest eps with R_eps delta(0,.) > eta_0 and the sup-norm caps satisfied.
double determine_eps0(const CoupledWorkspace& ws, const VectorX& eta0, double T, double cap = 0.1);

struct ContinuationLevel {
  double eps = 0.0;
  PicardResult result;
  double diff_eta_prev = 0.0;  // L_inf(I x M) difference to the previous level
  double diff_u_prev = 0.0;    // L2(I x R^2) difference to the previous level
  bool shift_dominates = false;  // R_eps delta(0,.) > eta_0 verified
};

struct ContinuationResult {
  std::vector<ContinuationLevel> levels;
  bool all_converged = false;
};

ContinuationResult epsilon_continuation(const CoupledWorkspace& ws, const TimeGrid& grid,
                                        const SolverParams& params, const PicardParams& picard,
                                        const ForcingSpec& forcing, const InitialData& data,
                                        double eps0, int n_levels);

/// Sample a decoupled solution onto a velocity grid (previous-geometry pullback).
VelocityGrid sample_velocity(const CoupledWorkspace& ws, const DecoupledResult& sol,
                             const DisplacementMollifier& geom_of_sol, double L, double ymax,
                             int nx, int ny);

}  // namespace kfsi
