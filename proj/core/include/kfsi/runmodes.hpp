#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "kfsi/assembly.hpp"
#include "kfsi/checkpoint.hpp"
#include "kfsi/config.hpp"
#include "kfsi/mesh.hpp"

namespace kfsi {

/// One refinement level of the manufactured Stokes study on the fixed domain.
struct StokesErrorSample {
  int nx, ny;
  double velocity_l2_error;
};

/// Pure-Dirichlet Stokes with a manufactured divergence-free solution;
/// returns velocity L^2 errors for a sequence of uniform refinements.
std::vector<StokesErrorSample> stokes_convergence_study(int levels, int nx0 = 8, int ny0 = 4,
                                                        double L = 2.0, double H = 1.0);

/// log2 ratio of successive errors (empirical order), smallest over the run.
double min_observed_order(const std::vector<StokesErrorSample>& samples);

/// Net boundary flux of a velocity DOF vector over the whole boundary.
double boundary_flux(const MixedSpace& space, const VectorX& u, int order = 6);

// Exit codes of the run orchestration (mirrored by the CLI).
inline constexpr int kExitOk = 0;
inline constexpr int kExitConfigError = 2;
inline constexpr int kExitNumericalFailure = 3;
inline constexpr int kExitInvariantViolation = 4;

struct CheckLine {
  std::string name;
  bool passed = false;
  double value = 0.0;
  double threshold = 0.0;
};

struct RunReport {
  int exit_code = kExitOk;
  std::string message;
  std::vector<CheckLine> checks;
};

std::shared_ptr<CoupledWorkspace> build_workspace(const RunConfig& cfg);

/// Geometry / shell / extension invariant battery (randomized fields seeded
/// deterministically); one pass/fail line per invariant.
RunReport run_identity_suite(const RunConfig& cfg, const std::string& outdir, std::uint64_t seed);

RunReport run_decoupled(const RunConfig& cfg, const std::string& outdir);
RunReport run_coupled(const RunConfig& cfg, const std::string& outdir,
                      const std::string& restart_checkpoint = "");
RunReport run_continuation(const RunConfig& cfg, const std::string& outdir);
RunReport run_verify(const RunConfig& cfg, const std::string& checkpoint_path,
                     const std::string& outdir);

/// Full-state checkpoint of one time slice of a coupled/decoupled solution.
Checkpoint make_checkpoint(const CoupledWorkspace& ws, const DecoupledResult& sol,
                           std::size_t step, double eps, int picard_iter);

void write_summary(const std::string& outdir, const RunConfig& cfg, const RunReport& report,
                   const std::vector<std::pair<std::string, std::string>>& extra);

}  // namespace kfsi
