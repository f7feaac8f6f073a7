#pragma once

#include <string>
#include <vector>

#include "kfsi/coupled.hpp"

namespace kfsi {

/// ledger.csv: t, E_kin_fluid, Dissipation_cum, E_kin_shell, E_koiter,
/// E_total, groenwall_envelope, defect.
void write_ledger_csv(const std::string& path, const EnergyLedger& ledger, int every = 1);

/// shell_trace.csv: t, eta at n sample points, dt eta at the same points.
void write_shell_trace_csv(const std::string& path, const CoupledWorkspace& ws,
                           const DecoupledResult& sol, int n_samples = 16, int every = 1);

/// One structured text field snapshot: node coordinates, connectivity,
/// per-node velocity and pressure.
void write_snapshot(const std::string& path, const CoupledWorkspace& ws, const VectorX& alpha,
                    const ShellField& delta_slice, const VectorX* pressure = nullptr);

/// E(t) against the Groenwall envelope as an SVG plot.
void write_energy_svg(const std::string& path, const EnergyLedger& ledger);

}  // namespace kfsi
