#include "kfsi/output.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

namespace kfsi {

namespace {

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

void write_ledger_csv(const std::string& path, const EnergyLedger& ledger, int every) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot open " + path);
  out << "t,E_kin_fluid,Dissipation_cum,E_kin_shell,E_koiter,E_total,groenwall_envelope,defect\n";
  for (std::size_t i = 0; i < ledger.rows.size(); ++i) {
    if (every > 1 && i % every != 0 && i + 1 != ledger.rows.size()) continue;
    const auto& r = ledger.rows[i];
    out << num(r.t) << ',' << num(r.e_kin_fluid) << ',' << num(r.dissipation_cum) << ','
        << num(r.e_kin_shell) << ',' << num(r.e_koiter) << ',' << num(r.e_total) << ','
        << num(r.groenwall_envelope) << ',' << num(r.defect) << '\n';
  }
}

void write_shell_trace_csv(const std::string& path, const CoupledWorkspace& ws,
                           const DecoupledResult& sol, int n_samples, int every) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot open " + path);
  const double L = ws.shell().length();
  out << "t";
  for (int j = 0; j < n_samples; ++j) out << ",eta_" << j;
  for (int j = 0; j < n_samples; ++j) out << ",deta_" << j;
  out << "\n";
  const int ns = ws.n_shell_modes();
  for (std::size_t i = 0; i < sol.times.size(); ++i) {
    if (every > 1 && i % every != 0 && i + 1 != sol.times.size()) continue;
    out << num(sol.times[i]);
    for (int j = 0; j < n_samples; ++j) {
      const double q = L * (j + 0.5) / n_samples;
      out << ',' << num(ws.shell().eval(sol.eta[i], q));
    }
    for (int j = 0; j < n_samples; ++j) {
      const double q = L * (j + 0.5) / n_samples;
      out << ',' << num(ws.shell().eval(sol.alpha[i].head(ns), q));
    }
    out << "\n";
  }
}

void write_snapshot(const std::string& path, const CoupledWorkspace& ws, const VectorX& alpha,
                    const ShellField& delta_slice, const VectorX* pressure) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot open " + path);
  const MixedSpace& space = ws.space();
  const ReferenceMesh& mesh = space.mesh;
  out << "# channel field snapshot\n";
  out << "nodes " << mesh.n_vnodes() << "\n";
  out << "cells " << mesh.n_cells() << "\n";
  out << "# id x y u v p  (moved node positions; pressure zero when the Galerkin\n";
  out << "#               path eliminated the multiplier)\n";
  for (int n = 0; n < mesh.n_vnodes(); ++n) {
    const Vec2 x = mesh.vnode(n);
    const Vec2 y = ws.geometry().hanzawa(delta_slice, x);
    Vec2 u = Vec2::Zero();
    for (int k = 0; k < ws.n_modes(); ++k)
      if (alpha[k] != 0.0) u += alpha[k] * ws.transported_fluid_value(k, delta_slice, x);
    double p = 0.0;
    if (pressure != nullptr) {
      // pressure lives on the Q1 lattice; evaluate at the reference node
      p = space.eval_pressure(*pressure, x);
    }
    out << n << ' ' << num(y[0]) << ' ' << num(y[1]) << ' ' << num(u[0]) << ' ' << num(u[1])
        << ' ' << num(p) << '\n';
  }
  out << "# cell connectivity: 9 velocity node ids in tensor order\n";
  int vn[9];
  for (int c = 0; c < mesh.n_cells(); ++c) {
    mesh.cell_vnodes(c, vn);
    out << c;
    for (int m = 0; m < 9; ++m) out << ' ' << vn[m];
    out << '\n';
  }
}

void write_energy_svg(const std::string& path, const EnergyLedger& ledger) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot open " + path);
  const int W = 640, H = 400, ml = 60, mb = 40, mt = 20, mr = 20;
  double tmax = 1e-300, emax = 1e-300;
  for (const auto& r : ledger.rows) {
    tmax = std::max(tmax, r.t);
    emax = std::max({emax, r.e_total, r.groenwall_envelope});
  }
  auto px = [&](double t) { return ml + (W - ml - mr) * (tmax > 0 ? t / tmax : 0.0); };
  auto py = [&](double e) { return H - mb - (H - mb - mt) * (emax > 0 ? e / emax : 0.0); };
  auto poly = [&](auto getter, const char* color) {
    out << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
    for (const auto& r : ledger.rows) out << px(r.t) << ',' << py(getter(r)) << ' ';
    out << "\"/>\n";
  };
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H
      << "\">\n";
  out << "<rect width=\"" << W << "\" height=\"" << H << "\" fill=\"white\"/>\n";
  out << "<line x1=\"" << ml << "\" y1=\"" << H - mb << "\" x2=\"" << W - mr << "\" y2=\""
      << H - mb << "\" stroke=\"black\"/>\n";
  out << "<line x1=\"" << ml << "\" y1=\"" << mt << "\" x2=\"" << ml << "\" y2=\"" << H - mb
      << "\" stroke=\"black\"/>\n";
  poly([](const EnergyLedgerRow& r) { return r.e_total; }, "#1f77b4");
  poly([](const EnergyLedgerRow& r) { return r.groenwall_envelope; }, "#d62728");
  out << "<text x=\"" << W / 2 << "\" y=\"" << H - 8 << "\" font-size=\"12\">t (max "
      << num(tmax) << ")</text>\n";
  out << "<text x=\"8\" y=\"" << mt + 10 << "\" font-size=\"12\">E(t) blue, envelope red (max "
      << num(emax) << ")</text>\n";
  out << "</svg>\n";
}

}  // namespace kfsi
