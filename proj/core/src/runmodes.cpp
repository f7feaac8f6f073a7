#include "kfsi/runmodes.hpp"

#include <Eigen/Dense>
#include <json.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include "kfsi/extension.hpp"
#include "kfsi/geometry.hpp"
#include "kfsi/oracle.hpp"
#include "kfsi/output.hpp"

namespace kfsi {

namespace {

// stream function psi = sin^2(pi x / L) sin^2(pi y / H): u = curl psi is
// divergence-free and vanishes on the whole boundary
struct Manufactured {
  double L, H;

  Vec2 velocity(const Vec2& x) const {
    const double sx = std::sin(M_PI * x[0] / L), cx = std::cos(M_PI * x[0] / L);
    const double sy = std::sin(M_PI * x[1] / H), cy = std::cos(M_PI * x[1] / H);
    return {2.0 * M_PI / H * sx * sx * sy * cy, -2.0 * M_PI / L * sx * cx * sy * sy};
  }

  double pressure(const Vec2& x) const {
    return std::cos(M_PI * x[0] / L) * std::sin(M_PI * x[1] / H);
  }

  // f = -lap(u) + grad p (2 div(Du) = lap(u) for divergence-free u), viscosity 1
  Vec2 forcing(const Vec2& x) const {
    const double ax = M_PI / L, ay = M_PI / H;
    const double sx = std::sin(ax * x[0]), cx = std::cos(ax * x[0]);
    const double sy = std::sin(ay * x[1]), cy = std::cos(ay * x[1]);
    const double u1_xx = 2.0 * ay * (2.0 * ax * ax * (cx * cx - sx * sx)) * sy * cy;
    const double u1_yy = 2.0 * ay * sx * sx * (-4.0 * ay * ay * sy * cy);
    const double u2_xx = -2.0 * ax * (-4.0 * ax * ax * sx * cx) * sy * sy;
    const double u2_yy = -2.0 * ax * sx * cx * (2.0 * ay * ay * (cy * cy - sy * sy));
    const Vec2 lap(u1_xx + u1_yy, u2_xx + u2_yy);
    const Vec2 gradp(-ax * sx * sy, ay * cx * cy);
    return -lap + gradp;
  }
};

}  // namespace

std::vector<StokesErrorSample> stokes_convergence_study(int levels, int nx0, int ny0, double L,
                                                        double H) {
  std::vector<StokesErrorSample> out;
  for (int lev = 0; lev < levels; ++lev) {
    const int nx = nx0 << lev, ny = ny0 << lev;
    MixedSpace space{ReferenceMesh(nx, ny, L, H)};
    Geometry geom = make_channel_geometry(L, H, 0.4 * H, 0.1 * H);
    ZeroShellField zero;
    MovingForms forms = assemble_moving_forms(space, geom, zero, nullptr, nullptr, 5);

    Manufactured mf{L, H};
    VectorX fu = VectorX::Zero(space.n_udofs());
    {
      const QuadratureLayout layout(space.mesh, 5);
      int vn[9];
      for (std::size_t qi = 0; qi < layout.size(); ++qi) {
        const Vec2 x = layout.points[qi];
        const Vec2 f = mf.forcing(x);
        const double w = layout.weights[qi];
        const int c = layout.cell_of[qi];
        space.mesh.cell_vnodes(c, vn);
        const int cx = c % nx, cy = c / nx;
        const double tx = (x[0] - cx * space.mesh.hx()) / space.mesh.hx();
        const double ty = (x[1] - cy * space.mesh.hy()) / space.mesh.hy();
        int m = 0;
        for (int b = 0; b < 3; ++b)
          for (int a = 0; a < 3; ++a, ++m) {
            const double s = fem::q2(a, tx) * fem::q2(b, ty);
            fu[space.udof(vn[m], 0)] += w * s * f[0];
            fu[space.udof(vn[m], 1)] += w * s * f[1];
          }
      }
    }

    SaddleProblem prob;
    SpMat A2 = 2.0 * forms.visc;  // forcing was derived for unit viscosity: 2 sigma = 2
    prob.A = &A2;
    prob.B = &forms.div;
    prob.fu = fu;
    prob.pin_pressure_mean = true;

    std::vector<char> seen(space.n_udofs(), 0);
    std::vector<int> dd;
    std::vector<double> dv;
    for (BoundaryTag tag :
         {BoundaryTag::M, BoundaryTag::Inlet, BoundaryTag::Outlet, BoundaryTag::Bottom})
      for (int n : space.mesh.vnodes_on(tag)) {
        const Vec2 v = mf.velocity(space.mesh.vnode(n));
        for (int comp = 0; comp < 2; ++comp) {
          const int d = space.udof(n, comp);
          if (!seen[d]) {
            seen[d] = 1;
            dd.push_back(d);
            dv.push_back(v[comp]);
          }
        }
      }
    prob.dirichlet_dofs = dd;
    prob.dirichlet_values = Eigen::Map<VectorX>(dv.data(), dv.size());

    SaddleSolution sol = solve_saddle(space, prob);

    double err2 = 0.0;
    const QuadratureLayout fine(space.mesh, 6);
    for (std::size_t qi = 0; qi < fine.size(); ++qi) {
      const Vec2 x = fine.points[qi];
      err2 += fine.weights[qi] * (space.eval_velocity(sol.u, x) - mf.velocity(x)).squaredNorm();
    }
    out.push_back({nx, ny, std::sqrt(err2)});
  }
  return out;
}

double min_observed_order(const std::vector<StokesErrorSample>& samples) {
  double order = 1e300;
  for (std::size_t i = 1; i < samples.size(); ++i)
    order = std::min(order,
                     std::log2(samples[i - 1].velocity_l2_error / samples[i].velocity_l2_error));
  return order;
}

double boundary_flux(const MixedSpace& space, const VectorX& u, int order) {
  const ReferenceMesh& mesh = space.mesh;
  double flux = 0.0;
  struct Edge {
    BoundaryTag tag;
    Vec2 nu;
    bool horizontal;
    double fixed;
  };
  const Edge edges[4] = {
      {BoundaryTag::M, {0, 1}, true, mesh.H},
      {BoundaryTag::Bottom, {0, -1}, true, 0.0},
      {BoundaryTag::Inlet, {-1, 0}, false, 0.0},
      {BoundaryTag::Outlet, {1, 0}, false, mesh.L},
  };
  for (const Edge& e : edges) {
    auto q = boundary_quadrature(mesh, e.tag, order);
    for (std::size_t i = 0; i < q.points.size(); ++i) {
      const Vec2 x = e.horizontal ? Vec2(q.points[i], e.fixed) : Vec2(e.fixed, q.points[i]);
      flux += q.weights[i] * space.eval_velocity(u, x).dot(e.nu);
    }
  }
  return flux;
}

std::shared_ptr<CoupledWorkspace> build_workspace(const RunConfig& cfg) {
  MixedSpace space{ReferenceMesh(cfg.nx, cfg.ny, cfg.length, cfg.height)};
  Geometry geom = make_channel_geometry(cfg.length, cfg.height, cfg.kappa, cfg.alpha);
  auto basis =
      std::make_shared<ShellBasis>(parse_shell_basis_kind(cfg.shell_basis), cfg.shell_modes,
                                   cfg.length, cfg.shell_subintervals, cfg.shell_points);
  return std::make_shared<CoupledWorkspace>(space, geom, cfg.constants, basis, cfg.fluid_modes,
                                            cfg.quad_order, cfg.noslip_bottom);
}

namespace {

void add_check(RunReport& rep, const std::string& name, double value, double threshold,
               bool larger_is_better = false) {
  CheckLine line;
  line.name = name;
  line.value = value;
  line.threshold = threshold;
  line.passed = larger_is_better ? (value > threshold) : (value <= threshold);
  if (!line.passed) rep.exit_code = kExitInvariantViolation;
  rep.checks.push_back(line);
}

VectorX random_coeffs(int n, double scale, std::mt19937_64& rng) {
  std::normal_distribution<double> dist;
  VectorX c(n);
  for (int i = 0; i < n; ++i) c[i] = dist(rng);
  return c * (scale / c.norm());
}

}  // namespace

RunReport run_identity_suite(const RunConfig& cfg, const std::string& outdir, std::uint64_t seed) {
  RunReport rep;
  std::mt19937_64 rng(seed);
  Geometry geom = make_channel_geometry(cfg.length, cfg.height, cfg.kappa, cfg.alpha);
  ShellBasis basis(parse_shell_basis_kind(cfg.shell_basis), std::max(cfg.shell_modes, 4),
                   cfg.length, cfg.shell_subintervals, cfg.shell_points);
  const double L = cfg.length, H = cfg.height;

  auto scaled_field = [&](double sup) {
    VectorX c = random_coeffs(basis.n_modes(), 1.0, rng);
    BasisShellField raw(basis, c);
    const double s = raw.sup_norm(0.0, L, 512);
    return BasisShellField(basis, (c * (sup / s)).eval());
  };

  {  // Hanzawa round trip and positivity
    BasisShellField eta = scaled_field(geom.alpha());
    std::uniform_real_distribution<double> ux(0.0, L), uy(0.0, H);
    double worst = 0.0, min_det = 1e300;
    for (int i = 0; i < 4000; ++i) {
      const Vec2 x(ux(rng), uy(rng));
      worst = std::max(worst, (geom.hanzawa_inverse(eta, geom.hanzawa(eta, x)) - x).norm());
    }
    BasisShellField eta2 = scaled_field(0.4 * geom.kappa());
    for (int i = 0; i < 4000; ++i) {
      min_det = std::min(min_det, geom.hanzawa_jacobian(eta2, Vec2(ux(rng), uy(rng))).det);
    }
    add_check(rep, "hanzawa_round_trip", worst, 1e-10);
    add_check(rep, "hanzawa_det_positive", min_det, 0.0, /*larger_is_better=*/true);

    double jac_err = 0.0;
    for (int i = 0; i < 50; ++i) {
      const Vec2 x(ux(rng), uy(rng));
      const Mat2 fd = oracle::fd_jacobian(
          [&](const Vec2& p) { return geom.hanzawa(eta2, p); }, x, 1e-6);
      jac_err = std::max(jac_err, (geom.hanzawa_jacobian(eta2, x).dpsi - fd).norm());
    }
    add_check(rep, "hanzawa_jacobian_vs_fd", jac_err, 1e-6);
  }

  {  // gamma on the constant-curvature test arc
    const double R = 2.0;
    Geometry arc = make_arc_geometry(Vec2(0, 0), R, 0.15, 1.4, true, 0.5, 0.2);
    AnalyticShellField eta([&](double) { return 0.1 * R; }, [](double) { return 0.0; },
                           [](double) { return 0.0; });
    double worst = 0.0;
    for (double q : {0.2, 0.5, 0.9, 1.2}) {
      const double h = 1e-6;
      const Vec2 tp = (arc.curve().point(q + h) + eta.value(q + h) * arc.curve().normal(q + h) -
                       arc.curve().point(q - h) - eta.value(q - h) * arc.curve().normal(q - h)) /
                      (2 * h);
      const Vec2 nu = arc.curve().normal(q);
      const Vec2 nu_eta = Vec2(-tp[1], tp[0]).normalized();
      const double direct = std::abs(nu.dot(nu_eta)) * tp.norm();
      worst = std::max(worst, std::abs(arc.gamma(eta, q) - direct));
    }
    add_check(rep, "gamma_vs_direct_boundary_metric", worst, 1e-6);
  }

  {  // Green pairing for cubic integrands
    BasisShellField eta = scaled_field(0.25);
    VectorField2 phi{[](const Vec2& y) {
                       return Vec2(y[0] * y[0] * y[1], y[0] * y[1] * y[1] + std::pow(y[0], 3));
                     },
                     [](const Vec2& y) {
                       Mat2 J;
                       J << 2 * y[0] * y[1], y[0] * y[0], y[1] * y[1] + 3 * y[0] * y[0],
                           2 * y[0] * y[1];
                       return J;
                     }};
    ScalarField2 psi{[](const Vec2& y) { return y[0] * y[1] * y[1] - 0.5 * y[0]; },
                     [](const Vec2& y) { return Vec2(y[1] * y[1] - 0.5, 2 * y[0] * y[1]); }};
    auto [lhs, rhs] = green_pairing(geom, eta, phi, psi, 8, 12);
    add_check(rep, "green_pairing_cubic", std::abs(lhs - rhs), 1e-8);
  }

  {  // Koiter suite
    FlatTopEdge curve(L, H);
    const KoiterMaterial mat = cfg.constants.shell;
    ShellBasis b32(ShellBasisKind::ClampedBeam, 32, L);
    const MatrixX S32 = koiter_stiffness_2k(mat, curve, b32);
    Eigen::SelfAdjointEigenSolver<MatrixX> es(S32);
    add_check(rep, "koiter_stiffness_spd_32", es.eigenvalues().minCoeff(), 0.0, true);

    const MatrixX S = koiter_stiffness_2k(mat, curve, basis);
    double sym = 0.0, twopath = 0.0, fd = 0.0;
    for (int rep_i = 0; rep_i < 25; ++rep_i) {
      const VectorX a = random_coeffs(basis.n_modes(), 1.0, rng);
      const VectorX bb = random_coeffs(basis.n_modes(), 1.0, rng);
      BasisShellField fa(basis, a), fb(basis, bb);
      const double kab = koiter_energy(mat, curve, fa, fb, basis.quadrature());
      const double kba = koiter_energy(mat, curve, fb, fa, basis.quadrature());
      sym = std::max(sym, std::abs(kab - kba) / std::max(1.0, std::abs(kab)));
      twopath = std::max(twopath, std::abs(2.0 * kab - (S * a).dot(bb)) /
                                      std::max(1.0, std::abs(2.0 * kab)));
      auto energy = [&](const VectorX& e) {
        BasisShellField f(basis, e);
        return koiter_energy(mat, curve, f, f, basis.quadrature());
      };
      fd = std::max(fd, std::abs(oracle::fd_energy_gradient(energy, a, bb) - (S * a).dot(bb)) /
                            std::max(1.0, std::abs((S * a).dot(bb))));
    }
    add_check(rep, "koiter_symmetry", sym, 1e-14);
    add_check(rep, "koiter_gradient_two_paths", twopath, 1e-12);
    add_check(rep, "koiter_gradient_vs_fd", fd, 1e-6);
  }

  {  // extension suite
    MixedSpace space{ReferenceMesh(cfg.nx, cfg.ny, L, H)};
    auto eta = std::make_shared<BasisShellField>(scaled_field(0.1));
    ShellExtensionOperator ext(space, geom, basis, eta, cfg.quad_order);
    double divres = 0.0, trace = 0.0, lateral = 0.0, flux = 0.0, fiber = 0.0;
    const auto& quad = basis.quadrature();
    for (int k = 0; k < ext.n_modes(); ++k) {
      const auto& mode = ext.mode(k);
      divres = std::max(divres, divergence_residual_field(
                                    space, [&](const Vec2& x) { return mode.jacobian(x); }, 4));
      for (std::size_t i = 0; i < quad.points.size(); i += 2) {
        const double q = quad.points[i];
        const Vec2 y(q, H + eta->value(q));
        trace = std::max(trace,
                         (mode.value(y) - basis.value(k, q) * Vec2(0.0, 1.0)).norm());
      }
      for (double yy : {H - 0.9 * geom.kappa(), H - 0.2, H}) {
        lateral = std::max(lateral, mode.value(Vec2(0.0, yy)).norm());
        lateral = std::max(lateral, mode.value(Vec2(L, yy)).norm());
      }
      flux = std::max(flux, std::abs(mode.compensated_boundary_flux()));
      // flat-case fiber constancy of the tube part
      for (double s : {-0.6, -0.3, 0.05}) {
        const Vec2 v = tube_extension_value(geom, *eta, BasisShellField(basis, VectorX::Unit(basis.n_modes(), k)),
                                            Vec2(0.7, H + s));
        fiber = std::max(fiber, std::abs(v[1] - basis.value(k, 0.7)));
      }
    }
    add_check(rep, "extension_divergence", divres, 1e-10);
    add_check(rep, "extension_trace_identity", trace, 1e-10);
    add_check(rep, "extension_lateral_trace", lateral, 1e-10);
    add_check(rep, "extension_compensated_flux", flux, 1e-12);
    add_check(rep, "extension_flat_fiber_exact", fiber, 0.0);

    const double R = 2.0, kc = 1.0 / R;
    Geometry arc = make_arc_geometry(Vec2(0, 0), R, 0.1, 1.5, true, 0.5, 0.2);
    ShellBasis ab(ShellBasisKind::ClampedBeam, 4, 1.5);
    VectorX ac = random_coeffs(4, 0.1, rng);
    BasisShellField aeta(ab, ac);
    double exp_err = 0.0;
    for (double q : {0.2, 0.7, 1.2})
      for (double s : {-0.4, -0.1, 0.3}) {
        const double closed = (1.0 - kc * aeta.value(q)) / (1.0 - kc * s);
        exp_err = std::max(exp_err, std::abs(tube_exp_factor(arc, aeta, q, s) - closed));
      }
    add_check(rep, "extension_arc_exponential_factor", exp_err, 1e-10);
  }

  if (!outdir.empty()) write_summary(outdir, cfg, rep, {{"mode", "identity-suite"}});
  rep.message = rep.exit_code == kExitOk ? "identity suite passed" : "identity suite failed";
  return rep;
}

Checkpoint make_checkpoint(const CoupledWorkspace& ws, const DecoupledResult& sol,
                           std::size_t step, double eps, int picard_iter) {
  Checkpoint cp;
  cp.set_scalar("time", sol.times.at(step));
  cp.set_scalar("epsilon", eps);
  cp.set_scalar("picard_iter", picard_iter);
  cp.fields["alpha"] = sol.alpha.at(step);
  cp.fields["eta"] = sol.eta.at(step);
  cp.fields["eta0"] = sol.eta.front();
  VectorX meta(4);
  meta << ws.space().mesh.nx, ws.space().mesh.ny, ws.n_shell_modes(), ws.n_fluid_modes();
  cp.fields["meta"] = meta;
  // reference-representation nodal velocity (geometry-free redundant payload)
  VectorX udofs = VectorX::Zero(ws.space().n_udofs());
  const VectorX& a = sol.alpha.at(step);
  for (int n = 0; n < ws.space().mesh.n_vnodes(); ++n) {
    Vec2 v = Vec2::Zero();
    for (int k = 0; k < ws.n_modes(); ++k)
      if (a[k] != 0.0) v += a[k] * ws.ref_value_at(k, ws.space().mesh.vnode(n));
    udofs[ws.space().udof(n, 0)] = v[0];
    udofs[ws.space().udof(n, 1)] = v[1];
  }
  cp.fields["udofs"] = udofs;
  const auto& row = sol.ledger.rows.at(step);
  cp.set_scalar("e_total", row.e_total);
  cp.set_scalar("envelope", row.groenwall_envelope);
  cp.set_scalar("e0_data", sol.ledger.e0_data);
  return cp;
}

void write_summary(const std::string& outdir, const RunConfig& cfg, const RunReport& report,
                   const std::vector<std::pair<std::string, std::string>>& extra) {
  namespace fs = std::filesystem;
  fs::create_directories(outdir);
  nlohmann::json j;
  char hash[32];
  std::snprintf(hash, sizeof hash, "%016llx",
                static_cast<unsigned long long>(cfg.config_hash));
  j["provenance"] = {{"config_hash", hash},
                     {"code_version", "kfsi 0.1.0"},
                     {"mesh", {cfg.nx, cfg.ny}},
                     {"shell_modes", cfg.shell_modes},
                     {"fluid_modes", cfg.fluid_modes},
                     {"eps0", cfg.eps0},
                     {"eps_levels", cfg.eps_levels},
                     {"run_eps", cfg.run_eps}};
  j["exit_code"] = report.exit_code;
  j["message"] = report.message;
  nlohmann::json checks = nlohmann::json::array();
  for (const auto& c : report.checks)
    checks.push_back({{"name", c.name},
                      {"passed", c.passed},
                      {"value", c.value},
                      {"threshold", c.threshold}});
  j["checks"] = checks;
  for (const auto& [k, v] : extra) j[k] = v;
  std::ofstream out(fs::path(outdir) / "summary.json");
  out << j.dump(2) << "\n";
}

namespace {

void write_solution_outputs(const std::string& outdir, const RunConfig& cfg,
                            const CoupledWorkspace& ws, const DecoupledResult& sol, double eps,
                            std::shared_ptr<const ShellTrajectory> delta) {
  namespace fs = std::filesystem;
  fs::create_directories(outdir);
  write_ledger_csv((fs::path(outdir) / "ledger.csv").string(), sol.ledger, cfg.output_every);
  write_shell_trace_csv((fs::path(outdir) / "shell_trace.csv").string(), ws, sol, 16,
                        cfg.output_every);
  write_energy_svg((fs::path(outdir) / "plot_energy.svg").string(), sol.ledger);
  if (cfg.snapshot_every > 0 && delta != nullptr) {
    DisplacementMollifier dm(delta, eps);
    for (std::size_t s = 0; s < sol.times.size(); s += cfg.snapshot_every) {
      char name[64];
      std::snprintf(name, sizeof name, "snapshot_%05zu.txt", s);
      const auto slice = dm.slice(sol.times[s]);
      write_snapshot((fs::path(outdir) / name).string(), ws, sol.alpha[s], slice);
    }
  }
  make_checkpoint(ws, sol, sol.times.size() - 1, eps, 0)
      .write((fs::path(outdir) / "final.kfsi").string());
}

}  // namespace

RunReport run_decoupled(const RunConfig& cfg, const std::string& outdir) {
  RunReport rep;
  auto ws = build_workspace(cfg);
  SolverParams params;
  params.quad_order = cfg.quad_order;
  params.alpha_cap = cfg.alpha;
  InitialData data = cfg.initial_data(*ws);
  auto delta = cfg.delta_trajectory(*ws);
  VelocityGrid v;
  try {
    DecoupledResult sol = solve_decoupled(*ws, cfg.grid, params, cfg.forcing(), data, delta, v,
                                          cfg.run_eps);
    write_solution_outputs(outdir, cfg, *ws, sol, cfg.run_eps, delta);
    add_check(rep, "trace_compatibility", sol.max_trace_residual, 1e-9);
    add_check(rep, "velocity_divergence", sol.max_div_residual, 1e-9);
    add_check(rep, "dissipation_monotone", sol.ledger.dissipation_monotone() ? 0.0 : 1.0, 0.5);
    rep.message = "decoupled run finished";
  } catch (const HorizonExceeded& e) {
    rep.exit_code = kExitNumericalFailure;
    rep.message = e.what();
  } catch (const SolverError& e) {
    rep.exit_code = kExitNumericalFailure;
    rep.message = e.what();
  }
  write_summary(outdir, cfg, rep, {{"mode", "decoupled"}});
  return rep;
}

RunReport run_coupled(const RunConfig& cfg, const std::string& outdir,
                      const std::string& restart_checkpoint) {
  RunReport rep;
  auto ws = build_workspace(cfg);
  SolverParams params;
  params.quad_order = cfg.quad_order;
  params.alpha_cap = cfg.alpha;
  InitialData data = cfg.initial_data(*ws);
  if (!restart_checkpoint.empty()) {
    // restart: the stored slice becomes the initial data of a fresh horizon
    Checkpoint cp = Checkpoint::read(restart_checkpoint);
    if (cp.vec("eta").size() != ws->n_shell_modes())
      throw FormatError("restart checkpoint does not match the configured shell basis");
    data.eta0 = cp.vec("eta");
    data.eta1 = cp.vec("alpha").head(ws->n_shell_modes());
    data.u0_interior = cp.vec("alpha").tail(ws->n_fluid_modes());
  }
  try {
    PicardResult pr = picard_couple(*ws, cfg.grid, params, cfg.picard, cfg.forcing(), data,
                                    cfg.run_eps);
    write_solution_outputs(outdir, cfg, *ws, pr.solution, cfg.run_eps, pr.delta);
    add_check(rep, "picard_converged", pr.converged ? 0.0 : 1.0, 0.5);
    add_check(rep, "trace_compatibility", pr.solution.max_trace_residual, 1e-9);
    add_check(rep, "velocity_divergence", pr.solution.max_div_residual, 1e-9);
    add_check(rep, "eta_within_alpha", pr.solution.max_eta_sup, ws->geometry().alpha());
    std::string hist;
    for (double d : pr.diffs) hist += std::to_string(d) + " ";
    if (!pr.converged) {
      rep.exit_code = kExitNumericalFailure;
      rep.message = "picard did not converge; iterate history: " + hist;
    } else {
      rep.message = "coupled run converged in " + std::to_string(pr.iterations) + " iterations";
    }
    write_summary(outdir, cfg, rep,
                  {{"mode", "coupled"}, {"picard_history", hist},
                   {"horizon", std::to_string(pr.horizon)}});
  } catch (const SolverError& e) {
    rep.exit_code = kExitNumericalFailure;
    rep.message = e.what();
    write_summary(outdir, cfg, rep, {{"mode", "coupled"}, {"failure", e.what()}});
  } catch (const HorizonExceeded& e) {
    rep.exit_code = kExitNumericalFailure;
    rep.message = e.what();
    write_summary(outdir, cfg, rep, {{"mode", "coupled"}, {"failure", e.what()}});
  }
  return rep;
}

RunReport run_continuation(const RunConfig& cfg, const std::string& outdir) {
  RunReport rep;
  auto ws = build_workspace(cfg);
  SolverParams params;
  params.quad_order = cfg.quad_order;
  params.alpha_cap = cfg.alpha;
  InitialData data = cfg.initial_data(*ws);
  try {
    const double eps0 = (cfg.eps0 == "auto")
                            ? determine_eps0(*ws, data.eta0, cfg.grid.T(), cfg.eps0_cap)
                            : cfg.eps0_value;
    ContinuationResult cr = epsilon_continuation(*ws, cfg.grid, params, cfg.picard, cfg.forcing(),
                                                 data, eps0, cfg.eps_levels);
    nlohmann::json table = nlohmann::json::array();
    for (const auto& lev : cr.levels) {
      table.push_back({{"eps", lev.eps},
                       {"converged", lev.result.converged},
                       {"iterations", lev.result.iterations},
                       {"diff_eta_prev", lev.diff_eta_prev},
                       {"diff_u_prev", lev.diff_u_prev},
                       {"shift_dominates", lev.shift_dominates},
                       {"envelope_violation",
                        lev.result.solution.ledger.max_envelope_violation()}});
      add_check(rep, "level_converged_eps=" + std::to_string(lev.eps),
                lev.result.converged ? 0.0 : 1.0, 0.5);
      add_check(rep, "shift_dominates_eps=" + std::to_string(lev.eps),
                lev.shift_dominates ? 0.0 : 1.0, 0.5);
    }
    for (std::size_t i = 2; i < cr.levels.size(); ++i)
      add_check(rep, "interlevel_diff_decreasing_" + std::to_string(i),
                cr.levels[i].diff_eta_prev + cr.levels[i].diff_u_prev,
                cr.levels[i - 1].diff_eta_prev + cr.levels[i - 1].diff_u_prev);
    if (!cr.all_converged) {
      rep.exit_code = kExitNumericalFailure;
      rep.message = "continuation: a level failed to couple (partial table written)";
    } else {
      rep.message = "continuation finished with " + std::to_string(cr.levels.size()) + " levels";
    }
    if (!cr.levels.empty()) {
      const auto& last = cr.levels.back();
      write_solution_outputs(outdir, cfg, *ws, last.result.solution, last.eps, last.result.delta);
    }
    write_summary(outdir, cfg, rep, {{"mode", "continuation"}, {"table", table.dump()}});
  } catch (const SolverError& e) {
    rep.exit_code = kExitNumericalFailure;
    rep.message = e.what();
    write_summary(outdir, cfg, rep, {{"mode", "continuation"}, {"failure", e.what()}});
  }
  return rep;
}

RunReport run_verify(const RunConfig& cfg, const std::string& checkpoint_path,
                     const std::string& outdir) {
  RunReport rep;
  Checkpoint cp = Checkpoint::read(checkpoint_path);
  auto ws = build_workspace(cfg);
  const VectorX meta = cp.vec("meta");
  if (static_cast<int>(meta[2]) != ws->n_shell_modes() ||
      static_cast<int>(meta[3]) != ws->n_fluid_modes())
    throw FormatError("verify: checkpoint mode counts do not match the configuration");

  const VectorX alpha = cp.vec("alpha");
  const VectorX eta = cp.vec("eta");
  const VectorX udofs = cp.vec("udofs");

  // admissibility of the stored displacement
  BasisShellField etaf(ws->shell(), eta);
  add_check(rep, "eta_admissible", etaf.sup_norm(0.0, cfg.length, 256),
            ws->geometry().kappa());

  // consistency of the redundant nodal payload with the modal coefficients
  double cons = 0.0;
  for (int nidx = 0; nidx < ws->space().mesh.n_vnodes(); ++nidx) {
    Vec2 v = Vec2::Zero();
    for (int k = 0; k < ws->n_modes(); ++k)
      if (alpha[k] != 0.0) v += alpha[k] * ws->ref_value_at(k, ws->space().mesh.vnode(nidx));
    cons = std::max(cons, std::abs(v[0] - udofs[ws->space().udof(nidx, 0)]));
    cons = std::max(cons, std::abs(v[1] - udofs[ws->space().udof(nidx, 1)]));
  }
  add_check(rep, "velocity_payload_consistency", cons,
            1e-9 * std::max(1.0, udofs.lpNorm<Eigen::Infinity>()));

  // divergence of the modal reconstruction (machine level by construction)
  const double divres = divergence_residual_field(
      ws->space(),
      [&](const Vec2& x) {
        Mat2 J = Mat2::Zero();
        for (int k = 0; k < ws->n_modes(); ++k)
          if (alpha[k] != 0.0) J += alpha[k] * ws->ref_jacobian_at(k, x);
        return J;
      },
      4);
  add_check(rep, "divergence_modal", divres, 1e-9 * std::max(1.0, alpha.norm()));

  // divergence of the stored nodal field; on the flat channel the nodal
  // sampling of the composite modes is itself discretely divergence-free
  ZeroShellField zero;
  const double div_stored = divergence_residual(ws->space(), ws->geometry(), zero, udofs, 4);
  add_check(rep, "divergence_stored_payload", div_stored, 1e-8 * (1.0 + udofs.norm()));

  // trace compatibility of the stored payload at the shell nodes
  double trace = 0.0;
  for (int i = 0; i <= 2 * ws->space().mesh.nx; ++i) {
    const int nid = ws->space().mesh.vnode_id(i, 2 * ws->space().mesh.ny);
    const double q = ws->space().mesh.vnode(nid)[0];
    double w = 0.0;
    for (int k = 0; k < ws->n_shell_modes(); ++k) w += alpha[k] * ws->shell().value(k, q);
    trace = std::max(trace, std::abs(udofs[ws->space().udof(nid, 1)] - w));
    trace = std::max(trace, std::abs(udofs[ws->space().udof(nid, 0)]));
  }
  add_check(rep, "trace_compatibility", trace, 1e-9 * std::max(1.0, alpha.norm()));

  // stored energy against the stored Groenwall envelope (2% slack)
  const double e_total = cp.scalar("e_total");
  const double env = cp.scalar("envelope");
  add_check(rep, "energy_within_envelope", std::sqrt(std::max(0.0, e_total)),
            1.02 * std::sqrt(std::max(0.0, env)) + 1e-12);

  rep.message = rep.exit_code == kExitOk ? "checkpoint verified" : "checkpoint checks failed";
  if (!outdir.empty()) write_summary(outdir, cfg, rep, {{"mode", "verify"}});
  return rep;
}

}  // namespace kfsi
