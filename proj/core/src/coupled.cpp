#include "kfsi/coupled.hpp"

#include <Eigen/Dense>
#include <bit>
#include <cmath>
#include <unordered_map>

#include "kfsi/oracle.hpp"

namespace kfsi {

ForcingSpec ForcingSpec::zero() {
  ForcingSpec s;
  s.f = [](double, const Vec2&) { return Vec2::Zero().eval(); };
  s.g = [](double, double) { return 0.0; };
  s.is_zero = true;
  return s;
}

double EnergyLedger::max_defect() const {
  double m = 0.0;
  for (const auto& r : rows) m = std::max(m, std::abs(r.defect));
  return m;
}

bool EnergyLedger::dissipation_monotone() const {
  for (std::size_t i = 1; i < rows.size(); ++i)
    if (rows[i].dissipation_cum < rows[i - 1].dissipation_cum - 1e-14) return false;
  return true;
}

double EnergyLedger::max_envelope_violation() const {
  double m = -1e300;
  for (const auto& r : rows)
    m = std::max(m, std::sqrt(std::max(0.0, r.e_total)) -
                        std::sqrt(std::max(0.0, r.groenwall_envelope)));
  return m;
}

namespace {

// memoized shell-field view; quadrature points repeat the same q values
// across mesh rows, so per-slice mollifier convolutions collapse
class CachedShellField final : public ShellField {
 public:
  explicit CachedShellField(const ShellField& f) : f_(&f) {}
  double value(double q) const override { return entry(q)[0]; }
  double d1(double q) const override { return entry(q)[1]; }
  double d2(double q) const override { return entry(q)[2]; }

 private:
  const std::array<double, 3>& entry(double q) const {
    const auto key = std::bit_cast<std::uint64_t>(q);
    auto it = cache_.find(key);
    if (it == cache_.end())
      it = cache_.emplace(key, std::array<double, 3>{f_->value(q), f_->d1(q), f_->d2(q)}).first;
    return it->second;
  }

  const ShellField* f_;
  mutable std::unordered_map<std::uint64_t, std::array<double, 3>> cache_;
};

struct StepMatrices {
  MatrixX A;     // rho Mf + 2 eps_s rho_s Ms
  MatrixX G;     // rho Nf + rho/2 R + 2 sigma V + rho/2 C
  MatrixX Mf;    // fluid mass block alone
  MatrixX Visc;  // viscous block alone (for the dissipation ledger)
  VectorX b;
  double f_l2 = 0.0;  // ||f(t)||_{L2(Omega_{R_eps delta(t)})}
  double g_l2 = 0.0;  // ||g(t)||_{L2(M)}
};

StepMatrices assemble_step(const CoupledWorkspace& ws, const SolverParams& params, double t,
                           const DisplacementMollifier& delta_eps,
                           const VelocityMollifier* transport, const ForcingSpec& forcing,
                           bool light) {
  const int n = ws.n_modes();
  const int ns = ws.n_shell_modes();
  const PhysicalConstants& pc = ws.constants();
  const double es_rs = pc.shell.thickness_half * pc.shell.shell_density;

  StepMatrices out;
  out.A = MatrixX::Zero(n, n);
  out.G = MatrixX::Zero(n, n);
  out.Mf = MatrixX::Zero(n, n);
  out.Visc = MatrixX::Zero(n, n);
  out.b = VectorX::Zero(n);

  const auto slice = delta_eps.slice(t);
  const auto rate = delta_eps.slice_rate(t);
  const CachedShellField delta(slice);
  const CachedShellField delta_rate(rate);
  const Geometry& geom = ws.geometry();

  if (params.include_fluid) {
    const QuadratureLayout& layout = ws.layout();
    std::vector<Vec2> tv(n), td(n);
    std::vector<Mat2> tg(n);
    const bool zero_forcing = forcing.is_zero;
    for (std::size_t i = 0; i < layout.size(); ++i) {
      const Vec2 x = layout.points[i];
      const double w = layout.weights[i];
      const MovingJacobian J = geom.hanzawa_jacobian(delta, x, &delta_rate);
      const double wdet = w * J.det;
      const PiolaData P = geom.piola_data(J);
      const Mat2 dpsi_inv = J.dpsi.inverse();

      for (int k = 0; k < n; ++k) {
        const Vec2& v = ws.ref_value(k, i);
        tv[k] = P.P * v;
        if (light) continue;
        const Mat2& jr = ws.ref_jacobian(k, i);
        Mat2 gx;
        gx.col(0) = P.dP_dx0 * v + P.P * jr.col(0);
        gx.col(1) = P.dP_dx1 * v + P.P * jr.col(1);
        tg[k] = gx * dpsi_inv;
        td[k] = P.P_t * v - tg[k] * J.psi_t;
      }

      Vec2 f_at = Vec2::Zero();
      Vec2 v_at = Vec2::Zero();
      if (!zero_forcing || (transport != nullptr && !light)) {
        const Vec2 y = geom.hanzawa(delta, x);
        if (!zero_forcing) {
          f_at = forcing.f(t, y);
          out.f_l2 += wdet * f_at.squaredNorm();
        }
        if (transport != nullptr && !light) v_at = transport->value(t, y);
      }

      const bool has_f = f_at.squaredNorm() != 0.0;
      for (int j = 0; j < n; ++j) {
        if (has_f) out.b[j] += wdet * f_at.dot(tv[j]);
        for (int k = 0; k < n; ++k) {
          out.Mf(j, k) += wdet * tv[j].dot(tv[k]);
          if (light) continue;
          const Mat2 sj = 0.5 * (tg[j] + tg[j].transpose());
          const Mat2 sk = 0.5 * (tg[k] + tg[k].transpose());
          out.Visc(j, k) += wdet * sj.cwiseProduct(sk).sum();
          out.G(j, k) += pc.rho * wdet * tv[j].dot(td[k]);
          if (transport != nullptr)
            out.G(j, k) += 0.5 * pc.rho * wdet *
                           (tv[j].dot(tg[k] * v_at) - tv[k].dot(tg[j] * v_at));
        }
      }
    }
    if (!light) out.G += 2.0 * pc.sigma * out.Visc;
  }

  // shell blocks: Reynolds boundary term and the forcing pairing
  const auto& quad = ws.shell().quadrature();
  for (std::size_t i = 0; i < quad.points.size(); ++i) {
    const double q = quad.points[i], w = quad.weights[i];
    const double gq = forcing.is_zero ? 0.0 : forcing.g(t, q);
    out.g_l2 += w * gq * gq;
    const double bnd =
        (light || !params.include_fluid) ? 0.0 : w * delta_rate.value(q) * geom.gamma(delta, q);
    for (int j = 0; j < ns; ++j) {
      const double yj = ws.shell().value(j, q);
      if (gq != 0.0) out.b[j] += w * gq * yj;
      if (bnd == 0.0) continue;
      for (int k = 0; k < ns; ++k)
        out.G(j, k) += 0.5 * pc.rho * bnd * yj * ws.shell().value(k, q);
    }
  }
  out.A = pc.rho * out.Mf;
  out.A.topLeftCorner(ns, ns) += 2.0 * es_rs * ws.shell_mass();
  out.f_l2 = std::sqrt(out.f_l2);
  out.g_l2 = std::sqrt(out.g_l2);
  return out;
}

}  // namespace

CoupledWorkspace::CoupledWorkspace(MixedSpace space, Geometry geom, PhysicalConstants constants,
                                   std::shared_ptr<ShellBasis> shell_basis, int n_fluid_modes,
                                   int quad_order, bool noslip_bottom)
    : space_(std::move(space)),
      geom_(std::move(geom)),
      constants_(constants),
      shell_(std::move(shell_basis)),
      n_fluid_(n_fluid_modes),
      layout_(space_.mesh, quad_order) {
  if (!geom_.has_channel()) throw ConfigError("CoupledWorkspace: channel geometry required");
  if (geom_.curve().weingarten(0.0) != 0.0)
    throw ConfigError("CoupledWorkspace: the coupled solver requires the flat channel");
  constants_.shell.validate();

  stiffness_2k_ = koiter_stiffness_2k(constants_.shell, geom_.curve(), *shell_);
  shell_mass_ = shell_->mass();

  ext0_ = std::make_shared<ShellExtensionOperator>(space_, geom_, *shell_,
                                                   std::make_shared<ZeroShellField>(), quad_order);

  if (n_fluid_ > 0) {
    ZeroShellField zero;
    MovingForms fixed = assemble_moving_forms(space_, geom_, zero, nullptr, nullptr, quad_order);
    std::vector<BoundaryTag> zero_trace{BoundaryTag::M};
    if (noslip_bottom) zero_trace.push_back(BoundaryTag::Bottom);
    MatrixX Z = divfree_nullspace(space_, fixed.div, zero_trace);
    if (Z.cols() < n_fluid_)
      throw ConfigError("CoupledWorkspace: null space smaller than the requested mode count");
    // order by the Stokes-type generalized eigenproblem on the null space
    MatrixX Av = Z.transpose() * MatrixX(fixed.visc) * Z;
    MatrixX Bv = Z.transpose() * MatrixX(fixed.mass) * Z;
    Eigen::GeneralizedSelfAdjointEigenSolver<MatrixX> es(Av, Bv);
    for (int k = 0; k < n_fluid_; ++k) {
      VectorX mode = Z * es.eigenvectors().col(k);
      const double m = std::sqrt(mode.dot(fixed.mass * mode));
      interior_.push_back(mode / m);
    }
  }

  const int n = n_modes();
  val_.resize(n);
  jac_.resize(n);
  for (int k = 0; k < n; ++k) {
    val_[k].resize(layout_.size());
    jac_[k].resize(layout_.size());
    for (std::size_t i = 0; i < layout_.size(); ++i) {
      val_[k][i] = ref_value_at(k, layout_.points[i]);
      jac_[k][i] = ref_jacobian_at(k, layout_.points[i]);
    }
  }
}

Vec2 CoupledWorkspace::ref_value_at(int k, const Vec2& x) const {
  if (k < n_shell_modes()) return ext0_->mode(k).value(x);
  return space_.eval_velocity(interior_[k - n_shell_modes()], x);
}

Mat2 CoupledWorkspace::ref_jacobian_at(int k, const Vec2& x) const {
  if (k < n_shell_modes()) return ext0_->mode(k).jacobian(x);
  return space_.eval_velocity_gradient(interior_[k - n_shell_modes()], x);
}

Vec2 CoupledWorkspace::transported_fluid_value(int k, const ShellField& delta,
                                               const Vec2& x) const {
  const MovingJacobian J = geom_.hanzawa_jacobian(delta, x);
  return (J.dpsi / J.det) * ref_value_at(k, x);
}

double CoupledWorkspace::transported_shell_value(int k, const ShellField& delta, double q) const {
  if (k >= n_shell_modes()) return 0.0;
  const MovingJacobian J = geom_.hanzawa_jacobian(delta, geom_.curve().point(q));
  const double g = geom_.boundary_factor(delta, q);
  return g / J.det * shell_->value(k, q);
}

double CoupledWorkspace::basis_trace_residual(const ShellField& delta) const {
  double worst = 0.0;
  const auto& quad = shell_->quadrature();
  const double H = geom_.channel_height();
  for (std::size_t i = 0; i < quad.points.size(); i += 3) {
    const double q = quad.points[i];
    const Vec2 nu = geom_.curve().normal(q);
    for (int k = 0; k < n_modes(); ++k) {
      const Vec2 tr = transported_fluid_value(k, delta, Vec2(q, H));
      const double wk = transported_shell_value(k, delta, q);
      worst = std::max(worst, (tr - wk * nu).norm());
    }
  }
  return worst;
}

VelocityGrid::VelocityGrid(double L, double ymax, int nx, int ny, double dt, int steps)
    : L_(L), ymax_(ymax), dt_(dt), nx_(nx), ny_(ny), steps_(steps) {
  data_.assign(static_cast<std::size_t>(steps + 1) * (nx + 1) * (ny + 1), Vec2::Zero());
}

Vec2& VelocityGrid::at(int step, int i, int j) {
  return data_[(static_cast<std::size_t>(step) * (nx_ + 1) + i) * (ny_ + 1) + j];
}
const Vec2& VelocityGrid::at(int step, int i, int j) const {
  return data_[(static_cast<std::size_t>(step) * (nx_ + 1) + i) * (ny_ + 1) + j];
}

Vec2 VelocityGrid::eval(double t, const Vec2& y) const {
  if (empty()) return Vec2::Zero();
  if (t < 0.0 || t > dt_ * steps_) return Vec2::Zero();
  if (y[0] < 0.0 || y[0] > L_ || y[1] < 0.0 || y[1] > ymax_) return Vec2::Zero();
  const int n0 = std::min(static_cast<int>(t / dt_), steps_ - 1);
  const double wt = (t - n0 * dt_) / dt_;
  const double gx = y[0] / hx(), gy = y[1] / hy();
  const int i = std::min(static_cast<int>(gx), nx_ - 1);
  const int j = std::min(static_cast<int>(gy), ny_ - 1);
  const double fx = gx - i, fy = gy - j;
  auto bilinear = [&](int step) {
    return ((1 - fx) * (1 - fy) * at(step, i, j) + fx * (1 - fy) * at(step, i + 1, j) +
            (1 - fx) * fy * at(step, i, j + 1) + fx * fy * at(step, i + 1, j + 1))
        .eval();
  };
  return (1.0 - wt) * bilinear(n0) + wt * bilinear(n0 + 1);
}

void VelocityGrid::relax(double omega, const VelocityGrid& target) {
  for (std::size_t i = 0; i < data_.size(); ++i)
    data_[i] = (1.0 - omega) * data_[i] + omega * target.data_[i];
}

double VelocityGrid::l2_space_time_diff(const VelocityGrid& other) const {
  const double cell = hx() * hy();
  double acc = 0.0;
  const int steps = std::min(steps_, other.steps_);
  for (int s = 0; s <= steps; ++s) {
    double slice = 0.0;
    for (int i = 0; i <= nx_; ++i)
      for (int j = 0; j <= ny_; ++j) slice += (at(s, i, j) - other.at(s, i, j)).squaredNorm();
    acc += ((s == 0 || s == steps) ? 0.5 : 1.0) * dt_ * cell * slice;
  }
  return std::sqrt(acc);
}

double VelocityGrid::l2_space_time_norm() const {
  VelocityGrid zero(L_, ymax_, nx_, ny_, dt_, steps_);
  return l2_space_time_diff(zero);
}

AdaptedInitialData adapt_initial_data(const CoupledWorkspace& ws, const InitialData& data,
                                      const DisplacementMollifier& delta_eps) {
  const Geometry& geom = ws.geometry();
  const ShellBasis& basis = ws.shell();
  const double L = geom.channel_length(), H = geom.channel_height();
  const PhysicalConstants& pc = ws.constants();

  auto eta0 = std::make_shared<BasisShellField>(basis, data.eta0);
  auto eta1 = std::make_shared<BasisShellField>(basis, data.eta1);
  const auto slice0 = delta_eps.slice(0.0);

  for (int i = 0; i <= 256; ++i) {
    const double q = L * i / 256;
    if (slice0.value(q) < eta0->value(q))
      throw AdmissibilityError(
          "adapt_initial_data: eps too large, the regularized initial domain does not contain "
          "Omega_{eta0}");
  }

  AdaptedInitialData out;

  // eta_1^eps carries the fiber transport factor from eta_0 up to R_eps delta(0)
  out.eta1_eps = basis.project(AnalyticShellField(
      [&](double q) { return tube_exp_factor(geom, *eta0, q, slice0.value(q)) * eta1->value(q); },
      [](double) { return 0.0; }, [](double) { return 0.0; }));

  // unadapted u0: extension of eta1 at eta0 plus transported interior modes
  auto ext = std::make_shared<ShellExtensionOperator>(ws.space(), geom, basis, eta0, 4);
  const VectorX eta1c = data.eta1;
  const VectorX inter = data.u0_interior;
  const CoupledWorkspace* wsp = &ws;
  auto u0 = [ext, eta1c, inter, wsp, eta0](const Vec2& y) {
    const Geometry& g = wsp->geometry();
    Vec2 v = ext->value(eta1c, y);
    if (inter.size() > 0) {
      const Vec2 x = g.hanzawa_inverse(*eta0, y);
      const MovingJacobian J = g.hanzawa_jacobian(*eta0, x);
      for (int k = 0; k < inter.size(); ++k)
        if (inter[k] != 0.0)
          v += inter[k] * (J.dpsi / J.det) * wsp->ref_value_at(wsp->n_shell_modes() + k, x);
    }
    return v;
  };
  out.u0_phys = u0;

  const double kappa = geom.kappa();
  auto slice0_field = std::make_shared<DisplacementMollifier::Slice>(slice0);
  out.u0_eps_phys = [u0, eta0, eta1, slice0_field, wsp, kappa, H](const Vec2& y) {
    const Geometry& g = wsp->geometry();
    const double s = y[1] - H;  // flat channel tube coordinate
    if (s <= -kappa) return u0(y);
    const double q = y[0];
    if (s <= eta0->value(q)) return u0(y);
    if (s <= slice0_field->value(q) + 1e-14)
      return (tube_exp_factor(g, *eta0, q, s) * eta1->value(q) * g.curve().normal(q)).eval();
    return Vec2::Zero().eval();
  };

  out.u0_norm = std::sqrt(
      moving_integral(geom, *eta0, [&](const Vec2& y) { return u0(y).squaredNorm(); }, 5, 8));
  out.u0_eps_norm = std::sqrt(moving_integral(
      geom, slice0, [&](const Vec2& y) { return out.u0_eps_phys(y).squaredNorm(); }, 5, 8));
  // the adapted field agrees with u0 on Omega_{eta0}: the L2 difference lives
  // on the gap, integrated fiber by fiber
  out.u0_diff = std::sqrt(oracle::quad_integral_1d(
      [&](double q) {
        const double a = eta0->value(q), b = slice0.value(q);
        if (b <= a) return 0.0;
        return oracle::quad_integral_1d(
            [&](double s) {
              return std::pow(tube_exp_factor(geom, *eta0, q, s) * eta1->value(q), 2);
            },
            a, b, 6, 1);
      },
      0.0, L, 8, 16));

  const auto& quad = basis.quadrature();
  double n1 = 0.0, n1e = 0.0, nd = 0.0;
  BasisShellField eta1e(basis, out.eta1_eps);
  for (std::size_t i = 0; i < quad.points.size(); ++i) {
    const double q = quad.points[i], w = quad.weights[i];
    n1 += w * std::pow(eta1->value(q), 2);
    n1e += w * std::pow(eta1e.value(q), 2);
    nd += w * std::pow(eta1e.value(q) - eta1->value(q), 2);
  }
  out.eta1_norm = std::sqrt(n1);
  out.eta1_eps_norm = std::sqrt(n1e);
  out.eta1_diff = std::sqrt(nd);

  // gamma-weighted compatibility pairing against every basis mode
  double rc = 0.0;
  for (int k = 0; k < basis.n_modes(); ++k) {
    double lhs = 0.0, rhs = 0.0;
    for (std::size_t i = 0; i < quad.points.size(); ++i) {
      const double q = quad.points[i], w = quad.weights[i];
      const Vec2 y(q, H + eta0->value(q));
      lhs += w * u0(y).dot(geom.pseudonormal(*eta0, q)) * basis.value(k, q);
      rhs += w * eta1->value(q) * geom.gamma(*eta0, q) * basis.value(k, q);
    }
    rc = std::max(rc, std::abs(lhs - rhs));
  }
  out.compatibility_residual = rc;

  const double es_rs = pc.shell.thickness_half * pc.shell.shell_density;
  const double K0 = 0.5 * data.eta0.dot(ws.stiffness_2k() * data.eta0);
  out.e0_data = 0.5 * pc.rho * out.u0_eps_norm * out.u0_eps_norm +
                es_rs * out.eta1_eps_norm * out.eta1_eps_norm + K0;
  return out;
}

std::shared_ptr<ShellTrajectory> DecoupledResult::eta_trajectory(const ShellBasis& basis) const {
  std::vector<VectorX> samples = eta;
  const double dt = times.size() > 1 ? times[1] - times[0] : 1.0;
  return std::make_shared<ShellTrajectory>(basis, dt, std::move(samples));
}

DecoupledResult solve_decoupled(const CoupledWorkspace& ws, const TimeGrid& grid,
                                const SolverParams& params, const ForcingSpec& forcing,
                                const InitialData& data,
                                std::shared_ptr<const ShellTrajectory> delta,
                                const VelocityGrid& v, double eps) {
  const int n = ws.n_modes();
  const int ns = ws.n_shell_modes();
  const PhysicalConstants& pc = ws.constants();
  const double es_rs = pc.shell.thickness_half * pc.shell.shell_density;
  const Geometry& geom = ws.geometry();
  const double dt = grid.dt;

  if (!params.include_fluid && ws.n_fluid_modes() != 0)
    throw ConfigError("solve_decoupled: the shell-only reduction requires n_fluid_modes == 0");

  DisplacementMollifier delta_eps(delta, eps);
  const double cap = std::min(0.5 * (geom.alpha() + geom.kappa()), 0.95 * geom.monotone_bound());
  if (delta_eps.sup_norm(grid.T()) >= cap)
    throw AdmissibilityError("solve_decoupled: ||R_eps delta||_inf exceeds the admissible cap");

  AdaptedInitialData adapted = adapt_initial_data(ws, data, delta_eps);

  std::unique_ptr<VelocityMollifier> transport;
  if (params.include_fluid && !v.empty())
    transport = std::make_unique<VelocityMollifier>(
        SpaceTimeVelocity{[&v](double t, const Vec2& y) { return v.eval(t, y); }}, eps);

  MatrixX Sext = MatrixX::Zero(n, n);
  Sext.topLeftCorner(ns, ns) = ws.stiffness_2k();

  DecoupledResult out;
  out.ledger.e0_data = adapted.e0_data;

  // initial modal coefficients: projection of (eta1^eps, u0^eps) in the
  // inertia inner product (Mf + 2 eps_s rho_s Ms)
  StepMatrices S0 = assemble_step(ws, params, 0.0, delta_eps, nullptr, forcing, /*light=*/true);
  VectorX rhs0 = VectorX::Zero(n);
  if (params.include_fluid) {
    const QuadratureLayout& layout = ws.layout();
    const auto slice = delta_eps.slice(0.0);
    const CachedShellField d0(slice);
    for (std::size_t i = 0; i < layout.size(); ++i) {
      const MovingJacobian J = geom.hanzawa_jacobian(d0, layout.points[i]);
      const Vec2 y = geom.hanzawa(d0, layout.points[i]);
      const Vec2 u0v = adapted.u0_eps_phys(y);
      const double wdet = layout.weights[i] * J.det;
      const Mat2 P = J.dpsi / J.det;
      for (int k = 0; k < n; ++k) rhs0[k] += pc.rho * wdet * u0v.dot(P * ws.ref_value(k, i));
    }
  }
  {
    const auto& quad = ws.shell().quadrature();
    BasisShellField eta1e(ws.shell(), adapted.eta1_eps);
    for (std::size_t i = 0; i < quad.points.size(); ++i) {
      const double q = quad.points[i], w = quad.weights[i];
      for (int j = 0; j < ns; ++j)
        rhs0[j] += 2.0 * es_rs * w * eta1e.value(q) * ws.shell().value(j, q);
    }
  }
  VectorX alpha = S0.A.ldlt().solve(rhs0);
  VectorX e = data.eta0;

  auto eta_sup = [&](const VectorX& ec) {
    BasisShellField f(ws.shell(), ec);
    return f.sup_norm(0.0, ws.shell().length(), 256);
  };

  auto make_row = [&](double t, const StepMatrices& S, const VectorX& a, const VectorX& ec,
                      double dissipation, double env_int) {
    EnergyLedgerRow row;
    row.t = t;
    row.e_kin_fluid = params.include_fluid ? 0.5 * pc.rho * a.dot(S.Mf * a) : 0.0;
    row.dissipation_cum = dissipation;
    const VectorX as = a.head(ns);
    row.e_kin_shell = es_rs * as.dot(ws.shell_mass() * as);
    row.e_koiter = 0.5 * ec.dot(ws.stiffness_2k() * ec);
    row.e_total = row.e_kin_fluid + row.dissipation_cum + row.e_kin_shell + row.e_koiter;
    const double env_sqrt = std::sqrt(std::max(0.0, out.ledger.e0_data)) + env_int;
    row.groenwall_envelope = env_sqrt * env_sqrt;
    return row;
  };

  double dissipation = 0.0, env_int = 0.0;
  double env_rate_prev = S0.f_l2 / std::sqrt(2.0 * pc.rho) + S0.g_l2 / (2.0 * std::sqrt(es_rs));
  out.times.push_back(0.0);
  out.alpha.push_back(alpha);
  out.eta.push_back(e);
  out.max_eta_sup = eta_sup(e);
  out.ledger.rows.push_back(make_row(0.0, S0, alpha, e, 0.0, 0.0));
  double e_prev_total = out.ledger.rows.back().e_total;

  for (int step = 0; step < grid.steps; ++step) {
    const double t_half = (step + 0.5) * dt;
    StepMatrices S =
        assemble_step(ws, params, t_half, delta_eps, transport.get(), forcing, /*light=*/false);

    MatrixX lhs = S.A / dt + 0.5 * S.G + (dt / 4.0) * Sext;
    VectorX ext_e = VectorX::Zero(n);
    ext_e.head(ns) = e;
    VectorX rhs = (S.A / dt - 0.5 * S.G) * alpha - Sext * (ext_e + (dt / 4.0) * alpha) + S.b;

    Eigen::PartialPivLU<MatrixX> lu(lhs);
    const VectorX alpha_new = lu.solve(rhs);
    const double res = (lhs * alpha_new - rhs).norm() / std::max(1.0, rhs.norm());
    if (!(res <= 1e-10))
      throw SolverError("step_linearized: linear solve residual " + std::to_string(res));
    out.max_solve_residual = std::max(out.max_solve_residual, res);

    VectorX e_new = e + (dt / 2.0) * (alpha.head(ns) + alpha_new.head(ns));

    const VectorX alpha_mid = 0.5 * (alpha + alpha_new);
    dissipation += dt * 2.0 * pc.sigma * alpha_mid.dot(S.Visc * alpha_mid);
    const double work_inc = dt * alpha_mid.dot(S.b);

    const double t_new = (step + 1) * dt;
    StepMatrices Sn =
        assemble_step(ws, params, t_new, delta_eps, nullptr, forcing, /*light=*/true);
    const double env_rate = Sn.f_l2 / std::sqrt(2.0 * pc.rho) + Sn.g_l2 / (2.0 * std::sqrt(es_rs));
    env_int += 0.5 * dt * (env_rate_prev + env_rate);
    env_rate_prev = env_rate;

    alpha = alpha_new;
    e = e_new;
    out.times.push_back(t_new);
    out.alpha.push_back(alpha);
    out.eta.push_back(e);

    EnergyLedgerRow row = make_row(t_new, Sn, alpha, e, dissipation, env_int);
    row.defect = row.e_total - e_prev_total - work_inc;
    e_prev_total = row.e_total;
    out.ledger.rows.push_back(row);

    const double sup = eta_sup(e);
    out.max_eta_sup = std::max(out.max_eta_sup, sup);
    if (sup > params.alpha_cap)
      throw HorizonExceeded("step_linearized: ||eta||_inf = " + std::to_string(sup) +
                            " crossed the alpha cap at t = " + std::to_string(t_new));

    if (params.include_fluid) {
      // compatibility trace and discrete divergence after the step
      const auto slice = delta_eps.slice(t_new);
      const CachedShellField dl(slice);
      double tr_res = 0.0;
      const double H = geom.channel_height();
      for (int i = 0; i <= 16; ++i) {
        const double q = ws.shell().length() * i / 16;
        Vec2 ufl = Vec2::Zero();
        for (int k = 0; k < n; ++k)
          ufl += alpha[k] * ws.transported_fluid_value(k, dl, Vec2(q, H));
        double wsh = 0.0;
        for (int k = 0; k < ns; ++k) wsh += alpha[k] * ws.transported_shell_value(k, dl, q);
        tr_res = std::max(tr_res, (ufl - wsh * geom.curve().normal(q)).norm());
      }
      out.max_trace_residual = std::max(out.max_trace_residual, tr_res);

      if (step % 4 == 0 || step == grid.steps - 1) {
        const QuadratureLayout& layout = ws.layout();
        const ReferenceMesh& mesh = ws.space().mesh;
        VectorX r = VectorX::Zero(ws.space().n_pdofs());
        int pn[4];
        for (std::size_t i = 0; i < layout.size(); ++i) {
          const MovingJacobian J = geom.hanzawa_jacobian(dl, layout.points[i]);
          const PiolaData P = geom.piola_data(J);
          const Mat2 dpsi_inv = J.dpsi.inverse();
          Mat2 g_sum = Mat2::Zero();
          for (int k = 0; k < n; ++k) {
            if (alpha[k] == 0.0) continue;
            const Vec2& vv = ws.ref_value(k, i);
            const Mat2& jr = ws.ref_jacobian(k, i);
            Mat2 gx;
            gx.col(0) = P.dP_dx0 * vv + P.P * jr.col(0);
            gx.col(1) = P.dP_dx1 * vv + P.P * jr.col(1);
            g_sum += alpha[k] * (gx * dpsi_inv);
          }
          const double s = layout.weights[i] * J.det * g_sum.trace();
          const int c = layout.cell_of[i];
          mesh.cell_pnodes(c, pn);
          const int cx = c % mesh.nx, cy = c / mesh.nx;
          const double tx = (layout.points[i][0] - cx * mesh.hx()) / mesh.hx();
          const double ty = (layout.points[i][1] - cy * mesh.hy()) / mesh.hy();
          r[pn[0]] += s * fem::q1(0, tx) * fem::q1(0, ty);
          r[pn[1]] += s * fem::q1(1, tx) * fem::q1(0, ty);
          r[pn[2]] += s * fem::q1(0, tx) * fem::q1(1, ty);
          r[pn[3]] += s * fem::q1(1, tx) * fem::q1(1, ty);
        }
        out.max_div_residual = std::max(out.max_div_residual, r.norm());
      }
    }
  }
  return out;
}

namespace {

std::shared_ptr<ShellTrajectory> constant_trajectory(const ShellBasis& basis, const VectorX& c,
                                                     const TimeGrid& grid) {
  std::vector<VectorX> samples(grid.steps + 1, c);
  return std::make_shared<ShellTrajectory>(basis, grid.dt, std::move(samples));
}

}  // namespace

VelocityGrid sample_velocity(const CoupledWorkspace& ws, const DecoupledResult& sol,
                             const DisplacementMollifier& geom_of_sol, double L, double ymax,
                             int nx, int ny) {
  const Geometry& geom = ws.geometry();
  const double H = geom.channel_height();
  const double kappa = geom.kappa();
  const int steps = static_cast<int>(sol.times.size()) - 1;
  const double dt = steps > 0 ? sol.times[1] - sol.times[0] : 1.0;
  VelocityGrid grid(L, ymax, nx, ny, dt, steps);
  for (int s = 0; s <= steps; ++s) {
    const auto slice = geom_of_sol.slice(sol.times[s]);
    const CachedShellField dl(slice);
    for (int i = 0; i <= nx; ++i)
      for (int j = 0; j <= ny; ++j) {
        const Vec2 y(i * grid.hx(), j * grid.hy());
        const double sy = y[1] - H;
        Vec2 val = Vec2::Zero();
        if (y[1] >= 0.0 && (sy <= -kappa || sy <= dl.value(y[0]))) {
          const Vec2 x = geom.hanzawa_inverse(dl, y);
          const MovingJacobian J = geom.hanzawa_jacobian(dl, x);
          const Mat2 P = J.dpsi / J.det;
          for (int k = 0; k < ws.n_modes(); ++k)
            if (sol.alpha[s][k] != 0.0) val += sol.alpha[s][k] * (P * ws.ref_value_at(k, x));
        }
        grid.at(s, i, j) = val;
      }
  }
  return grid;
}

PicardResult picard_couple(const CoupledWorkspace& ws, const TimeGrid& grid_in,
                           const SolverParams& params, const PicardParams& picard,
                           const ForcingSpec& forcing, const InitialData& data, double eps) {
  const Geometry& geom = ws.geometry();
  const double L = geom.channel_length(), H = geom.channel_height();
  const int gnx = 2 * ws.space().mesh.nx;
  const int gny = static_cast<int>(std::lround(2 * ws.space().mesh.ny * (H + geom.kappa()) / H));
  const double ymax = H + geom.kappa();

  TimeGrid grid = grid_in;
  for (int bisection = 0; bisection <= picard.horizon_bisections; ++bisection) {
    auto delta = constant_trajectory(ws.shell(), data.eta0, grid);
    VelocityGrid v(L, ymax, gnx, gny, grid.dt, grid.steps);

    PicardResult out;
    out.horizon = grid.T();
    try {
      for (int it = 0; it < picard.max_iters; ++it) {
        DecoupledResult sol = solve_decoupled(ws, grid, params, forcing, data, delta, v, eps);
        DisplacementMollifier dm(delta, eps);
        VelocityGrid u_grid = sample_velocity(ws, sol, dm, L, ymax, gnx, gny);

        auto eta_traj = sol.eta_trajectory(ws.shell());
        std::vector<VectorX> mixed(grid.steps + 1);
        double sup_diff = 0.0;
        for (int s = 0; s <= grid.steps; ++s) {
          mixed[s] =
              (1.0 - picard.omega) * delta->sample(s) + picard.omega * eta_traj->sample(s);
          BasisShellField diff(ws.shell(), (mixed[s] - delta->sample(s)).eval());
          sup_diff = std::max(sup_diff, diff.sup_norm(0.0, L, 128));
        }
        VelocityGrid v_new = v;
        v_new.relax(picard.omega, u_grid);
        const double total = sup_diff + v_new.l2_space_time_diff(v);
        out.diffs.push_back(total);
        out.iterations = it + 1;

        delta = std::make_shared<ShellTrajectory>(ws.shell(), grid.dt, std::move(mixed));
        v = v_new;
        out.solution = std::move(sol);
        if (total <= picard.tol) {
          out.converged = true;
          break;
        }
      }
      std::vector<VectorX> samples;
      for (int i = 0; i <= grid.steps; ++i) samples.push_back(delta->sample(i));
      out.delta = std::make_shared<ShellTrajectory>(ws.shell(), grid.dt, std::move(samples));
      out.v = v;
      return out;
    } catch (const HorizonExceeded&) {
      if (bisection == picard.horizon_bisections) throw;
      grid.steps = std::max(1, grid.steps / 2);  // halve T, keep dt
    }
  }
  throw SolverError("picard_couple: horizon bisection exhausted");
}

double determine_eps0(const CoupledWorkspace& ws, const VectorX& eta0, double T, double cap) {
  const Geometry& geom = ws.geometry();
  const double alpha = geom.alpha(), kappa = geom.kappa();
  double emax = cap;
  emax = std::min(emax, std::pow(0.5 * (kappa - alpha), 2));
  const double safe = 0.95 * geom.monotone_bound() - alpha;
  if (safe <= 0.0) throw ConfigError("determine_eps0: alpha leaves no admissible mollifier range");
  emax = std::min(emax, safe * safe);

  auto tptr = std::make_shared<ShellTrajectory>(ShellTrajectory::constant(ws.shell(), eta0, T, 4));
  BasisShellField e0(ws.shell(), eta0);
  auto dominated = [&](double eps) {
    DisplacementMollifier R(tptr, eps);
    for (int i = 0; i <= 128; ++i) {
      const double q = ws.shell().length() * i / 128;
      if (R.value(0.0, q) <= e0.value(q)) return false;
    }
    return true;
  };
  if (dominated(emax)) return emax;
  double lo = 1e-8, hi = emax;
  if (!dominated(lo))
    throw AdmissibilityError("determine_eps0: no admissible eps found for this eta0");
  for (int it = 0; it < 40; ++it) {
    const double mid = 0.5 * (lo + hi);
    (dominated(mid) ? lo : hi) = mid;
  }
  return lo;
}

ContinuationResult epsilon_continuation(const CoupledWorkspace& ws, const TimeGrid& grid,
                                        const SolverParams& params, const PicardParams& picard,
                                        const ForcingSpec& forcing, const InitialData& data,
                                        double eps0, int n_levels) {
  ContinuationResult out;
  out.all_converged = true;
  BasisShellField eta0(ws.shell(), data.eta0);
  for (int lev = 0; lev < n_levels; ++lev) {
    ContinuationLevel level;
    level.eps = eps0 / std::pow(2.0, lev);
    level.result = picard_couple(ws, grid, params, picard, forcing, data, level.eps);
    out.all_converged = out.all_converged && level.result.converged;

    DisplacementMollifier R(level.result.delta, level.eps);
    level.shift_dominates = true;
    for (int i = 0; i <= 128; ++i) {
      const double q = ws.shell().length() * i / 128;
      if (R.value(0.0, q) <= eta0.value(q)) level.shift_dominates = false;
    }

    if (lev > 0) {
      const auto& prev = out.levels.back().result;
      const int steps = static_cast<int>(std::min(prev.solution.times.size(),
                                                  level.result.solution.times.size())) -
                        1;
      double sup = 0.0;
      for (int s = 0; s <= steps; ++s) {
        BasisShellField diff(ws.shell(),
                             (level.result.solution.eta[s] - prev.solution.eta[s]).eval());
        sup = std::max(sup, diff.sup_norm(0.0, ws.shell().length(), 128));
      }
      level.diff_eta_prev = sup;
      level.diff_u_prev = level.result.v.l2_space_time_diff(prev.v);
    }
    const bool converged = level.result.converged;
    out.levels.push_back(std::move(level));
    if (!converged) break;  // partial table with failure marker
  }
  return out;
}

}  // namespace kfsi
