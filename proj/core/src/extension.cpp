#include "kfsi/extension.hpp"

#include <cmath>

namespace kfsi {

namespace {

double div_nu(double W, double tau) { return W / (1.0 + tau * W); }

}  // namespace

double tube_exp_factor(const Geometry& geom, const ShellField& eta, double q, double s,
                       int fiber_points) {
  const double W = geom.curve().weingarten(q);
  if (W == 0.0) return 1.0;  // flat edge: exactly no transport decay
  const double a = eta.value(q);
  auto quad = gauss_on_interval(a, s, fiber_points);
  double acc = 0.0;
  for (std::size_t i = 0; i < quad.points.size(); ++i)
    acc += quad.weights[i] * div_nu(W, quad.points[i]);
  return std::exp(-acc);
}

Vec2 tube_extension_value(const Geometry& geom, const ShellField& eta, const ShellField& b,
                          const Vec2& x, int fiber_points) {
  auto [q, s] = geom.tube_coords(x);
  return tube_exp_factor(geom, eta, q, s, fiber_points) * b.value(q) * geom.curve().normal(q);
}

Mat2 tube_extension_jacobian(const Geometry& geom, const ShellField& eta, const ShellField& b,
                             const Vec2& x, int fiber_points) {
  auto [q, s] = geom.tube_coords(x);
  const ShellCurve& curve = geom.curve();
  const double W = curve.weingarten(q), Wp = curve.weingarten_d1(q);
  const Vec2 e1 = curve.tangent(q), nu = curve.normal(q);
  const double fiber = 1.0 + s * W;
  const double A = tube_exp_factor(geom, eta, q, s, fiber_points);
  const double bv = b.value(q), bp = b.d1(q);
  const double ev = eta.value(q), ep = eta.d1(q);

  // dq/dx = e1 / (1 + sW), ds/dx = nu
  const Vec2 grad_q = e1 / fiber;
  const Vec2 grad_s = nu;

  // d/dq of the fiber integral: integrand depends on q through W(q) only
  double int_dq = 0.0;
  if (Wp != 0.0) {
    auto quad = gauss_on_interval(ev, s, fiber_points);
    for (std::size_t i = 0; i < quad.points.size(); ++i) {
      const double tau = quad.points[i];
      int_dq += quad.weights[i] * Wp / ((1.0 + tau * W) * (1.0 + tau * W));
    }
  }
  // d(factor)/d(q,s): lower limit moves with eta(q), upper with s
  const double dA_dq = A * (-int_dq + div_nu(W, ev) * ep);
  const double dA_ds = A * (-div_nu(W, s));

  const Vec2 d_bnu_dq = bp * nu + bv * W * e1;  // d/dq of (b nu)(q)
  Mat2 Jc = Mat2::Zero();
  for (int m = 0; m < 2; ++m) {
    const Vec2 col = (dA_dq * grad_q[m] + dA_ds * grad_s[m]) * bv * nu +
                     A * d_bnu_dq * grad_q[m];
    Jc.col(m) = col;
  }
  return Jc;
}

Vec2 tube_extension_dt(const Geometry& geom, const ShellField& eta, const ShellField& b,
                       const ShellField& b_t, const ShellField& eta_t, const Vec2& x,
                       int fiber_points) {
  auto [q, s] = geom.tube_coords(x);
  (void)s;
  const double W = geom.curve().weingarten(q);
  const double A = tube_exp_factor(geom, eta, q, s, fiber_points);
  const Vec2 nu = geom.curve().normal(q);
  // dt F = A [ (dt b) nu + (b nu) div(nu o q)(q + eta nu) dt eta ]
  return A * (b_t.value(q) + b.value(q) * div_nu(W, eta.value(q)) * eta_t.value(q)) * nu;
}

double compensation_profile(double x, double L) {
  const double lo = L / 3.0, hi = 2.0 * L / 3.0;
  if (x <= lo || x >= hi) return 0.0;
  const double u = (x - lo) / (hi - lo);
  const double bump = std::pow(u * (1.0 - u), 3);
  // unit integral: int_0^1 (u(1-u))^3 du = 1/140, stretched by (hi - lo)
  return bump * 140.0 / (hi - lo);
}

Vec2 ExtendedShellVelocity::value(const Vec2& x) const {
  if (x[1] >= interface_y_ - 1e-14) return tube_extension_value(*geom_, *eta_, *b_, x);
  return lift_space_->eval_velocity(lift_u_, x);
}

Mat2 ExtendedShellVelocity::jacobian(const Vec2& x) const {
  if (x[1] >= interface_y_ - 1e-14) return tube_extension_jacobian(*geom_, *eta_, *b_, x);
  return lift_space_->eval_velocity_gradient(lift_u_, x);
}

ShellExtensionOperator::ShellExtensionOperator(const MixedSpace& global_space,
                                               const Geometry& geom, const ShellBasis& basis,
                                               std::shared_ptr<const ShellField> eta, int order)
    : geom_(&geom), eta_(std::move(eta)), order_(order) {
  geom.require_admissible(*eta_);
  const ReferenceMesh& gm = global_space.mesh;
  const double iface = geom.channel_height() - geom.alpha();
  const double rows = iface / gm.hy();
  const int ny_low = static_cast<int>(std::lround(rows));
  if (std::abs(rows - ny_low) > 1e-12 || ny_low < 1)
    throw ConfigError("extension: 1 - alpha must coincide with a mesh line");

  lift_space_ = std::make_shared<MixedSpace>(ReferenceMesh(gm.nx, ny_low, gm.L, iface));
  ZeroShellField zero;
  Geometry lift_geom = make_channel_geometry(gm.L, iface, 0.4 * iface, 0.1 * iface);
  MovingForms forms = assemble_moving_forms(*lift_space_, lift_geom, zero, nullptr, nullptr, order_);
  lift_visc_ = std::make_shared<SpMat>(std::move(forms.visc));
  lift_div_ = std::make_shared<SpMat>(std::move(forms.div));

  for (int k = 0; k < basis.n_modes(); ++k) {
    VectorX unit = VectorX::Zero(basis.n_modes());
    unit[k] = 1.0;
    modes_.push_back(build(std::make_shared<BasisShellField>(basis, unit)));
  }
}

ExtendedShellVelocity ShellExtensionOperator::build(std::shared_ptr<const ShellField> b) const {
  ExtendedShellVelocity f;
  f.geom_ = geom_;
  f.eta_ = eta_;
  f.b_ = b;
  f.lift_space_ = lift_space_;
  f.interface_y_ = geom_->channel_height() - geom_->alpha();

  const ReferenceMesh& lm = lift_space_->mesh;
  const double L = lm.L;
  const double s_if = -geom_->alpha();  // tube coordinate of the interface line

  // flux of the tube field through M_-^alpha (outer normal of S_alpha there is
  // -nu; the offset line carries the metric factor 1 + s W)
  auto qf = composite_gauss(0.0, L, 4 * lm.nx, 8);
  double flux = 0.0;
  for (std::size_t i = 0; i < qf.points.size(); ++i) {
    const double q = qf.points[i];
    const double W = geom_->curve().weingarten(q);
    const double metric = 1.0 + s_if * W;
    flux += qf.weights[i] * (-1.0) * tube_exp_factor(*geom_, *eta_, q, s_if) * b->value(q) * metric;
  }
  f.flux_ = flux;

  // exact trace integral of a Q2 edge interpolant: Simpson weights per cell edge
  const int n_edge = 2 * lm.nx + 1;
  std::vector<double> edge_w(n_edge, 0.0);
  for (int c = 0; c < lm.nx; ++c) {
    edge_w[2 * c] += lm.hx() / 6.0;
    edge_w[2 * c + 1] += 4.0 * lm.hx() / 6.0;
    edge_w[2 * c + 2] += lm.hx() / 6.0;
  }

  // nodal data and its discrete boundary fluxes; the patch amplitude is
  // normalized so the interpolated data carries exactly zero net flux
  std::vector<Vec2> top_data(n_edge), patch_shape(n_edge);
  double flux_top = 0.0, patch_mass = 0.0;
  for (int i = 0; i < n_edge; ++i) {
    const double x = 0.5 * lm.hx() * i;
    top_data[i] = tube_extension_value(*geom_, *eta_, *b, Vec2(x, lm.H));
    flux_top += edge_w[i] * top_data[i][1];
    const double mu = compensation_profile(x, L);
    patch_shape[i] = mu * Vec2(0.0, -1.0);
    patch_mass += edge_w[i] * mu;
  }
  const double amplitude = -flux_top / patch_mass;  // == flux up to quadrature

  std::vector<int> ddofs;
  std::vector<double> vals;
  for (int n = 0; n < lm.n_vnodes(); ++n) {
    const bool top = lm.vnode_on(BoundaryTag::M, n);
    const bool bottom = lm.vnode_on(BoundaryTag::Bottom, n);
    const bool lateral = lm.vnode_on(BoundaryTag::Inlet, n) || lm.vnode_on(BoundaryTag::Outlet, n);
    if (!(top || bottom || lateral)) continue;
    Vec2 v = Vec2::Zero();
    const int i = n % n_edge;
    if (top)
      v = top_data[i];
    else if (bottom)
      v = amplitude * patch_shape[i];
    for (int c = 0; c < 2; ++c) {
      ddofs.push_back(lift_space_->udof(n, c));
      vals.push_back(v[c]);
    }
  }

  SaddleProblem prob;
  prob.A = lift_visc_.get();
  prob.B = lift_div_.get();
  prob.dirichlet_dofs = ddofs;
  prob.dirichlet_values = Eigen::Map<VectorX>(vals.data(), vals.size());
  prob.pin_pressure_mean = true;
  SaddleSolution sol = solve_saddle(*lift_space_, prob);
  f.lift_u_ = sol.u;

  // net outflow of the interpolated data: top contributes flux_top, the patch
  // cancels it by construction
  double net = flux_top;
  for (int i = 0; i < n_edge; ++i)
    net += edge_w[i] * amplitude * patch_shape[i].dot(Vec2(0.0, -1.0));
  f.net_flux_ = net;
  if (std::abs(net) > 1e-12 * std::max(1.0, std::abs(flux_top)))
    throw SolverError("extension: compensated boundary flux did not cancel (assembly bug)");
  return f;
}

Vec2 ShellExtensionOperator::value(const VectorX& coeffs, const Vec2& x) const {
  Vec2 v = Vec2::Zero();
  for (int k = 0; k < n_modes(); ++k)
    if (coeffs[k] != 0.0) v += coeffs[k] * modes_[k].value(x);
  return v;
}

Mat2 ShellExtensionOperator::jacobian(const VectorX& coeffs, const Vec2& x) const {
  Mat2 J = Mat2::Zero();
  for (int k = 0; k < n_modes(); ++k)
    if (coeffs[k] != 0.0) J += coeffs[k] * modes_[k].jacobian(x);
  return J;
}

ExtendedShellVelocity ShellExtensionOperator::lift_field(
    std::shared_ptr<const ShellField> b) const {
  return build(std::move(b));
}

}  // namespace kfsi
