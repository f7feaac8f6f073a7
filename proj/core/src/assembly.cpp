#include "kfsi/assembly.hpp"

#include <Eigen/Dense>
#include <Eigen/SparseLU>
#include <Eigen/SparseCholesky>

namespace kfsi {

namespace {

using fem::q1;
using fem::q2;
using fem::q2d;

struct LocalBasis {
  // per quadrature point of one cell: 9 scalar shapes with reference-scaled grads
  double val[9];
  Vec2 grad[9];  // already divided by hx, hy
};

std::vector<LocalBasis> tabulate_q2(const ReferenceMesh& mesh, int order) {
  const GaussRule& g = gauss_rule(order);
  std::vector<LocalBasis> tab(order * order);
  int k = 0;
  for (int j = 0; j < order; ++j)
    for (int i = 0; i < order; ++i, ++k) {
      const double tx = 0.5 * (1.0 + g.nodes[i]);
      const double ty = 0.5 * (1.0 + g.nodes[j]);
      int m = 0;
      for (int b = 0; b < 3; ++b)
        for (int a = 0; a < 3; ++a, ++m) {
          tab[k].val[m] = q2(a, tx) * q2(b, ty);
          tab[k].grad[m] = Vec2(q2d(a, tx) * q2(b, ty) / mesh.hx(),
                                q2(a, tx) * q2d(b, ty) / mesh.hy());
        }
    }
  return tab;
}

std::vector<std::array<double, 4>> tabulate_q1(int order) {
  const GaussRule& g = gauss_rule(order);
  std::vector<std::array<double, 4>> tab(order * order);
  int k = 0;
  for (int j = 0; j < order; ++j)
    for (int i = 0; i < order; ++i, ++k) {
      const double tx = 0.5 * (1.0 + g.nodes[i]);
      const double ty = 0.5 * (1.0 + g.nodes[j]);
      int m = 0;
      for (int b = 0; b < 2; ++b)
        for (int a = 0; a < 2; ++a, ++m) tab[k][m] = q1(a, tx) * q1(b, ty);
    }
  return tab;
}

}  // namespace

MovingForms assemble_moving_forms(const MixedSpace& space, const Geometry& geom,
                                  const ShellField& eta, const ShellField* eta_t_geom,
                                  const ShellBasis* shell, int order,
                                  const std::function<Vec2(const Vec2&)>* transport_velocity) {
  geom.require_admissible(eta);
  const ReferenceMesh& mesh = space.mesh;
  const QuadratureLayout layout(mesh, order);
  const auto q2tab = tabulate_q2(mesh, order);
  const auto q1tab = tabulate_q1(order);

  std::vector<Eigen::Triplet<double>> t_mass, t_visc, t_div, t_conv;
  t_mass.reserve(mesh.n_cells() * 18 * 18);
  t_visc.reserve(mesh.n_cells() * 18 * 18);
  t_div.reserve(mesh.n_cells() * 4 * 18);
  const bool with_conv = transport_velocity != nullptr;
  if (with_conv) t_conv.reserve(mesh.n_cells() * 18 * 18);

  int vn[9], pn[4];
  for (int c = 0; c < mesh.n_cells(); ++c) {
    mesh.cell_vnodes(c, vn);
    mesh.cell_pnodes(c, pn);
    Eigen::Matrix<double, 18, 18> m_loc = Eigen::Matrix<double, 18, 18>::Zero();
    Eigen::Matrix<double, 18, 18> v_loc = Eigen::Matrix<double, 18, 18>::Zero();
    Eigen::Matrix<double, 18, 18> c_loc = Eigen::Matrix<double, 18, 18>::Zero();
    Eigen::Matrix<double, 4, 18> d_loc = Eigen::Matrix<double, 4, 18>::Zero();

    for (int k = 0; k < layout.per_cell; ++k) {
      const int qi = c * layout.per_cell + k;
      const Vec2 x = layout.points[qi];
      const double w = layout.weights[qi];
      const MovingJacobian J = geom.hanzawa_jacobian(eta, x);
      const Mat2 Ainv = J.dpsi.inverse();
      const double wdet = w * J.det;

      Vec2 g_phys[9];
      for (int m = 0; m < 9; ++m) g_phys[m] = Ainv.transpose() * q2tab[k].grad[m];

      Vec2 v_at = Vec2::Zero();
      if (with_conv) v_at = (*transport_velocity)(geom.hanzawa(eta, x));

      for (int i = 0; i < 9; ++i) {
        for (int j = 0; j < 9; ++j) {
          const double mass_s = q2tab[k].val[i] * q2tab[k].val[j] * wdet;
          const double gg = g_phys[i].dot(g_phys[j]);
          for (int ci = 0; ci < 2; ++ci) {
            m_loc(2 * i + ci, 2 * j + ci) += mass_s;
            for (int cj = 0; cj < 2; ++cj) {
              // D(phi_i):D(phi_j) = 1/2 [ delta_cc (g_i.g_j) + g_i[cj] g_j[ci] ]
              const double visc_s =
                  0.5 * (((ci == cj) ? gg : 0.0) + g_phys[i][cj] * g_phys[j][ci]);
              v_loc(2 * i + ci, 2 * j + cj) += visc_s * wdet;
            }
            if (with_conv) {
              const double conv_s = 0.5 * wdet *
                                    (q2tab[k].val[i] * g_phys[j].dot(v_at) -
                                     q2tab[k].val[j] * g_phys[i].dot(v_at));
              c_loc(2 * i + ci, 2 * j + ci) += conv_s;
            }
          }
        }
        for (int p = 0; p < 4; ++p)
          for (int ci = 0; ci < 2; ++ci)
            d_loc(p, 2 * i + ci) += q1tab[k][p] * g_phys[i][ci] * wdet;
      }
    }

    for (int i = 0; i < 9; ++i)
      for (int ci = 0; ci < 2; ++ci) {
        const int gi = space.udof(vn[i], ci);
        for (int j = 0; j < 9; ++j)
          for (int cj = 0; cj < 2; ++cj) {
            const int gj = space.udof(vn[j], cj);
            const double mv = m_loc(2 * i + ci, 2 * j + cj);
            if (mv != 0.0) t_mass.emplace_back(gi, gj, mv);
            const double vv = v_loc(2 * i + ci, 2 * j + cj);
            if (vv != 0.0) t_visc.emplace_back(gi, gj, vv);
            if (with_conv) {
              const double cv = c_loc(2 * i + ci, 2 * j + cj);
              if (cv != 0.0) t_conv.emplace_back(gi, gj, cv);
            }
          }
        for (int p = 0; p < 4; ++p) {
          const double dv = d_loc(p, 2 * i + ci);
          if (dv != 0.0) t_div.emplace_back(pn[p], gi, dv);
        }
      }
  }

  MovingForms out;
  out.mass.resize(space.n_udofs(), space.n_udofs());
  out.mass.setFromTriplets(t_mass.begin(), t_mass.end());
  out.visc.resize(space.n_udofs(), space.n_udofs());
  out.visc.setFromTriplets(t_visc.begin(), t_visc.end());
  out.div.resize(space.n_pdofs(), space.n_udofs());
  out.div.setFromTriplets(t_div.begin(), t_div.end());
  out.conv.resize(space.n_udofs(), space.n_udofs());
  if (with_conv) out.conv.setFromTriplets(t_conv.begin(), t_conv.end());

  if (shell != nullptr) {
    const int n = shell->n_modes();
    out.boundary_gamma = MatrixX::Zero(n, n);
    if (eta_t_geom != nullptr) {
      const auto& quad = shell->quadrature();
      for (std::size_t i = 0; i < quad.points.size(); ++i) {
        const double q = quad.points[i];
        const double s = quad.weights[i] * eta_t_geom->value(q) * geom.gamma(eta, q);
        for (int j = 0; j < n; ++j)
          for (int k = 0; k < n; ++k)
            out.boundary_gamma(j, k) += s * shell->value(j, q) * shell->value(k, q);
      }
    }
  }
  return out;
}

double divergence_residual(const MixedSpace& space, const Geometry& geom, const ShellField& eta,
                           const VectorX& u, int order) {
  const ReferenceMesh& mesh = space.mesh;
  const QuadratureLayout layout(mesh, order);
  const auto q2tab = tabulate_q2(mesh, order);
  const auto q1tab = tabulate_q1(order);
  VectorX r = VectorX::Zero(space.n_pdofs());
  int vn[9], pn[4];
  for (int c = 0; c < mesh.n_cells(); ++c) {
    mesh.cell_vnodes(c, vn);
    mesh.cell_pnodes(c, pn);
    for (int k = 0; k < layout.per_cell; ++k) {
      const int qi = c * layout.per_cell + k;
      const MovingJacobian J = geom.hanzawa_jacobian(eta, layout.points[qi]);
      const Mat2 Ainv = J.dpsi.inverse();
      Mat2 grad_ref = Mat2::Zero();  // d u_c / d x_m of the composed field
      for (int m = 0; m < 9; ++m)
        for (int ci = 0; ci < 2; ++ci)
          grad_ref.row(ci) += u[space.udof(vn[m], ci)] * q2tab[k].grad[m].transpose();
      const double div_y = (grad_ref * Ainv).trace();
      const double s = layout.weights[qi] * J.det * div_y;
      for (int p = 0; p < 4; ++p) r[pn[p]] += s * q1tab[k][p];
    }
  }
  return r.norm();
}

double divergence_residual_field(const MixedSpace& space,
                                 const std::function<Mat2(const Vec2&)>& jac, int order) {
  const ReferenceMesh& mesh = space.mesh;
  const QuadratureLayout layout(mesh, order);
  const auto q1tab = tabulate_q1(order);
  VectorX r = VectorX::Zero(space.n_pdofs());
  int pn[4];
  for (int c = 0; c < mesh.n_cells(); ++c) {
    mesh.cell_pnodes(c, pn);
    for (int k = 0; k < layout.per_cell; ++k) {
      const int qi = c * layout.per_cell + k;
      const double s = layout.weights[qi] * jac(layout.points[qi]).trace();
      for (int p = 0; p < 4; ++p) r[pn[p]] += s * q1tab[k][p];
    }
  }
  return r.norm();
}

SaddleSolution solve_saddle(const MixedSpace& space, const SaddleProblem& prob) {
  const int nu = space.n_udofs(), np = space.n_pdofs();
  if (prob.A == nullptr || prob.B == nullptr) throw SolverError("solve_saddle: missing operators");

  std::vector<int> map(nu, -1);
  std::vector<char> constrained(nu, 0);
  VectorX uval = VectorX::Zero(nu);
  for (std::size_t i = 0; i < prob.dirichlet_dofs.size(); ++i) {
    constrained[prob.dirichlet_dofs[i]] = 1;
    uval[prob.dirichlet_dofs[i]] = prob.dirichlet_values[i];
  }
  int nfree = 0;
  for (int i = 0; i < nu; ++i)
    if (!constrained[i]) map[i] = nfree++;

  const int extra = prob.pin_pressure_mean ? 1 : 0;
  const int nsys = nfree + np + extra;
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(prob.A->nonZeros() + 2 * prob.B->nonZeros() + 2 * np);

  VectorX rhs = VectorX::Zero(nsys);
  for (int i = 0; i < nu; ++i)
    if (map[i] >= 0) rhs[map[i]] = prob.fu.size() ? prob.fu[i] : 0.0;
  for (int p = 0; p < np; ++p) rhs[nfree + p] = prob.fp.size() ? prob.fp[p] : 0.0;

  for (int k = 0; k < prob.A->outerSize(); ++k)
    for (SpMat::InnerIterator it(*prob.A, k); it; ++it) {
      const int i = it.row(), j = it.col();
      if (map[i] >= 0 && map[j] >= 0)
        trip.emplace_back(map[i], map[j], it.value());
      else if (map[i] >= 0)
        rhs[map[i]] -= it.value() * uval[j];
    }
  for (int k = 0; k < prob.B->outerSize(); ++k)
    for (SpMat::InnerIterator it(*prob.B, k); it; ++it) {
      const int p = it.row(), j = it.col();
      if (map[j] >= 0) {
        trip.emplace_back(nfree + p, map[j], it.value());
        trip.emplace_back(map[j], nfree + p, it.value());
      } else {
        rhs[nfree + p] -= it.value() * uval[j];
      }
    }
  if (prob.pin_pressure_mean) {
    const VectorX mom = pressure_moments(space);
    for (int p = 0; p < np; ++p) {
      trip.emplace_back(nfree + np, nfree + p, mom[p]);
      trip.emplace_back(nfree + p, nfree + np, mom[p]);
    }
  }

  SpMat K(nsys, nsys);
  K.setFromTriplets(trip.begin(), trip.end());
  K.makeCompressed();
  Eigen::SparseLU<SpMat> lu;
  lu.analyzePattern(K);
  lu.factorize(K);
  if (lu.info() != Eigen::Success)
    throw SolverError(
        "solve_saddle: factorization failed (singular system: inf-sup or constraint conflict)");
  const VectorX sol = lu.solve(rhs);

  const double res = (K * sol - rhs).norm();
  const double scale = std::max(1.0, rhs.norm());
  if (!(res / scale <= 1e-10))
    throw SolverError("solve_saddle: residual " + std::to_string(res / scale) + " above tolerance");

  SaddleSolution out;
  out.u = uval;
  for (int i = 0; i < nu; ++i)
    if (map[i] >= 0) out.u[i] = sol[map[i]];
  out.p = sol.segment(nfree, np);
  out.rel_residual = res / scale;
  return out;
}

MatrixX divfree_nullspace(const MixedSpace& space, const SpMat& div,
                          const std::vector<BoundaryTag>& zero_trace, int max_dense_dofs) {
  const int nu = space.n_udofs();
  std::vector<char> constrained(nu, 0);
  for (BoundaryTag tag : zero_trace)
    for (int d : space.boundary_udofs(tag)) constrained[d] = 1;
  std::vector<int> free_dofs;
  for (int i = 0; i < nu; ++i)
    if (!constrained[i]) free_dofs.push_back(i);
  const int nf = static_cast<int>(free_dofs.size());
  if (nf > max_dense_dofs)
    throw SizeError("divfree_nullspace: " + std::to_string(nf) +
                    " free DOFs exceed the dense-extraction limit; use the saddle-point path");

  MatrixX Bf(div.rows(), nf);
  for (int j = 0; j < nf; ++j) Bf.col(j) = div.col(free_dofs[j]);

  Eigen::BDCSVD<MatrixX> svd(Bf, Eigen::ComputeFullV);
  const auto& sv = svd.singularValues();
  const double tol = 1e-10 * (sv.size() ? sv[0] : 1.0);
  int rank = 0;
  for (int i = 0; i < sv.size(); ++i)
    if (sv[i] > tol) ++rank;
  const int dim = nf - rank;

  MatrixX out = MatrixX::Zero(nu, dim);
  for (int k = 0; k < dim; ++k)
    for (int j = 0; j < nf; ++j) out(free_dofs[j], k) = svd.matrixV()(j, rank + k);
  return out;
}

SpMat pressure_mass(const MixedSpace& space, int order) {
  const ReferenceMesh& mesh = space.mesh;
  const auto q1tab = tabulate_q1(order);
  const QuadratureLayout layout(mesh, order);
  std::vector<Eigen::Triplet<double>> trip;
  int pn[4];
  for (int c = 0; c < mesh.n_cells(); ++c) {
    mesh.cell_pnodes(c, pn);
    for (int k = 0; k < layout.per_cell; ++k) {
      const double w = layout.weights[c * layout.per_cell + k];
      for (int a = 0; a < 4; ++a)
        for (int b = 0; b < 4; ++b) trip.emplace_back(pn[a], pn[b], w * q1tab[k][a] * q1tab[k][b]);
    }
  }
  SpMat M(space.n_pdofs(), space.n_pdofs());
  M.setFromTriplets(trip.begin(), trip.end());
  return M;
}

VectorX pressure_moments(const MixedSpace& space, int order) {
  const ReferenceMesh& mesh = space.mesh;
  const auto q1tab = tabulate_q1(order);
  const QuadratureLayout layout(mesh, order);
  VectorX m = VectorX::Zero(space.n_pdofs());
  int pn[4];
  for (int c = 0; c < mesh.n_cells(); ++c) {
    mesh.cell_pnodes(c, pn);
    for (int k = 0; k < layout.per_cell; ++k) {
      const double w = layout.weights[c * layout.per_cell + k];
      for (int a = 0; a < 4; ++a) m[pn[a]] += w * q1tab[k][a];
    }
  }
  return m;
}

double infsup_constant(const MixedSpace& space, int order) {
  ZeroShellField zero;
  Geometry geom = make_channel_geometry(space.mesh.L, space.mesh.H, 0.4 * space.mesh.H,
                                        0.1 * space.mesh.H);
  MovingForms forms = assemble_moving_forms(space, geom, zero, nullptr, nullptr, order);

  // H^1-equivalent velocity norm (symmetric-gradient form plus mass)
  SpMat H1 = forms.visc + forms.mass;
  Eigen::SimplicialLDLT<SpMat> mu(H1);
  if (mu.info() != Eigen::Success) throw SolverError("infsup_constant: norm factorization failed");
  const int np = space.n_pdofs();
  MatrixX S(np, np);
  MatrixX Bt = MatrixX(forms.div).transpose();
  MatrixX X = mu.solve(Bt);
  S = Bt.transpose() * X;
  MatrixX Mp = MatrixX(pressure_mass(space, order));
  Eigen::GeneralizedSelfAdjointEigenSolver<MatrixX> es(S, Mp);
  return std::sqrt(std::max(0.0, es.eigenvalues().minCoeff()));
}

}  // namespace kfsi
