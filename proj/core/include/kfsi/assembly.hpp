#pragma once

#include <Eigen/Sparse>
#include <functional>
#include <optional>
#include <vector>

#include "kfsi/geometry.hpp"
#include "kfsi/mesh.hpp"
#include "kfsi/shell.hpp"

namespace kfsi {

using SpMat = Eigen::SparseMatrix<double>;

/// Every Omega_eta integral realized on the reference mesh with weight
/// det dPsi and gradient transform dPsi^{-T}; fields are carried in the
/// composed representation v_hat = v o Psi_eta.
struct MovingForms {
  SpMat mass;            // int phi_i . phi_j det
  SpMat visc;            // int D(phi_i) : D(phi_j) det   (physical symmetric gradients)
  SpMat div;             // n_p x n_u: int psi_p div_y(phi_j) det
  SpMat conv;            // antisymmetric split, present when a transport field was given
  MatrixX boundary_gamma;  // shell basis: int_M Y_j Y_k (dt eta_geom) gamma(eta) dA
};

MovingForms assemble_moving_forms(
    const MixedSpace& space, const Geometry& geom, const ShellField& eta,
    const ShellField* eta_t_geom = nullptr, const ShellBasis* shell = nullptr, int order = 6,
    const std::function<Vec2(const Vec2&)>* transport_velocity = nullptr);

/// Dual-norm residual of the moving-domain divergence of a reference DOF
/// field, with div_y computed through the chain-rule gradient (independent of
/// the algebraic Piola identity).
double divergence_residual(const MixedSpace& space, const Geometry& geom, const ShellField& eta,
                           const VectorX& u, int order = 6);

/// Same dual-norm residual for an arbitrary field given by its Jacobian
/// evaluator on the fixed reference box (used for composite lifted fields).
double divergence_residual_field(const MixedSpace& space,
                                 const std::function<Mat2(const Vec2&)>& jac, int order = 4);

struct SaddleProblem {
  const SpMat* A = nullptr;   // n_u x n_u
  const SpMat* B = nullptr;   // n_p x n_u
  VectorX fu, fp;
  std::vector<int> dirichlet_dofs;
  VectorX dirichlet_values;
  bool pin_pressure_mean = false;
};

struct SaddleSolution {
  VectorX u, p;
  double rel_residual = 0.0;
};

/// Direct sparse solve of the velocity-pressure saddle system; Dirichlet
/// constraints eliminated exactly. Throws SolverError on failure or when the
/// relative residual exceeds 1e-10.
SaddleSolution solve_saddle(const MixedSpace& space, const SaddleProblem& prob);

/// Dense extraction of a basis of ker(Div) with zero velocity trace on the
/// given boundary parts (columns are full-length DOF vectors).
MatrixX divfree_nullspace(const MixedSpace& space, const SpMat& div,
                          const std::vector<BoundaryTag>& zero_trace,
                          int max_dense_dofs = 6000);

/// Computed inf-sup witness on the unconstrained (natural-boundary) space.
double infsup_constant(const MixedSpace& space, int order = 4);

/// Mass matrix of the pressure space and the vector int psi_p dx.
SpMat pressure_mass(const MixedSpace& space, int order = 4);
VectorX pressure_moments(const MixedSpace& space, int order = 4);

}  // namespace kfsi
