#pragma once

#include <vector>

#include "kfsi/quadrature.hpp"
#include "kfsi/types.hpp"

namespace kfsi {

enum class BoundaryTag { M, Inlet, Outlet, Bottom };

/// 1D Lagrange shape functions on the reference cell [0,1].
namespace fem {
inline double q2(int a, double t) {
  switch (a) {
    case 0: return (2.0 * t - 1.0) * (t - 1.0);
    case 1: return 4.0 * t * (1.0 - t);
    default: return t * (2.0 * t - 1.0);
  }
}
inline double q2d(int a, double t) {
  switch (a) {
    case 0: return 4.0 * t - 3.0;
    case 1: return 4.0 - 8.0 * t;
    default: return 4.0 * t - 1.0;
  }
}
inline double q1(int a, double t) { return a == 0 ? 1.0 - t : t; }
}  // namespace fem

/// Structured quadrilateral grid on (0,L) x (0,H). Velocity nodes are the
/// Q2 lattice (2nx+1) x (2ny+1), pressure nodes the Q1 lattice.
struct ReferenceMesh {
  int nx = 0, ny = 0;
  double L = 0.0, H = 0.0;

  ReferenceMesh() = default;
  ReferenceMesh(int nx_, int ny_, double L_, double H_);

  double hx() const { return L / nx; }
  double hy() const { return H / ny; }
  int n_cells() const { return nx * ny; }

  int n_vnodes() const { return (2 * nx + 1) * (2 * ny + 1); }
  int n_pnodes() const { return (nx + 1) * (ny + 1); }
  Vec2 vnode(int id) const;
  Vec2 pnode(int id) const;
  int vnode_id(int i, int j) const { return j * (2 * nx + 1) + i; }
  int pnode_id(int i, int j) const { return j * (nx + 1) + i; }

  /// Q2 node ids of cell c in tensor order (3x3).
  void cell_vnodes(int c, int out[9]) const;
  /// Q1 node ids of cell c in tensor order (2x2).
  void cell_pnodes(int c, int out[4]) const;

  bool vnode_on(BoundaryTag tag, int id) const;
  std::vector<int> vnodes_on(BoundaryTag tag) const;
};

/// Mixed Q2/Q1 (Taylor-Hood type) velocity-pressure layout with evaluation
/// of coefficient vectors at arbitrary points.
struct MixedSpace {
  ReferenceMesh mesh;

  MixedSpace() = default;
  explicit MixedSpace(ReferenceMesh m) : mesh(m) {}

  int n_udofs() const { return 2 * mesh.n_vnodes(); }
  int n_pdofs() const { return mesh.n_pnodes(); }
  int udof(int vnode, int comp) const { return 2 * vnode + comp; }

  Vec2 eval_velocity(const VectorX& u, const Vec2& x) const;
  Mat2 eval_velocity_gradient(const VectorX& u, const Vec2& x) const;  // column m = d/dx_m
  double eval_pressure(const VectorX& p, const Vec2& x) const;

  std::vector<int> boundary_udofs(BoundaryTag tag) const;
};

/// Fixed tensor-Gauss quadrature over all cells; assembly and basis
/// projections share these points.
struct QuadratureLayout {
  std::vector<Vec2> points;
  std::vector<double> weights;
  std::vector<int> cell_of;
  int per_cell = 0;

  QuadratureLayout() = default;
  QuadratureLayout(const ReferenceMesh& mesh, int order);
  std::size_t size() const { return points.size(); }
};

/// 1D quadrature along one boundary edge of the mesh.
Interval1dQuadrature boundary_quadrature(const ReferenceMesh& mesh, BoundaryTag tag, int order);

}  // namespace kfsi
