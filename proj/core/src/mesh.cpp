#include "kfsi/mesh.hpp"

#include <cmath>

namespace kfsi {

namespace {

using fem::q1;
using fem::q2;
using fem::q2d;

struct CellLocal {
  int cx, cy;
  double tx, ty;
};

CellLocal locate(const ReferenceMesh& m, const Vec2& x) {
  CellLocal c;
  c.cx = std::clamp(static_cast<int>(std::floor(x[0] / m.hx())), 0, m.nx - 1);
  c.cy = std::clamp(static_cast<int>(std::floor(x[1] / m.hy())), 0, m.ny - 1);
  c.tx = (x[0] - c.cx * m.hx()) / m.hx();
  c.ty = (x[1] - c.cy * m.hy()) / m.hy();
  return c;
}

}  // namespace

ReferenceMesh::ReferenceMesh(int nx_, int ny_, double L_, double H_)
    : nx(nx_), ny(ny_), L(L_), H(H_) {
  if (nx < 1 || ny < 1 || L <= 0.0 || H <= 0.0)
    throw ConfigError("ReferenceMesh: invalid dimensions");
}

Vec2 ReferenceMesh::vnode(int id) const {
  const int w = 2 * nx + 1;
  const int i = id % w, j = id / w;
  return {0.5 * hx() * i, 0.5 * hy() * j};
}

Vec2 ReferenceMesh::pnode(int id) const {
  const int w = nx + 1;
  const int i = id % w, j = id / w;
  return {hx() * i, hy() * j};
}

void ReferenceMesh::cell_vnodes(int c, int out[9]) const {
  const int cx = c % nx, cy = c / nx;
  int k = 0;
  for (int b = 0; b < 3; ++b)
    for (int a = 0; a < 3; ++a) out[k++] = vnode_id(2 * cx + a, 2 * cy + b);
}

void ReferenceMesh::cell_pnodes(int c, int out[4]) const {
  const int cx = c % nx, cy = c / nx;
  int k = 0;
  for (int b = 0; b < 2; ++b)
    for (int a = 0; a < 2; ++a) out[k++] = pnode_id(cx + a, cy + b);
}

bool ReferenceMesh::vnode_on(BoundaryTag tag, int id) const {
  const int w = 2 * nx + 1;
  const int i = id % w, j = id / w;
  switch (tag) {
    case BoundaryTag::M: return j == 2 * ny;
    case BoundaryTag::Inlet: return i == 0;
    case BoundaryTag::Outlet: return i == 2 * nx;
    case BoundaryTag::Bottom: return j == 0;
  }
  return false;
}

std::vector<int> ReferenceMesh::vnodes_on(BoundaryTag tag) const {
  std::vector<int> out;
  for (int id = 0; id < n_vnodes(); ++id)
    if (vnode_on(tag, id)) out.push_back(id);
  return out;
}

Vec2 MixedSpace::eval_velocity(const VectorX& u, const Vec2& x) const {
  const CellLocal c = locate(mesh, x);
  Vec2 v = Vec2::Zero();
  for (int b = 0; b < 3; ++b)
    for (int a = 0; a < 3; ++a) {
      const int n = mesh.vnode_id(2 * c.cx + a, 2 * c.cy + b);
      const double s = q2(a, c.tx) * q2(b, c.ty);
      v[0] += s * u[udof(n, 0)];
      v[1] += s * u[udof(n, 1)];
    }
  return v;
}

Mat2 MixedSpace::eval_velocity_gradient(const VectorX& u, const Vec2& x) const {
  const CellLocal c = locate(mesh, x);
  Mat2 g = Mat2::Zero();
  for (int b = 0; b < 3; ++b)
    for (int a = 0; a < 3; ++a) {
      const int n = mesh.vnode_id(2 * c.cx + a, 2 * c.cy + b);
      const double dx = q2d(a, c.tx) * q2(b, c.ty) / mesh.hx();
      const double dy = q2(a, c.tx) * q2d(b, c.ty) / mesh.hy();
      for (int comp = 0; comp < 2; ++comp) {
        g(comp, 0) += dx * u[udof(n, comp)];
        g(comp, 1) += dy * u[udof(n, comp)];
      }
    }
  return g;
}

double MixedSpace::eval_pressure(const VectorX& p, const Vec2& x) const {
  const CellLocal c = locate(mesh, x);
  double v = 0.0;
  for (int b = 0; b < 2; ++b)
    for (int a = 0; a < 2; ++a)
      v += q1(a, c.tx) * q1(b, c.ty) * p[mesh.pnode_id(c.cx + a, c.cy + b)];
  return v;
}

std::vector<int> MixedSpace::boundary_udofs(BoundaryTag tag) const {
  std::vector<int> out;
  for (int n : mesh.vnodes_on(tag)) {
    out.push_back(udof(n, 0));
    out.push_back(udof(n, 1));
  }
  return out;
}

QuadratureLayout::QuadratureLayout(const ReferenceMesh& mesh, int order) {
  const GaussRule& g = gauss_rule(order);
  per_cell = order * order;
  points.reserve(mesh.n_cells() * per_cell);
  weights.reserve(mesh.n_cells() * per_cell);
  cell_of.reserve(mesh.n_cells() * per_cell);
  for (int c = 0; c < mesh.n_cells(); ++c) {
    const int cx = c % mesh.nx, cy = c / mesh.nx;
    for (int j = 0; j < order; ++j)
      for (int i = 0; i < order; ++i) {
        const double tx = 0.5 * (1.0 + g.nodes[i]);
        const double ty = 0.5 * (1.0 + g.nodes[j]);
        points.emplace_back((cx + tx) * mesh.hx(), (cy + ty) * mesh.hy());
        weights.push_back(0.25 * g.weights[i] * g.weights[j] * mesh.hx() * mesh.hy());
        cell_of.push_back(c);
      }
  }
}

Interval1dQuadrature boundary_quadrature(const ReferenceMesh& mesh, BoundaryTag tag, int order) {
  const bool horizontal = (tag == BoundaryTag::M || tag == BoundaryTag::Bottom);
  const double len = horizontal ? mesh.L : mesh.H;
  const int nsub = horizontal ? mesh.nx : mesh.ny;
  return composite_gauss(0.0, len, nsub, order);
}

}  // namespace kfsi
