// Copyright the nnmg authors. All Rights Reserved.
// SPDX-License-Identifier: Apache-2.0

#ifndef NNMG_FEM_HPP
#define NNMG_FEM_HPP

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "nnmg/common.hpp"
#include "nnmg/mesh.hpp"
#include "nnmg/sparse.hpp"

namespace nnmg
{

namespace detail
{

// Local edge numbering of the reference simplex by dimension: segment, triangle,
// tetrahedron.
inline std::span<const std::array<int, 2>> local_edges(int dim)
{
  static constexpr std::array<std::array<int, 2>, 1> seg{{{0, 1}}};
  static constexpr std::array<std::array<int, 2>, 3> tri{{{0, 1}, {1, 2}, {0, 2}}};
  static constexpr std::array<std::array<int, 2>, 6> tet{
      {{0, 1}, {1, 2}, {0, 2}, {0, 3}, {1, 3}, {2, 3}}};
  switch (dim)
  {
    case 1:
      return seg;
    case 2:
      return tri;
    default:
      return tet;
  }
}

inline int nodes_per_simplex(int degree, int dim)
{
  return degree == 1 ? dim + 1 : dim + 1 + static_cast<int>(local_edges(dim).size());
}

}  // namespace detail

//
// Lagrange shape functions on the reference simplex {xi >= 0, sum(xi) <= 1}. Nodes are
// ordered vertices first, then edge midpoints in local edge order.
//
struct BasisEval
{
  int count = 0;
  std::array<double, 10> values{};
  std::array<std::array<double, 3>, 10> grads{};
};

inline BasisEval reference_basis(int degree, int dim, std::span<const double> xi)
{
  if (degree != 1 && degree != 2)
  {
    throw Error("reference_basis: unsupported degree " + std::to_string(degree));
  }
  if (dim < 1 || dim > 3)
  {
    throw Error("reference_basis: unsupported dimension " + std::to_string(dim));
  }
  check_size(xi.size(), static_cast<std::size_t>(dim), "reference_basis point");
  std::array<double, 4> lam{};
  std::array<std::array<double, 3>, 4> dlam{};
  lam[0] = 1.0;
  for (int d = 0; d < dim; ++d)
  {
    lam[0] -= xi[d];
    lam[d + 1] = xi[d];
    dlam[0][d] = -1.0;
    dlam[d + 1][d] = 1.0;
  }
  constexpr double tol = 1e-12;
  for (int i = 0; i <= dim; ++i)
  {
    if (lam[i] < -tol)
    {
      throw Error("reference_basis: point outside the reference simplex");
    }
  }
  BasisEval e;
  if (degree == 1)
  {
    e.count = dim + 1;
    for (int i = 0; i <= dim; ++i)
    {
      e.values[i] = lam[i];
      e.grads[i] = dlam[i];
    }
    return e;
  }
  for (int i = 0; i <= dim; ++i)
  {
    e.values[i] = lam[i] * (2.0 * lam[i] - 1.0);
    for (int d = 0; d < 3; ++d)
    {
      e.grads[i][d] = (4.0 * lam[i] - 1.0) * dlam[i][d];
    }
  }
  int k = dim + 1;
  for (const auto &[a, b] : detail::local_edges(dim))
  {
    e.values[k] = 4.0 * lam[a] * lam[b];
    for (int d = 0; d < 3; ++d)
    {
      e.grads[k][d] = 4.0 * (lam[b] * dlam[a][d] + lam[a] * dlam[b][d]);
    }
    ++k;
  }
  e.count = k;
  return e;
}

struct QuadratureRule
{
  std::vector<std::array<double, 3>> points;
  std::vector<double> weights;
};

//
// Positive-weight quadrature on the reference simplex, exact for polynomials of total
// degree <= `degree`. Dimension 1 (unit interval, used for facets) supports degree <= 5;
// triangles and tetrahedra support degree <= 4.
//
inline QuadratureRule quadrature(int dim, int degree)
{
  QuadratureRule q;
  auto add = [&q](double w, double x, double y = 0.0, double z = 0.0) {
    q.points.push_back({x, y, z});
    q.weights.push_back(w);
  };
  if (degree < 0)
  {
    throw Error("quadrature: negative degree");
  }
  if (dim == 1)
  {
    if (degree <= 1)
    {
      add(1.0, 0.5);
    }
    else if (degree <= 3)
    {
      const double s = 0.5 / std::sqrt(3.0);
      add(0.5, 0.5 - s);
      add(0.5, 0.5 + s);
    }
    else if (degree <= 5)
    {
      const double s = 0.5 * std::sqrt(0.6);
      add(5.0 / 18.0, 0.5 - s);
      add(8.0 / 18.0, 0.5);
      add(5.0 / 18.0, 0.5 + s);
    }
    else
    {
      throw Error("quadrature: unsupported degree " + std::to_string(degree) + " on intervals");
    }
    return q;
  }
  if (degree > 4)
  {
    throw Error("quadrature: unsupported degree " + std::to_string(degree) + " (max 4)");
  }
  if (dim == 2)
  {
    if (degree <= 1)
    {
      add(0.5, 1.0 / 3.0, 1.0 / 3.0);
    }
    else if (degree == 2)
    {
      add(1.0 / 6.0, 1.0 / 6.0, 1.0 / 6.0);
      add(1.0 / 6.0, 2.0 / 3.0, 1.0 / 6.0);
      add(1.0 / 6.0, 1.0 / 6.0, 2.0 / 3.0);
    }
    else
    {
      // Six-point symmetric rule, degree 4.
      const double a = 0.445948490915965, wa = 0.5 * 0.223381589678011;
      const double b = 0.091576213509771, wb = 0.5 * 0.109951743655322;
      add(wa, a, a);
      add(wa, 1.0 - 2.0 * a, a);
      add(wa, a, 1.0 - 2.0 * a);
      add(wb, b, b);
      add(wb, 1.0 - 2.0 * b, b);
      add(wb, b, 1.0 - 2.0 * b);
    }
    return q;
  }
  if (dim == 3)
  {
    if (degree <= 1)
    {
      add(1.0 / 6.0, 0.25, 0.25, 0.25);
    }
    else if (degree == 2)
    {
      const double a = 0.5854101966249685, b = 0.1381966011250105;
      add(1.0 / 24.0, b, b, b);
      add(1.0 / 24.0, a, b, b);
      add(1.0 / 24.0, b, a, b);
      add(1.0 / 24.0, b, b, a);
    }
    else
    {
      // Fourteen-point symmetric rule with positive weights (exact to degree 5).
      const double a = 0.31088591926330060980, wa = 0.018781320953002641800;
      const double b = 0.092735250310891226402, wb = 0.012248840519393658257;
      const double c = 0.045503704125649649492, wc = 0.0070910034628469110730;
      for (double s : {a, b})
      {
        const double w = s == a ? wa : wb;
        const double t = 1.0 - 3.0 * s;
        add(w, s, s, s);
        add(w, t, s, s);
        add(w, s, t, s);
        add(w, s, s, t);
      }
      const double d = 0.5 - c;
      add(wc, c, c, d);
      add(wc, c, d, c);
      add(wc, d, c, c);
      add(wc, d, d, c);
      add(wc, d, c, d);
      add(wc, c, d, d);
    }
    return q;
  }
  throw Error("quadrature: unsupported dimension " + std::to_string(dim));
}

//
// Degree-of-freedom numbering for continuous P1/P2 Lagrange spaces, scalar or vector
// valued. Nodes are mesh vertices followed (P2) by edges keyed by their sorted vertex
// pair. Vector fields interleave components: dof = node * value_dims + component.
//
class DofMap
{
public:
  DofMap(const SimplexMesh &mesh, int degree, int value_dims = 1)
    : dim_(mesh.dim()), degree_(degree), value_dims_(value_dims)
  {
    if (degree != 1 && degree != 2)
    {
      throw Error("DofMap: element degree must be 1 or 2");
    }
    if (value_dims < 1 || value_dims > 3)
    {
      throw Error("DofMap: value dimension must be 1..3");
    }
    node_coords_ = mesh.vertices();
    const int nloc = detail::nodes_per_simplex(degree, dim_);
    nodes_per_cell_ = nloc;
    const auto edges_local = detail::local_edges(dim_);
    if (degree == 2)
    {
      std::set<std::pair<Index, Index>> edges;
      for (Index c = 0; c < mesh.num_cells(); ++c)
      {
        auto vs = mesh.cell(c);
        for (const auto &[a, b] : edges_local)
        {
          edges.insert(std::minmax(vs[a], vs[b]));
        }
      }
      edges_.assign(edges.begin(), edges.end());
      for (const auto &[a, b] : edges_)
      {
        const Point &pa = mesh.vertex(a), &pb = mesh.vertex(b);
        node_coords_.push_back(
            {0.5 * (pa[0] + pb[0]), 0.5 * (pa[1] + pb[1]), 0.5 * (pa[2] + pb[2])});
      }
    }
    cell_nodes_.reserve(static_cast<std::size_t>(mesh.num_cells() * nloc));
    for (Index c = 0; c < mesh.num_cells(); ++c)
    {
      auto vs = mesh.cell(c);
      for (Index v : vs)
      {
        cell_nodes_.push_back(v);
      }
      if (degree == 2)
      {
        for (const auto &[a, b] : edges_local)
        {
          cell_nodes_.push_back(edge_node(vs[a], vs[b]));
        }
      }
    }
    for (const auto &f : mesh.boundary_facets())
    {
      std::vector<Index> nodes(f.vertices.begin(), f.vertices.begin() + dim_);
      if (degree == 2)
      {
        for (const auto &[a, b] : detail::local_edges(dim_ - 1))
        {
          nodes.push_back(edge_node(f.vertices[a], f.vertices[b]));
        }
      }
      facet_nodes_.push_back(std::move(nodes));
      facet_markers_.push_back(f.marker);
    }
  }

  int dim() const { return dim_; }
  int degree() const { return degree_; }
  int value_dims() const { return value_dims_; }
  Index num_nodes() const { return static_cast<Index>(node_coords_.size()); }
  Index num_dofs() const { return num_nodes() * value_dims_; }
  Index num_cells() const
  {
    return static_cast<Index>(cell_nodes_.size()) / nodes_per_cell_;
  }
  int nodes_per_cell() const { return nodes_per_cell_; }
  int dofs_per_cell() const { return nodes_per_cell_ * value_dims_; }

  const std::vector<Point> &node_coords() const { return node_coords_; }
  const Point &dof_coord(Index dof) const
  {
    return node_coords_[static_cast<std::size_t>(dof / value_dims_)];
  }

  std::span<const Index> cell_nodes(Index c) const
  {
    return {cell_nodes_.data() + c * nodes_per_cell_, static_cast<std::size_t>(nodes_per_cell_)};
  }

  // Node-major, component-minor ordering matching the element matrices.
  std::vector<Index> cell_dofs(Index c) const
  {
    std::vector<Index> out;
    out.reserve(static_cast<std::size_t>(dofs_per_cell()));
    for (Index n : cell_nodes(c))
    {
      for (int k = 0; k < value_dims_; ++k)
      {
        out.push_back(n * value_dims_ + k);
      }
    }
    return out;
  }

  std::size_t num_facets() const { return facet_nodes_.size(); }
  std::span<const Index> facet_nodes(std::size_t f) const { return facet_nodes_[f]; }
  int facet_marker(std::size_t f) const { return facet_markers_[f]; }

  // Sorted DOFs on boundary facets carrying `marker`.
  std::vector<Index> boundary_dofs(int marker) const
  {
    std::set<Index> dofs;
    for (std::size_t f = 0; f < facet_nodes_.size(); ++f)
    {
      if (facet_markers_[f] != marker)
      {
        continue;
      }
      for (Index n : facet_nodes_[f])
      {
        for (int k = 0; k < value_dims_; ++k)
        {
          dofs.insert(n * value_dims_ + k);
        }
      }
    }
    return {dofs.begin(), dofs.end()};
  }

private:
  Index edge_node(Index a, Index b) const
  {
    const auto key = std::minmax(a, b);
    auto it = std::lower_bound(edges_.begin(), edges_.end(), std::pair<Index, Index>(key));
    return static_cast<Index>(node_coords_.size() - edges_.size()) +
           static_cast<Index>(it - edges_.begin());
  }

  int dim_;
  int degree_;
  int value_dims_;
  int nodes_per_cell_ = 0;
  std::vector<Point> node_coords_;
  std::vector<std::pair<Index, Index>> edges_;
  std::vector<Index> cell_nodes_;
  std::vector<std::vector<Index>> facet_nodes_;
  std::vector<int> facet_markers_;
};

enum class ProblemKind
{
  Poisson,
  Elasticity
};

// Coordinate function; scalar problems read component 0.
using Field = std::function<Point(const Point &)>;

struct BoundaryCondition
{
  int marker = 0;
  Field value;
};

struct Material
{
  double youngs_modulus = 1.0;
  double poisson_ratio = 0.3;

  double mu() const { return youngs_modulus / (2.0 * (1.0 + poisson_ratio)); }
  double lambda() const
  {
    return youngs_modulus * poisson_ratio / ((1.0 + poisson_ratio) * (1.0 - 2.0 * poisson_ratio));
  }
};

//
// Boundary value problem description. Poisson: -lap u = f, u = g on Dirichlet markers,
// grad u . n = s on Neumann markers. Elasticity: -div sigma(u) = f with isotropic
// Hooke's law, u = g on Dirichlet markers, sigma . n = t on traction markers.
//
struct ProblemSpec
{
  ProblemKind kind = ProblemKind::Poisson;
  Field source;
  std::vector<BoundaryCondition> dirichlet;
  std::vector<BoundaryCondition> neumann;
  Material material;
};

struct AssembledSystem
{
  CsrMatrix A;
  Vector b;
  std::vector<Index> dirichlet_dofs;
  Vector dirichlet_values;
};

namespace detail
{

struct CellGeometry
{
  Point origin{};
  // Inverse Jacobian (row-major, dim x dim) and |det J|.
  std::array<std::array<double, 3>, 3> inv{};
  double abs_det = 0.0;

  Point map(const std::array<double, 3> &xi, int dim,
            const std::array<std::array<double, 3>, 3> &jac) const
  {
    Point x = origin;
    for (int r = 0; r < dim; ++r)
    {
      for (int c = 0; c < dim; ++c)
      {
        x[r] += jac[r][c] * xi[c];
      }
    }
    return x;
  }
};

inline std::pair<CellGeometry, std::array<std::array<double, 3>, 3>>
cell_geometry(const SimplexMesh &mesh, Index c)
{
  const int dim = mesh.dim();
  const auto pts = mesh.cell_points(c);
  std::array<std::array<double, 3>, 3> jac{};
  for (int r = 0; r < dim; ++r)
  {
    for (int k = 0; k < dim; ++k)
    {
      jac[r][k] = pts[k + 1][r] - pts[0][r];
    }
  }
  CellGeometry g;
  g.origin = pts[0];
  if (dim == 2)
  {
    const double det = jac[0][0] * jac[1][1] - jac[0][1] * jac[1][0];
    g.abs_det = std::abs(det);
    g.inv[0][0] = jac[1][1] / det;
    g.inv[0][1] = -jac[0][1] / det;
    g.inv[1][0] = -jac[1][0] / det;
    g.inv[1][1] = jac[0][0] / det;
  }
  else
  {
    const double det = det3(jac);
    g.abs_det = std::abs(det);
    for (int r = 0; r < 3; ++r)
    {
      for (int k = 0; k < 3; ++k)
      {
        // inv = adj(J)^T / det via cofactors.
        const int r1 = (k + 1) % 3, r2 = (k + 2) % 3, c1 = (r + 1) % 3, c2 = (r + 2) % 3;
        g.inv[r][k] = (jac[r1][c1] * jac[r2][c2] - jac[r1][c2] * jac[r2][c1]) / det;
      }
    }
  }
  if (!(g.abs_det > 0.0))
  {
    throw DegenerateCellError("assemble: degenerate cell " + std::to_string(c), c);
  }
  return {g, jac};
}

// Physical gradient: grad_x = J^{-T} grad_xi.
inline std::array<double, 3> physical_gradient(const CellGeometry &g, int dim,
                                               const std::array<double, 3> &ref)
{
  std::array<double, 3> out{};
  for (int d = 0; d < dim; ++d)
  {
    for (int k = 0; k < dim; ++k)
    {
      out[d] += g.inv[k][d] * ref[k];
    }
  }
  return out;
}

inline void check_markers(const SimplexMesh &mesh, const ProblemSpec &spec)
{
  std::set<int> dir;
  for (const auto &bc : spec.dirichlet)
  {
    if (!mesh.has_marker(bc.marker))
    {
      throw Error("assemble: Dirichlet marker " + std::to_string(bc.marker) +
                  " not present in mesh");
    }
    dir.insert(bc.marker);
  }
  for (const auto &bc : spec.neumann)
  {
    if (!mesh.has_marker(bc.marker))
    {
      throw Error("assemble: Neumann marker " + std::to_string(bc.marker) +
                  " not present in mesh");
    }
    if (dir.contains(bc.marker))
    {
      throw Error("assemble: marker " + std::to_string(bc.marker) +
                  " is both Dirichlet and Neumann");
    }
  }
}

inline void check_dofmap(const SimplexMesh &mesh, const DofMap &dofmap, const ProblemSpec &spec)
{
  if (dofmap.num_cells() != mesh.num_cells() || dofmap.dim() != mesh.dim())
  {
    throw Error("assemble: DOF map does not belong to this mesh");
  }
  const int want = spec.kind == ProblemKind::Poisson ? 1 : mesh.dim();
  if (dofmap.value_dims() != want)
  {
    throw Error("assemble: DOF map value dimension " + std::to_string(dofmap.value_dims()) +
                " does not match the problem (" + std::to_string(want) + ")");
  }
}

}  // namespace detail

// Stiffness matrix before boundary conditions.
inline CsrMatrix assemble_stiffness(const SimplexMesh &mesh, const DofMap &dofmap,
                                    const ProblemSpec &spec)
{
  detail::check_dofmap(mesh, dofmap, spec);
  const int dim = mesh.dim();
  const int degree = dofmap.degree();
  const int vd = dofmap.value_dims();
  const int nn = dofmap.nodes_per_cell();
  const int nl = nn * vd;
  const QuadratureRule rule = quadrature(dim, degree == 1 ? 1 : 2);
  std::vector<BasisEval> ref;
  for (const auto &p : rule.points)
  {
    ref.push_back(reference_basis(degree, dim, std::span<const double>(p.data(), dim)));
  }
  const double mu = spec.material.mu();
  const double lam = spec.material.lambda();
  std::vector<Triplet> trip;
  trip.reserve(static_cast<std::size_t>(mesh.num_cells() * nl * nl));
  std::vector<double> ke(static_cast<std::size_t>(nl * nl));
  std::array<std::array<double, 3>, 10> grad{};
  for (Index c = 0; c < mesh.num_cells(); ++c)
  {
    const auto [geo, jac] = detail::cell_geometry(mesh, c);
    std::fill(ke.begin(), ke.end(), 0.0);
    for (std::size_t q = 0; q < rule.weights.size(); ++q)
    {
      const double w = rule.weights[q] * geo.abs_det;
      for (int a = 0; a < nn; ++a)
      {
        grad[a] = detail::physical_gradient(geo, dim, ref[q].grads[a]);
      }
      for (int a = 0; a < nn; ++a)
      {
        for (int b = 0; b < nn; ++b)
        {
          double gg = 0.0;
          for (int d = 0; d < dim; ++d)
          {
            gg += grad[a][d] * grad[b][d];
          }
          if (spec.kind == ProblemKind::Poisson)
          {
            ke[static_cast<std::size_t>(a * nl + b)] += w * gg;
            continue;
          }
          // (a,i),(b,j): mu (delta_ij grad a . grad b + d_j a d_i b) + lambda d_i a d_j b
          for (int i = 0; i < vd; ++i)
          {
            for (int j = 0; j < vd; ++j)
            {
              double v = mu * grad[a][j] * grad[b][i] + lam * grad[a][i] * grad[b][j];
              if (i == j)
              {
                v += mu * gg;
              }
              ke[static_cast<std::size_t>((a * vd + i) * nl + b * vd + j)] += w * v;
            }
          }
        }
      }
    }
    const auto dofs = dofmap.cell_dofs(c);
    for (int r = 0; r < nl; ++r)
    {
      for (int s = 0; s < nl; ++s)
      {
        trip.push_back({dofs[static_cast<std::size_t>(r)], dofs[static_cast<std::size_t>(s)],
                        ke[static_cast<std::size_t>(r * nl + s)]});
      }
    }
  }
  return CsrMatrix::from_triplets(dofmap.num_dofs(), dofmap.num_dofs(), std::move(trip));
}

// Load vector from the source term and Neumann/traction data, before Dirichlet handling.
inline Vector assemble_load(const SimplexMesh &mesh, const DofMap &dofmap, const ProblemSpec &spec)
{
  detail::check_dofmap(mesh, dofmap, spec);
  detail::check_markers(mesh, spec);
  const int dim = mesh.dim();
  const int degree = dofmap.degree();
  const int vd = dofmap.value_dims();
  Vector b(static_cast<std::size_t>(dofmap.num_dofs()), 0.0);
  if (spec.source)
  {
    const QuadratureRule rule = quadrature(dim, 4);
    for (Index c = 0; c < mesh.num_cells(); ++c)
    {
      const auto [geo, jac] = detail::cell_geometry(mesh, c);
      const auto nodes = dofmap.cell_nodes(c);
      for (std::size_t q = 0; q < rule.weights.size(); ++q)
      {
        const auto &xi = rule.points[q];
        const auto basis = reference_basis(degree, dim, std::span<const double>(xi.data(), dim));
        const Point f = spec.source(geo.map(xi, dim, jac));
        const double w = rule.weights[q] * geo.abs_det;
        for (int a = 0; a < basis.count; ++a)
        {
          for (int k = 0; k < vd; ++k)
          {
            b[static_cast<std::size_t>(nodes[a] * vd + k)] += w * f[k] * basis.values[a];
          }
        }
      }
    }
  }
  if (!spec.neumann.empty())
  {
    const int fdim = dim - 1;
    const QuadratureRule rule = quadrature(fdim, 2);
    const double ref_measure = fdim == 1 ? 1.0 : 0.5;
    const auto &facets = mesh.boundary_facets();
    for (const auto &bc : spec.neumann)
    {
      for (std::size_t f = 0; f < facets.size(); ++f)
      {
        if (facets[f].marker != bc.marker)
        {
          continue;
        }
        std::array<Point, 3> fp{};
        for (int k = 0; k < dim; ++k)
        {
          fp[k] = mesh.vertex(facets[f].vertices[k]);
        }
        const double measure = detail::facet_measure(dim, std::span<const Point>(fp.data(), dim));
        const auto nodes = dofmap.facet_nodes(f);
        for (std::size_t q = 0; q < rule.weights.size(); ++q)
        {
          const auto &xi = rule.points[q];
          Point x = fp[0];
          for (int k = 0; k < fdim; ++k)
          {
            for (int d = 0; d < 3; ++d)
            {
              x[d] += xi[k] * (fp[k + 1][d] - fp[0][d]);
            }
          }
          const auto basis = reference_basis(degree, fdim, std::span<const double>(xi.data(), fdim));
          const Point s = bc.value(x);
          const double w = rule.weights[q] * measure / ref_measure;
          for (int a = 0; a < basis.count; ++a)
          {
            for (int k = 0; k < vd; ++k)
            {
              b[static_cast<std::size_t>(nodes[a] * vd + k)] += w * s[k] * basis.values[a];
            }
          }
        }
      }
    }
  }
  return b;
}

//
// Symmetric elimination of Dirichlet DOFs: rows and columns are zeroed, the diagonal set
// to one, the prescribed value placed in b and its coupling moved to the right-hand side.
//
inline AssembledSystem apply_dirichlet(const CsrMatrix &a, Vector b, std::span<const Index> dofs,
                                       std::span<const double> values)
{
  check_size(values.size(), dofs.size(), "apply_dirichlet");
  const auto n = static_cast<std::size_t>(a.rows());
  std::vector<bool> fixed(n, false);
  Vector g(n, 0.0);
  for (std::size_t k = 0; k < dofs.size(); ++k)
  {
    fixed[static_cast<std::size_t>(dofs[k])] = true;
    g[static_cast<std::size_t>(dofs[k])] = values[k];
  }
  std::vector<Triplet> trip;
  trip.reserve(static_cast<std::size_t>(a.nnz()));
  for (Index i = 0; i < a.rows(); ++i)
  {
    const auto ui = static_cast<std::size_t>(i);
    if (fixed[ui])
    {
      trip.push_back({i, i, 1.0});
      continue;
    }
    auto rc = a.row_cols(i);
    auto rv = a.row_values(i);
    for (std::size_t k = 0; k < rc.size(); ++k)
    {
      const auto j = static_cast<std::size_t>(rc[k]);
      if (fixed[j])
      {
        b[ui] -= rv[k] * g[j];
      }
      else
      {
        trip.push_back({i, rc[k], rv[k]});
      }
    }
  }
  for (std::size_t k = 0; k < dofs.size(); ++k)
  {
    b[static_cast<std::size_t>(dofs[k])] = values[k];
  }
  AssembledSystem sys;
  sys.A = CsrMatrix::from_triplets(a.rows(), a.cols(), std::move(trip));
  sys.b = std::move(b);
  sys.dirichlet_dofs.assign(dofs.begin(), dofs.end());
  sys.dirichlet_values.assign(values.begin(), values.end());
  return sys;
}

inline AssembledSystem assemble(const SimplexMesh &mesh, const DofMap &dofmap,
                                const ProblemSpec &spec)
{
  detail::check_markers(mesh, spec);
  const CsrMatrix k = assemble_stiffness(mesh, dofmap, spec);
  Vector b = assemble_load(mesh, dofmap, spec);
  const int vd = dofmap.value_dims();
  std::vector<std::pair<Index, double>> fixed;
  for (const auto &bc : spec.dirichlet)
  {
    for (Index dof : dofmap.boundary_dofs(bc.marker))
    {
      const Point g = bc.value ? bc.value(dofmap.dof_coord(dof)) : Point{};
      fixed.emplace_back(dof, g[static_cast<std::size_t>(dof % vd)]);
    }
  }
  std::sort(fixed.begin(), fixed.end());
  fixed.erase(std::unique(fixed.begin(), fixed.end(),
                          [](const auto &x, const auto &y) { return x.first == y.first; }),
              fixed.end());
  std::vector<Index> dofs;
  Vector vals;
  for (const auto &[d, v] : fixed)
  {
    dofs.push_back(d);
    vals.push_back(v);
  }
  return apply_dirichlet(k, std::move(b), dofs, vals);
}

inline Vector interpolate(const DofMap &dofmap, const Field &fn)
{
  const int vd = dofmap.value_dims();
  Vector out(static_cast<std::size_t>(dofmap.num_dofs()));
  for (Index n = 0; n < dofmap.num_nodes(); ++n)
  {
    const Point v = fn(dofmap.node_coords()[static_cast<std::size_t>(n)]);
    for (int k = 0; k < vd; ++k)
    {
      out[static_cast<std::size_t>(n * vd + k)] = v[k];
    }
  }
  return out;
}

// L2 norm of (u_h - exact) over the mesh, using the degree-4 rule.
inline double l2_error(const SimplexMesh &mesh, const DofMap &dofmap, std::span<const double> u,
                       const Field &exact)
{
  check_size(u.size(), static_cast<std::size_t>(dofmap.num_dofs()), "l2_error");
  const int dim = mesh.dim();
  const int vd = dofmap.value_dims();
  const QuadratureRule rule = quadrature(dim, 4);
  double sum = 0.0;
  for (Index c = 0; c < mesh.num_cells(); ++c)
  {
    const auto [geo, jac] = detail::cell_geometry(mesh, c);
    const auto nodes = dofmap.cell_nodes(c);
    for (std::size_t q = 0; q < rule.weights.size(); ++q)
    {
      const auto &xi = rule.points[q];
      const auto basis =
          reference_basis(dofmap.degree(), dim, std::span<const double>(xi.data(), dim));
      const Point ue = exact(geo.map(xi, dim, jac));
      for (int k = 0; k < vd; ++k)
      {
        double uh = 0.0;
        for (int a = 0; a < basis.count; ++a)
        {
          uh += u[static_cast<std::size_t>(nodes[a] * vd + k)] * basis.values[a];
        }
        sum += rule.weights[q] * geo.abs_det * (uh - ue[k]) * (uh - ue[k]);
      }
    }
  }
  return std::sqrt(sum);
}

}  // namespace nnmg

#endif  // NNMG_FEM_HPP
