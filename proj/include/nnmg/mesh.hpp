// Copyright the nnmg authors. All Rights Reserved.
// SPDX-License-Identifier: Apache-2.0

#ifndef NNMG_MESH_HPP
#define NNMG_MESH_HPP

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "nnmg/common.hpp"

namespace nnmg
{

// Vertex tuple of a simplex; only the first dim+1 entries are meaningful.
using Cell = std::array<Index, 4>;

struct BoundaryFacet
{
  // Only the first dim entries are meaningful.
  std::array<Index, 3> vertices{};
  int marker = 0;
};

// Box-face markers used by generate_simplex_grid.
enum BoxMarker : int
{
  kXMin = 1,
  kXMax = 2,
  kYMin = 3,
  kYMax = 4,
  kZMin = 5,
  kZMax = 6
};

namespace detail
{

inline double det2(double a, double b, double c, double d)
{
  return a * d - b * c;
}

inline double det3(const std::array<std::array<double, 3>, 3> &m)
{
  return m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) -
         m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0]) +
         m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
}

inline Point sub(const Point &a, const Point &b)
{
  return {a[0] - b[0], a[1] - b[1], a[2] - b[2]};
}

inline double dist(const Point &a, const Point &b)
{
  const Point d = sub(a, b);
  return std::sqrt(d[0] * d[0] + d[1] * d[1] + d[2] * d[2]);
}

// Signed measure of the simplex spanned by `pts` (dim+1 points).
inline double signed_volume(int dim, std::span<const Point> pts)
{
  if (dim == 2)
  {
    const Point a = sub(pts[1], pts[0]), b = sub(pts[2], pts[0]);
    return 0.5 * det2(a[0], b[0], a[1], b[1]);
  }
  const Point a = sub(pts[1], pts[0]), b = sub(pts[2], pts[0]), c = sub(pts[3], pts[0]);
  return det3({{{a[0], b[0], c[0]}, {a[1], b[1], c[1]}, {a[2], b[2], c[2]}}}) / 6.0;
}

// Measure of a (dim-1)-simplex embedded in dim space.
inline double facet_measure(int dim, std::span<const Point> pts)
{
  if (dim == 2)
  {
    return dist(pts[0], pts[1]);
  }
  const Point a = sub(pts[1], pts[0]), b = sub(pts[2], pts[0]);
  const double cx = a[1] * b[2] - a[2] * b[1];
  const double cy = a[2] * b[0] - a[0] * b[2];
  const double cz = a[0] * b[1] - a[1] * b[0];
  return 0.5 * std::sqrt(cx * cx + cy * cy + cz * cz);
}

template <std::size_t N>
std::array<Index, N> sorted_tuple(std::span<const Index> v)
{
  std::array<Index, N> out{};
  std::copy_n(v.begin(), N, out.begin());
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace detail

//
// Conforming simplicial mesh of dimension 2 (triangles) or 3 (tetrahedra). Immutable
// after construction; the constructor enforces index validity, positive orientation, and
// that each boundary facet is a face of some cell.
//
class SimplexMesh
{
public:
  SimplexMesh() = default;

  SimplexMesh(int dim, std::vector<Point> vertices, std::vector<Cell> cells,
              std::vector<BoundaryFacet> boundary_facets)
    : dim_(dim), vertices_(std::move(vertices)), cells_(std::move(cells)),
      facets_(std::move(boundary_facets))
  {
    if (dim_ != 2 && dim_ != 3)
    {
      throw Error("SimplexMesh: dimension must be 2 or 3, got " + std::to_string(dim_));
    }
    const auto nv = static_cast<Index>(vertices_.size());
    for (std::size_t c = 0; c < cells_.size(); ++c)
    {
      auto vs = cell(static_cast<Index>(c));
      for (int i = 0; i <= dim_; ++i)
      {
        if (vs[i] < 0 || vs[i] >= nv)
        {
          throw Error("SimplexMesh: cell " + std::to_string(c) + " references vertex " +
                      std::to_string(vs[i]) + " out of range");
        }
        for (int j = 0; j < i; ++j)
        {
          if (vs[i] == vs[j])
          {
            throw Error("SimplexMesh: cell " + std::to_string(c) + " repeats a vertex");
          }
        }
      }
      if (!(signed_volume(static_cast<Index>(c)) > 0.0))
      {
        throw DegenerateCellError("SimplexMesh: cell " + std::to_string(c) +
                                      " has non-positive signed volume",
                                  static_cast<Index>(c));
      }
    }
    if (!facets_.empty())
    {
      std::set<std::array<Index, 3>> faces;
      for (std::size_t c = 0; c < cells_.size(); ++c)
      {
        for (int skip = 0; skip <= dim_; ++skip)
        {
          faces.insert(face_key(cell_face(static_cast<Index>(c), skip)));
        }
      }
      for (std::size_t f = 0; f < facets_.size(); ++f)
      {
        if (!faces.contains(face_key(facets_[f].vertices)))
        {
          throw Error("SimplexMesh: boundary facet " + std::to_string(f) +
                      " is not a face of any cell");
        }
      }
    }
  }

  int dim() const { return dim_; }
  Index num_vertices() const { return static_cast<Index>(vertices_.size()); }
  Index num_cells() const { return static_cast<Index>(cells_.size()); }
  int vertices_per_cell() const { return dim_ + 1; }

  const std::vector<Point> &vertices() const { return vertices_; }
  const Point &vertex(Index v) const { return vertices_[static_cast<std::size_t>(v)]; }
  const std::vector<Cell> &cells() const { return cells_; }
  std::span<const Index> cell(Index c) const
  {
    return std::span<const Index>(cells_[static_cast<std::size_t>(c)].data(),
                                  static_cast<std::size_t>(dim_ + 1));
  }
  const std::vector<BoundaryFacet> &boundary_facets() const { return facets_; }

  std::array<Point, 4> cell_points(Index c) const
  {
    std::array<Point, 4> pts{};
    auto vs = cell(c);
    for (int i = 0; i <= dim_; ++i)
    {
      pts[i] = vertex(vs[i]);
    }
    return pts;
  }

  double signed_volume(Index c) const
  {
    const auto pts = cell_points(c);
    return detail::signed_volume(dim_, std::span<const Point>(pts.data(), dim_ + 1));
  }

  // Face of cell c opposite to local vertex `skip`.
  std::array<Index, 3> cell_face(Index c, int skip) const
  {
    std::array<Index, 3> f{};
    auto vs = cell(c);
    int k = 0;
    for (int i = 0; i <= dim_; ++i)
    {
      if (i != skip)
      {
        f[k++] = vs[i];
      }
    }
    return f;
  }

  bool has_marker(int marker) const
  {
    return std::any_of(facets_.begin(), facets_.end(),
                       [marker](const BoundaryFacet &f) { return f.marker == marker; });
  }

  std::vector<bool> boundary_vertex_mask() const
  {
    std::vector<bool> mask(vertices_.size(), false);
    for (const auto &f : facets_)
    {
      for (int i = 0; i < dim_; ++i)
      {
        mask[static_cast<std::size_t>(f.vertices[i])] = true;
      }
    }
    return mask;
  }

  // Vertex-to-cell incidence in CSR form: cells around vertex v are
  // cells[offsets[v] .. offsets[v+1]) in increasing order.
  std::pair<std::vector<Index>, std::vector<Index>> vertex_to_cells() const
  {
    std::vector<Index> offsets(vertices_.size() + 1, 0);
    for (Index c = 0; c < num_cells(); ++c)
    {
      for (Index v : cell(c))
      {
        ++offsets[static_cast<std::size_t>(v) + 1];
      }
    }
    std::partial_sum(offsets.begin(), offsets.end(), offsets.begin());
    std::vector<Index> adj(static_cast<std::size_t>(offsets.back()));
    std::vector<Index> fill(offsets.begin(), offsets.end() - 1);
    for (Index c = 0; c < num_cells(); ++c)
    {
      for (Index v : cell(c))
      {
        adj[static_cast<std::size_t>(fill[static_cast<std::size_t>(v)]++)] = c;
      }
    }
    return {std::move(offsets), std::move(adj)};
  }

private:
  std::array<Index, 3> face_key(const std::array<Index, 3> &f) const
  {
    std::array<Index, 3> k{f[0], f[1], dim_ == 3 ? f[2] : Index{-1}};
    std::sort(k.begin(), k.begin() + dim_);
    return k;
  }

  int dim_ = 2;
  std::vector<Point> vertices_;
  std::vector<Cell> cells_;
  std::vector<BoundaryFacet> facets_;
};

namespace detail
{

// Boundary facets are faces owned by exactly one cell. Each is tagged with the box face
// plane it lies on (all of its vertices share the extreme coordinate).
inline std::vector<BoundaryFacet> box_boundary_facets(int dim, const std::vector<Point> &verts,
                                                      const std::vector<Cell> &cells)
{
  std::map<std::array<Index, 3>, std::pair<int, std::array<Index, 3>>> count;
  for (const auto &c : cells)
  {
    for (int skip = 0; skip <= dim; ++skip)
    {
      std::array<Index, 3> f{-1, -1, -1};
      int k = 0;
      for (int i = 0; i <= dim; ++i)
      {
        if (i != skip)
        {
          f[k++] = c[i];
        }
      }
      auto key = f;
      std::sort(key.begin(), key.begin() + dim);
      auto &entry = count[key];
      entry.first += 1;
      entry.second = f;
    }
  }
  std::vector<BoundaryFacet> out;
  for (const auto &[key, entry] : count)
  {
    if (entry.first != 1)
    {
      continue;
    }
    BoundaryFacet bf;
    bf.vertices = entry.second;
    for (int axis = 0; axis < dim && bf.marker == 0; ++axis)
    {
      for (double side : {0.0, 1.0})
      {
        bool all = true;
        for (int i = 0; i < dim; ++i)
        {
          all = all && verts[static_cast<std::size_t>(bf.vertices[i])][axis] == side;
        }
        if (all)
        {
          bf.marker = 2 * axis + (side == 0.0 ? 1 : 2);
          break;
        }
      }
    }
    out.push_back(bf);
  }
  return out;
}

}  // namespace detail

//
// Structured triangulation of the unit square (each subsquare split along its rising
// diagonal into two triangles) or unit cube (Kuhn subdivision into six tetrahedra along
// the main diagonal). Boundary facets are marked 1..2*dim by box face (see BoxMarker).
//
inline SimplexMesh generate_simplex_grid(int dim, Index n)
{
  if (dim != 2 && dim != 3)
  {
    throw Error("generate_simplex_grid: dimension must be 2 or 3");
  }
  if (n < 1)
  {
    throw Error("generate_simplex_grid: cells per edge must be >= 1");
  }
  const Index m = n + 1;
  const double h = 1.0 / static_cast<double>(n);
  std::vector<Point> verts;
  std::vector<Cell> cells;
  if (dim == 2)
  {
    auto id = [m](Index i, Index j) { return i + j * m; };
    for (Index j = 0; j < m; ++j)
    {
      for (Index i = 0; i < m; ++i)
      {
        verts.push_back({i == n ? 1.0 : i * h, j == n ? 1.0 : j * h, 0.0});
      }
    }
    for (Index j = 0; j < n; ++j)
    {
      for (Index i = 0; i < n; ++i)
      {
        const Index v00 = id(i, j), v10 = id(i + 1, j), v01 = id(i, j + 1),
                    v11 = id(i + 1, j + 1);
        cells.push_back({v00, v10, v11, -1});
        cells.push_back({v00, v11, v01, -1});
      }
    }
  }
  else
  {
    auto id = [m](Index i, Index j, Index k) { return i + j * m + k * m * m; };
    for (Index k = 0; k < m; ++k)
    {
      for (Index j = 0; j < m; ++j)
      {
        for (Index i = 0; i < m; ++i)
        {
          verts.push_back({i == n ? 1.0 : i * h, j == n ? 1.0 : j * h, k == n ? 1.0 : k * h});
        }
      }
    }
    std::array<int, 3> perm{0, 1, 2};
    std::vector<std::array<int, 3>> perms;
    do
    {
      perms.push_back(perm);
    } while (std::next_permutation(perm.begin(), perm.end()));
    for (Index k = 0; k < n; ++k)
    {
      for (Index j = 0; j < n; ++j)
      {
        for (Index i = 0; i < n; ++i)
        {
          for (const auto &p : perms)
          {
            std::array<Index, 3> off{0, 0, 0};
            Cell c{};
            c[0] = id(i, j, k);
            for (int s = 0; s < 3; ++s)
            {
              off[p[s]] = 1;
              c[s + 1] = id(i + off[0], j + off[1], k + off[2]);
            }
            std::array<Point, 4> pts{};
            for (int q = 0; q < 4; ++q)
            {
              pts[q] = verts[static_cast<std::size_t>(c[q])];
            }
            if (detail::signed_volume(3, pts) < 0.0)
            {
              std::swap(c[2], c[3]);
            }
            cells.push_back(c);
          }
        }
      }
    }
  }
  auto facets = detail::box_boundary_facets(dim, verts, cells);
  return SimplexMesh(dim, std::move(verts), std::move(cells), std::move(facets));
}

struct VertexDisplacement
{
  Index vertex = 0;
  Point displacement{};
};

//
// Returns a copy of the mesh with the given interior vertices displaced. Connectivity
// and boundary facets are unchanged.
//
inline SimplexMesh perturb_vertices(const SimplexMesh &mesh,
                                    std::span<const VertexDisplacement> targets)
{
  if (targets.empty())
  {
    return mesh;
  }
  const auto boundary = mesh.boundary_vertex_mask();
  std::vector<Point> verts = mesh.vertices();
  for (const auto &t : targets)
  {
    if (t.vertex < 0 || t.vertex >= mesh.num_vertices())
    {
      throw Error("perturb_vertices: vertex " + std::to_string(t.vertex) + " out of range");
    }
    if (boundary[static_cast<std::size_t>(t.vertex)])
    {
      throw Error("perturb_vertices: vertex " + std::to_string(t.vertex) +
                  " lies on the boundary");
    }
    auto &p = verts[static_cast<std::size_t>(t.vertex)];
    for (int d = 0; d < 3; ++d)
    {
      p[d] += t.displacement[d];
    }
  }
  // The constructor rejects any cell the displacement inverted.
  try
  {
    return SimplexMesh(mesh.dim(), std::move(verts), mesh.cells(), mesh.boundary_facets());
  }
  catch (const DegenerateCellError &e)
  {
    throw DegenerateCellError("perturb_vertices: displacement inverts cell " +
                                  std::to_string(e.cell()),
                              e.cell());
  }
}

//
// Largest step t such that moving `vertex` to x + t*direction keeps every incident cell
// positively oriented (cell volumes are affine in t). Returns +inf if no incident cell
// shrinks along the direction.
//
inline double star_exit_step(const SimplexMesh &mesh, Index vertex, const Point &direction)
{
  const auto [offsets, adj] = mesh.vertex_to_cells();
  double t_max = std::numeric_limits<double>::infinity();
  for (Index k = offsets[static_cast<std::size_t>(vertex)];
       k < offsets[static_cast<std::size_t>(vertex) + 1]; ++k)
  {
    const Index c = adj[static_cast<std::size_t>(k)];
    auto pts = mesh.cell_points(c);
    auto vs = mesh.cell(c);
    const std::span<const Point> span(pts.data(), static_cast<std::size_t>(mesh.dim() + 1));
    const double v0 = detail::signed_volume(mesh.dim(), span);
    for (int i = 0; i <= mesh.dim(); ++i)
    {
      if (vs[i] == vertex)
      {
        for (int d = 0; d < 3; ++d)
        {
          pts[i][d] += direction[d];
        }
      }
    }
    const double v1 = detail::signed_volume(mesh.dim(), span);
    if (v1 < v0)
    {
      t_max = std::min(t_max, v0 / (v0 - v1));
    }
  }
  return t_max;
}

//
// Normalised radius ratio dim * inradius / circumradius of a simplex given by dim+1
// points. Equal to one for the regular simplex and tending to zero under degeneration.
//
inline double simplex_radius_ratio(int dim, std::span<const Point> pts)
{
  const double vol = detail::signed_volume(dim, pts);
  if (!(std::abs(vol) > 0.0))
  {
    throw DegenerateCellError("radius_ratio: degenerate simplex (zero volume)", -1);
  }
  double surface = 0.0;
  for (int skip = 0; skip <= dim; ++skip)
  {
    std::array<Point, 3> f{};
    int k = 0;
    for (int i = 0; i <= dim; ++i)
    {
      if (i != skip)
      {
        f[k++] = pts[i];
      }
    }
    surface += detail::facet_measure(dim, std::span<const Point>(f.data(), dim));
  }
  const double inradius = dim * std::abs(vol) / surface;

  // Circumcentre c relative to pts[0]: (x_i - x_0) . c = |x_i - x_0|^2 / 2.
  std::array<std::array<double, 3>, 3> m{};
  std::array<double, 3> rhs{};
  for (int i = 0; i < dim; ++i)
  {
    const Point e = detail::sub(pts[i + 1], pts[0]);
    for (int d = 0; d < dim; ++d)
    {
      m[i][d] = e[d];
    }
    rhs[i] = 0.5 * (e[0] * e[0] + e[1] * e[1] + e[2] * e[2]);
  }
  double r2 = 0.0;
  if (dim == 2)
  {
    const double det = detail::det2(m[0][0], m[0][1], m[1][0], m[1][1]);
    const double cx = detail::det2(rhs[0], m[0][1], rhs[1], m[1][1]) / det;
    const double cy = detail::det2(m[0][0], rhs[0], m[1][0], rhs[1]) / det;
    r2 = cx * cx + cy * cy;
  }
  else
  {
    const double det = detail::det3(m);
    for (int col = 0; col < 3; ++col)
    {
      auto mc = m;
      for (int row = 0; row < 3; ++row)
      {
        mc[row][col] = rhs[row];
      }
      const double c = detail::det3(mc) / det;
      r2 += c * c;
    }
  }
  const double gamma = dim * inradius / std::sqrt(r2);
  return std::min(gamma, 1.0);
}

inline double radius_ratio(const SimplexMesh &mesh, Index cell)
{
  const auto pts = mesh.cell_points(cell);
  try
  {
    return simplex_radius_ratio(mesh.dim(),
                                std::span<const Point>(pts.data(), mesh.dim() + 1));
  }
  catch (const DegenerateCellError &)
  {
    throw DegenerateCellError("radius_ratio: cell " + std::to_string(cell) + " is degenerate",
                              cell);
  }
}

struct QualityReport
{
  std::vector<double> per_cell_gamma;
  double gamma_min = 1.0;
  // Uniform bins over (0, 1]; bin k covers (k/bins, (k+1)/bins].
  std::vector<Index> histogram;
};

inline QualityReport quality_report(const SimplexMesh &mesh, int bins = 10)
{
  if (bins < 1)
  {
    throw Error("quality_report: bins must be >= 1");
  }
  QualityReport q;
  q.histogram.assign(static_cast<std::size_t>(bins), 0);
  q.per_cell_gamma.resize(static_cast<std::size_t>(mesh.num_cells()));
  for (Index c = 0; c < mesh.num_cells(); ++c)
  {
    const double g = radius_ratio(mesh, c);
    q.per_cell_gamma[static_cast<std::size_t>(c)] = g;
    q.gamma_min = std::min(q.gamma_min, g);
    auto k = static_cast<int>(std::ceil(g * bins)) - 1;
    k = std::clamp(k, 0, bins - 1);
    ++q.histogram[static_cast<std::size_t>(k)];
  }
  return q;
}

//
// Low-quality cells and their local correction regions. Each region is a vertex-connected
// cluster of low-quality cells (its core) plus every cell sharing a vertex with the core.
// Clusters whose extended regions share a vertex are merged, so regions are disjoint as
// closed sets and their Lagrange DOF sets do not intersect.
//
struct RegionSet
{
  std::vector<Index> omega_b;
  std::vector<std::vector<Index>> regions;
  std::vector<std::vector<Index>> cores;

  std::size_t size() const { return regions.size(); }
  bool empty() const { return regions.empty(); }
};

namespace detail
{

struct DisjointSets
{
  explicit DisjointSets(std::size_t n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
  std::size_t find(std::size_t x)
  {
    while (parent[x] != x)
    {
      parent[x] = parent[parent[x]];
      x = parent[x];
    }
    return x;
  }
  void unite(std::size_t a, std::size_t b)
  {
    a = find(a);
    b = find(b);
    if (a != b)
    {
      parent[std::max(a, b)] = std::min(a, b);
    }
  }
  std::vector<std::size_t> parent;
};

}  // namespace detail

inline RegionSet identify_regions(const SimplexMesh &mesh, std::span<const double> gamma,
                                  double threshold = 0.1)
{
  if (!(threshold > 0.0 && threshold < 1.0))
  {
    throw Error("identify_regions: threshold must lie in (0, 1)");
  }
  check_size(gamma.size(), static_cast<std::size_t>(mesh.num_cells()), "identify_regions");
  RegionSet out;
  for (Index c = 0; c < mesh.num_cells(); ++c)
  {
    if (gamma[static_cast<std::size_t>(c)] < threshold)
    {
      out.omega_b.push_back(c);
    }
  }
  if (out.omega_b.empty())
  {
    return out;
  }
  const auto [offsets, adj] = mesh.vertex_to_cells();
  const auto nv = static_cast<std::size_t>(mesh.num_vertices());

  // Union over vertices: every bad cell is joined with each of its vertices, which
  // clusters bad cells by vertex connectivity.
  detail::DisjointSets core_sets(nv);
  std::vector<bool> core_vertex(nv, false);
  for (Index c : out.omega_b)
  {
    auto vs = mesh.cell(c);
    for (Index v : vs)
    {
      core_vertex[static_cast<std::size_t>(v)] = true;
      core_sets.unite(static_cast<std::size_t>(vs[0]), static_cast<std::size_t>(v));
    }
  }
  // Extension: every cell touching a core vertex joins that cluster; its vertices then
  // belong to the region's closure, and any cluster reaching the same vertex is merged.
  detail::DisjointSets region_sets(nv);
  for (std::size_t v = 0; v < nv; ++v)
  {
    if (core_vertex[v])
    {
      region_sets.unite(v, core_sets.find(v));
    }
  }
  for (std::size_t v = 0; v < nv; ++v)
  {
    if (!core_vertex[v])
    {
      continue;
    }
    for (Index k = offsets[v]; k < offsets[v + 1]; ++k)
    {
      for (Index w : mesh.cell(adj[static_cast<std::size_t>(k)]))
      {
        region_sets.unite(v, static_cast<std::size_t>(w));
      }
    }
  }
  // Collect region cells keyed by representative vertex.
  std::map<std::size_t, std::set<Index>> region_cells;
  std::map<std::size_t, std::vector<Index>> region_core;
  for (std::size_t v = 0; v < nv; ++v)
  {
    if (!core_vertex[v])
    {
      continue;
    }
    const std::size_t rep = region_sets.find(v);
    for (Index k = offsets[v]; k < offsets[v + 1]; ++k)
    {
      region_cells[rep].insert(adj[static_cast<std::size_t>(k)]);
    }
  }
  for (Index c : out.omega_b)
  {
    region_core[region_sets.find(static_cast<std::size_t>(mesh.cell(c)[0]))].push_back(c);
  }
  std::vector<std::pair<std::vector<Index>, std::vector<Index>>> collected;
  for (auto &[rep, cells] : region_cells)
  {
    collected.emplace_back(std::vector<Index>(cells.begin(), cells.end()), region_core[rep]);
  }
  // Deterministic order: by smallest cell index.
  std::sort(collected.begin(), collected.end(),
            [](const auto &a, const auto &b) { return a.first.front() < b.first.front(); });
  for (auto &[cells, core] : collected)
  {
    out.regions.push_back(std::move(cells));
    out.cores.push_back(std::move(core));
  }
  return out;
}

inline RegionSet identify_regions(const SimplexMesh &mesh, double threshold = 0.1)
{
  const auto q = quality_report(mesh, 1);
  return identify_regions(mesh, q.per_cell_gamma, threshold);
}

}  // namespace nnmg

#endif  // NNMG_MESH_HPP
