// Copyright the nnmg authors. All Rights Reserved.
// SPDX-License-Identifier: Apache-2.0

#ifndef NNMG_TRANSFER_HPP
#define NNMG_TRANSFER_HPP

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "nnmg/common.hpp"
#include "nnmg/fem.hpp"
#include "nnmg/mesh.hpp"
#include "nnmg/sparse.hpp"

namespace nnmg
{

class LocateError : public Error
{
public:
  LocateError(const std::string &what, Index nearest_cell, double min_barycentric)
    : Error(what), nearest_(nearest_cell), min_bary_(min_barycentric)
  {
  }
  Index nearest_cell() const { return nearest_; }
  double min_barycentric() const { return min_bary_; }

private:
  Index nearest_;
  double min_bary_;
};

struct Location
{
  Index cell = -1;
  // Clamped and renormalized; entries beyond dim are zero.
  std::array<double, 4> barycentric{};
};

//
// Point location in a simplicial mesh. Cells are bucketed into a uniform grid of bins
// over the bounding box; a query scans the candidate cells of its bin and returns the
// lowest-index cell whose barycentric coordinates are all >= -tol. Points outside every
// cell by more than the tolerance raise LocateError with the nearest candidate.
//
class PointLocator
{
public:
  static constexpr double kTolerance = 1e-10;

  explicit PointLocator(const SimplexMesh &mesh) : mesh_(&mesh), dim_(mesh.dim())
  {
    const Index nc = mesh.num_cells();
    lo_.fill(0.0);
    hi_.fill(0.0);
    for (int d = 0; d < dim_; ++d)
    {
      lo_[d] = std::numeric_limits<double>::max();
      hi_[d] = -std::numeric_limits<double>::max();
    }
    for (const auto &p : mesh.vertices())
    {
      for (int d = 0; d < dim_; ++d)
      {
        lo_[d] = std::min(lo_[d], p[d]);
        hi_[d] = std::max(hi_[d], p[d]);
      }
    }
    double diag = 0.0;
    for (int d = 0; d < dim_; ++d)
    {
      diag += (hi_[d] - lo_[d]) * (hi_[d] - lo_[d]);
    }
    margin_ = 1e-8 * std::sqrt(diag);
    const auto per_axis = std::max<Index>(
        1, static_cast<Index>(std::ceil(std::pow(static_cast<double>(nc) / 2.0, 1.0 / dim_))));
    for (int d = 0; d < 3; ++d)
    {
      nbins_[d] = d < dim_ ? per_axis : 1;
    }
    bins_.assign(static_cast<std::size_t>(nbins_[0] * nbins_[1] * nbins_[2]), {});
    geo_.reserve(static_cast<std::size_t>(nc));
    for (Index c = 0; c < nc; ++c)
    {
      geo_.push_back(detail::cell_geometry(mesh, c).first);
      const auto pts = mesh.cell_points(c);
      std::array<Index, 3> b0{0, 0, 0}, b1{0, 0, 0};
      for (int d = 0; d < dim_; ++d)
      {
        double mn = pts[0][d], mx = pts[0][d];
        for (int k = 1; k <= dim_; ++k)
        {
          mn = std::min(mn, pts[k][d]);
          mx = std::max(mx, pts[k][d]);
        }
        b0[d] = bin_coord(mn - margin_, d);
        b1[d] = bin_coord(mx + margin_, d);
      }
      for (Index k = b0[2]; k <= b1[2]; ++k)
      {
        for (Index j = b0[1]; j <= b1[1]; ++j)
        {
          for (Index i = b0[0]; i <= b1[0]; ++i)
          {
            bins_[static_cast<std::size_t>(i + nbins_[0] * (j + nbins_[1] * k))].push_back(c);
          }
        }
      }
    }
  }

  // Raw (unclamped) barycentric coordinates of x with respect to cell c.
  std::array<double, 4> barycentric(Index c, const Point &x) const
  {
    const auto &g = geo_[static_cast<std::size_t>(c)];
    std::array<double, 4> lam{};
    lam[0] = 1.0;
    for (int r = 0; r < dim_; ++r)
    {
      double s = 0.0;
      for (int k = 0; k < dim_; ++k)
      {
        s += g.inv[r][k] * (x[k] - g.origin[k]);
      }
      lam[r + 1] = s;
      lam[0] -= s;
    }
    return lam;
  }

  Location locate(const Point &x) const
  {
    std::array<Index, 3> b{0, 0, 0};
    for (int d = 0; d < dim_; ++d)
    {
      b[d] = bin_coord(x[d], d);
    }
    const auto &candidates =
        bins_[static_cast<std::size_t>(b[0] + nbins_[0] * (b[1] + nbins_[1] * b[2]))];
    Index best = -1;
    double best_min = -std::numeric_limits<double>::max();
    for (Index c : candidates)
    {
      const auto lam = barycentric(c, x);
      const double mn = *std::min_element(lam.begin(), lam.begin() + dim_ + 1);
      if (mn >= -kTolerance)
      {
        // Candidates are stored in increasing cell order, so the first hit is the
        // lowest-index cell.
        return make_location(c, lam);
      }
      if (mn > best_min)
      {
        best_min = mn;
        best = c;
      }
    }
    // Outside the bin's candidates: fall back to a full scan for the nearest cell.
    for (Index c = 0; c < mesh_->num_cells(); ++c)
    {
      const auto lam = barycentric(c, x);
      const double mn = *std::min_element(lam.begin(), lam.begin() + dim_ + 1);
      if (mn > best_min)
      {
        best_min = mn;
        best = c;
      }
    }
    if (best >= 0 && best_min >= -kTolerance)
    {
      return make_location(best, barycentric(best, x));
    }
    throw LocateError("locate_point: point (" + std::to_string(x[0]) + ", " +
                          std::to_string(x[1]) + ", " + std::to_string(x[2]) +
                          ") lies outside the mesh; nearest cell " + std::to_string(best) +
                          " has barycentric coordinate " + std::to_string(best_min),
                      best, best_min);
  }

private:
  Index bin_coord(double v, int d) const
  {
    const double w = hi_[d] - lo_[d];
    if (w <= 0.0)
    {
      return 0;
    }
    const auto k = static_cast<Index>(std::floor((v - lo_[d]) / w * static_cast<double>(nbins_[d])));
    return std::clamp<Index>(k, 0, nbins_[d] - 1);
  }

  Location make_location(Index c, std::array<double, 4> lam) const
  {
    double s = 0.0;
    for (int k = 0; k <= dim_; ++k)
    {
      lam[k] = std::clamp(lam[k], 0.0, 1.0);
      s += lam[k];
    }
    for (int k = 0; k <= dim_; ++k)
    {
      lam[k] /= s;
    }
    for (int k = dim_ + 1; k < 4; ++k)
    {
      lam[k] = 0.0;
    }
    return {c, lam};
  }

  const SimplexMesh *mesh_;
  int dim_;
  std::array<double, 3> lo_{}, hi_{};
  double margin_ = 0.0;
  std::array<Index, 3> nbins_{1, 1, 1};
  std::vector<std::vector<Index>> bins_;
  std::vector<detail::CellGeometry> geo_;
};

inline Location locate_point(const SimplexMesh &mesh, const Point &x)
{
  return PointLocator(mesh).locate(x);
}

//
// Interpolation prolongation from a coarse Lagrange space to a fine one on a possibly
// non-nested mesh: row i holds the coarse basis functions evaluated at the i-th fine DOF
// coordinate. Restriction is the transpose.
//
struct Prolongation
{
  CsrMatrix P;
  int fine_level = 0;
  int coarse_level = 1;
};

inline Prolongation build_prolongation(const DofMap &fine, const SimplexMesh &coarse_mesh,
                                       const DofMap &coarse, int fine_level = 0)
{
  if (fine.value_dims() != coarse.value_dims() || fine.degree() != coarse.degree())
  {
    throw Error("build_prolongation: fine and coarse spaces differ in degree or value dimension");
  }
  if (coarse.num_cells() != coarse_mesh.num_cells())
  {
    throw Error("build_prolongation: coarse DOF map does not belong to the coarse mesh");
  }
  const int dim = coarse_mesh.dim();
  const int vd = fine.value_dims();
  const PointLocator locator(coarse_mesh);
  std::vector<Triplet> trip;
  for (Index n = 0; n < fine.num_nodes(); ++n)
  {
    Location loc;
    try
    {
      loc = locator.locate(fine.node_coords()[static_cast<std::size_t>(n)]);
    }
    catch (const LocateError &e)
    {
      throw LocateError("build_prolongation: fine DOF " + std::to_string(n * vd) + ": " +
                            e.what(),
                        e.nearest_cell(), e.min_barycentric());
    }
    const std::array<double, 3> xi{loc.barycentric[1], loc.barycentric[2], loc.barycentric[3]};
    const auto basis =
        reference_basis(coarse.degree(), dim, std::span<const double>(xi.data(), dim));
    const auto nodes = coarse.cell_nodes(loc.cell);
    for (int a = 0; a < basis.count; ++a)
    {
      if (std::abs(basis.values[a]) < 1e-14)
      {
        continue;
      }
      for (int k = 0; k < vd; ++k)
      {
        trip.push_back({n * vd + k, nodes[a] * vd + k, basis.values[a]});
      }
    }
  }
  Prolongation p;
  p.P = CsrMatrix::from_triplets(fine.num_dofs(), coarse.num_dofs(), std::move(trip));
  p.fine_level = fine_level;
  p.coarse_level = fine_level + 1;
  return p;
}

//
// Galerkin coarse operator P^T A P. A coarse basis function that vanishes at every fine
// DOF (possible under sliver cells on a non-nested coarse mesh) gives an empty column of P
// and a zero row and column in P^T A P; such DOFs get a unit diagonal so the operator
// stays nonsingular. Their restricted residual is always zero, so they never contribute.
//
inline CsrMatrix coarsen_system(const CsrMatrix &a_fine, const Prolongation &p)
{
  CsrMatrix ac = triple_product(p.P, a_fine);
  std::vector<bool> active(static_cast<std::size_t>(p.P.cols()), false);
  for (Index c : p.P.col_indices())
  {
    active[static_cast<std::size_t>(c)] = true;
  }
  if (std::all_of(active.begin(), active.end(), [](bool b) { return b; }))
  {
    return ac;
  }
  std::vector<Triplet> trip;
  trip.reserve(static_cast<std::size_t>(ac.nnz()) + active.size());
  for (Index i = 0; i < ac.rows(); ++i)
  {
    auto rc = ac.row_cols(i);
    auto rv = ac.row_values(i);
    for (std::size_t k = 0; k < rc.size(); ++k)
    {
      trip.push_back({i, rc[k], rv[k]});
    }
    if (!active[static_cast<std::size_t>(i)])
    {
      trip.push_back({i, i, 1.0});
    }
  }
  return CsrMatrix::from_triplets(ac.rows(), ac.cols(), std::move(trip));
}

// P^T r
inline Vector restrict_residual(const Prolongation &p, std::span<const double> r_fine)
{
  check_size(r_fine.size(), static_cast<std::size_t>(p.P.rows()), "restrict_residual");
  Vector out(static_cast<std::size_t>(p.P.cols()), 0.0);
  for (Index i = 0; i < p.P.rows(); ++i)
  {
    const double ri = r_fine[static_cast<std::size_t>(i)];
    auto rc = p.P.row_cols(i);
    auto rv = p.P.row_values(i);
    for (std::size_t k = 0; k < rc.size(); ++k)
    {
      out[static_cast<std::size_t>(rc[k])] += rv[k] * ri;
    }
  }
  return out;
}

// u_fine += P u_coarse
inline void prolong_add(const Prolongation &p, std::span<const double> u_coarse,
                        std::span<double> u_fine)
{
  check_size(u_coarse.size(), static_cast<std::size_t>(p.P.cols()), "prolong_add coarse");
  check_size(u_fine.size(), static_cast<std::size_t>(p.P.rows()), "prolong_add fine");
  for (Index i = 0; i < p.P.rows(); ++i)
  {
    auto rc = p.P.row_cols(i);
    auto rv = p.P.row_values(i);
    double s = 0.0;
    for (std::size_t k = 0; k < rc.size(); ++k)
    {
      s += rv[k] * u_coarse[static_cast<std::size_t>(rc[k])];
    }
    u_fine[static_cast<std::size_t>(i)] += s;
  }
}

}  // namespace nnmg

#endif  // NNMG_TRANSFER_HPP
