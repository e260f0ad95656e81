// Copyright the nnmg authors. All Rights Reserved.
// SPDX-License-Identifier: Apache-2.0

#ifndef NNMG_MG_HPP
#define NNMG_MG_HPP

#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "nnmg/common.hpp"
#include "nnmg/dense.hpp"
#include "nnmg/fem.hpp"
#include "nnmg/krylov.hpp"
#include "nnmg/mesh.hpp"
#include "nnmg/smoothers.hpp"
#include "nnmg/sparse.hpp"
#include "nnmg/transfer.hpp"

namespace nnmg
{

struct HierarchyOptions
{
  int element_degree = 1;
  SmootherConfig smoother;
  bool use_local_correction = false;
  double quality_threshold = 0.1;
  // Relative tolerance of the largest-eigenvalue estimates for Chebyshev smoothing.
  double eigen_tolerance = 1e-8;
};

//
// One grid level. Level 0 is the finest; `prolongation` maps the next coarser level
// into this one and is absent on the coarsest level.
//
struct Level
{
  SimplexMesh mesh;
  DofMap dofmap;
  CsrMatrix A;
  std::optional<Prolongation> prolongation;
  QualityReport quality;
  RegionSet regions;
  std::vector<std::vector<Index>> region_dofs;
  SmootherConfig smoother;
  LocalCorrection correction;
  // Chebyshev eigenvalue estimates of D^{-1}A and of the adjusted block (zero if unused).
  double lambda_max = 0.0;
  double lambda_max_adjusted = 0.0;
};

struct Hierarchy
{
  std::vector<Level> levels;
  AssembledSystem fine_system;
  DenseFactor coarse_factor;

  std::size_t size() const { return levels.size(); }
  const CsrMatrix &fine_operator() const { return levels.front().A; }
};

//
// Builds the Galerkin hierarchy: A_0 is assembled on the finest mesh, every coarser
// operator is P^T A P with interpolation prolongations between adjacent meshes. Low-quality
// regions are identified on every level; local corrections are factored when requested.
//
inline Hierarchy build_hierarchy(const std::vector<SimplexMesh> &meshes, const ProblemSpec &spec,
                                 const HierarchyOptions &opts)
{
  if (meshes.size() < 2)
  {
    throw Error("build_hierarchy: at least two levels are required");
  }
  for (const auto &m : meshes)
  {
    if (m.dim() != meshes.front().dim())
    {
      throw Error("build_hierarchy: all levels must have the same dimension");
    }
  }
  const int vd = spec.kind == ProblemKind::Poisson ? 1 : meshes.front().dim();
  Hierarchy h;
  h.levels.reserve(meshes.size());
  for (std::size_t l = 0; l < meshes.size(); ++l)
  {
    Level lev{meshes[l], DofMap(meshes[l], opts.element_degree, vd), {}, {}, {}, {}, {},
              opts.smoother, {}, 0.0, 0.0};
    lev.quality = quality_report(lev.mesh, 10);
    lev.regions = identify_regions(lev.mesh, lev.quality.per_cell_gamma, opts.quality_threshold);
    lev.region_dofs = dofs_for_regions(lev.dofmap, lev.regions);
    h.levels.push_back(std::move(lev));
  }
  h.fine_system = assemble(h.levels[0].mesh, h.levels[0].dofmap, spec);
  h.levels[0].A = h.fine_system.A;
  for (std::size_t l = 0; l + 1 < h.levels.size(); ++l)
  {
    auto &fine = h.levels[l];
    auto &coarse = h.levels[l + 1];
    fine.prolongation =
        build_prolongation(fine.dofmap, coarse.mesh, coarse.dofmap, static_cast<int>(l));
    coarse.A = coarsen_system(fine.A, *fine.prolongation);
  }
  for (std::size_t l = 0; l + 1 < h.levels.size(); ++l)
  {
    auto &lev = h.levels[l];
    if (opts.use_local_correction)
    {
      lev.correction = build_local_correction(lev.A, lev.region_dofs);
    }
    if (opts.smoother.kind == SmootherConfig::Kind::Chebyshev)
    {
      lev.lambda_max = chebyshev_lambda_max(lev.A, opts.eigen_tolerance);
      lev.lambda_max_adjusted =
          lev.regions.empty() ? lev.lambda_max
                              : adjusted_lambda_max(lev.A, lev.region_dofs, opts.eigen_tolerance);
      lev.smoother.chebyshev.lambda_max =
          opts.smoother.chebyshev.adjusted ? lev.lambda_max_adjusted : lev.lambda_max;
      lev.smoother.validate();
    }
  }
  h.coarse_factor = DenseFactor::factor(DenseMatrix::from_csr(h.levels.back().A));
  return h;
}

namespace detail
{

inline void vcycle_level(const Hierarchy &h, std::size_t l, std::span<const double> b,
                         std::span<double> u)
{
  const Level &lev = h.levels[l];
  if (l + 1 == h.levels.size())
  {
    const Vector x = h.coarse_factor.solve(b);
    std::copy(x.begin(), x.end(), u.begin());
    return;
  }
  combined_smooth(lev.A, b, u, lev.correction, lev.smoother);
  const Vector bc = restrict_residual(*lev.prolongation, residual(lev.A, b, u));
  Vector uc(bc.size(), 0.0);
  vcycle_level(h, l + 1, bc, uc);
  prolong_add(*lev.prolongation, uc, u);
  combined_smooth(lev.A, b, u, lev.correction, lev.smoother);
}

}  // namespace detail

// One V-cycle on the finest level; coarse levels start from a zero guess.
inline void vcycle(const Hierarchy &h, std::span<const double> b, std::span<double> u)
{
  const auto n = static_cast<std::size_t>(h.fine_operator().rows());
  check_size(b.size(), n, "vcycle rhs");
  check_size(u.size(), n, "vcycle solution");
  detail::vcycle_level(h, 0, b, u);
}

struct StationaryResult
{
  Vector u;
  // Relative residual per cycle; entry 0 is the initial guess.
  std::vector<double> history;
  int cycles = 0;
  bool converged = false;
};

//
// Repeated V-cycles until ||b - A u|| / ||b|| <= rtol. For b = 0 the residual is measured
// relative to the initial residual instead.
//
inline StationaryResult solve_stationary(const Hierarchy &h, std::span<const double> b,
                                         std::span<const double> u0, double rtol, int max_cycles)
{
  const CsrMatrix &a = h.fine_operator();
  StationaryResult res;
  res.u.assign(u0.begin(), u0.end());
  check_size(res.u.size(), static_cast<std::size_t>(a.rows()), "solve_stationary");
  double rnorm = norm2(residual(a, b, res.u));
  double ref = norm2(b);
  if (ref == 0.0)
  {
    ref = rnorm;
  }
  if (ref == 0.0)
  {
    res.history = {0.0};
    res.converged = true;
    return res;
  }
  res.history.push_back(rnorm / ref);
  while (res.history.back() > rtol && res.cycles < max_cycles)
  {
    vcycle(h, b, res.u);
    ++res.cycles;
    rnorm = norm2(residual(a, b, res.u));
    res.history.push_back(rnorm / ref);
  }
  res.converged = res.history.back() <= rtol;
  return res;
}

// r -> vcycle(h, r, 0)
inline LinearOperator as_preconditioner(const Hierarchy &h)
{
  return [&h](std::span<const double> r, std::span<double> z) {
    std::fill(z.begin(), z.end(), 0.0);
    vcycle(h, r, z);
  };
}

}  // namespace nnmg

#endif  // NNMG_MG_HPP
