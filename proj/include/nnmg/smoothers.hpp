// Copyright the nnmg authors. All Rights Reserved.
// SPDX-License-Identifier: Apache-2.0

#ifndef NNMG_SMOOTHERS_HPP
#define NNMG_SMOOTHERS_HPP

#include <algorithm>
#include <cmath>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "nnmg/common.hpp"
#include "nnmg/dense.hpp"
#include "nnmg/fem.hpp"
#include "nnmg/krylov.hpp"
#include "nnmg/mesh.hpp"
#include "nnmg/sparse.hpp"

namespace nnmg
{

struct ChebyshevParams
{
  // Upper end of the smoothing interval for the Jacobi-scaled operator D^{-1} A.
  double lambda_max = 0.0;
  // Lower end as a fraction of lambda_max.
  double lambda_min_fraction = 0.1;
  // Use the largest eigenvalue of the block excluding low-quality regions.
  bool adjusted = false;
};

struct SmootherConfig
{
  enum class Kind
  {
    SGS,
    Chebyshev
  };

  Kind kind = Kind::SGS;
  // Symmetric Gauss-Seidel sweeps, or the Chebyshev polynomial degree.
  int sweeps = 1;
  ChebyshevParams chebyshev;

  void validate() const
  {
    if (sweeps < 0)
    {
      throw Error("SmootherConfig: sweeps must be non-negative");
    }
    if (kind == Kind::Chebyshev)
    {
      if (!(chebyshev.lambda_max > 0.0))
      {
        throw Error("SmootherConfig: Chebyshev lambda_max must be positive");
      }
      // A fraction of one collapses the interval to a point (Richardson iteration).
      if (!(chebyshev.lambda_min_fraction > 0.0 && chebyshev.lambda_min_fraction <= 1.0))
      {
        throw Error("SmootherConfig: lambda_min_fraction must lie in (0, 1]");
      }
    }
  }
};

// u <- u + (D - L)^{-1}(b - A u), then the same in reverse order; repeated `sweeps` times.
inline void sgs_sweep(const CsrMatrix &a, std::span<const double> b, std::span<double> u,
                      int sweeps)
{
  check_size(b.size(), static_cast<std::size_t>(a.rows()), "sgs_sweep rhs");
  check_size(u.size(), static_cast<std::size_t>(a.rows()), "sgs_sweep solution");
  const Index n = a.rows();
  auto relax = [&](Index i) {
    auto rc = a.row_cols(i);
    auto rv = a.row_values(i);
    double s = b[static_cast<std::size_t>(i)];
    double diag = 0.0;
    for (std::size_t k = 0; k < rc.size(); ++k)
    {
      if (rc[k] == i)
      {
        diag = rv[k];
      }
      else
      {
        s -= rv[k] * u[static_cast<std::size_t>(rc[k])];
      }
    }
    if (diag == 0.0)
    {
      throw Error("sgs_sweep: zero diagonal entry in row " + std::to_string(i));
    }
    u[static_cast<std::size_t>(i)] = s / diag;
  };
  for (int s = 0; s < sweeps; ++s)
  {
    for (Index i = 0; i < n; ++i)
    {
      relax(i);
    }
    for (Index i = n - 1; i >= 0; --i)
    {
      relax(i);
    }
  }
}

namespace detail
{

inline Vector inverse_diagonal(const CsrMatrix &a)
{
  Vector d = a.diagonal();
  for (std::size_t i = 0; i < d.size(); ++i)
  {
    if (!(d[i] > 0.0))
    {
      throw Error("Jacobi scaling: non-positive diagonal entry in row " + std::to_string(i));
    }
    d[i] = 1.0 / d[i];
  }
  return d;
}

}  // namespace detail

//
// Jacobi-preconditioned Chebyshev iteration of degree `degree` on the interval
// [fraction * lambda_max, lambda_max] of D^{-1} A (first-kind three-term recurrence).
// The error propagator is T_k((theta - D^{-1}A)/delta) / T_k(theta/delta).
//
inline void chebyshev_smooth(const CsrMatrix &a, std::span<const double> b, std::span<double> u,
                             int degree, const SmootherConfig &cfg)
{
  if (!(cfg.chebyshev.lambda_max > 0.0))
  {
    throw Error("chebyshev_smooth: lambda_max must be positive");
  }
  check_size(b.size(), static_cast<std::size_t>(a.rows()), "chebyshev_smooth rhs");
  check_size(u.size(), static_cast<std::size_t>(a.rows()), "chebyshev_smooth solution");
  if (degree <= 0)
  {
    return;
  }
  const auto n = u.size();
  const Vector dinv = detail::inverse_diagonal(a);
  const double lmax = cfg.chebyshev.lambda_max;
  const double lmin = cfg.chebyshev.lambda_min_fraction * lmax;
  const double theta = 0.5 * (lmax + lmin);
  const double delta = 0.5 * (lmax - lmin);
  Vector r = residual(a, b, u);
  Vector d(n), ad(n);
  for (std::size_t i = 0; i < n; ++i)
  {
    d[i] = dinv[i] * r[i] / theta;
  }
  if (delta == 0.0)
  {
    // Single-point interval: Richardson with step 1/theta.
    for (int k = 0; k < degree; ++k)
    {
      axpy(1.0, d, u);
      if (k + 1 < degree)
      {
        r = residual(a, b, u);
        for (std::size_t i = 0; i < n; ++i)
        {
          d[i] = dinv[i] * r[i] / theta;
        }
      }
    }
    return;
  }
  const double sigma = theta / delta;
  double rho = 1.0 / sigma;
  for (int k = 0; k < degree; ++k)
  {
    axpy(1.0, d, u);
    if (k + 1 == degree)
    {
      break;
    }
    spmv(a, d, ad);
    axpy(-1.0, ad, r);
    const double rho_next = 1.0 / (2.0 * sigma - rho);
    for (std::size_t i = 0; i < n; ++i)
    {
      d[i] = rho_next * rho * d[i] + 2.0 * rho_next / delta * dinv[i] * r[i];
    }
    rho = rho_next;
  }
}

// One application of the configured global smoother.
inline void global_smooth(const CsrMatrix &a, std::span<const double> b, std::span<double> u,
                          const SmootherConfig &cfg)
{
  if (cfg.kind == SmootherConfig::Kind::SGS)
  {
    sgs_sweep(a, b, u, cfg.sweeps);
  }
  else
  {
    chebyshev_smooth(a, b, u, cfg.sweeps, cfg);
  }
}

// Symmetric Jacobi scaling D^{-1/2} A D^{-1/2}, which shares its spectrum with D^{-1} A.
inline LinearOperator jacobi_scaled_operator(const CsrMatrix &a)
{
  Vector s = a.diagonal();
  for (std::size_t i = 0; i < s.size(); ++i)
  {
    if (!(s[i] > 0.0))
    {
      throw Error("Jacobi scaling: non-positive diagonal entry in row " + std::to_string(i));
    }
    s[i] = 1.0 / std::sqrt(s[i]);
  }
  return [&a, s = std::move(s)](std::span<const double> x, std::span<double> y) {
    Vector t(x.size());
    for (std::size_t i = 0; i < x.size(); ++i)
    {
      t[i] = s[i] * x[i];
    }
    spmv(a, t, y);
    for (std::size_t i = 0; i < y.size(); ++i)
    {
      y[i] *= s[i];
    }
  };
}

// Largest eigenvalue of D^{-1} A.
inline double chebyshev_lambda_max(const CsrMatrix &a, double tol = 1e-8)
{
  return estimate_lambda_max(jacobi_scaled_operator(a), a.rows(), tol);
}

//
// Largest eigenvalue of the Jacobi-scaled block A_gg, where g is the complement of the
// union of the given DOF sets.
//
inline double adjusted_lambda_max(const CsrMatrix &a, const std::vector<std::vector<Index>> &sets,
                                  double tol = 1e-8)
{
  std::vector<bool> excluded(static_cast<std::size_t>(a.rows()), false);
  bool any = false;
  for (const auto &s : sets)
  {
    for (Index i : s)
    {
      excluded[static_cast<std::size_t>(i)] = true;
      any = true;
    }
  }
  if (!any)
  {
    return chebyshev_lambda_max(a, tol);
  }
  std::vector<Index> keep;
  for (Index i = 0; i < a.rows(); ++i)
  {
    if (!excluded[static_cast<std::size_t>(i)])
    {
      keep.push_back(i);
    }
  }
  if (keep.empty())
  {
    throw Error("adjusted_lambda_max: the regions cover every DOF (empty complement block)");
  }
  const CsrMatrix agg = principal_submatrix(a, keep);
  return chebyshev_lambda_max(agg, tol);
}

//
// DOF sets of local correction regions: all DOFs of every cell in each region (every
// component for vector fields), sorted.
//
inline std::vector<std::vector<Index>> dofs_for_regions(const DofMap &dofmap,
                                                        const RegionSet &regions)
{
  std::vector<std::vector<Index>> out;
  for (const auto &cells : regions.regions)
  {
    std::set<Index> dofs;
    for (Index c : cells)
    {
      for (Index d : dofmap.cell_dofs(c))
      {
        dofs.insert(d);
      }
    }
    out.emplace_back(dofs.begin(), dofs.end());
  }
  return out;
}

//
// Local residual correction S_c = sum_d I_d (I_d^T A I_d)^{-1} I_d^T over disjoint DOF
// sets. Each local block is factored once at construction.
//
class LocalCorrection
{
public:
  struct Region
  {
    std::vector<Index> dofs;
    DenseFactor factor;
  };

  LocalCorrection() = default;

  LocalCorrection(const CsrMatrix &a, const std::vector<std::vector<Index>> &dof_sets)
    : n_global_(a.rows())
  {
    std::vector<int> owner(static_cast<std::size_t>(a.rows()), -1);
    for (std::size_t d = 0; d < dof_sets.size(); ++d)
    {
      const auto &set = dof_sets[d];
      if (set.empty())
      {
        continue;
      }
      for (Index i : set)
      {
        if (i < 0 || i >= a.rows())
        {
          throw DimensionError("LocalCorrection: DOF " + std::to_string(i) + " out of range");
        }
        auto &o = owner[static_cast<std::size_t>(i)];
        if (o >= 0)
        {
          throw Error("LocalCorrection: DOF " + std::to_string(i) + " belongs to regions " +
                      std::to_string(o) + " and " + std::to_string(d) + " (sets must be disjoint)");
        }
        o = static_cast<int>(d);
      }
      const DenseMatrix local = DenseMatrix::from_csr(principal_submatrix(a, set));
      try
      {
        regions_.push_back({set, DenseFactor::cholesky(local)});
      }
      catch (const NotSpdError &e)
      {
        throw NotSpdError("LocalCorrection: local block of region " + std::to_string(d) +
                              " is not SPD (" + e.what() + ")",
                          e.pivot());
      }
    }
  }

  bool empty() const { return regions_.empty(); }
  Index n_global() const { return n_global_; }
  const std::vector<Region> &regions() const { return regions_; }
  Index num_local_dofs() const
  {
    Index s = 0;
    for (const auto &r : regions_)
    {
      s += static_cast<Index>(r.dofs.size());
    }
    return s;
  }

  // S_c r: zero outside the regions.
  Vector apply(std::span<const double> r) const
  {
    check_size(r.size(), static_cast<std::size_t>(n_global_), "LocalCorrection::apply");
    Vector out(r.size(), 0.0);
    Vector local;
    for (const auto &reg : regions_)
    {
      local.resize(reg.dofs.size());
      for (std::size_t k = 0; k < reg.dofs.size(); ++k)
      {
        local[k] = r[static_cast<std::size_t>(reg.dofs[k])];
      }
      const Vector e = reg.factor.solve(local);
      for (std::size_t k = 0; k < reg.dofs.size(); ++k)
      {
        out[static_cast<std::size_t>(reg.dofs[k])] += e[k];
      }
    }
    return out;
  }

  // u += S_c (b - A u)
  void correct(const CsrMatrix &a, std::span<const double> b, std::span<double> u) const
  {
    if (regions_.empty())
    {
      return;
    }
    const Vector e = apply(residual(a, b, u));
    axpy(1.0, e, u);
  }

private:
  Index n_global_ = 0;
  std::vector<Region> regions_;
};

inline LocalCorrection build_local_correction(const CsrMatrix &a,
                                              const std::vector<std::vector<Index>> &dof_sets)
{
  return LocalCorrection(a, dof_sets);
}

inline Vector apply_local_correction(const LocalCorrection &sc, std::span<const double> r)
{
  return sc.apply(r);
}

//
// Global-local sandwich smoother: local correction, global smoother, local correction.
// With an empty local correction this is the global smoother alone.
//
inline void combined_smooth(const CsrMatrix &a, std::span<const double> b, std::span<double> u,
                            const LocalCorrection &sc, const SmootherConfig &global)
{
  sc.correct(a, b, u);
  global_smooth(a, b, u, global);
  sc.correct(a, b, u);
}

}  // namespace nnmg

#endif  // NNMG_SMOOTHERS_HPP
