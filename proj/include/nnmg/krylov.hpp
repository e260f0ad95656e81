// Copyright the nnmg authors. All Rights Reserved.
// SPDX-License-Identifier: Apache-2.0

#ifndef NNMG_KRYLOV_HPP
#define NNMG_KRYLOV_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "nnmg/common.hpp"
#include "nnmg/sparse.hpp"

namespace nnmg
{

// y = Op(x). Operators write the full output vector.
using LinearOperator = std::function<void(std::span<const double>, std::span<double>)>;

inline LinearOperator as_operator(const CsrMatrix &a)
{
  return [&a](std::span<const double> x, std::span<double> y) { spmv(a, x, y); };
}

struct CgResult
{
  Vector x;
  // Relative residual ||b - A x_k|| / ||b||, entry 0 is the initial guess.
  std::vector<double> history;
  // Preconditioned residual norms sqrt(r_k^T M r_k), same indexing.
  std::vector<double> preconditioned_history;
  int iterations = 0;
  bool converged = false;
};

//
// Preconditioned conjugate gradients. An empty `precond` means no preconditioning. The
// stopping test is on the unpreconditioned relative residual ||b - A x|| / ||b||.
//
inline CgResult cg(const CsrMatrix &a, std::span<const double> b, const LinearOperator &precond,
                   double rtol, int maxit, std::span<const double> x0 = {})
{
  const auto n = static_cast<std::size_t>(a.rows());
  check_size(b.size(), n, "cg right-hand side");
  CgResult res;
  res.x.assign(n, 0.0);
  if (!x0.empty())
  {
    check_size(x0.size(), n, "cg initial guess");
    res.x.assign(x0.begin(), x0.end());
  }
  const double bnorm = norm2(b);
  if (bnorm == 0.0)
  {
    res.x.assign(n, 0.0);
    res.history = {0.0};
    res.preconditioned_history = {0.0};
    res.converged = true;
    return res;
  }
  Vector r = residual(a, b, res.x);
  Vector z(n), q(n);
  auto apply_precond = [&](const Vector &in, Vector &out) {
    if (precond)
    {
      precond(in, out);
    }
    else
    {
      out = in;
    }
  };
  apply_precond(r, z);
  double rz = dot(r, z);
  res.history.push_back(norm2(r) / bnorm);
  res.preconditioned_history.push_back(std::sqrt(std::max(rz, 0.0)));
  if (res.history.back() <= rtol)
  {
    res.converged = true;
    return res;
  }
  Vector p = z;
  for (int it = 1; it <= maxit; ++it)
  {
    spmv(a, p, q);
    const double pq = dot(p, q);
    if (!(pq > 0.0))
    {
      throw Error("cg: non-positive curvature p^T A p = " + std::to_string(pq) +
                  " at iteration " + std::to_string(it) + " (operator not SPD)");
    }
    const double alpha = rz / pq;
    axpy(alpha, p, res.x);
    axpy(-alpha, q, r);
    res.iterations = it;
    apply_precond(r, z);
    const double rz_new = dot(r, z);
    res.history.push_back(norm2(r) / bnorm);
    res.preconditioned_history.push_back(std::sqrt(std::max(rz_new, 0.0)));
    if (res.history.back() <= rtol)
    {
      res.converged = true;
      break;
    }
    if (!(rz_new > 0.0))
    {
      throw Error("cg: preconditioner not positive definite at iteration " +
                  std::to_string(it));
    }
    const double beta = rz_new / rz;
    rz = rz_new;
    for (std::size_t i = 0; i < n; ++i)
    {
      p[i] = z[i] + beta * p[i];
    }
  }
  return res;
}

namespace detail
{

// Number of eigenvalues of the symmetric tridiagonal (diag, off) strictly below x.
inline int sturm_count(std::span<const double> diag, std::span<const double> off, double x)
{
  int count = 0;
  double q = 1.0;
  for (std::size_t i = 0; i < diag.size(); ++i)
  {
    const double b2 = i == 0 ? 0.0 : off[i - 1] * off[i - 1];
    q = diag[i] - x - (i == 0 ? 0.0 : b2 / q);
    if (q == 0.0)
    {
      q = -std::numeric_limits<double>::epsilon() * (std::abs(x) + 1.0);
    }
    if (q < 0.0)
    {
      ++count;
    }
  }
  return count;
}

// Largest eigenvalue of a symmetric tridiagonal matrix by Sturm bisection.
inline double tridiagonal_max_eigenvalue(std::span<const double> diag,
                                         std::span<const double> off)
{
  const std::size_t m = diag.size();
  double lo = std::numeric_limits<double>::max(), hi = -lo;
  for (std::size_t i = 0; i < m; ++i)
  {
    const double r = (i > 0 ? std::abs(off[i - 1]) : 0.0) + (i + 1 < m ? std::abs(off[i]) : 0.0);
    lo = std::min(lo, diag[i] - r);
    hi = std::max(hi, diag[i] + r);
  }
  for (int it = 0; it < 200 && hi - lo > 4 * std::numeric_limits<double>::epsilon() *
                                                 std::max(std::abs(lo), std::abs(hi));
       ++it)
  {
    const double mid = 0.5 * (lo + hi);
    if (sturm_count(diag, off, mid) == static_cast<int>(m))
    {
      hi = mid;
    }
    else
    {
      lo = mid;
    }
  }
  return 0.5 * (lo + hi);
}

}  // namespace detail

//
// Largest eigenvalue of a symmetric positive semidefinite operator by Lanczos with full
// reorthogonalization. Stops once successive Ritz estimates change by at most tol
// relative, or when the Krylov space becomes invariant. The start vector comes from a
// fixed-seed generator so results are reproducible.
//
inline double estimate_lambda_max(const LinearOperator &op, Index n, double tol = 1e-8,
                                  int max_iter = 1000)
{
  if (!(tol > 0.0))
  {
    throw Error("estimate_lambda_max: tol must be positive");
  }
  if (n <= 0)
  {
    throw Error("estimate_lambda_max: empty operator");
  }
  const auto un = static_cast<std::size_t>(n);
  std::mt19937_64 gen(0x5eed1234ULL);
  Vector q(un);
  for (auto &v : q)
  {
    v = 0.5 + static_cast<double>(gen() >> 11) * 0x1.0p-53;
  }
  const double q0 = norm2(q);
  for (auto &v : q)
  {
    v /= q0;
  }
  std::vector<Vector> basis{q};
  std::vector<double> alpha, beta;
  Vector w(un);
  double estimate = 0.0, previous = 0.0;
  const int cap = static_cast<int>(std::min<Index>(n, max_iter));
  for (int j = 0; j < cap; ++j)
  {
    op(basis.back(), w);
    const double a = dot(basis.back(), w);
    alpha.push_back(a);
    axpy(-a, basis.back(), w);
    if (j > 0)
    {
      axpy(-beta.back(), basis[basis.size() - 2], w);
    }
    for (int pass = 0; pass < 2; ++pass)
    {
      for (const auto &v : basis)
      {
        axpy(-dot(v, w), v, w);
      }
    }
    const double b = norm2(w);
    previous = estimate;
    estimate = detail::tridiagonal_max_eigenvalue(alpha, beta);
    const double scale = std::max(std::abs(estimate), std::numeric_limits<double>::min());
    if (j > 0 && std::abs(estimate - previous) <= tol * scale)
    {
      return estimate;
    }
    if (b <= 1e-14 * scale || j + 1 == static_cast<int>(n))
    {
      // Invariant subspace: the Ritz value is exact.
      return estimate;
    }
    beta.push_back(b);
    for (auto &v : w)
    {
      v /= b;
    }
    basis.push_back(w);
  }
  throw ConvergenceError("estimate_lambda_max: no convergence after " + std::to_string(cap) +
                             " Lanczos steps",
                         estimate);
}

}  // namespace nnmg

#endif  // NNMG_KRYLOV_HPP
