// Copyright the nnmg authors. All Rights Reserved.
// SPDX-License-Identifier: Apache-2.0

#ifndef NNMG_SPARSE_DIRECT_HPP
#define NNMG_SPARSE_DIRECT_HPP

#include <algorithm>
#include <cmath>
#include <deque>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "nnmg/common.hpp"
#include "nnmg/sparse.hpp"

namespace nnmg
{

// Reverse Cuthill-McKee ordering of the symmetric sparsity pattern of A.
// perm[k] is the original index placed at position k.
inline std::vector<Index> reverse_cuthill_mckee(const CsrMatrix &a)
{
  const auto n = static_cast<std::size_t>(a.rows());
  std::vector<Index> degree(n);
  for (std::size_t i = 0; i < n; ++i)
  {
    degree[i] = static_cast<Index>(a.row_cols(static_cast<Index>(i)).size());
  }
  std::vector<Index> order;
  order.reserve(n);
  std::vector<bool> seen(n, false);
  std::vector<Index> by_degree(n);
  std::iota(by_degree.begin(), by_degree.end(), Index{0});
  std::stable_sort(by_degree.begin(), by_degree.end(), [&](Index x, Index y) {
    return degree[static_cast<std::size_t>(x)] < degree[static_cast<std::size_t>(y)];
  });
  std::vector<Index> nbrs;
  for (Index start : by_degree)
  {
    if (seen[static_cast<std::size_t>(start)])
    {
      continue;
    }
    std::deque<Index> queue{start};
    seen[static_cast<std::size_t>(start)] = true;
    while (!queue.empty())
    {
      const Index v = queue.front();
      queue.pop_front();
      order.push_back(v);
      nbrs.clear();
      for (Index w : a.row_cols(v))
      {
        if (!seen[static_cast<std::size_t>(w)])
        {
          seen[static_cast<std::size_t>(w)] = true;
          nbrs.push_back(w);
        }
      }
      std::stable_sort(nbrs.begin(), nbrs.end(), [&](Index x, Index y) {
        return degree[static_cast<std::size_t>(x)] < degree[static_cast<std::size_t>(y)];
      });
      queue.insert(queue.end(), nbrs.begin(), nbrs.end());
    }
  }
  std::reverse(order.begin(), order.end());
  return order;
}

//
// Envelope (skyline) Cholesky factorization of a sparse SPD matrix after RCM reordering.
// Used as the reference direct solver for moderate problem sizes.
//
class EnvelopeCholesky
{
public:
  explicit EnvelopeCholesky(const CsrMatrix &a)
  {
    if (a.rows() != a.cols())
    {
      throw DimensionError("EnvelopeCholesky: matrix is not square");
    }
    n_ = a.rows();
    perm_ = reverse_cuthill_mckee(a);
    std::vector<Index> inv(static_cast<std::size_t>(n_));
    for (Index k = 0; k < n_; ++k)
    {
      inv[static_cast<std::size_t>(perm_[static_cast<std::size_t>(k)])] = k;
    }
    first_.assign(static_cast<std::size_t>(n_), 0);
    for (Index k = 0; k < n_; ++k)
    {
      Index f = k;
      for (Index c : a.row_cols(perm_[static_cast<std::size_t>(k)]))
      {
        f = std::min(f, inv[static_cast<std::size_t>(c)]);
      }
      first_[static_cast<std::size_t>(k)] = f;
    }
    start_.assign(static_cast<std::size_t>(n_ + 1), 0);
    for (Index k = 0; k < n_; ++k)
    {
      start_[static_cast<std::size_t>(k + 1)] =
          start_[static_cast<std::size_t>(k)] + (k - first_[static_cast<std::size_t>(k)] + 1);
    }
    env_.assign(static_cast<std::size_t>(start_.back()), 0.0);
    for (Index k = 0; k < n_; ++k)
    {
      auto rc = a.row_cols(perm_[static_cast<std::size_t>(k)]);
      auto rv = a.row_values(perm_[static_cast<std::size_t>(k)]);
      for (std::size_t q = 0; q < rc.size(); ++q)
      {
        const Index j = inv[static_cast<std::size_t>(rc[q])];
        if (j <= k)
        {
          at(k, j) = rv[q];
        }
      }
    }
    for (Index i = 0; i < n_; ++i)
    {
      const Index fi = first_[static_cast<std::size_t>(i)];
      for (Index j = fi; j <= i; ++j)
      {
        const Index fj = first_[static_cast<std::size_t>(j)];
        double s = at(i, j);
        const Index k0 = std::max(fi, fj);
        const double *li = &at(i, k0);
        const double *lj = &at(j, k0);
        for (Index k = 0; k < j - k0; ++k)
        {
          s -= li[k] * lj[k];
        }
        if (j < i)
        {
          at(i, j) = s / at(j, j);
        }
        else
        {
          if (!(s > 0.0))
          {
            throw NotSpdError("EnvelopeCholesky: non-positive pivot at row " + std::to_string(i),
                              perm_[static_cast<std::size_t>(i)]);
          }
          at(i, i) = std::sqrt(s);
        }
      }
    }
  }

  Index size() const { return n_; }
  Index envelope_size() const { return static_cast<Index>(env_.size()); }

  Vector solve(std::span<const double> b) const
  {
    check_size(b.size(), static_cast<std::size_t>(n_), "EnvelopeCholesky::solve");
    Vector y(static_cast<std::size_t>(n_));
    for (Index k = 0; k < n_; ++k)
    {
      y[static_cast<std::size_t>(k)] = b[static_cast<std::size_t>(perm_[static_cast<std::size_t>(k)])];
    }
    for (Index i = 0; i < n_; ++i)
    {
      double s = y[static_cast<std::size_t>(i)];
      for (Index k = first_[static_cast<std::size_t>(i)]; k < i; ++k)
      {
        s -= at(i, k) * y[static_cast<std::size_t>(k)];
      }
      y[static_cast<std::size_t>(i)] = s / at(i, i);
    }
    for (Index i = n_ - 1; i >= 0; --i)
    {
      y[static_cast<std::size_t>(i)] /= at(i, i);
      const double yi = y[static_cast<std::size_t>(i)];
      for (Index k = first_[static_cast<std::size_t>(i)]; k < i; ++k)
      {
        y[static_cast<std::size_t>(k)] -= at(i, k) * yi;
      }
    }
    Vector x(static_cast<std::size_t>(n_));
    for (Index k = 0; k < n_; ++k)
    {
      x[static_cast<std::size_t>(perm_[static_cast<std::size_t>(k)])] = y[static_cast<std::size_t>(k)];
    }
    return x;
  }

private:
  double &at(Index i, Index j)
  {
    return env_[static_cast<std::size_t>(start_[static_cast<std::size_t>(i)] + j -
                                         first_[static_cast<std::size_t>(i)])];
  }
  const double &at(Index i, Index j) const
  {
    return env_[static_cast<std::size_t>(start_[static_cast<std::size_t>(i)] + j -
                                         first_[static_cast<std::size_t>(i)])];
  }

  Index n_ = 0;
  std::vector<Index> perm_;
  std::vector<Index> first_;
  std::vector<Index> start_;
  std::vector<double> env_;
};

}  // namespace nnmg

#endif  // NNMG_SPARSE_DIRECT_HPP
