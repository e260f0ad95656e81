// Copyright the nnmg authors. All Rights Reserved.
// SPDX-License-Identifier: Apache-2.0

#ifndef NNMG_SPARSE_HPP
#define NNMG_SPARSE_HPP

#include <algorithm>
#include <numeric>
#include <span>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "nnmg/common.hpp"

namespace nnmg
{

struct Triplet
{
  Index row;
  Index col;
  double value;
};

//
// Compressed sparse row matrix with sorted, duplicate-free column indices in each row.
//
class CsrMatrix
{
public:
  CsrMatrix() : row_offsets_(1, 0) {}

  CsrMatrix(Index nrows, Index ncols, std::vector<Index> row_offsets,
            std::vector<Index> col_indices, std::vector<double> values)
    : nrows_(nrows), ncols_(ncols), row_offsets_(std::move(row_offsets)),
      col_indices_(std::move(col_indices)), values_(std::move(values))
  {
    check_size(row_offsets_.size(), static_cast<std::size_t>(nrows_ + 1), "CsrMatrix offsets");
    check_size(col_indices_.size(), values_.size(), "CsrMatrix values");
    if (row_offsets_.front() != 0 ||
        row_offsets_.back() != static_cast<Index>(col_indices_.size()))
    {
      throw Error("CsrMatrix: offsets do not span the index array");
    }
    for (Index i = 0; i < nrows_; ++i)
    {
      if (row_offsets_[i + 1] < row_offsets_[i])
      {
        throw Error("CsrMatrix: offsets not monotone at row " + std::to_string(i));
      }
      for (Index k = row_offsets_[i]; k < row_offsets_[i + 1]; ++k)
      {
        const Index c = col_indices_[k];
        if (c < 0 || c >= ncols_ || (k > row_offsets_[i] && col_indices_[k - 1] >= c))
        {
          throw Error("CsrMatrix: column indices of row " + std::to_string(i) +
                      " not strictly increasing or out of range");
        }
      }
    }
  }

  // Duplicate (row, col) entries are summed.
  static CsrMatrix from_triplets(Index nrows, Index ncols, std::vector<Triplet> entries)
  {
    std::sort(entries.begin(), entries.end(), [](const Triplet &a, const Triplet &b) {
      return std::tie(a.row, a.col) < std::tie(b.row, b.col);
    });
    std::vector<Index> offsets(static_cast<std::size_t>(nrows + 1), 0);
    std::vector<Index> cols;
    std::vector<double> vals;
    cols.reserve(entries.size());
    vals.reserve(entries.size());
    for (std::size_t k = 0; k < entries.size(); ++k)
    {
      const auto &e = entries[k];
      if (e.row < 0 || e.row >= nrows || e.col < 0 || e.col >= ncols)
      {
        throw DimensionError("CsrMatrix::from_triplets: entry (" + std::to_string(e.row) + ", " +
                             std::to_string(e.col) + ") out of range");
      }
      if (k > 0 && entries[k - 1].row == e.row && entries[k - 1].col == e.col)
      {
        vals.back() += e.value;
        continue;
      }
      cols.push_back(e.col);
      vals.push_back(e.value);
      ++offsets[static_cast<std::size_t>(e.row + 1)];
    }
    std::partial_sum(offsets.begin(), offsets.end(), offsets.begin());
    return CsrMatrix(nrows, ncols, std::move(offsets), std::move(cols), std::move(vals));
  }

  static CsrMatrix identity(Index n)
  {
    std::vector<Index> offsets(static_cast<std::size_t>(n + 1));
    std::iota(offsets.begin(), offsets.end(), Index{0});
    std::vector<Index> cols(static_cast<std::size_t>(n));
    std::iota(cols.begin(), cols.end(), Index{0});
    return CsrMatrix(n, n, std::move(offsets), std::move(cols),
                     std::vector<double>(static_cast<std::size_t>(n), 1.0));
  }

  Index rows() const { return nrows_; }
  Index cols() const { return ncols_; }
  Index nnz() const { return static_cast<Index>(values_.size()); }

  const std::vector<Index> &row_offsets() const { return row_offsets_; }
  const std::vector<Index> &col_indices() const { return col_indices_; }
  const std::vector<double> &values() const { return values_; }
  std::vector<double> &values() { return values_; }

  std::span<const Index> row_cols(Index i) const
  {
    return {col_indices_.data() + row_offsets_[i],
            static_cast<std::size_t>(row_offsets_[i + 1] - row_offsets_[i])};
  }
  std::span<const double> row_values(Index i) const
  {
    return {values_.data() + row_offsets_[i],
            static_cast<std::size_t>(row_offsets_[i + 1] - row_offsets_[i])};
  }

  // Entry lookup by binary search; zero if not stored.
  double operator()(Index i, Index j) const
  {
    auto cols = row_cols(i);
    auto it = std::lower_bound(cols.begin(), cols.end(), j);
    if (it == cols.end() || *it != j)
    {
      return 0.0;
    }
    return row_values(i)[static_cast<std::size_t>(it - cols.begin())];
  }

  Vector diagonal() const
  {
    Vector d(static_cast<std::size_t>(std::min(nrows_, ncols_)), 0.0);
    for (Index i = 0; i < static_cast<Index>(d.size()); ++i)
    {
      d[static_cast<std::size_t>(i)] = (*this)(i, i);
    }
    return d;
  }

  double max_abs() const
  {
    double m = 0.0;
    for (double v : values_)
    {
      m = std::max(m, std::abs(v));
    }
    return m;
  }

private:
  Index nrows_ = 0, ncols_ = 0;
  std::vector<Index> row_offsets_;
  std::vector<Index> col_indices_;
  std::vector<double> values_;
};

// y = A x
inline void spmv(const CsrMatrix &a, std::span<const double> x, std::span<double> y)
{
  check_size(x.size(), static_cast<std::size_t>(a.cols()), "spmv input");
  check_size(y.size(), static_cast<std::size_t>(a.rows()), "spmv output");
  const auto &off = a.row_offsets();
  const auto &col = a.col_indices();
  const auto &val = a.values();
  for (Index i = 0; i < a.rows(); ++i)
  {
    double s = 0.0;
    for (Index k = off[i]; k < off[i + 1]; ++k)
    {
      s += val[k] * x[static_cast<std::size_t>(col[k])];
    }
    y[static_cast<std::size_t>(i)] = s;
  }
}

inline Vector spmv(const CsrMatrix &a, std::span<const double> x)
{
  Vector y(static_cast<std::size_t>(a.rows()));
  spmv(a, x, y);
  return y;
}

// r = b - A x
inline Vector residual(const CsrMatrix &a, std::span<const double> b, std::span<const double> x)
{
  check_size(b.size(), static_cast<std::size_t>(a.rows()), "residual");
  Vector r = spmv(a, x);
  for (std::size_t i = 0; i < r.size(); ++i)
  {
    r[i] = b[i] - r[i];
  }
  return r;
}

inline CsrMatrix transpose(const CsrMatrix &a)
{
  std::vector<Index> offsets(static_cast<std::size_t>(a.cols() + 1), 0);
  for (Index c : a.col_indices())
  {
    ++offsets[static_cast<std::size_t>(c + 1)];
  }
  std::partial_sum(offsets.begin(), offsets.end(), offsets.begin());
  std::vector<Index> cols(static_cast<std::size_t>(a.nnz()));
  std::vector<double> vals(static_cast<std::size_t>(a.nnz()));
  std::vector<Index> fill(offsets.begin(), offsets.end() - 1);
  // Rows are visited in increasing order, so each transposed row comes out sorted.
  for (Index i = 0; i < a.rows(); ++i)
  {
    auto rc = a.row_cols(i);
    auto rv = a.row_values(i);
    for (std::size_t k = 0; k < rc.size(); ++k)
    {
      const auto pos = static_cast<std::size_t>(fill[static_cast<std::size_t>(rc[k])]++);
      cols[pos] = i;
      vals[pos] = rv[k];
    }
  }
  return CsrMatrix(a.cols(), a.rows(), std::move(offsets), std::move(cols), std::move(vals));
}

// C = A B (row-by-row Gustavson product with a dense accumulator).
inline CsrMatrix multiply(const CsrMatrix &a, const CsrMatrix &b)
{
  if (a.cols() != b.rows())
  {
    throw DimensionError("multiply: inner dimensions differ (" + std::to_string(a.cols()) +
                         " vs " + std::to_string(b.rows()) + ")");
  }
  std::vector<Index> offsets(static_cast<std::size_t>(a.rows() + 1), 0);
  std::vector<Index> cols;
  std::vector<double> vals;
  std::vector<double> acc(static_cast<std::size_t>(b.cols()), 0.0);
  std::vector<Index> marker(static_cast<std::size_t>(b.cols()), -1);
  std::vector<Index> touched;
  for (Index i = 0; i < a.rows(); ++i)
  {
    touched.clear();
    auto ac = a.row_cols(i);
    auto av = a.row_values(i);
    for (std::size_t ka = 0; ka < ac.size(); ++ka)
    {
      auto bc = b.row_cols(ac[ka]);
      auto bv = b.row_values(ac[ka]);
      for (std::size_t kb = 0; kb < bc.size(); ++kb)
      {
        const auto j = static_cast<std::size_t>(bc[kb]);
        if (marker[j] != i)
        {
          marker[j] = i;
          acc[j] = 0.0;
          touched.push_back(bc[kb]);
        }
        acc[j] += av[ka] * bv[kb];
      }
    }
    std::sort(touched.begin(), touched.end());
    for (Index j : touched)
    {
      cols.push_back(j);
      vals.push_back(acc[static_cast<std::size_t>(j)]);
    }
    offsets[static_cast<std::size_t>(i + 1)] = static_cast<Index>(cols.size());
  }
  return CsrMatrix(a.rows(), b.cols(), std::move(offsets), std::move(cols), std::move(vals));
}

// P^T A P, computed as P^T (A P).
inline CsrMatrix triple_product(const CsrMatrix &p, const CsrMatrix &a)
{
  if (a.rows() != a.cols() || p.rows() != a.rows())
  {
    throw DimensionError("triple_product: P is " + std::to_string(p.rows()) + "x" +
                         std::to_string(p.cols()) + " but A is " + std::to_string(a.rows()) +
                         "x" + std::to_string(a.cols()));
  }
  return multiply(transpose(p), multiply(a, p));
}

// Principal submatrix A(idx, idx) in the order given by idx.
inline CsrMatrix principal_submatrix(const CsrMatrix &a, std::span<const Index> idx)
{
  std::vector<Index> local(static_cast<std::size_t>(a.cols()), -1);
  for (std::size_t k = 0; k < idx.size(); ++k)
  {
    if (idx[k] < 0 || idx[k] >= a.cols())
    {
      throw DimensionError("principal_submatrix: index " + std::to_string(idx[k]) +
                           " out of range");
    }
    local[static_cast<std::size_t>(idx[k])] = static_cast<Index>(k);
  }
  std::vector<Triplet> t;
  for (std::size_t k = 0; k < idx.size(); ++k)
  {
    auto rc = a.row_cols(idx[k]);
    auto rv = a.row_values(idx[k]);
    for (std::size_t q = 0; q < rc.size(); ++q)
    {
      const Index j = local[static_cast<std::size_t>(rc[q])];
      if (j >= 0)
      {
        t.push_back({static_cast<Index>(k), j, rv[q]});
      }
    }
  }
  const auto n = static_cast<Index>(idx.size());
  return CsrMatrix::from_triplets(n, n, std::move(t));
}

// max |A - A^T|
inline double asymmetry(const CsrMatrix &a)
{
  const CsrMatrix at = transpose(a);
  double m = 0.0;
  for (Index i = 0; i < a.rows(); ++i)
  {
    auto rc = a.row_cols(i);
    auto rv = a.row_values(i);
    for (std::size_t k = 0; k < rc.size(); ++k)
    {
      m = std::max(m, std::abs(rv[k] - at(i, rc[k])));
    }
    auto tc = at.row_cols(i);
    auto tv = at.row_values(i);
    for (std::size_t k = 0; k < tc.size(); ++k)
    {
      m = std::max(m, std::abs(tv[k] - a(i, tc[k])));
    }
  }
  return m;
}

}  // namespace nnmg

#endif  // NNMG_SPARSE_HPP
