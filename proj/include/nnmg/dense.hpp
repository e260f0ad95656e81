// Copyright the nnmg authors. All Rights Reserved.
// SPDX-License-Identifier: Apache-2.0

#ifndef NNMG_DENSE_HPP
#define NNMG_DENSE_HPP

#include <cmath>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "nnmg/common.hpp"
#include "nnmg/sparse.hpp"

namespace nnmg
{

// Row-major dense matrix.
class DenseMatrix
{
public:
  DenseMatrix() = default;
  DenseMatrix(Index rows, Index cols, double fill = 0.0)
    : rows_(rows), cols_(cols), data_(static_cast<std::size_t>(rows * cols), fill)
  {
  }

  static DenseMatrix from_csr(const CsrMatrix &a)
  {
    DenseMatrix m(a.rows(), a.cols());
    for (Index i = 0; i < a.rows(); ++i)
    {
      auto rc = a.row_cols(i);
      auto rv = a.row_values(i);
      for (std::size_t k = 0; k < rc.size(); ++k)
      {
        m(i, rc[k]) = rv[k];
      }
    }
    return m;
  }

  Index rows() const { return rows_; }
  Index cols() const { return cols_; }
  double &operator()(Index i, Index j) { return data_[static_cast<std::size_t>(i * cols_ + j)]; }
  double operator()(Index i, Index j) const
  {
    return data_[static_cast<std::size_t>(i * cols_ + j)];
  }
  std::span<const double> data() const { return data_; }

  Vector apply(std::span<const double> x) const
  {
    check_size(x.size(), static_cast<std::size_t>(cols_), "DenseMatrix::apply");
    Vector y(static_cast<std::size_t>(rows_), 0.0);
    for (Index i = 0; i < rows_; ++i)
    {
      double s = 0.0;
      for (Index j = 0; j < cols_; ++j)
      {
        s += (*this)(i, j) * x[static_cast<std::size_t>(j)];
      }
      y[static_cast<std::size_t>(i)] = s;
    }
    return y;
  }

private:
  Index rows_ = 0, cols_ = 0;
  std::vector<double> data_;
};

//
// Direct factorization of a small dense matrix: Cholesky for SPD input, with partially
// pivoted LU available as a fallback for matrices that fail the Cholesky pivot test.
//
class DenseFactor
{
public:
  enum class Kind
  {
    Cholesky,
    LU
  };

  // Throws NotSpdError naming the failing pivot if the matrix is not SPD.
  static DenseFactor cholesky(DenseMatrix a)
  {
    check_square(a);
    const Index n = a.rows();
    for (Index j = 0; j < n; ++j)
    {
      double d = a(j, j);
      for (Index k = 0; k < j; ++k)
      {
        d -= a(j, k) * a(j, k);
      }
      if (!(d > 0.0))
      {
        throw NotSpdError("Cholesky: non-positive pivot " + std::to_string(d) + " at row " +
                              std::to_string(j) + " (matrix not SPD)",
                          j);
      }
      const double ljj = std::sqrt(d);
      a(j, j) = ljj;
      for (Index i = j + 1; i < n; ++i)
      {
        double s = a(i, j);
        for (Index k = 0; k < j; ++k)
        {
          s -= a(i, k) * a(j, k);
        }
        a(i, j) = s / ljj;
      }
    }
    DenseFactor f;
    f.kind_ = Kind::Cholesky;
    f.lu_ = std::move(a);
    return f;
  }

  static DenseFactor lu(DenseMatrix a)
  {
    check_square(a);
    const Index n = a.rows();
    DenseFactor f;
    f.kind_ = Kind::LU;
    f.perm_.resize(static_cast<std::size_t>(n));
    for (Index i = 0; i < n; ++i)
    {
      f.perm_[static_cast<std::size_t>(i)] = i;
    }
    for (Index k = 0; k < n; ++k)
    {
      Index piv = k;
      for (Index i = k + 1; i < n; ++i)
      {
        if (std::abs(a(i, k)) > std::abs(a(piv, k)))
        {
          piv = i;
        }
      }
      if (a(piv, k) == 0.0)
      {
        throw Error("LU: matrix is singular (zero pivot column " + std::to_string(k) + ")");
      }
      if (piv != k)
      {
        for (Index j = 0; j < n; ++j)
        {
          std::swap(a(k, j), a(piv, j));
        }
        std::swap(f.perm_[static_cast<std::size_t>(k)], f.perm_[static_cast<std::size_t>(piv)]);
      }
      for (Index i = k + 1; i < n; ++i)
      {
        const double m = a(i, k) / a(k, k);
        a(i, k) = m;
        for (Index j = k + 1; j < n; ++j)
        {
          a(i, j) -= m * a(k, j);
        }
      }
    }
    f.lu_ = std::move(a);
    return f;
  }

  // Cholesky first, pivoted LU if the matrix is not SPD.
  static DenseFactor factor(const DenseMatrix &a)
  {
    try
    {
      return cholesky(a);
    }
    catch (const NotSpdError &)
    {
      return lu(a);
    }
  }

  Kind kind() const { return kind_; }
  Index size() const { return lu_.rows(); }

  Vector solve(std::span<const double> r) const
  {
    check_size(r.size(), static_cast<std::size_t>(size()), "DenseFactor::solve");
    const Index n = size();
    Vector x(r.begin(), r.end());
    if (kind_ == Kind::Cholesky)
    {
      for (Index i = 0; i < n; ++i)
      {
        double s = x[static_cast<std::size_t>(i)];
        for (Index k = 0; k < i; ++k)
        {
          s -= lu_(i, k) * x[static_cast<std::size_t>(k)];
        }
        x[static_cast<std::size_t>(i)] = s / lu_(i, i);
      }
      for (Index i = n - 1; i >= 0; --i)
      {
        double s = x[static_cast<std::size_t>(i)];
        for (Index k = i + 1; k < n; ++k)
        {
          s -= lu_(k, i) * x[static_cast<std::size_t>(k)];
        }
        x[static_cast<std::size_t>(i)] = s / lu_(i, i);
      }
      return x;
    }
    for (Index i = 0; i < n; ++i)
    {
      x[static_cast<std::size_t>(i)] = r[static_cast<std::size_t>(perm_[static_cast<std::size_t>(i)])];
    }
    for (Index i = 0; i < n; ++i)
    {
      double s = x[static_cast<std::size_t>(i)];
      for (Index k = 0; k < i; ++k)
      {
        s -= lu_(i, k) * x[static_cast<std::size_t>(k)];
      }
      x[static_cast<std::size_t>(i)] = s;
    }
    for (Index i = n - 1; i >= 0; --i)
    {
      double s = x[static_cast<std::size_t>(i)];
      for (Index k = i + 1; k < n; ++k)
      {
        s -= lu_(i, k) * x[static_cast<std::size_t>(k)];
      }
      x[static_cast<std::size_t>(i)] = s / lu_(i, i);
    }
    return x;
  }

private:
  static void check_square(const DenseMatrix &a)
  {
    if (a.rows() != a.cols())
    {
      throw DimensionError("DenseFactor: matrix is not square");
    }
  }

  Kind kind_ = Kind::Cholesky;
  DenseMatrix lu_;
  std::vector<Index> perm_;
};

inline DenseFactor dense_factor(const DenseMatrix &a)
{
  return DenseFactor::factor(a);
}

inline Vector dense_solve(const DenseFactor &f, std::span<const double> r)
{
  return f.solve(r);
}

}  // namespace nnmg

#endif  // NNMG_DENSE_HPP
