// Copyright the nnmg authors. All Rights Reserved.
// SPDX-License-Identifier: Apache-2.0

#ifndef NNMG_COMMON_HPP
#define NNMG_COMMON_HPP

#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace nnmg
{

using Index = std::int64_t;
using Vector = std::vector<double>;

// Coordinates are always stored with three components; unused trailing components
// are zero for two-dimensional meshes.
using Point = std::array<double, 3>;

//
// Exception hierarchy. Every error raised by the library derives from Error so callers
// can catch the whole family at a stage boundary.
//
class Error : public std::runtime_error
{
public:
  using std::runtime_error::runtime_error;
};

class DimensionError : public Error
{
public:
  using Error::Error;
};

class ParseError : public Error
{
public:
  using Error::Error;
};

class DegenerateCellError : public Error
{
public:
  DegenerateCellError(const std::string &what, Index cell) : Error(what), cell_(cell) {}
  Index cell() const { return cell_; }

private:
  Index cell_;
};

class NotSpdError : public Error
{
public:
  NotSpdError(const std::string &what, Index pivot) : Error(what), pivot_(pivot) {}
  Index pivot() const { return pivot_; }

private:
  Index pivot_;
};

class ConvergenceError : public Error
{
public:
  ConvergenceError(const std::string &what, double best) : Error(what), best_(best) {}
  // Best available estimate at the moment iteration stopped.
  double best_estimate() const { return best_; }

private:
  double best_;
};

inline void check_size(std::size_t got, std::size_t want, const char *what)
{
  if (got != want)
  {
    throw DimensionError(std::string(what) + ": size mismatch (got " + std::to_string(got) +
                         ", expected " + std::to_string(want) + ")");
  }
}

inline double dot(std::span<const double> x, std::span<const double> y)
{
  check_size(x.size(), y.size(), "dot");
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i)
  {
    s += x[i] * y[i];
  }
  return s;
}

inline double norm2(std::span<const double> x)
{
  return std::sqrt(dot(x, x));
}

inline double norm_inf(std::span<const double> x)
{
  double m = 0.0;
  for (double v : x)
  {
    m = std::max(m, std::abs(v));
  }
  return m;
}

// y += alpha * x
inline void axpy(double alpha, std::span<const double> x, std::span<double> y)
{
  check_size(x.size(), y.size(), "axpy");
  for (std::size_t i = 0; i < x.size(); ++i)
  {
    y[i] += alpha * x[i];
  }
}

}  // namespace nnmg

#endif  // NNMG_COMMON_HPP
