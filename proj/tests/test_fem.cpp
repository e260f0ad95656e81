// Copyright the nnmg authors. All Rights Reserved.
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <numbers>

#include <gtest/gtest.h>

#include "nnmg/fem.hpp"
#include "oracles.hpp"

namespace
{

using nnmg::Point;
constexpr double kPi = std::numbers::pi;

double factorial(int n)
{
  return std::tgamma(n + 1.0);
}

nnmg::ProblemSpec poisson(nnmg::Field f, nnmg::Field g, std::vector<int> markers)
{
  nnmg::ProblemSpec spec;
  spec.source = std::move(f);
  for (int m : markers)
  {
    spec.dirichlet.push_back({m, g});
  }
  return spec;
}

std::vector<int> all_markers(int dim)
{
  std::vector<int> m;
  for (int k = 1; k <= 2 * dim; ++k)
  {
    m.push_back(k);
  }
  return m;
}

// Dense solve through the oracle, independent of the library solvers.
oracle::Vec solve_dense(const nnmg::AssembledSystem &sys)
{
  return oracle::solve(oracle::to_dense(sys.A), sys.b);
}

double solve_error(int dim, int degree, int n, const nnmg::Field &exact, const nnmg::Field &f)
{
  const auto mesh = nnmg::generate_simplex_grid(dim, n);
  const nnmg::DofMap dm(mesh, degree);
  const auto sys = nnmg::assemble(mesh, dm, poisson(f, exact, all_markers(dim)));
  const auto u = solve_dense(sys);
  return nnmg::l2_error(mesh, dm, u, exact);
}

}  // namespace

TEST(Quadrature, TriangleMonomialsExact)
{
  for (int deg = 1; deg <= 4; ++deg)
  {
    const auto q = nnmg::quadrature(2, deg);
    for (double w : q.weights)
    {
      EXPECT_GT(w, 0.0);
    }
    for (int a = 0; a <= deg; ++a)
    {
      for (int b = 0; a + b <= deg; ++b)
      {
        double s = 0.0;
        for (std::size_t k = 0; k < q.weights.size(); ++k)
        {
          s += q.weights[k] * std::pow(q.points[k][0], a) * std::pow(q.points[k][1], b);
        }
        EXPECT_NEAR(s, factorial(a) * factorial(b) / factorial(a + b + 2), 1e-14)
            << "rule " << deg << " monomial " << a << "," << b;
      }
    }
  }
}

TEST(Quadrature, TetrahedronMonomialsExact)
{
  for (int deg = 1; deg <= 4; ++deg)
  {
    const auto q = nnmg::quadrature(3, deg);
    for (int a = 0; a <= deg; ++a)
    {
      for (int b = 0; a + b <= deg; ++b)
      {
        for (int c = 0; a + b + c <= deg; ++c)
        {
          double s = 0.0;
          for (std::size_t k = 0; k < q.weights.size(); ++k)
          {
            s += q.weights[k] * std::pow(q.points[k][0], a) * std::pow(q.points[k][1], b) *
                 std::pow(q.points[k][2], c);
          }
          EXPECT_NEAR(s, factorial(a) * factorial(b) * factorial(c) / factorial(a + b + c + 3),
                      1e-14);
        }
      }
    }
  }
}

TEST(Quadrature, IntervalMonomialsExact)
{
  for (int deg = 1; deg <= 5; ++deg)
  {
    const auto q = nnmg::quadrature(1, deg);
    for (int a = 0; a <= deg; ++a)
    {
      double s = 0.0;
      for (std::size_t k = 0; k < q.weights.size(); ++k)
      {
        s += q.weights[k] * std::pow(q.points[k][0], a);
      }
      EXPECT_NEAR(s, 1.0 / (a + 1.0), 1e-14);
    }
  }
}

TEST(Basis, PartitionOfUnityAndKronecker)
{
  for (int dim : {1, 2, 3})
  {
    for (int degree : {1, 2})
    {
      // Nodes: vertices, then edge midpoints.
      std::vector<std::array<double, 3>> nodes(static_cast<std::size_t>(dim + 1));
      for (int d = 0; d < dim; ++d)
      {
        nodes[static_cast<std::size_t>(d + 1)][static_cast<std::size_t>(d)] = 1.0;
      }
      if (degree == 2)
      {
        for (const auto &[a, b] : nnmg::detail::local_edges(dim))
        {
          std::array<double, 3> m{};
          for (int d = 0; d < 3; ++d)
          {
            m[d] = 0.5 * (nodes[a][d] + nodes[b][d]);
          }
          nodes.push_back(m);
        }
      }
      for (std::size_t i = 0; i < nodes.size(); ++i)
      {
        const auto e = nnmg::reference_basis(degree, dim, std::span<const double>(nodes[i].data(), dim));
        ASSERT_EQ(static_cast<std::size_t>(e.count), nodes.size());
        for (int j = 0; j < e.count; ++j)
        {
          EXPECT_NEAR(e.values[j], i == static_cast<std::size_t>(j) ? 1.0 : 0.0, 1e-15);
        }
      }
      const std::array<double, 3> x{0.2, 0.15, 0.1};
      const auto e = nnmg::reference_basis(degree, dim, std::span<const double>(x.data(), dim));
      double s = 0.0;
      std::array<double, 3> gs{};
      for (int j = 0; j < e.count; ++j)
      {
        s += e.values[j];
        for (int d = 0; d < 3; ++d)
        {
          gs[d] += e.grads[j][d];
        }
      }
      EXPECT_NEAR(s, 1.0, 1e-15);
      for (double g : gs)
      {
        EXPECT_NEAR(g, 0.0, 1e-14);
      }
    }
  }
}

TEST(Basis, GradientsMatchFiniteDifferences)
{
  const std::array<double, 3> x{0.21, 0.17, 0.33};
  const double h = 1e-6;
  for (int dim : {2, 3})
  {
    const auto e = nnmg::reference_basis(2, dim, std::span<const double>(x.data(), dim));
    for (int d = 0; d < dim; ++d)
    {
      auto xp = x, xm = x;
      xp[d] += h;
      xm[d] -= h;
      const auto ep = nnmg::reference_basis(2, dim, std::span<const double>(xp.data(), dim));
      const auto em = nnmg::reference_basis(2, dim, std::span<const double>(xm.data(), dim));
      for (int j = 0; j < e.count; ++j)
      {
        EXPECT_NEAR(e.grads[j][d], (ep.values[j] - em.values[j]) / (2 * h), 1e-8);
      }
    }
  }
}

TEST(Basis, RejectsOutsidePointsAndBadDegree)
{
  const std::array<double, 2> out{0.8, 0.8};
  EXPECT_THROW(nnmg::reference_basis(1, 2, out), nnmg::Error);
  const std::array<double, 2> in{0.1, 0.1};
  EXPECT_THROW(nnmg::reference_basis(3, 2, in), nnmg::Error);
}

TEST(DofMap, Counts)
{
  for (int n : {2, 5})
  {
    const auto m2 = nnmg::generate_simplex_grid(2, n);
    EXPECT_EQ(nnmg::DofMap(m2, 1).num_dofs(), (n + 1) * (n + 1));
    EXPECT_EQ(nnmg::DofMap(m2, 2).num_dofs(), (2 * n + 1) * (2 * n + 1));
    EXPECT_EQ(nnmg::DofMap(m2, 2, 2).num_dofs(), 2 * (2 * n + 1) * (2 * n + 1));
    EXPECT_EQ(nnmg::DofMap(m2, 2).boundary_dofs(1).size(), static_cast<std::size_t>(2 * n + 1));
    const auto m3 = nnmg::generate_simplex_grid(3, n);
    EXPECT_EQ(nnmg::DofMap(m3, 2).num_dofs(), (2 * n + 1) * (2 * n + 1) * (2 * n + 1));
    EXPECT_EQ(nnmg::DofMap(m3, 2).boundary_dofs(5).size(),
              static_cast<std::size_t>((2 * n + 1) * (2 * n + 1)));
  }
}

TEST(DofMap, EdgeNodesAreMidpoints)
{
  const auto m = nnmg::generate_simplex_grid(3, 2);
  const nnmg::DofMap dm(m, 2);
  EXPECT_EQ(dm.nodes_per_cell(), 10);
  const auto edges = nnmg::detail::local_edges(3);
  for (nnmg::Index c = 0; c < m.num_cells(); ++c)
  {
    const auto nodes = dm.cell_nodes(c);
    for (std::size_t e = 0; e < edges.size(); ++e)
    {
      const auto &pa = m.vertex(nodes[edges[e][0]]), &pb = m.vertex(nodes[edges[e][1]]);
      const auto &pm = dm.node_coords()[static_cast<std::size_t>(nodes[4 + e])];
      for (int d = 0; d < 3; ++d)
      {
        EXPECT_DOUBLE_EQ(pm[d], 0.5 * (pa[d] + pb[d]));
      }
    }
  }
}

TEST(Stiffness, ReferenceTriangleP1)
{
  const nnmg::SimplexMesh m(2, {{0, 0, 0}, {1, 0, 0}, {0, 1, 0}}, {{0, 1, 2, 0}}, {});
  const nnmg::DofMap dm(m, 1);
  const auto k = oracle::to_dense(nnmg::assemble_stiffness(m, dm, nnmg::ProblemSpec{}));
  const oracle::Mat want{{1.0, -0.5, -0.5}, {-0.5, 0.5, 0.0}, {-0.5, 0.0, 0.5}};
  EXPECT_LT(oracle::max_abs_diff(k, want), 1e-15);
}

TEST(Stiffness, SymmetricWithConstantsInKernel)
{
  for (int dim : {2, 3})
  {
    for (int degree : {1, 2})
    {
      const auto m = nnmg::generate_simplex_grid(dim, 3);
      const nnmg::DofMap dm(m, degree);
      const auto k = nnmg::assemble_stiffness(m, dm, nnmg::ProblemSpec{});
      EXPECT_LT(nnmg::asymmetry(k), 1e-14 * k.max_abs());
      const nnmg::Vector ones(static_cast<std::size_t>(k.rows()), 1.0);
      EXPECT_LT(nnmg::norm_inf(nnmg::spmv(k, ones)), 1e-13 * k.max_abs());
      const auto ev = oracle::symmetric_eigenvalues(oracle::to_dense(k));
      EXPECT_NEAR(ev[0], 0.0, 1e-12 * ev.back());
      EXPECT_GT(ev[1], 1e-6 * ev.back());
    }
  }
}

TEST(Stiffness, ElasticityRigidModesInKernel)
{
  nnmg::ProblemSpec spec;
  spec.kind = nnmg::ProblemKind::Elasticity;
  spec.material = {6.9e10, 0.33};
  for (int dim : {2, 3})
  {
    for (int degree : {1, 2})
    {
      const auto m = nnmg::generate_simplex_grid(dim, 2);
      const nnmg::DofMap dm(m, degree, dim);
      const auto k = nnmg::assemble_stiffness(m, dm, spec);
      EXPECT_LT(nnmg::asymmetry(k), 1e-14 * k.max_abs());
      std::vector<nnmg::Field> modes{[](const Point &) { return Point{1, 0, 0}; },
                                     [](const Point &) { return Point{0, 1, 0}; },
                                     [](const Point &x) { return Point{-x[1], x[0], 0}; }};
      if (dim == 3)
      {
        modes.push_back([](const Point &) { return Point{0, 0, 1}; });
        modes.push_back([](const Point &x) { return Point{0, -x[2], x[1]}; });
        modes.push_back([](const Point &x) { return Point{x[2], 0, -x[0]}; });
      }
      for (const auto &r : modes)
      {
        const auto v = nnmg::interpolate(dm, r);
        EXPECT_LE(nnmg::norm_inf(nnmg::spmv(k, v)), 1e-9 * k.max_abs() * nnmg::norm_inf(v));
      }
    }
  }
}

TEST(Load, SourceAndNeumannTotals)
{
  for (int dim : {2, 3})
  {
    for (int degree : {1, 2})
    {
      const auto m = nnmg::generate_simplex_grid(dim, 3);
      const nnmg::DofMap dm(m, degree);
      nnmg::ProblemSpec spec;
      spec.source = [](const Point &) { return Point{2.0, 0, 0}; };
      spec.neumann.push_back({2, [](const Point &) { return Point{3.0, 0, 0}; }});
      const auto b = nnmg::assemble_load(m, dm, spec);
      double s = 0.0;
      for (double x : b)
      {
        s += x;
      }
      // Partition of unity: sum_i b_i = integral of f plus integral of g over the face.
      EXPECT_NEAR(s, 2.0 + 3.0, 1e-13);
    }
  }
}

TEST(Load, RejectsUnknownOrConflictingMarkers)
{
  const auto m = nnmg::generate_simplex_grid(2, 2);
  const nnmg::DofMap dm(m, 1);
  EXPECT_THROW(nnmg::assemble(m, dm, poisson({}, {}, {7})), nnmg::Error);
  auto spec = poisson({}, {}, {1});
  spec.neumann.push_back({1, [](const Point &) { return Point{}; }});
  EXPECT_THROW(nnmg::assemble(m, dm, spec), nnmg::Error);
  nnmg::ProblemSpec el;
  el.kind = nnmg::ProblemKind::Elasticity;
  EXPECT_THROW(nnmg::assemble(m, dm, el), nnmg::Error);
}

TEST(Dirichlet, EliminationIsSymmetricAndExact)
{
  std::mt19937_64 rng(3);
  const auto a = oracle::random_spd(12, 0.4, rng);
  const auto b = oracle::random_vector(12, rng);
  const std::vector<nnmg::Index> fixed{1, 4, 9};
  const std::vector<double> vals{0.5, -1.0, 2.0};
  const auto sys = nnmg::apply_dirichlet(oracle::to_csr(a), b, fixed, vals);
  EXPECT_EQ(nnmg::asymmetry(sys.A), 0.0);
  const auto x = oracle::solve(oracle::to_dense(sys.A), sys.b);
  for (std::size_t k = 0; k < fixed.size(); ++k)
  {
    EXPECT_NEAR(x[static_cast<std::size_t>(fixed[k])], vals[k], 1e-13);
  }
  // Free rows satisfy the original equations.
  const auto ax = oracle::matvec(a, x);
  for (std::size_t i = 0; i < 12; ++i)
  {
    if (std::find(fixed.begin(), fixed.end(), static_cast<nnmg::Index>(i)) == fixed.end())
    {
      EXPECT_NEAR(ax[i], b[i], 1e-12);
    }
  }
}

TEST(Solve, P1PatchTest)
{
  const nnmg::Field exact = [](const Point &x) { return Point{1 + 2 * x[0] - 3 * x[1] + x[2], 0, 0}; };
  for (int dim : {2, 3})
  {
    EXPECT_LT(solve_error(dim, 1, 3, exact, {}), 1e-12);
  }
}

TEST(Solve, P2ReproducesQuadratics)
{
  const nnmg::Field exact = [](const Point &x) {
    return Point{x[0] * x[0] + x[0] * x[1] - 0.5 * x[1] * x[1] + x[2] * x[2], 0, 0};
  };
  for (int dim : {2, 3})
  {
    const double lap = dim == 2 ? 2.0 - 1.0 : 2.0 - 1.0 + 2.0;
    const nnmg::Field f = [lap](const Point &) { return Point{-lap, 0, 0}; };
    EXPECT_LT(solve_error(dim, 2, 2, exact, f), 1e-12);
  }
}

TEST(Solve, P2ConvergesAtThirdOrder)
{
  const nnmg::Field exact = [](const Point &x) {
    return Point{std::sin(kPi * x[0]) * std::sin(kPi * x[1]), 0, 0};
  };
  const nnmg::Field f = [](const Point &x) {
    return Point{2 * kPi * kPi * std::sin(kPi * x[0]) * std::sin(kPi * x[1]), 0, 0};
  };
  const double e1 = solve_error(2, 2, 4, exact, f);
  const double e2 = solve_error(2, 2, 8, exact, f);
  EXPECT_GE(std::log2(e1 / e2), 2.7);
  const double p1 = std::log2(solve_error(2, 1, 4, exact, f) / solve_error(2, 1, 8, exact, f));
  EXPECT_GE(p1, 1.8);
}

TEST(Solve, NeumannDataEntersWeakForm)
{
  // u = x^2 with u = g on x=0 and grad u . n = 2 on x=1; y faces natural with zero flux.
  const nnmg::Field exact = [](const Point &x) { return Point{x[0] * x[0], 0, 0}; };
  const auto m = nnmg::generate_simplex_grid(2, 3);
  const nnmg::DofMap dm(m, 2);
  auto spec = poisson([](const Point &) { return Point{-2.0, 0, 0}; }, exact, {1});
  spec.neumann.push_back({2, [](const Point &) { return Point{2.0, 0, 0}; }});
  const auto sys = nnmg::assemble(m, dm, spec);
  EXPECT_LT(nnmg::l2_error(m, dm, solve_dense(sys), exact), 1e-12);
}
