// Copyright the nnmg authors. All Rights Reserved.
// SPDX-License-Identifier: Apache-2.0

// Acceptance checks. Prints one PASS/FAIL line per criterion and exits non-zero if any
// criterion fails.

#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <numbers>
#include <random>
#include <set>
#include <sstream>
#include <string>

#include "nnmg/experiment.hpp"
#include "oracles.hpp"

namespace
{

using json = nlohmann::ordered_json;
using nnmg::Point;

const std::string kConfigDir = NNMG_CONFIG_DIR;

json load(const std::string &name)
{
  std::ifstream in(kConfigDir + "/" + name);
  if (!in)
  {
    throw nnmg::Error("acceptance: cannot open config " + name);
  }
  return json::parse(in);
}

nnmg::ExperimentConfig make(json j)
{
  return nnmg::ExperimentConfig::from_json(j, kConfigDir);
}

json with(json j, const std::string &case_kind, bool correction)
{
  j["case"] = case_kind;
  j["local_correction"] = correction;
  return j;
}

int iterations(const json &j)
{
  const auto rep = nnmg::run(make(j));
  return rep.converged ? rep.iterations : -1;
}

struct Outcome
{
  bool pass = true;
  std::ostringstream detail;

  void check(bool ok, const std::string &what)
  {
    if (!ok)
    {
      pass = false;
      detail << " [failed: " << what << "]";
    }
  }
};

// Dense materialization of a linear map given by its action on unit vectors.
oracle::Mat materialize(std::size_t n, const std::function<nnmg::Vector(const nnmg::Vector &)> &f)
{
  auto m = oracle::zeros(n, n);
  for (std::size_t j = 0; j < n; ++j)
  {
    nnmg::Vector e(n, 0.0);
    e[j] = 1.0;
    const auto col = f(e);
    for (std::size_t i = 0; i < n; ++i)
    {
      m[i][j] = col[i];
    }
  }
  return m;
}

std::vector<std::vector<nnmg::Index>> random_disjoint_sets(std::size_t n, std::mt19937_64 &rng)
{
  std::vector<nnmg::Index> perm(n);
  std::iota(perm.begin(), perm.end(), nnmg::Index{0});
  std::shuffle(perm.begin(), perm.end(), rng);
  std::vector<std::vector<nnmg::Index>> sets{{perm.begin(), perm.begin() + 4},
                                             {perm.begin() + 4, perm.begin() + 9}};
  for (auto &s : sets)
  {
    std::sort(s.begin(), s.end());
  }
  return sets;
}

void criterion1(Outcome &o)
{
  std::mt19937_64 rng(20261015);
  double worst_alg = 0.0, worst_eig = 0.0;
  for (int trial = 0; trial < 10; ++trial)
  {
    const std::size_t n = 20 + static_cast<std::size_t>(trial) * 3;
    const auto a = oracle::random_spd(n, 0.2, rng);
    const auto sa = oracle::to_csr(a);
    const auto x = oracle::random_vector(n, rng);
    const double scale = oracle::max_abs(a);

    worst_alg = std::max(worst_alg, oracle::max_abs_diff(nnmg::spmv(sa, x), oracle::matvec(a, x)) / scale);

    const auto p = oracle::random_sparse(n, n / 2, 0.25, rng);
    const auto rap = oracle::matmul(oracle::transpose(p), oracle::matmul(a, p));
    worst_alg = std::max(worst_alg, oracle::max_abs_diff(oracle::to_dense(nnmg::triple_product(oracle::to_csr(p), sa)), rap) /
                                        std::max(1.0, oracle::max_abs(rap)));

    const auto dense_spd = oracle::random_dense_spd(n, rng);
    const auto f = nnmg::DenseFactor::factor(nnmg::DenseMatrix::from_csr(oracle::to_csr(dense_spd)));
    worst_alg = std::max(worst_alg, oracle::max_abs_diff(f.solve(x), oracle::solve(dense_spd, x)));

    const auto sets = random_disjoint_sets(n, rng);
    const nnmg::LocalCorrection sc(sa, sets);
    oracle::Vec want(n, 0.0);
    for (const auto &s : sets)
    {
      oracle::Vec rs;
      for (nnmg::Index i : s)
      {
        rs.push_back(x[static_cast<std::size_t>(i)]);
      }
      const auto es = oracle::solve(oracle::submatrix(a, s), rs);
      for (std::size_t k = 0; k < s.size(); ++k)
      {
        want[static_cast<std::size_t>(s[k])] = es[k];
      }
    }
    worst_alg = std::max(worst_alg, oracle::max_abs_diff(sc.apply(x), want));

    std::vector<nnmg::Index> keep;
    std::set<nnmg::Index> excluded;
    for (const auto &s : sets)
    {
      excluded.insert(s.begin(), s.end());
    }
    for (nnmg::Index i = 0; i < static_cast<nnmg::Index>(n); ++i)
    {
      if (!excluded.count(i))
      {
        keep.push_back(i);
      }
    }
    const double lam = oracle::symmetric_eigenvalues(oracle::jacobi_scaled(oracle::submatrix(a, keep))).back();
    worst_eig = std::max(worst_eig, std::abs(nnmg::adjusted_lambda_max(sa, sets, 1e-10) - lam) / lam);
  }
  o.detail << "max algebraic deviation " << worst_alg << ", max relative eigen deviation " << worst_eig;
  o.check(worst_alg <= 1e-12, "algebraic <= 1e-12");
  o.check(worst_eig <= 1e-6, "eigen <= 1e-6");
}

void criterion2(Outcome &o)
{
  std::mt19937_64 rng(7);
  double worst = 0.0;
  for (int trial = 0; trial < 6; ++trial)
  {
    const std::size_t n = 24 + static_cast<std::size_t>(trial) * 3;
    const auto a = oracle::random_spd(n, 0.25, rng);
    const auto sa = oracle::to_csr(a);
    const nnmg::LocalCorrection sc(sa, random_disjoint_sets(n, rng));
    for (bool cheb : {false, true})
    {
      nnmg::SmootherConfig cfg;
      cfg.sweeps = 2;
      if (cheb)
      {
        cfg.kind = nnmg::SmootherConfig::Kind::Chebyshev;
        cfg.chebyshev.lambda_max = nnmg::chebyshev_lambda_max(sa);
      }
      // S_gc as the map b -> u after one sandwich sweep from u = 0.
      const auto s = materialize(n, [&](const nnmg::Vector &b) {
        nnmg::Vector u(n, 0.0);
        nnmg::combined_smooth(sa, b, u, sc, cfg);
        return u;
      });
      worst = std::max(worst, oracle::max_abs_diff(s, oracle::transpose(s)) / oracle::max_abs(s));
    }
  }
  o.detail << "max |S - S^T| / max |S| = " << worst;
  o.check(worst <= 1e-11, "symmetry <= 1e-11");
}

void criterion3(Outcome &o)
{
  const auto cfg = make(with(load("square_two_level.json"), "A", false));
  const auto h = nnmg::build_experiment_hierarchy(cfg);
  const auto &lev = h.levels.front();
  const auto &b = h.fine_system.b;
  auto u = nnmg::initial_guess(cfg, h);
  nnmg::sgs_sweep(lev.A, b, u, 5);
  const auto r = nnmg::residual(lev.A, b, u);
  std::vector<bool> inside(r.size(), false);
  for (const auto &set : lev.region_dofs)
  {
    for (nnmg::Index d : set)
    {
      inside[static_cast<std::size_t>(d)] = true;
    }
  }
  double rin = 0.0, rout = 0.0;
  for (std::size_t i = 0; i < r.size(); ++i)
  {
    (inside[i] ? rin : rout) = std::max(inside[i] ? rin : rout, std::abs(r[i]));
  }
  o.detail << lev.mesh.num_cells() << " cells, gamma_min " << lev.quality.gamma_min
           << ", max|r| outside " << rout << ", inside " << rin << ", ratio " << rout / rin;
  o.check(lev.quality.gamma_min <= 1e-2, "gamma_min <= 1e-2");
  o.check(rout <= 1e-2 * rin, "outside <= 1e-2 inside");
}

void criterion4(Outcome &o)
{
  const auto base = load("square_two_level.json");
  const int ref = iterations(with(base, "reference", false));
  const int without = iterations(with(base, "A", false));
  const int with_c = iterations(with(base, "A", true));
  o.detail << "reference " << ref << ", without correction " << without << ", with correction " << with_c;
  o.check(ref > 0 && with_c > 0, "convergence");
  o.check(without < 0 || without >= 2 * ref, "without >= 2x reference");
  o.check(with_c > 0 && with_c <= 1.3 * ref, "with <= 1.3x reference");
}

void criterion5(Outcome &o)
{
  for (const char *name : {"square_four_level_p1.json", "square_four_level_p2.json"})
  {
    const auto base = load(name);
    const int ref = iterations(with(base, "reference", false));
    const int a_with = iterations(with(base, "A", true));
    const int b_with = iterations(with(base, "B", true));
    const int a_without = iterations(with(base, "A", false));
    const int b_without = iterations(with(base, "B", false));
    const bool p2 = base.value("element_degree", 1) == 2;
    o.detail << (p2 ? " P2" : "P1") << ": ref " << ref << ", A with " << a_with << ", B with "
             << b_with << ", A without " << a_without << ", B without " << b_without << ";";
    o.check(ref > 0, "reference converges");
    o.check(a_with > 0 && a_with <= 1.3 * ref, "A with <= 1.3x reference");
    o.check(b_with > 0 && b_with <= 1.3 * ref, "B with <= 1.3x reference");
    if (p2)
    {
      o.check(a_without < 0 || a_without > 3 * ref, "P2 A without > 3x reference");
    }
  }
}

void criterion6(Outcome &o)
{
  const auto base = load("square_four_level_p2.json");
  const double with_c = nnmg::compare_to_direct(make(with(base, "A", true)), 12);
  const double without = nnmg::compare_to_direct(make(with(base, "A", false)), 12);
  o.detail << "k=12: with correction " << with_c << ", without " << without << ", ratio "
           << with_c / without;
  o.check(with_c <= 0.2 * without, "with <= 0.2x without");
}

void criterion7(Outcome &o)
{
  for (const char *name : {"cube_chebyshev_p1.json", "cube_chebyshev_p2.json"})
  {
    auto base = load(name);
    base["smoother"]["adjusted"] = false;
    const int ref = iterations(with(base, "reference", true));
    const auto cfg_plain = make(with(base, "A", true));
    const auto plain = nnmg::run(cfg_plain);
    auto adj_json = with(base, "A", true);
    adj_json["smoother"]["adjusted"] = true;
    const auto adjusted = nnmg::run(make(adj_json));
    const int it_plain = plain.converged ? plain.iterations : -1;
    const int it_adj = adjusted.converged ? adjusted.iterations : -1;
    o.detail << (base.value("element_degree", 1) == 2 ? " P2" : "P1") << ": ref " << ref
             << ", unadjusted " << it_plain << ", adjusted " << it_adj << ", lambda";
    for (std::size_t l = 0; l + 1 < adjusted.levels.size(); ++l)
    {
      const auto &lev = adjusted.levels[l];
      o.detail << " L" << l << " " << lev.lambda_max << "/" << lev.lambda_max_adjusted;
      if (lev.regions > 0)
      {
        o.check(lev.lambda_max_adjusted <= lev.lambda_max, "adjusted <= unadjusted on level " + std::to_string(l));
      }
    }
    o.detail << ";";
    o.check(ref > 0 && it_adj > 0, "convergence");
    o.check(it_plain < 0 || it_adj <= it_plain, "adjusted iterations <= unadjusted");
    o.check(it_adj > 0 && it_adj <= 1.3 * ref, "adjusted <= 1.3x reference");
  }
}

void criterion8(Outcome &o)
{
  for (const char *name : {"elasticity_square_p1.json", "elasticity_square_p2.json"})
  {
    const auto base = load(name);
    const int ref = iterations(with(base, "reference", false));
    const int with_c = iterations(with(base, "A", true));
    const int without = iterations(with(base, "A", false));
    o.detail << (base.value("element_degree", 1) == 2 ? " P2" : "P1") << ": ref " << ref
             << ", with " << with_c << ", without " << without << ";";
    o.check(ref > 0, "reference converges");
    o.check(with_c > 0 && with_c <= 1.3 * ref, "with <= 1.3x reference");
    o.check(without < 0 || without >= 2 * ref, "without >= 2x reference");
  }
}

double poisson_error(int dim, int degree, int n, const nnmg::Field &exact, const nnmg::Field &f)
{
  const auto mesh = nnmg::generate_simplex_grid(dim, n);
  const nnmg::DofMap dm(mesh, degree);
  nnmg::ProblemSpec spec;
  spec.source = f;
  for (int m = 1; m <= 2 * dim; ++m)
  {
    spec.dirichlet.push_back({m, exact});
  }
  const auto sys = nnmg::assemble(mesh, dm, spec);
  const auto u = nnmg::EnvelopeCholesky(sys.A).solve(sys.b);
  return nnmg::l2_error(mesh, dm, u, exact);
}

void criterion9(Outcome &o)
{
  using std::numbers::pi;
  const nnmg::Field linear = [](const Point &x) { return Point{1 + 2 * x[0] - 3 * x[1] + 0.5 * x[2], 0, 0}; };
  double patch = 0.0;
  for (int dim : {2, 3})
  {
    patch = std::max(patch, poisson_error(dim, 1, 4, linear, {}));
  }
  const nnmg::Field smooth = [](const Point &x) { return Point{std::sin(pi * x[0]) * std::sin(pi * x[1]), 0, 0}; };
  const nnmg::Field source = [](const Point &x) {
    return Point{2 * pi * pi * std::sin(pi * x[0]) * std::sin(pi * x[1]), 0, 0};
  };
  const double e4 = poisson_error(2, 2, 4, smooth, source);
  const double e8 = poisson_error(2, 2, 8, smooth, source);
  const double e16 = poisson_error(2, 2, 16, smooth, source);
  const double rate = std::min(std::log2(e4 / e8), std::log2(e8 / e16));

  double rigid = 0.0;
  nnmg::ProblemSpec el;
  el.kind = nnmg::ProblemKind::Elasticity;
  el.material = {6.9e10, 0.33};
  for (int dim : {2, 3})
  {
    for (int degree : {1, 2})
    {
      const auto mesh = nnmg::generate_simplex_grid(dim, 3);
      const nnmg::DofMap dm(mesh, degree, dim);
      const auto k = nnmg::assemble_stiffness(mesh, dm, el);
      std::vector<nnmg::Field> modes{[](const Point &) { return Point{1, 0, 0}; },
                                     [](const Point &) { return Point{0, 1, 0}; },
                                     [](const Point &x) { return Point{-x[1], x[0], 0}; }};
      if (dim == 3)
      {
        modes.push_back([](const Point &) { return Point{0, 0, 1}; });
        modes.push_back([](const Point &x) { return Point{0, -x[2], x[1]}; });
        modes.push_back([](const Point &x) { return Point{x[2], 0, -x[0]}; });
      }
      for (const auto &m : modes)
      {
        const auto v = nnmg::interpolate(dm, m);
        rigid = std::max(rigid, nnmg::norm_inf(nnmg::spmv(k, v)) / (k.max_abs() * nnmg::norm_inf(v)));
      }
    }
  }
  o.detail << "patch error " << patch << ", P2 rate " << rate << ", rigid-mode residual " << rigid;
  o.check(patch <= 1e-10, "patch <= 1e-10");
  o.check(rate >= 2.7, "P2 rate >= 2.7");
  o.check(rigid <= 1e-9, "rigid <= 1e-9");
}

void criterion10(Outcome &o)
{
  int configs = 0;
  std::vector<std::string> names;
  for (const auto &entry : std::filesystem::directory_iterator(kConfigDir))
  {
    if (entry.path().extension() == ".json")
    {
      names.push_back(entry.path().filename().string());
    }
  }
  std::sort(names.begin(), names.end());
  for (const auto &name : names)
  {
    const auto cfg = make(load(name));
    const auto a = nnmg::run(cfg);
    const auto b = nnmg::run(cfg);
    ++configs;
    if (a.residual_history != b.residual_history)
    {
      o.check(false, name + " histories differ");
    }
  }
  o.detail << configs << " configs run twice with bitwise-equal residual histories";
  o.check(configs > 0, "at least one config");
}

}  // namespace

int main()
{
  const std::vector<std::pair<std::string, std::function<void(Outcome &)>>> criteria{
      {"oracle equivalence", criterion1},
      {"sandwich smoother symmetry", criterion2},
      {"smoother failure localized at slivers", criterion3},
      {"two-level convergence restoration", criterion4},
      {"four-level Case A/B, P1 and P2", criterion5},
      {"error versus direct solve at k=12", criterion6},
      {"adjusted-eigenvalue Chebyshev", criterion7},
      {"elasticity MG-preconditioned CG", criterion8},
      {"finite element correctness gates", criterion9},
      {"determinism", criterion10},
  };
  int failures = 0;
  for (std::size_t k = 0; k < criteria.size(); ++k)
  {
    Outcome o;
    try
    {
      criteria[k].second(o);
    }
    catch (const std::exception &e)
    {
      o.pass = false;
      o.detail << " [error: " << e.what() << "]";
    }
    failures += o.pass ? 0 : 1;
    std::printf("%s criterion %zu (%s): %s\n", o.pass ? "PASS" : "FAIL", k + 1,
                criteria[k].first.c_str(), o.detail.str().c_str());
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
