// Copyright the nnmg authors. All Rights Reserved.
// SPDX-License-Identifier: Apache-2.0

#ifndef NNMG_EXPERIMENT_HPP
#define NNMG_EXPERIMENT_HPP

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "nnmg/common.hpp"
#include "nnmg/fem.hpp"
#include "nnmg/krylov.hpp"
#include "nnmg/mesh.hpp"
#include "nnmg/mg.hpp"
#include "nnmg/msh_io.hpp"
#include "nnmg/smoothers.hpp"
#include "nnmg/sparse_direct.hpp"

namespace nnmg
{

inline constexpr const char *kVersion = "0.1.0";

//
// Declarative vertex perturbation: the `count` interior vertices nearest to `point`
// (optionally jittered by a seeded uniform offset of at most `jitter` per coordinate) are
// moved one after another along `direction` by `fraction` of the largest step that keeps
// their star valid. Fractions close to one produce slivers.
//
struct PerturbationSpec
{
  Point point{0.5, 0.5, 0.5};
  Point direction{1.0, 0.0, 0.0};
  double fraction = 0.99;
  int count = 1;
  double jitter = 0.0;
};

struct MeshSource
{
  Index n = 0;
  std::string msh_path;
  // When set, replaces the experiment-wide perturbations on this level.
  std::optional<std::vector<PerturbationSpec>> perturbations;
};

enum class CaseKind
{
  Reference,
  A,
  B
};

enum class SolveMode
{
  Stationary,
  Cg
};

// Boundary value problem presets on the unit square or cube.
enum class ProblemData
{
  // f = 0, u = 0 on the whole boundary; nonzero oscillatory initial guess.
  Homogeneous,
  // u = cos(pi x) sin(pi y) [sin(pi z)], Dirichlet on the y (and z) faces, zero flux on x faces.
  Mixed,
  // Gaussian source, u = 0 on the x faces.
  Gaussian,
  // Elasticity clamped at x = 0 with a uniform traction on x = 1.
  Traction
};

struct ExperimentConfig
{
  ProblemKind problem = ProblemKind::Poisson;
  ProblemData data = ProblemData::Homogeneous;
  int dim = 2;
  int element_degree = 1;
  std::vector<MeshSource> levels;
  std::vector<PerturbationSpec> perturbations;
  CaseKind case_kind = CaseKind::Reference;
  SmootherConfig smoother;
  bool local_correction = false;
  double quality_threshold = 0.1;
  SolveMode mode = SolveMode::Stationary;
  double rtol = 1e-10;
  int max_iterations = 100;
  std::uint64_t seed = 0;
  // Oscillatory sin(10 pi x) sin(10 pi y) ... initial guess; default for the homogeneous preset.
  bool oscillatory_guess = false;
  // Verbatim source document, echoed into summary.json.
  nlohmann::ordered_json source;

  static ExperimentConfig from_json(const nlohmann::ordered_json &j,
                                    const std::filesystem::path &base_dir = {});
  static ExperimentConfig from_file(const std::string &path);
};

namespace detail
{

inline Point read_point(const nlohmann::ordered_json &j, const std::string &what)
{
  if (!j.is_array() || j.empty() || j.size() > 3)
  {
    throw ParseError("config: " + what + " must be an array of 1 to 3 numbers");
  }
  Point p{0.0, 0.0, 0.0};
  for (std::size_t k = 0; k < j.size(); ++k)
  {
    p[k] = j[k].get<double>();
  }
  return p;
}

inline std::vector<PerturbationSpec> read_perturbations(const nlohmann::ordered_json &j)
{
  if (!j.is_array())
  {
    throw ParseError("config: perturbations must be an array");
  }
  std::vector<PerturbationSpec> out;
  for (const auto &e : j)
  {
    PerturbationSpec p;
    p.point = read_point(e.at("point"), "perturbation point");
    p.direction = read_point(e.at("direction"), "perturbation direction");
    p.fraction = e.value("fraction", p.fraction);
    p.count = e.value("count", p.count);
    p.jitter = e.value("jitter", p.jitter);
    if (!(p.fraction > 0.0 && p.fraction < 1.0))
    {
      throw ParseError("config: perturbation fraction must lie in (0, 1)");
    }
    if (p.count < 1 || p.jitter < 0.0)
    {
      throw ParseError("config: perturbation count must be >= 1 and jitter >= 0");
    }
    out.push_back(p);
  }
  return out;
}

template <typename E>
E read_enum(const nlohmann::ordered_json &j, const char *key, E fallback,
            std::initializer_list<std::pair<const char *, E>> names)
{
  if (!j.contains(key))
  {
    return fallback;
  }
  const auto s = j.at(key).get<std::string>();
  for (const auto &[name, value] : names)
  {
    if (s == name)
    {
      return value;
    }
  }
  throw ParseError(std::string("config: unknown ") + key + " '" + s + "'");
}

}  // namespace detail

inline ExperimentConfig ExperimentConfig::from_json(const nlohmann::ordered_json &j,
                                                    const std::filesystem::path &base_dir)
{
  ExperimentConfig c;
  c.source = j;
  try
  {
    c.problem = detail::read_enum(j, "problem", ProblemKind::Poisson,
                                  {{"poisson", ProblemKind::Poisson},
                                   {"elasticity", ProblemKind::Elasticity}});
    c.data = detail::read_enum(j, "data",
                               c.problem == ProblemKind::Poisson ? ProblemData::Homogeneous
                                                                 : ProblemData::Traction,
                               {{"homogeneous", ProblemData::Homogeneous},
                                {"mixed", ProblemData::Mixed},
                                {"gaussian", ProblemData::Gaussian},
                                {"traction", ProblemData::Traction}});
    if ((c.problem == ProblemKind::Elasticity) != (c.data == ProblemData::Traction))
    {
      throw ParseError("config: data '" + j.value("data", std::string("traction")) +
                       "' does not match the problem kind");
    }
    c.dim = j.value("dim", 2);
    if (c.dim != 2 && c.dim != 3)
    {
      throw ParseError("config: dim must be 2 or 3");
    }
    c.element_degree = j.value("element_degree", 1);
    if (c.element_degree != 1 && c.element_degree != 2)
    {
      throw ParseError("config: element_degree must be 1 or 2");
    }
    for (const auto &l : j.at("levels"))
    {
      MeshSource m;
      if (l.contains("msh"))
      {
        std::filesystem::path p = l.at("msh").get<std::string>();
        m.msh_path = (p.is_relative() && !base_dir.empty() ? base_dir / p : p).string();
      }
      else
      {
        m.n = l.at("n").get<Index>();
        if (m.n < 1)
        {
          throw ParseError("config: level n must be >= 1");
        }
      }
      if (l.contains("perturbations"))
      {
        m.perturbations = detail::read_perturbations(l.at("perturbations"));
      }
      c.levels.push_back(std::move(m));
    }
    if (c.levels.size() < 2)
    {
      throw ParseError("config: at least two levels are required");
    }
    if (j.contains("perturbations"))
    {
      c.perturbations = detail::read_perturbations(j.at("perturbations"));
    }
    c.case_kind = detail::read_enum(j, "case", CaseKind::Reference,
                                    {{"reference", CaseKind::Reference},
                                     {"A", CaseKind::A},
                                     {"B", CaseKind::B}});
    if (j.contains("smoother"))
    {
      const auto &s = j.at("smoother");
      c.smoother.kind = detail::read_enum(s, "kind", SmootherConfig::Kind::SGS,
                                          {{"sgs", SmootherConfig::Kind::SGS},
                                           {"chebyshev", SmootherConfig::Kind::Chebyshev}});
      c.smoother.sweeps = s.value("sweeps", 1);
      c.smoother.chebyshev.lambda_min_fraction = s.value("lambda_min_fraction", 0.1);
      c.smoother.chebyshev.adjusted = s.value("adjusted", false);
      if (c.smoother.sweeps < 0)
      {
        throw ParseError("config: smoother sweeps must be non-negative");
      }
    }
    c.local_correction = j.value("local_correction", false);
    c.quality_threshold = j.value("quality_threshold", 0.1);
    c.mode = detail::read_enum(j, "mode", SolveMode::Stationary,
                               {{"stationary", SolveMode::Stationary}, {"cg", SolveMode::Cg}});
    c.rtol = j.value("rtol", 1e-10);
    c.max_iterations = j.value("max_iterations", 100);
    c.seed = j.value("seed", std::uint64_t{0});
    c.oscillatory_guess =
        j.value("oscillatory_guess", c.data == ProblemData::Homogeneous);
  }
  catch (const nlohmann::json::exception &e)
  {
    throw ParseError(std::string("config: ") + e.what());
  }
  return c;
}

inline ExperimentConfig ExperimentConfig::from_file(const std::string &path)
{
  std::ifstream in(path);
  if (!in)
  {
    throw Error("config: cannot open '" + path + "'");
  }
  nlohmann::ordered_json j;
  try
  {
    j = nlohmann::ordered_json::parse(in);
  }
  catch (const nlohmann::json::exception &e)
  {
    throw ParseError("config '" + path + "': " + e.what());
  }
  return from_json(j, std::filesystem::path(path).parent_path());
}

//
// Applies perturbation specs to a mesh. Selection ties are broken by vertex index; the
// jitter offsets are drawn from `rng`.
//
inline SimplexMesh apply_perturbations(const SimplexMesh &mesh,
                                       const std::vector<PerturbationSpec> &specs,
                                       std::mt19937_64 &rng)
{
  SimplexMesh out = mesh;
  const auto boundary = mesh.boundary_vertex_mask();
  std::vector<bool> used(static_cast<std::size_t>(mesh.num_vertices()), false);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  for (const auto &s : specs)
  {
    Point target = s.point;
    for (int d = 0; d < mesh.dim(); ++d)
    {
      target[d] += s.jitter * unit(rng);
    }
    std::vector<std::pair<double, Index>> by_dist;
    for (Index v = 0; v < mesh.num_vertices(); ++v)
    {
      if (!boundary[static_cast<std::size_t>(v)] && !used[static_cast<std::size_t>(v)])
      {
        by_dist.emplace_back(detail::dist(mesh.vertex(v), target), v);
      }
    }
    if (static_cast<int>(by_dist.size()) < s.count)
    {
      throw Error("apply_perturbations: not enough interior vertices");
    }
    std::partial_sort(by_dist.begin(), by_dist.begin() + s.count, by_dist.end());
    for (int k = 0; k < s.count; ++k)
    {
      const Index v = by_dist[static_cast<std::size_t>(k)].second;
      used[static_cast<std::size_t>(v)] = true;
      const double t = star_exit_step(out, v, s.direction);
      if (!std::isfinite(t))
      {
        throw Error("apply_perturbations: direction does not shrink any cell around vertex " +
                    std::to_string(v));
      }
      VertexDisplacement disp{v, {}};
      for (int d = 0; d < 3; ++d)
      {
        disp.displacement[d] = s.fraction * t * s.direction[d];
      }
      out = perturb_vertices(out, std::span<const VertexDisplacement>(&disp, 1));
    }
  }
  return out;
}

// Meshes of every level, fine to coarse, with perturbations applied according to the case.
inline std::vector<SimplexMesh> build_meshes(const ExperimentConfig &cfg)
{
  std::mt19937_64 rng(cfg.seed);
  std::vector<SimplexMesh> meshes;
  for (std::size_t l = 0; l < cfg.levels.size(); ++l)
  {
    const auto &src = cfg.levels[l];
    SimplexMesh m = src.msh_path.empty() ? generate_simplex_grid(cfg.dim, src.n)
                                         : read_msh(src.msh_path);
    if (m.dim() != cfg.dim)
    {
      throw Error("build_meshes: level " + std::to_string(l) + " has dimension " +
                  std::to_string(m.dim()));
    }
    const bool perturbed = cfg.case_kind == CaseKind::A || (cfg.case_kind == CaseKind::B && l > 0);
    if (perturbed)
    {
      m = apply_perturbations(m, src.perturbations ? *src.perturbations : cfg.perturbations, rng);
    }
    meshes.push_back(std::move(m));
  }
  return meshes;
}

inline ProblemSpec problem_spec(const ExperimentConfig &cfg)
{
  using std::numbers::pi;
  ProblemSpec s;
  s.kind = cfg.problem;
  const int dim = cfg.dim;
  const Field zero = [](const Point &) { return Point{0.0, 0.0, 0.0}; };
  switch (cfg.data)
  {
  case ProblemData::Homogeneous:
    s.source = zero;
    for (int m = 1; m <= 2 * dim; ++m)
    {
      s.dirichlet.push_back({m, zero});
    }
    break;
  case ProblemData::Mixed:
  {
    const Field exact = [dim](const Point &x) {
      double v = std::cos(pi * x[0]) * std::sin(pi * x[1]);
      if (dim == 3)
      {
        v *= std::sin(pi * x[2]);
      }
      return Point{v, 0.0, 0.0};
    };
    s.source = [exact, dim](const Point &x) {
      return Point{dim * pi * pi * exact(x)[0], 0.0, 0.0};
    };
    for (int m = 3; m <= 2 * dim; ++m)
    {
      s.dirichlet.push_back({m, exact});
    }
    break;
  }
  case ProblemData::Gaussian:
    s.source = [dim](const Point &x) {
      double r2 = 0.0;
      for (int d = 0; d < dim; ++d)
      {
        r2 += (x[d] - 0.5) * (x[d] - 0.5);
      }
      return Point{std::exp(-50.0 * r2), 0.0, 0.0};
    };
    s.dirichlet = {{1, zero}, {2, zero}};
    break;
  case ProblemData::Traction:
    s.source = zero;
    s.material = {6.9e10, 0.33};
    s.dirichlet = {{1, zero}};
    s.neumann = {{2, [](const Point &) { return Point{1e3, 0.0, 0.0}; }}};
    break;
  }
  return s;
}

// Exact solution of the mixed preset; empty for presets without a closed form.
inline Field exact_solution(const ExperimentConfig &cfg)
{
  if (cfg.data != ProblemData::Mixed)
  {
    return {};
  }
  const int dim = cfg.dim;
  return [dim](const Point &x) {
    using std::numbers::pi;
    double v = std::cos(pi * x[0]) * std::sin(pi * x[1]);
    if (dim == 3)
    {
      v *= std::sin(pi * x[2]);
    }
    return Point{v, 0.0, 0.0};
  };
}

inline HierarchyOptions hierarchy_options(const ExperimentConfig &cfg)
{
  HierarchyOptions o;
  o.element_degree = cfg.element_degree;
  o.smoother = cfg.smoother;
  o.use_local_correction = cfg.local_correction;
  o.quality_threshold = cfg.quality_threshold;
  return o;
}

inline Hierarchy build_experiment_hierarchy(const ExperimentConfig &cfg)
{
  return build_hierarchy(build_meshes(cfg), problem_spec(cfg), hierarchy_options(cfg));
}

// Initial guess on the finest level, zero at Dirichlet DOFs.
inline Vector initial_guess(const ExperimentConfig &cfg, const Hierarchy &h)
{
  const auto &fine = h.levels.front();
  Vector u(static_cast<std::size_t>(fine.dofmap.num_dofs()), 0.0);
  if (cfg.oscillatory_guess)
  {
    const int dim = cfg.dim;
    u = interpolate(fine.dofmap, [dim](const Point &x) {
      using std::numbers::pi;
      Point v{1.0, 1.0, 1.0};
      for (int d = 0; d < dim; ++d)
      {
        const double s = std::sin(10.0 * pi * x[d]);
        for (double &c : v)
        {
          c *= s;
        }
      }
      return v;
    });
  }
  for (Index d : h.fine_system.dirichlet_dofs)
  {
    u[static_cast<std::size_t>(d)] = 0.0;
  }
  return u;
}

struct LevelReport
{
  Index cells = 0;
  Index vertices = 0;
  Index dofs = 0;
  QualityReport quality;
  Index regions = 0;
  Index low_quality_cells = 0;
  Index region_cells = 0;
  Index region_dofs = 0;
  double lambda_max = 0.0;
  double lambda_max_adjusted = 0.0;
};

struct RunReport
{
  std::vector<double> residual_history;
  int iterations = 0;
  bool converged = false;
  std::vector<LevelReport> levels;
  Vector solution;
  // L2 error against the closed-form solution, when the preset has one.
  std::optional<double> l2_error;
  std::optional<double> direct_error;
};

inline std::vector<LevelReport> level_reports(const Hierarchy &h)
{
  std::vector<LevelReport> out;
  for (const auto &lev : h.levels)
  {
    LevelReport r;
    r.cells = lev.mesh.num_cells();
    r.vertices = lev.mesh.num_vertices();
    r.dofs = lev.dofmap.num_dofs();
    r.quality = lev.quality;
    r.regions = static_cast<Index>(lev.regions.size());
    r.low_quality_cells = static_cast<Index>(lev.regions.omega_b.size());
    for (const auto &reg : lev.regions.regions)
    {
      r.region_cells += static_cast<Index>(reg.size());
    }
    for (const auto &d : lev.region_dofs)
    {
      r.region_dofs += static_cast<Index>(d.size());
    }
    r.lambda_max = lev.lambda_max;
    r.lambda_max_adjusted = lev.lambda_max_adjusted;
    out.push_back(std::move(r));
  }
  return out;
}

template <typename F>
auto run_stage(const char *stage, F &&f)
{
  try
  {
    return f();
  }
  catch (const Error &e)
  {
    throw Error(std::string("experiment stage '") + stage + "': " + e.what());
  }
}

inline RunReport run(const ExperimentConfig &cfg)
{
  const auto meshes = run_stage("meshes", [&] { return build_meshes(cfg); });
  const Hierarchy h = run_stage("hierarchy", [&] {
    return build_hierarchy(meshes, problem_spec(cfg), hierarchy_options(cfg));
  });
  RunReport rep;
  rep.levels = level_reports(h);
  const Vector u0 = initial_guess(cfg, h);
  const auto &b = h.fine_system.b;
  run_stage("solve", [&] {
    if (cfg.mode == SolveMode::Stationary)
    {
      auto res = solve_stationary(h, b, u0, cfg.rtol, cfg.max_iterations);
      rep.residual_history = std::move(res.history);
      rep.iterations = res.cycles;
      rep.converged = res.converged;
      rep.solution = std::move(res.u);
    }
    else
    {
      auto res = cg(h.fine_operator(), b, as_preconditioner(h), cfg.rtol, cfg.max_iterations, u0);
      rep.residual_history = std::move(res.history);
      rep.iterations = res.iterations;
      rep.converged = res.converged;
      rep.solution = std::move(res.x);
    }
    return 0;
  });
  if (const Field exact = exact_solution(cfg))
  {
    rep.l2_error = l2_error(h.levels.front().mesh, h.levels.front().dofmap, rep.solution, exact);
  }
  return rep;
}

inline constexpr Index kDirectSolveLimit = 50000;

//
// Runs exactly `cycles` V-cycles from the configured initial guess and returns the l2
// distance to the direct solution of the fine system.
//
inline double compare_to_direct(const ExperimentConfig &cfg, int cycles)
{
  if (cycles < 0)
  {
    throw Error("compare_to_direct: cycles must be non-negative");
  }
  const auto meshes = run_stage("meshes", [&] { return build_meshes(cfg); });
  const Index n = DofMap(meshes.front(), cfg.element_degree,
                         cfg.problem == ProblemKind::Poisson ? 1 : cfg.dim)
                      .num_dofs();
  if (n > kDirectSolveLimit)
  {
    throw Error("compare_to_direct: " + std::to_string(n) +
                " unknowns exceed the direct-solve limit of " + std::to_string(kDirectSolveLimit));
  }
  const Hierarchy h = run_stage("hierarchy", [&] {
    return build_hierarchy(meshes, problem_spec(cfg), hierarchy_options(cfg));
  });
  const CsrMatrix &a = h.fine_operator();
  const auto &b = h.fine_system.b;
  Vector u = initial_guess(cfg, h);
  run_stage("cycles", [&] {
    for (int k = 0; k < cycles; ++k)
    {
      vcycle(h, b, u);
    }
    return 0;
  });
  const Vector ref = run_stage("direct", [&] { return EnvelopeCholesky(a).solve(b); });
  double s = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i)
  {
    s += (u[i] - ref[i]) * (u[i] - ref[i]);
  }
  return std::sqrt(s);
}

namespace detail
{

inline std::string format_double(double v)
{
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline std::ofstream open_output(const std::filesystem::path &p)
{
  std::ofstream out(p);
  if (!out)
  {
    throw Error("emit: cannot write '" + p.string() + "'");
  }
  return out;
}

}  // namespace detail

inline nlohmann::ordered_json summary_json(const ExperimentConfig &cfg, const RunReport &rep)
{
  nlohmann::ordered_json j;
  j["version"] = kVersion;
  j["config"] = cfg.source;
  j["iterations"] = rep.iterations;
  j["converged"] = rep.converged;
  j["history_length"] = rep.residual_history.size();
  j["final_relative_residual"] = rep.residual_history.empty() ? 0.0 : rep.residual_history.back();
  if (rep.l2_error)
  {
    j["l2_error"] = *rep.l2_error;
  }
  if (rep.direct_error)
  {
    j["direct_error"] = *rep.direct_error;
  }
  auto levels = nlohmann::ordered_json::array();
  for (std::size_t l = 0; l < rep.levels.size(); ++l)
  {
    const auto &r = rep.levels[l];
    nlohmann::ordered_json e;
    e["level"] = l;
    e["cells"] = r.cells;
    e["vertices"] = r.vertices;
    e["dofs"] = r.dofs;
    e["gamma_min"] = r.quality.gamma_min;
    e["gamma_histogram"] = r.quality.histogram;
    e["regions"] = r.regions;
    e["low_quality_cells"] = r.low_quality_cells;
    e["region_cells"] = r.region_cells;
    e["region_dofs"] = r.region_dofs;
    if (cfg.smoother.kind == SmootherConfig::Kind::Chebyshev && l + 1 < rep.levels.size())
    {
      e["lambda_max"] = r.lambda_max;
      e["lambda_max_adjusted"] = r.lambda_max_adjusted;
    }
    levels.push_back(std::move(e));
  }
  j["levels"] = std::move(levels);
  j["timestamp"] = std::chrono::duration_cast<std::chrono::seconds>(
                       std::chrono::system_clock::now().time_since_epoch())
                       .count();
  return j;
}

// Writes residuals.csv, quality.csv and summary.json into `out_dir` (created if missing).
inline void emit(const ExperimentConfig &cfg, const RunReport &rep,
                 const std::filesystem::path &out_dir)
{
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec)
  {
    throw Error("emit: cannot create '" + out_dir.string() + "': " + ec.message());
  }
  {
    auto out = detail::open_output(out_dir / "residuals.csv");
    out << "iteration,relative_residual\n";
    for (std::size_t k = 0; k < rep.residual_history.size(); ++k)
    {
      out << k << ',' << detail::format_double(rep.residual_history[k]) << '\n';
    }
  }
  {
    auto out = detail::open_output(out_dir / "quality.csv");
    out << "level,cell,gamma\n";
    for (std::size_t l = 0; l < rep.levels.size(); ++l)
    {
      const auto &g = rep.levels[l].quality.per_cell_gamma;
      for (std::size_t c = 0; c < g.size(); ++c)
      {
        out << l << ',' << c << ',' << detail::format_double(g[c]) << '\n';
      }
    }
  }
  {
    auto out = detail::open_output(out_dir / "summary.json");
    out << summary_json(cfg, rep).dump(2) << '\n';
  }
}

}  // namespace nnmg

#endif  // NNMG_EXPERIMENT_HPP
