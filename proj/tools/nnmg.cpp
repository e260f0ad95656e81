// Copyright the nnmg authors. All Rights Reserved.
// SPDX-License-Identifier: Apache-2.0

// Command line driver: run experiments, inspect mesh quality, compare against a direct solve.

#include <cstdio>
#include <exception>
#include <string>

#include <CLI11.hpp>

#include "nnmg/experiment.hpp"
#include "nnmg/msh_io.hpp"

namespace
{

int cmd_run(const std::string &config_path, const std::string &out_dir)
{
  const auto cfg = nnmg::ExperimentConfig::from_file(config_path);
  const auto rep = nnmg::run(cfg);
  nnmg::emit(cfg, rep, out_dir);
  std::printf("iterations %d, relative residual %.3e, %s\n", rep.iterations,
              rep.residual_history.back(), rep.converged ? "converged" : "not converged");
  for (std::size_t l = 0; l < rep.levels.size(); ++l)
  {
    const auto &r = rep.levels[l];
    std::printf("level %zu: cells %lld, dofs %lld, gamma_min %.3e, regions %lld, region dofs %lld\n",
                l, static_cast<long long>(r.cells), static_cast<long long>(r.dofs),
                r.quality.gamma_min, static_cast<long long>(r.regions),
                static_cast<long long>(r.region_dofs));
  }
  return rep.converged ? 0 : 2;
}

int cmd_quality(const std::string &mesh_path, double threshold)
{
  const auto mesh = nnmg::read_msh(mesh_path);
  const auto q = nnmg::quality_report(mesh, 10);
  const auto regions = nnmg::identify_regions(mesh, q.per_cell_gamma, threshold);
  std::printf("cells %lld, vertices %lld, gamma_min %.6e\n",
              static_cast<long long>(mesh.num_cells()),
              static_cast<long long>(mesh.num_vertices()), q.gamma_min);
  for (std::size_t k = 0; k < q.histogram.size(); ++k)
  {
    std::printf("(%.1f, %.1f] %lld\n", 0.1 * static_cast<double>(k),
                0.1 * static_cast<double>(k + 1), static_cast<long long>(q.histogram[k]));
  }
  std::printf("cells below %.3g: %zu, regions %zu\n", threshold, regions.omega_b.size(),
              regions.size());
  return 0;
}

int cmd_compare(const std::string &config_path, int cycles)
{
  const auto cfg = nnmg::ExperimentConfig::from_file(config_path);
  const double err = nnmg::compare_to_direct(cfg, cycles);
  std::printf("%.17g\n", err);
  return 0;
}

}  // namespace

int main(int argc, char **argv)
{
  CLI::App app{"Non-nested geometric multigrid experiments"};
  app.require_subcommand(1);

  std::string config_path, out_dir = "out", mesh_path;
  double threshold = 0.1;
  int cycles = 12;

  auto *run = app.add_subcommand("run", "Run an experiment and write its reports");
  run->add_option("config", config_path, "Experiment JSON")->required()->check(CLI::ExistingFile);
  run->add_option("--out", out_dir, "Output directory");

  auto *quality = app.add_subcommand("quality", "Quality statistics of an MSH mesh");
  quality->add_option("mesh", mesh_path, "MSH 2.2 ASCII file")->required()->check(CLI::ExistingFile);
  quality->add_option("--threshold", threshold, "Low-quality threshold");

  auto *compare = app.add_subcommand("compare-direct", "Distance to the direct solution after k cycles");
  compare->add_option("config", config_path, "Experiment JSON")->required()->check(CLI::ExistingFile);
  compare->add_option("--cycles", cycles, "Number of V-cycles");

  try
  {
    app.parse(argc, argv);
  }
  catch (const CLI::ParseError &e)
  {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try
  {
    if (*run)
    {
      return cmd_run(config_path, out_dir);
    }
    if (*quality)
    {
      return cmd_quality(mesh_path, threshold);
    }
    return cmd_compare(config_path, cycles);
  }
  catch (const std::exception &e)
  {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
}
