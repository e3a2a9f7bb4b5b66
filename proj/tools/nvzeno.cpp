// nvzeno: batch front-end for the NV relaxation and Zeno simulations.
//
//   nvzeno simulate <config.json> --out <dir>
//   nvzeno validate <config.json>
//   nvzeno oracle   <config.json> [--out <dir>]
//
// Exit codes: 0 success, 2 configuration error, 3 budget exceeded,
// 4 numerical failure, 1 anything else.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "nvzeno/cce.hpp"
#include "nvzeno/curve_io.hpp"
#include "nvzeno/errors.hpp"
#include "nvzeno/experiment.hpp"

namespace {

enum ExitCode : int { kOk = 0, kOther = 1, kConfig = 2, kBudget = 3, kNumerical = 4 };

int report(const char* kind, const std::exception& e, int code) {
  std::cerr << "nvzeno: " << kind << ": " << e.what() << '\n';
  return code;
}

int cmd_validate(const std::string& config_path) {
  const auto c = nvzeno::load_experiment_config(config_path);
  std::size_t clusters = nvzeno::count_all_subsets(c.bath.n_spins, c.cce_order);
  for (const auto& v : c.comparisons)
    clusters += nvzeno::count_all_subsets(v.n_spins, v.order);
  std::cout << fmt::format("config ok: hash {}\n", nvzeno::config_hash(c))
            << fmt::format("main run: N = {}, M = {}, {} time points, {} tau values\n",
                           c.bath.n_spins, c.cce_order, c.n_time_points, c.taus.size())
            << fmt::format("comparison variants: {}\n", nvzeno::unique_variants(c.comparisons).size())
            << fmt::format("clusters before cutoffs: {}\n", clusters);
  return kOk;
}

int cmd_simulate(const std::string& config_path, const std::string& out, bool quiet) {
  const auto c = nvzeno::load_experiment_config(config_path);
  const auto result = nvzeno::run_simulation(c, out, quiet ? nullptr : &std::cerr);
  for (const auto& f : result.files) std::cout << f.string() << '\n';
  return kOk;
}

int cmd_oracle(const std::string& config_path, const std::string& out, bool quiet) {
  const auto c = nvzeno::load_experiment_config(config_path);
  if (!out.empty()) {
    const auto result = nvzeno::run_oracle(c, out, quiet ? nullptr : &std::cerr);
    for (const auto& f : result.files) std::cout << f.string() << '\n';
    return kOk;
  }
  if (c.bath.n_spins > c.oracle_max_spins)
    throw nvzeno::BudgetExceeded(fmt::format("oracle: N = {} exceeds oracle_max_spins = {}",
                                             c.bath.n_spins, c.oracle_max_spins));
  const auto bath = nvzeno::sample_bath(c.bath);
  auto curve = nvzeno::exact_survival_full(c.nv(), bath, c.time_grid(), c.oracle_max_spins,
                                           c.initial, c.include_nuclear_dipole);
  curve.meta.grid = fmt::format("uniform t_max={:.17g} n={}", c.t_max, c.n_time_points);
  nvzeno::write_curve_csv(std::cout, curve, {{"config_hash", nvzeno::config_hash(c)}});
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"NV-center relaxation and quantum Zeno simulations with the cluster-correlation expansion"};
  app.set_version_flag("--version", NVZENO_VERSION);
  app.require_subcommand(1);

  std::string config_path;
  std::string out;
  bool quiet = false;

  auto* simulate = app.add_subcommand("simulate", "run the configured studies and write data files");
  simulate->add_option("config", config_path, "experiment config (JSON)")->required();
  simulate->add_option("--out", out, "output directory")->required();
  simulate->add_flag("-q,--quiet", quiet, "suppress progress output");

  auto* validate = app.add_subcommand("validate", "check a config without running it");
  validate->add_option("config", config_path, "experiment config (JSON)")->required();

  auto* oracle = app.add_subcommand("oracle", "exact whole-bath propagation for small N");
  oracle->add_option("config", config_path, "experiment config (JSON)")->required();
  oracle->add_option("--out", out, "output directory; the curve goes to stdout when omitted");
  oracle->add_flag("-q,--quiet", quiet, "suppress progress output");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfig;
  }

  try {
    if (*simulate) return cmd_simulate(config_path, out, quiet);
    if (*validate) return cmd_validate(config_path);
    if (*oracle) return cmd_oracle(config_path, out, quiet);
  } catch (const nvzeno::ConfigError& e) {
    return report("config error", e, kConfig);
  } catch (const nvzeno::BudgetExceeded& e) {
    return report("budget exceeded", e, kBudget);
  } catch (const nvzeno::NumericalError& e) {
    return report("numerical failure", e, kNumerical);
  } catch (const std::exception& e) {
    return report("error", e, kOther);
  }
  return kOther;
}
