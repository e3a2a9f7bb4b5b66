#pragma once

#include <compare>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "nvzeno/bathgen.hpp"
#include "nvzeno/cce.hpp"
#include "nvzeno/dynamics.hpp"

namespace nvzeno {

/// One (bath size, CCE order) variant of a convergence study.
struct ComparisonRun {
  std::size_t n_spins = 0;
  int order = 0;

  auto operator<=>(const ComparisonRun&) const = default;
};

/// Default exclusion radius used by experiment configs (m). Closer baths drive
/// single-spin survival to zero inside the standard window and the cluster
/// expansion stops converging.
inline constexpr double kDefaultExperimentRMin = 4.0e-9;

/// Parsed experiment. Everything is SI; the JSON form carries unit suffixes.
struct ExperimentConfig {
  BathConfig bath{};  // bath.n_spins and bath.field_bz describe the main run
  int cce_order = 4;
  double t_max = 200e-6;
  std::size_t n_time_points = 200;
  std::vector<double> taus{};  // measurement intervals (s)
  double tau_star = 12e-6;     // interval of the broadening section (s)
  std::vector<ComparisonRun> comparisons{};
  int threads = 0;
  SelectionPolicy policy{};
  bool include_nuclear_dipole = false;
  InitialBathState initial = InitialBathState::ZeemanGround;
  std::size_t oracle_max_spins = kDefaultOracleMaxSpins;
  std::optional<double> smoothing_sigma{};  // rad/s; default is the median line gap
  double progress_interval = 5.0;           // s between progress lines, 0 disables
  std::optional<std::filesystem::path> cache_dir{};

  [[nodiscard]] NvParams nv() const;
  /// Uniform grid of n_time_points on [0, t_max].
  [[nodiscard]] std::vector<double> time_grid() const;
  /// time_grid() with every tau merged in, so P(tau) is sampled exactly.
  [[nodiscard]] std::vector<double> zeno_grid() const;
};

/// Reads the unit-suffixed JSON schema. Unknown keys and invalid values throw ConfigError.
ExperimentConfig parse_experiment_config(const nlohmann::json& doc);
ExperimentConfig load_experiment_config(const std::filesystem::path& file);

/// Canonical JSON with every field spelled out, including defaults.
nlohmann::json experiment_config_to_json(const ExperimentConfig& config);

/// FNV-1a of the canonical JSON dump, as 16 hex digits.
std::string config_hash(const ExperimentConfig& config);

/// Sorted variants with duplicates removed; each duplicate is reported to `log`.
std::vector<ComparisonRun> unique_variants(const std::vector<ComparisonRun>& runs,
                                           std::ostream* log = nullptr);

/// One simulated curve of a study.
struct RunRecord {
  std::filesystem::path file;
  ComparisonRun variant{};
  std::string method;
  CceDiagnostics diagnostics{};
  double wall_time = 0.0;  // s
};

struct StudyResult {
  std::vector<std::filesystem::path> files;
  std::vector<RunRecord> runs;
  nlohmann::json extra = nlohmann::json::object();
};

/// One curve CSV per comparison variant plus convergence_summary.csv with the
/// max |dP| between successive orders at fixed N and successive N at fixed M.
StudyResult run_convergence_study(const ExperimentConfig& config, const std::filesystem::path& out,
                                  std::ostream* log = nullptr);

/// survival.csv on the merged grid, bath.json, zeno_measured.csv with P(tau)^n
/// at t = n tau, and zeno_report.csv.
StudyResult run_zeno_study(const ExperimentConfig& config, const std::filesystem::path& out,
                           std::ostream* log = nullptr);

/// Zeno study, convergence study when variants are listed, then meta.json.
StudyResult run_simulation(const ExperimentConfig& config, const std::filesystem::path& out,
                           std::ostream* log = nullptr);

/// Exact whole-bath curve (oracle.csv) and meta.json; N is capped by oracle_max_spins.
StudyResult run_oracle(const ExperimentConfig& config, const std::filesystem::path& out,
                       std::ostream* log = nullptr);

}  // namespace nvzeno
