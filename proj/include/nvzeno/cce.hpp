#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "nvzeno/bathgen.hpp"
#include "nvzeno/dynamics.hpp"

namespace nvzeno {

using SiteIndex = std::uint32_t;

struct SelectionPolicy {
  /// Largest allowed pairwise distance inside a cluster (m); unset keeps every subset.
  std::optional<double> max_diameter{};
  /// Upper bound on the total number of clusters.
  std::size_t cluster_budget = 5'000'000;
};

/// All clusters of one size, flattened, in lexicographic order.
struct ClusterLevel {
  std::size_t size = 0;
  std::vector<SiteIndex> members;

  [[nodiscard]] std::size_t count() const { return size ? members.size() / size : 0; }
  [[nodiscard]] std::span<const SiteIndex> cluster(std::size_t i) const {
    return {members.data() + i * size, size};
  }
  /// Position of `c` in this level, if present.
  [[nodiscard]] std::optional<std::size_t> find(std::span<const SiteIndex> c) const;
};

struct ClusterSet {
  int order = 0;
  std::vector<ClusterLevel> levels;  // levels[k-1] holds clusters of size k
  SelectionPolicy policy{};

  [[nodiscard]] std::size_t total() const;
};

/// sum_{k=1..order} C(n, k), saturating at SIZE_MAX.
std::size_t count_all_subsets(std::size_t n, int order);

/// Every cluster of size <= order allowed by the policy; closed under subsets.
/// Throws ConfigError unless 1 <= order <= N, BudgetExceeded past the budget.
ClusterSet enumerate_clusters(const Bath& bath, int order, const SelectionPolicy& policy = {});

/// Correlation factors of the already-processed orders, keyed by cluster.
class CorrelationTable {
 public:
  explicit CorrelationTable(std::size_t n_times) : n_times_(n_times) {}

  /// Appends the complete level of size `level.size`; levels must arrive in order.
  void add_level(ClusterLevel level, std::vector<double> factors);
  /// Factor curve of a stored cluster; throws std::logic_error if absent.
  [[nodiscard]] std::span<const double> factor(std::span<const SiteIndex> cluster) const;
  [[nodiscard]] std::size_t n_times() const { return n_times_; }
  [[nodiscard]] std::size_t max_size() const { return levels_.size(); }

 private:
  std::size_t n_times_;
  std::vector<ClusterLevel> levels_;
  std::vector<std::vector<double>> factors_;
};

/// Divisions by a sub-factor smaller than this in magnitude are skipped.
inline constexpr double kDivisionGuard = 1e-9;

struct FactorStats {
  std::size_t guarded = 0;
};

/// P~_c(t) = P_c(t) / prod_{c' proper subset of c} P~_c'(t), pointwise.
/// Where any |P~_c'(t)| < kDivisionGuard the factor is set to 1 and counted.
std::vector<double> correlation_factor(std::span<const SiteIndex> cluster,
                                       const CorrelationTable& table,
                                       std::span<const double> p_cluster,
                                       FactorStats* stats = nullptr);

struct CceOptions {
  int order = 4;
  SelectionPolicy policy{};
  bool include_nuclear_dipole = false;
  InitialBathState initial = InitialBathState::ZeemanGround;
  int threads = 0;  // 0: OpenMP default
  bool check_unitarity = true;
  /// Directory for per-block cluster results; enables resuming large runs.
  std::optional<std::filesystem::path> cache_dir{};
  /// Called between blocks with (clusters done, clusters total).
  std::function<void(std::size_t, std::size_t)> progress{};
};

struct CceDiagnostics {
  std::size_t clusters = 0;
  std::size_t guard_count = 0;
  std::size_t negative_factor_count = 0;
  std::size_t cache_hits = 0;
  double max_unitarity_residual = 0.0;
  double denominator_residual = 0.0;
};

struct CceResult {
  SurvivalCurve curve;
  CceDiagnostics diagnostics;
};

/// Largest residual tolerated in the |0>-eigenstate check.
inline constexpr double kDenominatorTolerance = 1e-12;

/// Largest tolerated max|U^H U - 1| over the cluster propagations of a run.
inline constexpr double kUnitarityTolerance = 1e-11;

/// P^(M)(t) = prod_{|c| <= M} P~_c(t), accumulated in cluster order. Results
/// are bit-identical for any thread count.
CceResult cce_survival(const NvParams& nv, const Bath& bath, std::span<const double> times,
                       const CceOptions& options);

inline constexpr std::size_t kDefaultOracleMaxSpins = 12;

/// Exact survival of the whole bath from a single eigendecomposition.
SurvivalCurve exact_survival_full(const NvParams& nv, const Bath& bath,
                                  std::span<const double> times,
                                  std::size_t max_spins = kDefaultOracleMaxSpins,
                                  InitialBathState initial = InitialBathState::ZeemanGround,
                                  bool include_nuclear_dipole = false);

}  // namespace nvzeno
