#include "nvzeno/cce.hpp"

#include <omp.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <string>

#include "nvzeno/errors.hpp"
#include "nvzeno/hash.hpp"

namespace nvzeno {

namespace {

constexpr std::size_t kBlockSize = 2048;
constexpr std::uint64_t kCacheMagic = 0x31434345'5a564e00ULL;  // "\0NVZECC1"

bool lex_less(std::span<const SiteIndex> a, std::span<const SiteIndex> b) {
  return std::lexicographical_compare(a.begin(), a.end(), b.begin(), b.end());
}

std::uint64_t run_key(const NvParams& nv, const Bath& bath, std::span<const double> times,
                      const CceOptions& opt) {
  Fnv1a h;
  h.value(nv.phys.zero_field_splitting).value(nv.phys.gamma_e).value(nv.phys.gamma_c);
  h.value(nv.phys.mu0).value(nv.phys.hbar).value(nv.b_field);
  for (const auto& s : bath.sites) {
    h.bytes(s.r.data(), 3 * sizeof(double));
    h.bytes(s.hyperfine.data(), 9 * sizeof(double));
  }
  h.values(times);
  h.value(opt.include_nuclear_dipole).value(static_cast<int>(opt.initial));
  return h.digest();
}

struct CacheHeader {
  std::uint64_t magic;
  std::uint64_t key;
  std::uint64_t members_hash;
  std::uint64_t level;
  std::uint64_t count;
  std::uint64_t n_times;
};

std::filesystem::path cache_file(const std::filesystem::path& dir, std::size_t level,
                                 std::size_t block) {
  return dir / ("k" + std::to_string(level) + "_b" + std::to_string(block) + ".bin");
}

bool cache_load(const std::filesystem::path& file, const CacheHeader& want,
                std::vector<double>& out) {
  std::ifstream in(file, std::ios::binary);
  if (!in) return false;
  CacheHeader got{};
  in.read(reinterpret_cast<char*>(&got), sizeof got);
  if (!in || std::memcmp(&got, &want, sizeof got) != 0) return false;
  out.resize(want.count * want.n_times);
  in.read(reinterpret_cast<char*>(out.data()),
          static_cast<std::streamsize>(out.size() * sizeof(double)));
  return static_cast<bool>(in);
}

void cache_store(const std::filesystem::path& file, const CacheHeader& hdr,
                 const std::vector<double>& data) {
  const auto tmp = std::filesystem::path(file).concat(".tmp");
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cce cache: cannot write " + tmp.string());
    out.write(reinterpret_cast<const char*>(&hdr), sizeof hdr);
    out.write(reinterpret_cast<const char*>(data.data()),
              static_cast<std::streamsize>(data.size() * sizeof(double)));
  }
  std::filesystem::rename(tmp, file);
}

}  // namespace

std::optional<std::size_t> ClusterLevel::find(std::span<const SiteIndex> c) const {
  if (c.size() != size || size == 0) return std::nullopt;
  std::size_t lo = 0, hi = count();
  while (lo < hi) {
    const std::size_t mid = lo + (hi - lo) / 2;
    if (lex_less(cluster(mid), c))
      lo = mid + 1;
    else
      hi = mid;
  }
  if (lo < count() && std::ranges::equal(cluster(lo), c)) return lo;
  return std::nullopt;
}

std::size_t ClusterSet::total() const {
  std::size_t n = 0;
  for (const auto& l : levels) n += l.count();
  return n;
}

std::size_t count_all_subsets(std::size_t n, int order) {
  constexpr auto kMax = std::numeric_limits<std::size_t>::max();
  std::size_t total = 0;
  long double binom = 1.0L;
  for (int k = 1; k <= order && static_cast<std::size_t>(k) <= n; ++k) {
    binom = binom * static_cast<long double>(n - static_cast<std::size_t>(k) + 1) / k;
    const long double next = static_cast<long double>(total) + std::round(binom);
    if (next >= static_cast<long double>(kMax)) return kMax;
    total = static_cast<std::size_t>(next);
  }
  return total;
}

ClusterSet enumerate_clusters(const Bath& bath, int order, const SelectionPolicy& policy) {
  const std::size_t n = bath.size();
  if (order < 1 || static_cast<std::size_t>(order) > n)
    throw ConfigError("cce: order " + std::to_string(order) + " outside [1, N = " +
                      std::to_string(n) + "]");
  if (n > std::numeric_limits<SiteIndex>::max()) throw ConfigError("cce: bath too large");
  if (!policy.max_diameter) {
    const std::size_t expected = count_all_subsets(n, order);
    if (expected > policy.cluster_budget)
      throw BudgetExceeded("cce: " + std::to_string(expected) + " clusters at N = " +
                           std::to_string(n) + ", M = " + std::to_string(order) +
                           " exceeds the budget of " + std::to_string(policy.cluster_budget) +
                           "; set a cluster diameter cutoff or raise the budget");
  }
  const double dmax2 = policy.max_diameter ? *policy.max_diameter * *policy.max_diameter
                                           : std::numeric_limits<double>::infinity();
  auto close = [&](SiteIndex a, SiteIndex b) {
    return (bath.sites[a].r - bath.sites[b].r).squaredNorm() <= dmax2;
  };

  ClusterSet set;
  set.order = order;
  set.policy = policy;
  ClusterLevel first{1, {}};
  first.members.resize(n);
  for (std::size_t i = 0; i < n; ++i) first.members[i] = static_cast<SiteIndex>(i);
  set.levels.push_back(std::move(first));
  std::size_t total = n;

  // Extend each cluster by a larger index; prefix order keeps the level sorted.
  for (int k = 2; k <= order; ++k) {
    const ClusterLevel& prev = set.levels.back();
    ClusterLevel next{static_cast<std::size_t>(k), {}};
    for (std::size_t c = 0; c < prev.count(); ++c) {
      const auto base = prev.cluster(c);
      for (auto j = static_cast<std::size_t>(base.back()) + 1; j < n; ++j) {
        const auto sj = static_cast<SiteIndex>(j);
        if (!std::ranges::all_of(base, [&](SiteIndex a) { return close(a, sj); })) continue;
        if (++total > policy.cluster_budget)
          throw BudgetExceeded("cce: cluster budget of " + std::to_string(policy.cluster_budget) +
                               " exceeded at size " + std::to_string(k) +
                               "; tighten the diameter cutoff");
        next.members.insert(next.members.end(), base.begin(), base.end());
        next.members.push_back(sj);
      }
    }
    set.levels.push_back(std::move(next));
  }
  return set;
}

void CorrelationTable::add_level(ClusterLevel level, std::vector<double> factors) {
  if (level.size != levels_.size() + 1)
    throw std::logic_error("CorrelationTable: levels must be added in ascending size");
  if (factors.size() != level.count() * n_times_)
    throw std::logic_error("CorrelationTable: factor array has the wrong length");
  levels_.push_back(std::move(level));
  factors_.push_back(std::move(factors));
}

std::span<const double> CorrelationTable::factor(std::span<const SiteIndex> cluster) const {
  const std::size_t k = cluster.size();
  if (k == 0 || k > levels_.size())
    throw std::logic_error("CorrelationTable: no level for cluster of size " + std::to_string(k));
  const auto pos = levels_[k - 1].find(cluster);
  if (!pos) throw std::logic_error("CorrelationTable: missing sub-cluster factor");
  return {factors_[k - 1].data() + *pos * n_times_, n_times_};
}

std::vector<double> correlation_factor(std::span<const SiteIndex> cluster,
                                       const CorrelationTable& table,
                                       std::span<const double> p_cluster, FactorStats* stats) {
  const std::size_t nt = p_cluster.size();
  if (nt != table.n_times()) throw std::invalid_argument("correlation_factor: grid mismatch");
  const std::size_t k = cluster.size();
  std::vector<double> out(p_cluster.begin(), p_cluster.end());
  if (k <= 1) return out;

  std::vector<double> denom(nt, 1.0);
  std::vector<char> guarded(nt, 0);
  std::vector<SiteIndex> sub;
  sub.reserve(k);
  const unsigned full = (1u << k) - 1;
  for (unsigned mask = 1; mask < full; ++mask) {
    sub.clear();
    for (std::size_t b = 0; b < k; ++b)
      if (mask & (1u << b)) sub.push_back(cluster[b]);
    const auto f = table.factor(sub);
    for (std::size_t t = 0; t < nt; ++t) {
      if (std::abs(f[t]) < kDivisionGuard) guarded[t] = 1;
      denom[t] *= f[t];
    }
  }
  for (std::size_t t = 0; t < nt; ++t) {
    if (guarded[t]) {
      out[t] = 1.0;
      if (stats) ++stats->guarded;
    } else {
      out[t] /= denom[t];
    }
  }
  return out;
}

CceResult cce_survival(const NvParams& nv, const Bath& bath, std::span<const double> times,
                       const CceOptions& options) {
  CceResult result;
  auto& diag = result.diagnostics;
  const std::size_t nt = times.size();
  if (nt == 0) throw ConfigError("cce: empty time grid");

  diag.denominator_residual = nv_denominator_residual(nv, times);
  if (!(diag.denominator_residual <= kDenominatorTolerance))
    throw NumericalError("cce: |0> is not an eigenstate of H_NV (residual " +
                         std::to_string(diag.denominator_residual) + ")");

  const ClusterSet set = enumerate_clusters(bath, options.order, options.policy);
  diag.clusters = set.total();
  const int threads = options.threads > 0 ? options.threads : omp_get_max_threads();
  const double t_check = *std::max_element(times.begin(), times.end());
  const std::uint64_t key = options.cache_dir ? run_key(nv, bath, times, options) : 0;
  if (options.cache_dir) std::filesystem::create_directories(*options.cache_dir);

  CorrelationTable table(nt);
  std::vector<double> log_sum(nt, 0.0);
  std::vector<std::size_t> negatives(nt, 0);
  std::size_t done = 0;

  for (const ClusterLevel& level : set.levels) {
    const std::size_t count = level.count();
    const bool keep = static_cast<int>(level.size) < options.order;
    std::vector<double> kept;
    if (keep) kept.resize(count * nt);

    for (std::size_t begin = 0, block = 0; begin < count; begin += kBlockSize, ++block) {
      const std::size_t end = std::min(count, begin + kBlockSize);
      const std::size_t len = end - begin;
      std::vector<double> raw(len * nt);
      std::vector<double> factors(len * nt);
      std::vector<double> residual(len, 0.0);
      std::vector<std::size_t> guards(len, 0);

      CacheHeader hdr{};
      bool cached = false;
      if (options.cache_dir) {
        Fnv1a mh;
        mh.values(std::span(level.members.data() + begin * level.size, len * level.size));
        hdr = {kCacheMagic, key, mh.digest(), level.size, len, nt};
        cached = cache_load(cache_file(*options.cache_dir, level.size, block), hdr, raw);
        if (cached) diag.cache_hits += len;
      }

      std::string failure;
#pragma omp parallel for schedule(dynamic, 4) num_threads(threads)
      for (std::size_t i = 0; i < len; ++i) {
        try {
          const auto members = level.cluster(begin + i);
          std::span<double> p(raw.data() + i * nt, nt);
          if (!cached || options.check_unitarity) {
            const std::vector<std::size_t> sites(members.begin(), members.end());
            const auto h = build_cluster_hamiltonian(nv, bath, sites, options.include_nuclear_dipole);
            const Propagator prop(h.matrix, sites.size(), options.initial);
            if (!cached) {
              const auto values = prop.survival(times);
              std::copy(values.begin(), values.end(), p.begin());
            }
            if (options.check_unitarity) residual[i] = prop.unitarity_residual(t_check);
          }
          FactorStats stats;
          const auto f = correlation_factor(members, table, p, &stats);
          guards[i] = stats.guarded;
          std::copy(f.begin(), f.end(), factors.begin() + static_cast<std::ptrdiff_t>(i * nt));
        } catch (const std::exception& e) {
#pragma omp critical(nvzeno_cce_failure)
          if (failure.empty()) failure = e.what();
        }
      }
      if (!failure.empty()) throw NumericalError("cce: cluster evaluation failed: " + failure);
      if (options.cache_dir && !cached)
        cache_store(cache_file(*options.cache_dir, level.size, block), hdr, raw);

      // Ordered reduction: identical for any thread count.
      for (std::size_t i = 0; i < len; ++i) {
        diag.guard_count += guards[i];
        diag.max_unitarity_residual = std::max(diag.max_unitarity_residual, residual[i]);
        const double* f = factors.data() + i * nt;
        for (std::size_t t = 0; t < nt; ++t) {
          if (!std::isfinite(f[t]))
            throw NumericalError("cce: non-finite correlation factor");
          if (f[t] < 0.0) ++negatives[t];
          log_sum[t] += std::log(std::abs(f[t]));
        }
      }
      if (keep)
        std::copy(factors.begin(), factors.end(), kept.begin() + static_cast<std::ptrdiff_t>(begin * nt));
      done += len;
      if (options.progress) options.progress(done, diag.clusters);
    }
    if (keep) table.add_level(level, std::move(kept));
  }

  if (options.check_unitarity && !(diag.max_unitarity_residual <= kUnitarityTolerance))
    throw NumericalError("cce: unitarity residual " + std::to_string(diag.max_unitarity_residual) +
                         " exceeds tolerance");

  SurvivalCurve& curve = result.curve;
  curve.times.assign(times.begin(), times.end());
  curve.values.resize(nt);
  for (std::size_t t = 0; t < nt; ++t) {
    const double mag = std::exp(log_sum[t]);
    curve.values[t] = negatives[t] % 2 ? -mag : mag;
    if (negatives[t]) ++diag.negative_factor_count;
  }
  curve.method = "cce(" + std::to_string(options.order) + ")";
  curve.meta.seed = bath.config.seed;
  curve.meta.n_spins = bath.size();
  curve.meta.order = options.order;
  curve.meta.b_field = nv.b_field;
  curve.meta.guard_count = diag.guard_count;
  return result;
}

SurvivalCurve exact_survival_full(const NvParams& nv, const Bath& bath,
                                  std::span<const double> times, std::size_t max_spins,
                                  InitialBathState initial, bool include_nuclear_dipole) {
  if (bath.size() > max_spins)
    throw BudgetExceeded("exact oracle: N = " + std::to_string(bath.size()) +
                         " exceeds the cap of " + std::to_string(max_spins));
  std::vector<std::size_t> all(bath.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  auto h = build_cluster_hamiltonian(nv, bath, all, include_nuclear_dipole,
                                     std::max(max_spins, all.size()));
  const Propagator prop(std::move(h.matrix), all.size(), initial);
  SurvivalCurve curve;
  curve.times.assign(times.begin(), times.end());
  curve.values = prop.survival(times);
  curve.method = "exact";
  curve.meta.seed = bath.config.seed;
  curve.meta.n_spins = bath.size();
  curve.meta.order = 0;
  curve.meta.b_field = nv.b_field;
  return curve;
}

}  // namespace nvzeno
