#include "nvzeno/experiment.hpp"

#include <omp.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ctime>
#include <fstream>
#include <map>
#include <ostream>
#include <set>

#include <Eigen/Core>
#include <fmt/format.h>

#include "nvzeno/curve_io.hpp"
#include "nvzeno/errors.hpp"
#include "nvzeno/hash.hpp"
#include "nvzeno/zeno.hpp"

namespace nvzeno {

namespace {

using json = nlohmann::json;
using Clock = std::chrono::steady_clock;

const std::set<std::string> kKnownKeys = {
    "description",  "seed",          "abundance",         "n_spins",
    "r_min_nm",     "r_max_nm",      "b_field_gauss",     "cce_order",
    "t_max_us",     "n_time_points", "tau_us",            "tau_star_us",
    "comparisons",  "threads",       "max_cluster_diameter_nm",
    "cluster_budget", "include_nuclear_dipole", "initial_bath_state",
    "oracle_max_spins", "smoothing_sigma_rad_s", "progress_interval_s", "cache_dir"};

const std::map<std::string, InitialBathState> kInitialStates = {
    {"zeeman_ground", InitialBathState::ZeemanGround},
    {"zeeman_excited", InitialBathState::ZeemanExcited},
    {"infinite_temperature", InitialBathState::InfiniteTemperature}};

std::string initial_state_name(InitialBathState s) {
  for (const auto& [name, value] : kInitialStates)
    if (value == s) return name;
  return "zeeman_ground";
}

template <class T>
T get_or(const json& doc, const char* key, T fallback) {
  if (!doc.contains(key) || doc.at(key).is_null()) return fallback;
  return doc.at(key).get<T>();
}

void require(bool ok, const std::string& message) {
  if (!ok) throw ConfigError("config: " + message);
}

double elapsed(Clock::time_point since) {
  return std::chrono::duration<double>(Clock::now() - since).count();
}

std::string grid_spec(const ExperimentConfig& c, std::size_t extra_points) {
  auto spec = fmt::format("uniform t_max={:.17g} n={}", c.t_max, c.n_time_points);
  if (extra_points) spec += fmt::format(" plus {} tau points", extra_points);
  return spec;
}

HeaderLines provenance(const ExperimentConfig& c) {
  HeaderLines h;
  h.emplace_back("config_hash", config_hash(c));
  h.emplace_back("generator", std::string(kOccupancyGenerator));
  h.emplace_back("abundance", fmt::format("{:.17g}", c.bath.abundance));
  h.emplace_back("r_min_m", fmt::format("{:.17g}", c.bath.r_min));
  h.emplace_back("initial_bath_state", initial_state_name(c.initial));
  h.emplace_back("include_nuclear_dipole", c.include_nuclear_dipole ? "true" : "false");
  if (c.policy.max_diameter)
    h.emplace_back("max_cluster_diameter_m", fmt::format("{:.17g}", *c.policy.max_diameter));
  return h;
}

Bath bath_for(const ExperimentConfig& c, std::size_t n_spins) {
  BathConfig bc = c.bath;
  bc.n_spins = n_spins;
  return sample_bath(bc);
}

CceOptions cce_options(const ExperimentConfig& c, int order, std::ostream* log,
                       const std::string& label) {
  CceOptions o;
  o.order = order;
  o.policy = c.policy;
  o.include_nuclear_dipole = c.include_nuclear_dipole;
  o.initial = c.initial;
  o.threads = c.threads;
  o.check_unitarity = true;
  if (c.cache_dir) o.cache_dir = *c.cache_dir / fmt::format("{}_{}", config_hash(c), label);
  if (log && c.progress_interval > 0) {
    auto last = std::make_shared<Clock::time_point>(Clock::now());
    const double interval = c.progress_interval;
    o.progress = [log, last, interval, label](std::size_t done, std::size_t total) {
      if (elapsed(*last) < interval && done != total) return;
      *last = Clock::now();
      *log << fmt::format("[{}] {}/{} clusters\n", label, done, total) << std::flush;
    };
  }
  return o;
}

json diagnostics_json(const CceDiagnostics& d) {
  return {{"clusters", d.clusters},
          {"divide_guard_count", d.guard_count},
          {"negative_product_points", d.negative_factor_count},
          {"cache_hits", d.cache_hits},
          {"max_unitarity_residual", d.max_unitarity_residual},
          {"denominator_residual", d.denominator_residual}};
}

json record_json(const RunRecord& r) {
  return {{"file", r.file.filename().string()},
          {"n_spins", r.variant.n_spins},
          {"order", r.variant.order},
          {"method", r.method},
          {"wall_time_s", r.wall_time},
          {"diagnostics", diagnostics_json(r.diagnostics)}};
}

RunRecord run_cce_curve(const ExperimentConfig& c, const Bath& bath, int order,
                        std::span<const double> grid, const std::string& grid_text,
                        const std::filesystem::path& file, std::ostream* log,
                        std::vector<double>* values = nullptr) {
  const auto label = fmt::format("N{}_M{}", bath.size(), order);
  const auto start = Clock::now();
  CceResult res = cce_survival(c.nv(), bath, grid, cce_options(c, order, log, label));
  res.curve.meta.grid = grid_text;
  write_curve_csv(file, res.curve, provenance(c));
  if (values) *values = res.curve.values;
  RunRecord rec{file, {bath.size(), order}, res.curve.method, res.diagnostics, elapsed(start)};
  if (log)
    *log << fmt::format("[{}] done in {:.1f} s, guard count {}\n", label, rec.wall_time,
                        res.diagnostics.guard_count);
  return rec;
}

double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

std::string utc_now() {
  const std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

int resolved_threads(const ExperimentConfig& c) {
  return c.threads > 0 ? c.threads : omp_get_max_threads();
}

json base_meta(const ExperimentConfig& c) {
  return {{"config_hash", config_hash(c)},
          {"config", experiment_config_to_json(c)},
          {"seed", c.bath.seed},
          {"generator", std::string(kOccupancyGenerator)},
          {"versions",
           {{"nvzeno", NVZENO_VERSION},
            {"eigen", fmt::format("{}.{}.{}", EIGEN_WORLD_VERSION, EIGEN_MAJOR_VERSION,
                                  EIGEN_MINOR_VERSION)},
            {"compiler", __VERSION__}}},
          {"threads", resolved_threads(c)},
          {"started_utc", utc_now()}};
}

void write_json(const std::filesystem::path& file, const json& doc) {
  std::ofstream out(file, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + file.string());
  out << doc.dump(2) << '\n';
}

std::ofstream open_output(const std::filesystem::path& file) {
  std::ofstream out(file, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + file.string());
  return out;
}

}  // namespace

NvParams ExperimentConfig::nv() const {
  NvParams p;
  p.b_field = bath.field_bz;
  return p;
}

std::vector<double> ExperimentConfig::time_grid() const {
  return uniform_grid(t_max, n_time_points);
}

std::vector<double> ExperimentConfig::zeno_grid() const {
  auto grid = time_grid();
  grid.insert(grid.end(), taus.begin(), taus.end());
  std::sort(grid.begin(), grid.end());
  grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
  return grid;
}

ExperimentConfig parse_experiment_config(const json& doc) {
  require(doc.is_object(), "top level must be a JSON object");
  for (const auto& [key, value] : doc.items())
    require(kKnownKeys.count(key) == 1, "unknown key '" + key + "'");

  ExperimentConfig c;
  try {
    c.bath.seed = get_or<std::uint64_t>(doc, "seed", 1);
    c.bath.abundance = get_or(doc, "abundance", 0.011);
    c.bath.n_spins = get_or<std::size_t>(doc, "n_spins", 25);
    c.bath.r_min = units::nm_to_m(get_or(doc, "r_min_nm", units::m_to_nm(kDefaultExperimentRMin)));
    if (doc.contains("r_max_nm") && !doc.at("r_max_nm").is_null())
      c.bath.r_max = units::nm_to_m(doc.at("r_max_nm").get<double>());
    c.bath.field_bz = units::gauss_to_tesla(get_or(doc, "b_field_gauss", 1024.98));
    c.cce_order = get_or(doc, "cce_order", 4);
    c.t_max = units::us_to_s(get_or(doc, "t_max_us", 200.0));
    c.n_time_points = get_or<std::size_t>(doc, "n_time_points", 200);
    require(doc.contains("tau_us") && doc.at("tau_us").is_array(), "'tau_us' must be a list");
    for (double tau : doc.at("tau_us").get<std::vector<double>>()) c.taus.push_back(units::us_to_s(tau));
    c.tau_star = units::us_to_s(get_or(doc, "tau_star_us", 12.0));
    if (doc.contains("comparisons")) {
      for (const auto& item : doc.at("comparisons")) {
        require(item.is_object() && item.size() == 2 && item.contains("n_spins") &&
                    item.contains("cce_order"),
                "comparison entries need exactly 'n_spins' and 'cce_order'");
        const auto n = item.at("n_spins").get<long long>();
        require(n >= 1, "comparison n_spins must be >= 1");
        c.comparisons.push_back({static_cast<std::size_t>(n), item.at("cce_order").get<int>()});
      }
    }
    c.threads = get_or(doc, "threads", 0);
    if (doc.contains("max_cluster_diameter_nm") && !doc.at("max_cluster_diameter_nm").is_null())
      c.policy.max_diameter = units::nm_to_m(doc.at("max_cluster_diameter_nm").get<double>());
    c.policy.cluster_budget = get_or<std::size_t>(doc, "cluster_budget", c.policy.cluster_budget);
    c.include_nuclear_dipole = get_or(doc, "include_nuclear_dipole", false);
    const auto state = get_or<std::string>(doc, "initial_bath_state", "zeeman_ground");
    require(kInitialStates.count(state) == 1, "unknown initial_bath_state '" + state + "'");
    c.initial = kInitialStates.at(state);
    c.oracle_max_spins = get_or<std::size_t>(doc, "oracle_max_spins", kDefaultOracleMaxSpins);
    if (doc.contains("smoothing_sigma_rad_s") && !doc.at("smoothing_sigma_rad_s").is_null())
      c.smoothing_sigma = doc.at("smoothing_sigma_rad_s").get<double>();
    c.progress_interval = get_or(doc, "progress_interval_s", 5.0);
    if (doc.contains("cache_dir") && !doc.at("cache_dir").is_null())
      c.cache_dir = std::filesystem::path(doc.at("cache_dir").get<std::string>());
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }

  c.bath.validate();
  require(c.cce_order >= 1, "cce_order must be >= 1");
  require(static_cast<std::size_t>(c.cce_order) <= c.bath.n_spins, "cce_order exceeds n_spins");
  require(std::isfinite(c.t_max) && c.t_max > 0, "t_max_us must be positive");
  require(c.n_time_points >= 2, "n_time_points must be >= 2");
  require(!c.taus.empty(), "tau grid is empty");
  for (double tau : c.taus)
    require(std::isfinite(tau) && tau > 0 && tau <= c.t_max, "every tau must lie in (0, t_max]");
  require(std::isfinite(c.tau_star) && c.tau_star > 0, "tau_star_us must be positive");
  for (const auto& v : c.comparisons)
    require(v.order >= 1 && static_cast<std::size_t>(v.order) <= v.n_spins,
            fmt::format("comparison (N={}, M={}) needs 1 <= M <= N", v.n_spins, v.order));
  require(c.threads >= 0, "threads must be >= 0");
  require(!c.policy.max_diameter || *c.policy.max_diameter > 0,
          "max_cluster_diameter_nm must be positive");
  require(c.policy.cluster_budget >= 1, "cluster_budget must be >= 1");
  require(c.oracle_max_spins >= 1 && c.oracle_max_spins <= kMaxClusterSites,
          fmt::format("oracle_max_spins must lie in [1, {}]", kMaxClusterSites));
  require(!c.smoothing_sigma || *c.smoothing_sigma > 0, "smoothing_sigma_rad_s must be positive");
  require(c.progress_interval >= 0, "progress_interval_s must be >= 0");
  return c;
}

ExperimentConfig load_experiment_config(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw ConfigError("config: cannot open " + file.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError("config: " + file.string() + ": " + e.what());
  }
  return parse_experiment_config(doc);
}

json experiment_config_to_json(const ExperimentConfig& c) {
  json taus = json::array();
  for (double t : c.taus) taus.push_back(units::s_to_us(t));
  json comparisons = json::array();
  for (const auto& v : c.comparisons) comparisons.push_back({{"n_spins", v.n_spins}, {"cce_order", v.order}});
  json doc = {{"seed", c.bath.seed},
              {"abundance", c.bath.abundance},
              {"n_spins", c.bath.n_spins},
              {"r_min_nm", units::m_to_nm(c.bath.r_min)},
              {"r_max_nm", c.bath.r_max ? json(units::m_to_nm(*c.bath.r_max)) : json()},
              {"b_field_gauss", units::tesla_to_gauss(c.bath.field_bz)},
              {"cce_order", c.cce_order},
              {"t_max_us", units::s_to_us(c.t_max)},
              {"n_time_points", c.n_time_points},
              {"tau_us", taus},
              {"tau_star_us", units::s_to_us(c.tau_star)},
              {"comparisons", comparisons},
              {"threads", c.threads},
              {"max_cluster_diameter_nm",
               c.policy.max_diameter ? json(units::m_to_nm(*c.policy.max_diameter)) : json()},
              {"cluster_budget", c.policy.cluster_budget},
              {"include_nuclear_dipole", c.include_nuclear_dipole},
              {"initial_bath_state", initial_state_name(c.initial)},
              {"oracle_max_spins", c.oracle_max_spins},
              {"smoothing_sigma_rad_s", c.smoothing_sigma ? json(*c.smoothing_sigma) : json()},
              {"progress_interval_s", c.progress_interval},
              {"cache_dir", c.cache_dir ? json(c.cache_dir->string()) : json()}};
  return doc;
}

std::string config_hash(const ExperimentConfig& config) {
  // Progress and cache location do not affect the data.
  json doc = experiment_config_to_json(config);
  doc.erase("progress_interval_s");
  doc.erase("cache_dir");
  return fmt::format("{:016x}", Fnv1a().text(doc.dump()).digest());
}

std::vector<ComparisonRun> unique_variants(const std::vector<ComparisonRun>& runs, std::ostream* log) {
  std::vector<ComparisonRun> out;
  std::set<ComparisonRun> seen;
  for (const auto& v : runs) {
    if (!seen.insert(v).second) {
      if (log) *log << fmt::format("warning: duplicate variant (N={}, M={}) ignored\n", v.n_spins, v.order);
      continue;
    }
    out.push_back(v);
  }
  std::sort(out.begin(), out.end());
  return out;
}

StudyResult run_convergence_study(const ExperimentConfig& c, const std::filesystem::path& out,
                                  std::ostream* log) {
  const auto variants = unique_variants(c.comparisons, log);
  if (variants.empty()) throw ConfigError("config: convergence study needs at least one comparison");
  std::filesystem::create_directories(out);
  const auto grid = c.time_grid();
  const auto grid_text = grid_spec(c, 0);

  StudyResult result;
  std::map<ComparisonRun, std::vector<double>> curves;
  std::map<std::size_t, Bath> baths;
  for (const auto& v : variants) {
    auto it = baths.find(v.n_spins);
    if (it == baths.end()) it = baths.emplace(v.n_spins, bath_for(c, v.n_spins)).first;
    const auto file = out / fmt::format("curve_N{}_M{}.csv", v.n_spins, v.order);
    result.runs.push_back(run_cce_curve(c, it->second, v.order, grid, grid_text, file, log,
                                        &curves[v]));
    result.files.push_back(file);
  }

  const auto summary = out / "convergence_summary.csv";
  auto os = open_output(summary);
  os << "# config_hash: " << config_hash(c) << '\n'
     << "kind,n_spins_a,order_a,n_spins_b,order_b,max_abs_diff\n";
  json pairs = json::array();
  auto emit = [&](const char* kind, const ComparisonRun& a, const ComparisonRun& b) {
    const double d = max_abs_diff(curves.at(a), curves.at(b));
    os << fmt::format("{},{},{},{},{},{:.17g}\n", kind, a.n_spins, a.order, b.n_spins, b.order, d);
    pairs.push_back({{"kind", kind}, {"a", {a.n_spins, a.order}}, {"b", {b.n_spins, b.order}}, {"max_abs_diff", d}});
  };
  // variants are sorted by (N, M): neighbours with equal N are successive orders.
  for (std::size_t i = 1; i < variants.size(); ++i)
    if (variants[i].n_spins == variants[i - 1].n_spins) emit("order", variants[i - 1], variants[i]);
  std::map<int, std::vector<ComparisonRun>> by_order;
  for (const auto& v : variants) by_order[v.order].push_back(v);
  for (const auto& [order, group] : by_order)
    for (std::size_t i = 1; i < group.size(); ++i) emit("size", group[i - 1], group[i]);
  result.files.push_back(summary);
  result.extra["pairs"] = pairs;
  return result;
}

StudyResult run_zeno_study(const ExperimentConfig& c, const std::filesystem::path& out,
                           std::ostream* log) {
  std::filesystem::create_directories(out);
  const auto nv = c.nv();
  const Bath bath = sample_bath(c.bath);
  const auto grid = c.zeno_grid();
  const auto header = provenance(c);
  StudyResult result;

  const auto bath_file = out / "bath.json";
  write_json(bath_file, bath_to_json(bath));
  result.files.push_back(bath_file);

  std::vector<double> values;
  const auto curve_file = out / "survival.csv";
  result.runs.push_back(run_cce_curve(c, bath, c.cce_order, grid,
                                      grid_spec(c, grid.size() - c.n_time_points), curve_file, log,
                                      &values));
  result.files.push_back(curve_file);
  SurvivalCurve curve;
  curve.times = grid;
  curve.values = values;

  // P^(n)(n tau) = P(tau)^n next to the undisturbed P(n tau).
  const auto measured_file = out / "zeno_measured.csv";
  {
    auto os = open_output(measured_file);
    for (const auto& [k, v] : header) os << "# " << k << ": " << v << '\n';
    os << "tau_seconds,n_measurements,t_seconds,P_measured,P_free\n";
    std::size_t clamps = 0;
    for (double tau : c.taus) {
      const double p_tau = interpolate(curve, tau);
      if (!(p_tau > 0.0)) {
        if (log) *log << fmt::format("warning: P(tau = {:.6g} s) = {:.6g} <= 0; no measured curve\n", tau, p_tau);
        continue;
      }
      ClampCounter counter;
      const auto n_max = static_cast<long>(std::floor(c.t_max / tau * (1.0 + 1e-12)));
      for (long n = 0; n <= n_max; ++n) {
        const double t = std::min(static_cast<double>(n) * tau, c.t_max);
        os << fmt::format("{:.17g},{},{:.17g},{:.17g},{:.17g}\n", tau, n, t,
                          repeated_measurement_survival(p_tau, n, &counter), interpolate(curve, t));
      }
      clamps += counter.clamped ? 1 : 0;
    }
    result.extra["measured_clamped_taus"] = clamps;
  }
  result.files.push_back(measured_file);

  const ZenoReport report = make_zeno_report(curve, c.taus, spectral_weights(bath), nv.omega_a(),
                                             c.tau_star, c.smoothing_sigma);
  const auto report_file = out / "zeno_report.csv";
  {
    auto os = open_output(report_file);
    write_zeno_report(os, report, header);
  }
  result.files.push_back(report_file);

  result.extra["omega_a_rad_s"] = report.omega_a;
  result.extra["weighted_mean_omega_rad_s"] = weighted_mean_frequency(report.spectrum);
  result.extra["smoothing_sigma_rad_s"] = report.smoothing_sigma;
  result.extra["rate_clamp_count"] = report.clamp_count;
  result.extra["broadening_normalization"] =
      broadening_integral(c.tau_star, nv.omega_a(), 40.0 * M_PI / c.tau_star);
  try {
    SurvivalCurve uniform;
    uniform.times = c.time_grid();
    for (double t : uniform.times) uniform.values.push_back(interpolate(curve, t));
    const RegimeFit fit = regime_fit(uniform);
    result.extra["regime_fit"] = {{"gaussian_kappa", fit.gaussian_kappa},
                                  {"exp_rate", fit.exp_rate},
                                  {"crossover_t", fit.crossover_t},
                                  {"gaussian_r2", fit.gaussian_r2},
                                  {"exp_r2", fit.exp_r2},
                                  {"gaussian_ok", fit.gaussian_ok},
                                  {"exponential_ok", fit.exponential_ok}};
  } catch (const std::invalid_argument& e) {
    result.extra["regime_fit"] = {{"error", e.what()}};
  }
  return result;
}

StudyResult run_simulation(const ExperimentConfig& c, const std::filesystem::path& out,
                           std::ostream* log) {
  const auto start = Clock::now();
  json meta = base_meta(c);
  StudyResult result = run_zeno_study(c, out, log);
  meta["zeno"] = result.extra;
  if (!c.comparisons.empty()) {
    StudyResult conv = run_convergence_study(c, out, log);
    meta["convergence"] = conv.extra;
    result.files.insert(result.files.end(), conv.files.begin(), conv.files.end());
    result.runs.insert(result.runs.end(), conv.runs.begin(), conv.runs.end());
  }
  json runs = json::array();
  for (const auto& r : result.runs) runs.push_back(record_json(r));
  meta["runs"] = runs;
  meta["wall_time_s"] = elapsed(start);
  const auto meta_file = out / "meta.json";
  write_json(meta_file, meta);
  result.files.push_back(meta_file);
  return result;
}

StudyResult run_oracle(const ExperimentConfig& c, const std::filesystem::path& out, std::ostream* log) {
  if (c.bath.n_spins > c.oracle_max_spins)
    throw BudgetExceeded(fmt::format("oracle: N = {} exceeds oracle_max_spins = {}", c.bath.n_spins,
                                     c.oracle_max_spins));
  const auto start = Clock::now();
  std::filesystem::create_directories(out);
  json meta = base_meta(c);
  const Bath bath = sample_bath(c.bath);
  const auto grid = c.time_grid();
  if (log) *log << fmt::format("[oracle] exact propagation, dimension {}\n", 3 * (std::size_t{1} << bath.size()));
  SurvivalCurve curve = exact_survival_full(c.nv(), bath, grid, c.oracle_max_spins, c.initial,
                                            c.include_nuclear_dipole);
  curve.meta.grid = grid_spec(c, 0);
  StudyResult result;
  const auto file = out / "oracle.csv";
  write_curve_csv(file, curve, provenance(c));
  result.files.push_back(file);
  RunRecord rec{file, {bath.size(), 0}, curve.method, {}, elapsed(start)};
  result.runs.push_back(rec);
  meta["runs"] = json::array({record_json(rec)});
  meta["wall_time_s"] = rec.wall_time;
  const auto meta_file = out / "meta.json";
  write_json(meta_file, meta);
  result.files.push_back(meta_file);
  return result;
}

}  // namespace nvzeno
