#include "nvzeno/zeno.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <ostream>
#include <stdexcept>

#include <fmt/format.h>

namespace nvzeno {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

double sinc(double x) { return std::abs(x) < 1e-8 ? 1.0 - x * x / 6.0 : std::sin(x) / x; }

std::vector<SpectralLine> sorted_by_omega(std::span<const SpectralLine> spectrum) {
  std::vector<SpectralLine> s(spectrum.begin(), spectrum.end());
  std::sort(s.begin(), s.end(), [](const SpectralLine& a, const SpectralLine& b) {
    return a.omega != b.omega ? a.omega < b.omega : a.weight < b.weight;
  });
  return s;
}

}  // namespace

double repeated_measurement_survival(double p_tau, long n_measurements, ClampCounter* clamps) {
  if (!(p_tau > 0.0)) throw std::domain_error("repeated_measurement_survival: P(tau) <= 0");
  if (n_measurements < 0) throw std::domain_error("repeated_measurement_survival: N < 0");
  if (p_tau > 1.0) {
    p_tau = 1.0;
    if (clamps) ++clamps->clamped;
  }
  return std::pow(p_tau, static_cast<double>(n_measurements));
}

double interpolate(const SurvivalCurve& curve, double t) {
  const auto& ts = curve.times;
  if (ts.empty() || ts.size() != curve.values.size())
    throw std::invalid_argument("interpolate: malformed curve");
  const double span = ts.back() - ts.front();
  const double slack = 1e-12 * std::max(std::abs(span), std::abs(ts.back()));
  if (t < ts.front() - slack || t > ts.back() + slack)
    throw std::out_of_range("interpolate: t outside the curve grid");
  const auto it = std::lower_bound(ts.begin(), ts.end(), t);
  if (it == ts.begin()) return curve.values.front();
  if (it == ts.end()) return curve.values.back();
  const auto k = static_cast<std::size_t>(it - ts.begin());
  if (*it == t) return curve.values[k];
  const double w = (t - ts[k - 1]) / (ts[k] - ts[k - 1]);
  return (1.0 - w) * curve.values[k - 1] + w * curve.values[k];
}

double effective_rate(const SurvivalCurve& curve, double tau, ClampCounter* clamps) {
  if (!(tau > 0.0)) throw std::domain_error("effective_rate: tau must be positive");
  double p = interpolate(curve, tau);
  if (p > 1.0 || p < kRateClampFloor) {
    p = std::clamp(p, kRateClampFloor, 1.0);
    if (clamps) ++clamps->clamped;
  }
  return -std::log(p) / tau;
}

double broadening(double omega, double tau, double omega_a) {
  const double s = sinc((omega - omega_a) * tau / 2.0);
  return tau / kTwoPi * s * s;
}

double broadening_integral(double tau, double omega_a, double half_width, std::size_t intervals) {
  if (intervals % 2) ++intervals;
  const double a = omega_a - half_width;
  const double h = 2.0 * half_width / static_cast<double>(intervals);
  double sum = broadening(a, tau, omega_a) + broadening(a + 2.0 * half_width, tau, omega_a);
  for (std::size_t k = 1; k < intervals; ++k)
    sum += (k % 2 ? 4.0 : 2.0) * broadening(a + h * static_cast<double>(k), tau, omega_a);
  return sum * h / 3.0;
}

double overlap_rate(std::span<const SpectralLine> spectrum, double tau, double omega_a) {
  double sum = 0.0;
  for (const auto& line : sorted_by_omega(spectrum))
    sum += broadening(line.omega, tau, omega_a) * line.weight;
  return kTwoPi * sum;
}

double smoothed_density(std::span<const SpectralLine> spectrum, double omega, double sigma) {
  if (!(sigma > 0.0)) throw std::domain_error("smoothed_density: sigma must be positive");
  const double norm = 1.0 / (sigma * std::sqrt(kTwoPi));
  double g = 0.0;
  for (const auto& line : sorted_by_omega(spectrum)) {
    const double z = (omega - line.omega) / sigma;
    g += line.weight * norm * std::exp(-0.5 * z * z);
  }
  return g;
}

double overlap_rate_smoothed(std::span<const SpectralLine> spectrum, double tau, double omega_a,
                             double sigma) {
  if (!(tau > 0.0)) throw std::domain_error("overlap_rate_smoothed: tau must be positive");
  if (!(sigma > 0.0)) throw std::domain_error("overlap_rate_smoothed: sigma must be positive");
  // The integral splits into one F-Gaussian convolution per line, each taken
  // over the line's +- 8 sigma window.
  const double lobe = kTwoPi / tau;
  const double norm = 1.0 / (sigma * std::sqrt(kTwoPi));
  const double step = std::min(lobe, sigma) / 16.0;
  auto n = static_cast<std::size_t>(std::ceil(16.0 * sigma / step));
  n = std::clamp<std::size_t>(n + n % 2, 64, 200'000);
  double total = 0.0;
  for (const auto& line : sorted_by_omega(spectrum)) {
    const double lo = line.omega - 8.0 * sigma;
    const double h = 16.0 * sigma / static_cast<double>(n);
    auto integrand = [&](double w) {
      const double z = (w - line.omega) / sigma;
      return broadening(w, tau, omega_a) * norm * std::exp(-0.5 * z * z);
    };
    double sum = integrand(lo) + integrand(lo + 16.0 * sigma);
    for (std::size_t k = 1; k < n; ++k)
      sum += (k % 2 ? 4.0 : 2.0) * integrand(lo + h * static_cast<double>(k));
    total += line.weight * sum * h / 3.0;
  }
  return kTwoPi * total;
}

double typical_line_spacing(std::span<const SpectralLine> spectrum) {
  if (spectrum.size() < 2) return 0.0;
  const auto lines = sorted_by_omega(spectrum);
  std::vector<double> gaps;
  for (std::size_t k = 1; k < lines.size(); ++k) {
    const double g = lines[k].omega - lines[k - 1].omega;
    if (g > 0.0) gaps.push_back(g);
  }
  if (gaps.empty()) return 0.0;
  std::nth_element(gaps.begin(), gaps.begin() + static_cast<std::ptrdiff_t>(gaps.size() / 2), gaps.end());
  return gaps[gaps.size() / 2];
}

double weighted_mean_frequency(std::span<const SpectralLine> spectrum) {
  double wsum = 0.0, acc = 0.0;
  for (const auto& line : sorted_by_omega(spectrum)) {
    wsum += line.weight;
    acc += line.weight * line.omega;
  }
  if (!(wsum > 0.0)) throw std::domain_error("weighted_mean_frequency: zero total weight");
  return acc / wsum;
}

LinearFit fit_line(std::span<const double> x, std::span<const double> y) {
  const std::size_t n = x.size();
  if (n < 2 || y.size() != n) throw std::invalid_argument("fit_line: need >= 2 paired points");
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(n);
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(n);
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (!(sxx > 0.0)) throw std::invalid_argument("fit_line: degenerate abscissae");
  LinearFit fit;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  for (std::size_t i = 0; i < n; ++i) {
    const double r = y[i] - (fit.slope * x[i] + fit.intercept);
    fit.sse += r * r;
  }
  fit.r2 = syy > 0.0 ? 1.0 - fit.sse / syy : 1.0;
  return fit;
}

LinearFit fit_through_origin(std::span<const double> x, std::span<const double> y) {
  const std::size_t n = x.size();
  if (n < 1 || y.size() != n) throw std::invalid_argument("fit_through_origin: bad input");
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sxx += x[i] * x[i];
    sxy += x[i] * y[i];
  }
  if (!(sxx > 0.0)) throw std::invalid_argument("fit_through_origin: degenerate abscissae");
  LinearFit fit;
  fit.slope = sxy / sxx;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(n);
  double syy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double r = y[i] - fit.slope * x[i];
    fit.sse += r * r;
    syy += (y[i] - my) * (y[i] - my);
  }
  fit.r2 = syy > 0.0 ? 1.0 - fit.sse / syy : 1.0;
  return fit;
}

RegimeFit regime_fit(const SurvivalCurve& curve, const RegimeFitOptions& options) {
  const auto& ts = curve.times;
  const auto& ps = curve.values;
  const std::size_t n = ts.size();
  if (n != ps.size()) throw std::invalid_argument("regime_fit: malformed curve");

  const auto head_n = static_cast<std::size_t>(std::floor(options.quadratic_fraction * static_cast<double>(n)));
  const auto tail_n = static_cast<std::size_t>(std::floor(options.exponential_fraction * static_cast<double>(n)));
  if (head_n < options.min_points || tail_n < options.min_points)
    throw std::invalid_argument("regime_fit: curve too short for the fit windows");

  double running_min = ps.front();
  for (double p : ps) {
    if (p > running_min + options.monotone_tolerance)
      throw std::invalid_argument("regime_fit: curve is not monotone within tolerance");
    running_min = std::min(running_min, p);
  }

  std::vector<double> y(n), t2(n);
  for (std::size_t i = 0; i < n; ++i) {
    y[i] = -std::log(std::clamp(ps[i], kRateClampFloor, 1.0));
    t2[i] = ts[i] * ts[i];
  }

  RegimeFit out;
  // Head: -ln P against t^2 and against t, both through the origin.
  const std::span<const double> th(ts.data(), head_n), t2h(t2.data(), head_n), yh(y.data(), head_n);
  const LinearFit quad = fit_through_origin(t2h, yh);
  const LinearFit head_lin = fit_through_origin(th, yh);
  out.gaussian_kappa = std::sqrt(std::max(quad.slope, 0.0));
  out.gaussian_r2 = quad.r2;
  out.gaussian_ok = quad.sse <= head_lin.sse;
  out.head_window = {ts.front(), ts[head_n - 1]};

  // Tail: -ln P against t and against t^2, with offsets.
  const std::size_t t0 = n - tail_n;
  const std::span<const double> tt(ts.data() + t0, tail_n), t2t(t2.data() + t0, tail_n),
      yt(y.data() + t0, tail_n);
  const LinearFit lin = fit_line(tt, yt);
  const LinearFit tail_quad = fit_line(t2t, yt);
  out.exp_rate = lin.slope;
  out.exp_offset = lin.intercept;
  out.exp_r2 = lin.r2;
  out.exponential_ok = lin.sse <= tail_quad.sse;
  out.tail_window = {ts[t0], ts.back()};

  // Crossover: first time after the head where the exponential model wins.
  out.crossover_t = ts.back();
  for (std::size_t i = head_n; i < n; ++i) {
    const double rq = std::abs(y[i] - quad.slope * t2[i]);
    const double re = std::abs(y[i] - (lin.slope * ts[i] + lin.intercept));
    if (re < rq) {
      out.crossover_t = ts[i];
      break;
    }
  }
  return out;
}

ZenoReport make_zeno_report(const SurvivalCurve& curve, std::span<const double> taus,
                            std::vector<SpectralLine> spectrum, double omega_a,
                            std::optional<double> tau_star, std::optional<double> sigma,
                            std::size_t broadening_points) {
  ZenoReport rep;
  rep.omega_a = omega_a;
  rep.spectrum = std::move(spectrum);
  rep.tau_star = tau_star;
  rep.smoothing_sigma = sigma ? *sigma : typical_line_spacing(rep.spectrum);
  ClampCounter clamps;
  for (double tau : taus) {
    rep.tau.push_back(tau);
    rep.r_sim.push_back(effective_rate(curve, tau, &clamps));
    rep.r_model.push_back(overlap_rate(rep.spectrum, tau, omega_a));
    rep.r_model_smoothed.push_back(rep.smoothing_sigma > 0.0
                                       ? overlap_rate_smoothed(rep.spectrum, tau, omega_a,
                                                               rep.smoothing_sigma)
                                       : rep.r_model.back());
  }
  rep.clamp_count = clamps.clamped;
  if (tau_star && broadening_points > 1) {
    const double half = 4.0 * kTwoPi / *tau_star;  // four sinc lobes each side
    for (std::size_t k = 0; k < broadening_points; ++k) {
      const double w = omega_a - half + 2.0 * half * static_cast<double>(k) /
                                            static_cast<double>(broadening_points - 1);
      rep.broadening_samples.emplace_back(w, broadening(w, *tau_star, omega_a));
    }
  }
  return rep;
}

void write_zeno_report(std::ostream& os, const ZenoReport& r,
                       std::span<const std::pair<std::string, std::string>> header) {
  for (const auto& [k, v] : header) os << "# " << k << ": " << v << '\n';
  os << fmt::format("# omega_a_rad_s: {:.17g}\n", r.omega_a);
  os << fmt::format("# smoothing_sigma_rad_s: {:.17g}\n", r.smoothing_sigma);
  os << "# clamp_count: " << r.clamp_count << '\n';
  os << "#SECTION rates\n"
     << "tau_seconds,R_sim,R_model,R_model_smoothed\n";
  for (std::size_t k = 0; k < r.tau.size(); ++k)
    os << fmt::format("{:.17g},{:.17g},{:.17g},{:.17g}\n", r.tau[k], r.r_sim[k], r.r_model[k],
                      r.r_model_smoothed[k]);
  os << "#SECTION spectrum\n"
     << "omega_j,weight_j\n";
  for (const auto& line : r.spectrum) os << fmt::format("{:.17g},{:.17g}\n", line.omega, line.weight);
  if (r.tau_star) {
    os << fmt::format("#SECTION broadening tau_star={:.17g}\n", *r.tau_star)
       << "omega,F\n";
    for (const auto& [w, f] : r.broadening_samples) os << fmt::format("{:.17g},{:.17g}\n", w, f);
  }
}

}  // namespace nvzeno
