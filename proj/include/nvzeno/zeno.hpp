#pragma once

#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "nvzeno/bathgen.hpp"
#include "nvzeno/dynamics.hpp"

namespace nvzeno {

/// Counts probabilities pulled back into (floor, 1] before use.
struct ClampCounter {
  std::size_t clamped = 0;
};

/// Lower clamp applied inside the logarithm of the effective rate.
inline constexpr double kRateClampFloor = 1e-15;

/// P(tau)^N after N ideal instantaneous projective measurements.
/// P(tau) > 1 (CCE overshoot) is clamped to 1 and counted; P(tau) <= 0 throws.
double repeated_measurement_survival(double p_tau, long n_measurements,
                                     ClampCounter* clamps = nullptr);

/// Linear interpolation of the curve at t. Throws std::out_of_range outside the grid.
double interpolate(const SurvivalCurve& curve, double t);

/// -ln(clamp(P(tau))) / tau with P linearly interpolated.
double effective_rate(const SurvivalCurve& curve, double tau, ClampCounter* clamps = nullptr);

/// F(omega, tau) = (tau / 2 pi) sinc^2((omega - omega_a) tau / 2).
double broadening(double omega, double tau, double omega_a);

/// Composite Simpson integral of F over omega_a +- half_width; should be ~1.
double broadening_integral(double tau, double omega_a, double half_width,
                           std::size_t intervals = 200'000);

/// 2 pi sum_j F(omega_j, tau) w_j, summed in ascending omega_j.
double overlap_rate(std::span<const SpectralLine> spectrum, double tau, double omega_a);

/// G convolved with a unit-area Gaussian of width sigma (rad/s), at omega.
double smoothed_density(std::span<const SpectralLine> spectrum, double omega, double sigma);

/// 2 pi int F(omega, tau) G_sigma(omega) d omega by quadrature.
double overlap_rate_smoothed(std::span<const SpectralLine> spectrum, double tau, double omega_a,
                             double sigma);

/// Median gap between sorted line positions; the default smoothing width.
double typical_line_spacing(std::span<const SpectralLine> spectrum);

/// Weighted mean line position, sum w_j omega_j / sum w_j.
double weighted_mean_frequency(std::span<const SpectralLine> spectrum);

struct LinearFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r2 = 0.0;
  double sse = 0.0;
};

/// Ordinary least squares y = slope x + intercept.
LinearFit fit_line(std::span<const double> x, std::span<const double> y);
/// Least squares y = slope x.
LinearFit fit_through_origin(std::span<const double> x, std::span<const double> y);

struct RegimeFitOptions {
  double quadratic_fraction = 0.1;    // leading share of the curve
  double exponential_fraction = 0.3;  // trailing share of the curve
  double monotone_tolerance = 0.05;   // allowed rise above the running minimum
  std::size_t min_points = 5;
};

struct RegimeFit {
  double gaussian_kappa = 0.0;  // -ln P ~ (kappa t)^2 on the head
  double exp_rate = 0.0;        // -ln P ~ rate t + offset on the tail
  double exp_offset = 0.0;
  double crossover_t = 0.0;
  double gaussian_r2 = 0.0;
  double exp_r2 = 0.0;
  bool gaussian_ok = false;     // head is better described by t^2 than t
  bool exponential_ok = false;  // tail is better described by t than t^2
  std::pair<double, double> head_window{};
  std::pair<double, double> tail_window{};
};

/// Throws std::invalid_argument for short or strongly non-monotone curves.
RegimeFit regime_fit(const SurvivalCurve& curve, const RegimeFitOptions& options = {});

struct ZenoReport {
  std::vector<double> tau;
  std::vector<double> r_sim;
  std::vector<double> r_model;
  std::vector<double> r_model_smoothed;
  double omega_a = 0.0;
  double smoothing_sigma = 0.0;
  std::vector<SpectralLine> spectrum;
  std::optional<double> tau_star{};
  std::vector<std::pair<double, double>> broadening_samples;  // (omega, F(omega, tau*))
  std::size_t clamp_count = 0;
};

/// R_sim from `curve` (which must cover every tau) and R_model from the spectrum.
ZenoReport make_zeno_report(const SurvivalCurve& curve, std::span<const double> taus,
                            std::vector<SpectralLine> spectrum, double omega_a,
                            std::optional<double> tau_star = std::nullopt,
                            std::optional<double> sigma = std::nullopt,
                            std::size_t broadening_points = 401);

/// `#SECTION rates`, `#SECTION spectrum`, `#SECTION broadening` blocks.
void write_zeno_report(std::ostream& os, const ZenoReport& report,
                       std::span<const std::pair<std::string, std::string>> header = {});

}  // namespace nvzeno
