#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <sstream>
#include <vector>

#include "nvzeno/zeno.hpp"

using namespace nvzeno;

namespace {

constexpr double kPi = std::numbers::pi;

SurvivalCurve curve_from(double t_max, std::size_t n, double (*p)(double)) {
  SurvivalCurve c;
  c.times = uniform_grid(t_max, n);
  for (double t : c.times) c.values.push_back(p(t));
  return c;
}

}  // namespace

TEST_SUITE("zeno") {

TEST_CASE("repeated measurements") {
  CHECK(repeated_measurement_survival(0.99, 10) == doctest::Approx(0.9043820750088044).epsilon(1e-15));
  CHECK(repeated_measurement_survival(0.3, 0) == 1.0);
  CHECK(repeated_measurement_survival(1.0, 1000) == 1.0);
  ClampCounter clamps;
  CHECK(repeated_measurement_survival(1.0 + 1e-9, 5, &clamps) == 1.0);
  CHECK(clamps.clamped == 1);
  CHECK_THROWS_AS(repeated_measurement_survival(0.0, 2), std::domain_error);
  CHECK_THROWS_AS(repeated_measurement_survival(0.5, -1), std::domain_error);
}

TEST_CASE("effective rate") {
  SurvivalCurve c;
  c.times = {0.0, 1e-6, 2e-6};
  c.values = {1.0, std::exp(-0.01), 1.0};
  CHECK(effective_rate(c, 1e-6) == doctest::Approx(1e4).epsilon(1e-12));
  CHECK(effective_rate(c, 2e-6) == 0.0);
  CHECK_THROWS_AS(effective_rate(c, 0.0), std::domain_error);
  CHECK_THROWS_AS(effective_rate(c, 3e-6), std::out_of_range);

  // Clamped at the floor instead of taking log(0).
  c.values[1] = -0.2;
  ClampCounter clamps;
  CHECK(effective_rate(c, 1e-6, &clamps) == doctest::Approx(-std::log(kRateClampFloor) / 1e-6));
  CHECK(clamps.clamped == 1);

  // P = 1 - (kappa tau)^2 gives R ~ kappa^2 tau.
  const double kappa = 2e3;
  SurvivalCurve q;
  q.times = uniform_grid(1e-5, 101);
  for (double t : q.times) q.values.push_back(1 - kappa * kappa * t * t);
  for (double tau : {1e-6, 3e-6, 5e-6})
    CHECK(effective_rate(q, tau) == doctest::Approx(kappa * kappa * tau).epsilon(1e-3));
}

TEST_CASE("interpolation is linear and exact on nodes") {
  SurvivalCurve c;
  c.times = {0.0, 1.0, 3.0};
  c.values = {1.0, 0.5, 0.1};
  CHECK(interpolate(c, 1.0) == 0.5);
  CHECK(interpolate(c, 2.0) == doctest::Approx(0.3));
  CHECK_THROWS_AS(interpolate(c, -0.1), std::out_of_range);
}

TEST_CASE("broadening: peak, first null, unit area") {
  const double wa = -6.9e6;
  for (double tau : {1e-6, 12e-6, 1e-4}) {
    CHECK(broadening(wa, tau, wa) == doctest::Approx(tau / (2 * kPi)));
    CHECK(std::abs(broadening(wa + 2 * kPi / tau, tau, wa)) <= 1e-15 * tau);
    CHECK(broadening_integral(tau, wa, 40 * kPi / tau) == doctest::Approx(1.0).epsilon(1e-2));
  }
}

TEST_CASE("overlap rate: empty, single resonant line, permutation") {
  const double wa = -6.9e6;
  CHECK(overlap_rate({}, 1e-5, wa) == 0.0);
  const std::vector<SpectralLine> one{{wa, 2.5e7}};
  CHECK(overlap_rate(one, 12e-6, wa) == doctest::Approx(2.5e7 * 12e-6).epsilon(1e-14));

  std::vector<SpectralLine> lines;
  std::mt19937 gen(5);
  std::uniform_real_distribution<double> u(-1e5, 1e5);
  for (int i = 0; i < 50; ++i) lines.push_back({wa + u(gen), 1e6 + 1e4 * i});
  const double r = overlap_rate(lines, 12e-6, wa);
  CHECK(r >= 0.0);
  std::shuffle(lines.begin(), lines.end(), gen);
  CHECK(overlap_rate(lines, 12e-6, wa) == r);
}

TEST_CASE("smoothed rate approaches 2 pi G(omega_a) for long tau") {
  const double wa = -6.9e6, w = 1e6, sigma = 2e3;
  const std::vector<SpectralLine> one{{wa, w}};
  const double g = w / (std::sqrt(2 * kPi) * sigma);
  CHECK(smoothed_density(one, wa, sigma) == doctest::Approx(g).epsilon(1e-12));
  CHECK(overlap_rate_smoothed(one, 1e-1, wa, sigma) == doctest::Approx(2 * kPi * g).epsilon(1e-2));
  // Short tau: F is flat across G, so both forms give w tau.
  CHECK(overlap_rate_smoothed(one, 1e-6, wa, sigma) == doctest::Approx(w * 1e-6).epsilon(1e-2));
}

TEST_CASE("line statistics") {
  const std::vector<SpectralLine> lines{{3.0, 1.0}, {0.0, 1.0}, {1.0, 2.0}, {7.0, 0.0}};
  CHECK(typical_line_spacing(lines) == doctest::Approx(2.0));  // gaps 1, 2, 4
  CHECK(weighted_mean_frequency(lines) == doctest::Approx(5.0 / 4.0));
}

TEST_CASE("least-squares fits") {
  const std::vector<double> x{1, 2, 3, 4};
  const std::vector<double> y{3, 5, 7, 9};
  const auto f = fit_line(x, y);
  CHECK(f.slope == doctest::Approx(2.0));
  CHECK(f.intercept == doctest::Approx(1.0));
  CHECK(f.r2 == doctest::Approx(1.0));
  const auto g = fit_through_origin(x, std::vector<double>{2, 4, 6, 8});
  CHECK(g.slope == doctest::Approx(2.0));
  CHECK(g.sse == doctest::Approx(0.0));
}

TEST_CASE("regime fit on synthetic curves") {
  const auto gauss = curve_from(1e-3, 400, [](double t) { return std::exp(-std::pow(3e3 * t, 2)); });
  const auto gf = regime_fit(gauss);
  CHECK(gf.gaussian_kappa == doctest::Approx(3e3).epsilon(1e-2));
  CHECK(gf.gaussian_ok);
  CHECK_FALSE(gf.exponential_ok);

  const auto expo = curve_from(1e-3, 400, [](double t) { return std::exp(-5e3 * t); });
  const auto ef = regime_fit(expo);
  CHECK(ef.exp_rate == doctest::Approx(5e3).epsilon(1e-2));
  CHECK(ef.exponential_ok);

  const auto wiggle = curve_from(1e-3, 400, [](double t) { return 0.5 + 0.5 * std::cos(2e4 * t); });
  CHECK_THROWS_AS(regime_fit(wiggle), std::invalid_argument);
  const auto short_curve = curve_from(1e-3, 10, [](double t) { return 1.0 - t; });
  CHECK_THROWS_AS(regime_fit(short_curve), std::invalid_argument);
}

TEST_CASE("Zeno report contents and serialisation") {
  const double wa = -6.9e6;
  const auto curve = curve_from(2e-4, 201, [](double t) { return std::exp(-std::pow(1e4 * t, 2)); });
  const std::vector<SpectralLine> lines{{wa + 1e3, 1e8}, {wa - 2e3, 5e7}, {wa + 4e4, 1e6}};
  const std::vector<double> taus{1e-6, 2e-6, 12e-6};
  const auto rep = make_zeno_report(curve, taus, lines, wa, 12e-6);
  REQUIRE(rep.r_sim.size() == 3);
  for (std::size_t k = 0; k < 3; ++k) {
    CHECK(rep.r_sim[k] >= 0.0);
    CHECK(rep.r_model[k] >= 0.0);
  }
  CHECK(rep.r_sim[0] < rep.r_sim[1]);
  CHECK(rep.broadening_samples.size() == 401);
  std::ostringstream os;
  write_zeno_report(os, rep);
  const auto text = os.str();
  CHECK(text.find("#SECTION rates") != std::string::npos);
  CHECK(text.find("#SECTION spectrum") != std::string::npos);
  CHECK(text.find("#SECTION broadening tau_star=1.2e-05") != std::string::npos);
}

}  // TEST_SUITE
