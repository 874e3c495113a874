#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "qpd/metrics.hpp"
#include "qpd/reference.hpp"

using namespace qpd;

namespace {

/// P(Z > x) for Z ~ N(0, var) by trapezoid quadrature of the density.
double gaussian_tail(double x, double var) {
  const double s = std::sqrt(var);
  const double hi = x + 40.0 * s;
  const int m = 200000;
  const double h = (hi - x) / m;
  double acc = 0.0;
  for (int i = 0; i <= m; ++i) {
    const double z = x + i * h;
    const double w = (i == 0 || i == m) ? 0.5 : 1.0;
    acc += w * std::exp(-0.5 * z * z / var);
  }
  return acc * h / (s * std::sqrt(2.0 * std::numbers::pi));
}

struct Run {
  Liouvillian lv;
  PulseEnvelope pulse;
  StateTrajectory tr;
};

Run run(const DetectorSpec& spec, double sigma, double extra) {
  auto lv = Liouvillian::build(spec);
  auto pulse = gaussian_pulse(sigma);
  const auto grid = pulse_grid(pulse, default_dt(lv, pulse), extra);
  auto tr = propagate(lv, pulse, FieldState::fock(1), grid).trajectory;
  return {std::move(lv), std::move(pulse), std::move(tr)};
}

}  // namespace

TEST(DarkCounts, MatchesGaussianTailQuadrature) {
  for (double k : {0.5, 2.0})
    for (double tm : {0.5, 3.0})
      for (double di : {0.05, 0.3, 0.8}) {
        const double var = 1.0 / (8.0 * k * tm);
        EXPECT_NEAR(dark_count_rate(k, tm, di) * tm, gaussian_tail(di, var), 1e-9);
      }
}

TEST(DarkCounts, MonotoneAndThermal) {
  EXPECT_GT(dark_count_rate(1.0, 1.0, 0.2), dark_count_rate(2.0, 1.0, 0.2));
  EXPECT_GT(dark_count_rate(1.0, 1.0, 0.2), dark_count_rate(1.0, 1.0, 0.4));
  EXPECT_DOUBLE_EQ(dark_count_rate(1.0, 2.0, 0.0), 0.25);
  EXPECT_NEAR(dark_count_rate(1.0, 2.0, 1e3, 0.1), 0.05, 1e-15);
  AmplifierChannel ch;
  ch.rate = 1.5;
  ch.window = 0.7;
  ch.threshold = 0.4;
  EXPECT_DOUBLE_EQ(dark_count_rate(ch), dark_count_rate(1.5, 0.7, 0.4));
  EXPECT_THROW(dark_count_rate(1.0, 0.0, 0.1), PreconditionError);
  EXPECT_THROW(dark_count_rate(-1.0, 1.0, 0.1), PreconditionError);
}

TEST(DarkCounts, ThresholdRoundTrip) {
  for (double p : {1e-6, 1e-3, 0.1, 0.4}) {
    const double di = threshold_for_dark_probability(1.3, 0.8, p);
    EXPECT_NEAR(dark_count_rate(1.3, 0.8, di) * 0.8, p, 1e-12 + 1e-9 * p);
  }
  EXPECT_THROW(threshold_for_dark_probability(1.0, 1.0, 0.6), PreconditionError);
  EXPECT_THROW(threshold_for_dark_probability(0.0, 1.0, 0.1), PreconditionError);
}

TEST(DarkCounts, AmplificationBoundRoundTrip) {
  // at the bound, noise alone reaches the full signal level χ at rate R
  for (double tm : {0.5, 2.0, 10.0}) {
    const double rate = 1e-3;
    const double a = amplification_bound(rate, tm);
    const double chi = 1.0, k = a * a / (2.0 * chi * chi);
    EXPECT_NEAR(dark_count_rate(k, tm, chi), rate, 1e-12);
  }
  EXPECT_THROW(amplification_bound(1.0, 1.0), PreconditionError);
}

TEST(DarkCounts, CalibrateWindowSolvesItsEquation) {
  for (double a : {0.5, 2.0, 8.0}) {
    const double rate = 0.01 / 15.0;
    const double tm = calibrate_window(a, 0.5, rate);
    const double lhs = 0.5 / tm * std::erfc(std::numbers::sqrt2 * a * 0.5 * std::sqrt(tm));
    EXPECT_NEAR(lhs / rate, 1.0, 1e-9);
    // same as the channel form with χ = 1, k = a²/2
    EXPECT_NEAR(dark_count_rate(a * a / 2.0, tm, 0.5), rate, 1e-9 * rate);
  }
  EXPECT_GT(calibrate_window(0.5, 0.5, 1e-3), calibrate_window(2.0, 0.5, 1e-3));
}

TEST(Timing, SelfComparisonIsZero) {
  const auto pulse = gaussian_pulse(2.0);
  const auto grid = pulse_grid(pulse, 0.01);
  const auto f = ideal_arrival_distribution(pulse, 1, grid);
  std::vector<double> F(grid.size());
  for (std::size_t k = 0; k < grid.size(); ++k) F[k] = pulse.cumulative(grid[k]);
  const auto m = timing_metrics(grid, F, f);
  EXPECT_NEAR(m.mu, 0.0, 1e-6 * m.sigma0);
  EXPECT_LT(m.sigma_sys, 1e-2 * m.sigma0);
  EXPECT_NEAR(m.sigma, m.sigma0, 1e-5 * m.sigma0);
}

TEST(Timing, ExGaussianShiftAndSpread) {
  // P' = r(F − P): arrivals delayed by an exponential with rate r
  const auto pulse = gaussian_pulse(1.0);
  const double r = 2.0, dt = 1e-3;
  const auto grid = uniform_grid(pulse.support().first, pulse.support().second + 20.0, dt);
  const auto f = ideal_arrival_distribution(pulse, 1, grid);
  std::vector<double> P(grid.size(), 0.0);
  for (std::size_t k = 1; k < grid.size(); ++k) {
    const double e = std::exp(-r * dt);
    P[k] = e * P[k - 1] + 0.5 * r * dt * (e * pulse.cumulative(grid[k - 1]) + pulse.cumulative(grid[k]));
  }
  const auto m = timing_metrics(grid, P, f);
  EXPECT_NEAR(m.mu, 1.0 / r, 1e-3);
  EXPECT_NEAR(m.sigma_sys, 1.0 / r, 1e-3);
  EXPECT_THROW(timing_metrics(grid, std::vector<double>(grid.size(), 0.0), f), PreconditionError);
  EXPECT_THROW(timing_metrics(grid, std::vector<double>(3, 1.0), f), DimensionError);
}

TEST(Timing, ArrivalDistributionNormalized) {
  const auto pulse = gaussian_pulse(1.5);
  const auto grid = pulse_grid(pulse, 0.005);
  for (int n : {1, 2, 4}) EXPECT_NEAR(trapezoid(grid, ideal_arrival_distribution(pulse, n, grid)), 1.0, 1e-6);
}

TEST(HitProbability, ThreeStateShelfIsStable) {
  const auto r = run(build_three_state(1.0, 1.0, 0.0, 1.0, 0.5), 10.0, 10.0);
  const auto lv_x = vectorize(ComplexMatrix(r.lv.spec().amplifiers[0].projector(3)));
  const auto kern = monitored_kernel(r.lv, lv_x, 2.0);
  EXPECT_NEAR(kern.survival, 1.0, 1e-12);
  EXPECT_NEAR(kern.loss_rate, 0.0, 1e-15);
  const auto pi = hit_probability(r.lv, r.tr, 0, 0.0);
  const auto pc = r.tr.population(2);
  for (std::size_t k = 0; k < pc.size(); ++k) EXPECT_NEAR(pi.values[k], pc[k], 1e-15);
  for (std::size_t k = 1; k < pc.size(); ++k) EXPECT_GE(pi.values[k], pi.values[k - 1] - 1e-12);
  EXPECT_NEAR(pi.final(), reference::three_state_efficiency(1.0, 1.0), 5e-3);
  EXPECT_TRUE(pi.warnings.empty());
}

TEST(HitProbability, ResetCountsCumulativeInflow) {
  const double G = 1.1, delta = 0.5;
  const auto r = run(add_reset(build_three_state(1.0, G, 0.0, 1.0, 0.5), delta, 2, 0), 2.0, 6.0);
  const auto pi = hit_probability(r.lv, r.tr, 0, 0.0);
  const auto inflow = cumulative_trapezoid(r.tr.grid, r.tr.population(1));
  for (std::size_t k = 0; k < inflow.size(); ++k) EXPECT_NEAR(pi.values[k], G * G * inflow[k], 1e-5);
  const auto x = vectorize(ComplexMatrix(r.lv.spec().amplifiers[0].projector(3)));
  for (double tm : {0.5, 2.0}) EXPECT_NEAR(monitored_kernel(r.lv, x, tm).survival, std::exp(-delta * delta * tm), 1e-12);
  // Π(t; t_min) = e^{−δ² t_min} Π(t − t_min; 0)
  const double tmin = 1.0;
  const auto shifted = hit_probability(r.lv, r.tr, 0, tmin);
  for (std::size_t k = 0; k < r.tr.size(); k += 50) {
    const double t = r.tr.grid[k];
    if (t - tmin < r.tr.grid.front()) continue;
    EXPECT_NEAR(shifted.values[k], std::exp(-delta * delta * tmin) * interpolate(r.tr.grid, pi.values, t - tmin), 1e-12);
  }
}

TEST(HitProbability, Preconditions) {
  const auto r = run(build_three_state(1.0, 1.0, 0.0, 1.0, 0.5), 1.0, 1.0);
  EXPECT_THROW(hit_probability(r.lv, r.tr, 0, -1.0), PreconditionError);
  EXPECT_THROW(hit_probability(r.lv, r.tr, 3), PreconditionError);
  EXPECT_THROW(hit_probability(r.lv, r.tr, 0, 1e3), PreconditionError);
  EXPECT_THROW(efficiency(r.lv, r.tr, 2), PreconditionError);
  EXPECT_THROW(efficiency(r.lv, r.tr, 0), PreconditionError);
}

TEST(Efficiency, SingleChannelEqualsHitProbability) {
  const auto r = run(build_three_state(1.0, 1.0, 0.0, 1.0, 0.5), 3.0, 4.0);
  const auto a = efficiency(r.lv, r.tr, 1, 0.5);
  const auto b = hit_probability(r.lv, r.tr, 0, 0.5);
  for (std::size_t k = 0; k < a.values.size(); ++k) EXPECT_DOUBLE_EQ(a.values[k], b.values[k]);
}

TEST(Efficiency, TwoPhotonArrayJointShelf) {
  const auto spec = build_degenerate_array(2, 0.5, std::sqrt(2.0) * 0.5, 0.0, 1.0, 0.0);
  auto lv = Liouvillian::build(spec);
  const auto pulse = gaussian_pulse(80.0);
  const auto tr = propagate(lv, pulse, FieldState::fock(2), pulse_grid(pulse, default_dt(lv, pulse), 20.0)).trajectory;
  const auto p2 = efficiency(lv, tr, 2, 0.0);
  Eigen::Index cc = -1;
  for (std::size_t i = 0; i < spec.labels.size(); ++i)
    if (spec.labels[i] == "CC") cc = static_cast<Eigen::Index>(i);
  ASSERT_GE(cc, 0);
  EXPECT_NEAR(p2.final(), tr.population(cc).back(), 1e-15);
  EXPECT_NEAR(p2.final(), reference::narray_efficiency(2, 2), 2e-2);
}

TEST(Ideality, Architectures) {
  const auto wide = gaussian_pulse(10.0);
  const auto three = ideality_check(Liouvillian::build(build_three_state(1.0, 1.0, 0.0, 1.0, 0.5)), wide);
  EXPECT_TRUE(three.ideal);
  EXPECT_GE(three.persistent_monitored_modes, 1u);
  EXPECT_NEAR(*three.predicted_efficiency, 1.0, 1e-15);

  const auto mism = ideality_check(Liouvillian::build(build_three_state(1.0, 2.0, 0.0, 1.0, 0.5)), wide);
  EXPECT_FALSE(mism.ideal);
  EXPECT_NEAR(*mism.rate_residual, 1.0, 1e-12);

  const auto narrow = ideality_check(Liouvillian::build(build_three_state(1.0, 1.0, 0.0, 1.0, 0.5)), gaussian_pulse(1.0));
  EXPECT_FALSE(narrow.ideal);

  EXPECT_FALSE(ideality_check(Liouvillian::build(build_two_state(1.0, 0.0, 1.0, 0.5)), wide).ideal);

  const auto quad = ideality_check(
      Liouvillian::build(build_quadratic(std::numbers::pi, Eigen::Vector3d(1.0, 0.0, 0.0), 0.0, 1.0, 0.5)), wide);
  EXPECT_TRUE(quad.ideal);
  EXPECT_NEAR(*quad.predicted_efficiency, 1.0, 1e-15);

  const auto arr = ideality_check(Liouvillian::build(build_degenerate_array(4, 0.5, 1.0, 0.0, 1.0, 0.5)), wide);
  EXPECT_TRUE(arr.ideal);
}

TEST(Report, FieldsConsistent) {
  const auto r = run(build_three_state(1.0, 1.0, 0.0, 1.0, 0.5), 5.0, 10.0);
  const auto rep = compute_metrics(r.lv, r.pulse, r.tr, 1);
  EXPECT_DOUBLE_EQ(rep.terminal_efficiency, rep.efficiency.final());
  ASSERT_EQ(rep.dark_rates.size(), 1u);
  EXPECT_DOUBLE_EQ(rep.dark_rates[0], dark_count_rate(r.lv.spec().amplifiers[0]));
  EXPECT_DOUBLE_EQ(rep.total_dark_rate, rep.dark_rates[0]);
  ASSERT_TRUE(rep.timing.has_value());
  EXPECT_GT(rep.timing->mu, 0.0);
  EXPECT_GT(rep.terminal_efficiency, 0.9);
}
