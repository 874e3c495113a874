#include <gtest/gtest.h>

#include <cmath>

#include "qpd/hierarchy.hpp"

using namespace qpd;

namespace {

/// One-photon amplitude a(t) for ȧ = −λa − γE(t), a(−∞) = 0, integrated by
/// an exponential trapezoid rule with `sub` steps per grid interval.
std::vector<double> amplitude_oracle(const PulseEnvelope& p, double gamma, double lambda,
                                     const std::vector<double>& grid, int sub = 20) {
  std::vector<double> out(grid.size(), 0.0);
  double a = 0.0;
  for (std::size_t k = 1; k < grid.size(); ++k) {
    const double h = (grid[k] - grid[k - 1]) / sub;
    for (int j = 0; j < sub; ++j) {
      const double t0 = grid[k - 1] + j * h;
      const double e = std::exp(-lambda * h);
      a = e * a - 0.5 * gamma * h * (e * p.amplitude(t0).real() + p.amplitude(t0 + h).real());
    }
    out[k] = a;
  }
  return out;
}

double max_diff(const std::vector<double>& x, const std::vector<double>& y) {
  double m = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) m = std::max(m, std::abs(x[i] - y[i]));
  return m;
}

std::vector<Eigen::Index> labels_with_c(const DetectorSpec& s) {
  std::vector<Eigen::Index> out;
  for (std::size_t i = 0; i < s.labels.size(); ++i)
    if (s.labels[i].find('C') != std::string::npos) out.push_back(static_cast<Eigen::Index>(i));
  return out;
}

}  // namespace

TEST(Propagate, VacuumLeavesStateUnchanged) {
  const auto spec = build_three_state(1.0, 1.0, 0.0, 1.0, 0.5);
  const auto pulse = gaussian_pulse(1.0);
  const auto lv = Liouvillian::build(spec);
  const auto grid = pulse_grid(pulse, default_dt(lv, pulse), 4.0);
  const auto tr = propagate(lv, pulse, FieldState::vacuum(), grid).trajectory;
  for (std::size_t k = 0; k < tr.size(); ++k) {
    EXPECT_NEAR(tr.populations(static_cast<Eigen::Index>(k), 0), 1.0, 1e-14);
    EXPECT_NEAR(tr.trace[k], 1.0, 1e-14);
  }
}

TEST(Propagate, TwoStateMatchesAmplitudeOracle) {
  const double g = 1.3, sigma = 1.0;
  const auto pulse = gaussian_pulse(sigma);
  const auto lv = Liouvillian::build(build_two_state(g, 0.0, 1.0, 0.0));
  const auto grid = pulse_grid(pulse, default_dt(lv, pulse), 6.0);
  const auto tr = propagate(lv, pulse, FieldState::fock(1), grid).trajectory;
  const auto a = amplitude_oracle(pulse, g, 0.5 * g * g, grid);
  std::vector<double> p1(a.size());
  for (std::size_t k = 0; k < a.size(); ++k) p1[k] = a[k] * a[k];
  EXPECT_LT(max_diff(tr.population(1), p1), 1e-5);
  for (double t : tr.trace) EXPECT_NEAR(t, 1.0, 1e-9);
}

TEST(Propagate, ThreeStateShelfMatchesOracle) {
  const double g2 = 0.7, G2 = 1.4, sigma = 2.0;
  const auto pulse = gaussian_pulse(sigma);
  const auto lv = Liouvillian::build(build_three_state(std::sqrt(g2), std::sqrt(G2), 0.0, 1.0, 0.0));
  const auto grid = pulse_grid(pulse, default_dt(lv, pulse), 8.0);
  const auto tr = propagate(lv, pulse, FieldState::fock(1), grid).trajectory;
  const auto a = amplitude_oracle(pulse, std::sqrt(g2), 0.5 * (g2 + G2), grid);
  std::vector<double> p1(a.size()), pc(a.size(), 0.0);
  for (std::size_t k = 0; k < a.size(); ++k) p1[k] = a[k] * a[k];
  const auto cum = cumulative_trapezoid(grid, p1);
  for (std::size_t k = 0; k < a.size(); ++k) pc[k] = G2 * cum[k];
  EXPECT_LT(max_diff(tr.population(1), p1), 1e-5);
  EXPECT_LT(max_diff(tr.population(2), pc), 1e-5);
}

TEST(Propagate, SymmetricAndFullAgree) {
  const auto spec = build_degenerate_array(2, 0.7, 1.0, 0.0, 1.0, 0.3);
  const auto pulse = gaussian_pulse(2.0);
  const auto lv = Liouvillian::build(spec);
  const auto grid = pulse_grid(pulse, default_dt(lv, pulse), 2.0);
  const auto field = FieldState::superposition(ComplexVector::Constant(3, 1.0));
  PropagateOptions full;
  full.exploit_symmetry = false;
  const auto a = propagate(lv, pulse, field, grid).trajectory;
  const auto b = propagate(lv, pulse, field, grid, full).trajectory;
  EXPECT_LT((a.populations - b.populations).cwiseAbs().maxCoeff(), 1e-13);
  EXPECT_LT((a.states.back() - b.states.back()).cwiseAbs().maxCoeff(), 1e-13);
}

TEST(Propagate, LinearInFieldCoefficients) {
  const auto spec = build_three_state(1.0, 1.0, 0.0, 1.0, 0.5);
  const auto pulse = gaussian_pulse(1.5);
  const auto lv = Liouvillian::build(spec);
  const auto grid = pulse_grid(pulse, default_dt(lv, pulse), 2.0);
  FieldState mix;
  mix.coeffs = ComplexMatrix::Zero(3, 3);
  mix.coeffs(1, 1) = 0.3;
  mix.coeffs(2, 2) = 0.7;
  const auto m = propagate(lv, pulse, mix, grid).trajectory;
  const auto f1 = propagate(lv, pulse, FieldState::fock(1, 2), grid).trajectory;
  const auto f2 = propagate(lv, pulse, FieldState::fock(2), grid).trajectory;
  EXPECT_LT((m.populations - (0.3 * f1.populations + 0.7 * f2.populations)).cwiseAbs().maxCoeff(), 1e-13);
}

TEST(Propagate, AuxiliarySymmetry) {
  const auto spec = build_two_state(1.0, 0.2, 1.0, 0.3);
  const auto pulse = gaussian_pulse(1.0);
  const auto lv = Liouvillian::build(spec);
  const auto grid = pulse_grid(pulse, default_dt(lv, pulse), 1.0);
  PropagateOptions opt;
  opt.exploit_symmetry = false;
  opt.store_levels = true;
  const auto res = propagate(lv, pulse, FieldState::fock(1), grid, opt);
  const auto& h = res.hierarchy;
  ASSERT_TRUE(h.has(1, 0) && h.has(0, 1));
  for (std::size_t k = 0; k < h.stored_times.size(); k += 17) {
    const ComplexMatrix r10 = devectorize(h.level(1, 0, k));
    const ComplexMatrix r01 = devectorize(h.level(0, 1, k));
    EXPECT_LT((r10 - r01.adjoint()).cwiseAbs().maxCoeff(), 1e-13);
  }
  EXPECT_THROW(h.level(2, 0, 0), PreconditionError);
}

TEST(Propagate, StepHalvingConverges) {
  const auto spec = build_three_state(1.0, 1.2, 0.3, 1.0, 0.5);
  const auto pulse = gaussian_pulse(1.0);
  const auto lv = Liouvillian::build(spec);
  const double dt = default_dt(lv, pulse);
  const auto coarse = propagate(lv, pulse, FieldState::fock(1), pulse_grid(pulse, dt, 4.0)).trajectory;
  const auto fine = propagate(lv, pulse, FieldState::fock(1), pulse_grid(pulse, dt / 2, 4.0)).trajectory;
  for (std::size_t k = 0; k < coarse.size(); ++k)
    for (Eigen::Index i = 0; i < 3; ++i)
      EXPECT_NEAR(coarse.populations(static_cast<Eigen::Index>(k), i),
                  fine.populations(static_cast<Eigen::Index>(2 * k), i), 1e-6);
}

TEST(Propagate, ArrayMatchesThreeStateWithEnhancedCoupling) {
  const auto pulse = gaussian_pulse(3.0);
  for (int n : {2, 3}) {
    const double g = 0.6, G = 1.0;
    const auto arr = build_degenerate_array(n, g, G, 0.0, 1.0, 0.3);
    const auto three = build_three_state(std::sqrt(n) * g, G, 0.0, 1.0, 0.3);
    const auto la = Liouvillian::build(arr), l3 = Liouvillian::build(three);
    const double dt = std::min(default_dt(la, pulse), default_dt(l3, pulse));
    const auto grid = pulse_grid(pulse, dt, 6.0);
    const auto pa = propagate(la, pulse, FieldState::fock(1), grid).trajectory.projector_population(labels_with_c(arr));
    const auto p3 = propagate(l3, pulse, FieldState::fock(1), grid).trajectory.population(2);
    EXPECT_LT(max_diff(pa, p3), 1e-6) << "n=" << n;
  }
}

TEST(Propagate, PreconditionsRejected) {
  const auto spec = build_three_state(1.0, 1.0, 0.0, 1.0, 0.5);
  const auto pulse = gaussian_pulse(1.0);
  const auto lv = Liouvillian::build(spec);
  const double dt = default_dt(lv, pulse);
  EXPECT_THROW(propagate(lv, pulse, FieldState::fock(7), pulse_grid(pulse, dt)), PreconditionError);
  EXPECT_THROW(propagate(lv, pulse, FieldState::fock(1), uniform_grid(-2.0, 4.0, dt)), PreconditionError);
  EXPECT_THROW(propagate(lv, pulse, FieldState::fock(1), pulse_grid(pulse, 2.0 / lv.norm_bound())), PreconditionError);
  FieldState bad;
  bad.coeffs = ComplexMatrix::Identity(2, 2);
  EXPECT_THROW(propagate(lv, pulse, bad, pulse_grid(pulse, dt)), PreconditionError);
  PropagateOptions opt;
  opt.allow_truncated_pulse = true;
  EXPECT_NO_THROW(propagate(lv, pulse, FieldState::fock(1), uniform_grid(-2.0, 4.0, dt), opt));
}

TEST(Expectation, IdentityGivesTraceAndObservableMatchesRecorded) {
  const auto spec = build_three_state(1.0, 1.0, 0.0, 2.0, 0.5);
  const auto pulse = gaussian_pulse(1.0);
  const auto lv = Liouvillian::build(spec);
  const auto tr = propagate(lv, pulse, FieldState::fock(1), pulse_grid(pulse, default_dt(lv, pulse), 2.0)).trajectory;
  const auto one = expectation(lv.identity_vector(), tr);
  for (std::size_t k = 0; k < tr.size(); ++k) EXPECT_NEAR(one[k], tr.trace[k], 1e-14);
  const auto x = expectation(lv.observable_vector(0), tr);
  for (std::size_t k = 0; k < tr.size(); ++k) EXPECT_NEAR(x[k], tr.expectations[0][k], 1e-13);
  EXPECT_THROW(expectation(ComplexVector::Zero(4), tr), DimensionError);
}

TEST(Factorization, TwoPhotonArrayWidePulse) {
  const int n = 2;
  const double g = 0.5, G = std::sqrt(n) * g;  // Γ² = nγ²
  const auto spec = build_degenerate_array(n, g, G, 0.0, 1.0, 0.0);
  const double sigma = 20.0 / (g * g);         // γ²σ = 20
  const auto pulse = gaussian_pulse(sigma);
  const auto lv = Liouvillian::build(spec);
  const auto grid = pulse_grid(pulse, default_dt(lv, pulse), 20.0);
  const auto r = two_photon_factorization_check(spec, pulse, grid);
  EXPECT_NEAR(r.single_photon_efficiency, 1.0, 1e-15);
  EXPECT_NEAR(r.second_photon_efficiency, 8.0 / 9.0, 1e-15);
  EXPECT_LT(r.max_deviation, 5e-2);
  EXPECT_NEAR(r.terminal_two_photon, 8.0 / 9.0, 5e-2);
  EXPECT_THROW(two_photon_factorization_check(build_three_state(1.0, 1.0, 0.0, 1.0, 0.0), pulse, grid),
               PreconditionError);
}
