#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "qpd/liouvillian.hpp"

using namespace qpd;

namespace {

double energy(const PulseEnvelope& p, double dt = 1e-3) {
  const auto [a, b] = p.support();
  const auto g = uniform_grid(a, b, dt);
  std::vector<double> y(g.size());
  for (std::size_t k = 0; k < g.size(); ++k) y[k] = p.intensity(g[k]);
  return trapezoid(g, y);
}

ComplexMatrix dense(const SparseMatrix& m) { return ComplexMatrix(m); }

}  // namespace

TEST(Pulse, GaussianNormalizationAndSupport) {
  for (double sigma : {0.3, 1.0, 7.0}) {
    const auto p = gaussian_pulse(sigma, 2.0, 5.0);
    EXPECT_NEAR(energy(p, sigma / 500.0), 1.0, 1e-6);
    const auto [a, b] = p.support();
    EXPECT_DOUBLE_EQ(a, 2.0 - 8.0 * sigma);
    EXPECT_DOUBLE_EQ(b, 2.0 + 8.0 * sigma);
    EXPECT_LT(p.intensity(a), 1e-8);
    EXPECT_LT(p.intensity(b + 1e-9), 1e-8);
    EXPECT_LT(1.0 - p.cumulative(b) + p.cumulative(a), 1e-8);
    EXPECT_DOUBLE_EQ(p.carrier(), 5.0);
    EXPECT_NEAR(p.cumulative(2.0), 0.5, 1e-15);
    EXPECT_NEAR(p.cumulative(b), 1.0, 1e-14);
  }
  EXPECT_THROW(gaussian_pulse(0.0), PreconditionError);
  EXPECT_THROW(gaussian_pulse(-1.0), PreconditionError);
}

TEST(Pulse, GaussianWidthIsIntensityDeviation) {
  const double sigma = 1.0;
  const auto p = gaussian_pulse(sigma);
  const auto g = uniform_grid(-8.0, 8.0, 1e-3);
  std::vector<double> w(g.size()), w2(g.size());
  for (std::size_t k = 0; k < g.size(); ++k) {
    w[k] = p.intensity(g[k]);
    w2[k] = g[k] * g[k] * w[k];
  }
  EXPECT_NEAR(std::sqrt(trapezoid(g, w2)), sigma, 1e-6);
}

TEST(Pulse, CumulativeMatchesQuadrature) {
  for (const auto& p : {gaussian_pulse(1.3, -0.5), PulseEnvelope::square(2.0, 1.0)}) {
    const auto [a, b] = p.support();
    const auto g = uniform_grid(a, b, 1e-4);
    std::vector<double> y(g.size());
    for (std::size_t k = 0; k < g.size(); ++k) y[k] = p.intensity(g[k]);
    const auto c = cumulative_trapezoid(g, y);
    for (std::size_t k = 0; k < g.size(); k += 997) EXPECT_NEAR(p.cumulative(g[k]), c[k], 2e-4);
  }
}

TEST(Pulse, SquareAndSampled) {
  const auto sq = PulseEnvelope::square(4.0, 1.0);
  EXPECT_NEAR(energy(sq, 1e-4), 1.0, 1e-3);
  EXPECT_EQ(sq.amplitude(3.5), 0.0);
  EXPECT_DOUBLE_EQ(sq.cumulative(1.0), 0.5);

  // tabulated gaussian with an arbitrary scale: renormalized on load
  std::vector<double> t;
  std::vector<Complex> v;
  for (double x = -6.0; x <= 6.0 + 1e-12; x += 0.05) {
    t.push_back(x);
    v.emplace_back(3.0 * std::exp(-0.25 * x * x), 0.0);
  }
  const auto s = PulseEnvelope::sampled(t, v);
  EXPECT_NEAR(energy(s, 1e-3), 1.0, 1e-5);
  EXPECT_NEAR(s.cumulative(6.0), 1.0, 1e-5);
  EXPECT_NEAR(std::abs(s.amplitude(0.3)), std::abs(gaussian_pulse(1.0).amplitude(0.3)), 1e-4);
  EXPECT_NEAR(s.width(), 1.0, 1e-3);
  EXPECT_THROW(PulseEnvelope::sampled({0.0, 1.0}, {1.0, 1.0}), PreconditionError);
  EXPECT_THROW(PulseEnvelope::sampled({0.0, 1.0, 1.0, 2.0}, {1.0, 1.0, 1.0, 1.0}), PreconditionError);
}

TEST(Field, FockAndSuperposition) {
  for (int n = 0; n <= 4; ++n) {
    const auto f = FieldState::fock(n);
    EXPECT_TRUE(f.valid());
    EXPECT_NEAR(std::abs(f.coeffs.trace()), 1.0, 1e-15);
    EXPECT_NEAR(f.purity(), 1.0, 1e-15);
    EXPECT_EQ(f.coeffs(n, n), Complex(1.0));
    EXPECT_EQ(f.coeffs.cwiseAbs().sum(), 1.0);
  }
  EXPECT_EQ(FieldState::fock(1, 3).n_max(), 3);
  EXPECT_THROW(FieldState::fock(-1), PreconditionError);
  ComplexVector a(2);
  a << 1.0, Complex(0.0, 1.0);
  const auto s = FieldState::superposition(a);
  EXPECT_TRUE(s.valid());
  EXPECT_NEAR(s.purity(), 1.0, 1e-14);
  EXPECT_NEAR(s.coeffs(0, 1).imag(), -0.5, 1e-15);
  FieldState mixed{ComplexMatrix::Identity(3, 3) / 3.0};
  EXPECT_TRUE(mixed.valid());
  EXPECT_NEAR(mixed.purity(), 1.0 / 3.0, 1e-15);
  FieldState bad{ComplexMatrix::Identity(2, 2)};
  EXPECT_FALSE(bad.valid());
  bad.coeffs(0, 0) = 1.5;
  bad.coeffs(1, 1) = -0.5;
  EXPECT_FALSE(bad.valid());
}

TEST(Amplifier, ObservableProjectorAndDwell) {
  AmplifierChannel a;
  a.monitored = {1, 3};
  a.weights = {2.0, 0.5};
  a.rate = 1.0;
  a.window = 2.0;
  a.threshold = 1.0;
  const ComplexMatrix x = dense(a.observable(4));
  EXPECT_TRUE(is_hermitian(x, 0.0));
  EXPECT_TRUE(is_diagonal(x, 0.0));
  EXPECT_EQ(x(1, 1), Complex(2.0));
  const ComplexMatrix p = dense(a.projector(4));
  EXPECT_EQ(p * p, p);
  EXPECT_DOUBLE_EQ(a.t_min(), 1.0);  // I_hit·t_m/χ with χ = 2
  EXPECT_TRUE(a.dwell_consistent());
  a.min_dwell = 3.0;
  EXPECT_DOUBLE_EQ(a.t_min(), 3.0);
  EXPECT_FALSE(a.dwell_consistent());
}

TEST(Builders, TwoStateMatrices) {
  const double g = 1.0, w = 0.3, chi = 2.0, k = 0.5;
  const auto s = build_two_state(g, w, chi, k);
  EXPECT_TRUE(s.structural_problems().empty());
  ComplexMatrix L(2, 2), H(2, 2), X(2, 2);
  L << 0, g, 0, 0;
  H << 0, 0, 0, w;
  X << 0, 0, 0, chi;
  EXPECT_EQ(dense(s.L), L);
  EXPECT_EQ(dense(s.H), H);
  EXPECT_EQ(dense(s.amplifiers[0].observable(2)), X);
  EXPECT_TRUE(s.scattering_is_identity());
  EXPECT_TRUE(validate(s).ok());
  EXPECT_TRUE(validate(s).stationary);
  EXPECT_THROW(build_two_state(-1.0, 0.0, 1.0, 1.0), PreconditionError);
  EXPECT_THROW(build_two_state(1.0, 0.0, 1.0, -1.0), PreconditionError);
}

TEST(Builders, ThreeStateMatrices) {
  const double g = 0.8, G = 1.3, w = 0.2, chi = 1.0, k = 2.0;
  const auto s = build_three_state(g, G, w, chi, k);
  EXPECT_TRUE(s.structural_problems().empty());
  ComplexMatrix L = ComplexMatrix::Zero(3, 3), Y = ComplexMatrix::Zero(3, 3), X = ComplexMatrix::Zero(3, 3);
  L(0, 1) = g;
  Y(2, 1) = G;
  X(2, 2) = chi;
  EXPECT_EQ(dense(s.L), L);
  ASSERT_EQ(s.baths.size(), 1u);
  EXPECT_EQ(dense(s.baths[0]), Y);
  EXPECT_EQ(dense(s.amplifiers[0].observable(3)), X);
  EXPECT_DOUBLE_EQ(s.parameters.at("gamma2"), g * g);
  EXPECT_DOUBLE_EQ(s.parameters.at("Gamma2"), G * G);
  EXPECT_TRUE(validate(s).stationary);
}

TEST(Builders, ModifiersAppendBaths) {
  const auto base = build_three_state(1.0, 1.0, 0.0, 1.0, 0.0);
  const auto deph = add_dephasing(base, 0.5, 1);
  ASSERT_EQ(deph.baths.size(), 2u);
  EXPECT_EQ(dense(deph.baths[1])(1, 1), Complex(0.5));
  EXPECT_DOUBLE_EQ(deph.parameters.at("kappa2"), 0.25);
  const auto reset = add_reset(base, 0.3, 2, 0);
  EXPECT_EQ(dense(reset.baths[1])(0, 2), Complex(0.3));
  EXPECT_THROW(add_dephasing(base, 1.0, 3), PreconditionError);
  EXPECT_THROW(add_reset(base, 1.0, 0, 5), PreconditionError);
  EXPECT_THROW(add_reset(base, -1.0, 0, 1), PreconditionError);

  // κ = 0 and δ = 0 leave the generator unchanged
  const auto a0 = Liouvillian::build(base).A();
  EXPECT_LT((Liouvillian::build(add_dephasing(base, 0.0, 1)).A() - a0).cwiseAbs().maxCoeff(), 1e-15);
  EXPECT_LT((Liouvillian::build(add_reset(base, 0.0, 2, 0)).A() - a0).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(Builders, QuadraticScattering) {
  const auto id = build_quadratic(0.0, Eigen::Vector3d(1, 0, 0), 0.0, 1.0, 0.0);
  EXPECT_TRUE(id.scattering_is_identity(1e-15));
  for (double th : {0.4, std::numbers::pi / 2, std::numbers::pi}) {
    const Eigen::Vector3d a = Eigen::Vector3d(0.3, -0.5, 0.8).normalized();
    const auto s = build_quadratic(th, a, 0.0, 1.0, 0.5);
    EXPECT_TRUE(s.structural_problems().empty());
    const ComplexMatrix S = dense(s.S);
    EXPECT_TRUE(is_unitary(S, 1e-12));
    // |⟨1|S|0⟩|² = sin²(θ/2)(1 − a_z²)
    EXPECT_NEAR(std::norm(S(1, 0)), std::pow(std::sin(th / 2), 2) * (1.0 - a.z() * a.z()), 1e-14);
  }
  const auto z = build_quadratic(1.0, Eigen::Vector3d(0, 0, 1), 0.0, 1.0, 0.0);
  EXPECT_TRUE(is_diagonal(dense(z.S), 0.0));
  EXPECT_THROW(build_quadratic(1.0, Eigen::Vector3d(1, 1, 0), 0.0, 1.0, 0.0), PreconditionError);
}

TEST(Builders, ArrayStructure) {
  const auto one = build_degenerate_array(1, 0.7, 1.1, 0.2, 1.0, 0.3);
  const auto three = build_three_state(0.7, 1.1, 0.2, 1.0, 0.3);
  EXPECT_EQ(one.dim, 3);
  EXPECT_LT((Liouvillian::build(one).A() - Liouvillian::build(three).A()).cwiseAbs().maxCoeff(), 1e-15);

  const auto full = build_degenerate_array(3, 1.0, 1.0, 0.0, 1.0, 0.0);
  EXPECT_EQ(full.dim, 27);
  EXPECT_EQ(full.amplifiers.size(), 3u);
  const auto single = build_degenerate_array(3, 1.0, 1.0, 0.0, 1.0, 0.0, ArrayAmplification::per_element_individual, 1);
  EXPECT_EQ(single.dim, 1 + 2 * 3);
  const auto combined = build_degenerate_array(2, 1.0, 1.0, 0.0, 1.5, 0.0, ArrayAmplification::single_combined);
  ASSERT_EQ(combined.amplifiers.size(), 1u);
  // weight counts elements in C
  const ComplexMatrix x = dense(combined.amplifiers[0].observable(combined.dim));
  for (std::size_t i = 0; i < combined.labels.size(); ++i) {
    const auto c = std::count(combined.labels[i].begin(), combined.labels[i].end(), 'C');
    EXPECT_DOUBLE_EQ(x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i)).real(), 1.5 * c);
  }
  EXPECT_TRUE(build_degenerate_array(2, 1.0, 1.0, 0.0, 1.0, 0.0, ArrayAmplification::per_element_summed).combine_channels);
  for (const auto& s : {full, single, combined}) EXPECT_TRUE(s.structural_problems().empty());
  EXPECT_THROW(build_degenerate_array(0, 1.0, 1.0, 0.0, 1.0, 0.0), PreconditionError);
}

TEST(Builders, LorentzianPlacement) {
  const auto w = lorentzian_levels(64, 0.5, 1.0);
  ASSERT_EQ(w.size(), 64u);
  for (std::size_t i = 0; i < 32; ++i) EXPECT_NEAR(w[i] - 1.0, -(w[63 - i] - 1.0), 1e-12);
  for (std::size_t i = 1; i < w.size(); ++i) EXPECT_GT(w[i], w[i - 1]);
  EXPECT_LE(w.back() - 1.0, 20.0 * 0.5);
  // inverse-CDF: the fraction of levels below ω follows the truncated Lorentzian CDF
  const double edge = std::atan(20.0);
  for (double om : {-2.0, -0.3, 0.0, 0.7, 4.0}) {
    const double cdf = (std::atan(om / 0.5) + edge) / (2.0 * edge);
    const auto below = std::count_if(w.begin(), w.end(), [&](double v) { return v - 1.0 < om; });
    EXPECT_NEAR(static_cast<double>(below) / 64.0, cdf, 1.0 / 64.0 + 1e-12);
  }
  const auto flat = lorentzian_levels(5, 0.0, 2.0);
  for (double v : flat) EXPECT_EQ(v, 2.0);
}

TEST(Builders, BandStructure) {
  const auto direct = build_band(8, 0.3, BandDistribution::lorentzian(1.0), std::nullopt, 1.0, 0.2);
  EXPECT_EQ(direct.dim, 9);
  EXPECT_EQ(direct.amplifiers[0].monitored.size(), 8u);
  EXPECT_TRUE(direct.baths.empty());
  const auto shelf =
      build_band(8, 0.3, BandDistribution::lorentzian(1.0), 0.5, 1.0, 0.2, BandAmplification::shelved);
  EXPECT_EQ(shelf.dim, 10);
  EXPECT_EQ(shelf.baths.size(), 8u);
  ASSERT_EQ(shelf.amplifiers[0].monitored.size(), 1u);
  EXPECT_EQ(shelf.amplifiers[0].monitored[0], 9);
  EXPECT_DOUBLE_EQ(shelf.parameters.at("zeta2"), 1.0);
  for (const auto& s : {direct, shelf}) EXPECT_TRUE(s.structural_problems().empty());
  EXPECT_THROW(build_band(4, 1.0, BandDistribution::lorentzian(1.0), std::nullopt, 1.0, 0.0, BandAmplification::shelved),
               PreconditionError);
  EXPECT_THROW(build_band(3, 1.0, BandDistribution::custom({0.0, 1.0}), std::nullopt, 1.0, 0.0), PreconditionError);

  // n = 1 with ζ = 0 reproduces the two-state generator
  const auto b1 = build_band(1, 0.9, BandDistribution::lorentzian(0.0), std::nullopt, 1.0, 0.4);
  const auto two = build_two_state(0.9, 0.0, 1.0, 0.4);
  EXPECT_LT((Liouvillian::build(b1).A() - Liouvillian::build(two).A()).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(Spec, StructuralProblemsAreReported) {
  auto s = build_three_state(1.0, 1.0, 0.0, 1.0, 0.0);
  s.H.coeffRef(0, 1) = 1.0;
  EXPECT_FALSE(s.structural_problems().empty());
  s = build_three_state(1.0, 1.0, 0.0, 1.0, 0.0);
  s.S.coeffRef(0, 0) = 2.0;
  EXPECT_FALSE(s.structural_problems().empty());
  s = build_three_state(1.0, 1.0, 0.0, 1.0, 0.0);
  s.amplifiers[0].monitored = {2, 2};
  s.amplifiers[0].weights = {1.0, 1.0};
  EXPECT_FALSE(s.structural_problems().empty());
  s = build_three_state(1.0, 1.0, 0.0, 1.0, 0.0);
  s.initial_state(0, 0) = 0.5;
  EXPECT_FALSE(s.structural_problems().empty());
  EXPECT_THROW(Liouvillian::build(s), DimensionError);
  s = build_three_state(1.0, 1.0, 0.0, 1.0, 0.0);
  s.initial_state = ComplexMatrix::Zero(3, 3);
  s.initial_state(1, 1) = 1.0;
  EXPECT_TRUE(s.structural_problems().empty());
  EXPECT_FALSE(validate(s).stationary);
}
