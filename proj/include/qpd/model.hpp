#pragma once

// Detector specifications, incoming pulses and Fock-basis field states, plus
// builders for the standard detector architectures.

#include <boost/math/interpolators/makima.hpp>

#include <cmath>
#include <map>
#include <memory>
#include <numbers>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "qpd/numerics.hpp"

namespace qpd {

// ---------------------------------------------------------------------------
// pulse envelopes

enum class PulseShape { gaussian, square, sampled };

/// Temporal profile E(t) of a single-mode wavepacket, normalized so that
/// ∫|E|² dt = 1. Times in ns, carrier in rad/ns. Simulations run in the frame
/// rotating at the carrier, so only the envelope enters the dynamics.
class PulseEnvelope {
 public:
  static PulseEnvelope gaussian(double sigma, double center = 0.0, double carrier = 0.0) {
    if (!(sigma > 0.0)) throw PreconditionError("gaussian_pulse: sigma must be positive");
    PulseEnvelope p;
    p.shape_ = PulseShape::gaussian;
    p.sigma_ = sigma;
    p.center_ = center;
    p.carrier_ = carrier;
    return p;
  }

  /// Flat-top pulse of full duration `width` centred on `center`.
  static PulseEnvelope square(double width, double center = 0.0, double carrier = 0.0) {
    if (!(width > 0.0)) throw PreconditionError("square_pulse: width must be positive");
    PulseEnvelope p;
    p.shape_ = PulseShape::square;
    p.sigma_ = width;
    p.center_ = center;
    p.carrier_ = carrier;
    return p;
  }

  /// Tabulated envelope; cubic (makima) interpolation of the real and
  /// imaginary parts, renormalized to unit energy on load.
  static PulseEnvelope sampled(std::vector<double> times, std::vector<Complex> values, double carrier = 0.0) {
    if (times.size() < 4 || times.size() != values.size())
      throw PreconditionError("sampled_pulse: need at least 4 (time, value) samples of equal count");
    require_increasing(times, "sampled_pulse");
    PulseEnvelope p;
    p.shape_ = PulseShape::sampled;
    p.carrier_ = carrier;
    p.build_table(std::move(times), std::move(values));
    return p;
  }

  PulseShape shape() const noexcept { return shape_; }
  double center() const noexcept { return center_; }
  double carrier() const noexcept { return carrier_; }
  /// Width parameter: standard deviation of |E|² for gaussians, full
  /// duration for square pulses, |E|² standard deviation for sampled ones.
  double width() const noexcept { return sigma_; }
  const std::vector<double>& sample_times() const noexcept { return table_ ? table_->times : empty_; }
  std::vector<Complex> sample_values() const {
    std::vector<Complex> out;
    if (!table_) return out;
    for (std::size_t k = 0; k < table_->times.size(); ++k) out.emplace_back(table_->re[k], table_->im[k]);
    return out;
  }

  Complex amplitude(double t) const {
    switch (shape_) {
      case PulseShape::gaussian: {
        const double x = (t - center_) / sigma_;
        return std::pow(2.0 * std::numbers::pi * sigma_ * sigma_, -0.25) * std::exp(-0.25 * x * x);
      }
      case PulseShape::square:
        return std::abs(t - center_) <= 0.5 * sigma_ ? 1.0 / std::sqrt(sigma_) : 0.0;
      case PulseShape::sampled: {
        if (t < table_->times.front() || t > table_->times.back()) return 0.0;
        return Complex(table_->re_interp(t), table_->im_interp(t));
      }
    }
    return 0.0;
  }

  double intensity(double t) const { return std::norm(amplitude(t)); }

  /// ∫_{-∞}^{t} |E(τ)|² dτ.
  double cumulative(double t) const {
    switch (shape_) {
      case PulseShape::gaussian:
        return 0.5 * std::erfc(-(t - center_) / (sigma_ * std::numbers::sqrt2));
      case PulseShape::square:
        return std::clamp((t - (center_ - 0.5 * sigma_)) / sigma_, 0.0, 1.0);
      case PulseShape::sampled:
        return interpolate(table_->fine_t, table_->fine_cum, t);
    }
    return 0.0;
  }

  /// Finite interval outside which |E| is negligible (|E|² < 1e-8 for gaussians).
  std::pair<double, double> support() const {
    switch (shape_) {
      case PulseShape::gaussian:
        return {center_ - 8.0 * sigma_, center_ + 8.0 * sigma_};
      case PulseShape::square:
        return {center_ - 0.5 * sigma_, center_ + 0.5 * sigma_};
      case PulseShape::sampled:
        return {table_->times.front(), table_->times.back()};
    }
    return {0.0, 0.0};
  }

 private:
  struct Table {
    std::vector<double> times, re, im;
    boost::math::interpolators::makima<std::vector<double>> re_interp, im_interp;
    std::vector<double> fine_t, fine_cum;
  };

  void build_table(std::vector<double> times, std::vector<Complex> values) {
    auto make = [](const std::vector<double>& t, const std::vector<Complex>& v, double scale) {
      std::vector<double> re, im;
      for (const auto& z : v) {
        re.push_back(z.real() * scale);
        im.push_back(z.imag() * scale);
      }
      auto tr = t, ti = t;
      auto re_copy = re, im_copy = im;
      return std::make_shared<Table>(Table{t, std::move(re_copy), std::move(im_copy),
                                           boost::math::interpolators::makima(std::move(tr), std::move(re)),
                                           boost::math::interpolators::makima(std::move(ti), std::move(im)),
                                           {},
                                           {}});
    };
    auto tab = make(times, values, 1.0);
    auto fine = [&](const Table& tb, std::vector<double>& ft, std::vector<double>& fi) {
      constexpr int sub = 32;
      ft.clear();
      fi.clear();
      for (std::size_t k = 0; k + 1 < tb.times.size(); ++k)
        for (int s = 0; s < sub; ++s) ft.push_back(tb.times[k] + (tb.times[k + 1] - tb.times[k]) * s / sub);
      ft.push_back(tb.times.back());
      for (double t : ft) fi.push_back(std::norm(Complex(tb.re_interp(t), tb.im_interp(t))));
    };
    std::vector<double> ft, fi;
    fine(*tab, ft, fi);
    const double norm = trapezoid(ft, fi);
    if (!(norm > 0.0)) throw PreconditionError("sampled_pulse: envelope has zero energy");
    tab = make(times, values, 1.0 / std::sqrt(norm));
    fine(*tab, ft, fi);
    tab->fine_cum = cumulative_trapezoid(ft, fi);
    const double total = tab->fine_cum.back();
    for (auto& c : tab->fine_cum) c /= total;
    tab->fine_t = ft;
    // moments of |E|² for the width parameter
    double m1 = 0.0, m2 = 0.0;
    for (std::size_t k = 1; k < ft.size(); ++k) {
      const double h = ft[k] - ft[k - 1];
      const double w0 = fi[k - 1] / total, w1 = fi[k] / total;
      m1 += 0.5 * h * (ft[k - 1] * w0 + ft[k] * w1);
      m2 += 0.5 * h * (ft[k - 1] * ft[k - 1] * w0 + ft[k] * ft[k] * w1);
    }
    center_ = m1;
    sigma_ = std::sqrt(std::max(0.0, m2 - m1 * m1));
    table_ = std::move(tab);
  }

  PulseShape shape_ = PulseShape::gaussian;
  double sigma_ = 1.0;
  double center_ = 0.0;
  double carrier_ = 0.0;
  std::shared_ptr<const Table> table_;
  inline static const std::vector<double> empty_{};
};

inline PulseEnvelope gaussian_pulse(double sigma, double center = 0.0, double carrier = 0.0) {
  return PulseEnvelope::gaussian(sigma, center, carrier);
}

// ---------------------------------------------------------------------------
// field states

/// Density matrix of the incoming mode in the Fock basis, c_{N,M}.
struct FieldState {
  ComplexMatrix coeffs;

  int n_max() const { return static_cast<int>(coeffs.rows()) - 1; }

  static FieldState fock(int n, int n_max = -1) {
    if (n < 0) throw PreconditionError("fock: photon number must be non-negative");
    if (n_max < n) n_max = n;
    FieldState f;
    f.coeffs = ComplexMatrix::Zero(n_max + 1, n_max + 1);
    f.coeffs(n, n) = 1.0;
    return f;
  }

  static FieldState vacuum() { return fock(0); }

  /// Pure superposition Σ a_N |N⟩ (normalized here).
  static FieldState superposition(const ComplexVector& amplitudes) {
    if (amplitudes.size() == 0 || amplitudes.norm() == 0.0)
      throw PreconditionError("superposition: amplitudes must be non-zero");
    const ComplexVector a = amplitudes / amplitudes.norm();
    return FieldState{a * a.adjoint()};
  }

  /// Hermitian, unit trace, positive semidefinite.
  bool valid(double tol = 1e-10) const {
    if (!is_hermitian(coeffs, tol)) return false;
    if (std::abs(coeffs.trace() - 1.0) > tol) return false;
    Eigen::SelfAdjointEigenSolver<ComplexMatrix> es(coeffs);
    return es.eigenvalues().minCoeff() >= -tol;
  }

  double purity() const { return (coeffs * coeffs).trace().real(); }
};

// ---------------------------------------------------------------------------
// amplifier channels

/// Weak continuous measurement of X = Σ_j χ_j |v_j⟩⟨v_j| at rate k.
struct AmplifierChannel {
  std::vector<Eigen::Index> monitored;  // basis indices v_j
  std::vector<double> weights;          // χ_j
  double rate = 0.0;                    // k, ns⁻¹
  double window = 1.0;                  // t_m, ns
  double threshold = 0.0;               // I_hit, signal units
  std::optional<double> min_dwell;      // t_min, ns; derived when unset

  double max_weight() const {
    double m = 0.0;
    for (double w : weights) m = std::max(m, std::abs(w));
    return m;
  }

  /// t_min, defaulting to I_hit·t_m/χ.
  double t_min() const {
    if (min_dwell) return *min_dwell;
    const double chi = max_weight();
    return chi > 0.0 ? threshold * window / chi : 0.0;
  }

  /// |t_min − I_hit·t_m/χ| ≤ rel·t_min.
  bool dwell_consistent(double rel = 0.1) const {
    const double chi = max_weight();
    if (chi <= 0.0) return false;
    const double derived = threshold * window / chi;
    return std::abs(t_min() - derived) <= rel * std::max(derived, 1e-300);
  }

  SparseMatrix observable(Eigen::Index dim) const {
    std::vector<Triplet> trips;
    for (std::size_t j = 0; j < monitored.size(); ++j)
      trips.emplace_back(static_cast<int>(monitored[j]), static_cast<int>(monitored[j]), weights[j]);
    SparseMatrix x(dim, dim);
    x.setFromTriplets(trips.begin(), trips.end());
    return x;
  }

  SparseMatrix projector(Eigen::Index dim) const {
    std::vector<Triplet> trips;
    for (auto v : monitored) trips.emplace_back(static_cast<int>(v), static_cast<int>(v), 1.0);
    SparseMatrix x(dim, dim);
    x.setFromTriplets(trips.begin(), trips.end());
    return x;
  }
};

// ---------------------------------------------------------------------------
// detector specification

enum class Architecture { custom, two_state, three_state, quadratic, degenerate_array, band };

inline const char* to_string(Architecture a) {
  switch (a) {
    case Architecture::custom: return "custom";
    case Architecture::two_state: return "two_state";
    case Architecture::three_state: return "three_state";
    case Architecture::quadratic: return "quadratic";
    case Architecture::degenerate_array: return "degenerate_array";
    case Architecture::band: return "band";
  }
  return "custom";
}

enum class ArrayAmplification { single_combined, per_element_individual, per_element_summed };
enum class BandAmplification { band_direct, shelved };

/// Matter-system model. Frequencies in rad/ns, couplings in √(ns⁻¹).
/// `excitation` is the diagonal of the number operator used for the frame
/// rotating at the pulse carrier; L must lower it by exactly one.
struct DetectorSpec {
  Eigen::Index dim = 0;
  SparseMatrix H;
  SparseMatrix L;
  SparseMatrix S;  // scattering unitary, identity by default
  std::vector<SparseMatrix> baths;
  std::vector<AmplifierChannel> amplifiers;
  ComplexMatrix initial_state;
  RealVector excitation;
  std::vector<std::string> labels;

  /// Builder metadata (pattern-matched by the ideality advisor).
  Architecture architecture = Architecture::custom;
  std::map<std::string, double> parameters;
  /// Scheme (iii) arrays: per-element records are summed before thresholding.
  bool combine_channels = false;

  bool scattering_is_identity(double tol = 0.0) const {
    const ComplexMatrix s = ComplexMatrix(S);
    return (s - ComplexMatrix::Identity(dim, dim)).cwiseAbs().maxCoeff() <= tol;
  }

  /// Structural checks (Hermitian H, unitary S, consistent shapes, projector
  /// channels, density-matrix initial state). Returns a list of problems.
  std::vector<std::string> structural_problems() const {
    std::vector<std::string> out;
    auto shape_ok = [&](const SparseMatrix& m, const char* name) {
      if (m.rows() != dim || m.cols() != dim) {
        out.push_back(std::string(name) + " has shape " + std::to_string(m.rows()) + "x" +
                      std::to_string(m.cols()) + ", expected " + std::to_string(dim));
        return false;
      }
      return true;
    };
    if (dim < 1) out.emplace_back("dimension must be at least 1");
    if (shape_ok(H, "H") && !is_hermitian(ComplexMatrix(H), 1e-10)) out.emplace_back("H is not Hermitian");
    shape_ok(L, "L");
    if (shape_ok(S, "S") && !is_unitary(ComplexMatrix(S), 1e-10)) out.emplace_back("S is not unitary");
    for (std::size_t i = 0; i < baths.size(); ++i) shape_ok(baths[i], ("bath " + std::to_string(i)).c_str());
    for (std::size_t i = 0; i < amplifiers.size(); ++i) {
      const auto& a = amplifiers[i];
      const std::string tag = "amplifier " + std::to_string(i);
      if (a.monitored.size() != a.weights.size()) out.push_back(tag + ": projector/weight count mismatch");
      std::vector<bool> seen(static_cast<std::size_t>(std::max<Eigen::Index>(dim, 0)), false);
      for (auto v : a.monitored) {
        if (v < 0 || v >= dim) {
          out.push_back(tag + ": basis index " + std::to_string(v) + " out of range");
          continue;
        }
        if (seen[static_cast<std::size_t>(v)]) out.push_back(tag + ": repeated basis index (x is not a projector)");
        seen[static_cast<std::size_t>(v)] = true;
      }
      if (a.rate < 0.0) out.push_back(tag + ": negative rate");
      if (!(a.window > 0.0)) out.push_back(tag + ": integration window must be positive");
    }
    if (initial_state.rows() != dim || initial_state.cols() != dim) {
      out.emplace_back("initial state has wrong shape");
    } else {
      if (!is_hermitian(initial_state, 1e-10)) out.emplace_back("initial state is not Hermitian");
      if (std::abs(initial_state.trace() - 1.0) > 1e-10) out.emplace_back("initial state trace differs from 1");
      Eigen::SelfAdjointEigenSolver<ComplexMatrix> es(initial_state);
      if (es.eigenvalues().minCoeff() < -1e-10) out.emplace_back("initial state is not positive semidefinite");
    }
    if (excitation.size() != dim) out.emplace_back("excitation diagonal has wrong length");
    return out;
  }
};

namespace detail {

inline SparseMatrix sparse_from(Eigen::Index dim, const std::vector<Triplet>& trips) {
  SparseMatrix m(dim, dim);
  m.setFromTriplets(trips.begin(), trips.end());
  return m;
}

inline SparseMatrix diagonal(const std::vector<double>& d) {
  std::vector<Triplet> trips;
  for (std::size_t i = 0; i < d.size(); ++i)
    if (d[i] != 0.0) trips.emplace_back(static_cast<int>(i), static_cast<int>(i), d[i]);
  return sparse_from(static_cast<Eigen::Index>(d.size()), trips);
}

inline SparseMatrix ket_bra(Eigen::Index dim, Eigen::Index to, Eigen::Index from, Complex value) {
  return sparse_from(dim, {Triplet(static_cast<int>(to), static_cast<int>(from), value)});
}

inline void require_non_negative(double v, const char* name) {
  if (!(v >= 0.0) || !std::isfinite(v))
    throw PreconditionError(std::string(name) + " must be a finite non-negative value");
}

inline ComplexMatrix ground_state(Eigen::Index dim) {
  ComplexMatrix r = ComplexMatrix::Zero(dim, dim);
  r(0, 0) = 1.0;
  return r;
}

inline AmplifierChannel channel(std::vector<Eigen::Index> monitored, std::vector<double> weights, double k) {
  AmplifierChannel a;
  a.monitored = std::move(monitored);
  a.weights = std::move(weights);
  a.rate = k;
  return a;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// builders

/// Ground 0 and excited 1 coupled to the field by γ; state 1 amplified.
inline DetectorSpec build_two_state(double gamma, double omega1, double chi, double k) {
  detail::require_non_negative(gamma, "gamma");
  detail::require_non_negative(k, "k");
  DetectorSpec s;
  s.dim = 2;
  s.H = detail::diagonal({0.0, omega1});
  s.L = detail::ket_bra(2, 0, 1, gamma);
  s.S = sparse_identity(2);
  s.amplifiers.push_back(detail::channel({1}, {chi}, k));
  s.initial_state = detail::ground_state(2);
  s.excitation = RealVector::LinSpaced(2, 0.0, 1.0);
  s.labels = {"0", "1"};
  s.architecture = Architecture::two_state;
  s.parameters = {{"gamma2", gamma * gamma}, {"omega1", omega1}, {"chi", chi}, {"k", k}};
  return s;
}

/// 0 ↔ 1 optical transition, incoherent decay 1 → C with Γ, C amplified.
inline DetectorSpec build_three_state(double gamma, double Gamma, double omega1, double chi, double k,
                                      double omegaC = 0.0) {
  detail::require_non_negative(gamma, "gamma");
  detail::require_non_negative(Gamma, "Gamma");
  detail::require_non_negative(k, "k");
  DetectorSpec s;
  s.dim = 3;
  s.H = detail::diagonal({0.0, omega1, omegaC});
  s.L = detail::ket_bra(3, 0, 1, gamma);
  s.S = sparse_identity(3);
  s.baths.push_back(detail::ket_bra(3, 2, 1, Gamma));
  s.amplifiers.push_back(detail::channel({2}, {chi}, k));
  s.initial_state = detail::ground_state(3);
  s.excitation = RealVector(3);
  s.excitation << 0.0, 1.0, 1.0;
  s.labels = {"0", "1", "C"};
  s.architecture = Architecture::three_state;
  s.parameters = {{"gamma2", gamma * gamma}, {"Gamma2", Gamma * Gamma}, {"omega1", omega1},
                  {"omegaC", omegaC},        {"chi", chi},             {"k", k}};
  return s;
}

/// Appends the pure-dephasing bath κ|level⟩⟨level|.
inline DetectorSpec add_dephasing(DetectorSpec spec, double kappa, Eigen::Index level) {
  if (level < 0 || level >= spec.dim) throw PreconditionError("add_dephasing: level index out of range");
  detail::require_non_negative(kappa, "kappa");
  spec.baths.push_back(detail::ket_bra(spec.dim, level, level, kappa));
  spec.parameters["kappa2"] += kappa * kappa;
  return spec;
}

/// Appends the incoherent transfer δ|to⟩⟨from|.
inline DetectorSpec add_reset(DetectorSpec spec, double delta, Eigen::Index from, Eigen::Index to) {
  if (from < 0 || from >= spec.dim || to < 0 || to >= spec.dim)
    throw PreconditionError("add_reset: state index out of range");
  detail::require_non_negative(delta, "delta");
  spec.baths.push_back(detail::ket_bra(spec.dim, to, from, delta));
  spec.parameters["delta2"] += delta * delta;
  return spec;
}

/// Two-level system coupled to the field only through the scattering
/// unitary S = exp(-i (a·σ) θ/2).
inline DetectorSpec build_quadratic(double theta, const Eigen::Vector3d& axis, double omega1, double chi,
                                    double k) {
  if (std::abs(axis.norm() - 1.0) > 1e-10) throw PreconditionError("build_quadratic: axis must be a unit vector");
  detail::require_non_negative(k, "k");
  ComplexMatrix sx(2, 2), sy(2, 2), sz(2, 2);
  sx << 0, 1, 1, 0;
  sy << 0, -kI, kI, 0;
  sz << 1, 0, 0, -1;
  const ComplexMatrix alpha = axis.x() * sx + axis.y() * sy + axis.z() * sz;
  const ComplexMatrix smat =
      std::cos(theta / 2) * ComplexMatrix::Identity(2, 2) - kI * std::sin(theta / 2) * alpha;
  DetectorSpec s;
  s.dim = 2;
  s.H = detail::diagonal({0.0, omega1});
  s.L = SparseMatrix(2, 2);
  s.S = to_sparse(smat);
  s.amplifiers.push_back(detail::channel({1}, {chi}, k));
  s.initial_state = detail::ground_state(2);
  s.excitation = RealVector::Zero(2);
  s.labels = {"0", "1"};
  s.architecture = Architecture::quadratic;
  s.parameters = {{"theta", theta}, {"a_x", axis.x()}, {"a_y", axis.y()}, {"a_z", axis.z()},
                  {"omega1", omega1}, {"chi", chi},    {"k", k}};
  return s;
}

/// n degenerate three-level elements sharing one field mode. The Hilbert
/// space keeps the configurations with at most `max_excited` elements out
/// of the ground state (exact for inputs of at most that many photons);
/// `max_excited < 0` keeps the full 3ⁿ space.
inline DetectorSpec build_degenerate_array(int n, double gamma, double Gamma, double omega1, double chi, double k,
                                           ArrayAmplification scheme = ArrayAmplification::per_element_individual,
                                           int max_excited = -1, double omegaC = 0.0) {
  if (n < 1) throw PreconditionError("build_degenerate_array: need at least one element");
  detail::require_non_negative(gamma, "gamma");
  detail::require_non_negative(Gamma, "Gamma");
  detail::require_non_negative(k, "k");
  if (max_excited < 0 || max_excited > n) max_excited = n;

  // enumerate configurations (digit 0/1/2 = 0/1/C per element) in
  // lexicographic order with element 0 most significant
  std::vector<std::vector<int>> configs;
  std::vector<int> cur(static_cast<std::size_t>(n), 0);
  auto excited = [](const std::vector<int>& c) {
    int e = 0;
    for (int v : c) e += v != 0;
    return e;
  };
  while (true) {
    if (excited(cur) <= max_excited) configs.push_back(cur);
    int pos = n - 1;
    while (pos >= 0 && cur[static_cast<std::size_t>(pos)] == 2) cur[static_cast<std::size_t>(pos--)] = 0;
    if (pos < 0) break;
    ++cur[static_cast<std::size_t>(pos)];
  }
  std::map<std::vector<int>, Eigen::Index> index;
  for (std::size_t i = 0; i < configs.size(); ++i) index[configs[i]] = static_cast<Eigen::Index>(i);
  const auto dim = static_cast<Eigen::Index>(configs.size());

  auto transition = [&](int element, int from, int to, double amp) {
    std::vector<Triplet> trips;
    for (std::size_t i = 0; i < configs.size(); ++i) {
      if (configs[i][static_cast<std::size_t>(element)] != from) continue;
      auto target = configs[i];
      target[static_cast<std::size_t>(element)] = to;
      const auto it = index.find(target);
      if (it != index.end()) trips.emplace_back(static_cast<int>(it->second), static_cast<int>(i), amp);
    }
    return detail::sparse_from(dim, trips);
  };

  DetectorSpec s;
  s.dim = dim;
  std::vector<double> h(configs.size()), exc(configs.size());
  for (std::size_t i = 0; i < configs.size(); ++i) {
    for (int v : configs[i]) {
      h[i] += v == 1 ? omega1 : (v == 2 ? omegaC : 0.0);
      exc[i] += v != 0 ? 1.0 : 0.0;
    }
  }
  s.H = detail::diagonal(h);
  s.L = SparseMatrix(dim, dim);
  for (int e = 0; e < n; ++e) {
    s.L += transition(e, 1, 0, gamma);
    s.baths.push_back(transition(e, 1, 2, Gamma));
  }
  s.S = sparse_identity(dim);

  auto element_in_c = [&](int e) {
    std::vector<Eigen::Index> mon;
    for (std::size_t i = 0; i < configs.size(); ++i)
      if (configs[i][static_cast<std::size_t>(e)] == 2) mon.push_back(static_cast<Eigen::Index>(i));
    return mon;
  };
  if (scheme == ArrayAmplification::single_combined) {
    std::vector<Eigen::Index> mon;
    std::vector<double> w;
    for (std::size_t i = 0; i < configs.size(); ++i) {
      int c = 0;
      for (int v : configs[i]) c += v == 2;
      if (c > 0) {
        mon.push_back(static_cast<Eigen::Index>(i));
        w.push_back(chi * c);
      }
    }
    s.amplifiers.push_back(detail::channel(mon, w, k));
  } else {
    for (int e = 0; e < n; ++e) {
      auto mon = element_in_c(e);
      s.amplifiers.push_back(detail::channel(mon, std::vector<double>(mon.size(), chi), k));
    }
    s.combine_channels = scheme == ArrayAmplification::per_element_summed;
  }
  s.initial_state = detail::ground_state(dim);
  s.excitation = Eigen::Map<const RealVector>(exc.data(), dim);
  for (const auto& c : configs) {
    std::string lbl;
    for (int v : c) lbl += v == 0 ? '0' : (v == 1 ? '1' : 'C');
    s.labels.push_back(lbl);
  }
  s.architecture = Architecture::degenerate_array;
  s.parameters = {{"n", n},          {"gamma2", gamma * gamma}, {"Gamma2", Gamma * Gamma},
                  {"omega1", omega1}, {"chi", chi},             {"k", k},
                  {"max_excited", max_excited}};
  return s;
}

/// Level placement inside a band.
struct BandDistribution {
  enum class Kind { lorentzian, custom } kind = Kind::lorentzian;
  double zeta = 0.0;                // Lorentzian half width at half maximum is ζ²/2
  std::vector<double> frequencies;  // custom placement

  static BandDistribution lorentzian(double zeta) { return {Kind::lorentzian, zeta, {}}; }
  static BandDistribution custom(std::vector<double> w) { return {Kind::custom, 0.0, std::move(w)}; }
};

/// Deterministic inverse-CDF placement of n levels for a Lorentzian of
/// half width `hwhm` centred on `center`, truncated at ±20·hwhm.
inline std::vector<double> lorentzian_levels(int n, double hwhm, double center = 0.0) {
  std::vector<double> w(static_cast<std::size_t>(n), center);
  if (hwhm <= 0.0) return w;
  const double edge = std::atan(20.0);
  for (int i = 0; i < n; ++i) {
    const double q = (i + 0.5) / n;
    w[static_cast<std::size_t>(i)] = center + hwhm * std::tan(-edge + 2.0 * edge * q);
  }
  return w;
}

/// Ground state plus n excited levels each coupled to the field by γ, with
/// optional decay Γ from every level into a shelf C.
inline DetectorSpec build_band(int n, double gamma, const BandDistribution& dist, std::optional<double> Gamma,
                               double chi, double k, BandAmplification amplify = BandAmplification::band_direct,
                               double center = 0.0) {
  if (n < 1) throw PreconditionError("build_band: need at least one band state");
  detail::require_non_negative(gamma, "gamma");
  detail::require_non_negative(k, "k");
  if (Gamma) detail::require_non_negative(*Gamma, "Gamma");
  if (amplify == BandAmplification::shelved && !Gamma)
    throw PreconditionError("build_band: shelved amplification needs a decay rate Gamma");

  std::vector<double> omega;
  if (dist.kind == BandDistribution::Kind::lorentzian) {
    omega = lorentzian_levels(n, 0.5 * dist.zeta * dist.zeta, center);
  } else {
    if (static_cast<int>(dist.frequencies.size()) != n)
      throw PreconditionError("build_band: custom distribution must list n frequencies");
    omega = dist.frequencies;
  }
  const bool shelf = Gamma.has_value();
  const Eigen::Index dim = n + 1 + (shelf ? 1 : 0);
  const Eigen::Index c_index = n + 1;

  DetectorSpec s;
  s.dim = dim;
  std::vector<double> h(static_cast<std::size_t>(dim), 0.0);
  std::vector<double> exc(static_cast<std::size_t>(dim), 1.0);
  exc[0] = 0.0;
  for (int i = 0; i < n; ++i) h[static_cast<std::size_t>(i + 1)] = omega[static_cast<std::size_t>(i)];
  s.H = detail::diagonal(h);
  std::vector<Triplet> lt;
  for (int i = 0; i < n; ++i) lt.emplace_back(0, i + 1, gamma);
  s.L = detail::sparse_from(dim, lt);
  s.S = sparse_identity(dim);
  if (shelf)
    for (int i = 0; i < n; ++i) s.baths.push_back(detail::ket_bra(dim, c_index, i + 1, *Gamma));
  if (amplify == BandAmplification::band_direct) {
    std::vector<Eigen::Index> mon;
    for (int i = 0; i < n; ++i) mon.push_back(i + 1);
    s.amplifiers.push_back(detail::channel(mon, std::vector<double>(mon.size(), chi), k));
  } else {
    s.amplifiers.push_back(detail::channel({c_index}, {chi}, k));
  }
  s.initial_state = detail::ground_state(dim);
  s.excitation = Eigen::Map<const RealVector>(exc.data(), dim);
  s.labels.push_back("0");
  for (int i = 0; i < n; ++i) s.labels.push_back("b" + std::to_string(i + 1));
  if (shelf) s.labels.push_back("C");
  s.architecture = Architecture::band;
  s.parameters = {{"n", n}, {"gamma2", gamma * gamma}, {"chi", chi}, {"k", k},
                  {"shelved", amplify == BandAmplification::shelved ? 1.0 : 0.0}};
  if (dist.kind == BandDistribution::Kind::lorentzian) s.parameters["zeta2"] = dist.zeta * dist.zeta;
  if (Gamma) s.parameters["Gamma2"] = *Gamma * *Gamma;
  return s;
}

}  // namespace qpd
