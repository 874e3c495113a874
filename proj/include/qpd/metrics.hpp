#pragma once

// Performance estimators computed from the average dynamics: hit
// probabilities, N-photon efficiencies, dark-count rates, latency/jitter and
// ideality diagnostics.

#include <boost/math/special_functions/erf.hpp>

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "qpd/hierarchy.hpp"

namespace qpd {

/// Time series with the warnings raised while computing it.
struct Series {
  std::vector<double> grid;
  std::vector<double> values;
  std::vector<std::string> warnings;

  double final() const { return values.empty() ? 0.0 : values.back(); }
};

namespace detail {

inline std::vector<double> diag_of(const SparseMatrix& m) {
  const ComplexVector dg = ComplexMatrix(m).diagonal();
  std::vector<double> out(static_cast<std::size_t>(dg.size()));
  for (Eigen::Index i = 0; i < dg.size(); ++i) out[static_cast<std::size_t>(i)] = dg(i).real();
  return out;
}

inline std::vector<double> weighted_population(const StateTrajectory& tr, const std::vector<double>& w) {
  std::vector<double> out(tr.size(), 0.0);
  for (std::size_t k = 0; k < tr.size(); ++k)
    for (std::size_t i = 0; i < w.size(); ++i)
      if (w[i] != 0.0) out[k] += w[i] * tr.populations(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(i));
  return out;
}

/// Clamps into [0,1]; excursions beyond 1e-6 are reported.
inline void clamp_probabilities(Series& s, const std::string& what) {
  double worst = 0.0;
  for (double& v : s.values) {
    const double c = std::clamp(v, 0.0, 1.0);
    worst = std::max(worst, std::abs(c - v));
    v = c;
  }
  if (worst > 1e-6)
    s.warnings.push_back(what + ": probability left [0,1] by " + std::to_string(worst) +
                         " (grid too coarse or outside the estimator's regime)");
}

}  // namespace detail

/// Survival and loss-rate factors of a monitored projector:
/// x̄ᵀG(t_min)x̄ / rank and x̄ᵀAx̄ / rank (rank = x̄ᵀx̄; both reduce to the
/// bare inner products for rank-one projectors).
struct MonitoredKernel {
  double survival = 1.0;
  double loss_rate = 0.0;
  double rank = 1.0;
};

inline MonitoredKernel monitored_kernel(const Liouvillian& liou, const ComplexVector& xbar, double t_min) {
  MonitoredKernel k;
  k.rank = xbar.squaredNorm();
  if (k.rank <= 0.0) throw PreconditionError("hit_probability: empty monitored projector");
  k.loss_rate = xbar.dot(liou.apply(xbar)).real() / k.rank;
  k.survival = t_min > 0.0 ? xbar.dot(greens_action(liou, xbar, t_min)).real() / k.rank : 1.0;
  return k;
}

/// Π(t) = x̄ᵀG(t_min)x̄ [p(t−t_min) − (x̄ᵀAx̄) ∫_{t₀}^{t−t_min} p], with
/// p(τ) = x̄ᵀρ̄(τ), for an arbitrary diagonal monitored projector.
inline Series hit_probability_projector(const Liouvillian& liou, const StateTrajectory& tr,
                                        const std::vector<Eigen::Index>& monitored, double t_min) {
  if (t_min < 0.0) throw PreconditionError("hit_probability: t_min must be non-negative");
  if (t_min > tr.grid.back() - tr.grid.front())
    throw PreconditionError("hit_probability: t_min exceeds the span of the time grid");
  const auto d = liou.hilbert_dim();
  ComplexMatrix proj = ComplexMatrix::Zero(d, d);
  for (auto i : monitored) proj(i, i) = 1.0;
  const ComplexVector xbar = vectorize(proj);
  const auto kern = monitored_kernel(liou, xbar, t_min);
  const auto p = tr.projector_population(monitored);
  const auto cum = cumulative_trapezoid(tr.grid, p);
  Series s;
  s.grid = tr.grid;
  s.values.resize(tr.size());
  for (std::size_t k = 0; k < tr.size(); ++k) {
    const double shifted = tr.grid[k] - t_min;
    if (shifted < tr.grid.front()) {
      s.values[k] = 0.0;
      continue;
    }
    s.values[k] = kern.survival * (interpolate(tr.grid, p, shifted) - kern.loss_rate * interpolate(tr.grid, cum, shifted));
  }
  detail::clamp_probabilities(s, "hit_probability");
  return s;
}

/// Π_i(t) for amplifier channel `channel`.
inline Series hit_probability(const Liouvillian& liou, const StateTrajectory& tr, std::size_t channel,
                              std::optional<double> t_min = std::nullopt) {
  const auto& amps = liou.spec().amplifiers;
  if (channel >= amps.size()) throw PreconditionError("hit_probability: channel out of range");
  return hit_probability_projector(liou, tr, amps[channel].monitored, t_min.value_or(amps[channel].t_min()));
}

/// P_N(M,t). N = 1: Σ_i Π_i. N ≥ 2: Σ over N-subsets of channels of the
/// joint monitored population (x̄_i × x̄_j × …)ᵀρ̄(t − t_min), valid for
/// stable monitored subspaces.
inline Series efficiency(const Liouvillian& liou, const StateTrajectory& tr, int n_photons,
                         std::optional<double> t_min = std::nullopt) {
  const auto& amps = liou.spec().amplifiers;
  if (n_photons < 1) throw PreconditionError("efficiency: photon number must be at least 1");
  if (static_cast<std::size_t>(n_photons) > amps.size())
    throw PreconditionError("efficiency: N exceeds the number of detection channels");
  Series s;
  s.grid = tr.grid;
  s.values.assign(tr.size(), 0.0);
  if (n_photons == 1) {
    for (std::size_t c = 0; c < amps.size(); ++c) {
      const auto pi = hit_probability(liou, tr, c, t_min);
      for (std::size_t k = 0; k < tr.size(); ++k) s.values[k] += pi.values[k];
      s.warnings.insert(s.warnings.end(), pi.warnings.begin(), pi.warnings.end());
    }
    detail::clamp_probabilities(s, "efficiency");
    return s;
  }
  const auto d = liou.hilbert_dim();
  double tm = 0.0;
  for (const auto& a : amps) tm = std::max(tm, t_min.value_or(a.t_min()));
  std::vector<std::vector<double>> ind;
  for (const auto& a : amps) {
    std::vector<double> v(static_cast<std::size_t>(d), 0.0);
    for (auto i : a.monitored) v[static_cast<std::size_t>(i)] = 1.0;
    ind.push_back(std::move(v));
  }
  std::vector<double> joint(static_cast<std::size_t>(d), 0.0);
  std::vector<int> pick(static_cast<std::size_t>(n_photons));
  std::function<void(int, int)> rec = [&](int start, int depth) {
    if (depth == n_photons) {
      for (Eigen::Index i = 0; i < d; ++i) {
        double w = 1.0;
        for (int c : pick) w *= ind[static_cast<std::size_t>(c)][static_cast<std::size_t>(i)];
        joint[static_cast<std::size_t>(i)] += w;
      }
      return;
    }
    for (int c = start; c < static_cast<int>(amps.size()); ++c) {
      pick[static_cast<std::size_t>(depth)] = c;
      rec(c + 1, depth + 1);
    }
  };
  rec(0, 0);
  const auto p = detail::weighted_population(tr, joint);
  for (std::size_t k = 0; k < tr.size(); ++k) {
    const double shifted = tr.grid[k] - tm;
    s.values[k] = shifted < tr.grid.front() ? 0.0 : interpolate(tr.grid, p, shifted);
  }
  detail::clamp_probabilities(s, "efficiency");
  return s;
}

// ---------------------------------------------------------------------------
// dark counts and amplification

/// r = thermal/t_m + (0.5/t_m) erfc(2√(k t_m) ΔI).
inline double dark_count_rate(double k, double t_m, double delta_i, double thermal_hit_prob = 0.0) {
  if (!(t_m > 0.0)) throw PreconditionError("dark_count_rate: t_m must be positive");
  if (k < 0.0) throw PreconditionError("dark_count_rate: k must be non-negative");
  return thermal_hit_prob / t_m + 0.5 / t_m * std::erfc(2.0 * std::sqrt(k * t_m) * delta_i);
}

/// Channel form; ΔI is the threshold measured from the no-hit level 0.
inline double dark_count_rate(const AmplifierChannel& ch, double thermal_hit_prob = 0.0) {
  return dark_count_rate(ch.rate, ch.window, ch.threshold, thermal_hit_prob);
}

/// ΔI giving noise-crossing probability `p_window` per window:
/// 0.5·erfc(2√(k t_m) ΔI) = p_window.
inline double threshold_for_dark_probability(double k, double t_m, double p_window) {
  if (!(k > 0.0) || !(t_m > 0.0)) throw PreconditionError("threshold_for_dark_probability: k, t_m must be positive");
  if (!(p_window > 0.0) || !(p_window < 0.5))
    throw PreconditionError("threshold_for_dark_probability: probability must lie in (0, 0.5)");
  return boost::math::erfc_inv(2.0 * p_window) / (2.0 * std::sqrt(k * t_m));
}

/// Minimal (2k)^{1/2}χ for dark rate R₁ with window t_m.
inline double amplification_bound(double rate, double t_m) {
  if (!(t_m > 0.0)) throw PreconditionError("amplification_bound: t_m must be positive");
  const double arg = 2.0 * t_m * rate;
  if (!(arg > 0.0) || arg > 1.0) throw PreconditionError("amplification_bound: 2 t_m R must lie in (0, 1]");
  return boost::math::erfc_inv(arg) / std::sqrt(2.0 * t_m);
}

/// Window t_m at which a threshold I_hit = fraction·χ yields dark rate
/// `rate` for amplification a = (2k)^{1/2}χ:
/// (0.5/t_m) erfc(√2·a·fraction·√t_m) = rate.
inline double calibrate_window(double amplification, double fraction, double rate) {
  if (!(amplification > 0.0) || !(fraction > 0.0) || !(rate > 0.0))
    throw PreconditionError("calibrate_window: inputs must be positive");
  auto excess = [&](double t) {
    return 0.5 / t * std::erfc(std::numbers::sqrt2 * amplification * fraction * std::sqrt(t)) - rate;
  };
  double lo = 1e-12, hi = 1.0;
  while (excess(hi) > 0.0) {
    hi *= 2.0;
    if (hi > 1e15) throw NumericError("calibrate_window: no window reaches the requested rate");
  }
  for (int it = 0; it < 200; ++it) {
    const double mid = std::sqrt(lo * hi);
    (excess(mid) > 0.0 ? lo : hi) = mid;
  }
  return std::sqrt(lo * hi);
}

// ---------------------------------------------------------------------------
// timing

/// f(t) = N|E(t)|² F(t)^{N−1} on `grid`.
inline std::vector<double> ideal_arrival_distribution(const PulseEnvelope& pulse, int n_photons,
                                                      std::span<const double> grid) {
  if (n_photons < 1) throw PreconditionError("ideal_arrival_distribution: N must be at least 1");
  std::vector<double> f(grid.size());
  for (std::size_t k = 0; k < grid.size(); ++k)
    f[k] = n_photons * pulse.intensity(grid[k]) * std::pow(pulse.cumulative(grid[k]), n_photons - 1);
  return f;
}

struct TimingMetrics {
  double mu = 0.0;
  double sigma = 0.0;
  double sigma_sys = 0.0;
  double sigma0 = 0.0;
  std::vector<double> g;
  std::vector<std::string> warnings;
};

namespace detail {

inline std::vector<double> central_difference(std::span<const double> x, std::span<const double> y) {
  const std::size_t n = x.size();
  std::vector<double> d(n, 0.0);
  if (n < 3) return d;
  for (std::size_t k = 1; k + 1 < n; ++k) d[k] = (y[k + 1] - y[k - 1]) / (x[k + 1] - x[k - 1]);
  d[0] = (-3.0 * y[0] + 4.0 * y[1] - y[2]) / (x[2] - x[0]);
  d[n - 1] = (3.0 * y[n - 1] - 4.0 * y[n - 2] + y[n - 3]) / (x[n - 1] - x[n - 3]);
  return d;
}

inline std::pair<double, double> moments(std::span<const double> x, std::span<const double> w) {
  std::vector<double> t1(x.size()), t2(x.size());
  for (std::size_t k = 0; k < x.size(); ++k) {
    t1[k] = x[k] * w[k];
    t2[k] = x[k] * x[k] * w[k];
  }
  const double norm = trapezoid(x, w);
  const double m1 = trapezoid(x, t1) / norm;
  const double m2 = trapezoid(x, t2) / norm;
  return {m1, std::sqrt(std::max(0.0, m2 - m1 * m1))};
}

}  // namespace detail

/// g = Ṗ_N/P_N(∞) by central differences; μ, σ, σ₀, σ_SYS = √(σ²−σ₀²).
inline TimingMetrics timing_metrics(std::span<const double> grid, std::span<const double> p_n,
                                    std::span<const double> f) {
  if (grid.size() != p_n.size() || grid.size() != f.size())
    throw DimensionError("timing_metrics: series lengths differ");
  const double p_inf = p_n.back();
  if (!(p_inf > 1e-12)) throw PreconditionError("timing_metrics: detection probability vanishes");
  TimingMetrics m;
  m.g = detail::central_difference(grid, p_n);
  for (double& v : m.g) v /= p_inf;
  // mean and spread of g and f; each normalized by its own quadrature weight
  const auto [mg, sg] = detail::moments(grid, m.g);
  const auto [mf, sf] = detail::moments(grid, f);
  m.mu = mg - mf;
  m.sigma = sg;
  m.sigma0 = sf;
  const double rad = sg * sg - sf * sf;
  if (rad < 0.0) {
    if (rad < -1e-9) m.warnings.push_back("timing_metrics: sigma below sigma_0, system jitter clamped to 0");
    m.sigma_sys = 0.0;
  } else {
    m.sigma_sys = std::sqrt(rad);
  }
  return m;
}

// ---------------------------------------------------------------------------
// ideality

struct IdealityReport {
  std::size_t persistent_monitored_modes = 0;
  bool modes_evaluated = false;
  std::optional<double> rate_residual;
  std::optional<double> wide_pulse_figure;  // detector rate × σ_E
  std::optional<double> predicted_efficiency;
  std::string architecture;
  bool ideal = false;
  std::vector<std::string> notes;
};

/// Persistent modes overlapping the monitored subspace, rate-matching
/// residual and closed-form prediction for recognized architectures.
inline IdealityReport ideality_check(const Liouvillian& liou, const PulseEnvelope& pulse) {
  const DetectorSpec& spec = liou.spec();
  IdealityReport r;
  r.architecture = to_string(spec.architecture);
  const auto d = spec.dim;

  if (d <= 16 && !spec.amplifiers.empty()) {
    r.modes_evaluated = true;
    std::vector<bool> mon(static_cast<std::size_t>(d * d), false);
    for (const auto& a : spec.amplifiers)
      for (auto v : a.monitored) mon[static_cast<std::size_t>(vec_index(v, v, d))] = true;
    for (const auto& m : spectrum(liou, true)) {
      if (m.kind != ModeKind::persistent) continue;
      double overlap = 0.0;
      for (Eigen::Index i = 0; i < m.eigenvector.size(); ++i)
        if (mon[static_cast<std::size_t>(i)]) overlap += std::norm(m.eigenvector(i));
      if (overlap > 1e-8) ++r.persistent_monitored_modes;
    }
  } else if (!spec.amplifiers.empty()) {
    r.notes.push_back("persistent-mode analysis skipped for d > 16");
  }

  const auto& p = spec.parameters;
  auto get = [&](const char* key) {
    const auto it = p.find(key);
    return it == p.end() ? 0.0 : it->second;
  };
  const double sigma = pulse.width();
  const bool rate_based = spec.architecture == Architecture::three_state ||
                          spec.architecture == Architecture::degenerate_array || spec.architecture == Architecture::band;
  switch (spec.architecture) {
    case Architecture::two_state:
      r.wide_pulse_figure = get("gamma2") * sigma;
      r.notes.push_back("optically coupled state is amplified directly");
      break;
    case Architecture::three_state: {
      const double g2 = get("gamma2"), G2 = get("Gamma2");
      r.rate_residual = std::abs(std::sqrt(g2) - std::sqrt(G2));
      r.wide_pulse_figure = (g2 + G2) * sigma;
      r.predicted_efficiency = (g2 + G2) > 0.0 ? 4.0 * g2 * G2 / ((g2 + G2) * (g2 + G2)) : 0.0;
      break;
    }
    case Architecture::degenerate_array: {
      const double n = get("n"), g2 = get("gamma2"), G2 = get("Gamma2");
      r.rate_residual = std::abs(std::sqrt(G2) - std::sqrt(n * g2));
      r.wide_pulse_figure = (n * g2 + G2) * sigma;
      r.predicted_efficiency = (n * g2 + G2) > 0.0 ? 4.0 * n * g2 * G2 / ((n * g2 + G2) * (n * g2 + G2)) : 0.0;
      break;
    }
    case Architecture::band: {
      const double n = get("n"), g2 = get("gamma2"), z2 = get("zeta2"), G2 = get("Gamma2");
      r.rate_residual = std::abs(n * g2 - G2 - z2);
      r.wide_pulse_figure = (n * g2 + G2 + z2) * sigma;
      const double s = n * g2 + z2 + G2;
      if (get("shelved") != 0.0 && s > 0.0) r.predicted_efficiency = 4.0 * n * g2 * (G2 + z2) / (s * s);
      break;
    }
    case Architecture::quadratic: {
      const double th = get("theta"), az = get("a_z");
      r.rate_residual = std::abs(az) + std::abs(std::remainder(th - std::numbers::pi, 2.0 * std::numbers::pi));
      r.predicted_efficiency = std::pow(std::sin(th / 2.0), 2) * (1.0 - az * az);
      break;
    }
    case Architecture::custom:
      r.notes.push_back("unrecognized architecture: only mode and pulse-width diagnostics");
      break;
  }
  const bool modes_ok = !r.modes_evaluated || r.persistent_monitored_modes >= 1;
  const bool residual_ok = r.rate_residual && *r.rate_residual <= 1e-9;
  const bool wide_ok = !rate_based || (r.wide_pulse_figure && *r.wide_pulse_figure >= 10.0);
  r.ideal = modes_ok && residual_ok && wide_ok && spec.architecture != Architecture::two_state;
  return r;
}

// ---------------------------------------------------------------------------
// report

struct MetricsReport {
  std::vector<Series> channel_hits;  // Π_i(t)
  Series efficiency;                 // P_N(M,t)
  int n_detected = 1;
  double terminal_efficiency = 0.0;
  std::vector<double> dark_rates;  // r_i
  double total_dark_rate = 0.0;    // R_N
  std::optional<TimingMetrics> timing;
  IdealityReport ideality;
  std::vector<std::string> warnings;
};

/// Evaluates every metric for one propagated trajectory. `n_detected` is
/// the N in P_N(M,t); dark rates use each channel's threshold.
inline MetricsReport compute_metrics(const Liouvillian& liou, const PulseEnvelope& pulse, const StateTrajectory& tr,
                                     int photons_in, int n_detected = 1) {
  MetricsReport rep;
  rep.n_detected = n_detected;
  const auto& amps = liou.spec().amplifiers;
  for (std::size_t c = 0; c < amps.size(); ++c) {
    rep.channel_hits.push_back(hit_probability(liou, tr, c));
    rep.dark_rates.push_back(dark_count_rate(amps[c]));
  }
  if (liou.spec().combine_channels && !amps.empty()) {
    // summed records: noise adds over channels
    const double k_eff = amps[0].rate / static_cast<double>(amps.size());
    rep.total_dark_rate = dark_count_rate(k_eff, amps[0].window, amps[0].threshold);
  } else {
    for (double r : rep.dark_rates) rep.total_dark_rate += r;
  }
  if (photons_in >= 1 && static_cast<std::size_t>(n_detected) <= amps.size()) {
    rep.efficiency = efficiency(liou, tr, n_detected);
    rep.terminal_efficiency = rep.efficiency.final();
    if (rep.terminal_efficiency > 1e-12) {
      const auto f = ideal_arrival_distribution(pulse, n_detected, tr.grid);
      rep.timing = timing_metrics(tr.grid, rep.efficiency.values, f);
      rep.warnings.insert(rep.warnings.end(), rep.timing->warnings.begin(), rep.timing->warnings.end());
    }
  } else {
    rep.efficiency.grid = tr.grid;
    rep.efficiency.values.assign(tr.size(), 0.0);
  }
  for (const auto& s : rep.channel_hits) rep.warnings.insert(rep.warnings.end(), s.warnings.begin(), s.warnings.end());
  rep.warnings.insert(rep.warnings.end(), rep.efficiency.warnings.begin(), rep.efficiency.warnings.end());
  rep.ideality = ideality_check(liou, pulse);
  return rep;
}

}  // namespace qpd
