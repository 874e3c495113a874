#pragma once

// Numerical arbitration between competing closed forms: each check
// propagates the hierarchy and reports which candidate the oracle matches.

#include <string>
#include <vector>

#include "qpd/hierarchy.hpp"
#include "qpd/reference.hpp"

namespace qpd {

struct Candidate {
  std::string name;
  double value = 0.0;
  bool matches = false;
};

struct Arbitration {
  std::string setting;
  double oracle = 0.0;
  double tolerance = 0.0;
  std::vector<Candidate> candidates;

  /// Name of the single matching candidate, empty when none or several match.
  std::string winner() const {
    std::string w;
    int hits = 0;
    for (const auto& c : candidates)
      if (c.matches) {
        w = c.name;
        ++hits;
      }
    return hits == 1 ? w : std::string();
  }
};

namespace detail {

inline Arbitration decide(std::string setting, double oracle, double tol, std::vector<Candidate> cands) {
  for (auto& c : cands) c.matches = std::abs(c.value - oracle) <= tol;
  return {std::move(setting), oracle, tol, std::move(cands)};
}

inline double terminal_population(const DetectorSpec& spec, const PulseEnvelope& pulse, const FieldState& field,
                                  double dt, double extra, const std::vector<Eigen::Index>& set) {
  const auto lv = Liouvillian::build(spec, pulse.carrier());
  const auto grid = pulse_grid(pulse, std::min(dt, default_dt(lv, pulse)), extra);
  const auto tr = propagate(lv, pulse, field, grid).trajectory;
  return tr.projector_population(set).back();
}

}  // namespace detail

/// Single-photon transfer of the Ŝ-coupled two-level system with a_z = 0,
/// scattering axis along x.
inline Arbitration arbitrate_quadratic(double theta, double sigma = 5.0, double tol = 1e-3) {
  const auto spec = build_quadratic(theta, Eigen::Vector3d(1.0, 0.0, 0.0), 0.0, 1.0, 0.0);
  const auto pulse = gaussian_pulse(sigma);
  const double p = detail::terminal_population(spec, pulse, FieldState::fock(1), sigma / 200.0, 0.0, {1});
  const auto c = reference::quadratic_candidates(theta, 0.0);
  return detail::decide("quadratic theta=" + std::to_string(theta), p, tol,
                        {{"quadratic_printed", c.printed}, {"quadratic_amplitude", c.amplitude_based}});
}

/// Two-photon detection P₂(2,∞) of an n-element degenerate array with
/// Γ² = nγ² = 1 against both multi-photon closed forms.
inline Arbitration arbitrate_multiphoton(int n, double sigma = 20.0, double dt = 0.1, double tol = 5e-2) {
  const double g2 = 1.0 / n, G2 = 1.0;
  const auto spec = build_degenerate_array(n, std::sqrt(g2), std::sqrt(G2), 0.0, 1.0, 0.0,
                                           ArrayAmplification::per_element_individual, 2);
  std::vector<Eigen::Index> two_c;
  for (std::size_t i = 0; i < spec.labels.size(); ++i)
    if (std::count(spec.labels[i].begin(), spec.labels[i].end(), 'C') == 2)
      two_c.push_back(static_cast<Eigen::Index>(i));
  const auto pulse = gaussian_pulse(sigma);
  const double p = detail::terminal_population(spec, pulse, FieldState::fock(2), dt, 0.0, two_c);
  return detail::decide("array n=" + std::to_string(n) + " N=2", p, tol,
                        {{"multiphoton_pair_efficiency", reference::multiphoton_pair_efficiency(n, g2, G2)},
                         {"narray_efficiency", reference::narray_efficiency(n, 2)}});
}

/// Updates catalog statuses from arbitration outcomes: the winner becomes
/// oracle-confirmed, the losing candidates rejected.
inline void record_outcomes(std::vector<reference::ClosedForm>& cat, const std::vector<Arbitration>& outcomes) {
  for (const auto& a : outcomes) {
    const std::string w = a.winner();
    if (w.empty()) continue;
    for (const auto& c : a.candidates)
      for (auto& f : cat)
        if (f.name == c.name) {
          f.status = c.name == w ? reference::Status::oracle_confirmed : reference::Status::rejected;
          f.note = a.setting + ": oracle " + std::to_string(a.oracle) + ", this form " + std::to_string(c.value);
        }
  }
}

}  // namespace qpd
