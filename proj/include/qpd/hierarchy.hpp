#pragma once

// Fock-hierarchy propagation: the auxiliary matter states ϱ^{N,M}(t) driven by
// an N-photon wavepacket, and reconstruction of the physical matter state.

#include <map>
#include <optional>
#include <set>
#include <utility>
#include <vector>

#include "qpd/liouvillian.hpp"

namespace qpd {

using LevelIndex = std::pair<int, int>;

struct PropagateOptions {
  /// Compute only N ≥ M and obtain the rest as ϱ^{M,N} = (ϱ^{N,M})†.
  bool exploit_symmetry = true;
  /// Keep every auxiliary level at the stored times (memory heavy).
  bool store_levels = false;
  /// Store every `state_stride`-th physical state; 0 picks 1 for d ≤ 16 and
  /// about 400 snapshots otherwise.
  std::size_t state_stride = 0;
  /// Largest supported photon number.
  int max_photons = 6;
  /// Skip the grid-coverage check for the pulse support.
  bool allow_truncated_pulse = false;
};

/// Physical matter state along the grid. Populations and amplifier
/// expectations are kept at every grid time; full states at `stored_index`.
struct StateTrajectory {
  std::vector<double> grid;
  Eigen::MatrixXd populations;                 // grid.size() × d
  std::vector<std::vector<double>> expectations;  // per amplifier ⟨X_i⟩(t)
  std::vector<double> trace;
  std::vector<std::size_t> stored_index;
  std::vector<ComplexVector> states;  // vectorized ρ at stored_index

  std::size_t size() const { return grid.size(); }
  Eigen::Index dim() const { return populations.cols(); }

  /// Population of the diagonal projector Σ_{i∈set} |i⟩⟨i| at every time.
  std::vector<double> projector_population(const std::vector<Eigen::Index>& set) const {
    std::vector<double> out(grid.size(), 0.0);
    for (std::size_t k = 0; k < grid.size(); ++k)
      for (auto i : set) out[k] += populations(static_cast<Eigen::Index>(k), i);
    return out;
  }

  std::vector<double> population(Eigen::Index i) const { return projector_population({i}); }

  ComplexMatrix state(std::size_t stored) const { return devectorize(states.at(stored)); }
};

/// Triangular family ϱ^{N,M} at the stored times (when requested).
struct AuxiliaryHierarchy {
  int n_max = 0;
  Eigen::Index hilbert_dim = 0;
  bool symmetric = true;
  std::vector<LevelIndex> levels;  // integrated levels, scheduling order
  std::vector<double> stored_times;
  std::map<LevelIndex, std::vector<ComplexVector>> stored;

  bool has(int n, int m) const {
    if (stored.count({n, m})) return true;
    return symmetric && stored.count({m, n});
  }

  /// ϱ^{N,M} at stored slot `k`.
  ComplexVector level(int n, int m, std::size_t k) const {
    if (auto it = stored.find({n, m}); it != stored.end()) return it->second.at(k);
    if (symmetric)
      if (auto it = stored.find({m, n}); it != stored.end()) {
        const ComplexMatrix r = devectorize(it->second.at(k));
        return vectorize(ComplexMatrix(r.adjoint()));
      }
    throw PreconditionError("AuxiliaryHierarchy: level (" + std::to_string(n) + "," + std::to_string(m) +
                            ") was not stored");
  }
};

struct PropagationResult {
  AuxiliaryHierarchy hierarchy;
  StateTrajectory trajectory;
};

namespace detail {

inline ComplexVector vec_adjoint(const ComplexVector& v, Eigen::Index d) {
  const Eigen::Map<const ComplexMatrix> r(v.data(), d, d);
  const ComplexMatrix a = r.adjoint();
  return Eigen::Map<const ComplexVector>(a.data(), d * d);
}

/// Levels needed to reconstruct the physical state for nonzero c_{N,M}.
inline std::vector<LevelIndex> needed_levels(const FieldState& field, bool symmetric) {
  std::set<LevelIndex> need;
  const int nm = field.n_max();
  for (int n = 0; n <= nm; ++n)
    for (int m = 0; m <= nm; ++m) {
      if (field.coeffs(n, m) == 0.0) continue;
      for (int a = 0; a <= n; ++a)
        for (int b = 0; b <= m; ++b) {
          if (symmetric)
            need.insert({std::max(a, b), std::min(a, b)});
          else
            need.insert({a, b});
        }
    }
  std::vector<LevelIndex> out(need.begin(), need.end());
  std::sort(out.begin(), out.end(), [](const LevelIndex& x, const LevelIndex& y) {
    if (x.first + x.second != y.first + y.second) return x.first + x.second < y.first + y.second;
    return x.first > y.first;
  });
  return out;
}

inline double max_step(std::span<const double> grid) {
  double h = 0.0;
  for (std::size_t k = 1; k < grid.size(); ++k) h = std::max(h, grid[k] - grid[k - 1]);
  return h;
}

}  // namespace detail

/// Checks ‖A‖·dt ≤ 0.5 for the fixed-step integrator.
inline void require_stable_grid(const Liouvillian& liou, std::span<const double> grid, const char* what) {
  const double h = detail::max_step(grid);
  const double nrm = liou.norm_bound();
  if (nrm * h > 0.5)
    throw PreconditionError(std::string(what) + ": grid too coarse, ||A||*dt = " + std::to_string(nrm * h) +
                            " exceeds 0.5; use dt <= " + std::to_string(0.5 / nrm) + " ns");
}

/// Default time step: min(σ_E/200, 0.4/‖A‖).
inline double default_dt(const Liouvillian& liou, const PulseEnvelope& pulse) {
  return std::min(pulse.width() / 200.0, 0.4 / std::max(liou.norm_bound(), 1e-300));
}

/// Grid from the start of the pulse support to `extra` ns after its end.
inline std::vector<double> pulse_grid(const PulseEnvelope& pulse, double dt, double extra = 0.0) {
  const auto [a, b] = pulse.support();
  return uniform_grid(a, b + extra, dt);
}

/// The coupled level equations for one field state: level bookkeeping,
/// right-hand side and reconstruction of the physical state.
class HierarchySystem {
 public:
  HierarchySystem(const Liouvillian& liou, const PulseEnvelope& pulse, const FieldState& field, bool symmetric)
      : liou_(&liou), pulse_(&pulse), field_(field), sym_(symmetric), d_(liou.spec().dim) {
    levels_ = detail::needed_levels(field, symmetric);
    for (std::size_t i = 0; i < levels_.size(); ++i) slot_[levels_[i]] = i;
    rho0_ = vectorize(liou.spec().initial_state);
    static_ground_ = liou.apply(rho0_).cwiseAbs().maxCoeff() <= 1e-14 * std::max(1.0, liou.norm_bound());
  }

  const std::vector<LevelIndex>& levels() const { return levels_; }
  bool symmetric() const { return sym_; }
  Eigen::Index hilbert_dim() const { return d_; }

  std::vector<ComplexVector> initial() const {
    std::vector<ComplexVector> y(levels_.size());
    for (std::size_t i = 0; i < levels_.size(); ++i)
      y[i] = levels_[i].first == levels_[i].second ? rho0_ : ComplexVector::Zero(d_ * d_);
    return y;
  }

  /// ϱ^{a,b} within a level vector, using the adjoint for the mirrored pair.
  ComplexVector get(const std::vector<ComplexVector>& ys, int a, int b) const {
    if (auto it = slot_.find({a, b}); it != slot_.end()) return ys[it->second];
    if (sym_)
      if (auto it = slot_.find({b, a}); it != slot_.end()) return detail::vec_adjoint(ys[it->second], d_);
    throw Error("HierarchySystem: internal level lookup failed");
  }

  std::vector<ComplexVector> rhs(double t, const std::vector<ComplexVector>& ys) const {
    const Complex e = pulse_->amplitude(t);
    std::vector<ComplexVector> dy(ys.size());
    for (std::size_t i = 0; i < levels_.size(); ++i) {
      const auto [n, m] = levels_[i];
      if (n == 0 && m == 0 && static_ground_) {
        dy[i] = ComplexVector::Zero(d_ * d_);
        continue;
      }
      ComplexVector acc = liou_->apply(ys[i]);
      if (e != 0.0) {
        if (n > 0) acc += (std::sqrt(double(n)) * e) * liou_->apply_lplus(get(ys, n - 1, m));
        if (m > 0) acc += (std::sqrt(double(m)) * std::conj(e)) * liou_->apply_lminus(get(ys, n, m - 1));
        if (n > 0 && m > 0 && liou_->has_scattering())
          acc += (std::sqrt(double(n) * m) * std::norm(e)) * liou_->apply_ssuper(get(ys, n - 1, m - 1));
      }
      dy[i] = std::move(acc);
    }
    return dy;
  }

  /// Σ c_{N,M} ϱ^{N,M}.
  ComplexVector physical(const std::vector<ComplexVector>& ys) const {
    ComplexVector rho = ComplexVector::Zero(d_ * d_);
    for (int n = 0; n <= field_.n_max(); ++n)
      for (int m = 0; m <= field_.n_max(); ++m) {
        const Complex c = field_.coeffs(n, m);
        if (c == 0.0) continue;
        rho += c * get(ys, n, m);
      }
    return rho;
  }

  /// One classical RK4 step of length h from time t.
  void rk4_step(double t, double h, std::vector<ComplexVector>& y) const {
    rk4(t, h, y, [&](double s, const std::vector<ComplexVector>& v) { return rhs(s, v); });
  }

  /// RK4 step for the right-hand side plus an elementwise term diag∘ϱ on
  /// every level.
  void rk4_step(double t, double h, std::vector<ComplexVector>& y, const RealVector& diag) const {
    rk4(t, h, y, [&](double s, const std::vector<ComplexVector>& v) {
      auto dy = rhs(s, v);
      for (std::size_t i = 0; i < dy.size(); ++i) dy[i].array() += diag.array() * v[i].array();
      return dy;
    });
  }

 private:
  template <class F>
  static void rk4(double t, double h, std::vector<ComplexVector>& y, F&& f) {
    auto axpy = [](const std::vector<ComplexVector>& base, const std::vector<ComplexVector>& dir, double s) {
      std::vector<ComplexVector> out(base.size());
      for (std::size_t i = 0; i < base.size(); ++i) out[i] = base[i] + s * dir[i];
      return out;
    };
    const auto k1 = f(t, y);
    const auto k2 = f(t + 0.5 * h, axpy(y, k1, 0.5 * h));
    const auto k3 = f(t + 0.5 * h, axpy(y, k2, 0.5 * h));
    const auto k4 = f(t + h, axpy(y, k3, h));
    for (std::size_t i = 0; i < y.size(); ++i) y[i] += (h / 6.0) * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
  }

  const Liouvillian* liou_;
  const PulseEnvelope* pulse_;
  FieldState field_;
  bool sym_;
  Eigen::Index d_;
  std::vector<LevelIndex> levels_;
  std::map<LevelIndex, std::size_t> slot_;
  ComplexVector rho0_;
  bool static_ground_ = false;
};

/// Checks the shared preconditions of propagate and unravel.
inline void require_propagation_inputs(const Liouvillian& liou, const PulseEnvelope& pulse, const FieldState& field,
                                       std::span<const double> grid, int max_photons, bool allow_truncated,
                                       const char* what) {
  require_increasing(grid, what);
  if (field.n_max() > max_photons)
    throw PreconditionError(std::string(what) + ": field photon cap " + std::to_string(field.n_max()) +
                            " exceeds " + std::to_string(max_photons));
  if (!field.valid(1e-8))
    throw PreconditionError(std::string(what) + ": field coefficients are not a density matrix");
  if (grid.size() > 1) require_stable_grid(liou, grid, what);
  if (!allow_truncated && grid.front() > pulse.support().first + 1e-9 * pulse.width())
    throw PreconditionError(std::string(what) + ": grid starts after the beginning of the pulse support");
}

/// Integrates all needed levels with classical RK4 on the shared grid.
inline PropagationResult propagate(const Liouvillian& liou, const PulseEnvelope& pulse, const FieldState& field,
                                   std::span<const double> grid, const PropagateOptions& opt = {}) {
  require_propagation_inputs(liou, pulse, field, grid, opt.max_photons, opt.allow_truncated_pulse, "propagate");
  const DetectorSpec& spec = liou.spec();
  const Eigen::Index d = spec.dim;
  const HierarchySystem sys(liou, pulse, field, opt.exploit_symmetry);
  const auto& levels = sys.levels();
  auto y = sys.initial();

  std::size_t stride = opt.state_stride;
  if (stride == 0) stride = d <= 16 ? 1 : std::max<std::size_t>(1, grid.size() / 400);

  PropagationResult res;
  auto& tr = res.trajectory;
  auto& hi = res.hierarchy;
  tr.grid.assign(grid.begin(), grid.end());
  tr.populations.resize(static_cast<Eigen::Index>(grid.size()), d);
  tr.expectations.assign(spec.amplifiers.size(), std::vector<double>(grid.size(), 0.0));
  tr.trace.resize(grid.size());
  hi.n_max = field.n_max();
  hi.hilbert_dim = d;
  hi.symmetric = opt.exploit_symmetry;
  hi.levels = levels;

  std::vector<RealVector> xdiag;
  for (const auto& a : spec.amplifiers) xdiag.push_back(ComplexMatrix(a.observable(d)).diagonal().real());

  auto record = [&](std::size_t k, const std::vector<ComplexVector>& ys) {
    const ComplexVector rho = sys.physical(ys);
    double trc = 0.0;
    for (Eigen::Index i = 0; i < d; ++i) {
      const double p = rho(vec_index(i, i, d)).real();
      tr.populations(static_cast<Eigen::Index>(k), i) = p;
      trc += p;
    }
    tr.trace[k] = trc;
    for (std::size_t c = 0; c < xdiag.size(); ++c)
      tr.expectations[c][k] = tr.populations.row(static_cast<Eigen::Index>(k)).dot(xdiag[c]);
    if (k % stride == 0 || k + 1 == grid.size()) {
      tr.stored_index.push_back(k);
      tr.states.push_back(rho);
      if (opt.store_levels) {
        hi.stored_times.push_back(grid[k]);
        for (std::size_t i = 0; i < levels.size(); ++i) hi.stored[levels[i]].push_back(ys[i]);
      }
    }
  };

  record(0, y);
  for (std::size_t k = 1; k < grid.size(); ++k) {
    sys.rk4_step(grid[k - 1], grid[k] - grid[k - 1], y);
    if (!y.empty() && !y.back().allFinite()) throw NumericError("propagate: non-finite state (grid too coarse?)");
    record(k, y);
  }
  return res;
}

inline PropagationResult propagate(const DetectorSpec& spec, const PulseEnvelope& pulse, const FieldState& field,
                                   std::span<const double> grid, const PropagateOptions& opt = {}) {
  return propagate(Liouvillian::build(spec, pulse.carrier()), pulse, field, grid, opt);
}

/// x̄†ρ̄(t) over the trajectory. Diagonal x̄ uses the populations at every
/// grid time; other x̄ need every state stored (stride 1).
inline std::vector<double> expectation(const ComplexVector& xbar, const StateTrajectory& tr) {
  const Eigen::Index d = tr.dim();
  if (xbar.size() != d * d) throw DimensionError("expectation: vector length does not match the trajectory");
  const ComplexMatrix x = devectorize(xbar);
  std::vector<double> out(tr.size(), 0.0);
  if (is_diagonal(x, 0.0)) {
    for (std::size_t k = 0; k < tr.size(); ++k) {
      Complex acc = 0.0;
      for (Eigen::Index i = 0; i < d; ++i) acc += std::conj(x(i, i)) * tr.populations(static_cast<Eigen::Index>(k), i);
      if (std::abs(acc.imag()) > 1e-8) throw NumericError("expectation: non-real expectation value");
      out[k] = acc.real();
    }
    return out;
  }
  if (tr.states.size() != tr.size())
    throw PreconditionError("expectation: non-diagonal observable needs every state stored (state_stride = 1)");
  for (std::size_t k = 0; k < tr.size(); ++k) {
    const Complex v = xbar.dot(tr.states[k]);
    if (std::abs(v.imag()) > 1e-8) throw NumericError("expectation: non-real expectation value");
    out[k] = v.real();
  }
  return out;
}

// ---------------------------------------------------------------------------
// two-photon factorization for degenerate arrays

struct FactorizationReport {
  double single_photon_efficiency = 0.0;  // e₁ = 4nγ²Γ²/(nγ²+Γ²)²
  double second_photon_efficiency = 0.0;  // e₂ with n−1 free elements
  double single_level_deviation = 0.0;    // max |P_C(ϱ¹¹) − e₁F(t)|
  double double_occupancy_deviation = 0.0;  // max |P_CC(ϱ²²) − e₁e₂F(t)²|
  double single_occupancy_deviation = 0.0;  // max |P_C(ϱ²²) − sequential model|
  double max_deviation = 0.0;
  double terminal_two_photon = 0.0;  // P_CC(ϱ²²) at the last grid time
};

/// Compares directly propagated one- and two-photon states of a degenerate
/// array against sequential absorption: each photon arrives with the
/// intensity profile and is absorbed with the efficiency of the currently
/// free elements.
inline FactorizationReport two_photon_factorization_check(const DetectorSpec& spec, const PulseEnvelope& pulse,
                                                          std::span<const double> grid) {
  if (spec.architecture != Architecture::degenerate_array)
    throw PreconditionError("two_photon_factorization_check: needs a degenerate-array detector");
  const int n = static_cast<int>(spec.parameters.at("n"));
  const double g2 = spec.parameters.at("gamma2");
  const double G2 = spec.parameters.at("Gamma2");
  auto eff = [&](int free) {
    if (free <= 0) return 0.0;
    const double a = free * g2;
    return 4.0 * a * G2 / ((a + G2) * (a + G2));
  };
  FactorizationReport r;
  r.single_photon_efficiency = eff(n);
  r.second_photon_efficiency = eff(n - 1);
  const double e1 = r.single_photon_efficiency, e2 = r.second_photon_efficiency;

  std::vector<Eigen::Index> one_c, two_c;
  for (std::size_t i = 0; i < spec.labels.size(); ++i) {
    const auto c = std::count(spec.labels[i].begin(), spec.labels[i].end(), 'C');
    if (c == 1) one_c.push_back(static_cast<Eigen::Index>(i));
    if (c == 2) two_c.push_back(static_cast<Eigen::Index>(i));
  }
  const auto lv = Liouvillian::build(spec, pulse.carrier());
  const auto p1 = propagate(lv, pulse, FieldState::fock(1), grid).trajectory;
  const auto p2 = propagate(lv, pulse, FieldState::fock(2), grid).trajectory;
  const auto c1 = p1.projector_population(one_c);
  const auto c21 = p2.projector_population(one_c);
  const auto c22 = p2.projector_population(two_c);
  for (std::size_t k = 0; k < grid.size(); ++k) {
    const double f = pulse.cumulative(grid[k]);
    r.single_level_deviation = std::max(r.single_level_deviation, std::abs(c1[k] - e1 * f));
    r.double_occupancy_deviation = std::max(r.double_occupancy_deviation, std::abs(c22[k] - e1 * e2 * f * f));
    const double single = 2.0 * f * (1.0 - f) * e1 + f * f * (e1 * (1.0 - e2) + (1.0 - e1) * e1);
    r.single_occupancy_deviation = std::max(r.single_occupancy_deviation, std::abs(c21[k] - single));
  }
  r.max_deviation =
      std::max({r.single_level_deviation, r.double_occupancy_deviation, r.single_occupancy_deviation});
  r.terminal_two_photon = c22.back();
  return r;
}

}  // namespace qpd
