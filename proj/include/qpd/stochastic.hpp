#pragma once

// Diffusive unraveling of the hierarchy, windowed measurement records, hit
// detection and Monte Carlo aggregation.

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <exception>
#include <tuple>
#include <optional>
#include <thread>
#include <vector>

#include "qpd/hierarchy.hpp"
#include "qpd/rng.hpp"

namespace qpd {

enum class WindowMode { sliding, disjoint };

/// euler_maruyama: explicit Itô step of the nonlinear conditioning term.
/// exponential: RK4 drift without the amplifier dephasing, then the exact
/// diagonal measurement factor exp(c dy − c² dt) applied as a congruence;
/// keeps the state positive at strong measurement.
enum class SdeScheme { euler_maruyama, exponential };

inline const char* to_string(WindowMode m) { return m == WindowMode::sliding ? "sliding" : "disjoint"; }

/// Signal of one amplifier channel on a uniform grid.
struct MeasurementRecord {
  std::size_t channel = 0;
  std::vector<double> grid;
  std::vector<double> increments;   // dI over [t_k, t_k+1), size grid−1
  std::vector<double> integrated;   // I(t_k); zero before the first full window
  std::vector<std::size_t> samples;  // grid indices where I(t_k) is defined
  double window = 0.0;               // t_m actually used: window_steps·dt
  std::size_t window_steps = 0;
  WindowMode mode = WindowMode::sliding;
  std::uint64_t seed = 0;
  double dt = 0.0;
};

struct HitEvent {
  std::size_t channel = 0;
  double time = 0.0;       // grid time of the first sample with I ≥ I_hit
  std::size_t index = 0;   // grid index of that sample
  double dwell = 0.0;      // time the signal stays at or above threshold
};

struct UnravelOptions {
  WindowMode windows = WindowMode::sliding;
  SdeScheme scheme = SdeScheme::exponential;
  int max_photons = 6;
  bool allow_truncated_pulse = false;
};

struct UnravelResult {
  StateTrajectory trajectory;               // conditioned physical state
  std::vector<MeasurementRecord> records;   // one per amplifier
  std::vector<double> wiener_sum;           // Σ_k dW_k/√dt per channel
  std::size_t steps = 0;
};

namespace detail {

inline double uniform_step(std::span<const double> grid, const char* what) {
  if (grid.size() < 2) throw PreconditionError(std::string(what) + ": grid needs at least two points");
  const double h = (grid.back() - grid.front()) / static_cast<double>(grid.size() - 1);
  for (std::size_t k = 1; k < grid.size(); ++k)
    if (std::abs(grid[k] - grid[k - 1] - h) > 1e-9 * std::max(1.0, std::abs(h)) + 1e-12 * std::abs(grid[k]))
      throw PreconditionError(std::string(what) + ": grid must be uniform");
  return h;
}

inline std::size_t window_steps(double t_m, double h) {
  return std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(t_m / h)));
}

/// Running window average of increments.
class WindowIntegrator {
 public:
  WindowIntegrator(std::size_t steps, double h, WindowMode mode)
      : w_(steps), len_(static_cast<double>(steps) * h), mode_(mode), ring_(steps, 0.0) {}

  /// Adds the increment ending at grid index `k+1`; returns I(t_{k+1}) when a
  /// sample is due there.
  std::optional<double> push(std::size_t k, double di) {
    const std::size_t pos = k % w_;
    sum_ += di - ring_[pos];
    ring_[pos] = di;
    const std::size_t end = k + 1;
    if (end < w_) return std::nullopt;
    if (end % w_ == 0) sum_ = exact_sum();  // bound accumulated rounding
    if (mode_ == WindowMode::disjoint && end % w_ != 0) return std::nullopt;
    return sum_ / len_;
  }

  double length() const { return len_; }

 private:
  double exact_sum() const {
    double s = 0.0;
    for (double v : ring_) s += v;
    return s;
  }
  std::size_t w_;
  double len_;
  WindowMode mode_;
  std::vector<double> ring_;
  double sum_ = 0.0;
};

/// First-crossing tracker with dwell measurement.
class HitTracker {
 public:
  explicit HitTracker(double threshold) : threshold_(threshold) {}

  void feed(std::size_t index, double time, double value, double spacing) {
    if (done_) return;
    if (!hit_) {
      if (value >= threshold_) {
        hit_ = HitEvent{0, time, index, spacing};
        open_ = true;
      }
      return;
    }
    if (open_ && value >= threshold_) {
      hit_->dwell += spacing;
    } else {
      open_ = false;
      done_ = true;
    }
  }

  const std::optional<HitEvent>& hit() const { return hit_; }

 private:
  double threshold_;
  std::optional<HitEvent> hit_;
  bool open_ = false;
  bool done_ = false;
};

/// Conditioned integration of one trajectory. `on_step(k, dI, dW, rho, trace)`
/// is called after every step k → k+1 with the channel increments, the new
/// normalized physical state and the trace before the measurement
/// normalization.
class ConditionedIntegrator {
 public:
  ConditionedIntegrator(const Liouvillian& liou, const PulseEnvelope& pulse, const FieldState& field,
                        std::span<const double> grid, const UnravelOptions& opt)
      : liou_(liou), sys_(liou, pulse, field, true), grid_(grid.begin(), grid.end()), scheme_(opt.scheme) {
    const auto& spec = liou.spec();
    require_propagation_inputs(liou, pulse, field, grid, opt.max_photons, opt.allow_truncated_pulse, "unravel");
    h_ = uniform_step(grid, "unravel");
    if (spec.amplifiers.empty()) throw PreconditionError("unravel: detector has no amplifier channel");
    const Eigen::Index d = spec.dim;
    double max_rate = 0.0;
    for (std::size_t c = 0; c < spec.amplifiers.size(); ++c) {
      const auto& a = spec.amplifiers[c];
      if (!(a.rate > 0.0))
        throw PreconditionError("unravel: channel " + std::to_string(c) + " has k = 0, no unraveling possible");
      if (!(a.window > 0.0)) throw PreconditionError("unravel: channel window t_m must be positive");
      if (h_ > a.window / 20.0 * (1.0 + 1e-9))
        throw PreconditionError("unravel: dt = " + std::to_string(h_) + " exceeds t_m/20 = " +
                                std::to_string(a.window / 20.0) + " for channel " + std::to_string(c));
      const double chi = a.max_weight();
      max_rate = std::max(max_rate, 2.0 * a.rate * chi * chi);
      RealVector x = RealVector::Zero(d);
      for (std::size_t j = 0; j < a.monitored.size(); ++j) x(a.monitored[j]) += a.weights[j];
      // (X ϱ + ϱ X) acts elementwise on the column-stacked vector
      RealVector pair(d * d);
      for (Eigen::Index col = 0; col < d; ++col)
        for (Eigen::Index row = 0; row < d; ++row) pair(vec_index(row, col, d)) = x(row) + x(col);
      const double c2 = 2.0 * a.rate;
      if (dephase_.size() == 0) {
        dephase_ = RealVector::Zero(d * d);
        csq_ = RealVector::Zero(d * d);
      }
      for (Eigen::Index col = 0; col < d; ++col)
        for (Eigen::Index row = 0; row < d; ++row) {
          const Eigen::Index i = vec_index(row, col, d);
          dephase_(i) += 0.5 * c2 * (x(row) - x(col)) * (x(row) - x(col));
          csq_(i) += c2 * (x(row) * x(row) + x(col) * x(col));
        }
      xdiag_.push_back(std::move(x));
      xpair_.push_back(std::move(pair));
      sqrt2k_.push_back(std::sqrt(2.0 * a.rate));
      inv_sqrt8k_.push_back(1.0 / std::sqrt(8.0 * a.rate));
    }
    if (max_rate > 0.0 && h_ > 1.0 / (10.0 * max_rate) * (1.0 + 1e-9))
      throw PreconditionError("unravel: dt = " + std::to_string(h_) + " exceeds 1/(10·max 2kχ²) = " +
                              std::to_string(1.0 / (10.0 * max_rate)));
    diag_idx_.resize(static_cast<std::size_t>(d));
    for (Eigen::Index i = 0; i < d; ++i) diag_idx_[static_cast<std::size_t>(i)] = vec_index(i, i, d);
  }

  double step() const { return h_; }
  std::size_t channels() const { return xdiag_.size(); }
  const std::vector<double>& grid() const { return grid_; }
  Eigen::Index hilbert_dim() const { return liou_.spec().dim; }

  RealVector populations(const ComplexVector& rho) const {
    RealVector p(static_cast<Eigen::Index>(diag_idx_.size()));
    for (std::size_t i = 0; i < diag_idx_.size(); ++i) p(static_cast<Eigen::Index>(i)) = rho(diag_idx_[i]).real();
    return p;
  }

  double trace_of(const ComplexVector& rho) const {
    double t = 0.0;
    for (auto idx : diag_idx_) t += rho(idx).real();
    return t;
  }

  template <class OnStep>
  void run(std::uint64_t seed, OnStep&& on_step) const {
    const CounterRng rng(seed);
    const std::size_t nc = channels();
    auto y = sys_.initial();
    ComplexVector rho = sys_.physical(y);
    std::vector<double> dI(nc), dW(nc), xexp(nc);
    const double sh = std::sqrt(h_);
    for (std::size_t k = 0; k + 1 < grid_.size(); ++k) {
      const RealVector p = populations(rho);
      for (std::size_t c = 0; c < nc; ++c) {
        xexp[c] = p.dot(xdiag_[c]);
        dW[c] = sh * rng.normal(c, k);
        dI[c] = xexp[c] * h_ + dW[c] * inv_sqrt8k_[c];
      }
      double trc = 0.0;
      if (scheme_ == SdeScheme::euler_maruyama) {
        const auto drift = sys_.rhs(grid_[k], y);
        for (std::size_t i = 0; i < y.size(); ++i) {
          ComplexVector noise = ComplexVector::Zero(y[i].size());
          for (std::size_t c = 0; c < nc; ++c) {
            const double s = sqrt2k_[c] * dW[c];
            noise.array() += s * (xpair_[c].array() - 2.0 * xexp[c]) * y[i].array();
          }
          y[i] += h_ * drift[i] + noise;
        }
        trc = trace_of(sys_.physical(y));
      } else {
        // deterministic part by RK4, amplifier dephasing left to the factor below
        sys_.rk4_step(grid_[k], h_, y, dephase_);
        trc = trace_of(sys_.physical(y));
        RealVector expo = -h_ * csq_;
        for (std::size_t c = 0; c < nc; ++c) {
          const double dy = 2.0 * sqrt2k_[c] * xexp[c] * h_ + dW[c];
          expo += (sqrt2k_[c] * dy) * xpair_[c];
        }
        // shift keeps the factor bounded; removed again by the normalization
        const RealVector factor = (expo.array() - expo.maxCoeff()).exp().matrix();
        for (auto& v : y) v.array() *= factor.array();
      }
      rho = sys_.physical(y);
      const double norm = trace_of(rho);
      if (!(norm > 0.0) || !std::isfinite(norm) || !std::isfinite(trc))
        throw NumericError("unravel: conditioned state lost its trace (reduce dt)");
      const double inv = 1.0 / norm;
      for (auto& v : y) v *= inv;
      rho *= inv;
      on_step(k, std::span<const double>(dI), std::span<const double>(dW), rho, trc);
    }
  }

 private:
  const Liouvillian& liou_;
  HierarchySystem sys_;
  std::vector<double> grid_;
  SdeScheme scheme_;
  double h_ = 0.0;
  std::vector<RealVector> xdiag_, xpair_;
  RealVector dephase_, csq_;
  std::vector<double> sqrt2k_, inv_sqrt8k_;
  std::vector<Eigen::Index> diag_idx_;
};

}  // namespace detail

/// One conditioned trajectory with its measurement records.
inline UnravelResult unravel(const Liouvillian& liou, const PulseEnvelope& pulse, const FieldState& field,
                             std::span<const double> grid, std::uint64_t seed, const UnravelOptions& opt = {}) {
  const detail::ConditionedIntegrator integ(liou, pulse, field, grid, opt);
  const auto& spec = liou.spec();
  const Eigen::Index d = spec.dim;
  const std::size_t nc = integ.channels();
  const double h = integ.step();

  UnravelResult res;
  auto& tr = res.trajectory;
  tr.grid.assign(grid.begin(), grid.end());
  tr.populations.resize(static_cast<Eigen::Index>(grid.size()), d);
  tr.expectations.assign(nc, std::vector<double>(grid.size(), 0.0));
  tr.trace.assign(grid.size(), 1.0);
  res.wiener_sum.assign(nc, 0.0);

  std::vector<detail::WindowIntegrator> win;
  for (std::size_t c = 0; c < nc; ++c) {
    MeasurementRecord r;
    r.channel = c;
    r.grid = tr.grid;
    r.increments.resize(grid.size() - 1);
    r.integrated.assign(grid.size(), 0.0);
    r.window_steps = detail::window_steps(spec.amplifiers[c].window, h);
    r.window = static_cast<double>(r.window_steps) * h;
    r.mode = opt.windows;
    r.seed = seed;
    r.dt = h;
    win.emplace_back(r.window_steps, h, opt.windows);
    res.records.push_back(std::move(r));
  }

  auto store = [&](std::size_t k, const ComplexVector& rho, double trc) {
    const RealVector p = integ.populations(rho);
    tr.populations.row(static_cast<Eigen::Index>(k)) = p.transpose();
    tr.trace[k] = trc;
    for (std::size_t c = 0; c < nc; ++c) {
      double x = 0.0;
      for (std::size_t j = 0; j < spec.amplifiers[c].monitored.size(); ++j)
        x += spec.amplifiers[c].weights[j] * p(spec.amplifiers[c].monitored[j]);
      tr.expectations[c][k] = x;
    }
  };
  store(0, vectorize(spec.initial_state), 1.0);
  tr.stored_index.push_back(0);
  tr.states.push_back(vectorize(spec.initial_state));

  integ.run(seed, [&](std::size_t k, std::span<const double> dI, std::span<const double> dW, const ComplexVector& rho,
                      double trc) {
    for (std::size_t c = 0; c < nc; ++c) {
      auto& r = res.records[c];
      r.increments[k] = dI[c];
      res.wiener_sum[c] += dW[c] / std::sqrt(h);
      if (auto v = win[c].push(k, dI[c])) {
        r.integrated[k + 1] = *v;
        r.samples.push_back(k + 1);
      }
    }
    store(k + 1, rho, trc);
    if (k + 2 == grid.size()) {
      tr.stored_index.push_back(k + 1);
      tr.states.push_back(rho);
    }
  });
  res.steps = grid.size() - 1;
  return res;
}

inline UnravelResult unravel(const DetectorSpec& spec, const PulseEnvelope& pulse, const FieldState& field,
                             std::span<const double> grid, std::uint64_t seed, const UnravelOptions& opt = {}) {
  return unravel(Liouvillian::build(spec, pulse.carrier()), pulse, field, grid, seed, opt);
}

/// Sum of all channel records, as read by a single summing amplifier.
inline MeasurementRecord combine_records(const std::vector<MeasurementRecord>& records) {
  if (records.empty()) throw PreconditionError("combine_records: no records");
  MeasurementRecord out = records.front();
  out.channel = 0;
  for (std::size_t c = 1; c < records.size(); ++c) {
    const auto& r = records[c];
    if (r.grid.size() != out.grid.size() || r.window_steps != out.window_steps || r.mode != out.mode)
      throw DimensionError("combine_records: records differ in grid or window");
    for (std::size_t k = 0; k < out.increments.size(); ++k) out.increments[k] += r.increments[k];
    for (std::size_t k = 0; k < out.integrated.size(); ++k) out.integrated[k] += r.integrated[k];
  }
  return out;
}

/// First crossing of I_hit per record; at most one hit per channel.
inline std::vector<HitEvent> detect_hits(const std::vector<MeasurementRecord>& records,
                                         const std::vector<double>& thresholds) {
  if (thresholds.size() != records.size())
    throw DimensionError("detect_hits: one threshold per record is required");
  std::vector<HitEvent> hits;
  for (std::size_t c = 0; c < records.size(); ++c) {
    const auto& r = records[c];
    const double spacing = r.mode == WindowMode::sliding ? r.dt : r.window;
    detail::HitTracker t(thresholds[c]);
    for (auto k : r.samples) t.feed(k, r.grid[k], r.integrated[k], spacing);
    if (t.hit()) {
      HitEvent e = *t.hit();
      e.channel = r.channel;
      hits.push_back(e);
    }
  }
  return hits;
}

// ---------------------------------------------------------------------------
// Monte Carlo

struct MonteCarloOptions {
  UnravelOptions unravel;
  unsigned threads = 0;  // 0: hardware concurrency
  std::size_t block = 16;  // trajectories per work unit; fixes the reduction order
  std::optional<double> detect_from;  // hits outside [from, until] are ignored
  std::optional<double> detect_until;
  double bin_width = 0.1;  // ns
  bool accumulate_populations = false;
  bool keep_hits = true;
};

struct Histogram {
  double origin = 0.0;
  double bin_width = 0.0;
  std::vector<std::size_t> counts;
};

struct EnsembleResult {
  std::size_t n_traj = 0;
  std::uint64_t master_seed = 0;
  std::vector<std::vector<HitEvent>> hits;  // per trajectory, within the detection interval
  std::size_t detected = 0;
  double efficiency = 0.0;
  double standard_error = 0.0;
  Histogram detection_times;  // first hit per detected trajectory
  std::vector<double> wiener_mean;  // per channel, units of √dt
  std::size_t steps = 0;
  Eigen::MatrixXd mean_populations;   // time × d (when accumulated)
  Eigen::MatrixXd population_stderr;  // standard error of the mean
};

/// Empirical efficiency and its binomial standard error.
inline std::pair<double, double> binomial_estimate(std::size_t successes, std::size_t n) {
  if (n == 0) throw PreconditionError("binomial_estimate: no trials");
  const double p = static_cast<double>(successes) / static_cast<double>(n);
  return {p, std::sqrt(p * (1.0 - p) / static_cast<double>(n))};
}

inline EnsembleResult monte_carlo(const Liouvillian& liou, const PulseEnvelope& pulse, const FieldState& field,
                                  std::span<const double> grid, std::size_t n_traj, std::uint64_t master_seed,
                                  const MonteCarloOptions& opt = {}) {
  if (n_traj < 1) throw PreconditionError("monte_carlo: n_traj must be at least 1");
  if (!(opt.bin_width > 0.0)) throw PreconditionError("monte_carlo: bin width must be positive");
  const detail::ConditionedIntegrator integ(liou, pulse, field, grid, opt.unravel);
  const auto& spec = liou.spec();
  const std::size_t nc = integ.channels();
  const double h = integ.step();
  const Eigen::Index d = spec.dim;
  const std::size_t nt = grid.size();
  const bool combined = spec.combine_channels && nc > 1;
  const std::size_t n_sig = combined ? 1 : nc;
  const double from = opt.detect_from.value_or(grid.front());
  const double until = opt.detect_until.value_or(grid.back());

  struct Block {
    std::vector<std::vector<HitEvent>> hits;
    std::vector<double> wiener;
    Eigen::MatrixXd pop_sum, pop_sq;
  };
  const std::size_t bsize = std::max<std::size_t>(1, opt.block);
  const std::size_t n_blocks = (n_traj + bsize - 1) / bsize;
  std::vector<Block> blocks(n_blocks);

  auto run_block = [&](std::size_t b) {
    Block& out = blocks[b];
    out.wiener.assign(nc, 0.0);
    if (opt.accumulate_populations) {
      out.pop_sum = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(nt), d);
      out.pop_sq = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(nt), d);
    }
    const std::size_t lo = b * bsize, hi = std::min(n_traj, lo + bsize);
    for (std::size_t j = lo; j < hi; ++j) {
      std::vector<detail::WindowIntegrator> win;
      std::vector<detail::HitTracker> track;
      std::vector<double> spacing;
      for (std::size_t c = 0; c < n_sig; ++c) {
        const auto& a = spec.amplifiers[c];
        const std::size_t w = detail::window_steps(a.window, h);
        win.emplace_back(w, h, opt.unravel.windows);
        track.emplace_back(a.threshold);
        spacing.push_back(opt.unravel.windows == WindowMode::sliding ? h : static_cast<double>(w) * h);
      }
      if (opt.accumulate_populations) {
        const RealVector p0 = integ.populations(vectorize(spec.initial_state));
        out.pop_sum.row(0) += p0.transpose();
        out.pop_sq.row(0) += p0.cwiseAbs2().transpose();
      }
      integ.run(trajectory_seed(master_seed, j), [&](std::size_t k, std::span<const double> dI,
                                                     std::span<const double> dW, const ComplexVector& rho, double) {
        for (std::size_t c = 0; c < nc; ++c) out.wiener[c] += dW[c] / std::sqrt(h);
        const double t = grid[k + 1];
        for (std::size_t c = 0; c < n_sig; ++c) {
          double di = dI[c];
          if (combined)
            for (std::size_t e = 1; e < nc; ++e) di += dI[e];
          if (auto v = win[c].push(k, di))
            if (t >= from && t <= until) track[c].feed(k + 1, t, *v, spacing[c]);
        }
        if (opt.accumulate_populations) {
          const RealVector p = integ.populations(rho);
          out.pop_sum.row(static_cast<Eigen::Index>(k + 1)) += p.transpose();
          out.pop_sq.row(static_cast<Eigen::Index>(k + 1)) += p.cwiseAbs2().transpose();
        }
      });
      std::vector<HitEvent> hv;
      for (std::size_t c = 0; c < n_sig; ++c)
        if (track[c].hit()) {
          HitEvent e = *track[c].hit();
          e.channel = c;
          hv.push_back(e);
        }
      out.hits.push_back(std::move(hv));
    }
  };

  unsigned n_workers = opt.threads ? opt.threads : std::max(1u, std::thread::hardware_concurrency());
  n_workers = static_cast<unsigned>(std::min<std::size_t>(n_workers, n_blocks));
  if (n_workers <= 1) {
    for (std::size_t b = 0; b < n_blocks; ++b) run_block(b);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::exception_ptr> errors(n_workers);
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < n_workers; ++w)
      pool.emplace_back([&, w] {
        try {
          for (std::size_t b = next++; b < n_blocks; b = next++) run_block(b);
        } catch (...) {
          errors[w] = std::current_exception();
          next = n_blocks;
        }
      });
    for (auto& t : pool) t.join();
    for (auto& e : errors)
      if (e) std::rethrow_exception(e);
  }

  EnsembleResult res;
  res.n_traj = n_traj;
  res.master_seed = master_seed;
  res.steps = nt - 1;
  res.wiener_mean.assign(nc, 0.0);
  res.detection_times.origin = from;
  res.detection_times.bin_width = opt.bin_width;
  res.detection_times.counts.assign(
      static_cast<std::size_t>(std::ceil((until - from) / opt.bin_width)) + 1, 0);
  if (opt.accumulate_populations) {
    res.mean_populations = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(nt), d);
    res.population_stderr = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(nt), d);
  }
  Eigen::MatrixXd sq;
  if (opt.accumulate_populations) sq = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(nt), d);
  for (auto& b : blocks) {
    for (std::size_t c = 0; c < nc; ++c) res.wiener_mean[c] += b.wiener[c];
    if (opt.accumulate_populations) {
      res.mean_populations += b.pop_sum;
      sq += b.pop_sq;
    }
    for (auto& hv : b.hits) {
      if (!hv.empty()) {
        ++res.detected;
        double first = hv.front().time;
        for (const auto& e : hv) first = std::min(first, e.time);
        const auto bin = static_cast<std::size_t>(std::floor((first - from) / opt.bin_width));
        ++res.detection_times.counts[std::min(bin, res.detection_times.counts.size() - 1)];
      }
      if (opt.keep_hits) res.hits.push_back(std::move(hv));
    }
  }
  const double total = static_cast<double>(n_traj) * static_cast<double>(nt - 1);
  for (auto& m : res.wiener_mean) m /= total;
  if (opt.accumulate_populations) {
    const double n = static_cast<double>(n_traj);
    res.mean_populations /= n;
    const Eigen::MatrixXd var =
        (sq / n - res.mean_populations.cwiseAbs2()).cwiseMax(0.0) * (n > 1.0 ? n / (n - 1.0) : 1.0);
    res.population_stderr = (var / n).cwiseSqrt();
  }
  std::tie(res.efficiency, res.standard_error) = binomial_estimate(res.detected, n_traj);
  return res;
}

inline EnsembleResult monte_carlo(const DetectorSpec& spec, const PulseEnvelope& pulse, const FieldState& field,
                                  std::span<const double> grid, std::size_t n_traj, std::uint64_t master_seed,
                                  const MonteCarloOptions& opt = {}) {
  return monte_carlo(Liouvillian::build(spec, pulse.carrier()), pulse, field, grid, n_traj, master_seed, opt);
}

}  // namespace qpd
