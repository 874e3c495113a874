#pragma once

// JSON run configuration: schema checks with field-path diagnostics and
// construction of detector, pulse, field and grid.
//
// Units: time ns, frequencies rad/ns, rates ns⁻¹ (γ², Γ², ζ², κ², δ², k),
// amplifier weights χ in signal units.

#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "qpd/hierarchy.hpp"
#include "qpd/metrics.hpp"
#include "qpd/stochastic.hpp"

namespace qpd::config {

using nlohmann::json;

/// Checked view of one JSON object with its location for diagnostics.
class Node {
 public:
  Node(const json& j, std::string path) : j_(&j), path_(std::move(path)) {
    if (!j.is_object()) throw ConfigError(path_, "expected an object");
  }

  const std::string& path() const { return path_; }
  bool has(const std::string& key) const { return j_->contains(key); }
  const json& raw(const std::string& key) const { return j_->at(key); }
  std::string at(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  /// Rejects keys outside `allowed`.
  void only(std::initializer_list<const char*> allowed) const {
    std::set<std::string> ok(allowed.begin(), allowed.end());
    for (auto it = j_->begin(); it != j_->end(); ++it)
      if (!ok.count(it.key())) throw ConfigError(at(it.key()), "unknown field");
  }

  Node child(const std::string& key) const {
    if (!has(key)) throw ConfigError(at(key), "required field is missing");
    return Node(raw(key), at(key));
  }

  double num(const std::string& key) const {
    if (!has(key)) throw ConfigError(at(key), "required field is missing");
    const json& v = raw(key);
    if (!v.is_number()) throw ConfigError(at(key), "expected a number");
    const double x = v.get<double>();
    if (!std::isfinite(x)) throw ConfigError(at(key), "must be finite");
    return x;
  }
  double num(const std::string& key, double fallback) const { return has(key) ? num(key) : fallback; }

  double positive(const std::string& key) const {
    const double x = num(key);
    if (!(x > 0.0)) throw ConfigError(at(key), "must be positive, got " + format(x));
    return x;
  }
  double non_negative(const std::string& key, double fallback) const {
    const double x = num(key, fallback);
    if (!(x >= 0.0)) throw ConfigError(at(key), "must be non-negative, got " + format(x));
    return x;
  }

  int integer(const std::string& key) const {
    if (!has(key)) throw ConfigError(at(key), "required field is missing");
    const json& v = raw(key);
    if (!v.is_number_integer()) throw ConfigError(at(key), "expected an integer");
    return v.get<int>();
  }
  int integer(const std::string& key, int fallback) const { return has(key) ? integer(key) : fallback; }

  std::string str(const std::string& key) const {
    if (!has(key)) throw ConfigError(at(key), "required field is missing");
    if (!raw(key).is_string()) throw ConfigError(at(key), "expected a string");
    return raw(key).get<std::string>();
  }
  std::string str(const std::string& key, const std::string& fallback) const {
    return has(key) ? str(key) : fallback;
  }

  std::string choice(const std::string& key, std::initializer_list<const char*> options,
                     const std::string& fallback) const {
    const std::string v = str(key, fallback);
    for (const char* o : options)
      if (v == o) return v;
    std::string list;
    for (const char* o : options) list += (list.empty() ? "" : ", ") + std::string(o);
    throw ConfigError(at(key), "must be one of " + list + ", got \"" + v + "\"");
  }

  std::vector<double> numbers(const std::string& key) const {
    if (!has(key)) throw ConfigError(at(key), "required field is missing");
    const json& v = raw(key);
    if (!v.is_array()) throw ConfigError(at(key), "expected an array of numbers");
    std::vector<double> out;
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (!v[i].is_number()) throw ConfigError(at(key) + "[" + std::to_string(i) + "]", "expected a number");
      out.push_back(v[i].get<double>());
    }
    return out;
  }

  bool flag(const std::string& key, bool fallback) const {
    if (!has(key)) return fallback;
    if (!raw(key).is_boolean()) throw ConfigError(at(key), "expected true or false");
    return raw(key).get<bool>();
  }

 private:
  static std::string format(double x) {
    std::ostringstream s;
    s << x;
    return s.str();
  }
  const json* j_;
  std::string path_;
};

// ---------------------------------------------------------------------------
// loading

inline json parse_text(const std::string& text, const std::string& source) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    std::size_t line = 1, col = 1;
    const std::size_t end = std::min(e.byte > 0 ? e.byte - 1 : 0, text.size());
    for (std::size_t i = 0; i < end; ++i) {
      if (text[i] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
    throw ConfigError(source + ":" + std::to_string(line) + ":" + std::to_string(col), "JSON syntax error");
  }
}

inline json load_file(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open configuration " + path.string());
  std::stringstream ss;
  ss << f.rdbuf();
  return parse_text(ss.str(), path.string());
}

// ---------------------------------------------------------------------------
// detector

namespace detail {

inline Complex complex_value(const json& v, const std::string& path) {
  if (v.is_number()) return {v.get<double>(), 0.0};
  if (v.is_array() && v.size() == 2 && v[0].is_number() && v[1].is_number())
    return {v[0].get<double>(), v[1].get<double>()};
  throw ConfigError(path, "expected a number or a [re, im] pair");
}

inline ComplexMatrix complex_matrix(const json& v, const std::string& path, Eigen::Index dim) {
  if (!v.is_array() || v.size() != static_cast<std::size_t>(dim))
    throw ConfigError(path, "expected " + std::to_string(dim) + " rows");
  ComplexMatrix m(dim, dim);
  for (Eigen::Index r = 0; r < dim; ++r) {
    const json& row = v[static_cast<std::size_t>(r)];
    const std::string rp = path + "[" + std::to_string(r) + "]";
    if (!row.is_array() || row.size() != static_cast<std::size_t>(dim))
      throw ConfigError(rp, "expected " + std::to_string(dim) + " entries");
    for (Eigen::Index c = 0; c < dim; ++c)
      m(r, c) = complex_value(row[static_cast<std::size_t>(c)], rp + "[" + std::to_string(c) + "]");
  }
  return m;
}

inline double rate_root(const Node& n, const char* squared, double fallback = -1.0) {
  if (!n.has(squared) && fallback >= 0.0) return std::sqrt(fallback);
  const double v = n.num(squared);
  if (!(v >= 0.0)) throw ConfigError(n.at(squared), "rate must be non-negative");
  return std::sqrt(v);
}

/// k from either `k` or `amplification` = (2k)^{1/2}χ.
inline double amplifier_rate(const Node& n, double chi) {
  if (n.has("amplification")) {
    if (n.has("k")) throw ConfigError(n.at("amplification"), "give either k or amplification, not both");
    const double a = n.non_negative("amplification", 0.0);
    if (chi == 0.0) throw ConfigError(n.at("chi"), "amplification needs a nonzero chi");
    return a * a / (2.0 * chi * chi);
  }
  return n.non_negative("k", 0.0);
}

inline ArrayAmplification array_scheme(const std::string& s) {
  if (s == "single_combined") return ArrayAmplification::single_combined;
  if (s == "per_element_summed") return ArrayAmplification::per_element_summed;
  return ArrayAmplification::per_element_individual;
}

inline Eigen::Index state_index(const Node& n, const std::string& key, Eigen::Index dim) {
  const int i = n.integer(key);
  if (i < 0 || i >= dim) throw ConfigError(n.at(key), "state index out of range 0.." + std::to_string(dim - 1));
  return i;
}

}  // namespace detail

/// Builds the detector described by `detector` (builder name + parameters,
/// optional dephasing/reset modifiers, amplifier settings or calibration).
inline DetectorSpec build_detector(const json& j, const std::string& path = "detector") {
  const Node n(j, path);
  const std::string b = n.choice("builder", {"two_state", "three_state", "quadratic", "degenerate_array", "band",
                                              "explicit"},
                                 "");
  DetectorSpec spec;
  const double chi = n.num("chi", 1.0);
  const double omega1 = n.num("omega1", 0.0);
  const std::initializer_list<const char*> common = {"builder", "chi", "k", "amplification", "omega1", "dephasing",
                                                     "reset", "amplifier", "calibration"};
  auto allow = [&](std::initializer_list<const char*> extra) {
    std::vector<const char*> keys(common);
    keys.insert(keys.end(), extra);
    std::set<std::string> ok(keys.begin(), keys.end());
    for (auto it = j.begin(); it != j.end(); ++it)
      if (!ok.count(it.key())) throw ConfigError(n.at(it.key()), "unknown field for builder " + b);
  };
  try {
    if (b == "two_state") {
      allow({"gamma2"});
      spec = build_two_state(detail::rate_root(n, "gamma2"), omega1, chi, detail::amplifier_rate(n, chi));
    } else if (b == "three_state") {
      allow({"gamma2", "Gamma2", "omegaC"});
      spec = build_three_state(detail::rate_root(n, "gamma2"), detail::rate_root(n, "Gamma2"), omega1, chi,
                               detail::amplifier_rate(n, chi), n.num("omegaC", 0.0));
    } else if (b == "quadratic") {
      allow({"theta", "axis"});
      const auto ax = n.has("axis") ? n.numbers("axis") : std::vector<double>{1.0, 0.0, 0.0};
      if (ax.size() != 3) throw ConfigError(n.at("axis"), "expected three components");
      Eigen::Vector3d a(ax[0], ax[1], ax[2]);
      if (std::abs(a.norm() - 1.0) > 1e-10) throw ConfigError(n.at("axis"), "must be a unit vector");
      spec = build_quadratic(n.num("theta"), a, omega1, chi, detail::amplifier_rate(n, chi));
    } else if (b == "degenerate_array") {
      allow({"n", "gamma2", "Gamma2", "scheme", "max_excited", "omegaC"});
      const int ne = n.integer("n");
      if (ne < 1) throw ConfigError(n.at("n"), "must be at least 1");
      const auto scheme =
          n.choice("scheme", {"single_combined", "per_element_individual", "per_element_summed"},
                   "per_element_individual");
      spec = build_degenerate_array(ne, detail::rate_root(n, "gamma2"), detail::rate_root(n, "Gamma2"), omega1, chi,
                                    detail::amplifier_rate(n, chi), detail::array_scheme(scheme),
                                    n.integer("max_excited", -1), n.num("omegaC", 0.0));
    } else if (b == "band") {
      allow({"n", "gamma2", "zeta2", "Gamma2", "amplify", "center", "levels"});
      const int ne = n.integer("n");
      if (ne < 1) throw ConfigError(n.at("n"), "must be at least 1");
      BandDistribution dist;
      if (n.has("levels")) {
        dist.kind = BandDistribution::Kind::custom;
        dist.frequencies = n.numbers("levels");
        if (dist.frequencies.size() != static_cast<std::size_t>(ne))
          throw ConfigError(n.at("levels"), "needs exactly n entries");
      } else {
        dist.zeta = detail::rate_root(n, "zeta2");
      }
      std::optional<double> G;
      if (n.has("Gamma2")) G = detail::rate_root(n, "Gamma2");
      const auto amp = n.choice("amplify", {"band_direct", "shelved"}, G ? "shelved" : "band_direct");
      if (amp == "shelved" && !G) throw ConfigError(n.at("Gamma2"), "shelved amplification needs Gamma2");
      spec = build_band(ne, detail::rate_root(n, "gamma2"), dist, G, chi, detail::amplifier_rate(n, chi),
                        amp == "shelved" ? BandAmplification::shelved : BandAmplification::band_direct,
                        n.num("center", 0.0));
    } else {
      allow({"dim", "H", "L", "S", "baths", "amplifiers", "initial_state", "excitation"});
      const int dim = n.integer("dim");
      if (dim < 1) throw ConfigError(n.at("dim"), "must be at least 1");
      spec.dim = dim;
      spec.H = to_sparse(detail::complex_matrix(n.raw("H"), n.at("H"), dim));
      spec.L = to_sparse(detail::complex_matrix(n.raw("L"), n.at("L"), dim));
      spec.S = n.has("S") ? to_sparse(detail::complex_matrix(n.raw("S"), n.at("S"), dim)) : sparse_identity(dim);
      if (n.has("baths")) {
        const json& bs = n.raw("baths");
        if (!bs.is_array()) throw ConfigError(n.at("baths"), "expected an array of matrices");
        for (std::size_t i = 0; i < bs.size(); ++i)
          spec.baths.push_back(
              to_sparse(detail::complex_matrix(bs[i], n.at("baths") + "[" + std::to_string(i) + "]", dim)));
      }
      if (n.has("amplifiers")) {
        const json& as = n.raw("amplifiers");
        if (!as.is_array()) throw ConfigError(n.at("amplifiers"), "expected an array");
        for (std::size_t i = 0; i < as.size(); ++i) {
          const Node a(as[i], n.at("amplifiers") + "[" + std::to_string(i) + "]");
          a.only({"monitored", "weights", "k"});
          AmplifierChannel ch;
          for (double v : a.numbers("monitored")) {
            if (v < 0 || v >= dim || v != std::floor(v)) throw ConfigError(a.at("monitored"), "bad state index");
            ch.monitored.push_back(static_cast<Eigen::Index>(v));
          }
          ch.weights = a.numbers("weights");
          if (ch.weights.size() != ch.monitored.size())
            throw ConfigError(a.at("weights"), "needs one weight per monitored state");
          ch.rate = a.non_negative("k", 0.0);
          spec.amplifiers.push_back(ch);
        }
      }
      spec.initial_state = n.has("initial_state")
                               ? detail::complex_matrix(n.raw("initial_state"), n.at("initial_state"), dim)
                               : ComplexMatrix(ComplexMatrix::Zero(dim, dim));
      if (!n.has("initial_state")) spec.initial_state(0, 0) = 1.0;
      spec.excitation = RealVector::Zero(dim);
      if (n.has("excitation")) {
        const auto ex = n.numbers("excitation");
        if (ex.size() != static_cast<std::size_t>(dim)) throw ConfigError(n.at("excitation"), "needs dim entries");
        for (int i = 0; i < dim; ++i) spec.excitation(i) = ex[static_cast<std::size_t>(i)];
      }
      spec.labels.clear();
      for (int i = 0; i < dim; ++i) spec.labels.push_back(std::to_string(i));
      spec.architecture = Architecture::custom;
      const auto problems = spec.structural_problems();
      if (!problems.empty()) throw ConfigError(path, problems.front());
    }

    if (n.has("dephasing")) {
      const json& ds = n.raw("dephasing");
      if (!ds.is_array()) throw ConfigError(n.at("dephasing"), "expected an array of {kappa2, level}");
      for (std::size_t i = 0; i < ds.size(); ++i) {
        const Node d(ds[i], n.at("dephasing") + "[" + std::to_string(i) + "]");
        d.only({"kappa2", "level"});
        spec = add_dephasing(spec, std::sqrt(d.non_negative("kappa2", 0.0)), detail::state_index(d, "level", spec.dim));
      }
    }
    if (n.has("reset")) {
      const json& rs = n.raw("reset");
      if (!rs.is_array()) throw ConfigError(n.at("reset"), "expected an array of {delta2, from, to}");
      for (std::size_t i = 0; i < rs.size(); ++i) {
        const Node r(rs[i], n.at("reset") + "[" + std::to_string(i) + "]");
        r.only({"delta2", "from", "to"});
        spec = add_reset(spec, std::sqrt(r.non_negative("delta2", 0.0)), detail::state_index(r, "from", spec.dim),
                         detail::state_index(r, "to", spec.dim));
      }
    }
  } catch (const ConfigError&) {
    throw;
  } catch (const PreconditionError& e) {
    throw ConfigError(path, e.what());
  }

  if (n.has("amplifier") && n.has("calibration"))
    throw ConfigError(n.at("calibration"), "give either amplifier settings or a calibration, not both");
  if (n.has("amplifier")) {
    const Node a = n.child("amplifier");
    a.only({"window", "threshold", "min_dwell"});
    for (auto& ch : spec.amplifiers) {
      if (a.has("window")) ch.window = a.positive("window");
      if (a.has("threshold")) ch.threshold = a.num("threshold");
      if (a.has("min_dwell")) ch.min_dwell = a.non_negative("min_dwell", 0.0);
    }
  }
  if (n.has("calibration")) {
    // window from the dark-count target, threshold = fraction·χ
    const Node c = n.child("calibration");
    c.only({"dark_probability", "interval", "threshold_fraction"});
    const double p = c.positive("dark_probability");
    const double interval = c.positive("interval");
    const double f = c.num("threshold_fraction", 0.5);
    if (!(f > 0.0) || !(f < 1.0)) throw ConfigError(c.at("threshold_fraction"), "must lie in (0, 1)");
    for (auto& ch : spec.amplifiers) {
      const double x = ch.max_weight();
      const double a = std::sqrt(2.0 * ch.rate) * x;
      if (!(a > 0.0)) throw ConfigError(n.at("k"), "calibration needs k > 0 and chi != 0");
      ch.window = calibrate_window(a, f, p / interval);
      ch.threshold = f * x;
    }
  }
  return spec;
}

// ---------------------------------------------------------------------------
// pulse, field, grid

inline PulseEnvelope build_pulse(const json& j, const std::string& path = "pulse") {
  const Node n(j, path);
  const auto shape = n.choice("shape", {"gaussian", "square", "sampled"}, "gaussian");
  const double carrier = n.num("carrier", 0.0);
  if (shape == "gaussian") {
    n.only({"shape", "sigma", "center", "carrier"});
    return PulseEnvelope::gaussian(n.positive("sigma"), n.num("center", 0.0), carrier);
  }
  if (shape == "square") {
    n.only({"shape", "width", "center", "carrier"});
    return PulseEnvelope::square(n.positive("width"), n.num("center", 0.0), carrier);
  }
  n.only({"shape", "times", "values", "carrier"});
  const auto times = n.numbers("times");
  const json& vs = n.raw("values");
  if (!vs.is_array() || vs.size() != times.size()) throw ConfigError(n.at("values"), "needs one value per time");
  std::vector<Complex> values;
  for (std::size_t i = 0; i < vs.size(); ++i)
    values.push_back(detail::complex_value(vs[i], n.at("values") + "[" + std::to_string(i) + "]"));
  try {
    return PulseEnvelope::sampled(times, values, carrier);
  } catch (const PreconditionError& e) {
    throw ConfigError(path, e.what());
  }
}

inline FieldState build_field(const json& j, const std::string& path = "field") {
  const Node n(j, path);
  n.only({"fock", "vacuum", "amplitudes", "coefficients"});
  if (n.flag("vacuum", false)) return FieldState::vacuum();
  if (n.has("fock")) {
    const int f = n.integer("fock");
    if (f < 0 || f > 6) throw ConfigError(n.at("fock"), "photon number must lie in 0..6");
    return FieldState::fock(f);
  }
  if (n.has("amplitudes")) {
    const json& a = n.raw("amplitudes");
    if (!a.is_array() || a.empty() || a.size() > 7) throw ConfigError(n.at("amplitudes"), "expected 1..7 amplitudes");
    ComplexVector v(static_cast<Eigen::Index>(a.size()));
    for (std::size_t i = 0; i < a.size(); ++i)
      v(static_cast<Eigen::Index>(i)) = detail::complex_value(a[i], n.at("amplitudes") + "[" + std::to_string(i) + "]");
    if (!(v.norm() > 0.0)) throw ConfigError(n.at("amplitudes"), "must not all vanish");
    return FieldState::superposition(v);
  }
  if (n.has("coefficients")) {
    const json& c = n.raw("coefficients");
    if (!c.is_array() || c.empty() || c.size() > 7) throw ConfigError(n.at("coefficients"), "expected 1..7 rows");
    FieldState f;
    f.coeffs = detail::complex_matrix(c, n.at("coefficients"), static_cast<Eigen::Index>(c.size()));
    if (!f.valid(1e-8)) throw ConfigError(n.at("coefficients"), "not a density matrix (Hermitian, PSD, unit trace)");
    return f;
  }
  throw ConfigError(path, "give one of fock, vacuum, amplitudes, coefficients");
}

struct GridSettings {
  std::optional<double> t_start, t_end, dt;
  double extra = 0.0;          // ns after the pulse support
  double extra_windows = 0.0;  // additional multiples of the longest t_m
};

inline GridSettings read_grid(const json* j, const std::string& path = "grid") {
  GridSettings g;
  if (!j) return g;
  const Node n(*j, path);
  n.only({"t_start", "t_end", "dt", "extra", "extra_windows"});
  if (n.has("t_start")) g.t_start = n.num("t_start");
  if (n.has("t_end")) g.t_end = n.num("t_end");
  if (n.has("dt")) g.dt = n.positive("dt");
  g.extra = n.non_negative("extra", 0.0);
  g.extra_windows = n.non_negative("extra_windows", 0.0);
  if (g.t_start && g.t_end && !(*g.t_end > *g.t_start)) throw ConfigError(n.at("t_end"), "must exceed t_start");
  return g;
}

/// Largest step allowed by the unraveling preconditions.
inline double stochastic_dt_limit(const DetectorSpec& spec) {
  double lim = std::numeric_limits<double>::infinity();
  for (const auto& a : spec.amplifiers) {
    lim = std::min(lim, a.window / 20.0);
    const double r = 2.0 * a.rate * a.max_weight() * a.max_weight();
    if (r > 0.0) lim = std::min(lim, 1.0 / (10.0 * r));
  }
  return lim;
}

/// Grid for the given detector and pulse. Without an explicit dt the step is
/// the propagation default, tightened to the unraveling limits when
/// `stochastic` is set; the end time is snapped so the grid stays uniform.
inline std::vector<double> build_grid(const GridSettings& g, const Liouvillian& liou, const PulseEnvelope& pulse,
                                      bool stochastic, std::optional<double> dt_override = std::nullopt) {
  double dt = dt_override ? *dt_override : g.dt ? *g.dt : default_dt(liou, pulse);
  if (!dt_override && !g.dt && stochastic) dt = std::min(dt, stochastic_dt_limit(liou.spec()));
  const auto [a, b] = pulse.support();
  double tm = 0.0;
  for (const auto& ch : liou.spec().amplifiers) tm = std::max(tm, ch.window);
  const double t0 = g.t_start.value_or(a);
  const double t1 = g.t_end.value_or(b + g.extra + g.extra_windows * tm);
  const auto steps = static_cast<std::size_t>(std::ceil((t1 - t0) / dt - 1e-9));
  std::vector<double> grid(steps + 1);
  for (std::size_t k = 0; k <= steps; ++k) grid[k] = t0 + static_cast<double>(k) * dt;
  return grid;
}

// ---------------------------------------------------------------------------
// run configuration

struct TrajectorySettings {
  std::size_t n_traj = 100;
  std::uint64_t master_seed = 1;
  MonteCarloOptions options;
};

inline TrajectorySettings read_trajectories(const json& j, const std::string& path = "trajectories") {
  const Node n(j, path);
  n.only({"n_traj", "master_seed", "windows", "scheme", "detect_from", "detect_until", "bin_width", "threads"});
  TrajectorySettings t;
  const int nt = n.integer("n_traj", 100);
  if (nt < 1) throw ConfigError(n.at("n_traj"), "must be at least 1");
  t.n_traj = static_cast<std::size_t>(nt);
  if (n.has("master_seed")) {
    if (!n.raw("master_seed").is_number_unsigned()) throw ConfigError(n.at("master_seed"), "expected an unsigned integer");
    t.master_seed = n.raw("master_seed").get<std::uint64_t>();
  }
  t.options.unravel.windows =
      n.choice("windows", {"sliding", "disjoint"}, "sliding") == "sliding" ? WindowMode::sliding : WindowMode::disjoint;
  t.options.unravel.scheme = n.choice("scheme", {"exponential", "euler_maruyama"}, "exponential") == "exponential"
                                 ? SdeScheme::exponential
                                 : SdeScheme::euler_maruyama;
  if (n.has("detect_from")) t.options.detect_from = n.num("detect_from");
  if (n.has("detect_until")) t.options.detect_until = n.num("detect_until");
  t.options.bin_width = n.has("bin_width") ? n.positive("bin_width") : 0.1;
  const int th = n.integer("threads", 0);
  if (th < 0) throw ConfigError(n.at("threads"), "must be non-negative");
  t.options.threads = static_cast<unsigned>(th);
  return t;
}

struct SweepSettings {
  std::string parameter;  // "detector.<key>" or "pulse.<key>" or reference "N"
  std::vector<double> values;
};

inline SweepSettings read_sweep(const json& j, const std::string& path = "sweep") {
  const Node n(j, path);
  n.only({"parameter", "values", "range", "points", "scale"});
  SweepSettings s;
  s.parameter = n.str("parameter");
  if (n.has("values")) {
    s.values = n.numbers("values");
    if (s.values.empty()) throw ConfigError(n.at("values"), "must not be empty");
    return s;
  }
  const auto r = n.numbers("range");
  if (r.size() != 2) throw ConfigError(n.at("range"), "expected [start, end]");
  const int pts = n.integer("points");
  if (pts < 1) throw ConfigError(n.at("points"), "must be at least 1");
  const bool log = n.choice("scale", {"linear", "log"}, "linear") == "log";
  if (log && !(r[0] > 0.0 && r[1] > 0.0)) throw ConfigError(n.at("range"), "log scale needs positive bounds");
  for (int i = 0; i < pts; ++i) {
    const double u = pts == 1 ? 0.0 : double(i) / (pts - 1);
    s.values.push_back(log ? r[0] * std::pow(r[1] / r[0], u) : r[0] + u * (r[1] - r[0]));
  }
  return s;
}

/// Sets `value` at a dotted path inside the config ("detector.k").
inline void set_parameter(json& cfg, const std::string& dotted, double value) {
  json* node = &cfg;
  std::string rest = dotted;
  std::string seen;
  for (;;) {
    const auto dot = rest.find('.');
    const std::string key = rest.substr(0, dot);
    seen += (seen.empty() ? "" : ".") + key;
    if (!node->is_object()) throw ConfigError("sweep.parameter", "\"" + seen + "\" is not an object");
    if (dot == std::string::npos) {
      (*node)[key] = value;
      return;
    }
    if (!node->contains(key)) throw ConfigError("sweep.parameter", "\"" + seen + "\" does not exist");
    node = &(*node)[key];
    rest = rest.substr(dot + 1);
  }
}

struct RunConfig {
  json raw;
  std::string mode;
  std::optional<json> detector;
  std::optional<json> pulse;
  std::optional<json> field;
  GridSettings grid;
  std::optional<TrajectorySettings> trajectories;
  std::optional<SweepSettings> sweep;
  std::optional<json> reference;  // closed-form sweep instead of a detector
  int n_detected = 1;
  std::string out_dir = "out";
  std::string prefix = "run";
};

/// Schema check of the whole document; detector, pulse and field are built
/// once to surface their errors.
inline RunConfig parse(const json& cfg) {
  const Node root(cfg, "");
  root.only({"description", "mode", "detector", "pulse", "field", "grid", "trajectories", "sweep", "reference",
             "metrics", "outputs"});
  RunConfig rc;
  rc.raw = cfg;
  rc.mode = root.choice("mode", {"average", "trajectories", "metrics", "sweep"}, "average");
  if (root.has("reference")) {
    const Node r = root.child("reference");
    r.only({"formula", "efficiencies"});
    r.choice("formula", {"min_elements", "narray_efficiency"}, "min_elements");
    const auto eps = r.numbers("efficiencies");
    for (std::size_t i = 0; i < eps.size(); ++i)
      if (!(eps[i] > 0.0 && eps[i] < 1.0))
        throw ConfigError(r.at("efficiencies") + "[" + std::to_string(i) + "]", "must lie in (0, 1)");
    rc.reference = cfg.at("reference");
    if (rc.mode != "sweep") throw ConfigError("mode", "a reference block needs mode \"sweep\"");
  } else {
    if (!root.has("detector")) throw ConfigError("detector", "required field is missing");
    if (!root.has("pulse")) throw ConfigError("pulse", "required field is missing");
    rc.detector = cfg.at("detector");
    rc.pulse = cfg.at("pulse");
    rc.field = root.has("field") ? cfg.at("field") : json{{"fock", 1}};
    build_detector(*rc.detector);
    build_pulse(*rc.pulse);
    build_field(*rc.field);
  }
  rc.grid = read_grid(root.has("grid") ? &cfg.at("grid") : nullptr);
  if (root.has("trajectories")) rc.trajectories = read_trajectories(cfg.at("trajectories"));
  if (rc.mode == "trajectories" && !rc.trajectories) rc.trajectories = TrajectorySettings{};
  if (root.has("sweep")) rc.sweep = read_sweep(cfg.at("sweep"));
  if (rc.mode == "sweep" && !rc.sweep) throw ConfigError("sweep", "mode \"sweep\" needs a sweep block");
  if (rc.sweep && !rc.reference) {
    const auto& p = rc.sweep->parameter;
    const auto dot = p.find('.');
    const std::string head = p.substr(0, dot);
    if (dot == std::string::npos || (head != "detector" && head != "pulse"))
      throw ConfigError("sweep.parameter", "must start with detector. or pulse.");
    json probe = cfg;
    set_parameter(probe, p, rc.sweep->values.front());
    try {
      if (head == "detector") build_detector(probe.at("detector"));
      else build_pulse(probe.at("pulse"));
    } catch (const ConfigError& e) {
      throw ConfigError("sweep.parameter", std::string("invalid sweep point: ") + e.what());
    }
    const json& target = cfg.at(head);
    const std::string key = p.substr(dot + 1);
    if (key.find('.') == std::string::npos && !target.contains(key) &&
        !(head == "detector" && (key == "k" || key == "amplification")))
      throw ConfigError("sweep.parameter", "\"" + p + "\" is not a parameter of the config");
  }
  if (rc.sweep && rc.reference && rc.sweep->parameter != "N")
    throw ConfigError("sweep.parameter", "reference sweeps run over N");
  if (root.has("metrics")) {
    const Node m = root.child("metrics");
    m.only({"n_detected"});
    rc.n_detected = m.integer("n_detected", 1);
    if (rc.n_detected < 1) throw ConfigError("metrics.n_detected", "must be at least 1");
  }
  if (root.has("outputs")) {
    const Node o = root.child("outputs");
    o.only({"directory", "prefix"});
    rc.out_dir = o.str("directory", rc.out_dir);
    rc.prefix = o.str("prefix", rc.prefix);
  }
  return rc;
}

}  // namespace qpd::config
