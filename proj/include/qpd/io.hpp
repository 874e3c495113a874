#pragma once

// CSV / JSON output with a provenance header (tool version, config hash).

#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "qpd/errors.hpp"
#include "qpd/metrics.hpp"
#include "qpd/stochastic.hpp"

namespace qpd {

inline constexpr const char* version = "1.0.0";

/// 64-bit FNV-1a.
inline std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::string hex64(std::uint64_t v) {
  static const char* digits = "0123456789abcdef";
  std::string s(16, '0');
  for (int i = 15; i >= 0; --i, v >>= 4) s[static_cast<std::size_t>(i)] = digits[v & 0xf];
  return s;
}

/// Hash of the canonical (key-sorted, compact) dump.
inline std::string config_hash(const nlohmann::json& cfg) { return hex64(fnv1a(cfg.dump())); }

inline std::string header_line(const std::string& hash) {
  return std::string("qpd ") + version + " config-hash=" + hash;
}

/// Shortest round-trip representation.
inline std::string format_number(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::scientific);
  return std::string(buf, r.ptr);
}

struct Table {
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;

  void add(std::vector<double> row) {
    if (row.size() != columns.size()) throw DimensionError("Table: row width does not match the columns");
    rows.push_back(std::move(row));
  }
};

inline std::string to_csv(const Table& t, const std::string& hash) {
  std::string out = "# " + header_line(hash) + "\n";
  for (std::size_t c = 0; c < t.columns.size(); ++c) out += (c ? "," : "") + t.columns[c];
  out += "\n";
  for (const auto& r : t.rows) {
    for (std::size_t c = 0; c < r.size(); ++c) out += (c ? "," : "") + format_number(r[c]);
    out += "\n";
  }
  return out;
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  std::error_code ec;
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path(), ec);
  if (ec) throw IoError("cannot create directory " + path.parent_path().string() + ": " + ec.message());
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open " + path.string() + " for writing");
  f << text;
  if (!f) throw IoError("write failed for " + path.string());
}

/// JSON document with the provenance header as its first member.
inline std::string to_json_text(nlohmann::json body, const std::string& hash) {
  nlohmann::ordered_json out;
  out["header"] = header_line(hash);
  for (auto it = body.begin(); it != body.end(); ++it) out[it.key()] = *it;
  return out.dump(2) + "\n";
}

// ---------------------------------------------------------------------------
// tables and documents for the library types

inline Table trajectory_table(const StateTrajectory& tr, const std::vector<std::string>& labels) {
  Table t;
  t.columns.push_back("time");
  for (Eigen::Index i = 0; i < tr.dim(); ++i)
    t.columns.push_back("p_" + (static_cast<std::size_t>(i) < labels.size() ? labels[static_cast<std::size_t>(i)]
                                                                              : std::to_string(i)));
  for (std::size_t c = 0; c < tr.expectations.size(); ++c) t.columns.push_back("x_" + std::to_string(c));
  t.columns.push_back("trace");
  for (std::size_t k = 0; k < tr.size(); ++k) {
    std::vector<double> r{tr.grid[k]};
    for (Eigen::Index i = 0; i < tr.dim(); ++i) r.push_back(tr.populations(static_cast<Eigen::Index>(k), i));
    for (const auto& e : tr.expectations) r.push_back(e[k]);
    r.push_back(tr.trace[k]);
    t.add(std::move(r));
  }
  return t;
}

/// time, then raw increment and integrated signal per channel.
inline Table records_table(const std::vector<MeasurementRecord>& recs) {
  Table t;
  if (recs.empty()) return t;
  t.columns.push_back("time");
  for (const auto& r : recs) {
    t.columns.push_back("dI_" + std::to_string(r.channel));
    t.columns.push_back("I_" + std::to_string(r.channel));
  }
  const auto& grid = recs.front().grid;
  for (std::size_t k = 0; k < grid.size(); ++k) {
    std::vector<double> row{grid[k]};
    for (const auto& r : recs) {
      row.push_back(k < r.increments.size() ? r.increments[k] : 0.0);
      row.push_back(r.integrated[k]);
    }
    t.add(std::move(row));
  }
  return t;
}

inline nlohmann::json to_json(const TimingMetrics& m) {
  return {{"latency", m.mu}, {"sigma", m.sigma}, {"sigma_0", m.sigma0}, {"jitter", m.sigma_sys},
          {"warnings", m.warnings}};
}

inline nlohmann::json to_json(const IdealityReport& r) {
  nlohmann::json j{{"architecture", r.architecture}, {"ideal", r.ideal}, {"notes", r.notes}};
  if (r.modes_evaluated) j["persistent_monitored_modes"] = r.persistent_monitored_modes;
  if (r.rate_residual) j["rate_residual"] = *r.rate_residual;
  if (r.wide_pulse_figure) j["wide_pulse_figure"] = *r.wide_pulse_figure;
  if (r.predicted_efficiency) j["predicted_efficiency"] = *r.predicted_efficiency;
  return j;
}

inline nlohmann::json to_json(const MetricsReport& m) {
  nlohmann::json j;
  j["n_detected"] = m.n_detected;
  j["terminal_efficiency"] = m.terminal_efficiency;
  j["channel_hit_probability"] = nlohmann::json::array();
  for (const auto& s : m.channel_hits) j["channel_hit_probability"].push_back(s.final());
  j["dark_rates"] = m.dark_rates;
  j["total_dark_rate"] = m.total_dark_rate;
  if (m.timing) j["timing"] = to_json(*m.timing);
  j["ideality"] = to_json(m.ideality);
  j["warnings"] = m.warnings;
  return j;
}

inline nlohmann::json to_json(const EnsembleResult& e) {
  nlohmann::json j;
  j["n_traj"] = e.n_traj;
  j["master_seed"] = e.master_seed;
  j["detected"] = e.detected;
  j["efficiency"] = e.efficiency;
  j["standard_error"] = e.standard_error;
  j["steps"] = e.steps;
  j["wiener_mean"] = e.wiener_mean;
  j["histogram"] = {{"origin", e.detection_times.origin},
                    {"bin_width", e.detection_times.bin_width},
                    {"counts", e.detection_times.counts}};
  nlohmann::json hits = nlohmann::json::array();
  for (const auto& hv : e.hits) {
    nlohmann::json row = nlohmann::json::array();
    for (const auto& h : hv) row.push_back({{"channel", h.channel}, {"time", h.time}, {"dwell", h.dwell}});
    hits.push_back(row);
  }
  j["hits"] = hits;
  return j;
}

}  // namespace qpd
