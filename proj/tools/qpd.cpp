// qpd: configuration-driven front end.
//
//   qpd run <config.json> [--mode M] [--out DIR] [--seed S] [--threads T] [--dt-override DT]
//   qpd validate <config.json> [--dt-override DT]
//   qpd catalog [--arbitrate] [--out FILE]
//
// Exit codes: 0 success, 2 configuration error, 3 numerical precondition
// failure, 4 I/O failure. QPD_OUTPUT_DIR sets the output directory when
// neither --out nor outputs.directory is given.

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "qpd/arbitration.hpp"
#include "qpd/config.hpp"
#include "qpd/io.hpp"
#include "qpd/metrics.hpp"
#include "qpd/reference.hpp"
#include "qpd/stochastic.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace qpd;

namespace {

struct Overrides {
  std::optional<std::string> mode;
  std::optional<std::string> out;
  std::optional<std::uint64_t> seed;
  std::optional<unsigned> threads;
  std::optional<double> dt;
};

/// Config with the command-line overrides folded in; its hash labels every output.
json effective_config(json cfg, const Overrides& o) {
  if (o.mode) cfg["mode"] = *o.mode;
  if (o.seed) {
    if (!cfg.contains("trajectories")) cfg["trajectories"] = json::object();
    cfg["trajectories"]["master_seed"] = *o.seed;
  }
  if (o.dt) {
    if (!cfg.contains("grid")) cfg["grid"] = json::object();
    cfg["grid"]["dt"] = *o.dt;
  }
  return cfg;
}

fs::path output_dir(const config::RunConfig& rc, const Overrides& o) {
  if (o.out) return *o.out;
  if (rc.raw.contains("outputs") && rc.raw["outputs"].contains("directory")) return rc.out_dir;
  if (const char* env = std::getenv("QPD_OUTPUT_DIR"); env && *env) return env;
  return rc.out_dir;
}

struct Case {
  DetectorSpec spec;
  PulseEnvelope pulse;
  FieldState field;
  Liouvillian liou;
  std::vector<double> grid;
};

Case make_case(const json& cfg, const config::RunConfig& rc, bool stochastic) {
  Case c{config::build_detector(cfg.at("detector")), config::build_pulse(cfg.at("pulse")),
         config::build_field(rc.field ? *rc.field : json{{"fock", 1}}), {}, {}};
  c.liou = Liouvillian::build(c.spec, c.pulse.carrier());
  c.grid = config::build_grid(rc.grid, c.liou, c.pulse, stochastic);
  return c;
}

int photons(const FieldState& f) {
  int n = 0;
  for (int i = 0; i <= f.n_max(); ++i)
    if (std::abs(f.coeffs(i, i)) > 0.0) n = std::max(n, i);
  return n;
}

MetricsReport metrics_for(const Case& c, const StateTrajectory& tr, int n_detected) {
  return compute_metrics(c.liou, c.pulse, tr, photons(c.field), n_detected);
}

void run_average(const json& cfg, const config::RunConfig& rc, const fs::path& dir, const std::string& hash,
                 bool write_trajectory) {
  const Case c = make_case(cfg, rc, false);
  const auto tr = propagate(c.liou, c.pulse, c.field, c.grid).trajectory;
  const auto m = metrics_for(c, tr, rc.n_detected);
  if (write_trajectory)
    write_text(dir / (rc.prefix + "_trajectory.csv"), to_csv(trajectory_table(tr, c.spec.labels), hash));
  json body = to_json(m);
  body["grid"] = {{"t_start", c.grid.front()}, {"t_end", c.grid.back()}, {"points", c.grid.size()}};
  write_text(dir / (rc.prefix + "_metrics.json"), to_json_text(body, hash));
  std::cout << "terminal efficiency " << m.terminal_efficiency << ", dark rate " << m.total_dark_rate << " /ns\n";
}

void run_trajectories(const json& cfg, const config::RunConfig& rc, const fs::path& dir, const std::string& hash,
                      const Overrides& o) {
  const Case c = make_case(cfg, rc, true);
  auto ts = *rc.trajectories;
  if (o.threads) ts.options.threads = *o.threads;
  const auto ens = monte_carlo(c.liou, c.pulse, c.field, c.grid, ts.n_traj, ts.master_seed, ts.options);
  const auto first = unravel(c.liou, c.pulse, c.field, c.grid, trajectory_seed(ts.master_seed, 0), ts.options.unravel);
  write_text(dir / (rc.prefix + "_records.csv"), to_csv(records_table(first.records), hash));
  json body = to_json(ens);
  body["windows"] = to_string(ts.options.unravel.windows);
  write_text(dir / (rc.prefix + "_ensemble.json"), to_json_text(body, hash));
  std::cout << "efficiency " << ens.efficiency << " +- " << ens.standard_error << " (" << ens.n_traj
            << " trajectories)\n";
}

void run_reference_sweep(const config::RunConfig& rc, const fs::path& dir, const std::string& hash) {
  const auto& r = *rc.reference;
  const std::string formula = r.value("formula", "min_elements");
  const auto eps = r.at("efficiencies").get<std::vector<double>>();
  Table t;
  t.columns.push_back("N");
  for (double e : eps) {
    std::ostringstream label;
    label << formula << "_eps" << e;
    t.columns.push_back(label.str());
  }
  for (double v : rc.sweep->values) {
    const int N = static_cast<int>(std::lround(v));
    if (N < 1) throw ConfigError("sweep", "N must be at least 1");
    std::vector<double> row{double(N)};
    for (double e : eps) {
      if (formula == "min_elements") {
        row.push_back(reference::min_elements(N, e));
      } else {
        // efficiency of the smallest array reaching e
        row.push_back(reference::narray_efficiency(reference::min_elements(N, e), N));
      }
    }
    t.add(std::move(row));
  }
  write_text(dir / (rc.prefix + "_sweep.csv"), to_csv(t, hash));
  std::cout << "wrote " << t.rows.size() << " rows\n";
}

void run_detector_sweep(const json& cfg, const config::RunConfig& rc, const fs::path& dir, const std::string& hash,
                        const Overrides& o) {
  Table t;
  const bool mc = rc.trajectories.has_value();
  t.columns = {"value", "window", "threshold", "t_min", "dark_rate", "efficiency", "latency", "jitter"};
  if (mc) t.columns.insert(t.columns.end(), {"mc_efficiency", "mc_standard_error"});
  for (double v : rc.sweep->values) {
    json point = cfg;
    config::set_parameter(point, rc.sweep->parameter, v);
    const Case c = make_case(point, rc, mc);
    const auto tr = propagate(c.liou, c.pulse, c.field, c.grid).trajectory;
    const auto m = metrics_for(c, tr, rc.n_detected);
    const auto& a = c.spec.amplifiers.empty() ? AmplifierChannel{} : c.spec.amplifiers.front();
    std::vector<double> row{v,
                            a.window,
                            a.threshold,
                            a.t_min(),
                            m.total_dark_rate,
                            m.terminal_efficiency,
                            m.timing ? m.timing->mu : std::nan(""),
                            m.timing ? m.timing->sigma_sys : std::nan("")};
    if (mc) {
      auto ts = *rc.trajectories;
      if (o.threads) ts.options.threads = *o.threads;
      const auto ens = monte_carlo(c.liou, c.pulse, c.field, c.grid, ts.n_traj, ts.master_seed, ts.options);
      row.push_back(ens.efficiency);
      row.push_back(ens.standard_error);
    }
    t.add(std::move(row));
    std::cout << rc.sweep->parameter << " = " << v << ": efficiency " << m.terminal_efficiency << "\n";
  }
  write_text(dir / (rc.prefix + "_sweep.csv"), to_csv(t, hash));
}

int cmd_run(const std::string& path, const Overrides& o) {
  const json cfg = effective_config(config::load_file(path), o);
  const auto rc = config::parse(cfg);
  const std::string hash = config_hash(cfg);
  const fs::path dir = output_dir(rc, o);
  if (rc.mode == "average") run_average(cfg, rc, dir, hash, true);
  else if (rc.mode == "metrics") run_average(cfg, rc, dir, hash, false);
  else if (rc.mode == "trajectories") run_trajectories(cfg, rc, dir, hash, o);
  else if (rc.reference) run_reference_sweep(rc, dir, hash);
  else run_detector_sweep(cfg, rc, dir, hash, o);
  return 0;
}

int cmd_validate(const std::string& path, const Overrides& o) {
  const json cfg = effective_config(config::load_file(path), o);
  const auto rc = config::parse(cfg);
  if (rc.reference) {
    std::cout << "ok: reference sweep over " << rc.sweep->values.size() << " points\n";
    return 0;
  }
  std::vector<json> points{cfg};
  if (rc.sweep) {
    points.clear();
    for (double v : rc.sweep->values) {
      json p = cfg;
      config::set_parameter(p, rc.sweep->parameter, v);
      points.push_back(p);
    }
  }
  const bool stochastic = rc.trajectories.has_value();
  for (const auto& p : points) {
    const auto spec = config::build_detector(p.at("detector"));
    const auto pulse = config::build_pulse(p.at("pulse"));
    const auto rep = validate(spec, pulse.carrier());
    if (!rep.ok()) throw PreconditionError("detector: " + rep.problems.front());
    if (!rep.stationary)
      throw PreconditionError("initial state is not stationary, residual " + std::to_string(rep.stationarity_residual));
    const auto lv = Liouvillian::build(spec, pulse.carrier());
    const auto grid = config::build_grid(rc.grid, lv, pulse, stochastic);
    require_stable_grid(lv, grid, "grid");
    if (stochastic) {
      const double lim = config::stochastic_dt_limit(spec);
      if (grid[1] - grid[0] > lim * (1.0 + 1e-9))
        throw PreconditionError("grid: dt exceeds the unraveling limit " + std::to_string(lim) + " ns");
    }
  }
  std::cout << "ok: " << points.size() << " configuration point(s) valid\n";
  return 0;
}

int cmd_catalog(bool arbitrate, const std::optional<std::string>& out) {
  auto cat = reference::catalog();
  if (arbitrate) {
    std::vector<Arbitration> res{arbitrate_quadratic(std::numbers::pi), arbitrate_quadratic(std::numbers::pi / 2)};
    for (int n = 2; n <= 4; ++n) res.push_back(arbitrate_multiphoton(n));
    record_outcomes(cat, res);
  }
  const std::string text = reference::catalog_json(cat).dump(2) + "\n";
  if (out) write_text(*out, text);
  else std::cout << text;
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"qpd: few-photon detector simulation"};
  app.require_subcommand(1);
  Overrides o;
  std::string path;
  bool arbitrate = false;
  std::optional<std::string> catalog_out;

  auto* run = app.add_subcommand("run", "run a configuration");
  run->add_option("config", path, "JSON configuration")->required();
  run->add_option("--mode", o.mode, "override mode: average, trajectories, metrics, sweep");
  run->add_option("--out", o.out, "output directory");
  run->add_option("--seed", o.seed, "master seed for trajectories");
  run->add_option("--threads", o.threads, "worker threads (results do not depend on it)");
  run->add_option("--dt-override", o.dt, "time step in ns");

  auto* val = app.add_subcommand("validate", "check a configuration without running it");
  val->add_option("config", path, "JSON configuration")->required();
  val->add_option("--dt-override", o.dt, "time step in ns");

  auto* cat = app.add_subcommand("catalog", "dump the closed-form catalog as JSON");
  cat->add_flag("--arbitrate", arbitrate, "rerun the numerical arbitrations before dumping");
  cat->add_option("--out", catalog_out, "write to a file instead of stdout");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }

  try {
    if (*run) return cmd_run(path, o);
    if (*val) return cmd_validate(path, o);
    return cmd_catalog(arbitrate, catalog_out);
  } catch (const ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return 2;
  } catch (const IoError& e) {
    std::cerr << "i/o error: " << e.what() << "\n";
    return 4;
  } catch (const Error& e) {
    std::cerr << "precondition failure: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
}
