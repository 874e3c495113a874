#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "qpd/config.hpp"
#include "qpd/io.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace qpd;

namespace {

struct Outcome {
  int code = -1;
  std::string output;
};

Outcome run_cli(const std::string& args) {
  const fs::path log = fs::temp_directory_path() / ("qpd_cli_" + std::to_string(::getpid()) + ".log");
  const std::string cmd = std::string(QPD_CLI_PATH) + " " + args + " > " + log.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  Outcome o;
  o.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  std::ifstream in(log);
  std::stringstream ss;
  ss << in.rdbuf();
  o.output = ss.str();
  fs::remove(log);
  return o;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path scratch(const std::string& name) {
  const auto p = fs::temp_directory_path() / ("qpd_test_" + std::to_string(::getpid())) / name;
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

fs::path write_config(const fs::path& dir, const json& cfg) {
  const auto p = dir / "config.json";
  std::ofstream(p) << cfg.dump(2);
  return p;
}

json small_three_state() {
  return json::parse(R"({
    "mode": "average",
    "detector": {"builder": "three_state", "gamma2": 1.0, "Gamma2": 1.0, "chi": 1.0, "k": 2.0,
                 "amplifier": {"window": 1.0, "threshold": 0.5}},
    "pulse": {"shape": "gaussian", "sigma": 2.0},
    "field": {"fock": 1},
    "grid": {"dt": 0.02, "extra": 4.0},
    "trajectories": {"n_traj": 24, "master_seed": 7, "windows": "sliding"},
    "outputs": {"prefix": "small"}
  })");
}

}  // namespace

TEST(Config, ErrorsNameTheField) {
  auto cfg = small_three_state();
  cfg["pulse"]["sigma"] = -1.0;
  try {
    config::parse(cfg);
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    EXPECT_EQ(e.field(), "pulse.sigma");
  }
  cfg = small_three_state();
  cfg["detector"]["bogus"] = 1;
  EXPECT_THROW(config::parse(cfg), ConfigError);
  cfg = small_three_state();
  cfg.erase("detector");
  EXPECT_THROW(config::parse(cfg), ConfigError);
  EXPECT_THROW(config::parse_text("{\"mode\": ", "inline"), ConfigError);
}

TEST(Config, ShippedConfigsParse) {
  for (const auto& e : fs::directory_iterator(QPD_CONFIG_DIR)) {
    if (e.path().extension() != ".json") continue;
    EXPECT_NO_THROW(config::parse(config::load_file(e.path()))) << e.path();
  }
}

TEST(Config, HashIgnoresFormatting) {
  const auto a = small_three_state();
  const auto b = json::parse(a.dump());
  EXPECT_EQ(config_hash(a), config_hash(b));
  auto c = a;
  c["grid"]["dt"] = 0.01;
  EXPECT_NE(config_hash(a), config_hash(c));
}

TEST(Cli, AverageRunWritesLabelledOutputs) {
  const auto dir = scratch("average");
  const auto cfg = small_three_state();
  const auto r = run_cli("run " + write_config(dir, cfg).string() + " --out " + (dir / "out").string());
  ASSERT_EQ(r.code, 0) << r.output;
  const auto csv = slurp(dir / "out" / "small_trajectory.csv");
  const auto hash = config_hash(cfg);
  EXPECT_EQ(csv.rfind("# " + header_line(hash), 0), 0u);
  const auto metrics = json::parse(slurp(dir / "out" / "small_metrics.json"));
  EXPECT_EQ(metrics["header"], header_line(hash));
  EXPECT_GT(metrics["terminal_efficiency"].get<double>(), 0.5);
}

TEST(Cli, ExitCodes) {
  const auto dir = scratch("codes");
  auto cfg = small_three_state();
  cfg["pulse"]["sigma"] = 0.0;
  auto r = run_cli("run " + write_config(dir, cfg).string() + " --out " + (dir / "out").string());
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.output.find("pulse.sigma"), std::string::npos) << r.output;

  cfg = small_three_state();
  const auto path = write_config(dir, cfg).string();
  r = run_cli("run " + path + " --dt-override 5 --out " + (dir / "out").string());
  EXPECT_EQ(r.code, 3) << r.output;

  std::ofstream(dir / "blocker") << "x";
  r = run_cli("run " + path + " --out " + (dir / "blocker" / "sub").string());
  EXPECT_EQ(r.code, 4) << r.output;

  r = run_cli("run " + (dir / "missing.json").string());
  EXPECT_EQ(r.code, 4) << r.output;
  r = run_cli("frobnicate");
  EXPECT_EQ(r.code, 2);
}

TEST(Cli, TrajectoryOutputsIndependentOfThreads) {
  const auto dir = scratch("threads");
  auto cfg = small_three_state();
  cfg["mode"] = "trajectories";
  const auto path = write_config(dir, cfg).string();
  ASSERT_EQ(run_cli("run " + path + " --threads 1 --out " + (dir / "t1").string()).code, 0);
  ASSERT_EQ(run_cli("run " + path + " --threads 3 --out " + (dir / "t3").string()).code, 0);
  for (const char* f : {"small_ensemble.json", "small_records.csv"}) {
    const auto a = slurp(dir / "t1" / f), b = slurp(dir / "t3" / f);
    EXPECT_FALSE(a.empty());
    EXPECT_EQ(a, b) << f;
  }
  // a different seed changes the records and the hash
  ASSERT_EQ(run_cli("run " + path + " --seed 8 --out " + (dir / "s8").string()).code, 0);
  EXPECT_NE(slurp(dir / "t1" / "small_records.csv"), slurp(dir / "s8" / "small_records.csv"));
}

TEST(Cli, ValidateAndCatalog) {
  for (const auto& e : fs::directory_iterator(QPD_CONFIG_DIR)) {
    if (e.path().extension() != ".json") continue;
    const auto r = run_cli("validate " + e.path().string());
    EXPECT_EQ(r.code, 0) << e.path() << "\n" << r.output;
  }
  const auto dir = scratch("catalog");
  ASSERT_EQ(run_cli("catalog --out " + (dir / "cat.json").string()).code, 0);
  const auto cat = json::parse(slurp(dir / "cat.json"));
  ASSERT_TRUE(cat.is_array());
  EXPECT_GE(cat.size(), 12u);
}
