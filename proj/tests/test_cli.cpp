#include <gtest/gtest.h>

#include <unistd.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "hyperlat/cli.hpp"

using namespace hyperlat;
namespace fs = std::filesystem;

namespace {

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    dir_ = fs::temp_directory_path() / ("hyperlat_cli_" + std::string(info->name()) + "_" +
                                        std::to_string(::getpid()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
    ::unsetenv("HYPERLAT_NODE_BUDGET");
  }
  void TearDown() override {
    fs::remove_all(dir_);
    ::unsetenv("HYPERLAT_NODE_BUDGET");
  }

  fs::path write_config(const std::string& name, const std::string& text) {
    const auto p = dir_ / name;
    std::ofstream(p) << text;
    return p;
  }

  int run_sub(const std::string& sub, std::optional<fs::path> config, const fs::path& out, int threads = 1,
              std::optional<std::uint64_t> seed = std::nullopt) {
    RunOptions o;
    o.config = std::move(config);
    o.out = out;
    o.threads = threads;
    o.seed = seed;
    return run(sub, o, log_);
  }

  static std::string slurp(const fs::path& p) { return io::read_file(p); }
  static json manifest(const fs::path& out, const std::string& sub) {
    return json::parse(slurp(out / sub / "manifest.json"));
  }

  fs::path dir_;
  std::ostringstream log_;
};

std::vector<std::string> lines(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream in(s);
  for (std::string l; std::getline(in, l);) out.push_back(l);
  return out;
}

}  // namespace

TEST_F(Cli, ConfigDefaults) {
  const RunConfig c = load_config(std::nullopt);
  EXPECT_EQ(c.algebra.F.D, 17);
  EXPECT_EQ(c.enumeration.R1, 4.0);
  EXPECT_EQ(c.diophantine.eps_list.size(), 5u);
  EXPECT_EQ(c.trace.dims, (std::vector<int>{2, 2}));
  EXPECT_EQ(c.zaremba.instances, (std::vector<int>{100, 20, 20}));
  EXPECT_FALSE(c.congruence_q);
}

TEST_F(Cli, PartialConfigMergesOverDefaults) {
  const RunConfig c = load_config(write_config("c.json", R"({"enumeration": {"R1": 2.5}, "congruence": {"q": 3}})"));
  EXPECT_EQ(c.enumeration.R1, 2.5);
  EXPECT_EQ(c.enumeration.R2, 4.0);
  ASSERT_TRUE(c.congruence_q);
  EXPECT_TRUE(*c.congruence_q == 3);
}

TEST_F(Cli, ConfigErrorsExitWithTwo) {
  EXPECT_THROW(load_config(write_config("a.json", R"({"enumeration": {"R3": 1}})")), ConfigError);
  EXPECT_EQ(run_sub("volumes", write_config("b.json", R"({"bogus": 1})"), dir_ / "out"), 2);
  EXPECT_EQ(run_sub("volumes", write_config("c.json", R"({"enumeration": {"R1": "four"}})"), dir_ / "out"), 2);
  EXPECT_EQ(run_sub("volumes", write_config("d.json", "{not json"), dir_ / "out"), 2);
  EXPECT_EQ(run_sub("volumes", write_config("e.json", R"({"field": {"D": 15}})"), dir_ / "out"), 2);
  EXPECT_EQ(run_sub("volumes", write_config("f.json", R"({"diophantine": {"eps_list": [0.1, 0.2, 0.05]}})"),
                    dir_ / "out"),
            2);
  EXPECT_EQ(run_sub("nosuch", std::nullopt, dir_ / "out"), 2);
  EXPECT_EQ(run_sub("volumes", std::nullopt, dir_ / "out", 0), 2);
  EXPECT_FALSE(fs::exists(dir_ / "out" / "volumes" / "manifest.json"));
}

TEST_F(Cli, ConfigHashStable) {
  const auto a = load_config(std::nullopt).hash(), b = load_config(std::nullopt).hash();
  EXPECT_EQ(a, b);
  EXPECT_EQ(a.size(), 16u);
  EXPECT_EQ(load_config(write_config("same.json", R"({"enumeration": {"R1": 4.0}})")).hash(), a);
  EXPECT_NE(load_config(write_config("diff.json", R"({"enumeration": {"R1": 4.5}})")).hash(), a);
  ConfigOverrides ov;
  ov.seed = 99;
  EXPECT_NE(load_config(std::nullopt, ov).hash(), a);
}

TEST_F(Cli, EnumerateZeroRadiusIsIdentity) {
  const auto cfg = write_config(
      "e.json", R"({"enumeration": {"R1": 0.0, "R2": 0.0, "growth_S": 8.0, "growth_slices": 4, "growth_fit_from": 4.0}})");
  const int rc = run_sub("enumerate", cfg, dir_ / "out");
  EXPECT_NE(rc, 2);
  const auto rows = lines(slurp(dir_ / "out" / "enumerate" / "elements.csv"));
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_EQ(rows[1].substr(0, 16), "1,0,0,0,0,0,0,0,");
  const json m = manifest(dir_ / "out", "enumerate");
  EXPECT_EQ(m["summary"]["count"], 1);
  EXPECT_EQ(m["checks"][0]["status"], "PASS");
}

TEST_F(Cli, VolumesRow) {
  ASSERT_EQ(run_sub("volumes", std::nullopt, dir_ / "out"), 0);
  const auto rows = lines(slurp(dir_ / "out" / "volumes" / "volumes.csv"));
  EXPECT_EQ(rows[0], "R,ball_volume_rho_half,ball_volume_rho_one,r_schedule,balance");
  bool seen = false;
  for (const auto& row : rows) {
    if (row.rfind("0.5,", 0) != 0) continue;
    seen = true;
    std::vector<double> v;
    std::istringstream in(row);
    for (std::string cell; std::getline(in, cell, ',');) v.push_back(std::stod(cell));
    ASSERT_EQ(v.size(), 5u);
    EXPECT_NEAR(v[1], std::cosh(0.5) - 1, 1e-12);
    EXPECT_NEAR(v[2], (std::sinh(0.5) * std::cosh(0.5) - 0.5) / 2, 1e-12);
  }
  EXPECT_TRUE(seen);
}

TEST_F(Cli, ZarembaPasses) {
  ASSERT_EQ(run_sub("zaremba", std::nullopt, dir_ / "out"), 0);
  const json m = manifest(dir_ / "out", "zaremba");
  EXPECT_EQ(m["status"], "PASS");
  EXPECT_EQ(m["summary"]["result"], "PASS");
  EXPECT_EQ(m["summary"]["instances"], 140);
  EXPECT_EQ(lines(slurp(dir_ / "out" / "zaremba" / "zaremba.csv")).size(), 141u);
}

TEST_F(Cli, ManifestFields) {
  ASSERT_EQ(run_sub("zaremba", std::nullopt, dir_ / "out"), 0);
  const json m = manifest(dir_ / "out", "zaremba");
  for (const char* key : {"subcommand", "status", "config_hash", "config", "versions", "checks", "files", "summary"}) {
    EXPECT_TRUE(m.contains(key)) << key;
  }
  EXPECT_EQ(m["subcommand"], "zaremba");
  EXPECT_EQ(m["config_hash"], load_config(std::nullopt).hash());
  EXPECT_EQ(m["config"], default_config());
  for (const auto& f : m["files"]) {
    const std::string content = slurp(dir_ / "out" / "zaremba" / f["name"].get<std::string>());
    EXPECT_EQ(f["fnv1a"], io::hex64(io::fnv1a(content)));
  }
}

TEST_F(Cli, OutputsDeterministicAcrossThreads) {
  const auto cfg = write_config("t.json", R"({"trace": {"tempered_T": 5.0}})");
  ASSERT_EQ(run_sub("tracesim", cfg, dir_ / "a", 1), 0) << log_.str();
  ASSERT_EQ(run_sub("tracesim", cfg, dir_ / "b", 3), 0);
  for (const char* f : {"spectrum.jsonl", "trace.csv", "trace_partitions.csv", "manifest.json"}) {
    EXPECT_EQ(slurp(dir_ / "a" / "tracesim" / f), slurp(dir_ / "b" / "tracesim" / f)) << f;
  }
  ASSERT_EQ(run_sub("zaremba", std::nullopt, dir_ / "c", 1, 5), 0);
  ASSERT_EQ(run_sub("zaremba", std::nullopt, dir_ / "d", 4, 5), 0);
  EXPECT_EQ(slurp(dir_ / "c" / "zaremba" / "zaremba.csv"), slurp(dir_ / "d" / "zaremba" / "zaremba.csv"));
  EXPECT_EQ(manifest(dir_ / "c", "zaremba")["config"]["zaremba"]["seed"], 5);
}

TEST_F(Cli, NodeBudgetFromEnvironment) {
  ::setenv("HYPERLAT_NODE_BUDGET", "50", 1);
  EXPECT_EQ(node_budget_from_env(), std::optional<std::uint64_t>(50));
  ConfigOverrides ov;
  ov.node_budget = node_budget_from_env();
  const RunConfig c = load_config(std::nullopt, ov);
  EXPECT_EQ(c.enumeration.node_budget, 50u);
  EXPECT_EQ(c.diophantine.node_budget, 50u);
  EXPECT_EQ(run_sub("enumerate", std::nullopt, dir_ / "out"), 1);
  EXPECT_NE(log_.str().find("budget"), std::string::npos) << log_.str();
  ::setenv("HYPERLAT_NODE_BUDGET", "lots", 1);
  EXPECT_THROW(node_budget_from_env(), ConfigError);
  EXPECT_EQ(run_sub("volumes", std::nullopt, dir_ / "out"), 2);
  ::setenv("HYPERLAT_NODE_BUDGET", "", 1);
  EXPECT_FALSE(node_budget_from_env());
}
