#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

namespace {

namespace fs = std::filesystem;

struct Run {
  int code = -1;
  std::string out;
};

Run run(const std::string& args) {
  const std::string cmd = std::string(FDMAC_CLI) + " " + args + " 2>/dev/null";
  Run r;
  FILE* p = popen(cmd.c_str(), "r");
  if (!p) return r;
  char buf[4096];
  while (std::fgets(buf, sizeof buf, p)) r.out += buf;
  const int st = pclose(p);
  r.code = WIFEXITED(st) ? WEXITSTATUS(st) : -1;
  return r;
}

std::vector<std::vector<std::string>> csv(const std::string& text) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream ls(line);
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    rows.push_back(cells);
  }
  return rows;
}

const std::string kHeader =
    "mode,engine,topology,n,n_c,n_h,W,seed,slots,throughput_client,throughput_ap,throughput_system,gain,"
    "gain_estimate,alpha,beta,p,alpha_ap,beta_ap,p_ap,residual,ci_halfwidth";

fs::path scratch(const std::string& name) {
  auto d = fs::temp_directory_path() / ("fdmac_cli_" + name);
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

}  // namespace

TEST(Cli, ModelGridHasHeaderAndOneRowPerPoint) {
  const auto r = run("model --n 20 --nh 0,4 --W 128,512");
  ASSERT_EQ(r.code, 0);
  const auto rows = csv(r.out);
  ASSERT_EQ(rows.size(), 5u);
  std::istringstream in(r.out);
  std::string first;
  std::getline(in, first);
  EXPECT_EQ(first, kHeader);
  for (std::size_t i = 1; i < rows.size(); ++i) {
    ASSERT_EQ(rows[i].size(), 22u) << i;
    EXPECT_EQ(rows[i][0], "fd");
    EXPECT_EQ(rows[i][1], "model");
    EXPECT_TRUE(rows[i][8].empty());   // slots: no simulation
    EXPECT_FALSE(rows[i][11].empty()); // throughput_system
    EXPECT_LT(std::stod(rows[i][20]), 1e-8);
  }
  // grid order: n_h outer, W inner
  EXPECT_EQ(rows[1][5], "0");
  EXPECT_EQ(rows[1][6], "128");
  EXPECT_EQ(rows[2][6], "512");
  EXPECT_EQ(rows[3][5], "4");
}

TEST(Cli, OutputIndependentOfWorkerCount) {
  const auto a = run("model --nh 0,4,8 --W 64,256,1024 --workers 1");
  const auto b = run("model --nh 0,4,8 --W 64,256,1024 --workers 4");
  ASSERT_EQ(a.code, 0);
  EXPECT_EQ(a.out, b.out);
}

TEST(Cli, SimulateWritesRowPerSeedAndAggregate) {
  const auto d = scratch("sim");
  const auto out = (d / "s.csv").string();
  const auto r = run("simulate --nh 4 --W 256 --slots 100000 --seeds 3 --ci-target 1 --out " + out);
  ASSERT_EQ(r.code, 0);
  std::ifstream f(out);
  std::stringstream ss;
  ss << f.rdbuf();
  const auto rows = csv(ss.str());
  ASSERT_EQ(rows.size(), 5u);
  EXPECT_EQ(rows[1][7], "1");
  EXPECT_EQ(rows[3][7], "3");
  EXPECT_EQ(rows[4][7], "mean");
  EXPECT_FALSE(rows[4][21].empty());
  EXPECT_EQ(rows[4][8], "300000");

  ASSERT_TRUE(fs::exists(out + ".config.json"));
  std::ifstream cf(out + ".config.json");
  const auto j = nlohmann::json::parse(cf);
  EXPECT_EQ(j["command"], "simulate");
  EXPECT_EQ(j["config"]["seeds"], 3);
  EXPECT_EQ(j["points"][0]["stopped_by"], "ci_target");
  EXPECT_EQ(j["timing_slots"]["tau_F"], 74);
}

TEST(Cli, ConfigFileWithFlagOverride) {
  const auto d = scratch("cfg");
  const auto cfg = (d / "c.json").string();
  std::ofstream(cfg) << R"({"n": [10], "n_h": [2], "W": [64, 128], "mode": "hd"})";
  const auto r = run("model --config " + cfg + " --W 32");
  ASSERT_EQ(r.code, 0);
  const auto rows = csv(r.out);
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_EQ(rows[1][0], "hd");
  EXPECT_EQ(rows[1][3], "10");
  EXPECT_EQ(rows[1][6], "32");
}

TEST(Cli, EmptyGridIsUsageError) {
  const auto d = scratch("empty");
  const auto cfg = (d / "c.json").string();
  std::ofstream(cfg) << R"({"W": []})";
  EXPECT_EQ(run("model --config " + cfg).code, 1);
}

TEST(Cli, UsageErrors) {
  EXPECT_EQ(run("").code, 1);
  EXPECT_EQ(run("model --mode xx").code, 1);
  EXPECT_EQ(run("model --n 0").code, 1);
  EXPECT_EQ(run("validate").code, 1);
  EXPECT_EQ(run("validate --out-dir /nonexistent/fdmac/dir").code, 1);
  EXPECT_EQ(run("model --out /nonexistent/fdmac/dir/x.csv").code, 1);
  // n_h out of range at a grid point is reported like a solver failure
  EXPECT_EQ(run("model --nh 30 --n 20").code, 2);
}

TEST(Cli, SolverFailureExitsTwoAndKeepsRow) {
  const auto r = run("model --W 4 --nh 0,4");  // W below tau_V
  EXPECT_EQ(r.code, 2);
  const auto rows = csv(r.out);
  ASSERT_EQ(rows.size(), 3u);
  EXPECT_TRUE(rows[1][11].empty());
}

TEST(Cli, GainRowsCarryTheRatio) {
  const auto r = run("gain --n 20 --nh 8 --W 256");
  ASSERT_EQ(r.code, 0);
  const auto rows = csv(r.out);
  ASSERT_EQ(rows.size(), 3u);
  EXPECT_EQ(rows[1][0], "fd");
  EXPECT_EQ(rows[2][0], "hd");
  EXPECT_EQ(rows[1][12], rows[2][12]);
  const double g = std::stod(rows[1][12]);
  EXPECT_NEAR(g, std::stod(rows[1][11]) / std::stod(rows[2][11]), 1e-8);
  EXPECT_FALSE(rows[1][13].empty());
  EXPECT_TRUE(rows[2][13].empty());
}

TEST(Cli, RandomGainAveragesTopologies) {
  const auto r = run("gain --topology random --n 8 --W 128 --topologies 4");
  ASSERT_EQ(r.code, 0);
  const auto rows = csv(r.out);
  ASSERT_EQ(rows.size(), 3u);
  EXPECT_GT(std::stod(rows[1][12]), 1.0);
  EXPECT_GE(std::stod(rows[1][5]), 0.0);
}

TEST(Cli, TopologyDump) {
  const auto r = run("topology --n 6 --nh 2");
  ASSERT_EQ(r.code, 0);
  const auto rows = csv(r.out);
  // data lines only
  int data = 0;
  for (const auto& row : rows)
    if (!row.empty() && !row[0].empty() && row[0][0] != '#' && row[0] != "id") ++data;
  EXPECT_GE(data, 6);
}

TEST(Cli, ValidateWritesDiffTable) {
  const auto d = scratch("val");
  const auto r = run("validate --nh 0 --W 512 --slots 100000 --seeds 2 --out-dir " + d.string());
  EXPECT_TRUE(r.code == 0 || r.code == 3);
  EXPECT_TRUE(fs::exists(d / "validate.csv"));
  EXPECT_TRUE(fs::exists(d / "validate.csv.config.json"));
  // The alternate collision-time variant reports drift rather than failing hard.
  const auto alt =
      run("validate --nh 4 --W 512 --slots 100000 --seeds 2 --collision-model three_case --out-dir " + d.string());
  EXPECT_TRUE(alt.code == 0 || alt.code == 3);
}
