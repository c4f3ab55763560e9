// Copyright 2026 The ISM Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <gtest/gtest.h>
#include <sys/wait.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "support.hpp"

#ifndef ISM_CLI
#define ISM_CLI "ism"
#endif

namespace ism {
namespace {

namespace fs = std::filesystem;

struct CliRun {
  int code = -1;
  std::string out;
};

CliRun run(const std::string& args) {
  const std::string cmd = std::string(ISM_CLI) + " " + args + " 2>/dev/null";
  CliRun r;
  FILE* p = popen(cmd.c_str(), "r");
  if (!p) return r;
  char buf[4096];
  std::size_t n;
  while ((n = fread(buf, 1, sizeof buf, p)) > 0) r.out.append(buf, n);
  const int status = pclose(p);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

std::string src(const std::string& rel) { return testing::source_path(rel); }

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path scratch(const std::string& name) {
  fs::path p = fs::temp_directory_path() / ("ism_cli_" + name);
  fs::remove_all(p);
  return p;
}

TEST(Cli, SolveHalfspace) {
  CliRun r = run("solve " + src("scenarios/halfspace.json"));
  ASSERT_EQ(r.code, 0);
  json j = json::parse(r.out);
  EXPECT_EQ(j["status"], "Optimal");
  EXPECT_NEAR(j["theta_hat"][0].get<double>(), 1.5, 1e-10);
  EXPECT_NEAR(j["theta_hat"][1].get<double>(), 1.5, 1e-10);
  EXPECT_NEAR(j["objective"].get<double>(), std::sqrt(0.5), 1e-10);
}

TEST(Cli, SolveOracleAgrees) {
  CliRun bb = run("solve " + src("scenarios/fig3_suggestion.json"));
  CliRun oracle = run("solve --oracle " + src("scenarios/fig3_suggestion.json"));
  ASSERT_EQ(bb.code, 0);
  ASSERT_EQ(oracle.code, 0);
  EXPECT_NEAR(json::parse(bb.out)["objective"].get<double>(),
              json::parse(oracle.out)["objective"].get<double>(), 1e-6);
}

TEST(Cli, InfeasibleExitsTwo) {
  CliRun r = run("solve " + src("tests/data/cli/infeasible.json"));
  EXPECT_EQ(r.code, 2);
  EXPECT_EQ(json::parse(r.out)["status"], "Infeasible");
}

TEST(Cli, ConfigErrorsExitThree) {
  EXPECT_EQ(run("solve " + src("tests/data/cli/bad_rank.json")).code, 3);
  EXPECT_EQ(run("solve /nonexistent/instance.json").code, 3);
  EXPECT_EQ(run("solve").code, 3);
  EXPECT_EQ(run("frobnicate").code, 3);
  EXPECT_EQ(run("bench sideways --out /tmp/x").code, 3);
  EXPECT_EQ(run("serve --addr nonsense").code, 3);
}

TEST(Cli, BenchTimeoutExitsFour) {
  const fs::path out = scratch("timeout");
  CliRun r = run("bench scaling --config " + src("tests/data/cli/bench_timeout.json") +
              " --out " + out.string());
  EXPECT_EQ(r.code, 4);
  EXPECT_TRUE(fs::exists(out / "scaling.csv"));
}

TEST(Cli, BenchWritesTablesAndSeries) {
  const fs::path out = scratch("bench");
  const std::string cfg = src("tests/data/cli/bench_small.json");
  ASSERT_EQ(run("bench optimality --config " + cfg + " --out " + out.string()).code, 0);
  ASSERT_EQ(run("bench scaling --config " + cfg + " --out " + out.string()).code, 0);
  const Table opt = parse_csv(slurp(out / "optimality.csv"));
  EXPECT_EQ(opt.rows.size(), 2u);
  const Table sc = parse_csv(slurp(out / "scaling.csv"));
  EXPECT_EQ(sc.rows.size(), 4u);
  const json series = read_json_file((out / "scaling_series.json").string());
  EXPECT_EQ(series["schema"], "ism.series/1");
  EXPECT_FALSE(series["series"].empty());
  const std::string first = slurp(out / "optimality.csv");
  ASSERT_EQ(run("bench optimality --config " + cfg + " --out " + out.string()).code, 0);
  EXPECT_EQ(slurp(out / "optimality.csv"), first);
}

TEST(Cli, SimulateMatchesGoldenLog) {
  const fs::path out = scratch("sim");
  ASSERT_EQ(run("simulate " + src("scenarios/fig3.json") + " --suggestions " +
                src("tests/data/cli/suggestions.json") + " --out " + out.string())
                .code,
            0);
  EXPECT_EQ(slurp(out / "trajectory.csv"),
            slurp(src("tests/data/golden/fig3_steer_trajectory.csv")));
  EXPECT_EQ(slurp(out / "theta.csv"), slurp(src("tests/data/golden/fig3_steer_theta.csv")));
  const json log = read_json_file((out / "log.json").string());
  EXPECT_EQ(log["tick"], 30);
  EXPECT_EQ(log["suggestions"].size(), 1u);
  EXPECT_EQ(run("simulate " + src("scenarios/fig3.json") + " --ticks -1").code, 3);
}

TEST(Cli, ExportMiqp) {
  CliRun r = run("export-miqp " + src("scenarios/halfspace.json"));
  ASSERT_EQ(r.code, 0);
  const LpModel m = parse_lp(r.out);
  EXPECT_TRUE(m.minimize);
  EXPECT_EQ(m.binaries.size(), 1u);
  EXPECT_EQ(run("export-miqp " + src("scenarios/halfspace.json") + " --big-m 5").code, 0);
}

TEST(Cli, ServeStartsAndStopsOnSignal) {
  const std::string cmd = std::string(ISM_CLI) +
                          " serve --addr 127.0.0.1:0 >/dev/null 2>&1 & pid=$!; sleep 1; "
                          "kill -TERM $pid; wait $pid";
  const int status = std::system(cmd.c_str());
  ASSERT_TRUE(WIFEXITED(status));
  EXPECT_EQ(WEXITSTATUS(status), 0);
}

}  // namespace
}  // namespace ism
