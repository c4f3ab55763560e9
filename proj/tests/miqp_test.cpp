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

#include "support.hpp"

namespace ism {
namespace {

std::size_t count_rows(const LpModel& m, const std::string& prefix) {
  return static_cast<std::size_t>(std::count_if(m.rows.begin(), m.rows.end(), [&](const LpRow& r) {
    return r.name.rfind(prefix, 0) == 0;
  }));
}

// Ordering rows are named c<ordering>_<row>.
std::size_t count_ordering_rows(const LpModel& m) {
  return static_cast<std::size_t>(std::count_if(m.rows.begin(), m.rows.end(), [](const LpRow& r) {
    return r.name.size() > 1 && r.name[0] == 'c' && std::isdigit(static_cast<unsigned char>(r.name[1]));
  }));
}

TEST(Miqp, TwoOrderings) {
  std::mt19937_64 rng(1);
  auto inst = testing::random_ism_instance(rng, 2, 3, 3);
  auto ex = export_miqp(inst);
  auto model = parse_lp(ex.text);
  EXPECT_EQ(model.binaries.size(), 2u);
  EXPECT_EQ(count_rows(model, "choose"), 1u);
  EXPECT_NE(ex.text.find("bigM = "), std::string::npos);
}

TEST(Miqp, BigMRowCount) {
  std::mt19937_64 rng(2);
  IsmInstance inst;
  inst.objective = testing::random_objective(rng, 5, 3);
  inst.matroid = PartitionMatroid::uniform(5, 3);
  inst.theta0 = testing::random_theta(rng, 3);
  inst.suggestion = {4, 0, 2};
  auto ex = export_miqp(inst);
  EXPECT_EQ(ex.big_m_rows, 54u);
  auto model = parse_lp(ex.text);
  EXPECT_EQ(count_ordering_rows(model), 54u);
  EXPECT_EQ(model.binaries.size(), 6u);
}

TEST(Miqp, RoundTripObjective) {
  std::mt19937_64 rng(3);
  int checked = 0;
  for (int trial = 0; trial < 10; ++trial) {
    auto inst = testing::random_ism_instance(rng, 3 + trial % 2, 3, 3 + trial % 3 * 3);
    inst.epsilon = trial % 2 ? 1e-4 : 0.0;
    auto bb = solve_bbism(inst);
    if (bb.status == SolveStatus::Infeasible && inst.epsilon > 0.0) continue;
    ASSERT_EQ(bb.status, SolveStatus::Optimal);
    ++checked;
    auto ex = export_miqp(inst);
    auto model = parse_lp(ex.text);
    std::map<std::string, double> x;
    for (Eigen::Index j = 0; j < bb.theta_hat.size(); ++j) {
      x["t" + std::to_string(j)] = bb.theta_hat(j);
    }
    for (std::size_t k = 0; k < ex.orderings.size(); ++k) {
      x["y" + std::to_string(k)] = ex.orderings[k] == bb.best_ordering ? 1.0 : 0.0;
    }
    EXPECT_NEAR(model.objective.eval(x), bb.objective * bb.objective, 1e-8);
    EXPECT_LE(model.max_violation(x), 1e-8);
    // A wrong ordering choice at the prior is generally infeasible unless the
    // prior is already consistent, so only check the selector row.
    x["y0"] = 1.0 - x["y0"];
    EXPECT_GT(model.max_violation(x), 0.5);
  }
  EXPECT_GE(checked, 5);
}

TEST(Miqp, CapAndOverride) {
  std::mt19937_64 rng(4);
  auto big = testing::random_ism_instance(rng, 8, 2, 3);
  EXPECT_THROW(export_miqp(big), CapExceeded);
  auto inst = testing::random_ism_instance(rng, 2, 2, 3);
  auto ex = export_miqp(inst, 123.5);
  EXPECT_EQ(ex.big_m, 123.5);
  EXPECT_NE(ex.text.find("bigM = 123.5"), std::string::npos);
  EXPECT_DOUBLE_EQ(default_big_m(2.0, 3.0), 6000.0);
  EXPECT_DOUBLE_EQ(default_big_m(0.0, 3.0), 1000.0);
}

TEST(LpReader, ParsesStandardSections) {
  const std::string text =
      "\\ comment\n"
      "Minimize\n obj: 3 x + 2 y + [ x ^ 2 + 4 x * y ] / 2 + 7\n"
      "Subject To\n c1: x + y >= 1\n c2: - x + 2.5e0 y <= 4\n e: x - y = 0\n"
      "Bounds\n -1 <= x <= 5\n y free\n"
      "Binary\n z\nEnd\n";
  auto m = parse_lp(text);
  EXPECT_TRUE(m.minimize);
  ASSERT_EQ(m.rows.size(), 3u);
  EXPECT_EQ(m.rows[0].sense, LpSense::Ge);
  EXPECT_EQ(m.rows[2].sense, LpSense::Eq);
  std::map<std::string, double> x{{"x", 1}, {"y", 1}, {"z", 0}};
  EXPECT_DOUBLE_EQ(m.objective.eval(x), 3 + 2 + 0.5 + 2 + 7);
  EXPECT_EQ(m.bound("x"), std::make_pair(-1.0, 5.0));
  EXPECT_EQ(m.bound("y").first, -std::numeric_limits<double>::infinity());
  EXPECT_EQ(m.max_violation(x), 0.0);
  EXPECT_THROW(parse_lp("Minimize\n obj: x +\nEnd\n"), std::runtime_error);
}

}  // namespace
}  // namespace ism
