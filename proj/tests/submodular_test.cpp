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

#include <thread>

#include "support.hpp"

namespace ism {
namespace {

using testing::exhaustive_max;

LinearObjective modular(std::vector<double> w) {
  auto weights = std::make_shared<std::vector<double>>(std::move(w));
  return LinearObjective(weights->size(), 1, [weights](std::span<const ElementId> s) {
    Vector g = Vector::Zero(1);
    for (ElementId e : s) g(0) += (*weights)[static_cast<std::size_t>(e)];
    return g;
  });
}

LinearObjective fixed_table(std::size_t n, Vector value) {
  return LinearObjective(n, static_cast<std::size_t>(value.size()),
                         [value](std::span<const ElementId> s) {
                           return s.empty() ? Vector(Vector::Zero(value.size())) : value;
                         });
}

TEST(Evaluate, DotProduct) {
  Vector g(2);
  g << 0.5, 0.9;
  auto obj = fixed_table(2, g);
  Vector theta(2);
  theta << 1.0, 0.0;
  EXPECT_DOUBLE_EQ(evaluate(obj, theta, Subset{0}), 0.5);
  EXPECT_EQ(evaluate(obj, theta, Subset{}), 0.0);
}

TEST(Evaluate, DimensionMismatchThrows) {
  auto obj = modular({1, 2});
  EXPECT_THROW(evaluate(obj, Vector::Ones(2), Subset{0}), ContractViolation);
}

TEST(Evaluate, RejectsNonzeroEmptySet) {
  auto ones = [](std::span<const ElementId>) { return Vector(Vector::Ones(1)); };
  EXPECT_THROW(LinearObjective(2, 1, ones), ContractViolation);
}

TEST(MarginalGain, ModularGainIsWeight) {
  auto obj = modular({3, 1, 2});
  Vector theta = Vector::Ones(1);
  EXPECT_DOUBLE_EQ(marginal_gain(obj, theta, 1, Subset{0, 2}), 1.0);
  EXPECT_DOUBLE_EQ(marginal_gain(obj, theta, 2, Subset{}), evaluate(obj, theta, Subset{2}));
  EXPECT_THROW(marginal_gain(obj, theta, 0, Subset{0}), ContractViolation);
}

TEST(Matroid, Independence) {
  auto m = PartitionMatroid::partition({0, 0, 1, 1});
  EXPECT_TRUE(m.is_independent(Subset{}));
  EXPECT_FALSE(m.is_independent(Subset{0, 1}));
  EXPECT_TRUE(m.is_independent(Subset{0, 3}));
  EXPECT_EQ(m.rank(), 2u);
  auto u = PartitionMatroid::uniform(5, 3);
  EXPECT_TRUE(u.is_independent(Subset{0, 1, 4}));
  EXPECT_FALSE(u.is_independent(Subset{0, 1, 2, 3}));
  PartitionMatroid cap({0, 0, 0, 1}, {2, 1});
  EXPECT_TRUE(cap.is_independent(Subset{0, 1, 3}));
  EXPECT_FALSE(cap.is_independent(Subset{0, 1, 2}));
  EXPECT_THROW(PartitionMatroid({0, 2}, {1, 1}), ContractViolation);
}

TEST(Greedy, ModularUniform) {
  auto obj = modular({3, 2, 1});
  auto sel = greedy_maximize(obj, Vector::Ones(1), PartitionMatroid::uniform(3, 2));
  EXPECT_EQ(sel.sequence, (std::vector<ElementId>{0, 1}));
  EXPECT_FALSE(sel.truncated);
  EXPECT_DOUBLE_EQ(sel.values.back(), 5.0);
}

TEST(Greedy, ModularPartition) {
  auto obj = modular({5, 4, 1, 2});
  auto sel = greedy_maximize(obj, Vector::Ones(1), PartitionMatroid::partition({0, 0, 1, 1}));
  EXPECT_EQ(sel.sequence, (std::vector<ElementId>{0, 3}));
}

TEST(Greedy, TruncatesWhenBudgetExceedsRank) {
  auto obj = modular({1, 1});
  auto sel = greedy_maximize(obj, Vector::Ones(1), PartitionMatroid::partition({0, 0}), 2);
  EXPECT_TRUE(sel.truncated);
  EXPECT_EQ(sel.sequence.size(), 1u);
}

TEST(Greedy, TieBreakRules) {
  auto obj = modular({1, 1, 1, 1});
  auto m = PartitionMatroid::uniform(4, 2);
  EXPECT_EQ(greedy_maximize(obj, Vector::Ones(1), m).sequence, (std::vector<ElementId>{0, 1}));
  auto pref = greedy_maximize(obj, Vector::Ones(1), m, {}, TieBreakRule::prefer({3, 2}));
  EXPECT_EQ(pref.sequence, (std::vector<ElementId>{3, 2}));
  // Elements outside the preference list fall back to the lowest id.
  auto partial = greedy_maximize(obj, Vector::Ones(1), m, {}, TieBreakRule::prefer({2}));
  EXPECT_EQ(partial.sequence, (std::vector<ElementId>{2, 0}));
}

TEST(Greedy, ZeroThetaPicksLowestIdPerBlock) {
  std::mt19937_64 rng(3);
  auto obj = testing::random_objective(rng, 6, 3);
  auto m = testing::block_matroid(3, 2);
  auto sel = greedy_maximize(*obj, Vector::Zero(3), m);
  EXPECT_EQ(sel.sequence, (std::vector<ElementId>{0, 2, 4}));
}

TEST(Greedy, PrefixOptimalityAndMonotoneValues) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    auto obj = testing::random_objective(rng, 9, 4);
    auto m = testing::block_matroid(3, 3);
    Vector theta = testing::random_theta(rng, 4);
    auto sel = greedy_maximize(*obj, theta, m);
    Subset prefix;
    for (std::size_t i = 0; i < sel.sequence.size(); ++i) {
      const double chosen = marginal_gain(*obj, theta, sel.sequence[i], prefix);
      for (ElementId s = 0; s < 9; ++s) {
        if (contains(prefix, s) || !m.can_add(prefix, s)) continue;
        EXPECT_GE(chosen, marginal_gain(*obj, theta, s, prefix) - 1e-12);
      }
      if (i > 0) {
        EXPECT_GE(sel.values[i], sel.values[i - 1]);
      }
      prefix = with_element(prefix, sel.sequence[i]);
    }
  }
}

TEST(Greedy, ApproximationGuaranteeUniform) {
  std::mt19937_64 rng(5);
  const double ratio = 1.0 - std::exp(-1.0);
  for (int trial = 0; trial < 40; ++trial) {
    auto obj = testing::random_objective(rng, 8, 3);
    Vector theta = testing::random_theta(rng, 3);
    auto m = PartitionMatroid::uniform(8, 3);
    double opt = exhaustive_max(*obj, theta, m, 3);
    auto sel = greedy_maximize(*obj, theta, m);
    EXPECT_GE(sel.values.back(), ratio * opt - 1e-9);
  }
}

TEST(Greedy, Deterministic) {
  std::mt19937_64 rng(9);
  auto obj = testing::random_objective(rng, 10, 3);
  Vector theta = testing::random_theta(rng, 3);
  auto m = PartitionMatroid::uniform(10, 4);
  auto a = greedy_maximize(*obj, theta, m);
  LinearObjective copy(*obj);
  auto b = greedy_maximize(copy, theta, m);
  EXPECT_EQ(a.sequence, b.sequence);
  EXPECT_EQ(a.values, b.values);
}

TEST(Checkers, ModularAndSquare) {
  GroundSet g(3);
  SetFunction card = [](std::span<const ElementId> s) { return double(s.size()); };
  SetFunction square = [](std::span<const ElementId> s) {
    return double(s.size() * s.size());
  };
  SetFunction neg = [](std::span<const ElementId> s) { return -double(s.size()); };
  EXPECT_TRUE(check_submodular(card, g).holds);
  EXPECT_TRUE(check_monotone(card, g).holds);
  auto r = check_submodular(square, g);
  ASSERT_FALSE(r.holds);
  ASSERT_TRUE(r.counterexample);
  EXPECT_TRUE(r.counterexample->a.empty());
  EXPECT_EQ(r.counterexample->b.size(), 1u);
  EXPECT_FALSE(check_monotone(neg, g).holds);
  EXPECT_TRUE(check_supermodular(square, g).holds);
}

TEST(Checkers, SupermodularIffNegationSubmodular) {
  std::mt19937_64 rng(21);
  GroundSet g(5);
  std::uniform_real_distribution<double> u(-1, 1);
  for (int trial = 0; trial < 30; ++trial) {
    std::vector<double> table(32);
    for (auto& x : table) x = u(rng);
    table[0] = 0;
    SetFunction f = [&table](std::span<const ElementId> s) {
      std::uint32_t mask = 0;
      for (ElementId e : s) mask |= 1u << e;
      return table[mask];
    };
    SetFunction neg = [&f](std::span<const ElementId> s) { return -f(s); };
    EXPECT_EQ(check_supermodular(f, g).holds, check_submodular(neg, g).holds);
  }
}

TEST(Checkers, RefuseAboveCap) {
  SetFunction card = [](std::span<const ElementId> s) { return double(s.size()); };
  EXPECT_THROW(check_submodular(card, GroundSet(11)), CapExceeded);
}

TEST(Cache, CountsHitsAndEvicts) {
  std::atomic<int> calls{0};
  LinearObjective obj(
      6, 1,
      [&calls](std::span<const ElementId> s) {
        ++calls;
        return Vector(Vector::Constant(1, double(s.size())));
      },
      4);
  const int base = calls.load();  // the constructor evaluates the empty set
  obj.basis(Subset{1, 2});
  obj.basis(canonical(std::vector<ElementId>{2, 1}));
  EXPECT_EQ(calls.load(), base + 1);
  for (ElementId e = 0; e < 6; ++e) obj.basis(Subset{e});
  obj.basis(Subset{1, 2});  // evicted by now
  EXPECT_EQ(calls.load(), base + 8);
  auto stats = obj.cache_stats();
  EXPECT_LE(stats.size, 4u);
}

TEST(Cache, ConcurrentReadsAgree) {
  std::mt19937_64 rng(4);
  auto obj = testing::random_objective(rng, 10, 3);
  std::vector<Vector> ref;
  for (std::uint32_t mask = 0; mask < 1024; ++mask) {
    ref.push_back(obj->basis(detail::mask_to_subset(mask)));
  }
  LinearObjective fresh(*obj);
  std::vector<std::thread> threads;
  std::atomic<int> mismatches{0};
  for (int t = 0; t < 4; ++t) {
    threads.emplace_back([&, t] {
      for (std::uint32_t k = 0; k < 1024; ++k) {
        std::uint32_t mask = (k * 7 + static_cast<std::uint32_t>(t) * 131) % 1024;
        if (fresh.basis(detail::mask_to_subset(mask)) != ref[mask]) ++mismatches;
      }
    });
  }
  for (auto& th : threads) th.join();
  EXPECT_EQ(mismatches.load(), 0);
}

}  // namespace
}  // namespace ism
