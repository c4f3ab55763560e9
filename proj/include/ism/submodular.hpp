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

#pragma once

// Finite set-function machinery: ground sets, partition matroids,
// linearly parameterized objectives f(S, theta) = theta^T g(S), the greedy
// maximizer and exhaustive structural checkers.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <list>
#include <memory>
#include <mutex>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "ism/error.hpp"

namespace ism {

using ElementId = std::int32_t;
using Vector = Eigen::VectorXd;

// A subset of the ground set. Canonical subsets are sorted ascending and
// duplicate free; every cache and comparison uses the canonical form.
using Subset = std::vector<ElementId>;

inline Subset canonical(std::span<const ElementId> elements) {
  Subset s(elements.begin(), elements.end());
  std::sort(s.begin(), s.end());
  ISM_REQUIRE(std::adjacent_find(s.begin(), s.end()) == s.end(),
              "subset contains a duplicate element");
  return s;
}

inline Subset with_element(std::span<const ElementId> canonical_set,
                           ElementId e) {
  Subset s;
  s.reserve(canonical_set.size() + 1);
  auto pos = std::lower_bound(canonical_set.begin(), canonical_set.end(), e);
  s.insert(s.end(), canonical_set.begin(), pos);
  s.push_back(e);
  s.insert(s.end(), pos, canonical_set.end());
  return s;
}

inline bool contains(std::span<const ElementId> elements, ElementId e) {
  return std::find(elements.begin(), elements.end(), e) != elements.end();
}

// Dense 0-based element ids [0, size).
class GroundSet {
 public:
  explicit GroundSet(std::size_t size) : size_(size) {
    ISM_REQUIRE(size >= 1, "ground set must be nonempty");
  }

  std::size_t size() const noexcept { return size_; }

  bool contains(ElementId e) const noexcept {
    return e >= 0 && static_cast<std::size_t>(e) < size_;
  }

  std::vector<ElementId> elements() const {
    std::vector<ElementId> out(size_);
    std::iota(out.begin(), out.end(), 0);
    return out;
  }

 private:
  std::size_t size_;
};

// Every element belongs to exactly one block; a set is independent iff no
// block holds more than its capacity. A uniform matroid of rank k is the
// single-block case with capacity k.
class PartitionMatroid {
 public:
  PartitionMatroid(std::vector<int> block_of, std::vector<int> capacity)
      : block_of_(std::move(block_of)), capacity_(std::move(capacity)) {
    ISM_REQUIRE(!block_of_.empty(), "matroid needs a nonempty ground set");
    for (int b : block_of_) {
      ISM_REQUIRE(b >= 0 && static_cast<std::size_t>(b) < capacity_.size(),
                  "element assigned to an unknown block");
    }
    for (int c : capacity_) ISM_REQUIRE(c >= 1, "block capacity must be >= 1");
  }

  // One element per block, e.g. one action per robot.
  static PartitionMatroid partition(std::vector<int> block_of) {
    int blocks = block_of.empty()
                     ? 0
                     : *std::max_element(block_of.begin(), block_of.end()) + 1;
    return PartitionMatroid(std::move(block_of),
                            std::vector<int>(static_cast<std::size_t>(blocks), 1));
  }

  static PartitionMatroid uniform(std::size_t ground_size, int rank) {
    return PartitionMatroid(std::vector<int>(ground_size, 0), {rank});
  }

  std::size_t ground_size() const noexcept { return block_of_.size(); }
  std::size_t block_count() const noexcept { return capacity_.size(); }
  int block_of(ElementId e) const { return block_of_.at(static_cast<std::size_t>(e)); }
  int capacity(int block) const { return capacity_.at(static_cast<std::size_t>(block)); }
  const std::vector<int>& blocks() const noexcept { return block_of_; }
  const std::vector<int>& capacities() const noexcept { return capacity_; }

  bool is_independent(std::span<const ElementId> s) const {
    std::vector<int> used(capacity_.size(), 0);
    for (ElementId e : s) {
      if (e < 0 || static_cast<std::size_t>(e) >= block_of_.size()) return false;
      auto b = static_cast<std::size_t>(block_of_[static_cast<std::size_t>(e)]);
      if (++used[b] > capacity_[b]) return false;
    }
    return true;
  }

  // Assumes `s` is independent and e is not in it.
  bool can_add(std::span<const ElementId> s, ElementId e) const {
    int b = block_of(e);
    int used = 0;
    for (ElementId x : s) used += block_of(x) == b ? 1 : 0;
    return used + 1 <= capacity_[static_cast<std::size_t>(b)];
  }

  // Size of a maximum independent set.
  std::size_t rank() const {
    std::vector<int> count(capacity_.size(), 0);
    for (int b : block_of_) ++count[static_cast<std::size_t>(b)];
    std::size_t r = 0;
    for (std::size_t b = 0; b < capacity_.size(); ++b) {
      r += static_cast<std::size_t>(std::min(count[b], capacity_[b]));
    }
    return r;
  }

  // With unit capacities this is the block count (one action per robot).
  std::size_t default_budget() const { return rank(); }

 private:
  std::vector<int> block_of_;
  std::vector<int> capacity_;
};

inline bool is_independent(const PartitionMatroid& m,
                           std::span<const ElementId> s) {
  return m.is_independent(s);
}

struct SubsetHash {
  std::size_t operator()(const Subset& s) const noexcept {
    std::uint64_t h = 1469598103934665603ull;
    for (ElementId e : s) {
      h ^= static_cast<std::uint64_t>(static_cast<std::uint32_t>(e));
      h *= 1099511628211ull;
    }
    return static_cast<std::size_t>(h ^ (s.size() * 0x9e3779b97f4a7c15ull));
  }
};

struct CacheStats {
  std::size_t hits = 0;
  std::size_t misses = 0;
  std::size_t size = 0;
};

// f(S, theta) = theta^T g(S). The basis g is supplied as a callable that
// receives canonical subsets. Evaluations are memoized in a bounded LRU cache
// keyed by the canonical subset; copies share the basis but start with an
// empty cache.
class LinearObjective {
 public:
  using BasisFn = std::function<Vector(std::span<const ElementId>)>;
  static constexpr std::size_t kDefaultCacheCapacity = std::size_t{1} << 16;

  LinearObjective(std::size_t ground_size, std::size_t dimension, BasisFn fn,
                  std::size_t cache_capacity = kDefaultCacheCapacity)
      : ground_size_(ground_size),
        dimension_(dimension),
        fn_(std::make_shared<BasisFn>(std::move(fn))),
        cache_(std::make_unique<Cache>(cache_capacity)) {
    ISM_REQUIRE(ground_size >= 1, "objective needs a nonempty ground set");
    ISM_REQUIRE(dimension >= 1, "objective dimension must be >= 1");
    Vector empty = basis({});
    ISM_REQUIRE(empty.cwiseAbs().maxCoeff() <= 1e-12,
                "basis must vanish on the empty set");
  }

  LinearObjective(const LinearObjective& other)
      : ground_size_(other.ground_size_),
        dimension_(other.dimension_),
        fn_(other.fn_),
        cache_(std::make_unique<Cache>(other.cache_->capacity)) {}

  LinearObjective& operator=(const LinearObjective& other) {
    if (this != &other) *this = LinearObjective(other);
    return *this;
  }

  LinearObjective(LinearObjective&&) noexcept = default;
  LinearObjective& operator=(LinearObjective&&) noexcept = default;

  std::size_t ground_size() const noexcept { return ground_size_; }
  std::size_t dimension() const noexcept { return dimension_; }

  // g(S). `subset` may be in any order.
  Vector basis(std::span<const ElementId> subset) const {
    Subset key = canonical(subset);
    for (ElementId e : key) {
      ISM_REQUIRE(e >= 0 && static_cast<std::size_t>(e) < ground_size_,
                  "subset element outside the ground set");
    }
    return lookup(std::move(key));
  }

  CacheStats cache_stats() const {
    std::lock_guard lock(cache_->mutex);
    return {cache_->hits, cache_->misses, cache_->map.size()};
  }

  void clear_cache() const {
    std::lock_guard lock(cache_->mutex);
    cache_->map.clear();
    cache_->lru.clear();
    cache_->hits = cache_->misses = 0;
  }

 private:
  struct Cache {
    explicit Cache(std::size_t cap) : capacity(cap) {}
    std::size_t capacity;
    std::mutex mutex;
    std::list<std::pair<Subset, Vector>> lru;
    std::unordered_map<Subset, std::list<std::pair<Subset, Vector>>::iterator,
                       SubsetHash>
        map;
    std::size_t hits = 0;
    std::size_t misses = 0;
  };

  Vector lookup(Subset key) const {
    {
      std::lock_guard lock(cache_->mutex);
      auto it = cache_->map.find(key);
      if (it != cache_->map.end()) {
        cache_->lru.splice(cache_->lru.begin(), cache_->lru, it->second);
        ++cache_->hits;
        return it->second->second;
      }
      ++cache_->misses;
    }
    // Evaluated outside the lock; concurrent misses on one key compute the
    // same deterministic value.
    Vector g = (*fn_)(key);
    ISM_REQUIRE(static_cast<std::size_t>(g.size()) == dimension_,
                "basis returned a vector of the wrong dimension");
    if (cache_->capacity == 0) return g;
    std::lock_guard lock(cache_->mutex);
    if (cache_->map.find(key) == cache_->map.end()) {
      cache_->lru.emplace_front(key, g);
      cache_->map.emplace(std::move(key), cache_->lru.begin());
      if (cache_->map.size() > cache_->capacity) {
        cache_->map.erase(cache_->lru.back().first);
        cache_->lru.pop_back();
      }
    }
    return g;
  }

  std::size_t ground_size_;
  std::size_t dimension_;
  std::shared_ptr<BasisFn> fn_;
  std::unique_ptr<Cache> cache_;
};

inline void require_dimension(const LinearObjective& objective,
                              const Vector& theta) {
  ISM_REQUIRE(static_cast<std::size_t>(theta.size()) == objective.dimension(),
              "parameter vector dimension does not match the objective");
}

// theta must be finite, and nonnegative when requested.
inline void validate_parameters(const Vector& theta, bool nonnegative) {
  ISM_REQUIRE(theta.allFinite(), "parameter vector has non-finite entries");
  if (nonnegative) {
    ISM_REQUIRE(theta.size() == 0 || theta.minCoeff() >= 0.0,
                "parameter vector must be nonnegative");
  }
}

inline double evaluate(const LinearObjective& objective, const Vector& theta,
                       std::span<const ElementId> s) {
  require_dimension(objective, theta);
  return theta.dot(objective.basis(s));
}

inline double marginal_gain(const LinearObjective& objective,
                            const Vector& theta, ElementId s,
                            std::span<const ElementId> set) {
  ISM_REQUIRE(!contains(set, s), "marginal gain of an element already in S");
  Subset base = canonical(set);
  Subset grown = with_element(base, s);
  return evaluate(objective, theta, grown) - evaluate(objective, theta, base);
}

// Resolves exact (within tolerance) ties in the greedy argmax. PreferSet
// picks the tied element that appears earliest in `preferred`; if none of
// the tied elements is preferred, the lowest id wins.
struct TieBreakRule {
  enum class Kind { LowestId, PreferSet };

  Kind kind = Kind::LowestId;
  std::vector<ElementId> preferred;

  static TieBreakRule lowest_id() { return {}; }
  static TieBreakRule prefer(std::vector<ElementId> p) {
    return {Kind::PreferSet, std::move(p)};
  }
};

struct OrderedSelection {
  std::vector<ElementId> sequence;
  std::vector<double> values;  // f after each prefix
  bool truncated = false;      // ran out of feasible elements before budget
};

inline constexpr double kGreedyTieTolerance = 1e-12;

inline OrderedSelection greedy_maximize(
    const LinearObjective& objective, const Vector& theta,
    const PartitionMatroid& matroid, std::optional<std::size_t> budget = {},
    const TieBreakRule& tie_break = {},
    double tie_tolerance = kGreedyTieTolerance) {
  require_dimension(objective, theta);
  ISM_REQUIRE(matroid.ground_size() == objective.ground_size(),
              "matroid and objective disagree on the ground set");
  const std::size_t n = budget.value_or(matroid.default_budget());

  OrderedSelection out;
  Subset current;  // canonical
  double f_current = 0.0;
  const auto ground = static_cast<ElementId>(objective.ground_size());

  while (out.sequence.size() < n) {
    std::vector<std::pair<ElementId, double>> gains;
    double best = -std::numeric_limits<double>::infinity();
    for (ElementId e = 0; e < ground; ++e) {
      if (std::binary_search(current.begin(), current.end(), e)) continue;
      if (!matroid.can_add(current, e)) continue;
      double gain = evaluate(objective, theta, with_element(current, e)) - f_current;
      gains.emplace_back(e, gain);
      best = std::max(best, gain);
    }
    if (gains.empty()) {
      out.truncated = true;
      break;
    }

    // Gains are scanned in ascending id order, so a strict comparison on the
    // preference rank keeps the lowest id among equals.
    ElementId chosen = -1;
    std::size_t chosen_rank = std::numeric_limits<std::size_t>::max();
    for (auto [e, gain] : gains) {
      if (gain < best - tie_tolerance) continue;
      std::size_t rank = 0;
      if (tie_break.kind == TieBreakRule::Kind::PreferSet) {
        auto it = std::find(tie_break.preferred.begin(),
                            tie_break.preferred.end(), e);
        rank = static_cast<std::size_t>(it - tie_break.preferred.begin());
      }
      if (rank < chosen_rank) {
        chosen = e;
        chosen_rank = rank;
      }
    }

    current = with_element(current, chosen);
    f_current = evaluate(objective, theta, current);
    out.sequence.push_back(chosen);
    out.values.push_back(f_current);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Exhaustive structural checks over all subsets of a small ground set.

using SetFunction = std::function<double(std::span<const ElementId>)>;

struct Counterexample {
  Subset a;
  Subset b;
  ElementId v = -1;  // unused by the monotonicity checks
  double lhs = 0.0;
  double rhs = 0.0;
};

struct CheckResult {
  bool holds = true;
  std::optional<Counterexample> counterexample;

  explicit operator bool() const noexcept { return holds; }
};

struct CheckOptions {
  std::size_t cap = 10;
  double tolerance = 1e-9;
};

namespace detail {

inline Subset mask_to_subset(std::uint32_t mask) {
  Subset s;
  for (ElementId i = 0; mask != 0; ++i, mask >>= 1) {
    if (mask & 1u) s.push_back(i);
  }
  return s;
}

inline std::vector<double> tabulate(const SetFunction& fn,
                                    const GroundSet& ground,
                                    const CheckOptions& options) {
  if (ground.size() > options.cap) {
    throw CapExceeded("ground set of size " + std::to_string(ground.size()) +
                      " exceeds the enumeration cap of " +
                      std::to_string(options.cap));
  }
  const std::uint32_t count = 1u << ground.size();
  std::vector<double> values(count);
  for (std::uint32_t mask = 0; mask < count; ++mask) {
    values[mask] = fn(mask_to_subset(mask));
  }
  return values;
}

// sign = +1 checks submodularity, -1 supermodularity.
inline CheckResult check_diminishing(const SetFunction& fn,
                                     const GroundSet& ground,
                                     const CheckOptions& options, double sign) {
  const auto values = tabulate(fn, ground, options);
  const std::uint32_t count = static_cast<std::uint32_t>(values.size());
  const auto n = static_cast<std::uint32_t>(ground.size());
  for (std::uint32_t b = 0; b < count; ++b) {
    // Ascending submasks of b, starting from the empty set.
    for (std::uint32_t a = 0;; a = (a - b) & b) {
      for (std::uint32_t v = 0; v < n; ++v) {
        const std::uint32_t bit = 1u << v;
        if (b & bit) continue;
        double lhs = values[a | bit] - values[a];
        double rhs = values[b | bit] - values[b];
        if (sign * (lhs - rhs) < -options.tolerance) {
          return {false, Counterexample{mask_to_subset(a), mask_to_subset(b),
                                        static_cast<ElementId>(v), lhs, rhs}};
        }
      }
      if (a == b) break;
    }
  }
  return {};
}

// sign = +1 checks non-decreasing, -1 non-increasing.
inline CheckResult check_order(const SetFunction& fn, const GroundSet& ground,
                               const CheckOptions& options, double sign) {
  const auto values = tabulate(fn, ground, options);
  const std::uint32_t count = static_cast<std::uint32_t>(values.size());
  for (std::uint32_t b = 0; b < count; ++b) {
    for (std::uint32_t a = 0;; a = (a - b) & b) {
      if (sign * (values[b] - values[a]) < -options.tolerance) {
        return {false, Counterexample{mask_to_subset(a), mask_to_subset(b), -1,
                                      values[a], values[b]}};
      }
      if (a == b) break;
    }
  }
  return {};
}

}  // namespace detail

// f(A + v) - f(A) >= f(B + v) - f(B) for all A subset of B, v outside B.
inline CheckResult check_submodular(const SetFunction& fn,
                                    const GroundSet& ground,
                                    const CheckOptions& options = {}) {
  return detail::check_diminishing(fn, ground, options, +1.0);
}

inline CheckResult check_supermodular(const SetFunction& fn,
                                      const GroundSet& ground,
                                      const CheckOptions& options = {}) {
  return detail::check_diminishing(fn, ground, options, -1.0);
}

// f(A) <= f(B) for all A subset of B.
inline CheckResult check_monotone(const SetFunction& fn,
                                  const GroundSet& ground,
                                  const CheckOptions& options = {}) {
  return detail::check_order(fn, ground, options, +1.0);
}

inline CheckResult check_nonincreasing(const SetFunction& fn,
                                       const GroundSet& ground,
                                       const CheckOptions& options = {}) {
  return detail::check_order(fn, ground, options, -1.0);
}

// One basis component (or theta-weighted value) of an objective, viewed as a
// plain set function for the checkers.
inline SetFunction component_function(const LinearObjective& objective,
                                      std::size_t j) {
  return [&objective, j](std::span<const ElementId> s) {
    return objective.basis(s)(static_cast<Eigen::Index>(j));
  };
}

inline SetFunction weighted_function(const LinearObjective& objective,
                                     Vector theta) {
  return [&objective, theta = std::move(theta)](std::span<const ElementId> s) {
    return evaluate(objective, theta, s);
  };
}

}  // namespace ism
