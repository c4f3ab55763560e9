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

// Unordered inverse submodular maximization: the suggestion is a set, so
// every ordering of it induces its own O-ISM instance and the answer is the
// best of them. BB-ISM grows orderings one element at a time; the O-ISM
// value of a prefix lower-bounds every ordering that extends it (more
// elements only add rows), which lets the depth-first search prune against
// the best full ordering found so far.

#include <Eigen/Dense>

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <random>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "ism/error.hpp"
#include "ism/oism.hpp"
#include "ism/qp.hpp"
#include "ism/submodular.hpp"

namespace ism {

struct IsmInstance {
  std::shared_ptr<const LinearObjective> objective;
  PartitionMatroid matroid = PartitionMatroid::uniform(1, 1);
  Vector theta0;
  std::vector<ElementId> suggestion;  // unordered
  double epsilon = 0.0;
  QpDomain domain;
  QpOptions qp;

  void validate() const {
    ISM_REQUIRE(objective != nullptr, "instance has no objective");
    require_dimension(*objective, theta0);
    ISM_REQUIRE(theta0.allFinite(), "prior must be finite");
    ISM_REQUIRE(matroid.ground_size() == objective->ground_size(),
                "matroid and objective disagree on the ground set");
    ISM_REQUIRE(!suggestion.empty(), "suggestion must be nonempty");
    canonical(suggestion);
    for (ElementId e : suggestion) {
      ISM_REQUIRE(e >= 0 && static_cast<std::size_t>(e) < objective->ground_size(),
                  "suggestion element outside the ground set");
    }
    ISM_REQUIRE(matroid.is_independent(suggestion), "suggestion is not independent");
    ISM_REQUIRE(epsilon >= 0.0, "epsilon must be nonnegative");
  }

  // Same instance over a copy of the objective with an empty cache.
  IsmInstance with_fresh_cache() const {
    IsmInstance copy = *this;
    copy.objective = std::make_shared<LinearObjective>(*objective);
    return copy;
  }
};

enum class SolveStatus { Optimal, Infeasible, NonConverged, TimedOut };

inline const char* to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::Optimal: return "Optimal";
    case SolveStatus::Infeasible: return "Infeasible";
    case SolveStatus::NonConverged: return "NonConverged";
    case SolveStatus::TimedOut: return "TimedOut";
  }
  return "?";
}

struct SolveCounters {
  std::size_t nodes_expanded = 0;
  std::size_t oism_solves = 0;
  std::size_t prunes_by_bound = 0;
  std::size_t prunes_by_infeasibility = 0;
  std::size_t uncertified_solves = 0;  // NonConverged, bounded through the dual
};

struct SearchNode {
  std::vector<ElementId> seq;
  double bound = 0.0;
  Vector theta_hat;
  double parent_bound = 0.0;
};

struct PruneRecord {
  std::vector<ElementId> prefix;
  bool infeasible = false;
  double bound = 0.0;      // O-ISM(prefix) when feasible
  double incumbent = 0.0;  // Tree.UB at the time of pruning
};

struct SolveReport {
  SolveStatus status = SolveStatus::Infeasible;
  Vector theta_hat;
  double objective = std::numeric_limits<double>::infinity();
  std::vector<ElementId> best_ordering;
  SolveCounters counters;
  // Memory proxy. For BB: the most search nodes alive at once (stack plus
  // pending children) and the largest row block assembled for one solve.
  // For the enumeration oracle: the size of the explicit formulation, i.e.
  // one candidate per ordering and all of their rows.
  std::size_t peak_live_nodes = 0;
  std::size_t peak_rows_held = 0;
  double wall_time_s = 0.0;
  std::vector<PruneRecord> pruned;  // diagnostics only
  std::vector<SearchNode> nodes;    // diagnostics only
};

struct ProgressEvent {
  std::size_t nodes_expanded = 0;
  std::size_t oism_solves = 0;
  double incumbent = std::numeric_limits<double>::infinity();
};

struct BbOptions {
  bool diagnostics = false;
  std::function<void(const ProgressEvent&)> progress;
  std::optional<std::chrono::steady_clock::time_point> deadline;
  // Pruning is "bound >= UB - prune_slack".
  double prune_slack = 1e-12;
};

// Number of O-ISM solves in a full tree over n elements:
// sum_{i=1..n} n! / (n - i)!.
inline double full_tree_solves(std::size_t n) {
  double total = 0.0, term = 1.0;
  for (std::size_t i = 1; i <= n; ++i) {
    term *= static_cast<double>(n - i + 1);
    total += term;
  }
  return total;
}

inline double factorial(std::size_t n) {
  double f = 1.0;
  for (std::size_t i = 2; i <= n; ++i) f *= static_cast<double>(i);
  return f;
}

inline QpSolution solve_ordering(const IsmInstance& instance,
                                 std::span<const ElementId> ordering,
                                 std::size_t* rows_used = nullptr) {
  OismInstance oism{instance.theta0,
                    build_constraints(*instance.objective, ordering,
                                      instance.matroid, instance.epsilon),
                    instance.domain};
  if (rows_used) *rows_used = oism.rows.size();
  return solve_oism(oism, instance.qp);
}

inline double normalized_deviation(const Vector& theta0, const Vector& theta_hat) {
  ISM_REQUIRE(theta0.size() == theta_hat.size(), "dimension mismatch");
  const double norm = theta0.norm();
  ISM_REQUIRE(norm > 0.0, "normalized deviation needs a nonzero prior");
  return (theta0 - theta_hat).norm() / norm;
}

namespace detail {

using Clock = std::chrono::steady_clock;

inline double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

inline constexpr double kDominanceSlack = 1e-12;

struct Incumbent {
  double objective = std::numeric_limits<double>::infinity();
  Vector theta_hat;
  std::vector<ElementId> ordering;
  bool nonconverged = false;
  // Smallest dual bound over NonConverged candidates. They are harmless when
  // this bound shows they cannot beat the certified incumbent.
  double uncertified_bound = std::numeric_limits<double>::infinity();

  // Candidates are visited in a fixed order, so keeping the first of equal
  // objectives makes results deterministic.
  void offer(const QpSolution& sol, std::span<const ElementId> ordering_) {
    if (sol.status == QpStatus::NonConverged) {
      nonconverged = true;
      uncertified_bound = std::min(uncertified_bound, sol.lower_bound);
    }
    if (sol.status != QpStatus::Optimal) return;
    if (sol.objective < objective) {
      objective = sol.objective;
      theta_hat = sol.theta_hat;
      ordering.assign(ordering_.begin(), ordering_.end());
    }
  }

  void fill(SolveReport& r) const {
    if (!ordering.empty() && uncertified_bound >= objective - kDominanceSlack) {
      r.status = SolveStatus::Optimal;
      r.objective = objective;
      r.theta_hat = theta_hat;
      r.best_ordering = ordering;
    } else {
      r.status = nonconverged ? SolveStatus::NonConverged : SolveStatus::Infeasible;
    }
  }
};

}  // namespace detail

inline SolveReport solve_bbism(const IsmInstance& instance,
                               const BbOptions& options = {}) {
  instance.validate();
  const auto start = detail::Clock::now();
  std::vector<ElementId> elements = canonical(instance.suggestion);
  const std::size_t n = elements.size();

  SolveReport report;
  double ub = std::numeric_limits<double>::infinity();
  bool have_incumbent = false;

  std::vector<SearchNode> stack;
  stack.push_back({{}, 0.0, instance.theta0, 0.0});
  // NonConverged children whose dual bound did not yet reach UB. Their
  // subtrees stay unexplored and must be dominated by the final UB.
  std::vector<double> deferred;
  report.peak_live_nodes = 1;

  struct Child {
    ElementId element;
    QpSolution sol;
  };

  while (!stack.empty()) {
    if (options.deadline && detail::Clock::now() > *options.deadline) {
      report.status = SolveStatus::TimedOut;
      report.wall_time_s = detail::seconds_since(start);
      return report;
    }
    SearchNode u = std::move(stack.back());
    stack.pop_back();
    if (u.seq.size() == n) continue;  // full ordering, nothing to branch on
    ++report.counters.nodes_expanded;

    // Lines 9-14: solve O-ISM(u.seq + s) for each remaining element.
    std::vector<Child> children;
    std::vector<ElementId> seq = u.seq;
    seq.push_back(-1);
    for (ElementId s : elements) {
      if (contains(u.seq, s)) continue;
      seq.back() = s;
      std::size_t rows = 0;
      QpSolution sol = solve_ordering(instance, seq, &rows);
      ++report.counters.oism_solves;
      report.peak_rows_held = std::max(report.peak_rows_held, rows);
      if (sol.status == QpStatus::NonConverged) {
        ++report.counters.uncertified_solves;
        if (sol.lower_bound >= ub - options.prune_slack) {
          ++report.counters.prunes_by_bound;
          if (options.diagnostics) report.pruned.push_back({seq, false, sol.lower_bound, ub});
        } else {
          deferred.push_back(sol.lower_bound);
        }
        continue;
      }
      if (sol.status == QpStatus::Infeasible) {
        ++report.counters.prunes_by_infeasibility;
        if (options.diagnostics) report.pruned.push_back({seq, true, 0.0, ub});
        continue;
      }
      children.push_back({s, std::move(sol)});
    }
    report.peak_live_nodes = std::max(
        report.peak_live_nodes, stack.size() + children.size() + deferred.size() + 1);

    // Lines 15-23: visit children by increasing objective (ties: lowest id).
    std::stable_sort(children.begin(), children.end(),
                     [](const Child& a, const Child& b) {
                       return a.sol.objective < b.sol.objective;
                     });
    std::vector<SearchNode> accepted;
    for (auto& c : children) {
      seq.back() = c.element;
      if (c.sol.objective >= ub - options.prune_slack) {
        ++report.counters.prunes_by_bound;
        if (options.diagnostics) {
          report.pruned.push_back({seq, false, c.sol.objective, ub});
        }
        continue;
      }
      if (seq.size() == n && c.sol.objective < ub) {  // update_UB
        ub = c.sol.objective;
        have_incumbent = true;
        report.objective = ub;
        report.theta_hat = c.sol.theta_hat;
        report.best_ordering = seq;
        if (options.progress) {
          options.progress({report.counters.nodes_expanded,
                            report.counters.oism_solves, ub});
        }
      }
      SearchNode node{seq, c.sol.objective, std::move(c.sol.theta_hat), u.bound};
      if (options.diagnostics) report.nodes.push_back(node);
      accepted.push_back(std::move(node));
    }
    // The smallest-objective child goes on top of the stack so it is
    // expanded first.
    for (auto it = accepted.rbegin(); it != accepted.rend(); ++it) {
      stack.push_back(std::move(*it));
    }
    report.peak_live_nodes = std::max(report.peak_live_nodes, stack.size() + deferred.size());
    if (options.progress) {
      options.progress({report.counters.nodes_expanded,
                        report.counters.oism_solves, ub});
    }
  }

  report.status = have_incumbent ? SolveStatus::Optimal : SolveStatus::Infeasible;
  for (double bound : deferred) {
    if (!(bound >= ub - options.prune_slack)) {
      report.status = SolveStatus::NonConverged;
      report.objective = std::numeric_limits<double>::infinity();
      report.theta_hat = Vector();
      report.best_ordering.clear();
      break;
    }
  }
  report.wall_time_s = detail::seconds_since(start);
  return report;
}

inline constexpr std::size_t kBruteForceCap = 8;

// Solves O-ISM for every ordering of the suggestion and keeps the best.
inline SolveReport brute_force_oracle(
    const IsmInstance& instance, std::size_t cap = kBruteForceCap,
    std::optional<std::chrono::steady_clock::time_point> deadline = std::nullopt) {
  instance.validate();
  if (instance.suggestion.size() > cap) {
    throw CapExceeded("brute-force oracle refuses suggestions larger than " +
                      std::to_string(cap) + " elements");
  }
  const auto start = detail::Clock::now();
  std::vector<ElementId> ordering = canonical(instance.suggestion);
  SolveReport report;
  detail::Incumbent best;
  std::size_t total_rows = 0, orderings = 0;
  do {
    if (deadline && detail::Clock::now() > *deadline) {
      report.status = SolveStatus::TimedOut;
      report.wall_time_s = detail::seconds_since(start);
      return report;
    }
    std::size_t rows = 0;
    QpSolution sol = solve_ordering(instance, ordering, &rows);
    ++report.counters.oism_solves;
    ++report.counters.nodes_expanded;
    ++orderings;
    total_rows += rows;
    if (sol.status == QpStatus::Infeasible) ++report.counters.prunes_by_infeasibility;
    best.offer(sol, ordering);
  } while (std::next_permutation(ordering.begin(), ordering.end()));
  best.fill(report);
  report.peak_live_nodes = orderings;
  report.peak_rows_held = total_rows;
  report.wall_time_s = detail::seconds_since(start);
  return report;
}

// Best of z sampled orderings (RS-z). The first min(z, n!) samples are
// distinct; any further samples are drawn with replacement. Samples for a
// given seed form one stream, so RS-z's samples are a prefix of RS-z''s for
// z <= z'.
inline std::vector<std::vector<ElementId>> sample_orderings(
    std::span<const ElementId> suggestion, std::size_t z, std::uint64_t seed) {
  std::vector<ElementId> base = canonical(suggestion);
  const double total = factorial(base.size());
  std::mt19937_64 rng(seed);
  std::set<std::vector<ElementId>> seen;
  std::vector<std::vector<ElementId>> out;
  out.reserve(z);
  while (out.size() < z) {
    std::vector<ElementId> perm = base;
    std::shuffle(perm.begin(), perm.end(), rng);
    const bool distinct_phase = static_cast<double>(seen.size()) < total;
    if (distinct_phase && !seen.insert(perm).second) continue;
    out.push_back(std::move(perm));
  }
  return out;
}

inline SolveReport random_sampling_baseline(const IsmInstance& instance,
                                            std::size_t z, std::uint64_t seed) {
  instance.validate();
  ISM_REQUIRE(z >= 1, "RS-z needs at least one sample");
  const auto start = detail::Clock::now();
  SolveReport report;
  detail::Incumbent best;
  for (const auto& ordering : sample_orderings(instance.suggestion, z, seed)) {
    std::size_t rows = 0;
    QpSolution sol = solve_ordering(instance, ordering, &rows);
    ++report.counters.oism_solves;
    ++report.counters.nodes_expanded;
    report.peak_rows_held = std::max(report.peak_rows_held, rows);
    if (sol.status == QpStatus::Infeasible) ++report.counters.prunes_by_infeasibility;
    best.offer(sol, ordering);
  }
  best.fill(report);
  report.peak_live_nodes = 1;
  report.wall_time_s = detail::seconds_since(start);
  return report;
}

inline json to_json(const SolveReport& r, const Vector* theta0 = nullptr) {
  json j = {{"status", to_string(r.status)},
            {"counters",
             {{"nodes_expanded", r.counters.nodes_expanded},
              {"oism_solves", r.counters.oism_solves},
              {"prunes_by_bound", r.counters.prunes_by_bound},
              {"prunes_by_infeasibility", r.counters.prunes_by_infeasibility},
              {"uncertified_solves", r.counters.uncertified_solves}}},
            {"peak_live_nodes", r.peak_live_nodes},
            {"peak_rows_held", r.peak_rows_held},
            {"wall_time_s", r.wall_time_s}};
  if (r.status == SolveStatus::Optimal) {
    j["objective"] = r.objective;
    j["theta_hat"] = js::from_vector(r.theta_hat);
    j["best_ordering"] = r.best_ordering;
    if (theta0 && theta0->norm() > 0.0) {
      j["normalized_deviation"] = normalized_deviation(*theta0, r.theta_hat);
    }
  }
  return j;
}

}  // namespace ism
