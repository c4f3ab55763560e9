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

// Ordered inverse submodular maximization. For an ordering S^ of the
// suggestion, greedy under theta^ reproduces S^ iff at every step i the
// chosen element's gain dominates every feasible competitor s:
//
//   theta^T (g(S^[1:i-1] + s) - g(S^[1:i-1] + S^[i])) <= -margin.
//
// The shared g(S^[1:i-1]) terms cancel, so each condition is one linear row
// b^T theta <= -margin. The closest theta^ to the prior is the Euclidean
// projection of theta onto the row polyhedron (plus domain constraints).

#include <Eigen/Dense>

#include <cstring>
#include <optional>
#include <span>
#include <unordered_set>
#include <vector>

#include "ism/error.hpp"
#include "ism/json_util.hpp"
#include "ism/qp.hpp"
#include "ism/submodular.hpp"

namespace ism {

struct ConstraintRow {
  Vector b;
  std::size_t prefix_length = 0;  // i, 1-based position in the ordering
  ElementId competitor = -1;
  double margin = 0.0;            // row reads b^T theta <= -margin
};

// Optional lower bounds per coordinate (-inf for none) and optional
// preservation of sum(theta).
struct QpDomain {
  std::optional<Vector> lower_bounds;
  bool preserve_sum = false;

  static QpDomain nonnegative(std::size_t dimension) {
    return {Vector::Zero(static_cast<Eigen::Index>(dimension)), false};
  }
};

struct OismInstance {
  Vector theta0;
  std::vector<ConstraintRow> rows;
  QpDomain domain;
};

struct QpSolution {
  QpStatus status = QpStatus::NonConverged;
  Vector theta_hat;
  double objective = 0.0;  // ||theta_hat - theta0||
  Vector multipliers;      // per row
  Vector lower_multipliers;
  double sum_multiplier = 0.0;
  KktResiduals residuals;
  // Certified lower bound on min ||theta - theta0|| over the feasible set,
  // available for Optimal and NonConverged solves.
  double lower_bound = 0.0;
  int iterations = 0;
};

namespace detail {

struct VectorBitsHash {
  std::size_t operator()(const Vector& v) const noexcept {
    std::uint64_t h = 1469598103934665603ull;
    for (Eigen::Index i = 0; i < v.size(); ++i) {
      double x = v(i) == 0.0 ? 0.0 : v(i);  // fold -0.0 into +0.0
      std::uint64_t bits;
      std::memcpy(&bits, &x, sizeof bits);
      h ^= bits;
      h *= 1099511628211ull;
    }
    return static_cast<std::size_t>(h);
  }
};

struct VectorEqual {
  bool operator()(const Vector& a, const Vector& b) const noexcept {
    return a.size() == b.size() && (a.array() == b.array()).all();
  }
};

}  // namespace detail

// Rows contributed by position `i` (1-based) of the ordering.
inline void append_position_rows(const LinearObjective& objective,
                                 std::span<const ElementId> ordering,
                                 std::size_t i, const PartitionMatroid& matroid,
                                 double margin, std::vector<ConstraintRow>& out) {
  Subset prefix = canonical(ordering.first(i - 1));
  const ElementId chosen = ordering[i - 1];
  const Vector g_chosen = objective.basis(with_element(prefix, chosen));
  Subset through_i = with_element(prefix, chosen);
  const auto ground = static_cast<ElementId>(objective.ground_size());
  for (ElementId s = 0; s < ground; ++s) {
    if (std::binary_search(through_i.begin(), through_i.end(), s)) continue;
    if (!matroid.can_add(prefix, s)) continue;
    out.push_back({objective.basis(with_element(prefix, s)) - g_chosen, i, s, margin});
  }
}

// Greedy-consistency rows for every position of `ordering`. Rows with
// bit-identical b are kept once.
inline std::vector<ConstraintRow> build_constraints(
    const LinearObjective& objective, std::span<const ElementId> ordering,
    const PartitionMatroid& matroid, double margin = 0.0, bool dedupe = true) {
  ISM_REQUIRE(margin >= 0.0, "margin must be nonnegative");
  ISM_REQUIRE(matroid.ground_size() == objective.ground_size(),
              "matroid and objective disagree on the ground set");
  canonical(ordering);  // rejects duplicates
  for (std::size_t i = 1; i <= ordering.size(); ++i) {
    ISM_REQUIRE(matroid.is_independent(ordering.first(i)),
                "ordering prefix is not independent");
  }
  std::vector<ConstraintRow> rows;
  for (std::size_t i = 1; i <= ordering.size(); ++i) {
    append_position_rows(objective, ordering, i, matroid, margin, rows);
  }
  if (!dedupe) return rows;
  std::unordered_set<Vector, detail::VectorBitsHash, detail::VectorEqual> seen;
  std::vector<ConstraintRow> unique;
  unique.reserve(rows.size());
  for (auto& r : rows) {
    if (seen.insert(r.b).second) unique.push_back(std::move(r));
  }
  return unique;
}

inline OismInstance make_oism_instance(const LinearObjective& objective,
                                       std::span<const ElementId> ordering,
                                       const PartitionMatroid& matroid,
                                       const Vector& theta0, double margin = 0.0,
                                       QpDomain domain = {}) {
  require_dimension(objective, theta0);
  return {theta0, build_constraints(objective, ordering, matroid, margin),
          std::move(domain)};
}

inline ProjectionProblem to_projection(const OismInstance& instance) {
  const Eigen::Index d = instance.theta0.size();
  ProjectionProblem p;
  p.center = instance.theta0;
  p.rows.resize(static_cast<Eigen::Index>(instance.rows.size()), d);
  p.rhs.resize(static_cast<Eigen::Index>(instance.rows.size()));
  for (std::size_t j = 0; j < instance.rows.size(); ++j) {
    const auto& r = instance.rows[j];
    ISM_REQUIRE(r.b.size() == d, "constraint row dimension mismatch");
    p.rows.row(static_cast<Eigen::Index>(j)) = r.b.transpose();
    p.rhs(static_cast<Eigen::Index>(j)) = -r.margin;
  }
  if (instance.domain.lower_bounds) {
    ISM_REQUIRE(instance.domain.lower_bounds->size() == d,
                "lower bound dimension mismatch");
    p.lower = instance.domain.lower_bounds;
  }
  if (instance.domain.preserve_sum) p.sum = instance.theta0.sum();
  return p;
}

inline QpSolution solve_oism(const OismInstance& instance,
                             const QpOptions& options = {}) {
  ISM_REQUIRE(instance.theta0.allFinite(), "prior must be finite");
  const ProjectionProblem problem = to_projection(instance);
  auto res = project_onto_polyhedron(problem, options);
  QpSolution out;
  out.status = res.status;
  out.iterations = res.iterations;
  if (res.status == QpStatus::Infeasible) return out;
  out.theta_hat = res.x;
  out.objective = (res.x - instance.theta0).norm();
  out.multipliers = std::move(res.row_multipliers);
  out.lower_multipliers = std::move(res.lower_multipliers);
  out.sum_multiplier = res.sum_multiplier;
  out.residuals = res.residuals;
  out.lower_bound = dual_lower_bound(problem, out.multipliers, out.lower_multipliers,
                                     out.sum_multiplier);
  return out;
}

// Does greedy under theta_hat reproduce `ordering` exactly? The default tie
// rule prefers the ordering's own elements in order.
inline bool verify_greedy_consistency(const LinearObjective& objective,
                                      const Vector& theta_hat,
                                      std::span<const ElementId> ordering,
                                      const PartitionMatroid& matroid,
                                      std::optional<TieBreakRule> tie_break = {}) {
  TieBreakRule rule = tie_break.value_or(TieBreakRule::prefer(
      std::vector<ElementId>(ordering.begin(), ordering.end())));
  auto sel = greedy_maximize(objective, theta_hat, matroid, ordering.size(), rule);
  return !sel.truncated &&
         std::equal(sel.sequence.begin(), sel.sequence.end(), ordering.begin(),
                    ordering.end());
}

// ---------------------------------------------------------------------------
// Fixture replay format.

inline json to_json(const OismInstance& instance) {
  json rows = json::array();
  for (const auto& r : instance.rows) {
    rows.push_back({{"b", js::from_vector(r.b)},
                    {"prefix_length", r.prefix_length},
                    {"competitor", r.competitor},
                    {"margin", r.margin}});
  }
  json domain = {{"preserve_sum", instance.domain.preserve_sum}};
  if (instance.domain.lower_bounds) {
    json lb = json::array();
    for (Eigen::Index i = 0; i < instance.domain.lower_bounds->size(); ++i) {
      double l = (*instance.domain.lower_bounds)(i);
      lb.push_back(std::isfinite(l) ? json(l) : json(nullptr));
    }
    domain["lower_bounds"] = lb;
  }
  return {{"theta0", js::from_vector(instance.theta0)},
          {"rows", rows},
          {"domain", domain}};
}

inline QpDomain domain_from_json(const json& j, const std::string& path,
                                 std::size_t dimension,
                                 bool default_nonnegative = false) {
  QpDomain d;
  if (!j.is_object()) throw SchemaError(path, "expected an object");
  d.preserve_sum = js::boolean_or(j, path, "preserve_sum", false);
  if (js::boolean_or(j, path, "nonnegative", default_nonnegative)) {
    d.lower_bounds = Vector::Zero(static_cast<Eigen::Index>(dimension));
  }
  if (js::has(j, "lower_bounds")) {
    const auto p = js::child(path, "lower_bounds");
    const json& lb = js::array(j.at("lower_bounds"), p);
    if (lb.size() != dimension) throw SchemaError(p, "length must equal dim(theta0)");
    Vector v(static_cast<Eigen::Index>(dimension));
    for (std::size_t i = 0; i < dimension; ++i) {
      v(static_cast<Eigen::Index>(i)) =
          lb[i].is_null() ? -std::numeric_limits<double>::infinity()
                          : js::number(lb[i], js::child(p, i));
    }
    d.lower_bounds = v;
  }
  return d;
}

inline OismInstance oism_instance_from_json(const json& j,
                                            const std::string& path = "") {
  OismInstance inst;
  inst.theta0 = js::vector(js::at(j, path, "theta0"), js::child(path, "theta0"));
  const auto d = static_cast<std::size_t>(inst.theta0.size());
  const double epsilon = js::number_or(j, path, "epsilon", 0.0);
  const auto rows_path = js::child(path, "rows");
  const json& rows = js::array(js::at(j, path, "rows"), rows_path);
  for (std::size_t k = 0; k < rows.size(); ++k) {
    const auto rp = js::child(rows_path, k);
    ConstraintRow r;
    r.b = js::vector(js::at(rows[k], rp, "b"), js::child(rp, "b"));
    if (static_cast<std::size_t>(r.b.size()) != d) {
      throw SchemaError(js::child(rp, "b"), "length must equal dim(theta0)");
    }
    r.prefix_length = static_cast<std::size_t>(js::integer_or(rows[k], rp, "prefix_length", 0));
    r.competitor = static_cast<ElementId>(js::integer_or(rows[k], rp, "competitor", -1));
    r.margin = js::number_or(rows[k], rp, "margin", epsilon);
    inst.rows.push_back(std::move(r));
  }
  if (js::has(j, "domain")) {
    inst.domain = domain_from_json(j.at("domain"), js::child(path, "domain"), d);
  }
  return inst;
}

}  // namespace ism
