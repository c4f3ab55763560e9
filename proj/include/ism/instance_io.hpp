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

// Instance documents for the command-line tools. A document carries the
// prior, the suggestion, solver options and a basis: an explicit table keyed
// by subset, per-element vectors (modular), or a coverage scenario whose
// tick-0 candidate actions form the ground set.

#include <fstream>
#include <map>
#include <memory>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "ism/bbism.hpp"
#include "ism/error.hpp"
#include "ism/json_util.hpp"
#include "ism/oism.hpp"
#include "ism/simulation.hpp"
#include "ism/submodular.hpp"

namespace ism {

struct LoadedInstance {
  IsmInstance instance;
  bool ordered = false;                    // solve the suggestion as given
  std::vector<ElementId> ordering;         // the suggestion in document order
  std::shared_ptr<const Simulation> simulation;  // coverage documents only
};

inline json read_json_file(const std::string& file) {
  std::ifstream in(file);
  if (!in) throw SchemaError("", "cannot open " + file);
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw SchemaError("", file + ": " + e.what());
  }
}

namespace detail {

inline PartitionMatroid matroid_from_json(const json& j, const std::string& path,
                                          std::size_t ground) {
  const std::string kind = js::string(js::at(j, path, "kind"), js::child(path, "kind"));
  if (kind == "uniform") {
    const auto rank = js::integer(js::at(j, path, "rank"), js::child(path, "rank"));
    if (rank < 1) throw SchemaError(js::child(path, "rank"), "must be >= 1");
    return PartitionMatroid::uniform(ground, static_cast<int>(rank));
  }
  if (kind == "partition") {
    const std::string bp = js::child(path, "blocks");
    auto blocks = js::int_list(js::at(j, path, "blocks"), bp);
    if (blocks.size() != ground) throw SchemaError(bp, "need one block per element");
    int count = 0;
    for (std::size_t i = 0; i < blocks.size(); ++i) {
      if (blocks[i] < 0) throw SchemaError(js::child(bp, i), "must be >= 0");
      count = std::max(count, blocks[i] + 1);
    }
    std::vector<int> capacity(static_cast<std::size_t>(count), 1);
    if (js::has(j, "capacity")) {
      const std::string cp = js::child(path, "capacity");
      const json& c = j.at("capacity");
      if (c.is_array()) {
        capacity = js::int_list(c, cp);
        if (capacity.size() != static_cast<std::size_t>(count)) {
          throw SchemaError(cp, "need one capacity per block");
        }
      } else {
        capacity.assign(static_cast<std::size_t>(count), static_cast<int>(js::integer(c, cp)));
      }
      for (std::size_t b = 0; b < capacity.size(); ++b) {
        if (capacity[b] < 1) throw SchemaError(js::child(cp, b), "must be >= 1");
      }
    }
    return PartitionMatroid(std::move(blocks), std::move(capacity));
  }
  throw SchemaError(js::child(path, "kind"), "expected \"uniform\" or \"partition\"");
}

inline std::string subset_key(std::span<const ElementId> s) {
  std::string k;
  for (ElementId e : s) k += std::to_string(e) + ",";
  return k;
}

}  // namespace detail

inline LoadedInstance instance_from_json(const json& j, const std::string& base_dir = ".") {
  const std::string root;
  if (!j.is_object()) throw SchemaError(root, "expected an object");
  LoadedInstance out;
  IsmInstance& inst = out.instance;

  const std::string bp = "/basis";
  const json& basis = js::at(j, root, "basis");
  const std::string kind = js::string(js::at(basis, bp, "kind"), js::child(bp, "kind"));
  bool default_nonnegative = false;

  if (kind == "table" || kind == "modular") {
    std::size_t ground = 0, dim = 0;
    LinearObjective::BasisFn fn;
    if (kind == "table") {
      ground = static_cast<std::size_t>(
          js::integer(js::at(basis, bp, "ground_size"), js::child(bp, "ground_size")));
      dim = static_cast<std::size_t>(
          js::integer(js::at(basis, bp, "dimension"), js::child(bp, "dimension")));
      if (ground < 1) throw SchemaError(js::child(bp, "ground_size"), "must be >= 1");
      if (dim < 1) throw SchemaError(js::child(bp, "dimension"), "must be >= 1");
      auto table = std::make_shared<std::unordered_map<std::string, Vector>>();
      (*table)[""] = Vector::Zero(static_cast<Eigen::Index>(dim));
      const std::string ep = js::child(bp, "entries");
      const json& entries = js::array(js::at(basis, bp, "entries"), ep);
      for (std::size_t i = 0; i < entries.size(); ++i) {
        const std::string p = js::child(ep, i);
        auto ids = js::int_list(js::at(entries[i], p, "subset"), js::child(p, "subset"));
        std::vector<ElementId> s(ids.begin(), ids.end());
        for (std::size_t q = 0; q < s.size(); ++q) {
          if (s[q] < 0 || static_cast<std::size_t>(s[q]) >= ground) {
            throw SchemaError(js::child(js::child(p, "subset"), q), "element outside the ground set");
          }
        }
        Subset key;
        try {
          key = canonical(s);
        } catch (const ContractViolation&) {
          throw SchemaError(js::child(p, "subset"), "duplicate elements");
        }
        Vector g = js::vector(js::at(entries[i], p, "g"), js::child(p, "g"));
        if (static_cast<std::size_t>(g.size()) != dim) {
          throw SchemaError(js::child(p, "g"), "length must equal the dimension");
        }
        (*table)[detail::subset_key(key)] = g;
      }
      fn = [table](std::span<const ElementId> s) -> Vector {
        auto it = table->find(detail::subset_key(s));
        if (it == table->end()) {
          throw ContractViolation("basis table has no entry for subset {" +
                                  detail::subset_key(s) + "}");
        }
        return it->second;
      };
    } else {
      const std::string vp = js::child(bp, "vectors");
      const json& vectors = js::array(js::at(basis, bp, "vectors"), vp);
      if (vectors.empty()) throw SchemaError(vp, "at least one element is required");
      auto rows = std::make_shared<std::vector<Vector>>();
      for (std::size_t i = 0; i < vectors.size(); ++i) {
        rows->push_back(js::vector(vectors[i], js::child(vp, i)));
        if (rows->back().size() != rows->front().size() || rows->back().size() == 0) {
          throw SchemaError(js::child(vp, i), "all vectors need one common, nonzero length");
        }
      }
      ground = rows->size();
      dim = static_cast<std::size_t>(rows->front().size());
      fn = [rows, dim](std::span<const ElementId> s) {
        Vector g = Vector::Zero(static_cast<Eigen::Index>(dim));
        for (ElementId e : s) g += (*rows)[static_cast<std::size_t>(e)];
        return g;
      };
    }
    inst.objective = std::make_shared<const LinearObjective>(ground, dim, fn);
    inst.matroid = detail::matroid_from_json(js::at(j, root, "matroid"), "/matroid", ground);
    inst.theta0 = js::vector(js::at(j, root, "theta0"), "/theta0");
    if (static_cast<std::size_t>(inst.theta0.size()) != dim) {
      throw SchemaError("/theta0", "length must equal the basis dimension");
    }
    const auto ids = js::int_list(js::at(j, root, "suggestion"), "/suggestion");
    out.ordering.assign(ids.begin(), ids.end());
  } else if (kind == "coverage") {
    json scenario;
    if (js::has(basis, "scenario")) {
      scenario = basis.at("scenario");
    } else {
      std::string file = js::string(js::at(basis, bp, "scenario_file"), js::child(bp, "scenario_file"));
      if (!file.empty() && file.front() != '/') file = base_dir + "/" + file;
      scenario = read_json_file(file);
    }
    auto sim = std::make_shared<Simulation>(scenario_from_json(scenario, js::child(bp, "scenario")));
    const auto ticks = js::integer_or(basis, bp, "advance", 0);
    if (ticks < 0) throw SchemaError(js::child(bp, "advance"), "must be >= 0");
    sim->advance(static_cast<int>(ticks));
    auto plan = sim->current_plan();
    inst.objective = plan->objective;
    inst.matroid = plan->matroid;
    inst.theta0 = js::has(j, "theta0") ? js::vector(j.at("theta0"), "/theta0") : sim->theta();
    if (inst.theta0.size() != sim->theta().size()) {
      throw SchemaError("/theta0", "length must equal the event count");
    }
    const json& s = js::at(j, root, "suggestion");
    if (s.is_object()) {  // robot -> action id
      SuggestionEvent ev = suggestion_from_json({{"actions", s}}, "", sim->scenario().robots.size(),
                                                sim->scenario().solver);
      for (const auto& [robot, action] : ev.actions) {
        if (action >= plan->counts[static_cast<std::size_t>(robot)]) {
          throw SchemaError("/suggestion/" + std::to_string(robot), "unknown action id");
        }
        out.ordering.push_back(plan->element(robot, action));
      }
    } else {
      const auto ids = js::int_list(s, "/suggestion");
      out.ordering.assign(ids.begin(), ids.end());
    }
    default_nonnegative = sim->scenario().solver.nonnegative;
    inst.epsilon = sim->scenario().solver.epsilon;
    out.simulation = sim;
  } else {
    throw SchemaError(js::child(bp, "kind"), "expected \"table\", \"modular\" or \"coverage\"");
  }

  if (out.ordering.empty()) throw SchemaError("/suggestion", "must be nonempty");
  for (std::size_t i = 0; i < out.ordering.size(); ++i) {
    const ElementId e = out.ordering[i];
    if (e < 0 || static_cast<std::size_t>(e) >= inst.objective->ground_size()) {
      throw SchemaError("/suggestion/" + std::to_string(i), "element outside the ground set");
    }
  }
  inst.suggestion = out.ordering;
  inst.epsilon = js::number_or(j, root, "epsilon", inst.epsilon);
  if (inst.epsilon < 0.0) throw SchemaError("/epsilon", "must be >= 0");
  const std::size_t d = static_cast<std::size_t>(inst.theta0.size());
  inst.domain = js::has(j, "domain")
                    ? domain_from_json(j.at("domain"), "/domain", d, default_nonnegative)
                    : (default_nonnegative ? QpDomain::nonnegative(d) : QpDomain{});
  if (out.simulation && !js::has(j, "domain")) {
    inst.domain.preserve_sum = out.simulation->scenario().solver.preserve_sum;
  }
  if (js::has(j, "qp")) {
    inst.qp.max_iterations = static_cast<int>(
        js::integer_or(j.at("qp"), "/qp", "max_iterations", inst.qp.max_iterations));
  }
  out.ordered = js::boolean_or(j, root, "ordered", false);
  try {
    inst.validate();
  } catch (const ContractViolation& e) {
    throw SchemaError("/suggestion", e.what());
  }
  return out;
}

inline LoadedInstance load_instance(const std::string& file) {
  const auto slash = file.find_last_of('/');
  const std::string dir = slash == std::string::npos ? "." : file.substr(0, slash);
  return instance_from_json(read_json_file(file), dir);
}

}  // namespace ism
