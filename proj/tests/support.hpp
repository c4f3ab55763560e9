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

// Shared fixtures for the test suites: small random set functions and ISM
// instances, exhaustive oracles.

#include <algorithm>
#include <cmath>
#include <fstream>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "ism/ism.hpp"

#ifndef ISM_SOURCE_DIR
#define ISM_SOURCE_DIR "."
#endif

namespace ism::testing {

inline std::string source_path(const std::string& rel) {
  return std::string(ISM_SOURCE_DIR) + "/" + rel;
}

inline json load_json(const std::string& rel) { return read_json_file(source_path(rel)); }

// Weighted coverage: element e covers a random subset of a universe, and
// component j weighs universe item u by w[j][u]. Each component is
// monotone submodular.
struct CoverageTable {
  std::vector<std::vector<int>> covers;       // per element
  std::vector<std::vector<double>> weights;   // per component, per item

  Vector operator()(std::span<const ElementId> s) const {
    Vector g = Vector::Zero(static_cast<Eigen::Index>(weights.size()));
    std::vector<char> hit(weights.front().size(), 0);
    for (ElementId e : s) {
      for (int u : covers[static_cast<std::size_t>(e)]) hit[static_cast<std::size_t>(u)] = 1;
    }
    for (std::size_t j = 0; j < weights.size(); ++j) {
      for (std::size_t u = 0; u < hit.size(); ++u) {
        if (hit[u]) g(static_cast<Eigen::Index>(j)) += weights[j][u];
      }
    }
    return g;
  }
};

inline CoverageTable random_coverage_table(std::mt19937_64& rng, std::size_t ground,
                                           std::size_t dim, std::size_t universe,
                                           double density = 0.3) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  CoverageTable t;
  t.covers.resize(ground);
  for (auto& c : t.covers) {
    for (std::size_t u = 0; u < universe; ++u) {
      if (unit(rng) < density) c.push_back(static_cast<int>(u));
    }
    if (c.empty()) c.push_back(static_cast<int>(rng() % universe));
  }
  t.weights.assign(dim, std::vector<double>(universe));
  for (auto& w : t.weights) {
    for (auto& x : w) x = unit(rng);
  }
  return t;
}

inline std::shared_ptr<const LinearObjective> random_objective(std::mt19937_64& rng,
                                                               std::size_t ground,
                                                               std::size_t dim,
                                                               std::size_t universe = 12) {
  auto table = random_coverage_table(rng, ground, dim, universe);
  return std::make_shared<const LinearObjective>(ground, dim, table);
}

inline Vector random_theta(std::mt19937_64& rng, std::size_t dim, double lo = 0.5,
                           double hi = 1.5) {
  std::uniform_real_distribution<double> u(lo, hi);
  Vector t(static_cast<Eigen::Index>(dim));
  for (auto& x : t) x = u(rng);
  return t;
}

// A partition matroid with `blocks` blocks of `per_block` consecutive ids.
inline PartitionMatroid block_matroid(std::size_t blocks, std::size_t per_block) {
  std::vector<int> block_of;
  for (std::size_t b = 0; b < blocks; ++b) {
    for (std::size_t k = 0; k < per_block; ++k) block_of.push_back(static_cast<int>(b));
  }
  return PartitionMatroid::partition(block_of);
}

// Suggestion = greedy output under a log-normally perturbed prior.
inline IsmInstance random_ism_instance(std::mt19937_64& rng, std::size_t blocks,
                                       std::size_t per_block, std::size_t dim,
                                       double epsilon = 0.0, bool nonnegative = true) {
  IsmInstance inst;
  const std::size_t ground = blocks * per_block;
  inst.objective = random_objective(rng, ground, dim);
  inst.matroid = block_matroid(blocks, per_block);
  inst.theta0 = random_theta(rng, dim);
  std::normal_distribution<double> noise(0.0, 0.8);
  Vector perturbed = inst.theta0;
  for (auto& x : perturbed) x *= std::exp(noise(rng));
  inst.suggestion = greedy_maximize(*inst.objective, perturbed, inst.matroid).sequence;
  std::shuffle(inst.suggestion.begin(), inst.suggestion.end(), rng);
  inst.epsilon = epsilon;
  if (nonnegative) inst.domain = QpDomain::nonnegative(dim);
  return inst;
}

// Best value over every independent set of size <= budget.
inline double exhaustive_max(const LinearObjective& obj, const Vector& theta,
                             const PartitionMatroid& m, std::size_t budget) {
  const std::size_t n = obj.ground_size();
  double best = 0.0;
  for (std::uint32_t mask = 0; mask < (1u << n); ++mask) {
    Subset s = detail::mask_to_subset(mask);
    if (s.size() > budget || !m.is_independent(s)) continue;
    best = std::max(best, evaluate(obj, theta, s));
  }
  return best;
}

}  // namespace ism::testing
