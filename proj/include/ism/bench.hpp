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

// Experiment harness: BB-ISM against the enumeration oracle and RS-z on
// random coverage instances, emitted as CSV tables, plus aggregation of
// those tables into median/quartile series.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "ism/bbism.hpp"
#include "ism/coverage.hpp"
#include "ism/error.hpp"
#include "ism/json_util.hpp"
#include "ism/simulation.hpp"
#include "ism/submodular.hpp"

namespace ism {

struct BenchConfig {
  std::vector<int> dims{3, 6, 9};
  std::vector<int> robots{2, 3, 4, 5, 6, 7, 8, 9, 10};
  std::vector<int> optimality_robots{2, 3, 4, 5};
  int oracle_cap = 7;
  int actions = 20;
  int seeds = 5;
  std::uint64_t base_seed = 1;
  std::vector<int> rs_samples{1, 5, 10};
  double perturbation = 0.5;  // log-normal sigma applied to theta
  SolverSettings solver;
  double timeout_s = 300.0;
  int max_regenerations = 10;
  // Random scenario shape.
  double area = 100.0;
  int grid = 24;
  double sensor_radius = 15.0;
  double sensor_decay = 0.05;
  double step = 2.0;
  int horizon = 3;
  double sigma_min = 6.0, sigma_max = 12.0;
};

inline BenchConfig bench_config_from_json(const json& j) {
  BenchConfig c;
  const std::string root;
  if (!j.is_object()) throw SchemaError(root, "expected an object");
  auto ints = [&](const char* key, std::vector<int>& out) {
    if (js::has(j, key)) out = js::int_list(j.at(key), js::child(root, key));
  };
  ints("dims", c.dims);
  ints("robots", c.robots);
  ints("optimality_robots", c.optimality_robots);
  ints("rs_samples", c.rs_samples);
  c.oracle_cap = static_cast<int>(js::integer_or(j, root, "oracle_cap", c.oracle_cap));
  c.actions = static_cast<int>(js::integer_or(j, root, "actions", c.actions));
  c.seeds = static_cast<int>(js::integer_or(j, root, "seeds", c.seeds));
  c.base_seed = static_cast<std::uint64_t>(js::integer_or(j, root, "base_seed",
                                                          static_cast<long long>(c.base_seed)));
  c.perturbation = js::number_or(j, root, "perturbation", c.perturbation);
  c.timeout_s = js::number_or(j, root, "timeout_s", c.timeout_s);
  c.max_regenerations = static_cast<int>(js::integer_or(j, root, "max_regenerations", c.max_regenerations));
  c.area = js::number_or(j, root, "area", c.area);
  c.grid = static_cast<int>(js::integer_or(j, root, "grid", c.grid));
  c.sensor_radius = js::number_or(j, root, "sensor_radius", c.sensor_radius);
  c.sensor_decay = js::number_or(j, root, "sensor_decay", c.sensor_decay);
  c.step = js::number_or(j, root, "step", c.step);
  c.horizon = static_cast<int>(js::integer_or(j, root, "horizon", c.horizon));
  c.sigma_min = js::number_or(j, root, "sigma_min", c.sigma_min);
  c.sigma_max = js::number_or(j, root, "sigma_max", c.sigma_max);
  if (js::has(j, "solver")) c.solver = detail::solver_from_json(j.at("solver"), "/solver", c.solver);

  auto positive = [](const std::vector<int>& v) {
    return !v.empty() && std::all_of(v.begin(), v.end(), [](int x) { return x >= 1; });
  };
  if (!positive(c.dims)) throw SchemaError("/dims", "need positive entries");
  if (!positive(c.robots)) throw SchemaError("/robots", "need positive entries");
  if (!positive(c.optimality_robots)) throw SchemaError("/optimality_robots", "need positive entries");
  if (!positive(c.rs_samples)) throw SchemaError("/rs_samples", "need positive entries");
  if (c.oracle_cap < 1 || c.oracle_cap > static_cast<int>(kBruteForceCap)) {
    throw SchemaError("/oracle_cap", "must be in 1..8");
  }
  if (c.actions < 2) throw SchemaError("/actions", "must be >= 2");
  if (c.seeds < 1) throw SchemaError("/seeds", "must be >= 1");
  if (!(c.timeout_s > 0.0)) throw SchemaError("/timeout_s", "must be > 0");
  if (c.grid < EnvironmentGrid::kMinResolution) throw SchemaError("/grid", "must be >= 8");
  if (!(c.area > 0.0)) throw SchemaError("/area", "must be > 0");
  if (!(c.sigma_min > 0.0 && c.sigma_max >= c.sigma_min)) {
    throw SchemaError("/sigma_min", "need 0 < sigma_min <= sigma_max");
  }
  if (c.perturbation < 0.0) throw SchemaError("/perturbation", "must be >= 0");
  return c;
}

inline std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
  std::uint64_t z = a + 0x9e3779b97f4a7c15ULL * (b + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

struct GeneratedInstance {
  IsmInstance instance;
  Vector perturbed;                  // parameters that produced the suggestion
  std::vector<ElementId> greedy_order;
  std::uint64_t seed = 0;
};

// Random coverage scenario with `dim` single-Gaussian events and `robots`
// robots; the suggestion is greedy's output under log-normally perturbed
// parameters.
inline GeneratedInstance generate_instance(const BenchConfig& cfg, int dim, int robots,
                                           std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);
  const double a = cfg.area;

  Scenario s;
  s.name = "bench";
  s.bounds[0] = s.bounds[1] = 0.0;
  s.bounds[2] = s.bounds[3] = a;
  s.nx = s.ny = cfg.grid;
  for (int e = 0; e < dim; ++e) {
    GaussianComponent c;
    c.mean = Point(a * (0.15 + 0.7 * unit(rng)), a * (0.15 + 0.7 * unit(rng)));
    const double sigma = cfg.sigma_min + (cfg.sigma_max - cfg.sigma_min) * unit(rng);
    c.covariance = Eigen::Matrix2d::Identity() * sigma * sigma;
    s.events.push_back({{c}});
  }
  s.theta = Vector(dim);
  for (int e = 0; e < dim; ++e) s.theta[e] = 0.5 + unit(rng);
  for (int r = 0; r < robots; ++r) {
    RobotState robot;
    robot.id = r;
    robot.position = Point(a * (0.1 + 0.8 * unit(rng)), a * (0.1 + 0.8 * unit(rng)));
    robot.sensor = {cfg.sensor_radius, cfg.sensor_decay};
    robot.actions = {cfg.actions, cfg.step, cfg.horizon};
    s.robots.push_back(robot);
  }
  s.solver = cfg.solver;
  s.seed = seed;

  Simulation sim(s);
  auto plan = sim.current_plan();
  GeneratedInstance out;
  out.seed = seed;
  out.perturbed = s.theta;
  for (int e = 0; e < dim; ++e) out.perturbed[e] *= std::exp(cfg.perturbation * normal(rng));
  auto sel = greedy_maximize(*plan->objective, out.perturbed, plan->matroid,
                             static_cast<std::size_t>(robots));
  out.greedy_order = sel.sequence;

  IsmInstance& inst = out.instance;
  inst.objective = plan->objective;
  inst.matroid = plan->matroid;
  inst.theta0 = s.theta;
  inst.suggestion = sel.sequence;
  inst.epsilon = cfg.solver.epsilon;
  inst.domain = cfg.solver.domain(static_cast<std::size_t>(dim));
  return out;
}

// ---------------------------------------------------------------------------
// CSV tables

struct Table {
  std::vector<std::string> columns;
  std::vector<std::vector<std::string>> rows;

  std::size_t column(const std::string& name) const {
    auto it = std::find(columns.begin(), columns.end(), name);
    if (it == columns.end()) throw SchemaError("/" + name, "missing column");
    return static_cast<std::size_t>(it - columns.begin());
  }

  std::string csv() const {
    std::string out;
    for (std::size_t c = 0; c < columns.size(); ++c) out += (c ? "," : "") + columns[c];
    out += '\n';
    for (const auto& r : rows) {
      for (std::size_t c = 0; c < r.size(); ++c) out += (c ? "," : "") + r[c];
      out += '\n';
    }
    return out;
  }
};

inline Table parse_csv(const std::string& text) {
  Table t;
  std::istringstream in(text);
  std::string line;
  auto split = [](const std::string& l) {
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream ls(l);
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    if (!l.empty() && l.back() == ',') cells.emplace_back();
    return cells;
  };
  bool header = true;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (header) {
      t.columns = split(line);
      header = false;
      continue;
    }
    auto cells = split(line);
    if (cells.size() != t.columns.size()) {
      throw SchemaError("/" + std::to_string(t.rows.size() + 1), "row width differs from header");
    }
    t.rows.push_back(std::move(cells));
  }
  return t;
}

namespace detail {

inline std::string cell(double v) {
  if (!std::isfinite(v)) return "";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string cell(std::size_t v) { return std::to_string(v); }
inline std::string cell(int v) { return std::to_string(v); }

inline double deviation_or_nan(const Vector& theta0, const SolveReport& r) {
  return r.status == SolveStatus::Optimal ? normalized_deviation(theta0, r.theta_hat)
                                          : std::nan("");
}

}  // namespace detail

struct OptimalityRow {
  int dim = 0, robots = 0, seed = 0, regenerations = 0;
  std::string status;
  double bb = 0, oracle = 0;         // normalized deviations
  std::vector<double> rs;            // per cfg.rs_samples
  double bb_objective = 0, oracle_objective = 0;
  std::size_t bb_solves = 0, oracle_solves = 0;
};

inline std::vector<OptimalityRow> run_optimality_rows(const BenchConfig& cfg) {
  std::vector<OptimalityRow> rows;
  for (int dim : cfg.dims) {
    for (int robots : cfg.optimality_robots) {
      if (robots > cfg.oracle_cap) continue;
      for (int seed = 0; seed < cfg.seeds; ++seed) {
        OptimalityRow row;
        row.dim = dim;
        row.robots = robots;
        row.seed = seed;
        const std::uint64_t base =
            mix_seed(mix_seed(cfg.base_seed, static_cast<std::uint64_t>(dim)),
                     mix_seed(static_cast<std::uint64_t>(robots), static_cast<std::uint64_t>(seed)));
        for (int sub = 0;; ++sub) {
          auto gen = generate_instance(cfg, dim, robots, mix_seed(base, static_cast<std::uint64_t>(sub)));
          SolveReport bb = solve_bbism(gen.instance);
          if (bb.status == SolveStatus::Infeasible && sub < cfg.max_regenerations) {
            ++row.regenerations;
            continue;
          }
          SolveReport oracle = brute_force_oracle(gen.instance);
          row.status = to_string(bb.status);
          row.bb = detail::deviation_or_nan(gen.instance.theta0, bb);
          row.oracle = detail::deviation_or_nan(gen.instance.theta0, oracle);
          row.bb_objective = bb.objective;
          row.oracle_objective = oracle.objective;
          row.bb_solves = bb.counters.oism_solves;
          row.oracle_solves = oracle.counters.oism_solves;
          for (int z : cfg.rs_samples) {
            auto rs = random_sampling_baseline(gen.instance, static_cast<std::size_t>(z),
                                               mix_seed(gen.seed, 0x5253));
            row.rs.push_back(detail::deviation_or_nan(gen.instance.theta0, rs));
          }
          break;
        }
        rows.push_back(std::move(row));
      }
    }
  }
  return rows;
}

inline Table optimality_table(const BenchConfig& cfg, const std::vector<OptimalityRow>& rows) {
  Table t;
  t.columns = {"dim", "robots", "seed", "regenerations", "status", "bb_deviation",
               "oracle_deviation"};
  for (int z : cfg.rs_samples) t.columns.push_back("rs" + std::to_string(z) + "_deviation");
  for (const char* c : {"bb_objective", "oracle_objective", "bb_solves", "oracle_solves"}) {
    t.columns.push_back(c);
  }
  for (const auto& r : rows) {
    std::vector<std::string> cells{detail::cell(r.dim), detail::cell(r.robots),
                                   detail::cell(r.seed), detail::cell(r.regenerations),
                                   r.status, detail::cell(r.bb), detail::cell(r.oracle)};
    for (double v : r.rs) cells.push_back(detail::cell(v));
    cells.push_back(detail::cell(r.bb_objective));
    cells.push_back(detail::cell(r.oracle_objective));
    cells.push_back(detail::cell(r.bb_solves));
    cells.push_back(detail::cell(r.oracle_solves));
    t.rows.push_back(std::move(cells));
  }
  return t;
}

inline Table run_optimality(const BenchConfig& cfg) {
  return optimality_table(cfg, run_optimality_rows(cfg));
}

struct ScalingRow {
  int dim = 0, robots = 0, seed = 0;
  SolveReport bb;
  std::optional<SolveReport> oracle;
  std::string oracle_note;  // why the oracle column is empty
  double full_tree = 0.0;
};

inline std::vector<ScalingRow> run_scaling_rows(const BenchConfig& cfg) {
  std::vector<ScalingRow> rows;
  for (int dim : cfg.dims) {
    for (int robots : cfg.robots) {
      for (int seed = 0; seed < cfg.seeds; ++seed) {
        ScalingRow row;
        row.dim = dim;
        row.robots = robots;
        row.seed = seed;
        row.full_tree = full_tree_solves(static_cast<std::size_t>(robots));
        const std::uint64_t s =
            mix_seed(mix_seed(cfg.base_seed, static_cast<std::uint64_t>(dim)),
                     mix_seed(static_cast<std::uint64_t>(robots), static_cast<std::uint64_t>(seed)));
        auto gen = generate_instance(cfg, dim, robots, mix_seed(s, 0));
        const auto timeout = std::chrono::duration_cast<std::chrono::steady_clock::duration>(
            std::chrono::duration<double>(cfg.timeout_s));
        BbOptions options;
        options.deadline = std::chrono::steady_clock::now() + timeout;
        row.bb = solve_bbism(gen.instance.with_fresh_cache(), options);
        if (robots <= cfg.oracle_cap) {
          row.oracle = brute_force_oracle(gen.instance.with_fresh_cache(), kBruteForceCap,
                                          std::chrono::steady_clock::now() + timeout);
        } else {
          row.oracle_note = "above oracle cap";
        }
        rows.push_back(std::move(row));
      }
    }
  }
  return rows;
}

inline Table scaling_table(const std::vector<ScalingRow>& rows) {
  Table t;
  t.columns = {"dim", "robots", "seed", "bb_status", "bb_time_s", "bb_solves", "bb_nodes",
               "bb_prunes_bound", "bb_prunes_infeasible", "bb_pruning_ratio",
               "bb_peak_live_nodes", "bb_peak_rows", "full_tree_solves", "oracle_status",
               "oracle_time_s", "oracle_solves", "oracle_peak_live_nodes", "oracle_peak_rows",
               "oracle_note"};
  for (const auto& r : rows) {
    const auto& b = r.bb;
    std::vector<std::string> cells{
        detail::cell(r.dim), detail::cell(r.robots), detail::cell(r.seed),
        to_string(b.status), detail::cell(b.wall_time_s), detail::cell(b.counters.oism_solves),
        detail::cell(b.counters.nodes_expanded), detail::cell(b.counters.prunes_by_bound),
        detail::cell(b.counters.prunes_by_infeasibility),
        detail::cell(1.0 - static_cast<double>(b.counters.oism_solves) / r.full_tree),
        detail::cell(b.peak_live_nodes), detail::cell(b.peak_rows_held),
        detail::cell(r.full_tree)};
    if (r.oracle) {
      const auto& o = *r.oracle;
      cells.insert(cells.end(), {to_string(o.status), detail::cell(o.wall_time_s),
                                 detail::cell(o.counters.oism_solves),
                                 detail::cell(o.peak_live_nodes), detail::cell(o.peak_rows_held),
                                 o.status == SolveStatus::TimedOut ? "timed out" : ""});
    } else {
      cells.insert(cells.end(), {"", "", "", "", "", r.oracle_note});
    }
    t.rows.push_back(std::move(cells));
  }
  return t;
}

inline Table run_scaling(const BenchConfig& cfg) { return scaling_table(run_scaling_rows(cfg)); }

// ---------------------------------------------------------------------------
// Aggregation

// Sample quantile with linear interpolation between order statistics
// (the "type 7" definition).
inline double quantile(std::vector<double> v, double p) {
  ISM_REQUIRE(!v.empty(), "quantile of an empty sample");
  ISM_REQUIRE(p >= 0.0 && p <= 1.0, "quantile level must be in [0, 1]");
  std::sort(v.begin(), v.end());
  const double h = (static_cast<double>(v.size()) - 1.0) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  if (lo + 1 >= v.size()) return v.back();
  return v[lo] + (h - static_cast<double>(lo)) * (v[lo + 1] - v[lo]);
}

inline double median(std::vector<double> v) { return quantile(std::move(v), 0.5); }

// Groups rows by (dim, x) and summarizes each requested value column.
// Empty cells are skipped.
inline json plot_data(const Table& table, const std::string& x,
                      const std::vector<std::string>& values) {
  json out = {{"schema", "ism.series/1"}, {"x", x}, {"series", json::array()}};
  const std::size_t dim_col = table.column("dim");
  const std::size_t x_col = table.column(x);
  std::vector<std::size_t> cols;
  for (const auto& v : values) cols.push_back(table.column(v));
  for (std::size_t vi = 0; vi < values.size(); ++vi) {
    std::map<long long, std::map<double, std::vector<double>>> groups;
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
      const auto& row = table.rows[r];
      const std::string& c = row[cols[vi]];
      if (c.empty()) continue;
      try {
        groups[std::stoll(row[dim_col])][std::stod(row[x_col])].push_back(std::stod(c));
      } catch (const std::exception&) {
        throw SchemaError("/" + std::to_string(r + 1) + "/" + values[vi], "not a number");
      }
    }
    for (const auto& [dim, by_x] : groups) {
      json points = json::array();
      for (const auto& [xv, sample] : by_x) {
        points.push_back({{x, xv},
                          {"n", sample.size()},
                          {"median", median(sample)},
                          {"q1", quantile(sample, 0.25)},
                          {"q3", quantile(sample, 0.75)}});
      }
      out["series"].push_back({{"name", values[vi]}, {"dim", dim}, {"points", points}});
    }
  }
  return out;
}

}  // namespace ism
