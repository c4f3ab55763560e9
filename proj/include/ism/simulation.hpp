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

// Discrete-time coverage simulation. Each tick the team plans one action per
// robot with greedy over the current parameters, then every robot walks the
// full horizon of its action. A suggestion names one action per robot; it is
// turned into an unordered ISM instance over that tick's ground set and, if
// solvable, the re-fit parameters replace the current ones.

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <memory>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "ism/bbism.hpp"
#include "ism/coverage.hpp"
#include "ism/error.hpp"
#include "ism/json_util.hpp"
#include "ism/oism.hpp"
#include "ism/submodular.hpp"

namespace ism {

struct ActionParams {
  int count = 20;
  double step = 2.0;  // m per waypoint
  int horizon = 3;

  void validate() const {
    ISM_REQUIRE(count >= 2, "a robot needs at least two actions");
    ISM_REQUIRE(step > 0.0 && std::isfinite(step), "action step must be positive");
    ISM_REQUIRE(horizon >= 1, "action horizon must be at least 1");
  }
};

struct RobotState {
  int id = 0;
  Point position = Point::Zero();
  SensorModel sensor;
  ActionParams actions;
};

// `count` straight rays at headings 2*pi*k/count, each waypoint clamped into
// the environment. Action k of the result has heading index k.
inline std::vector<ActionPrimitive> generate_actions(const EnvironmentGrid& grid,
                                                     const RobotState& robot) {
  robot.actions.validate();
  ISM_REQUIRE(grid.contains(robot.position), "robot is outside the environment");
  std::vector<ActionPrimitive> out;
  out.reserve(static_cast<std::size_t>(robot.actions.count));
  bool any_motion = false;
  for (int k = 0; k < robot.actions.count; ++k) {
    const double heading = 2.0 * std::numbers::pi * k / robot.actions.count;
    const Point dir(std::cos(heading), std::sin(heading));
    ActionPrimitive a;
    a.robot = robot.id;
    a.waypoints.reserve(static_cast<std::size_t>(robot.actions.horizon) + 1);
    for (int t = 0; t <= robot.actions.horizon; ++t) {
      a.waypoints.push_back(grid.clamp(robot.position + (robot.actions.step * t) * dir));
    }
    if ((a.waypoints.back() - robot.position).norm() > 0.0) any_motion = true;
    out.push_back(std::move(a));
  }
  if (!any_motion) {
    throw DegenerateActions("every action of robot " + std::to_string(robot.id) +
                            " is clipped to zero length");
  }
  return out;
}

struct SolverSettings {
  double epsilon = 0.0;
  bool nonnegative = true;
  bool preserve_sum = false;

  QpDomain domain(std::size_t d) const {
    QpDomain dom = nonnegative ? QpDomain::nonnegative(d) : QpDomain{};
    dom.preserve_sum = preserve_sum;
    return dom;
  }
};

struct SuggestionEvent {
  int tick = 0;
  std::map<int, int> actions;  // robot id -> action id
  std::optional<SolverSettings> solver;
};

struct EventSpec {
  std::vector<GaussianComponent> components;
};

struct Scenario {
  std::string name = "scenario";
  double bounds[4] = {0.0, 0.0, 100.0, 100.0};  // x_min, y_min, x_max, y_max
  int nx = 40, ny = 40;
  std::vector<EventSpec> events;
  Vector theta;
  std::vector<RobotState> robots;
  SolverSettings solver;
  std::uint64_t seed = 0;
  int ticks = 30;
  std::vector<SuggestionEvent> suggestions;

  EnvironmentGrid grid() const {
    return EnvironmentGrid(bounds[0], bounds[1], bounds[2], bounds[3], nx, ny);
  }

  void validate() const {
    const EnvironmentGrid g = grid();
    ISM_REQUIRE(!events.empty(), "scenario has no events");
    ISM_REQUIRE(static_cast<std::size_t>(theta.size()) == events.size(),
                "theta dimension must equal the event count");
    ISM_REQUIRE(theta.allFinite(), "theta must be finite");
    if (solver.nonnegative) ISM_REQUIRE(theta.minCoeff() >= 0.0, "theta must be nonnegative");
    ISM_REQUIRE(!robots.empty(), "scenario has no robots");
    for (std::size_t i = 0; i < robots.size(); ++i) {
      ISM_REQUIRE(robots[i].id == static_cast<int>(i), "robot ids must be 0..R-1 in order");
      robots[i].sensor.validate();
      robots[i].actions.validate();
      ISM_REQUIRE(robots[i].actions.horizon == robots[0].actions.horizon,
                  "all robots must share one horizon");
      ISM_REQUIRE(g.contains(robots[i].position), "robot starts outside the environment");
    }
    ISM_REQUIRE(ticks >= 0, "tick count must be nonnegative");
    ISM_REQUIRE(solver.epsilon >= 0.0, "epsilon must be nonnegative");
  }
};

// ---------------------------------------------------------------------------
// Scenario JSON

namespace detail {

inline Point point_from_json(const json& j, const std::string& path) {
  Vector v = js::vector(j, path);
  if (v.size() != 2) throw SchemaError(path, "expected [x, y]");
  return {v[0], v[1]};
}

inline json point_to_json(const Point& p) { return json::array({p.x(), p.y()}); }

inline SolverSettings solver_from_json(const json& j, const std::string& path,
                                       SolverSettings base) {
  if (!j.is_object()) throw SchemaError(path, "expected an object");
  base.epsilon = js::number_or(j, path, "epsilon", base.epsilon);
  if (base.epsilon < 0.0) throw SchemaError(js::child(path, "epsilon"), "must be >= 0");
  base.nonnegative = js::boolean_or(j, path, "nonnegative", base.nonnegative);
  base.preserve_sum = js::boolean_or(j, path, "preserve_sum", base.preserve_sum);
  return base;
}

inline json to_json(const SolverSettings& s) {
  return {{"epsilon", s.epsilon}, {"nonnegative", s.nonnegative},
          {"preserve_sum", s.preserve_sum}};
}

inline ActionParams action_params_from_json(const json& j, const std::string& path,
                                            ActionParams base) {
  if (!j.is_object()) throw SchemaError(path, "expected an object");
  base.count = static_cast<int>(js::integer_or(j, path, "count", base.count));
  base.step = js::number_or(j, path, "step", base.step);
  base.horizon = static_cast<int>(js::integer_or(j, path, "horizon", base.horizon));
  if (base.count < 2) throw SchemaError(js::child(path, "count"), "must be >= 2");
  if (!(base.step > 0.0)) throw SchemaError(js::child(path, "step"), "must be > 0");
  if (base.horizon < 1) throw SchemaError(js::child(path, "horizon"), "must be >= 1");
  return base;
}

inline json to_json(const ActionParams& a) {
  return {{"count", a.count}, {"step", a.step}, {"horizon", a.horizon}};
}

inline GaussianComponent component_from_json(const json& j, const std::string& path) {
  if (!j.is_object()) throw SchemaError(path, "expected an object");
  GaussianComponent c;
  c.weight = js::number_or(j, path, "weight", 1.0);
  if (c.weight < 0.0) throw SchemaError(js::child(path, "weight"), "must be >= 0");
  c.mean = point_from_json(js::at(j, path, "mean"), js::child(path, "mean"));
  if (js::has(j, "covariance")) {
    const std::string cp = js::child(path, "covariance");
    const json& m = js::array(j.at("covariance"), cp);
    if (m.size() != 2) throw SchemaError(cp, "expected a 2x2 matrix");
    for (std::size_t r = 0; r < 2; ++r) {
      Vector row = js::vector(m[r], js::child(cp, r));
      if (row.size() != 2) throw SchemaError(js::child(cp, r), "expected two entries");
      c.covariance(r, 0) = row[0];
      c.covariance(r, 1) = row[1];
    }
  } else {
    const double sigma = js::number(js::at(j, path, "sigma"), js::child(path, "sigma"));
    if (!(sigma > 0.0)) throw SchemaError(js::child(path, "sigma"), "must be > 0");
    c.covariance = Eigen::Matrix2d::Identity() * sigma * sigma;
  }
  const auto& s = c.covariance;
  if (!(s(0, 0) > 0.0 && s.determinant() > 0.0 && s(0, 1) == s(1, 0))) {
    throw SchemaError(js::child(path, "covariance"), "must be symmetric positive definite");
  }
  return c;
}

inline json to_json(const GaussianComponent& c) {
  return {{"weight", c.weight},
          {"mean", point_to_json(c.mean)},
          {"covariance", {{c.covariance(0, 0), c.covariance(0, 1)},
                          {c.covariance(1, 0), c.covariance(1, 1)}}}};
}

}  // namespace detail

inline SuggestionEvent suggestion_from_json(const json& j, const std::string& path,
                                            std::size_t robots,
                                            const SolverSettings& defaults) {
  if (!j.is_object()) throw SchemaError(path, "expected an object");
  SuggestionEvent ev;
  ev.tick = static_cast<int>(js::integer_or(j, path, "tick", 0));
  if (ev.tick < 0) throw SchemaError(js::child(path, "tick"), "must be >= 0");
  const std::string ap = js::child(path, "actions");
  const json& a = js::at(j, path, "actions");
  if (a.is_array()) {
    for (std::size_t r = 0; r < a.size(); ++r) {
      ev.actions[static_cast<int>(r)] =
          static_cast<int>(js::integer(a[r], js::child(ap, r)));
    }
  } else if (a.is_object()) {
    for (auto it = a.begin(); it != a.end(); ++it) {
      int robot = -1;
      try {
        std::size_t used = 0;
        robot = std::stoi(it.key(), &used);
        if (used != it.key().size()) robot = -1;
      } catch (const std::exception&) {
        robot = -1;
      }
      if (robot < 0) throw SchemaError(js::child(ap, it.key()), "robot keys must be integers");
      ev.actions[robot] = static_cast<int>(js::integer(it.value(), js::child(ap, it.key())));
    }
  } else {
    throw SchemaError(ap, "expected an array or an object");
  }
  if (ev.actions.size() != robots) {
    throw SchemaError(ap, "expected exactly one action per robot");
  }
  for (const auto& [robot, action] : ev.actions) {
    if (robot >= static_cast<int>(robots)) {
      throw SchemaError(js::child(ap, std::to_string(robot)), "unknown robot");
    }
    if (action < 0) throw SchemaError(js::child(ap, std::to_string(robot)), "must be >= 0");
  }
  if (js::has(j, "solver")) {
    ev.solver = detail::solver_from_json(j.at("solver"), js::child(path, "solver"), defaults);
  }
  return ev;
}

inline json to_json(const SuggestionEvent& ev) {
  json actions = json::object();
  for (const auto& [r, a] : ev.actions) actions[std::to_string(r)] = a;
  json j = {{"tick", ev.tick}, {"actions", actions}};
  if (ev.solver) j["solver"] = detail::to_json(*ev.solver);
  return j;
}

inline Scenario scenario_from_json(const json& j, const std::string& path = "") {
  if (!j.is_object()) throw SchemaError(path, "expected an object");
  Scenario s;
  if (js::has(j, "name")) s.name = js::string(j.at("name"), js::child(path, "name"));

  const std::string ep = js::child(path, "environment");
  const json& env = js::at(j, path, "environment");
  Vector b = js::vector(js::at(env, ep, "bounds"), js::child(ep, "bounds"));
  if (b.size() != 4 || !(b[2] > b[0]) || !(b[3] > b[1])) {
    throw SchemaError(js::child(ep, "bounds"), "expected [x_min, y_min, x_max, y_max]");
  }
  for (int i = 0; i < 4; ++i) s.bounds[i] = b[i];
  if (js::has(env, "resolution")) {
    const std::string rp = js::child(ep, "resolution");
    const json& r = env.at("resolution");
    if (r.is_array()) {
      auto res = js::int_list(r, rp);
      if (res.size() != 2) throw SchemaError(rp, "expected [nx, ny]");
      s.nx = res[0];
      s.ny = res[1];
    } else {
      s.nx = s.ny = static_cast<int>(js::integer(r, rp));
    }
    if (s.nx < EnvironmentGrid::kMinResolution || s.ny < EnvironmentGrid::kMinResolution) {
      throw SchemaError(rp, "must be at least 8 cells per axis");
    }
  }

  const std::string evp = js::child(path, "events");
  const json& events = js::array(js::at(j, path, "events"), evp);
  if (events.empty()) throw SchemaError(evp, "at least one event is required");
  for (std::size_t e = 0; e < events.size(); ++e) {
    const std::string p = js::child(evp, e);
    EventSpec spec;
    if (js::has(events[e], "components")) {
      const std::string cp = js::child(p, "components");
      const json& comps = js::array(events[e].at("components"), cp);
      if (comps.empty()) throw SchemaError(cp, "at least one component is required");
      for (std::size_t c = 0; c < comps.size(); ++c) {
        spec.components.push_back(detail::component_from_json(comps[c], js::child(cp, c)));
      }
    } else {
      spec.components.push_back(detail::component_from_json(events[e], p));
    }
    s.events.push_back(std::move(spec));
  }

  if (js::has(j, "solver")) {
    s.solver = detail::solver_from_json(j.at("solver"), js::child(path, "solver"), s.solver);
  }

  const std::string tp = js::child(path, "theta");
  if (js::has(j, "theta")) {
    s.theta = js::vector(j.at("theta"), tp);
    if (static_cast<std::size_t>(s.theta.size()) != s.events.size()) {
      throw SchemaError(tp, "theta dimension must equal the event count");
    }
    for (Eigen::Index i = 0; i < s.theta.size(); ++i) {
      if (!std::isfinite(s.theta[i]) || (s.solver.nonnegative && s.theta[i] < 0.0)) {
        throw SchemaError(js::child(tp, static_cast<std::size_t>(i)),
                          "must be finite and nonnegative");
      }
    }
  } else {
    s.theta = Vector::Ones(static_cast<Eigen::Index>(s.events.size()));
  }

  ActionParams defaults;
  if (js::has(j, "actions")) {
    defaults = detail::action_params_from_json(j.at("actions"), js::child(path, "actions"), defaults);
  }
  SensorModel default_sensor{15.0, 0.05};
  if (js::has(j, "sensor")) {
    const std::string sp = js::child(path, "sensor");
    default_sensor.radius = js::number_or(j.at("sensor"), sp, "radius", default_sensor.radius);
    default_sensor.decay = js::number_or(j.at("sensor"), sp, "decay", default_sensor.decay);
  }

  const std::string rp = js::child(path, "robots");
  const json& robots = js::array(js::at(j, path, "robots"), rp);
  if (robots.empty()) throw SchemaError(rp, "at least one robot is required");
  const EnvironmentGrid grid = s.grid();
  for (std::size_t r = 0; r < robots.size(); ++r) {
    const std::string p = js::child(rp, r);
    RobotState robot;
    robot.id = static_cast<int>(r);
    if (js::has(robots[r], "id") &&
        js::integer(robots[r].at("id"), js::child(p, "id")) != static_cast<long long>(r)) {
      throw SchemaError(js::child(p, "id"), "robot ids must be 0..R-1 in order");
    }
    robot.position = detail::point_from_json(js::at(robots[r], p, "position"),
                                             js::child(p, "position"));
    if (!grid.contains(robot.position)) {
      throw SchemaError(js::child(p, "position"), "robot starts outside the environment");
    }
    robot.sensor = default_sensor;
    if (js::has(robots[r], "sensor")) {
      const std::string sp = js::child(p, "sensor");
      robot.sensor.radius = js::number_or(robots[r].at("sensor"), sp, "radius", robot.sensor.radius);
      robot.sensor.decay = js::number_or(robots[r].at("sensor"), sp, "decay", robot.sensor.decay);
    }
    if (!(robot.sensor.radius > 0.0)) throw SchemaError(js::child(p, "sensor/radius"), "must be > 0");
    if (!(robot.sensor.decay >= 0.0)) throw SchemaError(js::child(p, "sensor/decay"), "must be >= 0");
    robot.actions = defaults;
    if (js::has(robots[r], "actions")) {
      robot.actions = detail::action_params_from_json(robots[r].at("actions"),
                                                      js::child(p, "actions"), defaults);
    }
    if (robot.actions.horizon != defaults.horizon) {
      throw SchemaError(js::child(p, "actions/horizon"), "all robots must share one horizon");
    }
    s.robots.push_back(robot);
  }

  s.seed = static_cast<std::uint64_t>(js::integer_or(j, path, "seed", 0));
  s.ticks = static_cast<int>(js::integer_or(j, path, "ticks", s.ticks));
  if (s.ticks < 0) throw SchemaError(js::child(path, "ticks"), "must be >= 0");

  if (js::has(j, "suggestions")) {
    const std::string sp = js::child(path, "suggestions");
    const json& list = js::array(j.at("suggestions"), sp);
    for (std::size_t i = 0; i < list.size(); ++i) {
      s.suggestions.push_back(
          suggestion_from_json(list[i], js::child(sp, i), s.robots.size(), s.solver));
    }
  }
  s.validate();
  return s;
}

inline json to_json(const Scenario& s) {
  json events = json::array();
  for (const auto& e : s.events) {
    json comps = json::array();
    for (const auto& c : e.components) comps.push_back(detail::to_json(c));
    events.push_back({{"components", comps}});
  }
  json robots = json::array();
  for (const auto& r : s.robots) {
    robots.push_back({{"id", r.id},
                      {"position", detail::point_to_json(r.position)},
                      {"sensor", {{"radius", r.sensor.radius}, {"decay", r.sensor.decay}}},
                      {"actions", detail::to_json(r.actions)}});
  }
  json suggestions = json::array();
  for (const auto& ev : s.suggestions) suggestions.push_back(to_json(ev));
  return {{"name", s.name},
          {"environment",
           {{"bounds", {s.bounds[0], s.bounds[1], s.bounds[2], s.bounds[3]}},
            {"resolution", {s.nx, s.ny}}}},
          {"events", events},
          {"theta", js::from_vector(s.theta)},
          {"robots", robots},
          {"solver", detail::to_json(s.solver)},
          {"seed", s.seed},
          {"ticks", s.ticks},
          {"suggestions", suggestions}};
}

// ---------------------------------------------------------------------------
// Per-tick ground set

struct TickPlan {
  int tick = 0;
  std::vector<std::size_t> offsets;  // first element id of each robot
  std::vector<int> counts;
  std::shared_ptr<const CoverageBasis> basis;
  std::shared_ptr<const LinearObjective> objective;
  PartitionMatroid matroid = PartitionMatroid::uniform(1, 1);

  ElementId element(int robot, int action) const {
    ISM_REQUIRE(robot >= 0 && static_cast<std::size_t>(robot) < offsets.size(),
                "unknown robot");
    ISM_REQUIRE(action >= 0 && action < counts[static_cast<std::size_t>(robot)],
                "unknown action id for robot " + std::to_string(robot));
    return static_cast<ElementId>(offsets[static_cast<std::size_t>(robot)] +
                                  static_cast<std::size_t>(action));
  }

  std::pair<int, int> robot_action(ElementId e) const {
    const auto& act = basis->actions().at(static_cast<std::size_t>(e));
    return {act.robot, static_cast<int>(static_cast<std::size_t>(e) -
                                        offsets[static_cast<std::size_t>(act.robot)])};
  }
};

struct ThetaRecord {
  int tick = 0;
  Vector theta;
  std::string cause;  // "initial" or "suggestion"
};

struct SuggestionRecord {
  int tick = 0;
  std::map<int, int> actions;
  SolveReport report;
  bool accepted = false;
  double deviation = 0.0;  // normalized, when accepted
};

struct TickUpdate {
  int tick = 0;  // tick index after the move
  std::vector<Point> positions;
  std::vector<int> actions;  // selected action id per robot
};

struct ThetaChange {
  int tick = 0;
  Vector old_theta;
  Vector new_theta;
  std::string cause;
};

struct SimObserver {
  std::function<void(const TickUpdate&)> on_tick;
  std::function<void(const ThetaChange&)> on_theta;
  std::function<void(const ProgressEvent&)> on_progress;
};

class Simulation {
 public:
  explicit Simulation(Scenario scenario)
      : scenario_(std::move(scenario)), grid_(scenario_.grid()) {
    scenario_.validate();
    for (const auto& e : scenario_.events) {
      densities_.push_back(EventDensity::from_mixture(grid_, e.components, true));
    }
    theta_ = scenario_.theta;
    std::vector<Point> start;
    for (const auto& r : scenario_.robots) start.push_back(r.position);
    trajectory_.push_back(start);
    theta_history_.push_back({0, theta_, "initial"});
  }

  const Scenario& scenario() const noexcept { return scenario_; }
  const EnvironmentGrid& grid() const noexcept { return grid_; }
  const std::vector<EventDensity>& densities() const noexcept { return densities_; }
  int tick() const noexcept { return tick_; }
  const Vector& theta() const noexcept { return theta_; }
  const std::vector<Point>& positions() const noexcept { return trajectory_.back(); }
  // trajectory()[t][r]: position of robot r after t ticks.
  const std::vector<std::vector<Point>>& trajectory() const noexcept { return trajectory_; }
  // selections()[t][r]: action robot r executed during tick t.
  const std::vector<std::vector<int>>& selections() const noexcept { return selections_; }
  const std::vector<ThetaRecord>& theta_history() const noexcept { return theta_history_; }
  const std::vector<SuggestionRecord>& suggestion_log() const noexcept { return suggestion_log_; }
  const std::optional<std::vector<ElementId>>& preferred() const noexcept { return preferred_; }

  // Ground set, basis and matroid for the current tick.
  std::shared_ptr<const TickPlan> current_plan() const {
    if (plan_ && plan_->tick == tick_) return plan_;
    auto plan = std::make_shared<TickPlan>();
    plan->tick = tick_;
    std::vector<ActionPrimitive> actions;
    std::vector<SensorModel> sensors;
    for (std::size_t r = 0; r < scenario_.robots.size(); ++r) {
      RobotState robot = scenario_.robots[r];
      robot.position = positions()[r];
      auto acts = generate_actions(grid_, robot);
      plan->offsets.push_back(actions.size());
      plan->counts.push_back(static_cast<int>(acts.size()));
      actions.insert(actions.end(), acts.begin(), acts.end());
      sensors.push_back(robot.sensor);
    }
    auto basis = std::make_shared<const CoverageBasis>(grid_, densities_, sensors,
                                                       std::move(actions));
    plan->matroid = basis->matroid();
    plan->objective = std::make_shared<const LinearObjective>(make_coverage_objective(basis));
    plan->basis = std::move(basis);
    plan_ = plan;
    return plan_;
  }

  // One action id per robot, by greedy under the current parameters. Right
  // after an accepted suggestion, ties prefer the suggested ordering.
  std::vector<int> plan_step() const {
    auto plan = current_plan();
    TieBreakRule rule = preferred_ ? TieBreakRule::prefer(*preferred_)
                                   : TieBreakRule::lowest_id();
    auto sel = greedy_maximize(*plan->objective, theta_, plan->matroid,
                               scenario_.robots.size(), rule);
    std::vector<int> out(scenario_.robots.size(), -1);
    for (ElementId e : sel.sequence) {
      auto [robot, action] = plan->robot_action(e);
      out[static_cast<std::size_t>(robot)] = action;
    }
    return out;
  }

  IsmInstance suggestion_instance(const SuggestionEvent& ev) const {
    auto plan = current_plan();
    ISM_REQUIRE(ev.actions.size() == scenario_.robots.size(),
                "a suggestion needs exactly one action per robot");
    IsmInstance inst;
    inst.objective = plan->objective;
    inst.matroid = plan->matroid;
    inst.theta0 = theta_;
    for (const auto& [robot, action] : ev.actions) {
      inst.suggestion.push_back(plan->element(robot, action));
    }
    const SolverSettings settings = ev.solver.value_or(scenario_.solver);
    inst.epsilon = settings.epsilon;
    inst.domain = settings.domain(static_cast<std::size_t>(theta_.size()));
    return inst;
  }

  // Solves the suggestion against the current tick without changing state.
  SolveReport dry_run(const SuggestionEvent& ev, const BbOptions& options = {}) const {
    return solve_bbism(suggestion_instance(ev), options);
  }

  const SuggestionRecord& apply_suggestion(const SuggestionEvent& ev,
                                           const SimObserver& observer = {}) {
    BbOptions options;
    options.progress = observer.on_progress;
    IsmInstance inst = suggestion_instance(ev);  // validates before any mutation
    SuggestionRecord rec;
    rec.tick = tick_;
    rec.actions = ev.actions;
    rec.report = solve_bbism(inst, options);
    if (rec.report.status == SolveStatus::Optimal) {
      rec.accepted = true;
      if (theta_.norm() > 0.0) rec.deviation = normalized_deviation(theta_, rec.report.theta_hat);
      ThetaChange change{tick_, theta_, rec.report.theta_hat, "suggestion"};
      theta_ = rec.report.theta_hat;
      preferred_ = rec.report.best_ordering;
      theta_history_.push_back({tick_, theta_, "suggestion"});
      if (observer.on_theta) observer.on_theta(change);
    }
    suggestion_log_.push_back(std::move(rec));
    return suggestion_log_.back();
  }

  // Runs `ticks` plan-and-move cycles. Scheduled suggestions for a tick are
  // applied at its start.
  void advance(int ticks, const SimObserver& observer = {}) {
    ISM_REQUIRE(ticks >= 0, "tick count must be nonnegative");
    for (int k = 0; k < ticks; ++k) {
      for (const auto& ev : scenario_.suggestions) {
        if (ev.tick == tick_) apply_suggestion(ev, observer);
      }
      auto plan = current_plan();
      std::vector<int> chosen = plan_step();
      std::vector<Point> next = positions();
      for (std::size_t r = 0; r < chosen.size(); ++r) {
        const ElementId e = plan->element(static_cast<int>(r), chosen[r]);
        next[r] = plan->basis->actions()[static_cast<std::size_t>(e)].waypoints.back();
      }
      preferred_.reset();
      selections_.push_back(chosen);
      trajectory_.push_back(next);
      ++tick_;
      if (observer.on_tick) observer.on_tick({tick_, next, chosen});
    }
  }

  std::string trajectory_csv() const {
    std::ostringstream out;
    out.precision(17);
    out << "tick,robot,x,y,action\n";
    for (std::size_t t = 0; t < trajectory_.size(); ++t) {
      for (std::size_t r = 0; r < trajectory_[t].size(); ++r) {
        out << t << ',' << r << ',' << trajectory_[t][r].x() << ','
            << trajectory_[t][r].y() << ',';
        if (t > 0) out << selections_[t - 1][r];
        out << '\n';
      }
    }
    return out.str();
  }

  std::string theta_csv() const {
    std::ostringstream out;
    out.precision(17);
    out << "tick,cause";
    for (Eigen::Index j = 0; j < theta_.size(); ++j) out << ",theta_" << j;
    out << '\n';
    for (const auto& h : theta_history_) {
      out << h.tick << ',' << h.cause;
      for (Eigen::Index j = 0; j < h.theta.size(); ++j) out << ',' << h.theta[j];
      out << '\n';
    }
    return out.str();
  }

  json log_json() const {
    json traj = json::array();
    for (std::size_t t = 0; t < trajectory_.size(); ++t) {
      json row = json::array();
      for (const auto& p : trajectory_[t]) row.push_back(detail::point_to_json(p));
      traj.push_back(row);
    }
    json hist = json::array();
    for (const auto& h : theta_history_) {
      hist.push_back({{"tick", h.tick}, {"theta", js::from_vector(h.theta)}, {"cause", h.cause}});
    }
    json sugg = json::array();
    for (const auto& s : suggestion_log_) {
      json actions = json::object();
      for (const auto& [r, a] : s.actions) actions[std::to_string(r)] = a;
      json e = {{"tick", s.tick}, {"actions", actions}, {"accepted", s.accepted},
                {"report", to_json(s.report)}};
      if (s.accepted) e["normalized_deviation"] = s.deviation;
      sugg.push_back(e);
    }
    return {{"scenario", scenario_.name}, {"tick", tick_}, {"trajectory", traj},
            {"selections", selections_}, {"theta_history", hist}, {"suggestions", sugg}};
  }

 private:
  Scenario scenario_;
  EnvironmentGrid grid_;
  std::vector<EventDensity> densities_;
  int tick_ = 0;
  Vector theta_;
  std::vector<std::vector<Point>> trajectory_;
  std::vector<std::vector<int>> selections_;
  std::vector<ThetaRecord> theta_history_;
  std::vector<SuggestionRecord> suggestion_log_;
  std::optional<std::vector<ElementId>> preferred_;
  mutable std::shared_ptr<const TickPlan> plan_;
};

// The action of `robot` whose final waypoint is closest to `target`; ties
// go to the lower action id.
inline int action_toward(const TickPlan& plan, int robot, const Point& target) {
  int best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (int a = 0; a < plan.counts.at(static_cast<std::size_t>(robot)); ++a) {
    const auto& act = plan.basis->actions()[static_cast<std::size_t>(plan.element(robot, a))];
    const double d = (act.waypoints.back() - target).norm();
    if (d < best_d) {
      best_d = d;
      best = a;
    }
  }
  return best;
}

inline SuggestionEvent suggest_toward(const Simulation& sim, const Point& target) {
  auto plan = sim.current_plan();
  SuggestionEvent ev;
  ev.tick = sim.tick();
  for (std::size_t r = 0; r < sim.scenario().robots.size(); ++r) {
    ev.actions[static_cast<int>(r)] = action_toward(*plan, static_cast<int>(r), target);
  }
  return ev;
}

}  // namespace ism
