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

// Multi-robot multi-event coverage objective. Each event has a density on a
// planar grid; robots sense with an exponentially decaying, range-limited
// model; an action is a short sequence of waypoints. For a set of selected
// actions the basis component of event j is the probability that the event
// is detected at least once over the horizon:
//
//   g_j(A) = 1 - prod_t (1 - h_j(p(t))),
//   h_j(p) = sum_cells phi_j(x) * (1 - prod_i (1 - Pr(x, p_i))) * cell_area.

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <memory>
#include <numbers>
#include <span>
#include <utility>
#include <vector>

#include "ism/error.hpp"
#include "ism/submodular.hpp"

namespace ism {

using Point = Eigen::Vector2d;

// Axis-aligned rectangle tiled by nx * ny equal cells, evaluated at cell
// midpoints. Cell index = iy * nx + ix.
class EnvironmentGrid {
 public:
  static constexpr int kMinResolution = 8;

  EnvironmentGrid(double x_min, double y_min, double x_max, double y_max,
                  int nx, int ny)
      : x_min_(x_min), y_min_(y_min), x_max_(x_max), y_max_(y_max),
        nx_(nx), ny_(ny) {
    ISM_REQUIRE(x_max > x_min && y_max > y_min, "environment bounds are empty");
    ISM_REQUIRE(nx >= kMinResolution && ny >= kMinResolution,
                "grid resolution must be at least 8 cells per axis");
  }

  double x_min() const noexcept { return x_min_; }
  double y_min() const noexcept { return y_min_; }
  double x_max() const noexcept { return x_max_; }
  double y_max() const noexcept { return y_max_; }
  int nx() const noexcept { return nx_; }
  int ny() const noexcept { return ny_; }

  double cell_width() const noexcept { return (x_max_ - x_min_) / nx_; }
  double cell_height() const noexcept { return (y_max_ - y_min_) / ny_; }
  double cell_area() const noexcept { return cell_width() * cell_height(); }
  std::size_t cell_count() const noexcept {
    return static_cast<std::size_t>(nx_) * static_cast<std::size_t>(ny_);
  }

  Point cell_center(std::size_t index) const noexcept {
    auto ix = static_cast<int>(index % static_cast<std::size_t>(nx_));
    auto iy = static_cast<int>(index / static_cast<std::size_t>(nx_));
    return {x_min_ + (ix + 0.5) * cell_width(), y_min_ + (iy + 0.5) * cell_height()};
  }

  bool contains(const Point& p) const noexcept {
    return p.x() >= x_min_ && p.x() <= x_max_ && p.y() >= y_min_ && p.y() <= y_max_;
  }

  Point clamp(const Point& p) const noexcept {
    return {std::clamp(p.x(), x_min_, x_max_), std::clamp(p.y(), y_min_, y_max_)};
  }

 private:
  double x_min_, y_min_, x_max_, y_max_;
  int nx_, ny_;
};

struct GaussianComponent {
  double weight = 1.0;
  Point mean = Point::Zero();
  Eigen::Matrix2d covariance = Eigen::Matrix2d::Identity();

  double pdf(const Point& x) const {
    Eigen::Vector2d d = x - mean;
    double det = covariance.determinant();
    return weight * std::exp(-0.5 * d.dot(covariance.inverse() * d)) /
           (2.0 * std::numbers::pi * std::sqrt(det));
  }
};

// A nonnegative field on the grid, optionally rescaled so that
// sum(field) * cell_area == 1.
class EventDensity {
 public:
  static EventDensity from_mixture(const EnvironmentGrid& grid,
                                   std::vector<GaussianComponent> components,
                                   bool normalize = true) {
    ISM_REQUIRE(!components.empty(), "event mixture has no components");
    for (const auto& c : components) {
      ISM_REQUIRE(c.weight >= 0.0, "mixture weights must be nonnegative");
      ISM_REQUIRE(c.covariance.determinant() > 0.0 &&
                      c.covariance(0, 0) > 0.0 &&
                      std::abs(c.covariance(0, 1) - c.covariance(1, 0)) <= 1e-12,
                  "mixture covariance must be symmetric positive definite");
    }
    Vector field(static_cast<Eigen::Index>(grid.cell_count()));
    for (std::size_t i = 0; i < grid.cell_count(); ++i) {
      Point x = grid.cell_center(i);
      double v = 0.0;
      for (const auto& c : components) v += c.pdf(x);
      field(static_cast<Eigen::Index>(i)) = v;
    }
    EventDensity d = from_field(grid, std::move(field), normalize);
    d.components_ = std::move(components);
    return d;
  }

  static EventDensity from_field(const EnvironmentGrid& grid, Vector field,
                                 bool normalize = true) {
    ISM_REQUIRE(static_cast<std::size_t>(field.size()) == grid.cell_count(),
                "density field size does not match the grid");
    ISM_REQUIRE(field.allFinite() && field.minCoeff() >= 0.0,
                "density field must be finite and nonnegative");
    EventDensity d;
    if (normalize) {
      double mass = field.sum() * grid.cell_area();
      ISM_REQUIRE(mass > 0.0, "density has no mass on the grid");
      field /= mass;
    }
    d.field_ = std::move(field);
    d.normalized_ = normalize;
    return d;
  }

  const Vector& field() const noexcept { return field_; }
  const std::vector<GaussianComponent>& components() const noexcept {
    return components_;
  }
  bool normalized() const noexcept { return normalized_; }

  double mass(const EnvironmentGrid& grid) const {
    return field_.sum() * grid.cell_area();
  }

 private:
  Vector field_;
  std::vector<GaussianComponent> components_;
  bool normalized_ = false;
};

struct SensorModel {
  double radius = 1.0;  // m
  double decay = 0.0;   // 1/m

  void validate() const {
    ISM_REQUIRE(radius > 0.0, "sensing radius must be positive");
    ISM_REQUIRE(decay >= 0.0, "sensing decay must be nonnegative");
  }
};

inline double sensing_prob(const Point& x, const Point& p,
                           const SensorModel& sensor) {
  double d = (x - p).norm();
  return d <= sensor.radius ? std::exp(-sensor.decay * d) : 0.0;
}

inline double joint_detection(const Point& x, std::span<const Point> positions,
                              std::span<const SensorModel> sensors) {
  ISM_REQUIRE(positions.size() == sensors.size(),
              "one sensor model per robot position is required");
  double miss = 1.0;
  for (std::size_t i = 0; i < positions.size(); ++i) {
    miss *= 1.0 - sensing_prob(x, positions[i], sensors[i]);
  }
  return 1.0 - miss;
}

inline double event_coverage(const EnvironmentGrid& grid,
                             const EventDensity& density,
                             std::span<const Point> positions,
                             std::span<const SensorModel> sensors) {
  double total = 0.0;
  for (std::size_t c = 0; c < grid.cell_count(); ++c) {
    double phi = density.field()(static_cast<Eigen::Index>(c));
    if (phi == 0.0) continue;
    total += phi * joint_detection(grid.cell_center(c), positions, sensors);
  }
  return total * grid.cell_area();
}

struct ActionPrimitive {
  int robot = 0;
  std::vector<Point> waypoints;  // p(k), ..., p(k + H)

  int horizon() const noexcept { return static_cast<int>(waypoints.size()) - 1; }
};

// The vector-valued basis g over a fixed list of candidate actions. Element
// id i refers to actions[i]. A subset may hold several actions of one robot
// (each then senses independently), which keeps g a well-defined set
// function on the whole ground set; under the partition matroid only one
// action per robot is ever selected.
class CoverageBasis {
 public:
  CoverageBasis(EnvironmentGrid grid, std::vector<EventDensity> events,
                std::vector<SensorModel> sensors,
                std::vector<ActionPrimitive> actions)
      : grid_(std::move(grid)),
        events_(std::move(events)),
        sensors_(std::move(sensors)),
        actions_(std::move(actions)) {
    ISM_REQUIRE(!events_.empty(), "coverage basis needs at least one event");
    ISM_REQUIRE(!actions_.empty(), "coverage basis needs at least one action");
    for (const auto& s : sensors_) s.validate();
    for (const auto& e : events_) {
      ISM_REQUIRE(static_cast<std::size_t>(e.field().size()) == grid_.cell_count(),
                  "event density does not match the grid");
    }
    steps_ = actions_.front().waypoints.size();
    ISM_REQUIRE(steps_ >= 1, "actions need at least one waypoint");
    footprints_.resize(actions_.size());
    for (std::size_t a = 0; a < actions_.size(); ++a) {
      const auto& act = actions_[a];
      ISM_REQUIRE(act.waypoints.size() == steps_,
                  "all actions must share one horizon");
      ISM_REQUIRE(act.robot >= 0 && static_cast<std::size_t>(act.robot) < sensors_.size(),
                  "action refers to an unknown robot");
      for (const auto& p : act.waypoints) {
        ISM_REQUIRE(grid_.contains(p), "action waypoint outside the environment");
      }
      footprints_[a] = build_footprint(act);
    }
  }

  const EnvironmentGrid& grid() const noexcept { return grid_; }
  const std::vector<EventDensity>& events() const noexcept { return events_; }
  const std::vector<SensorModel>& sensors() const noexcept { return sensors_; }
  const std::vector<ActionPrimitive>& actions() const noexcept { return actions_; }
  std::size_t event_count() const noexcept { return events_.size(); }
  std::size_t robot_count() const noexcept { return sensors_.size(); }
  int horizon() const noexcept { return static_cast<int>(steps_) - 1; }

  PartitionMatroid matroid() const {
    std::vector<int> block_of;
    block_of.reserve(actions_.size());
    for (const auto& a : actions_) block_of.push_back(a.robot);
    return PartitionMatroid(std::move(block_of),
                            std::vector<int>(sensors_.size(), 1));
  }

  // h_j(p(t)) for every step t of the horizon.
  std::vector<double> step_coverage(std::span<const ElementId> selected,
                                    std::size_t event) const {
    auto all = coverage_table(selected);
    std::vector<double> out(steps_);
    for (std::size_t t = 0; t < steps_; ++t) out[t] = all[t * events_.size() + event];
    return out;
  }

  double horizon_nondetection(std::span<const ElementId> selected,
                              std::size_t event) const {
    ISM_REQUIRE(event < events_.size(), "unknown event index");
    double miss = 1.0;
    for (double h : step_coverage(selected, event)) miss *= 1.0 - h;
    return miss;
  }

  Vector basis_vector(std::span<const ElementId> selected) const {
    auto table = coverage_table(selected);
    const std::size_t m = events_.size();
    Vector g(static_cast<Eigen::Index>(m));
    for (std::size_t j = 0; j < m; ++j) {
      double miss = 1.0;
      for (std::size_t t = 0; t < steps_; ++t) miss *= 1.0 - table[t * m + j];
      g(static_cast<Eigen::Index>(j)) = 1.0 - miss;
    }
    return g;
  }

 private:
  struct FootprintCell {
    std::uint32_t cell;
    double miss;  // 1 - Pr(cell, waypoint)
  };
  using Footprint = std::vector<std::vector<FootprintCell>>;  // per step

  Footprint build_footprint(const ActionPrimitive& act) const {
    const SensorModel& sensor = sensors_[static_cast<std::size_t>(act.robot)];
    Footprint fp(steps_);
    for (std::size_t t = 0; t < steps_; ++t) {
      const Point& p = act.waypoints[t];
      for (std::size_t c = 0; c < grid_.cell_count(); ++c) {
        double pr = sensing_prob(grid_.cell_center(c), p, sensor);
        if (pr > 0.0) fp[t].push_back({static_cast<std::uint32_t>(c), 1.0 - pr});
      }
    }
    return fp;
  }

  // Row-major [step][event] table of h_j(p(t)).
  std::vector<double> coverage_table(std::span<const ElementId> selected) const {
    const std::size_t m = events_.size();
    std::vector<double> table(steps_ * m, 0.0);
    if (selected.empty()) return table;
    Subset order = canonical(selected);
    for (ElementId e : order) {
      ISM_REQUIRE(e >= 0 && static_cast<std::size_t>(e) < actions_.size(),
                  "unknown action id");
    }
    std::vector<double> miss(grid_.cell_count(), 1.0);
    std::vector<std::uint32_t> touched;
    std::vector<char> seen(grid_.cell_count(), 0);
    const double area = grid_.cell_area();
    for (std::size_t t = 0; t < steps_; ++t) {
      touched.clear();
      for (ElementId e : order) {
        for (const auto& fc : footprints_[static_cast<std::size_t>(e)][t]) {
          if (!seen[fc.cell]) {
            seen[fc.cell] = 1;
            touched.push_back(fc.cell);
          }
          miss[fc.cell] *= fc.miss;
        }
      }
      std::sort(touched.begin(), touched.end());
      for (std::size_t j = 0; j < m; ++j) {
        const Vector& phi = events_[j].field();
        double h = 0.0;
        for (std::uint32_t c : touched) h += phi(c) * (1.0 - miss[c]);
        table[t * m + j] = h * area;
      }
      for (std::uint32_t c : touched) {
        miss[c] = 1.0;
        seen[c] = 0;
      }
    }
    return table;
  }

  EnvironmentGrid grid_;
  std::vector<EventDensity> events_;
  std::vector<SensorModel> sensors_;
  std::vector<ActionPrimitive> actions_;
  std::size_t steps_ = 0;
  std::vector<Footprint> footprints_;
};

// Wraps a coverage basis as a LinearObjective over its action ids.
inline LinearObjective make_coverage_objective(
    std::shared_ptr<const CoverageBasis> basis,
    std::size_t cache_capacity = LinearObjective::kDefaultCacheCapacity) {
  const std::size_t n = basis->actions().size();
  const std::size_t m = basis->event_count();
  return LinearObjective(
      n, m,
      [basis = std::move(basis)](std::span<const ElementId> s) {
        return basis->basis_vector(s);
      },
      cache_capacity);
}

}  // namespace ism
