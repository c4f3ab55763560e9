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

#include <random>

#include "support.hpp"

namespace ism {
namespace {

// Exhaustive oracle for small projections: the optimum is the projection of
// the center onto the affine hull of some face, so try every set of at most
// d constraints as equalities and keep the closest feasible candidate.
struct Oracle {
  bool feasible = false;
  Vector x;
};

Oracle enumerate_projection(const ProjectionProblem& p) {
  const Eigen::Index d = p.center.size();
  std::vector<Vector> normals;
  std::vector<double> rhs;
  for (Eigen::Index j = 0; j < p.rows.rows(); ++j) {
    normals.push_back(p.rows.row(j).transpose());
    rhs.push_back(p.rhs(j));
  }
  if (p.lower) {
    for (Eigen::Index i = 0; i < d; ++i) {
      Vector e = Vector::Zero(d);
      e(i) = -1;
      normals.push_back(e);
      rhs.push_back(-(*p.lower)(i));
    }
  }
  const std::size_t m = normals.size();
  auto feasible = [&](const Vector& x) {
    for (std::size_t k = 0; k < m; ++k) {
      if (normals[k].dot(x) - rhs[k] > 1e-9) return false;
    }
    return !p.sum || std::abs(x.sum() - *p.sum) <= 1e-9;
  };
  Oracle best;
  double best_dist = std::numeric_limits<double>::infinity();
  for (std::uint32_t mask = 0; mask < (1u << m); ++mask) {
    std::vector<std::size_t> act;
    for (std::size_t k = 0; k < m; ++k) {
      if (mask & (1u << k)) act.push_back(k);
    }
    const Eigen::Index rows = static_cast<Eigen::Index>(act.size()) + (p.sum ? 1 : 0);
    if (rows > d) continue;
    Vector x = p.center;
    if (rows > 0) {
      Matrix a(rows, d);
      Vector b(rows);
      for (std::size_t k = 0; k < act.size(); ++k) {
        a.row(static_cast<Eigen::Index>(k)) = normals[act[k]].transpose();
        b(static_cast<Eigen::Index>(k)) = rhs[act[k]];
      }
      if (p.sum) {
        a.row(rows - 1) = Vector::Ones(d).transpose();
        b(rows - 1) = *p.sum;
      }
      Eigen::FullPivLU<Matrix> lu(a * a.transpose());
      if (!lu.isInvertible()) continue;
      x = p.center - a.transpose() * lu.solve(a * p.center - b);
    }
    if (!feasible(x)) continue;
    const double dist = (x - p.center).norm();
    if (dist < best_dist) {
      best_dist = dist;
      best = {true, x};
    }
  }
  return best;
}

void expect_certified(const ProjectionResult& r) {
  ASSERT_EQ(r.status, QpStatus::Optimal);
  EXPECT_LE(r.residuals.stationarity, 1e-8);
  EXPECT_LE(r.residuals.primal, 1e-9);
  EXPECT_LE(r.residuals.complementarity, 1e-8);
  EXPECT_LE(r.residuals.dual, 1e-8);
}

ProjectionProblem random_problem(std::mt19937_64& rng, Eigen::Index d, Eigen::Index m,
                                 bool lower, bool sum, double rhs_scale) {
  std::normal_distribution<double> n(0, 1);
  ProjectionProblem p;
  p.center = Vector::NullaryExpr(d, [&] { return n(rng); });
  p.rows = Matrix::NullaryExpr(m, d, [&] { return n(rng); });
  p.rhs = Vector::NullaryExpr(m, [&] { return rhs_scale * n(rng); });
  if (lower) p.lower = Vector::NullaryExpr(d, [&] { return -std::abs(n(rng)); });
  if (sum) p.sum = p.center.sum() * 0.5;
  return p;
}

TEST(Projection, HalfspaceClosedForm) {
  ProjectionProblem p;
  p.center = Vector(2);
  p.center << 2, 1;
  p.rows = Matrix(1, 2);
  p.rows << 1, -1;
  p.rhs = Vector::Zero(1);
  auto r = project_onto_polyhedron(p);
  expect_certified(r);
  const Vector b = p.rows.row(0).transpose();
  const Vector expected = p.center - (b.dot(p.center) / b.squaredNorm()) * b;
  EXPECT_LE((r.x - expected).cwiseAbs().maxCoeff(), 1e-10);
  EXPECT_NEAR((r.x - p.center).norm(), std::sqrt(0.5), 1e-10);
  EXPECT_NEAR(r.row_multipliers(0), 0.5, 1e-10);
}

TEST(Projection, InteriorAndUnconstrained) {
  ProjectionProblem p;
  p.center = Vector::Ones(3);
  p.rows = Matrix(0, 3);
  p.rhs = Vector(0);
  auto r = project_onto_polyhedron(p);
  expect_certified(r);
  EXPECT_EQ(r.x, p.center);
  p.rows = Matrix(1, 3);
  p.rows << -1, -1, -1;
  p.rhs = Vector::Zero(1);
  r = project_onto_polyhedron(p);
  expect_certified(r);
  EXPECT_EQ(r.x, p.center);
}

TEST(Projection, MatchesEnumerationOracle) {
  std::mt19937_64 rng(1234);
  int checked = 0;
  for (int trial = 0; trial < 300; ++trial) {
    const Eigen::Index d = 2 + trial % 3;
    const Eigen::Index m = 1 + trial % 6;
    const bool lower = trial % 2 == 0, sum = trial % 5 == 0;
    // Homogeneous rows most of the time, like greedy inequalities.
    auto p = random_problem(rng, d, m, lower, sum, trial % 3 == 0 ? 1.0 : 0.0);
    auto oracle = enumerate_projection(p);
    auto r = project_onto_polyhedron(p);
    if (!oracle.feasible) {
      EXPECT_EQ(r.status, QpStatus::Infeasible) << "trial " << trial;
      continue;
    }
    expect_certified(r);
    EXPECT_LE((r.x - oracle.x).norm(), 1e-8) << "trial " << trial;
    ++checked;
  }
  EXPECT_GT(checked, 200);
}

TEST(Projection, RowPermutationInvariance) {
  std::mt19937_64 rng(99);
  for (int trial = 0; trial < 50; ++trial) {
    auto p = random_problem(rng, 5, 12, true, false, 0.0);
    auto r = project_onto_polyhedron(p);
    std::vector<Eigen::Index> perm(12);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    ProjectionProblem q = p;
    for (Eigen::Index j = 0; j < 12; ++j) {
      q.rows.row(j) = p.rows.row(perm[static_cast<std::size_t>(j)]);
      q.rhs(j) = p.rhs(perm[static_cast<std::size_t>(j)]);
    }
    auto s = project_onto_polyhedron(q);
    ASSERT_EQ(r.status, s.status);
    EXPECT_LE((r.x - s.x).cwiseAbs().maxCoeff(), 1e-9);
  }
}

TEST(Projection, InfeasibleReported) {
  ProjectionProblem p;
  p.center = Vector::Ones(2);
  p.rows = Matrix(1, 2);
  p.rows << 1, 1;
  p.rhs = Vector::Constant(1, -1.0);
  p.lower = Vector::Zero(2);
  EXPECT_EQ(project_onto_polyhedron(p).status, QpStatus::Infeasible);
  // Contradictory sum.
  ProjectionProblem q;
  q.center = Vector::Ones(2);
  q.rows = Matrix(0, 2);
  q.rhs = Vector(0);
  q.lower = Vector::Zero(2);
  q.sum = -1.0;
  EXPECT_EQ(project_onto_polyhedron(q).status, QpStatus::Infeasible);
}

TEST(Projection, SumPreservation) {
  ProjectionProblem p;
  p.center = Vector(3);
  p.center << 3, 1, 2;
  p.rows = Matrix(1, 3);
  p.rows << 1, -1, 0;  // x0 <= x1
  p.rhs = Vector::Zero(1);
  p.lower = Vector::Zero(3);
  p.sum = 6.0;
  auto r = project_onto_polyhedron(p);
  expect_certified(r);
  EXPECT_NEAR(r.x.sum(), 6.0, 1e-12);
  EXPECT_NEAR(r.x(0), 2.0, 1e-10);
  EXPECT_NEAR(r.x(1), 2.0, 1e-10);
  EXPECT_NEAR(r.x(2), 2.0, 1e-10);
}

TEST(Projection, DegenerateVertexAgreesWithExternalSolver) {
  auto inst = oism_instance_from_json(testing::load_json("tests/data/qp_degenerate.json"));
  auto expected = testing::load_json("tests/data/qp_degenerate_expected.json");
  auto sol = solve_oism(inst);
  ASSERT_EQ(sol.status, QpStatus::Optimal);
  EXPECT_LE(sol.residuals.stationarity, 1e-8);
  EXPECT_LE(sol.residuals.primal, 1e-9);
  EXPECT_LE(sol.residuals.complementarity, 1e-8);
  EXPECT_NEAR(sol.objective, expected["objective"].get<double>(), 1e-7);
  EXPECT_LE((sol.theta_hat - js::vector(expected["theta_hat"], "")).norm(), 1e-7);
}

TEST(DualBound, NeverExceedsTheOptimum) {
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> scale(0.0, 3.0);
  for (int trial = 0; trial < 60; ++trial) {
    auto p = random_problem(rng, 3, 4, trial % 2 == 0, trial % 3 == 0, 1.0);
    const Oracle o = enumerate_projection(p);
    if (!o.feasible) continue;
    const double opt = (o.x - p.center).norm();
    auto r = project_onto_polyhedron(p);
    expect_certified(r);
    const double lb = dual_lower_bound(p, r.row_multipliers, r.lower_multipliers, r.sum_multiplier);
    EXPECT_LE(lb, opt + 1e-12);
    EXPECT_NEAR(lb, opt, 1e-7);
    // Any multipliers give a valid bound, including negative ones (clamped).
    for (int k = 0; k < 5; ++k) {
      Vector mu = Vector::NullaryExpr(p.rows.rows(), [&] { return scale(rng) - 1.0; });
      Vector nu = Vector::NullaryExpr(p.center.size(), [&] { return scale(rng) - 1.0; });
      EXPECT_LE(dual_lower_bound(p, mu, nu, scale(rng) - 1.5), opt + 1e-12);
    }
  }
}

TEST(DualBound, ThinConeApexIsBoundedEvenWithoutCertificate) {
  // The feasible cone is {0} by a margin of about 1e-10, so any KKT
  // certificate needs multipliers near 1e10 and cannot reach 1e-8 in double
  // precision. The dual bound still pins the optimum.
  auto inst = oism_instance_from_json(testing::load_json("tests/data/qp_thin_cone.json"));
  const json expected = testing::load_json("tests/data/qp_edge_expected.json")["thin_cone"];
  ASSERT_GT(expected["cone_gap"].get<double>(), 0.0);
  const double opt = expected["objective"].get<double>();
  auto sol = solve_oism(inst);
  ASSERT_NE(sol.status, QpStatus::Infeasible);
  EXPECT_LE(sol.theta_hat.cwiseAbs().maxCoeff(), 1e-9);
  EXPECT_LE(sol.lower_bound, opt + 1e-9);
  EXPECT_GE(sol.lower_bound, opt - 1e-6);
  if (sol.status == QpStatus::Optimal) {
    EXPECT_LE(sol.residuals.stationarity, 1e-8);
  }
}

TEST(Projection, NearFarkasInstanceIsInfeasible) {
  auto inst = oism_instance_from_json(testing::load_json("tests/data/qp_near_farkas.json"));
  const json expected = testing::load_json("tests/data/qp_edge_expected.json")["near_farkas"];
  ASSERT_GT(expected["min_relaxation"].get<double>(), 1e-7);
  EXPECT_EQ(solve_oism(inst).status, QpStatus::Infeasible);
}

TEST(Projection, IterationCapReportsNonConverged) {
  std::mt19937_64 rng(5);
  auto p = random_problem(rng, 6, 30, true, false, 0.0);
  QpOptions tight;
  tight.max_iterations = 1;
  auto r = project_onto_polyhedron(p, tight);
  EXPECT_NE(r.status, QpStatus::Infeasible);
  auto full = project_onto_polyhedron(p);
  expect_certified(full);
  if (r.status == QpStatus::Optimal) {
    EXPECT_LE((r.x - full.x).norm(), 1e-8);
  }
}

TEST(Nnls, MatchesEnumeration) {
  std::mt19937_64 rng(8);
  std::normal_distribution<double> n(0, 1);
  for (int trial = 0; trial < 100; ++trial) {
    Matrix e = Matrix::NullaryExpr(5, 4, [&] { return n(rng); });
    Vector f = Vector::NullaryExpr(5, [&] { return n(rng); });
    auto r = detail::nnls(e, f, 1000);
    ASSERT_TRUE(r.converged);
    EXPECT_GE(r.u.minCoeff(), 0.0);
    double best = std::numeric_limits<double>::infinity();
    for (std::uint32_t mask = 0; mask < 16; ++mask) {
      std::vector<Eigen::Index> cols;
      for (Eigen::Index j = 0; j < 4; ++j) {
        if (mask & (1u << j)) cols.push_back(j);
      }
      Vector u = Vector::Zero(4);
      if (!cols.empty()) {
        Matrix sub(5, static_cast<Eigen::Index>(cols.size()));
        for (std::size_t k = 0; k < cols.size(); ++k) sub.col(static_cast<Eigen::Index>(k)) = e.col(cols[k]);
        Vector z = sub.colPivHouseholderQr().solve(f);
        if (z.minCoeff() < 0) continue;
        for (std::size_t k = 0; k < cols.size(); ++k) u(cols[k]) = z(static_cast<Eigen::Index>(k));
      }
      best = std::min(best, (e * u - f).norm());
    }
    EXPECT_NEAR((e * r.u - f).norm(), best, 1e-10);
  }
}

}  // namespace
}  // namespace ism
