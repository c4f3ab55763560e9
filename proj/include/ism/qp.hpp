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

// Euclidean projection onto a polyhedron,
//
//   min 1/2 ||x - center||^2
//   s.t. a_j^T x <= c_j        (rows)
//        x_i >= l_i            (optional lower bounds)
//        1^T x == sigma        (optional sum equality)
//
// solved exactly by reducing to least-distance programming in y = x - center
// (min ||y|| s.t. G y >= h) and running the Lawson-Hanson NNLS active-set
// method on E = [G^T; h^T], f = e_{d+1}. A zero NNLS residual is a Farkas
// certificate of infeasibility. The returned point is polished on the final
// active set and certified by explicit KKT residuals.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <vector>

#include "ism/error.hpp"

namespace ism {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

enum class QpStatus { Optimal, Infeasible, NonConverged };

inline const char* to_string(QpStatus s) {
  switch (s) {
    case QpStatus::Optimal: return "Optimal";
    case QpStatus::Infeasible: return "Infeasible";
    case QpStatus::NonConverged: return "NonConverged";
  }
  return "?";
}

struct QpOptions {
  int max_iterations = 10000;
  double stationarity_tol = 1e-8;
  double primal_tol = 1e-9;
  double complementarity_tol = 1e-8;
};

struct KktResiduals {
  double stationarity = 0.0;     // ||grad of Lagrangian||_inf
  double primal = 0.0;           // worst constraint violation
  double complementarity = 0.0;  // max |multiplier * slack|
  double dual = 0.0;             // worst negative inequality multiplier
};

struct ProjectionProblem {
  Vector center;
  Matrix rows;  // m x d
  Vector rhs;   // m
  std::optional<Vector> lower;
  std::optional<double> sum;
};

struct ProjectionResult {
  QpStatus status = QpStatus::NonConverged;
  Vector x;
  Vector row_multipliers;    // one per row, >= 0
  Vector lower_multipliers;  // one per coordinate, >= 0
  double sum_multiplier = 0.0;
  KktResiduals residuals;
  int iterations = 0;
};

namespace detail {

struct NnlsResult {
  Vector u;
  std::vector<Eigen::Index> passive;
  bool converged = false;
  int iterations = 0;
};

inline Vector solve_passive(const Matrix& e, const std::vector<Eigen::Index>& passive,
                            const Vector& f, Eigen::Index* rank) {
  Matrix ep(e.rows(), static_cast<Eigen::Index>(passive.size()));
  for (std::size_t k = 0; k < passive.size(); ++k) {
    ep.col(static_cast<Eigen::Index>(k)) = e.col(passive[k]);
  }
  Eigen::ColPivHouseholderQR<Matrix> qr(ep);
  qr.setThreshold(1e-12);
  if (rank) *rank = qr.rank();
  return qr.solve(f);
}

// Lawson-Hanson: min ||E u - f|| s.t. u >= 0.
inline NnlsResult nnls(const Matrix& e, const Vector& f, int max_iterations) {
  const Eigen::Index m = e.cols();
  NnlsResult out;
  out.u = Vector::Zero(m);
  std::vector<char> in_passive(static_cast<std::size_t>(m), 0);
  std::vector<char> blocked(static_cast<std::size_t>(m), 0);
  Vector w = e.transpose() * f;
  const double tol = 1e-14 * std::max(1.0, e.cwiseAbs().maxCoeff());

  while (true) {
    Eigen::Index t = -1;
    double best = tol;
    for (Eigen::Index j = 0; j < m; ++j) {
      auto uj = static_cast<std::size_t>(j);
      if (!in_passive[uj] && !blocked[uj] && w(j) > best) {
        best = w(j);
        t = j;
      }
    }
    if (t < 0) {
      out.converged = true;
      break;
    }

    out.passive.push_back(t);
    in_passive[static_cast<std::size_t>(t)] = 1;
    bool accepted = true;
    bool first = true;
    while (true) {
      if (++out.iterations > max_iterations) return out;
      Eigen::Index rank = 0;
      Vector z = solve_passive(e, out.passive, f, &rank);
      if (first) {
        first = false;
        // A dependent or non-improving column is rejected for this round.
        if (rank < static_cast<Eigen::Index>(out.passive.size()) ||
            z(static_cast<Eigen::Index>(out.passive.size()) - 1) <= 0.0) {
          out.passive.pop_back();
          in_passive[static_cast<std::size_t>(t)] = 0;
          blocked[static_cast<std::size_t>(t)] = 1;
          accepted = false;
          break;
        }
      }
      bool all_positive = true;
      for (Eigen::Index k = 0; k < z.size(); ++k) all_positive &= z(k) > 0.0;
      if (all_positive) {
        for (std::size_t k = 0; k < out.passive.size(); ++k) {
          out.u(out.passive[k]) = z(static_cast<Eigen::Index>(k));
        }
        break;
      }
      double alpha = std::numeric_limits<double>::infinity();
      for (std::size_t k = 0; k < out.passive.size(); ++k) {
        double zk = z(static_cast<Eigen::Index>(k));
        if (zk <= 0.0) {
          double uk = out.u(out.passive[k]);
          alpha = std::min(alpha, uk / (uk - zk));
        }
      }
      std::vector<Eigen::Index> kept;
      for (std::size_t k = 0; k < out.passive.size(); ++k) {
        Eigen::Index j = out.passive[k];
        double uk = out.u(j);
        uk += alpha * (z(static_cast<Eigen::Index>(k)) - uk);
        if (uk <= 1e-300) {
          out.u(j) = 0.0;
          in_passive[static_cast<std::size_t>(j)] = 0;
        } else {
          out.u(j) = uk;
          kept.push_back(j);
        }
      }
      out.passive = std::move(kept);
    }
    if (accepted) std::fill(blocked.begin(), blocked.end(), 0);
    w = e.transpose() * (f - e * out.u);
  }
  return out;
}


struct ActiveProjection {
  bool ok = false;
  Vector x;
  Vector lambda;  // per active column: x - c = N lambda
};

// Projection of c onto {x : N^T x = b} through a QR factorization N = Q1 R:
// x = Q1 R^{-T} b + (I - Q1 Q1^T) c. The point never passes through the
// multipliers, which can be huge when normals are nearly dependent.
inline ActiveProjection project_onto_active(const Vector& c, const Matrix& n,
                                            const Vector& b) {
  ActiveProjection out;
  const Eigen::Index q = n.cols();
  if (q == 0) {
    out.ok = true;
    out.x = c;
    out.lambda = Vector::Zero(0);
    return out;
  }
  if (q > n.rows()) return out;
  Eigen::HouseholderQR<Matrix> qr(n);
  const Matrix r = qr.matrixQR().topLeftCorner(q, q).triangularView<Eigen::Upper>();
  const double rmax = r.diagonal().cwiseAbs().maxCoeff();
  if (!(r.diagonal().cwiseAbs().minCoeff() > 1e-14 * rmax)) return out;
  const Matrix q1 = Matrix(qr.householderQ()).leftCols(q);
  const Vector w = r.transpose().triangularView<Eigen::Lower>().solve(b);  // = Q1^T x
  const Vector qc = q1.transpose() * c;
  out.x = q1 * w + (c - q1 * qc);
  out.lambda = r.triangularView<Eigen::Upper>().solve(w - qc);
  out.ok = out.x.allFinite() && out.lambda.allFinite();
  return out;
}

struct ActiveSetResult {
  QpStatus status = QpStatus::NonConverged;
  Vector x;
  Vector lambda;  // one per constraint column, in the column's orientation
  int iterations = 0;
};

// Goldfarb-Idnani dual active set for min 1/2 ||x - c||^2 subject to
// n_j^T x >= b_j (unit normals); columns flagged in `equality` are held as
// equations. Starts at the unconstrained minimizer, adds pending equations
// first and then the most violated inequality, dropping active inequalities
// whose multipliers would turn negative.
inline ActiveSetResult dual_active_set(const Vector& c, const std::vector<Vector>& n,
                                       const std::vector<double>& b,
                                       const std::vector<char>& equality,
                                       int max_iterations, double drift_tol) {
  const Eigen::Index d = c.size();
  const std::size_t k = n.size();
  constexpr double kViolationTol = 1e-13;
  constexpr double kDependentTol = 1e-12;
  constexpr double kInf = std::numeric_limits<double>::infinity();

  ActiveSetResult out;
  out.x = c;
  out.lambda = Vector::Zero(static_cast<Eigen::Index>(k));
  std::vector<std::size_t> active;
  std::vector<double> u;        // multipliers of `active`
  std::vector<double> flip(k, 1.0);
  std::vector<char> is_active(k, 0);
  std::vector<char> skipped(k, 0);
  // Violations this small that cannot be repaired are rounding drift at a
  // degenerate vertex, not an infeasibility certificate; certification of
  // the final point decides.
  const double drift_floor = drift_tol;

  auto normal = [&](std::size_t j) -> Vector { return flip[j] * n[j]; };
  auto slack = [&](std::size_t j) { return flip[j] * (n[j].dot(out.x) - b[j]); };

  while (true) {
    std::size_t p = k;
    for (std::size_t j = 0; j < k && p == k; ++j) {
      if (equality[j] && !is_active[j]) p = j;
    }
    if (p == k) {
      double worst = -kViolationTol;
      for (std::size_t j = 0; j < k; ++j) {
        if (is_active[j] || skipped[j]) continue;
        const double s = n[j].dot(out.x) - b[j];
        if (s < worst) {
          worst = s;
          p = j;
        }
      }
    }
    if (p == k) break;
    if (equality[p] && n[p].dot(out.x) - b[p] > 0.0) flip[p] = -1.0;
    const Vector np = normal(p);
    const auto saved_active = active;
    const auto saved_u = u;
    const auto saved_flags = is_active;

    double u_plus = 0.0;
    bool abandoned = false;
    while (true) {
      if (++out.iterations > max_iterations) return out;
      const auto q = static_cast<Eigen::Index>(active.size());
      Vector z = np;
      Vector r = Vector::Zero(q);
      if (q > 0) {
        Matrix na(d, q);
        for (Eigen::Index a = 0; a < q; ++a) {
          na.col(a) = normal(active[static_cast<std::size_t>(a)]);
        }
        Eigen::HouseholderQR<Matrix> qr(na);
        const Matrix j1 = Matrix(qr.householderQ()).leftCols(q);
        const Vector d1 = j1.transpose() * np;
        z = np - j1 * d1;
        r = qr.matrixQR().topLeftCorner(q, q).triangularView<Eigen::Upper>().solve(d1);
      }
      double t1 = kInf;
      Eigen::Index drop = -1;
      for (Eigen::Index a = 0; a < q; ++a) {
        if (equality[active[static_cast<std::size_t>(a)]] || r(a) <= 0.0) continue;
        const double ratio = u[static_cast<std::size_t>(a)] / r(a);
        if (ratio < t1) {
          t1 = ratio;
          drop = a;
        }
      }
      const double zz = z.squaredNorm();
      const double t2 = std::sqrt(zz) > kDependentTol ? std::max(0.0, -slack(p)) / zz : kInf;
      const double t = std::min(t1, t2);
      if (t == kInf) {
        if (-slack(p) <= drift_floor) {
          active = saved_active;
          u = saved_u;
          is_active = saved_flags;
          skipped[p] = 1;
          abandoned = true;
          break;
        }
        out.status = QpStatus::Infeasible;
        return out;
      }
      if (t2 < kInf) out.x += t * z;
      for (Eigen::Index a = 0; a < q; ++a) u[static_cast<std::size_t>(a)] -= t * r(a);
      u_plus += t;
      if (t2 <= t1) {
        active.push_back(p);
        u.push_back(u_plus);
        is_active[p] = 1;
        break;
      }
      is_active[active[static_cast<std::size_t>(drop)]] = 0;
      active.erase(active.begin() + drop);
      u.erase(u.begin() + drop);
    }
    if (!abandoned) std::fill(skipped.begin(), skipped.end(), 0);
  }

  // Re-solve the projection onto the final active set exactly.
  if (!active.empty()) {
    const auto q = static_cast<Eigen::Index>(active.size());
    Matrix na(d, q);
    Vector ba(q);
    for (Eigen::Index a = 0; a < q; ++a) {
      const std::size_t j = active[static_cast<std::size_t>(a)];
      na.col(a) = normal(j);
      ba(a) = flip[j] * b[j];
    }
    auto exact = project_onto_active(c, na, ba);
    bool ok = exact.ok;
    for (Eigen::Index a = 0; a < q && ok; ++a) {
      if (!equality[active[static_cast<std::size_t>(a)]] && exact.lambda(a) < 0.0) ok = false;
    }
    if (ok) {
      out.x = exact.x;
      for (Eigen::Index a = 0; a < q; ++a) u[static_cast<std::size_t>(a)] = exact.lambda(a);
    }
  }
  for (std::size_t a = 0; a < active.size(); ++a) {
    out.lambda(static_cast<Eigen::Index>(active[a])) = flip[active[a]] * u[a];
  }
  out.status = QpStatus::Optimal;
  return out;
}

}  // namespace detail

// Residuals of the KKT system for the multipliers as laid out in
// ProjectionResult. Stationarity uses the convention
//   (x - center) + sum_j mu_j a_j - sum_i nu_i e_i + eta * 1 = 0.
inline KktResiduals kkt_residuals(const ProjectionProblem& p, const Vector& x,
                                  const Vector& mu, const Vector& nu,
                                  double eta) {
  KktResiduals r;
  const Eigen::Index d = p.center.size();
  Vector grad = x - p.center;
  if (p.rows.rows() > 0) grad += p.rows.transpose() * mu;
  if (p.lower) grad -= nu;
  if (p.sum) grad += Vector::Constant(d, eta);
  r.stationarity = d > 0 ? grad.cwiseAbs().maxCoeff() : 0.0;

  for (Eigen::Index j = 0; j < p.rows.rows(); ++j) {
    double slack = p.rows.row(j).dot(x) - p.rhs(j);
    r.primal = std::max(r.primal, slack);
    r.complementarity = std::max(r.complementarity, std::abs(mu(j) * slack));
    r.dual = std::max(r.dual, -mu(j));
  }
  if (p.lower) {
    for (Eigen::Index i = 0; i < d; ++i) {
      double l = (*p.lower)(i);
      if (!std::isfinite(l)) continue;
      double slack = l - x(i);
      r.primal = std::max(r.primal, slack);
      r.complementarity = std::max(r.complementarity, std::abs(nu(i) * slack));
      r.dual = std::max(r.dual, -nu(i));
    }
  }
  if (p.sum) r.primal = std::max(r.primal, std::abs(x.sum() - *p.sum));
  return r;
}

// Lower bound on min ||x - center|| from the Lagrangian dual at the given
// multipliers. Negative multipliers are clamped, so the bound is valid for
// any input, converged or not. The rounding error of the evaluation is
// bounded and subtracted.
inline double dual_lower_bound(const ProjectionProblem& p, const Vector& mu,
                               const Vector& nu, double eta) {
  const Eigen::Index d = p.center.size();
  const Eigen::Index m = p.rows.rows();
  const double u = std::numeric_limits<double>::epsilon();
  Vector w = Vector::Zero(d);
  Vector mag = Vector::Zero(d);  // |terms| summed into each entry of w
  double q = 0.0, err = 0.0;
  for (Eigen::Index j = 0; j < m; ++j) {
    const double mj = std::max(0.0, mu(j));
    if (mj == 0.0) continue;
    w += mj * p.rows.row(j).transpose();
    mag += mj * p.rows.row(j).transpose().cwiseAbs();
    q -= mj * p.rhs(j);
    err += std::abs(mj * p.rhs(j));
  }
  if (p.lower) {
    for (Eigen::Index i = 0; i < d; ++i) {
      const double l = (*p.lower)(i);
      const double ni = std::max(0.0, nu(i));
      if (!std::isfinite(l) || ni == 0.0) continue;
      w(i) -= ni;
      mag(i) += ni;
      q += ni * l;
      err += std::abs(ni * l);
    }
  }
  if (p.sum) {
    w.array() += eta;
    mag.array() += std::abs(eta);
    q -= eta * *p.sum;
    err += std::abs(eta * *p.sum);
  }
  // q = c'w - |w|^2 / 2 + ... = |c|^2 / 2 - |c - w|^2 / 2 + ...; the second
  // form is insensitive to rounding in w to first order near the optimum.
  const Vector r = p.center - w;
  q += 0.5 * p.center.squaredNorm() - 0.5 * r.squaredNorm();
  const double gamma = static_cast<double>(m + d + 2) * u;
  const Vector delta = gamma * (mag + w.cwiseAbs());
  err = gamma * err + delta.dot(r.cwiseAbs()) + 0.5 * delta.squaredNorm() +
        4 * u * (p.center.squaredNorm() + r.squaredNorm());
  return std::sqrt(2.0 * std::max(0.0, q - err));
}

inline ProjectionResult project_onto_polyhedron(const ProjectionProblem& p,
                                                const QpOptions& options = {}) {
  const Eigen::Index d = p.center.size();
  const Eigen::Index m = p.rows.rows();
  ISM_REQUIRE(p.rows.cols() == d || m == 0, "row dimension mismatch");
  ISM_REQUIRE(p.rhs.size() == m, "rhs size mismatch");
  ISM_REQUIRE(!p.lower || p.lower->size() == d, "lower bound size mismatch");

  ProjectionResult out;
  out.row_multipliers = Vector::Zero(m);
  out.lower_multipliers = Vector::Zero(d);
  out.x = p.center;

  // Assemble G y >= h column by column of E = [G^T; h^T]. Each column is
  // scaled to a unit normal; `scale` maps multipliers back.
  enum class Kind { Row, Lower, SumUp, SumDown };
  struct Column {
    Kind kind;
    Eigen::Index index;
    double scale;
  };
  std::vector<Column> columns;
  std::vector<Vector> normals;
  std::vector<double> offsets;

  for (Eigen::Index j = 0; j < m; ++j) {
    double norm = p.rows.row(j).norm();
    if (norm == 0.0) {
      if (p.rhs(j) < 0.0) {
        // 0 <= c_j < 0: infeasible on its own.
        out.status = QpStatus::Infeasible;
        return out;
      }
      continue;
    }
    Vector a = p.rows.row(j).transpose() / norm;
    normals.push_back(-a);
    offsets.push_back(a.dot(p.center) - p.rhs(j) / norm);
    columns.push_back({Kind::Row, j, norm});
  }
  if (p.lower) {
    for (Eigen::Index i = 0; i < d; ++i) {
      double l = (*p.lower)(i);
      if (!std::isfinite(l)) continue;
      normals.push_back(Vector::Unit(d, i));
      offsets.push_back(l - p.center(i));
      columns.push_back({Kind::Lower, i, 1.0});
    }
  }
  if (p.sum) {
    const double rd = std::sqrt(static_cast<double>(d));
    const double gap = (*p.sum - p.center.sum()) / rd;
    normals.push_back(Vector::Constant(d, 1.0 / rd));
    offsets.push_back(gap);
    columns.push_back({Kind::SumUp, 0, rd});
    normals.push_back(Vector::Constant(d, -1.0 / rd));
    offsets.push_back(-gap);
    columns.push_back({Kind::SumDown, 0, rd});
  }

  const auto k = static_cast<Eigen::Index>(columns.size());
  if (k == 0) {
    out.status = QpStatus::Optimal;
    out.residuals = kkt_residuals(p, out.x, out.row_multipliers,
                                  out.lower_multipliers, 0.0);
    return out;
  }

  auto assemble = [&](const Vector& lam) {
    Vector y = Vector::Zero(d);
    for (Eigen::Index c = 0; c < k; ++c) {
      if (lam(c) != 0.0) y += lam(c) * normals[static_cast<std::size_t>(c)];
    }
    return y;
  };

  auto unpack = [&](const Vector& lam, ProjectionResult& res) {
    res.row_multipliers.setZero();
    res.lower_multipliers.setZero();
    double up = 0.0, down = 0.0;
    for (Eigen::Index c = 0; c < k; ++c) {
      const Column& col = columns[static_cast<std::size_t>(c)];
      switch (col.kind) {
        case Kind::Row: res.row_multipliers(col.index) = lam(c) / col.scale; break;
        case Kind::Lower: res.lower_multipliers(col.index) = lam(c); break;
        case Kind::SumUp: up = lam(c) / col.scale; break;
        case Kind::SumDown: down = lam(c) / col.scale; break;
      }
    }
    res.sum_multiplier = down - up;
  };

  auto score = [&](const KktResiduals& res) {
    return std::max({res.stationarity / options.stationarity_tol,
                     res.primal / options.primal_tol,
                     res.complementarity / options.complementarity_tol,
                     res.dual / options.complementarity_tol});
  };

  auto certify = [&](const Vector& x, const Vector& lam) {
    ProjectionResult res = out;
    res.x = x;
    unpack(lam, res);
    res.residuals = kkt_residuals(p, res.x, res.row_multipliers,
                                  res.lower_multipliers, res.sum_multiplier);
    res.status = score(res.residuals) <= 1.0 ? QpStatus::Optimal : QpStatus::NonConverged;
    return res;
  };

  // Exact projection onto the constraints in `active`, held as equations.
  auto polish = [&](const std::vector<Eigen::Index>& active) -> std::optional<ProjectionResult> {
    const auto q = static_cast<Eigen::Index>(active.size());
    Matrix na(d, q);
    Vector ba(q);
    for (Eigen::Index a = 0; a < q; ++a) {
      const auto c = static_cast<std::size_t>(active[static_cast<std::size_t>(a)]);
      na.col(a) = normals[c];
      ba(a) = offsets[c] + normals[c].dot(p.center);
    }
    auto exact = detail::project_onto_active(p.center, na, ba);
    if (!exact.ok || (q > 0 && exact.lambda.minCoeff() < 0.0)) return std::nullopt;
    Vector lam = Vector::Zero(k);
    for (Eigen::Index a = 0; a < q; ++a) lam(active[static_cast<std::size_t>(a)]) = exact.lambda(a);
    return certify(exact.x, lam);
  };

  // At a degenerate vertex the multipliers of any one active basis can be
  // huge, and then rounding noise in the slacks alone breaks
  // complementarity. Snap coordinates that sit on their bound (and, for a
  // cone, a point at the apex) so those slacks are exactly zero, then refit
  // the multipliers over every nearly active constraint by NNLS.
  bool homogeneous = !p.sum;
  for (Eigen::Index c = 0; c < k && homogeneous; ++c) {
    const Vector& nc = normals[static_cast<std::size_t>(c)];
    homogeneous = offsets[static_cast<std::size_t>(c)] + nc.dot(p.center) == 0.0;
  }
  auto snapped = [&](Vector x) {
    const double tiny = 1e-12 * std::max(1.0, p.center.cwiseAbs().maxCoeff());
    if (p.lower) {
      for (Eigen::Index i = 0; i < d; ++i) {
        const double l = (*p.lower)(i);
        if (std::isfinite(l) && std::abs(x(i) - l) <= tiny) x(i) = l;
      }
    }
    if (homogeneous && x.cwiseAbs().maxCoeff() <= tiny) x.setZero();
    return x;
  };
  auto refit_at = [&](const ProjectionResult& res, const Vector& x) {
    const Vector y = x - p.center;
    std::vector<Eigen::Index> near;
    for (Eigen::Index c = 0; c < k; ++c) {
      const auto uc = static_cast<std::size_t>(c);
      if (std::abs(normals[uc].dot(y) - offsets[uc]) <= options.primal_tol) near.push_back(c);
    }
    if (near.empty()) return res;
    Matrix nw(d, static_cast<Eigen::Index>(near.size()));
    for (std::size_t a = 0; a < near.size(); ++a) {
      nw.col(static_cast<Eigen::Index>(a)) = normals[static_cast<std::size_t>(near[a])];
    }
    auto fit = detail::nnls(nw, y, options.max_iterations);
    if (!fit.converged) return res;
    Vector lam = Vector::Zero(k);
    for (std::size_t a = 0; a < near.size(); ++a) lam(near[a]) = fit.u(static_cast<Eigen::Index>(a));
    ProjectionResult alt = certify(x, lam);
    alt.iterations = res.iterations;
    return score(alt.residuals) < score(res.residuals) ? alt : res;
  };
  auto refit = [&](ProjectionResult res) {
    if (res.status == QpStatus::Optimal || res.x.size() != d) return res;
    res = refit_at(res, res.x);
    const Vector xs = snapped(res.x);
    if (res.status != QpStatus::Optimal && xs != res.x) res = refit_at(res, xs);
    return res;
  };

  // Homogeneous constraints describe a cone K, and the projection is
  // center - P(center) with P the projection onto the polar cone spanned by
  // the outward normals: one NNLS in d dimensions, robust at degenerate
  // vertices such as the origin.
  int iterations = 0;
  ProjectionResult cone_result = out;
  if (homogeneous) {
    Matrix gen(d, k);
    for (Eigen::Index c = 0; c < k; ++c) gen.col(c) = -normals[static_cast<std::size_t>(c)];
    auto nn = detail::nnls(gen, p.center, options.max_iterations);
    iterations += nn.iterations;
    if (nn.converged) {
      cone_result = certify(p.center - gen * nn.u, nn.u);
      std::vector<Eigen::Index> active;
      for (Eigen::Index c : nn.passive) {
        if (nn.u(c) > 0.0) active.push_back(c);
      }
      if (auto polished = polish(active);
          polished && score(polished->residuals) <= score(cone_result.residuals)) {
        cone_result = *polished;
      }
      cone_result = refit(cone_result);
      if (cone_result.status == QpStatus::Optimal) {
        cone_result.iterations = iterations;
        return cone_result;
      }
    }
  }

  // Primary method: dual active set in x-space. The sum equation is one
  // column there; its mirrored copy is only used by the fallback below.
  std::vector<Vector> gi_normals;
  std::vector<double> gi_rhs;
  std::vector<char> gi_equality;
  std::vector<Eigen::Index> gi_column;
  for (Eigen::Index c = 0; c < k; ++c) {
    const Column& col = columns[static_cast<std::size_t>(c)];
    if (col.kind == Kind::SumDown) continue;
    const Vector& nc = normals[static_cast<std::size_t>(c)];
    gi_normals.push_back(nc);
    gi_rhs.push_back(offsets[static_cast<std::size_t>(c)] + nc.dot(p.center));
    gi_equality.push_back(col.kind == Kind::SumUp);
    gi_column.push_back(c);
  }
  const auto gi = detail::dual_active_set(p.center, gi_normals, gi_rhs, gi_equality,
                                          options.max_iterations,
                                          0.5 * options.primal_tol);
  iterations += gi.iterations;
  ProjectionResult gi_result = out;
  gi_result.status = gi.status;
  if (gi.status == QpStatus::Optimal) {
    Vector lam = Vector::Zero(k);
    for (std::size_t g = 0; g < gi_column.size(); ++g) {
      lam(gi_column[g]) = gi.lambda(static_cast<Eigen::Index>(g));
    }
    gi_result = refit(certify(gi.x, lam));
    if (gi_result.status == QpStatus::Optimal) {
      gi_result.iterations = iterations;
      return gi_result;
    }
  }

  // Fallback: least-distance programming through NNLS on
  // E = [G^T; h^T], f = e_{d+1}.
  Matrix e(d + 1, k);
  for (Eigen::Index c = 0; c < k; ++c) {
    e.col(c).head(d) = normals[static_cast<std::size_t>(c)];
    e(d, c) = offsets[static_cast<std::size_t>(c)];
  }
  Vector f = Vector::Unit(d + 1, d);

  auto nn = detail::nnls(e, f, options.max_iterations);
  iterations += nn.iterations;
  auto finish = [&](ProjectionResult res) {
    res.iterations = iterations;
    return res;
  };
  if (!nn.converged) {
    gi_result.status = gi.status == QpStatus::Infeasible ? QpStatus::Infeasible
                                                          : QpStatus::NonConverged;
    return finish(gi_result);
  }
  Vector r = e * nn.u - f;
  const double last = r(d);  // = h^T u - 1, negative iff feasible
  // At an exact NNLS optimum ||r||^2 = -last. A residual far below that is
  // rounding on top of a Farkas certificate.
  const bool farkas = r.norm() <= 1e-9 && r.squaredNorm() < 0.5 * std::abs(last);
  if (last > -1e-13 || (farkas && gi.status == QpStatus::Infeasible)) {
    if (gi.status == QpStatus::Infeasible) {
      out.status = QpStatus::Infeasible;
      return finish(out);
    }
    gi_result.status = QpStatus::NonConverged;
    return finish(gi_result);
  }

  // lambda are the multipliers of the unit-normal system G y >= h.
  Vector lambda = nn.u / (-last);
  ProjectionResult best = certify(p.center + assemble(lambda), lambda);

  std::vector<Eigen::Index> active;
  for (Eigen::Index c : nn.passive) {
    if (lambda(c) > 0.0) active.push_back(c);
  }
  if (auto polished = polish(active);
      polished && score(polished->residuals) <= score(best.residuals)) {
    best = *polished;
  }
  if (gi.status == QpStatus::Optimal && score(gi_result.residuals) < score(best.residuals)) {
    best = gi_result;
  }
  return finish(refit(best));
}

}  // namespace ism
