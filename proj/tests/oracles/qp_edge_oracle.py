# Copyright 2026 The ISM Authors
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.

"""Reference answers for two ill-conditioned projection instances.

qp_thin_cone.json: homogeneous rows whose feasible cone is {0}, but only
barely. Records the optimum and the smallest worst-row value over the
simplex, which is positive iff the cone is trivial.

qp_near_farkas.json: infeasible by about 1e-6. Records the smallest
uniform row relaxation that makes it feasible.

Writes tests/data/qp_edge_expected.json.
"""

import json
import os

import cvxpy as cp
import numpy as np

here = os.path.join(os.path.dirname(__file__), "..", "data")
opts = dict(solver=cp.CLARABEL, tol_gap_abs=1e-12, tol_gap_rel=1e-12, tol_feas=1e-12)


def load(name):
    doc = json.load(open(os.path.join(here, name)))
    theta0 = np.array(doc["theta0"], float)
    B = np.array([r["b"] for r in doc["rows"]], float)
    rhs = -np.array([r["margin"] for r in doc["rows"]], float)
    lb = doc["domain"].get("lower_bounds")
    return doc, theta0, B, rhs, (np.array(lb, float) if lb is not None else None)


out = {}

doc, theta0, B, rhs, lb = load("qp_thin_cone.json")
x = cp.Variable(len(theta0))
cons = [B @ x <= rhs] + ([x >= lb] if lb is not None else [])
prob = cp.Problem(cp.Minimize(cp.sum_squares(x - theta0)), cons)
prob.solve(**opts)
z = cp.Variable(len(theta0))
t = cp.Variable()
gap = cp.Problem(cp.Minimize(t), [B @ z <= t, z >= 0, cp.sum(z) == 1])
gap.solve(**opts)
out["thin_cone"] = {"status": prob.status, "objective": float(np.linalg.norm(x.value - theta0)),
                    "prior_norm": float(np.linalg.norm(theta0)), "cone_gap": float(t.value)}

doc, theta0, B, rhs, lb = load("qp_near_farkas.json")
y = cp.Variable(len(theta0))
s = cp.Variable()
cons = [B @ y <= rhs + s]
if lb is not None:
    cons.append(y >= lb)
if doc["domain"].get("preserve_sum"):
    cons.append(cp.sum(y) == theta0.sum())
relax = cp.Problem(cp.Minimize(s), cons)
relax.solve(**opts)
out["near_farkas"] = {"min_relaxation": float(s.value)}

with open(os.path.join(here, "qp_edge_expected.json"), "w") as f:
    json.dump(out, f, indent=2)
    f.write("\n")
print(json.dumps(out, indent=2))
