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

"""Standalone numpy recomputation of the coverage model.

Writes tests/data/coverage_fixture.json. Shares no code with the C++
library: densities, sensing, horizon products, greedy rows and action rays
are all rebuilt here from their definitions.
"""

import json
import math
import os

import numpy as np

BOUNDS = (0.0, 0.0, 100.0, 100.0)
RES = (40, 40)


def cell_centers(bounds, res):
    x0, y0, x1, y1 = bounds
    nx, ny = res
    w, h = (x1 - x0) / nx, (y1 - y0) / ny
    xs = x0 + (np.arange(nx) + 0.5) * w
    ys = y0 + (np.arange(ny) + 0.5) * h
    gx, gy = np.meshgrid(xs, ys)  # row = y index, so flatten is iy * nx + ix
    return np.stack([gx.ravel(), gy.ravel()], axis=1), w * h


def density(components, bounds=BOUNDS, res=RES):
    pts, area = cell_centers(bounds, res)
    field = np.zeros(len(pts))
    for c in components:
        mean = np.asarray(c["mean"], float)
        cov = np.asarray(c["covariance"], float)
        inv = np.linalg.inv(cov)
        d = pts - mean
        q = np.einsum("ni,ij,nj->n", d, inv, d)
        field += c["weight"] * np.exp(-0.5 * q) / (2 * math.pi * math.sqrt(np.linalg.det(cov)))
    return field / (field.sum() * area)


def detect(pts, positions, sensors):
    miss = np.ones(len(pts))
    for p, (radius, decay) in zip(positions, sensors):
        dist = np.linalg.norm(pts - np.asarray(p, float), axis=1)
        miss *= 1.0 - np.where(dist <= radius, np.exp(-decay * dist), 0.0)
    return 1.0 - miss


def coverage(phi, positions, sensors, bounds=BOUNDS, res=RES):
    pts, area = cell_centers(bounds, res)
    return float((phi * detect(pts, positions, sensors)).sum() * area)


def basis(phis, actions, selected, sensors):
    """g_j = 1 - prod_t (1 - h_j(p(t))) over selected (robot, waypoints)."""
    steps = len(actions[0]["waypoints"])
    g, per_step = [], []
    for phi in phis:
        miss, hs = 1.0, []
        for t in range(steps):
            pos = [actions[e]["waypoints"][t] for e in selected]
            sen = [sensors[actions[e]["robot"]] for e in selected]
            h = coverage(phi, pos, sen) if selected else 0.0
            hs.append(h)
            miss *= 1.0 - h
        g.append(1.0 - miss)
        per_step.append(hs)
    return np.array(g), per_step


def rays(position, count, step, horizon, bounds=BOUNDS):
    x0, y0, x1, y1 = bounds
    out = []
    for k in range(count):
        a = 2 * math.pi * k / count
        wp = []
        for t in range(horizon + 1):
            x = position[0] + step * t * math.cos(a)
            y = position[1] + step * t * math.sin(a)
            wp.append([min(max(x, x0), x1), min(max(y, y0), y1)])
        out.append(wp)
    return out


def iso(mean, sigma, weight=1.0):
    return {"weight": weight, "mean": mean, "covariance": [[sigma**2, 0.0], [0.0, sigma**2]]}


def main():
    events = [
        [iso([20, 75], 8)],
        [iso([80, 75], 8)],
        [
            {"weight": 0.7, "mean": [50, 20], "covariance": [[90.0, 25.0], [25.0, 60.0]]},
            {"weight": 0.3, "mean": [65, 35], "covariance": [[40.0, 0.0], [0.0, 40.0]]},
        ],
    ]
    phis = [density(e) for e in events]
    sensors = [(15.0, 0.05), (12.0, 0.08), (15.0, 0.05)]

    # Two robots, single-waypoint actions.
    theta = np.array([0.2, 0.3, 0.5])
    two = [{"robot": 0, "waypoints": [[30, 60]]}, {"robot": 1, "waypoints": [[60, 30]]}]
    g2, _ = basis(phis, two, [0, 1], sensors)
    g0, _ = basis(phis, two, [0], sensors)
    evaluate = {
        "actions": two,
        "theta": theta.tolist(),
        "value": float(theta @ g2),
        "single": float(theta @ g0),
        "gain": float(theta @ g2 - theta @ g0),
        "per_event": [coverage(phi, [[30, 60], [60, 30]], sensors[:2]) for phi in phis],
    }

    # Horizon product, two robots with H = 2.
    hz = [
        {"robot": 0, "waypoints": [[22, 70], [24, 71], [26, 72]]},
        {"robot": 1, "waypoints": [[70, 70], [72, 72], [74, 74]]},
    ]
    gh, steps = basis(phis, hz, [0, 1], sensors)
    horizon = {"actions": hz, "basis": gh.tolist(), "step_coverage": steps}

    # Greedy inequality rows: 2 robots x 3 actions, suggestion of size 2.
    acts = []
    for r, start in enumerate([[40, 55], [60, 45]]):
        for k, heading in enumerate([0.0, 2.0, 4.0]):
            wp = [[start[0] + 3 * t * math.cos(heading), start[1] + 3 * t * math.sin(heading)]
                  for t in range(3)]
            acts.append({"robot": r, "waypoints": wp})
    suggestion = [4, 1]
    rows = []
    for i in range(len(suggestion)):
        prefix = suggestion[:i]
        used = {acts[e]["robot"] for e in prefix}
        for s in range(len(acts)):
            if s in suggestion[: i + 1] or acts[s]["robot"] in used:
                continue
            b = basis(phis, acts, prefix + [s], sensors)[0] - basis(
                phis, acts, prefix + [suggestion[i]], sensors)[0]
            rows.append({"prefix_length": i + 1, "competitor": s, "b": b.tolist()})
    greedy_rows = {"actions": acts, "suggestion": suggestion, "rows": rows}

    # Full team on the reference three-robot scenario, action 0 per robot.
    fig_events = [[iso([20, 75], 8)], [iso([80, 75], 8)], [iso([50, 20], 8)]]
    fig_phis = [density(e) for e in fig_events]
    starts = [[45, 52], [55, 52], [50, 46]]
    team = [{"robot": r, "waypoints": rays(p, 20, 2.0, 3)[5 * r]} for r, p in enumerate(starts)]
    gf, _ = basis(fig_phis, team, [0, 1, 2], [(15.0, 0.05)] * 3)
    fig = {"suggested_action": [0, 5, 10], "basis": gf.tolist()}

    clip = {
        "position": [1.0, 98.5],
        "count": 8,
        "step": 2.0,
        "horizon": 3,
        "waypoints": rays([1.0, 98.5], 8, 2.0, 3),
    }

    out = {
        "bounds": list(BOUNDS),
        "resolution": list(RES),
        "events": events,
        "sensors": [{"radius": r, "decay": d} for r, d in sensors],
        "evaluate": evaluate,
        "horizon": horizon,
        "greedy_rows": greedy_rows,
        "fig3_team": fig,
        "clip": clip,
    }
    path = os.path.join(os.path.dirname(__file__), "..", "data", "coverage_fixture.json")
    with open(path, "w") as f:
        json.dump(out, f, indent=1)
        f.write("\n")


if __name__ == "__main__":
    main()
