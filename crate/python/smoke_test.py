#!/usr/bin/env python3
"""Smoke test for the waypath Python extension.

Builds nothing itself: it locates the cdylib produced by
`cargo build --release -p waypath-py`, exposes it under the module name
`waypath`, and runs a handful of end-to-end sanity checks on a coarse grid.
"""

import math
import shutil
import sys
import tempfile
from pathlib import Path

REPO = Path(__file__).resolve().parent.parent


def import_waypath():
    candidates = [
        REPO / "target" / "release" / "libwaypath.so",
        REPO / "target" / "debug" / "libwaypath.so",
        REPO / "target" / "release" / "libwaypath.dylib",
        REPO / "target" / "debug" / "libwaypath.dylib",
    ]
    lib = next((p for p in candidates if p.exists()), None)
    if lib is None:
        sys.exit(
            "extension not built; run `cargo build --release -p waypath-py` first"
        )
    staging = Path(tempfile.mkdtemp(prefix="waypath-py-"))
    shutil.copy(lib, staging / "waypath.so")
    sys.path.insert(0, str(staging))
    import waypath  # noqa: E402

    return waypath


def check(label, ok):
    print(f"{'PASS' if ok else 'FAIL'}  {label}")
    if not ok:
        sys.exit(1)


def main():
    wp = import_waypath()
    names = wp.scenario_names()
    check("built-in scenario list", "four_targets" in names and "storms" in names)

    planner = wp.load("four_targets", grid_n=101)
    nx, ny = planner.grid_shape
    check("grid shape", (nx, ny) == (101, 101))
    check("probabilities sum to 1", abs(sum(planner.probs) - 1.0) < 1e-12)

    q = planner.expected_field()
    qbar = planner.worst_field()
    check("field dimensions", len(q) == ny and len(q[0]) == nx)
    finite = [
        (q[j][i], qbar[j][i])
        for j in range(ny)
        for i in range(nx)
        if math.isfinite(q[j][i])
    ]
    check("worst dominates expected", all(w >= e - 1e-12 for e, w in finite))

    plan = planner.plan_fixed(0.4)
    wx, wy = plan["waypoint"]
    check("fixed plan waypoint in domain", 0.0 <= wx <= 1.0 and 0.0 <= wy <= 1.0)
    check(
        "expected total = T + field value",
        plan["expected_total"] > 0.4,
    )

    staged = planner.plan_discrete([0.08, 0.4], [0.9, 0.1])
    check("two stage waypoints", len(staged["waypoints"]) == 2)

    expo = planner.plan_exponential(2.5)
    check("exponential plan has motionless nodes", expo["motionless_count"] >= 1)

    policy = planner.chance_policy(0.4, 0.365, 0.8)
    total = sum(p for _, _, p in policy["atoms"])
    check("chance policy probabilities sum to 1", abs(total - 1.0) < 1e-9)
    check("chance policy has at most 2 atoms", 1 <= len(policy["atoms"]) <= 2)

    front = planner.pareto(0.4)
    check("pareto front nonempty", len(front) >= 1)
    check(
        "pareto front sorted and trading off",
        all(front[k][0] < front[k + 1][0] and front[k][1] > front[k + 1][1] for k in range(len(front) - 1)),
    )

    sx, sy = planner.start
    path = planner.trace(wx, wy)
    px, py = path[0]
    check("trace starts near the start point", math.hypot(px - sx, py - sy) < 0.05)

    storms = wp.load("storms", grid_n=101)
    splan = storms.plan_fixed(0.4)
    check("storm scenario plans", splan["expected_total"] > 0.0)

    print("smoke test passed")


if __name__ == "__main__":
    main()
