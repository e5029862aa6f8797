"""Compare the compiled kernel core against the pure-numpy reference.

The backend is chosen at import time, so each backend runs in its own
subprocess (MANIPKIT_PURE_KERNELS=0/1) and reports timings as JSON; the
parent prints a side-by-side table with speedups. Workloads cover the
hot paths: forward kinematics, the analytic Jacobian, configuration and
edge collision checks, damped-least-squares IK, and a full demo plan.

The pure backend dominates the runtime; expect about a minute.
Run from the repository root:

    python3 benchmarks/bench_kernels.py
"""

import json
import os
import subprocess
import sys
import time

WORKLOAD_ORDER = (
    "fk_ee", "jacobian", "check_config", "check_edge", "solve_ik", "plan",
)


def _timed(fn, calls):
    t0 = time.perf_counter()
    for _ in range(calls):
        fn()
    total = time.perf_counter() - t0
    return {"calls": calls, "total_s": total, "per_call_us": 1e6 * total / calls}


def run_worker():
    import numpy as np

    from manipkit._kernels import backend_name
    from manipkit.collision import check_config, check_edge
    from manipkit.geometry import Pose
    from manipkit.kinematics import IkParams, fk_ee, jacobian, solve_ik
    from manipkit.planner import PlannerSpec, PlanningQuery, plan
    from manipkit.sceneio import demo_root, load_problem_directory

    ws = load_problem_directory(demo_root())
    robot, base = ws.robot, ws.robot_base_pose
    rng = np.random.default_rng(0)
    limits = robot.joint_limits
    configs = rng.uniform(limits[:, 0], limits[:, 1], size=(512, robot.dof))
    # edge endpoints near the home config stay inside the desk scene
    near = ws.current_config + rng.uniform(-0.3, 0.3, size=(64, robot.dof))
    near = np.clip(near, limits[:, 0], limits[:, 1])

    targets = [fk_ee(robot, base, q) for q in configs[:32]]
    seed_cfg = ws.current_config
    spec = PlannerSpec(algorithm="RRTConnect", seed=3)
    query = PlanningQuery(ws.query_init, ws.query_goal)

    state = {"i": 0}

    def next_config(pool):
        state["i"] += 1
        return pool[state["i"] % len(pool)]

    results = {
        "fk_ee": _timed(lambda: fk_ee(robot, base, next_config(configs)), 2000),
        "jacobian": _timed(
            lambda: jacobian(robot, base, next_config(configs)), 2000
        ),
        "check_config": _timed(
            lambda: check_config(ws, next_config(configs)), 200
        ),
        "check_edge": _timed(
            lambda: check_edge(
                ws, next_config(near), next_config(near), resolution=0.01
            ),
            40,
        ),
        "solve_ik": _timed(
            lambda: solve_ik(
                robot, base, targets[state["i"] % len(targets)], seed_cfg,
                params=IkParams(), rng_seed=state["i"],
            ),
            10,
        ),
        "plan": _timed(lambda: plan(ws, spec, query), 3),
    }
    print(json.dumps({"backend": backend_name(), "results": results}))


def run_comparison():
    rows = {}
    for flag in ("0", "1"):
        env = dict(os.environ, MANIPKIT_PURE_KERNELS=flag)
        proc = subprocess.run(
            [sys.executable, os.path.abspath(__file__), "--worker"],
            env=env, capture_output=True, text=True, check=True,
        )
        data = json.loads(proc.stdout.strip().splitlines()[-1])
        rows[data["backend"]] = data["results"]
    if set(rows) != {"compiled", "pure"}:
        backends = ", ".join(sorted(rows))
        print(f"only the {backends} backend is available; no comparison")
        return
    name_w = max(len(n) for n in WORKLOAD_ORDER)
    header = (
        f"{'workload':<{name_w}}  {'calls':>6}  {'compiled':>12}  "
        f"{'pure':>12}  {'speedup':>8}"
    )
    print(header)
    print("-" * len(header))
    for name in WORKLOAD_ORDER:
        comp = rows["compiled"][name]
        pure = rows["pure"][name]
        ratio = pure["per_call_us"] / comp["per_call_us"]
        print(
            f"{name:<{name_w}}  {comp['calls']:>6}  "
            f"{comp['per_call_us']:>10.1f}us  {pure['per_call_us']:>10.1f}us  "
            f"{ratio:>7.1f}x"
        )


if __name__ == "__main__":
    if "--worker" in sys.argv:
        run_worker()
    else:
        run_comparison()
