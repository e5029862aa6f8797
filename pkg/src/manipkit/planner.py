"""Sampling-based motion planning over the controlled joints.

Planning happens in the controlled-joint subspace; frozen joints stay at
the workspace's current values. All randomness flows from the PlannerSpec
seed through numpy SeedSequence spawns, so identical (workspace, spec,
query) inputs reproduce identical waypoint lists.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Optional, Tuple, Union

import numpy as np

from .collision import check_config, check_edge
from .scene import RobotModel, Workspace

ALGORITHMS = ("RRT", "RRTConnect")


class PlannerError(ValueError):
    """Invalid planner settings or query."""


@dataclass(frozen=True)
class PlannerSpec:
    algorithm: str = "RRT"
    step_size: float = 0.1
    goal_bias: float = 0.05
    max_iterations: int = 5000
    edge_resolution: float = 0.02
    seed: int = 0
    shortcut_passes: int = 50

    def __post_init__(self):
        if self.algorithm not in ALGORITHMS:
            raise PlannerError(f"unknown planner name {self.algorithm!r}")
        if not 0.0 <= self.goal_bias <= 1.0:
            raise PlannerError("goal_bias must lie in [0, 1]")
        if self.step_size <= 0:
            raise PlannerError("step_size must be positive")
        if self.max_iterations < 1:
            raise PlannerError("max_iterations must be at least 1")
        if self.edge_resolution <= 0:
            raise PlannerError("edge_resolution must be positive")
        if self.shortcut_passes < 0:
            raise PlannerError("shortcut_passes must be nonnegative")

    PARAM_NAMES = (
        "step_size", "goal_bias", "max_iterations", "edge_resolution",
        "seed", "shortcut_passes",
    )

    @classmethod
    def from_params(cls, algorithm: str, params: dict) -> "PlannerSpec":
        """Build from problem-file strings; integer fields are coerced."""
        kwargs = {}
        for name, value in params.items():
            if name not in cls.PARAM_NAMES:
                raise PlannerError(f"unknown planner parameter {name!r}")
            if name in ("max_iterations", "seed", "shortcut_passes"):
                kwargs[name] = int(value)
            else:
                kwargs[name] = float(value)
        return cls(algorithm=algorithm, **kwargs)


@dataclass(frozen=True)
class PlanningQuery:
    start: np.ndarray
    goal: np.ndarray

    def __post_init__(self):
        start = np.asarray(self.start, dtype=float).reshape(-1)
        goal = np.asarray(self.goal, dtype=float).reshape(-1)
        if start.shape != goal.shape:
            raise PlannerError("start and goal arity differ")
        object.__setattr__(self, "start", start)
        object.__setattr__(self, "goal", goal)


@dataclass(frozen=True)
class PlanStats:
    iterations: int
    tree_sizes: Tuple[int, ...]
    wall_time: float  # seconds; kept in memory, excluded from exports


@dataclass(frozen=True)
class Trajectory:
    waypoints: tuple  # of controlled-joint configurations
    stats: PlanStats
    controlled: Tuple[int, ...] = ()

    def length(self) -> float:
        return float(
            sum(
                np.linalg.norm(b - a)
                for a, b in zip(self.waypoints, self.waypoints[1:])
            )
        )


@dataclass(frozen=True)
class PlanFailure:
    kind: str  # start_invalid | goal_invalid | timeout
    stats: PlanStats
    witness: Optional[Tuple[str, str]] = None

    def __str__(self):
        detail = f" (witness {self.witness[0]}/{self.witness[1]})" if self.witness else ""
        return f"planning failed: {self.kind}{detail}"


PlanResult = Union[Trajectory, PlanFailure]


def _controlled_limits(ws: Workspace) -> np.ndarray:
    return ws.robot.joint_limits[list(ws.controlled)]


def validate_query(ws: Workspace, query: PlanningQuery) -> Optional[PlanFailure]:
    """Check both endpoints against arity, limits, and collision; None
    when the query is admissible."""
    n = len(ws.controlled)
    limits = _controlled_limits(ws)
    stats = PlanStats(0, (0,), 0.0)
    for kind, q in (("start_invalid", query.start), ("goal_invalid", query.goal)):
        if q.shape != (n,):
            raise PlannerError(
                f"query arity {q.shape[0]} does not match "
                f"{n} controlled joints"
            )
        if np.any(q < limits[:, 0]) or np.any(q > limits[:, 1]):
            return PlanFailure(kind, stats)
        report = check_config(ws, ws.full_config(q))
        if report.in_collision:
            return PlanFailure(kind, stats, report.witness)
    return None


class _Tree:
    def __init__(self, root: np.ndarray, capacity: int = 256):
        self.nodes = np.empty((capacity, root.shape[0]))
        self.parents = np.full(capacity, -1, dtype=np.int64)
        self.nodes[0] = root
        self.size = 1

    def nearest(self, q: np.ndarray) -> int:
        d = self.nodes[: self.size] - q
        return int(np.argmin(np.einsum("ij,ij->i", d, d)))

    def add(self, q: np.ndarray, parent: int) -> int:
        if self.size == self.nodes.shape[0]:
            self.nodes = np.vstack([self.nodes, np.empty_like(self.nodes)])
            self.parents = np.concatenate(
                [self.parents, np.full(self.parents.shape[0], -1, dtype=np.int64)]
            )
        i = self.size
        self.nodes[i] = q
        self.parents[i] = parent
        self.size += 1
        return i

    def path_to_root(self, i: int) -> list:
        out = []
        while i >= 0:
            out.append(self.nodes[i].copy())
            i = int(self.parents[i])
        out.reverse()
        return out


def _steer(q_near: np.ndarray, q_target: np.ndarray, step: float) -> np.ndarray:
    delta = q_target - q_near
    dist = float(np.linalg.norm(delta))
    if dist <= step:
        return q_target.copy()
    return q_near + delta * (step / dist)


def plan(ws: Workspace, spec: PlannerSpec, query: PlanningQuery) -> PlanResult:
    """Plan a collision-free joint path from query.start to query.goal."""
    t0 = time.perf_counter()
    bad = validate_query(ws, query)
    if bad is not None:
        return bad

    # edges are accepted at half the declared resolution so returned
    # paths stay valid under re-checks down to that granularity
    def edge_ok(a: np.ndarray, b: np.ndarray) -> bool:
        return check_edge(
            ws, ws.full_config(a), ws.full_config(b), spec.edge_resolution / 2
        )

    start = query.start.copy()
    goal = query.goal.copy()
    if np.array_equal(start, goal):
        stats = PlanStats(0, (1,), time.perf_counter() - t0)
        return Trajectory((start,), stats, ws.controlled)

    ss_sample, ss_shortcut = np.random.SeedSequence(spec.seed).spawn(2)
    rng = np.random.default_rng(ss_sample)
    limits = _controlled_limits(ws)

    if spec.algorithm == "RRT":
        raw, iters, sizes = _plan_rrt(spec, start, goal, limits, rng, edge_ok)
    else:
        raw, iters, sizes = _plan_rrt_connect(
            spec, start, goal, limits, rng, edge_ok
        )
    if raw is None:
        return PlanFailure(
            "timeout", PlanStats(iters, sizes, time.perf_counter() - t0)
        )
    smoothed = _shortcut(
        raw, spec.shortcut_passes, np.random.default_rng(ss_shortcut), edge_ok
    )
    stats = PlanStats(iters, sizes, time.perf_counter() - t0)
    return Trajectory(tuple(smoothed), stats, ws.controlled)


def _plan_rrt(spec, start, goal, limits, rng, edge_ok):
    tree = _Tree(start)
    for it in range(1, spec.max_iterations + 1):
        if rng.random() < spec.goal_bias:
            sample = goal.copy()
        else:
            sample = rng.uniform(limits[:, 0], limits[:, 1])
        ni = tree.nearest(sample)
        q_new = _steer(tree.nodes[ni], sample, spec.step_size)
        if not edge_ok(tree.nodes[ni], q_new):
            continue
        new_i = tree.add(q_new, ni)
        # direct goal connection whenever a node lands within one step
        if float(np.linalg.norm(goal - q_new)) <= spec.step_size and edge_ok(
            q_new, goal
        ):
            path = tree.path_to_root(new_i)
            path.append(goal.copy())
            return path, it, (tree.size,)
    return None, spec.max_iterations, (tree.size,)


def _plan_rrt_connect(spec, start, goal, limits, rng, edge_ok):
    tree_a = _Tree(start)
    tree_b = _Tree(goal)
    a_is_start = True
    for it in range(1, spec.max_iterations + 1):
        sample = rng.uniform(limits[:, 0], limits[:, 1])
        ni = tree_a.nearest(sample)
        q_new = _steer(tree_a.nodes[ni], sample, spec.step_size)
        if edge_ok(tree_a.nodes[ni], q_new):
            ai = tree_a.add(q_new, ni)
            # greedy connect: step the other tree until blocked or met
            bi = tree_b.nearest(q_new)
            while True:
                q_c = _steer(tree_b.nodes[bi], q_new, spec.step_size)
                if not edge_ok(tree_b.nodes[bi], q_c):
                    break
                bi = tree_b.add(q_c, bi)
                if np.array_equal(q_c, q_new):
                    path_a = tree_a.path_to_root(ai)
                    path_b = tree_b.path_to_root(bi)
                    path_b.reverse()  # now q_new ... root
                    if not a_is_start:
                        path_a, path_b = path_b[::-1], path_a[::-1]
                    sizes = (
                        (tree_a.size, tree_b.size)
                        if a_is_start
                        else (tree_b.size, tree_a.size)
                    )
                    return path_a + path_b[1:], it, sizes
        tree_a, tree_b = tree_b, tree_a
        a_is_start = not a_is_start
    sizes = (
        (tree_a.size, tree_b.size) if a_is_start else (tree_b.size, tree_a.size)
    )
    return None, spec.max_iterations, sizes


def _shortcut(waypoints, passes, rng, edge_ok):
    waypoints = [np.asarray(w, dtype=float) for w in waypoints]
    for _ in range(passes):
        if len(waypoints) < 3:
            break
        i, j = sorted(rng.integers(0, len(waypoints), size=2))
        if j <= i + 1:
            continue
        if edge_ok(waypoints[i], waypoints[j]):
            waypoints = waypoints[: i + 1] + waypoints[j:]
    return waypoints


def shortcut(
    ws: Workspace, traj: Trajectory, passes: int, rng_seed: int
) -> Trajectory:
    """Randomized shortcut smoothing; never lengthens the path and never
    moves the endpoints."""
    resolution = (
        ws.active_planner.edge_resolution
        if isinstance(ws.active_planner, PlannerSpec)
        else 0.02
    )

    def edge_ok(a, b):
        return check_edge(ws, ws.full_config(a), ws.full_config(b), resolution / 2)

    out = _shortcut(
        list(traj.waypoints), passes, np.random.default_rng(rng_seed), edge_ok
    )
    return Trajectory(tuple(out), traj.stats, traj.controlled)


def interpolate_trajectory(
    robot: RobotModel, traj: Trajectory, dt: float
) -> list:
    """Piecewise-linear time parameterization sampled every dt seconds.
    Segment durations come from the slowest controlled joint; returns
    (timestamp, configuration) pairs covering both endpoints."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    controlled = traj.controlled or tuple(range(robot.dof))
    vmax = np.array(
        [robot.movable_joints[i].max_velocity for i in controlled]
    )
    waypoints = [np.asarray(w, dtype=float) for w in traj.waypoints]
    if len(waypoints) == 1:
        return [(0.0, waypoints[0].copy())]
    durations = [
        float(np.max(np.abs(b - a) / vmax))
        for a, b in zip(waypoints, waypoints[1:])
    ]
    knots = np.concatenate([[0.0], np.cumsum(durations)])
    total = float(knots[-1])
    times = list(np.arange(0.0, total, dt))
    if not times or total - times[-1] > 1e-12:
        times.append(total)
    out = []
    seg = 0
    for t in times:
        while seg < len(durations) - 1 and t > knots[seg + 1]:
            seg += 1
        if durations[seg] <= 0.0:
            q = waypoints[seg + 1].copy()
        else:
            alpha = (t - knots[seg]) / durations[seg]
            alpha = min(max(alpha, 0.0), 1.0)
            q = waypoints[seg] + alpha * (waypoints[seg + 1] - waypoints[seg])
        out.append((float(t), q))
    return out
