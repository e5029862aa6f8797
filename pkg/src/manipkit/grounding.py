"""Grounding symbolic actions into geometry: grasp poses, IK, planning
queries, and workspace updates.

Each action kind decomposes into staged IK and planning calls; any stage
failure rolls the workspace back to its pre-action snapshot and reports a
structured outcome. execute_plan drives a whole plan and, on failure,
feeds the outcome back through the LLM repair loop.

Two modelling choices worth knowing about:

- Fingers are not modelled as geometry, so the legs where they straddle
  the grasp target (the pick descend and the post-place retreat) treat
  that one object as permeable. Every other stage checks the full scene.
- push is quasi-static and kinematic: the tool tracks a straight line
  behind the object and the object is translated by exactly the
  commanded distance on completion. There is no contact model; a push
  that would shove the object into something is not detected.
"""

from __future__ import annotations

import json
import math
import time
from dataclasses import dataclass, replace
from typing import Optional, Union

import numpy as np

from .collision import check_config, check_edge
from .geometry import Pose, matrix_to_quat
from .kinematics import IkFailure, IkParams, fk_ee, solve_ik
from .planner import (
    PlanFailure,
    PlannerSpec,
    PlanningQuery,
    PlanStats,
    Trajectory,
    interpolate_trajectory,
    plan,
)
from .scene import SceneError, Workspace, attach_object, detach_object
from .symbolic import (
    Plan,
    PlanError,
    SymbolicAction,
    compose_prompt,
    request_plan,
)
from .textualize import textualize

PREGRASP_CLEARANCE = 0.08  # m; also the place ascend/descend height
PUSH_STANDOFF = 0.05  # m between tool and object surface along the push line
PUSH_STEP = 0.01  # max Cartesian step length while tracking a push

OUTCOME_STATUSES = ("success", "grasp_failed", "ik_failed", "plan_failed")
GRASP_ERROR_CODES = (
    "unknown_object",
    "not_graspable",
    "no_gripper",
    "too_wide",
    "grasp_in_collision",
)

# approach name -> direction of travel during the final approach leg;
# the suffix names the side of the object the gripper comes from
APPROACH_VECTORS = {
    "top": np.array([0.0, 0.0, -1.0]),
    "side_x+": np.array([-1.0, 0.0, 0.0]),
    "side_x-": np.array([1.0, 0.0, 0.0]),
    "side_y+": np.array([0.0, -1.0, 0.0]),
    "side_y-": np.array([0.0, 1.0, 0.0]),
}


class GraspError(RuntimeError):
    """Grasp computation failure with a stable code and, for collisions,
    the witness pair."""

    def __init__(self, code: str, message: str, witness=None):
        if code not in GRASP_ERROR_CODES:
            raise ValueError(f"unknown grasp error code {code!r}")
        super().__init__(message)
        self.code = code
        self.witness = witness


@dataclass(frozen=True, eq=False)
class GraspPose:
    grasp: Pose
    pregrasp: Pose
    approach: np.ndarray  # unit vector, world frame

    def __post_init__(self):
        gap = self.grasp.position - self.pregrasp.position
        along = float(np.dot(gap, self.approach))
        if along <= 0 or not np.allclose(
            gap, along * self.approach, atol=1e-9
        ):
            raise ValueError("pregrasp must sit behind the grasp along approach")


@dataclass(frozen=True, eq=False)
class ActionOutcome:
    index: int
    status: str  # success | grasp_failed | ik_failed | plan_failed
    detail: object = None  # GraspError | IkFailure | PlanFailure | CollisionReport
    trajectories: tuple = ()

    def __post_init__(self):
        if self.status not in OUTCOME_STATUSES:
            raise ValueError(f"unknown outcome status {self.status!r}")

    def describe(self) -> str:
        if self.status == "success":
            return f"action {self.index}: success"
        return f"action {self.index} failed ({self.status}): {self.detail}"


@dataclass(frozen=True, eq=False)
class ExecutionResult:
    status: str  # success | exhausted_repairs
    outcomes: tuple  # every attempted action, in execution order
    workspace: Workspace
    repairs_used: int = 0
    error: Optional[str] = None


@dataclass
class QueryLog:
    """Mutable counters over planner and IK calls, for the metrics
    harness. Push tracking steps count as IK calls, not plan queries."""

    plan_calls: int = 0
    plan_failures: int = 0
    ik_calls: int = 0
    ik_failures: int = 0

    def note_plan(self, failed: bool):
        self.plan_calls += 1
        self.plan_failures += failed

    def note_ik(self, failed: bool):
        self.ik_calls += 1
        self.ik_failures += failed


# --------------------------------------------------------------- grasping

def _grip_frame(approach: np.ndarray, grip_axis: np.ndarray) -> np.ndarray:
    # tool frame: z along approach, y along the finger-closing axis
    z = approach / np.linalg.norm(approach)
    y = grip_axis / np.linalg.norm(grip_axis)
    x = np.cross(y, z)
    return matrix_to_quat(np.column_stack([x, y, z]))


def compute_grasp(
    ws: Workspace,
    object_name: str,
    approach: str = "top",
    clearance: float = PREGRASP_CLEARANCE,
) -> GraspPose:
    """Grasp and pregrasp poses for one object from its world AABB.

    Top grasps grip at the AABB top center, lowered by the finger reach
    (clamped at the object's half height), fingers closing across the
    shorter horizontal extent. Side grasps grip at the face center,
    recessed by the finger reach, fingers closing across the horizontal
    extent perpendicular to the approach. The grasp pose is checked
    against every obstacle except the target using the end-effector
    link's own geometry.
    """
    if approach not in APPROACH_VECTORS:
        raise ValueError(f"unknown approach {approach!r}")
    if clearance <= 0:
        raise ValueError("clearance must be positive")
    gripper = ws.robot.gripper
    if gripper is None:
        raise GraspError("no_gripper", f"robot {ws.robot.name!r} has no gripper")
    try:
        obs = ws.obstacle(object_name)
    except SceneError:
        raise GraspError(
            "unknown_object", f"no obstacle named {object_name!r}"
        ) from None
    if not obs.graspable:
        raise GraspError(
            "not_graspable", f"obstacle {object_name!r} is not graspable"
        )

    aabb = obs.world_aabb()
    size = aabb.size
    center = aabb.center
    a = APPROACH_VECTORS[approach]

    if approach == "top":
        grip_axis = (
            np.array([1.0, 0.0, 0.0])
            if size[0] <= size[1]
            else np.array([0.0, 1.0, 0.0])
        )
        recess = min(gripper.finger_reach, size[2] / 2)
        point = np.array([center[0], center[1], aabb.hi[2] - recess])
    else:
        axis = 0 if "x" in approach else 1
        grip_axis = np.array([0.0, 1.0, 0.0]) if axis == 0 else np.array([1.0, 0.0, 0.0])
        recess = min(gripper.finger_reach, size[axis] / 2)
        face = center - a * size[axis] / 2  # the face the gripper approaches
        point = face + a * recess

    width = float(np.dot(np.abs(grip_axis), size))
    if width > gripper.max_opening:
        raise GraspError(
            "too_wide",
            f"{object_name!r} spans {width:.3f} m across the grip axis; "
            f"gripper opens {gripper.max_opening:.3f} m",
        )

    quat = _grip_frame(a, grip_axis)
    grasp = Pose(point, quat)
    pregrasp = Pose(point - clearance * a, quat)

    # palm check: the ee link's collision shape at the grasp pose, the
    # target itself excluded (the fingers are meant to straddle it)
    robot = ws.robot
    link = robot.links[robot.link_index(robot.ee_link)]
    if link.shape is not None:
        from .collision import shapes_collide

        link_frame = grasp * robot.ee_offset.inverse()
        shape_pose = link_frame * link.offset
        for other in ws.obstacles:
            if other.name == object_name or other.attached is not None:
                continue
            hit, _ = shapes_collide(
                link.shape, shape_pose, other.shape, other.shape_pose()
            )
            if hit:
                raise GraspError(
                    "grasp_in_collision",
                    f"gripper at the {approach} grasp of {object_name!r} "
                    f"intersects {other.name!r}",
                    witness=(robot.ee_link, other.name),
                )
    return GraspPose(grasp=grasp, pregrasp=pregrasp, approach=a)


# -------------------------------------------------------------- grounding

def _stage_seed(seed: int, stage: int) -> int:
    return int(np.random.SeedSequence([seed, stage]).generate_state(1)[0])


def _without(ws: Workspace, name: str) -> Workspace:
    return replace(
        ws, obstacles=tuple(o for o in ws.obstacles if o.name != name)
    )


def _action_spec(ws: Workspace, action: SymbolicAction) -> PlannerSpec:
    base = (
        ws.active_planner
        if isinstance(ws.active_planner, PlannerSpec)
        else PlannerSpec(algorithm="RRTConnect")
    )
    if action.planner is not None and action.planner != base.algorithm:
        return replace(base, algorithm=action.planner)
    return base


def _plan_between(
    ws: Workspace, spec: PlannerSpec, stage_seed: int, q_from, q_to, log=None
):
    query = PlanningQuery(
        ws.controlled_config(q_from), ws.controlled_config(q_to)
    )
    result = plan(ws, replace(spec, seed=stage_seed), query)
    if log is not None:
        log.note_plan(isinstance(result, PlanFailure))
    return result


def _ik(
    ws: Workspace, target: Pose, seed_config, ik: IkParams, stage_seed: int,
    log=None,
):
    result = solve_ik(
        ws.robot,
        ws.robot_base_pose,
        target,
        seed=seed_config,
        params=ik,
        rng_seed=stage_seed,
        active=ws.controlled,
    )
    if log is not None:
        log.note_ik(isinstance(result, IkFailure))
    return result


def _lifted(pose: Pose, dz: float) -> Pose:
    return Pose(pose.position + np.array([0.0, 0.0, dz]), pose.orientation)


def ground_action(
    ws: Workspace,
    action: SymbolicAction,
    ik: IkParams = IkParams(),
    seed: int = 0,
    index: int = 0,
    log: Optional[QueryLog] = None,
) -> tuple:
    """Ground one validated action; returns (ActionOutcome, Workspace).

    On failure the returned workspace is the input workspace unchanged;
    on success it carries the new configuration and attachment state.
    """
    if action.kind == "pick":
        return _ground_pick(ws, action, ik, seed, index, log)
    if action.kind == "place":
        return _ground_place(ws, action, ik, seed, index, log)
    if action.kind == "move":
        return _ground_move(ws, action, ik, seed, index, log)
    if action.kind == "push":
        return _ground_push(ws, action, ik, seed, index, log)
    raise ValueError(f"unknown action kind {action.kind!r}")


def _fail(index: int, status: str, detail, ws0: Workspace):
    return ActionOutcome(index, status, detail), ws0


def _ground_pick(ws, action, ik, seed, index, log=None):
    ws0 = ws
    try:
        g = compute_grasp(ws, action.object, action.approach or "top")
    except GraspError as err:
        return _fail(index, "grasp_failed", err, ws0)
    spec = _action_spec(ws, action)

    q_pre = _ik(ws, g.pregrasp, ws.current_config, ik, _stage_seed(seed, 0), log)
    if isinstance(q_pre, IkFailure):
        return _fail(index, "ik_failed", q_pre, ws0)
    approach = _plan_between(ws, spec, _stage_seed(seed, 1), ws.current_config, q_pre, log)
    if isinstance(approach, PlanFailure):
        return _fail(index, "plan_failed", approach, ws0)
    ws = ws.with_config(q_pre)

    q_grasp = _ik(ws, g.grasp, q_pre, ik, _stage_seed(seed, 2), log)
    if isinstance(q_grasp, IkFailure):
        return _fail(index, "ik_failed", q_grasp, ws0)
    # the fingers straddle the target on the way down: permeable here
    descend = _plan_between(
        _without(ws, action.object), spec, _stage_seed(seed, 3), q_pre, q_grasp, log
    )
    if isinstance(descend, PlanFailure):
        return _fail(index, "plan_failed", descend, ws0)
    ws = ws.with_config(q_grasp)

    ee = fk_ee(ws.robot, ws.robot_base_pose, q_grasp)
    grasp_tf = ee.inverse() * ws.obstacle(action.object).pose
    ws = attach_object(ws, action.object, grasp_tf)

    retreat = _plan_between(ws, spec, _stage_seed(seed, 4), q_grasp, q_pre, log)
    if isinstance(retreat, PlanFailure):
        return _fail(index, "plan_failed", retreat, ws0)
    ws = ws.with_config(q_pre)
    out = ActionOutcome(index, "success", trajectories=(approach, descend, retreat))
    return out, ws


def _ground_place(ws, action, ik, seed, index, log=None):
    ws0 = ws
    held = ws.attached_obstacle()
    if held is None or held.name != action.object:
        raise ValueError(
            f"place of {action.object!r} while it is not the held object"
        )
    grasp_tf = held.attached
    ee_place = action.target_pose * grasp_tf.inverse()
    ee_above = _lifted(ee_place, PREGRASP_CLEARANCE)
    spec = _action_spec(ws, action)

    q_above = _ik(ws, ee_above, ws.current_config, ik, _stage_seed(seed, 0), log)
    if isinstance(q_above, IkFailure):
        return _fail(index, "ik_failed", q_above, ws0)
    transfer = _plan_between(ws, spec, _stage_seed(seed, 1), ws.current_config, q_above, log)
    if isinstance(transfer, PlanFailure):
        return _fail(index, "plan_failed", transfer, ws0)
    ws = ws.with_config(q_above)

    q_place = _ik(ws, ee_place, q_above, ik, _stage_seed(seed, 2), log)
    if isinstance(q_place, IkFailure):
        return _fail(index, "ik_failed", q_place, ws0)
    descend = _plan_between(ws, spec, _stage_seed(seed, 3), q_above, q_place, log)
    if isinstance(descend, PlanFailure):
        return _fail(index, "plan_failed", descend, ws0)
    ws = ws.with_config(q_place)

    # release at the pose actually reached, not the commanded one
    ee = fk_ee(ws.robot, ws.robot_base_pose, q_place)
    ws = detach_object(ws, action.object, ee * grasp_tf)

    # the fingers still straddle the released object on the way up
    retreat = _plan_between(
        _without(ws, action.object), spec, _stage_seed(seed, 4), q_place, q_above, log
    )
    if isinstance(retreat, PlanFailure):
        return _fail(index, "plan_failed", retreat, ws0)
    ws = ws.with_config(q_above)
    out = ActionOutcome(index, "success", trajectories=(transfer, descend, retreat))
    return out, ws


def _ground_move(ws, action, ik, seed, index, log=None):
    ws0 = ws
    ee_now = fk_ee(ws.robot, ws.robot_base_pose, ws.current_config)
    target = Pose(np.array(action.waypoint), ee_now.orientation)
    spec = _action_spec(ws, action)

    q_goal = _ik(ws, target, ws.current_config, ik, _stage_seed(seed, 0), log)
    if isinstance(q_goal, IkFailure):
        return _fail(index, "ik_failed", q_goal, ws0)
    traj = _plan_between(ws, spec, _stage_seed(seed, 1), ws.current_config, q_goal, log)
    if isinstance(traj, PlanFailure):
        return _fail(index, "plan_failed", traj, ws0)
    return ActionOutcome(index, "success", trajectories=(traj,)), ws.with_config(
        ws.full_config(traj.waypoints[-1])
    )


def _ground_push(ws, action, ik, seed, index, log=None):
    ws0 = ws
    obs = ws.obstacle(action.object)
    if obs.attached is not None:
        raise ValueError(f"cannot push {action.object!r} while holding it")
    d = np.asarray(action.direction, dtype=float)
    d = d / np.linalg.norm(d)
    distance = float(action.distance)

    aabb = obs.world_aabb()
    standoff = float(np.dot(np.abs(d), aabb.half_extents)) + PUSH_STANDOFF
    start_pos = aabb.center - d * standoff
    ee_now = fk_ee(ws.robot, ws.robot_base_pose, ws.current_config)
    pre = Pose(start_pos, ee_now.orientation)
    spec = _action_spec(ws, action)

    q_pre = _ik(ws, pre, ws.current_config, ik, _stage_seed(seed, 0), log)
    if isinstance(q_pre, IkFailure):
        return _fail(index, "ik_failed", q_pre, ws0)
    approach = _plan_between(ws, spec, _stage_seed(seed, 1), ws.current_config, q_pre, log)
    if isinstance(approach, PlanFailure):
        return _fail(index, "plan_failed", approach, ws0)
    ws = ws.with_config(q_pre)

    # straight-line tracking; the pushed object moves with the tool in
    # reality, so it is excluded from the checks along the line
    t0 = time.perf_counter()
    open_ws = _without(ws, action.object)
    steps = max(1, math.ceil(distance / PUSH_STEP))
    waypoints = [ws.controlled_config(q_pre)]
    q_prev = q_pre
    for k in range(1, steps + 1):
        pos = start_pos + d * (distance * k / steps)
        q_k = _ik(open_ws, Pose(pos, pre.orientation), q_prev, ik, _stage_seed(seed, 2), log)
        if isinstance(q_k, IkFailure):
            return _fail(index, "ik_failed", q_k, ws0)
        report = check_config(open_ws, q_k)
        if report.in_collision:
            return _fail(index, "plan_failed", report, ws0)
        if not check_edge(open_ws, q_prev, q_k, spec.edge_resolution / 2):
            return _fail(
                index,
                "plan_failed",
                PlanFailure("timeout", PlanStats(0, (k,), 0.0)),
                ws0,
            )
        waypoints.append(ws.controlled_config(q_k))
        q_prev = q_k
    track = Trajectory(
        tuple(waypoints),
        PlanStats(steps, (len(waypoints),), time.perf_counter() - t0),
        ws.controlled,
    )

    moved = replace(
        obs, pose=Pose(obs.pose.position + d * distance, obs.pose.orientation)
    )
    ws = ws.with_obstacle(moved).with_config(q_prev)
    return ActionOutcome(index, "success", trajectories=(approach, track)), ws


# ---------------------------------------------------------- plan execution

def execute_plan(
    ws: Workspace,
    task_plan: Plan,
    client,
    max_repairs: int = 3,
    seed: int = 0,
    ik: IkParams = IkParams(),
    log: Optional[QueryLog] = None,
) -> ExecutionResult:
    """Ground a plan action by action, replanning on failure.

    A failed action rolls the workspace back, its outcome is serialized
    into repair feedback, and the whole remaining task is replanned from
    the current state via the client. Stops after max_repairs replans;
    the outcome list then records every attempted action across plans.
    """
    if max_repairs < 0:
        raise ValueError("max_repairs must be >= 0")
    outcomes = []
    attempts = 0  # grounding attempts across replans, drives seeding
    repairs = 0
    current = task_plan
    while True:
        failed = None
        for i, action in enumerate(current.actions):
            outcome, ws_next = ground_action(
                ws, action, ik=ik, seed=_stage_seed(seed, attempts), index=i, log=log
            )
            attempts += 1
            outcomes.append(outcome)
            if outcome.status != "success":
                failed = outcome
                break
            ws = ws_next
        if failed is None:
            return ExecutionResult("success", tuple(outcomes), ws, repairs)
        if repairs >= max_repairs:
            return ExecutionResult(
                "exhausted_repairs", tuple(outcomes), ws, repairs,
                error=failed.describe(),
            )
        repairs += 1
        bundle = compose_prompt(current.task, state=textualize(ws))
        result = request_plan(
            client, bundle, ws, max_repairs=2, feedback=failed.describe()
        )
        if isinstance(result, PlanError):
            return ExecutionResult(
                "exhausted_repairs", tuple(outcomes), ws, repairs,
                error=f"replanning failed: {result.describe()}",
            )
        current = result


@dataclass(frozen=True, eq=False)
class TaskRun:
    """One full language-to-motion pass over a workspace.

    plan is the accepted symbolic plan, or the PlanError that ended the
    request when no plan was accepted (result is None in that case).
    log counts every planner and IK query issued while grounding.
    """

    task: str
    plan: Union[Plan, PlanError]
    result: Optional[ExecutionResult]
    log: QueryLog


def run_task(
    ws: Workspace,
    task: str,
    client,
    max_repairs: int = 3,
    seed: int = 0,
    ik: IkParams = IkParams(),
) -> TaskRun:
    """Textualize the scene, request a symbolic plan, ground and execute it.

    max_repairs bounds both the prompt-repair budget while requesting the
    plan and the replan budget while executing it; 0 means the first
    response must parse valid and every action must ground on the first
    try, which is what the metrics harness measures.
    """
    log = QueryLog()
    bundle = compose_prompt(task, state=textualize(ws))
    plan = request_plan(client, bundle, ws, max_repairs=max_repairs)
    if isinstance(plan, PlanError):
        return TaskRun(task, plan, None, log)
    result = execute_plan(
        ws, plan, client, max_repairs=max_repairs, seed=seed, ik=ik, log=log
    )
    return TaskRun(task, plan, result, log)


# ------------------------------------------------------------------ export

def trajectory_document(ws: Workspace, traj: Trajectory, dt: float = 0.05) -> dict:
    """JSON-ready trajectory for offline visualization: planner waypoints
    plus timed samples with the end-effector pose at each. Timing stats
    are deliberately left out so identical plans export identically."""
    samples = []
    for t, q in interpolate_trajectory(ws.robot, traj, dt):
        ee = fk_ee(ws.robot, ws.robot_base_pose, ws.full_config(q))
        samples.append(
            {
                "t": float(t),
                "config": [float(v) for v in q],
                "ee": [
                    *(float(v) for v in ee.position),
                    *(float(v) for v in ee.orientation),
                ],
            }
        )
    return {
        "controlled": [int(i) for i in traj.controlled],
        "waypoints": [[float(v) for v in w] for w in traj.waypoints],
        "samples": samples,
    }


def outcome_document(ws: Workspace, outcome: ActionOutcome, dt: float = 0.05) -> dict:
    return {
        "index": outcome.index,
        "status": outcome.status,
        "detail": None if outcome.detail is None else str(outcome.detail),
        "trajectories": [
            trajectory_document(ws, t, dt) for t in outcome.trajectories
        ],
    }


def execution_document(result: ExecutionResult, dt: float = 0.05) -> str:
    doc = {
        "status": result.status,
        "repairs_used": result.repairs_used,
        "error": result.error,
        "outcomes": [
            outcome_document(result.workspace, o, dt) for o in result.outcomes
        ],
    }
    return json.dumps(doc, indent=1)
