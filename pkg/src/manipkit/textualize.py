"""Render a workspace as structured text for language-model prompts.

The rendering is deterministic: fixed decimal precision, obstacles in
workspace order, relations sorted. Example:

    workspace: pick_place (all lengths in meters, angles in radians)

    robot: arm7 | dof=7 | base=(0.000, 0.000, 0.000)
    joints:
      j1 | revolute | value=0.000 | limits=[-2.900, 2.900]
      ...
    links: l0 -> l1 -> ... -> hand

    obstacles:
      marker | graspable=true | position=(0.500, 0.000, 0.065) | bbox=(0.020, 0.020, 0.120)

    relations:
      near(eraser, marker)

Obstacle lines carry an orientation=(qx, qy, qz, qw) segment only when
the quaternion differs from identity at the printed precision, and a
held=true segment while attached to the gripper.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import Aabb, Pose
from .kinematics import fk_ee
from .scene import Obstacle, ShapePrimitive, Workspace, shape_world_aabb

# relation thresholds
ON_CONTACT_TOL = 0.005  # max |a.bottom - b.top| for on(a, b)
ON_OVERLAP_FRAC = 0.25  # min xy-overlap as a fraction of a's footprint
NEAR_DIST = 0.15  # max centroid distance for near(a, b)


@dataclass(frozen=True)
class StateText:
    robot_block: str
    obstacles_block: str
    relations_block: str
    rendered: str


def bounding_box(shape: ShapePrimitive, pose: Pose) -> Aabb:
    """Tight world-frame AABB of a posed primitive (center + extents via
    .size)."""
    return shape_world_aabb(shape, pose)


def _fmt(v: float, p: int) -> str:
    r = round(float(v), p)
    if r == 0.0:
        r = 0.0  # avoid "-0.000"
    return f"{r:.{p}f}"


def _vec(vals, p: int) -> str:
    return "(" + ", ".join(_fmt(v, p) for v in vals) + ")"


def obstacle_world_pose(ws: Workspace, obstacle: Obstacle) -> Pose:
    """Current world pose: static obstacles use their stored pose, a held
    obstacle follows the end effector through its grasp transform."""
    if obstacle.attached is None:
        return obstacle.pose
    ee = fk_ee(ws.robot, ws.robot_base_pose, ws.current_config)
    return ee * obstacle.attached


def _world_aabb(ws: Workspace, obstacle: Obstacle) -> Aabb:
    pose = obstacle_world_pose(ws, obstacle) * obstacle.shape_offset
    return shape_world_aabb(obstacle.shape, pose)


def _xy_overlap(a: Aabb, b: Aabb) -> float:
    w = min(a.hi[0], b.hi[0]) - max(a.lo[0], b.lo[0])
    h = min(a.hi[1], b.hi[1]) - max(a.lo[1], b.lo[1])
    return max(w, 0.0) * max(h, 0.0)


def _is_on(a: Aabb, b: Aabb) -> bool:
    if abs(a.lo[2] - b.hi[2]) > ON_CONTACT_TOL:
        return False
    footprint = a.size[0] * a.size[1]
    return _xy_overlap(a, b) >= ON_OVERLAP_FRAC * footprint


def spatial_relations(ws: Workspace) -> tuple:
    """Derived predicates between obstacles, sorted lexicographically:
    on(a, b), inside(a, b), and near(a, b) for pairs that are neither."""
    boxes = [(o.name, _world_aabb(ws, o)) for o in ws.obstacles]
    facts = []
    paired = set()  # unordered pairs already related by on/inside
    for name_a, box_a in boxes:
        for name_b, box_b in boxes:
            if name_a == name_b:
                continue
            hit = False
            if _is_on(box_a, box_b):
                facts.append(f"on({name_a}, {name_b})")
                hit = True
            if box_b.contains(box_a):
                facts.append(f"inside({name_a}, {name_b})")
                hit = True
            if hit:
                paired.add(frozenset((name_a, name_b)))
    for i, (name_a, box_a) in enumerate(boxes):
        for name_b, box_b in boxes[i + 1 :]:
            if frozenset((name_a, name_b)) in paired:
                continue
            if np.linalg.norm(box_a.center - box_b.center) < NEAR_DIST:
                first, second = sorted((name_a, name_b))
                facts.append(f"near({first}, {second})")
    return tuple(sorted(facts))


def _pose_segments(pose: Pose, p: int) -> str:
    out = f"position={_vec(pose.position, p)}"
    q = [_fmt(v, p) for v in pose.orientation]
    identity = [_fmt(v, p) for v in (0, 0, 0, 1)]
    if q != identity:
        out += " | orientation=(" + ", ".join(q) + ")"
    return out


def _robot_block(ws: Workspace, p: int) -> str:
    robot = ws.robot
    lines = [
        f"robot: {robot.name} | dof={robot.dof} | "
        f"base={_vec(ws.robot_base_pose.position, p)}",
        "joints:",
    ]
    for joint, value in zip(robot.movable_joints, ws.current_config):
        lo, hi = joint.limits
        lines.append(
            f"  {joint.name} | {joint.kind} | value={_fmt(value, p)} | "
            f"limits=[{_fmt(lo, p)}, {_fmt(hi, p)}]"
        )
    lines.append("links: " + " -> ".join(l.name for l in robot.links))
    return "\n".join(lines)


def _obstacles_block(ws: Workspace, p: int) -> str:
    lines = ["obstacles:"]
    if not ws.obstacles:
        lines.append("  none")
    for o in ws.obstacles:
        pose = obstacle_world_pose(ws, o)
        box = _world_aabb(ws, o)
        seg = f"  {o.name} | graspable={'true' if o.graspable else 'false'}"
        if o.attached is not None:
            seg += " | held=true"
        seg += f" | {_pose_segments(pose, p)} | bbox={_vec(box.size, p)}"
        lines.append(seg)
    return "\n".join(lines)


def _relations_block(ws: Workspace) -> str:
    facts = spatial_relations(ws)
    lines = ["relations:"]
    if not facts:
        lines.append("  none")
    lines.extend(f"  {f}" for f in facts)
    return "\n".join(lines)


def textualize(ws: Workspace, precision: int = 3) -> StateText:
    """Deterministic text rendering of the workspace: robot block,
    obstacles block, derived spatial relations."""
    if precision < 1:
        raise ValueError("precision must be at least 1")
    header = f"workspace: {ws.name} (all lengths in meters, angles in radians)"
    robot = _robot_block(ws, precision)
    obstacles = _obstacles_block(ws, precision)
    relations = _relations_block(ws)
    rendered = "\n\n".join((header, robot, obstacles, relations)) + "\n"
    return StateText(robot, obstacles, relations, rendered)
