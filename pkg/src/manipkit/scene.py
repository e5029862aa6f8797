"""Workspace model: shapes, robots, obstacles, and attach/detach state.

Workspace values are treated as immutable snapshots; every mutation helper
returns a new Workspace so planning sessions can version state safely.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .geometry import Aabb, Pose

SHAPE_KINDS = ("box", "cylinder", "sphere", "capsule")
JOINT_KINDS = ("revolute", "prismatic", "fixed")


class SceneError(ValueError):
    """Invalid scene construction or mutation."""


@dataclass(frozen=True)
class ShapePrimitive:
    """Collision primitive. Dimension layout per kind:
    box: (hx, hy, hz) half-extents; sphere: (radius,);
    cylinder/capsule: (radius, half_length), axis along local z.
    """

    kind: str
    dimensions: tuple

    def __post_init__(self):
        if self.kind not in SHAPE_KINDS:
            raise SceneError(f"unknown shape kind {self.kind!r}")
        expected = {"box": 3, "sphere": 1, "cylinder": 2, "capsule": 2}[self.kind]
        dims = tuple(float(d) for d in self.dimensions)
        if len(dims) != expected:
            raise SceneError(
                f"{self.kind} needs {expected} dimensions, got {len(dims)}"
            )
        if any(d <= 0 for d in dims):
            raise SceneError(f"nonpositive dimension in {self.kind}: {dims}")
        object.__setattr__(self, "dimensions", dims)

    @classmethod
    def box(cls, hx: float, hy: float, hz: float) -> "ShapePrimitive":
        return cls("box", (hx, hy, hz))

    @classmethod
    def sphere(cls, radius: float) -> "ShapePrimitive":
        return cls("sphere", (radius,))

    @classmethod
    def cylinder(cls, radius: float, half_length: float) -> "ShapePrimitive":
        return cls("cylinder", (radius, half_length))

    @classmethod
    def capsule(cls, radius: float, half_length: float) -> "ShapePrimitive":
        return cls("capsule", (radius, half_length))

    @property
    def radius(self) -> float:
        if self.kind == "box":
            raise SceneError("box has no radius")
        return self.dimensions[0]

    @property
    def half_length(self) -> float:
        if self.kind not in ("cylinder", "capsule"):
            raise SceneError(f"{self.kind} has no half_length")
        return self.dimensions[1]

    @property
    def half_extents(self) -> np.ndarray:
        if self.kind != "box":
            raise SceneError(f"{self.kind} has no half_extents")
        return np.array(self.dimensions)


def shape_world_aabb(shape: ShapePrimitive, pose: Pose) -> Aabb:
    """Tight axis-aligned bounding box of a posed shape."""
    r = pose.rotation_matrix()
    if shape.kind == "sphere":
        half = np.full(3, shape.radius)
    elif shape.kind == "box":
        half = np.abs(r) @ shape.half_extents
    else:
        # cylinder/capsule axis is local z; u holds its world direction
        u = r[:, 2]
        radius, hl = shape.dimensions
        if shape.kind == "capsule":
            half = hl * np.abs(u) + radius
        else:
            half = hl * np.abs(u) + radius * np.sqrt(
                np.maximum(0.0, 1.0 - u * u)
            )
    return Aabb(pose.position, half)


@dataclass(frozen=True, eq=False)
class Joint:
    name: str
    kind: str
    parent_link: str
    child_link: str
    origin: Pose
    axis: Optional[np.ndarray] = None
    limits: tuple = (0.0, 0.0)
    max_velocity: float = 1.0
    default: float = 0.0

    def __post_init__(self):
        if self.kind not in JOINT_KINDS:
            raise SceneError(f"joint {self.name!r}: unknown kind {self.kind!r}")
        if self.kind == "fixed":
            object.__setattr__(self, "axis", None)
            return
        if self.axis is None:
            raise SceneError(f"joint {self.name!r}: missing axis")
        axis = np.asarray(self.axis, dtype=float).reshape(3)
        norm = float(np.linalg.norm(axis))
        if norm < 1e-9:
            raise SceneError(f"joint {self.name!r}: zero axis")
        axis = axis / norm
        axis.flags.writeable = False
        object.__setattr__(self, "axis", axis)
        lo, hi = (float(v) for v in self.limits)
        if lo > hi:
            raise SceneError(f"joint {self.name!r}: limits lower > upper")
        object.__setattr__(self, "limits", (lo, hi))
        if self.max_velocity <= 0:
            raise SceneError(f"joint {self.name!r}: nonpositive max_velocity")
        object.__setattr__(
            self, "default", float(np.clip(self.default, lo, hi))
        )


@dataclass(frozen=True)
class Link:
    name: str
    shape: Optional[ShapePrimitive] = None
    offset: Pose = field(default_factory=Pose.identity)


@dataclass(frozen=True)
class Gripper:
    max_opening: float
    finger_reach: float

    def __post_init__(self):
        if self.max_opening <= 0 or self.finger_reach <= 0:
            raise SceneError("gripper dimensions must be positive")


@dataclass(frozen=True, eq=False)
class RobotModel:
    """Single serial chain. links and joints are stored base-to-tip;
    construction reorders and validates the chain."""

    name: str
    links: tuple
    joints: tuple
    ee_link: str
    gripper: Optional[Gripper] = None
    ee_offset: Pose = field(default_factory=Pose.identity)

    def __post_init__(self):
        links = tuple(self.links)
        names = [l.name for l in links]
        if len(set(names)) != len(names):
            dup = next(n for n in names if names.count(n) > 1)
            raise SceneError(f"duplicate link name {dup!r}")
        link_set = set(names)
        children = [j.child_link for j in self.joints]
        if len(set(children)) != len(children):
            dup = next(c for c in children if children.count(c) > 1)
            raise SceneError(f"duplicate child link {dup!r}")
        for j in self.joints:
            for ln in (j.parent_link, j.child_link):
                if ln not in link_set:
                    raise SceneError(f"joint {j.name!r}: unknown link {ln!r}")
        roots = link_set - set(children)
        if len(roots) != 1:
            raise SceneError(
                f"cyclic or disconnected chain (roots: {sorted(roots)})"
            )
        # walk parent -> child to put joints and links in chain order
        by_parent = {}
        for j in self.joints:
            if j.parent_link in by_parent:
                raise SceneError(
                    f"link {j.parent_link!r} has multiple child joints; "
                    "only serial chains are supported"
                )
            by_parent[j.parent_link] = j
        order = [roots.pop()]
        chain = []
        while order[-1] in by_parent:
            j = by_parent[order[-1]]
            chain.append(j)
            order.append(j.child_link)
        if len(chain) != len(self.joints):
            raise SceneError("cyclic or disconnected chain")
        if self.ee_link not in link_set:
            raise SceneError(f"ee_link {self.ee_link!r} is not a link")
        link_by_name = {l.name: l for l in links}
        object.__setattr__(
            self, "links", tuple(link_by_name[n] for n in order)
        )
        object.__setattr__(self, "joints", tuple(chain))

    @property
    def base_link(self) -> str:
        return self.links[0].name

    @property
    def movable_joints(self) -> tuple:
        return tuple(j for j in self.joints if j.kind != "fixed")

    @property
    def dof(self) -> int:
        return len(self.movable_joints)

    @property
    def joint_limits(self) -> np.ndarray:
        """(DOF, 2) array of [lower, upper] for the movable joints."""
        return np.array([j.limits for j in self.movable_joints])

    def default_config(self) -> np.ndarray:
        return np.array([j.default for j in self.movable_joints])

    def link_index(self, name: str) -> int:
        for i, l in enumerate(self.links):
            if l.name == name:
                return i
        raise SceneError(f"unknown link {name!r}")


@dataclass(frozen=True)
class Obstacle:
    """World object. When attached, world pose is derived from the end
    effector: FK(ee_link) * attached; `pose` then holds the last static
    pose (restored semantics live in detach)."""

    name: str
    shape: ShapePrimitive
    pose: Pose
    graspable: bool = False
    attached: Optional[Pose] = None
    shape_offset: Pose = field(default_factory=Pose.identity)
    model_ref: Optional[str] = None
    model_name: Optional[str] = None

    def __post_init__(self):
        if not self.name:
            raise SceneError("obstacle name must be nonempty")
        if self.attached is not None and not self.graspable:
            raise SceneError(
                f"obstacle {self.name!r}: attached implies graspable"
            )

    def shape_pose(self) -> Pose:
        """World pose of the collision shape when not attached."""
        return self.pose * self.shape_offset

    def world_aabb(self) -> Aabb:
        return shape_world_aabb(self.shape, self.shape_pose())


@dataclass(frozen=True, eq=False)
class Workspace:
    robot: RobotModel
    robot_base_pose: Pose
    obstacles: tuple
    bounds: Aabb
    current_config: np.ndarray
    active_planner: object = None  # PlannerSpec; typed loosely to avoid an import cycle
    controlled: tuple = ()  # indices into movable joints; empty = all
    query_init: Optional[np.ndarray] = None
    query_goal: Optional[np.ndarray] = None
    name: str = "workspace"

    def __post_init__(self):
        obstacles = tuple(self.obstacles)
        names = [o.name for o in obstacles]
        if len(set(names)) != len(names):
            dup = next(n for n in names if names.count(n) > 1)
            raise SceneError(f"duplicate obstacle name {dup!r}")
        object.__setattr__(self, "obstacles", obstacles)
        q = np.asarray(self.current_config, dtype=float).reshape(-1).copy()
        if q.shape[0] != self.robot.dof:
            raise SceneError(
                f"config has {q.shape[0]} values for a "
                f"{self.robot.dof}-DOF robot"
            )
        limits = self.robot.joint_limits
        if q.size and (
            np.any(q < limits[:, 0] - 1e-12) or np.any(q > limits[:, 1] + 1e-12)
        ):
            bad = int(
                np.argmax((q < limits[:, 0] - 1e-12) | (q > limits[:, 1] + 1e-12))
            )
            name = self.robot.movable_joints[bad].name
            raise SceneError(f"config violates limits of joint {name!r}")
        q.flags.writeable = False
        object.__setattr__(self, "current_config", q)
        controlled = tuple(int(i) for i in self.controlled)
        if not controlled:
            controlled = tuple(range(self.robot.dof))
        if len(set(controlled)) != len(controlled) or any(
            i < 0 or i >= self.robot.dof for i in controlled
        ):
            raise SceneError("controlled joint indices invalid")
        object.__setattr__(self, "controlled", controlled)

    def obstacle(self, name: str) -> Obstacle:
        for o in self.obstacles:
            if o.name == name:
                return o
        raise SceneError(f"unknown obstacle {name!r}")

    def has_obstacle(self, name: str) -> bool:
        return any(o.name == name for o in self.obstacles)

    def attached_obstacle(self) -> Optional[Obstacle]:
        for o in self.obstacles:
            if o.attached is not None:
                return o
        return None

    def with_obstacle(self, obstacle: Obstacle) -> "Workspace":
        """Replace the same-named obstacle, preserving list order."""
        out = tuple(
            obstacle if o.name == obstacle.name else o for o in self.obstacles
        )
        if not any(o.name == obstacle.name for o in self.obstacles):
            raise SceneError(f"unknown obstacle {obstacle.name!r}")
        return replace(self, obstacles=out)

    def with_config(self, q) -> "Workspace":
        return replace(self, current_config=np.asarray(q, dtype=float))

    def with_planner(self, spec) -> "Workspace":
        return replace(self, active_planner=spec)

    def with_query(self, init, goal) -> "Workspace":
        init = np.asarray(init, dtype=float)
        goal = np.asarray(goal, dtype=float)
        n = len(self.controlled)
        if init.shape != (n,) or goal.shape != (n,):
            raise SceneError(
                f"query arity mismatch: expected {n} controlled joint values"
            )
        return replace(self, query_init=init, query_goal=goal)

    def full_config(self, controlled_values) -> np.ndarray:
        """Expand controlled-joint values into a full DOF config, frozen
        joints held at current_config."""
        controlled_values = np.asarray(controlled_values, dtype=float)
        q = np.array(self.current_config)
        q[list(self.controlled)] = controlled_values
        return q

    def controlled_config(self, q=None) -> np.ndarray:
        q = self.current_config if q is None else np.asarray(q, dtype=float)
        return q[list(self.controlled)]


def attach_object(ws: Workspace, name: str, grasp_tf: Pose) -> Workspace:
    """Mark an obstacle as held; its world pose thereafter follows the end
    effector through grasp_tf."""
    obs = ws.obstacle(name)
    if not obs.graspable:
        raise SceneError(f"obstacle {name!r} is not graspable")
    if obs.attached is not None:
        raise SceneError(f"obstacle {name!r} already attached")
    if ws.attached_obstacle() is not None:
        raise SceneError(
            f"gripper already holds {ws.attached_obstacle().name!r}"
        )
    if ws.robot.gripper is None:
        raise SceneError("robot has no gripper")
    return ws.with_obstacle(replace(obs, attached=grasp_tf))


def detach_object(ws: Workspace, name: str, rest_pose: Pose) -> Workspace:
    obs = ws.obstacle(name)
    if obs.attached is None:
        raise SceneError(f"obstacle {name!r} is not attached")
    return ws.with_obstacle(replace(obs, attached=None, pose=rest_pose))


def validate_workspace(ws: Workspace) -> None:
    """Re-check every type invariant; raises SceneError on violation.
    Construction already enforces these, so this exists for tests that
    want an explicit audit after mutations."""
    Workspace(
        robot=ws.robot,
        robot_base_pose=ws.robot_base_pose,
        obstacles=ws.obstacles,
        bounds=ws.bounds,
        current_config=ws.current_config,
        active_planner=ws.active_planner,
        controlled=ws.controlled,
        query_init=ws.query_init,
        query_goal=ws.query_goal,
        name=ws.name,
    )
    attached = [o for o in ws.obstacles if o.attached is not None]
    if len(attached) > 1:
        raise SceneError("multiple attached obstacles")
    if attached and ws.robot.gripper is None:
        raise SceneError("attached obstacle without gripper")
