import numpy as np
import pytest

from manipkit.geometry import Aabb, Pose
from manipkit.scene import (
    Gripper,
    Joint,
    Link,
    Obstacle,
    RobotModel,
    ShapePrimitive,
    Workspace,
)


def make_two_link(limit: float = np.pi, with_shapes: bool = False) -> RobotModel:
    """Planar 2R arm, unit link lengths, ee at the tip of link2."""
    shape = ShapePrimitive.capsule(0.08, 0.35) if with_shapes else None
    # capsule axis is local z; links point along x, so rotate shapes later
    # via offsets if a test needs them (kinematics tests do not)
    return RobotModel(
        name="two_link",
        links=(
            Link("link0"),
            Link("link1", shape, Pose((0.5, 0, 0))),
            Link("link2", shape, Pose((0.5, 0, 0))),
        ),
        joints=(
            Joint(
                "j1", "revolute", "link0", "link1",
                Pose.identity(), (0, 0, 1), (-limit, limit), 1.0,
            ),
            Joint(
                "j2", "revolute", "link1", "link2",
                Pose((1, 0, 0)), (0, 0, 1), (-limit, limit), 1.0,
            ),
        ),
        ee_link="link2",
        ee_offset=Pose((1, 0, 0)),
    )


def make_seven_dof() -> RobotModel:
    """7R chain with alternating z/y axes and a fixed flange, the IK and
    Jacobian workhorse."""
    zlim, ylim = 2.9, 2.0
    joints = []
    offsets = {1: 0.333, 3: 0.316, 5: 0.28, 7: 0.14}
    for i in range(1, 8):
        axis = (0, 0, 1) if i % 2 == 1 else (0, 1, 0)
        lim = zlim if i % 2 == 1 else ylim
        origin = Pose((0, 0, offsets.get(i, 0.0)))
        joints.append(
            Joint(
                f"j{i}", "revolute", f"l{i-1}", f"l{i}",
                origin, axis, (-lim, lim), 2.0,
            )
        )
    joints.append(
        Joint("flange", "fixed", "l7", "hand", Pose((0, 0, 0.10)))
    )
    links = tuple(Link(f"l{i}") for i in range(8)) + (Link("hand"),)
    return RobotModel(
        name="arm7",
        links=links,
        joints=tuple(joints),
        ee_link="hand",
        gripper=Gripper(max_opening=0.08, finger_reach=0.05),
    )


def make_pointbot(radius: float = 0.05) -> RobotModel:
    """Point robot analog: two prismatic joints carrying a small sphere,
    planning in the xy plane."""
    return RobotModel(
        name="pointbot",
        links=(
            Link("base"),
            Link("xslide"),
            Link("dot", ShapePrimitive.sphere(radius)),
        ),
        joints=(
            Joint(
                "px", "prismatic", "base", "xslide",
                Pose.identity(), (1, 0, 0), (-1.0, 1.0), 1.0,
            ),
            Joint(
                "py", "prismatic", "xslide", "dot",
                Pose.identity(), (0, 1, 0), (-1.0, 1.0), 1.0,
            ),
        ),
        ee_link="dot",
        gripper=Gripper(max_opening=0.08, finger_reach=0.05),
    )


def make_shaped_two_link() -> RobotModel:
    """Two-link arm with collision geometry: a base box plus a capsule
    per link, shrunk so the straight configuration is self-collision
    free while a full fold (q2 = pi) is not."""
    capsule = ShapePrimitive.capsule(0.08, 0.4)
    # capsule axis is local z; rotate it onto the link's x direction
    along_x = Pose((0.5, 0, 0), (0, np.sin(np.pi / 4), 0, np.cos(np.pi / 4)))
    return RobotModel(
        name="two_link_shaped",
        links=(
            Link("link0", ShapePrimitive.box(0.05, 0.05, 0.05)),
            Link("link1", capsule, along_x),
            Link("link2", capsule, along_x),
        ),
        joints=(
            Joint(
                "j1", "revolute", "link0", "link1",
                Pose.identity(), (0, 0, 1), (-np.pi, np.pi), 1.0,
            ),
            Joint(
                "j2", "revolute", "link1", "link2",
                Pose((1, 0, 0)), (0, 0, 1), (-np.pi, np.pi), 1.0,
            ),
        ),
        ee_link="link2",
        ee_offset=Pose((1, 0, 0)),
        gripper=Gripper(max_opening=0.08, finger_reach=0.05),
    )


@pytest.fixture
def two_link() -> RobotModel:
    return make_two_link()


@pytest.fixture
def seven_dof() -> RobotModel:
    return make_seven_dof()


def make_workspace(robot=None, obstacles=(), bounds=None, config=None, **kw):
    robot = robot or make_two_link()
    bounds = bounds or Aabb.from_bounds((-5, -5, -5), (5, 5, 5))
    config = np.zeros(robot.dof) if config is None else config
    return Workspace(
        robot=robot,
        robot_base_pose=kw.pop("base", Pose.identity()),
        obstacles=tuple(obstacles),
        bounds=bounds,
        current_config=config,
        **kw,
    )


def make_box_obstacle(name, center, half_extents, graspable=False):
    return Obstacle(
        name=name,
        shape=ShapePrimitive.box(*half_extents),
        pose=Pose(center),
        graspable=graspable,
    )


def make_wall_scene(wall_x=0.0, gap_center=0.5, gap_half=0.15):
    """Pointbot workspace split by a thin wall at x=wall_x, with a gap
    of half-height gap_half around y=gap_center. The wall spans y in
    [-1.2, 1.2] so it always covers the reachable strip."""
    lo = make_box_obstacle(
        "wall_lo", (wall_x, (gap_center - gap_half - 1.2) / 2, 0),
        (0.02, (gap_center - gap_half + 1.2) / 2, 0.2),
    )
    hi = make_box_obstacle(
        "wall_hi", (wall_x, (gap_center + gap_half + 1.2) / 2, 0),
        (0.02, (1.2 - gap_center - gap_half) / 2, 0.2),
    )
    return make_workspace(robot=make_pointbot(), obstacles=[lo, hi])


def pointbot_free_grid(ws, n=200):
    """Analytic free-space grid for axis-aligned pointbot scenes: the
    sphere is free iff its distance to every box exceeds zero. Written
    from the scene parameters directly, independent of the collision
    module."""
    limits = ws.robot.joint_limits
    radius = ws.robot.links[-1].shape.radius
    xs = np.linspace(limits[0, 0], limits[0, 1], n)
    ys = np.linspace(limits[1, 0], limits[1, 1], n)
    gx, gy = np.meshgrid(xs, ys, indexing="ij")
    free = np.ones((n, n), dtype=bool)
    for obs in ws.obstacles:
        c = obs.pose.position
        h = obs.shape.half_extents
        dx = np.maximum(np.abs(gx - c[0]) - h[0], 0.0)
        dy = np.maximum(np.abs(gy - c[1]) - h[1], 0.0)
        dz = max(abs(0.0 - c[2]) - h[2], 0.0)
        free &= np.sqrt(dx * dx + dy * dy + dz * dz) - radius > 0.0
    return free


def grid_cell(ws, q, n=200):
    limits = ws.robot.joint_limits
    idx = np.round(
        (np.asarray(q) - limits[:, 0])
        / (limits[:, 1] - limits[:, 0])
        * (n - 1)
    ).astype(int)
    return tuple(np.clip(idx, 0, n - 1))


def grid_bfs_reachable(free, start_cell, goal_cell):
    """4-connected breadth-first search on the free grid."""
    from collections import deque

    n, m = free.shape
    if not free[start_cell] or not free[goal_cell]:
        return False
    seen = np.zeros_like(free)
    seen[start_cell] = True
    queue = deque([start_cell])
    while queue:
        i, j = queue.popleft()
        if (i, j) == goal_cell:
            return True
        for di, dj in ((1, 0), (-1, 0), (0, 1), (0, -1)):
            a, b = i + di, j + dj
            if 0 <= a < n and 0 <= b < m and free[a, b] and not seen[a, b]:
                seen[a, b] = True
                queue.append((a, b))
    return False
