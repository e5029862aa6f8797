"""Collision queries: primitive pairs, whole configurations, motion edges.

Workspace geometry is packed once per workspace snapshot into the flat
array layout the kernel backend consumes; the packing is cached per
snapshot (snapshots are immutable).
"""

from __future__ import annotations

import weakref
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from . import _kernels as K
from .geometry import Pose, pose_to_frame12
from .kinematics import chain_arrays
from .scene import ShapePrimitive, Workspace

DEFAULT_EDGE_RESOLUTION = 0.02

_SHAPE_CODE = {"sphere": 0, "capsule": 1, "box": 2}


def _shape_code_params(shape: ShapePrimitive) -> Tuple[int, np.ndarray]:
    """Kernel (kind, dims) for a primitive. Cylinders become their
    enclosing capsule: conservative, never reports free when penetrating."""
    params = np.zeros(3)
    if shape.kind == "sphere":
        params[0] = shape.radius
        return 0, params
    if shape.kind in ("capsule", "cylinder"):
        params[0] = shape.radius
        params[1] = shape.half_length
        return 1, params
    params[:] = shape.half_extents
    return 2, params


def _descriptor(shape: ShapePrimitive, pose: Pose) -> Tuple[int, np.ndarray]:
    kind, params = _shape_code_params(shape)
    desc = np.empty(15)
    desc[:12] = pose_to_frame12(pose)
    desc[12:15] = params
    return kind, desc


@dataclass(frozen=True)
class CollisionReport:
    in_collision: bool
    witness: Optional[Tuple[str, str]] = None
    clearance: Optional[float] = None


class CollisionContext:
    """Flat-array view of one workspace snapshot for the kernels."""

    def __init__(self, ws: Workspace):
        robot = ws.robot
        ca = chain_arrays(robot)
        self.chain = ca
        self.base12 = pose_to_frame12(ws.robot_base_pose)
        nl = len(robot.links)
        self.link_names = [l.name for l in robot.links]
        self.lkind = np.full(nl, -1, dtype=np.int32)
        self.lparams = np.zeros((nl, 3))
        self.loffset = np.zeros((nl, 12))
        for i, link in enumerate(robot.links):
            self.loffset[i] = pose_to_frame12(link.offset)
            if link.shape is not None:
                kind, params = _shape_code_params(link.shape)
                self.lkind[i] = kind
                self.lparams[i] = params
        statics = [o for o in ws.obstacles if o.attached is None]
        self.obstacle_names = [o.name for o in statics]
        self.okind = np.empty(len(statics), dtype=np.int32)
        self.odesc = np.empty((len(statics), 15))
        for j, obs in enumerate(statics):
            kind, desc = _descriptor(obs.shape, obs.shape_pose())
            self.okind[j] = kind
            self.odesc[j] = desc
        attached = ws.attached_obstacle()
        if attached is None:
            self.att_name = None
            self.att_kind = -1
            self.att_params = np.zeros(3)
            self.att_tf = np.zeros(12)
        else:
            self.att_name = attached.name
            self.att_kind, self.att_params = _shape_code_params(attached.shape)
            self.att_tf = pose_to_frame12(
                attached.attached * attached.shape_offset
            )
        self.blo = np.array(ws.bounds.lo)
        self.bhi = np.array(ws.bounds.hi)
        pairs = [
            (i, j)
            for i in range(nl)
            for j in range(i + 2, nl)
            if self.lkind[i] >= 0 and self.lkind[j] >= 0
        ]
        self.spairs = (
            np.array(pairs, dtype=np.int32)
            if pairs
            else np.zeros((0, 2), dtype=np.int32)
        )

    def kernel_args(self, q: np.ndarray) -> tuple:
        ca = self.chain
        return (
            ca.jkind, ca.jaxis, ca.jorigin, ca.qmap, self.base12, q,
            self.lkind, self.lparams, self.loffset,
            ca.ee_idx, ca.ee_offset,
            self.okind, self.odesc,
            self.att_kind, self.att_params, self.att_tf,
            self.blo, self.bhi, self.spairs,
        )

    def edge_args(self, q_from, q_to, resolution) -> tuple:
        ca = self.chain
        return (
            ca.jkind, ca.jaxis, ca.jorigin, ca.qmap, self.base12,
            self.lkind, self.lparams, self.loffset,
            ca.ee_idx, ca.ee_offset,
            self.okind, self.odesc,
            self.att_kind, self.att_params, self.att_tf,
            self.blo, self.bhi, self.spairs,
            q_from, q_to, resolution,
        )

    def witness_names(self, code: int, ia: int, ib: int) -> Tuple[str, str]:
        a = self.att_name if ia == -2 else self.link_names[ia]
        if code == 1:
            return a, self.obstacle_names[ib]
        if code == 2:
            return a, "bounds"
        return self.link_names[ia], self.link_names[ib]


_context_cache: "weakref.WeakKeyDictionary[Workspace, CollisionContext]" = (
    weakref.WeakKeyDictionary()
)


def collision_context(ws: Workspace) -> CollisionContext:
    ctx = _context_cache.get(ws)
    if ctx is None:
        ctx = CollisionContext(ws)
        _context_cache[ws] = ctx
    return ctx


def shapes_collide(
    a: ShapePrimitive, pose_a: Pose, b: ShapePrimitive, pose_b: Pose
) -> Tuple[bool, float]:
    """Signed distance between two posed shapes; contact at distance <= 0
    (tangency counts as collision)."""
    ka, da = _descriptor(a, pose_a)
    kb, db = _descriptor(b, pose_b)
    d = float(K.pair_distance(ka, da, kb, db))
    return d <= 0.0, d


def check_config(ws: Workspace, q) -> CollisionReport:
    """Audit one full configuration: every shaped link and the attached
    object against the static obstacles and the workspace bounds, plus
    non-adjacent link self pairs."""
    # copy: kernels need writable buffers; frozen workspace configs arrive here
    q = np.array(q, dtype=float)
    if q.shape != (ws.robot.dof,):
        raise ValueError(
            f"expected {ws.robot.dof} joint values, got {q.shape}"
        )
    ctx = collision_context(ws)
    code, ia, ib, clearance = K.config_check(*ctx.kernel_args(q))
    if code == 0:
        return CollisionReport(False, None, float(clearance))
    return CollisionReport(True, ctx.witness_names(code, ia, ib), None)


def check_edge(
    ws: Workspace, q_from, q_to, resolution: float = DEFAULT_EDGE_RESOLUTION
) -> bool:
    """True iff every interpolated configuration at joint-space spacing
    <= resolution (endpoints included) is collision-free."""
    if resolution <= 0:
        raise ValueError("resolution must be positive")
    q_from = np.array(q_from, dtype=float)
    q_to = np.array(q_to, dtype=float)
    ctx = collision_context(ws)
    ok, _, _, _ = K.edge_check(*ctx.edge_args(q_from, q_to, resolution))
    return bool(ok)
