"""Forward kinematics, geometric Jacobian, and damped Newton-Raphson IK.

The chain math runs on the kernel backend (compiled or numpy reference);
this module packs RobotModel chains into the flat array layout the
kernels consume and caches the packing per robot instance.
"""

from __future__ import annotations

import weakref
from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np

from . import _kernels as K
from .geometry import (
    Pose,
    frame12_to_pose,
    matrix_to_rotvec,
    pose_to_frame12,
)
from .scene import RobotModel

_JOINT_CODE = {"revolute": 0, "prismatic": 1, "fixed": 2}


@dataclass(frozen=True, eq=False)
class ChainArrays:
    jkind: np.ndarray
    jaxis: np.ndarray
    jorigin: np.ndarray
    qmap: np.ndarray
    ee_idx: int
    ee_offset: np.ndarray
    dof: int


_chain_cache: "weakref.WeakKeyDictionary[RobotModel, ChainArrays]" = (
    weakref.WeakKeyDictionary()
)


def chain_arrays(robot: RobotModel) -> ChainArrays:
    ca = _chain_cache.get(robot)
    if ca is not None:
        return ca
    nj = len(robot.joints)
    jkind = np.empty(nj, dtype=np.int32)
    jaxis = np.zeros((nj, 3))
    jorigin = np.empty((nj, 12))
    qmap = np.full(nj, -1, dtype=np.int32)
    qi = 0
    for i, joint in enumerate(robot.joints):
        jkind[i] = _JOINT_CODE[joint.kind]
        if joint.axis is not None:
            jaxis[i] = joint.axis
        jorigin[i] = pose_to_frame12(joint.origin)
        if joint.kind != "fixed":
            qmap[i] = qi
            qi += 1
    ca = ChainArrays(
        jkind=jkind,
        jaxis=jaxis,
        jorigin=jorigin,
        qmap=qmap,
        ee_idx=robot.link_index(robot.ee_link),
        ee_offset=pose_to_frame12(robot.ee_offset),
        dof=qi,
    )
    _chain_cache[robot] = ca
    return ca


@dataclass(frozen=True)
class IkParams:
    pos_tol: float = 1e-4
    rot_tol: float = 1e-3
    max_iters: int = 200
    damping: float = 0.05
    max_restarts: int = 10
    step_clamp: float = 0.2

    def __post_init__(self):
        for name in self.__dataclass_fields__:
            if getattr(self, name) <= 0:
                raise ValueError(f"IkParams.{name} must be strictly positive")


@dataclass(frozen=True)
class IkFailure:
    reason: str  # unreachable | joint_limits | singular | max_iters
    pos_residual: float
    rot_residual: float

    def __str__(self):
        return (
            f"IK failed ({self.reason}): residual "
            f"{self.pos_residual:.2e} m, {self.rot_residual:.2e} rad"
        )


def _check_arity(robot: RobotModel, q) -> np.ndarray:
    # copy: the kernels need writable buffers, and callers may hand in the
    # workspace's frozen config
    q = np.array(q, dtype=float)
    if q.shape != (robot.dof,):
        raise ValueError(f"expected {robot.dof} joint values, got {q.shape}")
    return q


def _ee_frame(ca: ChainArrays, base12: np.ndarray, q: np.ndarray) -> np.ndarray:
    frames = K.fk_frames(ca.jkind, ca.jaxis, ca.jorigin, ca.qmap, base12, q)
    return K.frame_compose(frames[ca.ee_idx], ca.ee_offset)


def forward_kinematics(robot: RobotModel, base: Pose, q) -> list:
    """Pose of every link (chain order) plus the end-effector frame,
    appended last."""
    q = _check_arity(robot, q)
    ca = chain_arrays(robot)
    frames = K.fk_frames(
        ca.jkind, ca.jaxis, ca.jorigin, ca.qmap, pose_to_frame12(base), q
    )
    poses = [frame12_to_pose(f) for f in frames]
    poses.append(
        frame12_to_pose(K.frame_compose(frames[ca.ee_idx], ca.ee_offset))
    )
    return poses


def fk_ee(robot: RobotModel, base: Pose, q) -> Pose:
    q = _check_arity(robot, q)
    ca = chain_arrays(robot)
    return frame12_to_pose(_ee_frame(ca, pose_to_frame12(base), q))


def jacobian(robot: RobotModel, base: Pose, q) -> np.ndarray:
    """Geometric Jacobian of the ee frame, 6 x DOF: rows 0-2 linear,
    3-5 angular, columns in movable-joint chain order."""
    q = _check_arity(robot, q)
    ca = chain_arrays(robot)
    base12 = pose_to_frame12(base)
    frames = K.fk_frames(ca.jkind, ca.jaxis, ca.jorigin, ca.qmap, base12, q)
    ee = K.frame_compose(frames[ca.ee_idx], ca.ee_offset)
    return K.jacobian_from_frames(
        frames, ca.jkind, ca.jaxis, ca.jorigin, ca.qmap, ee
    )


def pose_error(current: Pose, desired: Pose) -> np.ndarray:
    """6-vector driving current toward desired: positional difference and
    the axis-angle of R_desired R_current^T."""
    rel = desired.rotation_matrix() @ current.rotation_matrix().T
    return np.concatenate(
        [desired.position - current.position, matrix_to_rotvec(rel)]
    )


def _frame_error(cur12: np.ndarray, tgt12: np.ndarray) -> np.ndarray:
    rel = tgt12[3:].reshape(3, 3) @ cur12[3:].reshape(3, 3).T
    return np.concatenate([tgt12[:3] - cur12[:3], matrix_to_rotvec(rel)])


def reach_radius(robot: RobotModel) -> float:
    """Upper bound of ee distance from base: sum of joint origin
    translations, prismatic extensions, and the ee offset."""
    total = 0.0
    for joint in robot.joints:
        total += float(np.linalg.norm(joint.origin.position))
        if joint.kind == "prismatic":
            lo, hi = joint.limits
            total += max(abs(lo), abs(hi))
    total += float(np.linalg.norm(robot.ee_offset.position))
    return total


def solve_ik(
    robot: RobotModel,
    base: Pose,
    target: Pose,
    seed,
    params: IkParams = IkParams(),
    rng_seed: int = 0,
    active: Optional[Sequence[int]] = None,
) -> Union[np.ndarray, IkFailure]:
    """Damped least-squares IK. Runs attempt 0 from the seed plus
    max_restarts attempts from uniform-in-limits samples, then returns the
    successful configuration nearest the seed. Joints outside `active`
    (indices into movable joints; default all) stay frozen at seed values.
    """
    seed = np.asarray(seed, dtype=float).copy()
    if seed.shape != (robot.dof,):
        raise ValueError(f"expected {robot.dof} seed values, got {seed.shape}")
    limits = robot.joint_limits
    if np.any(seed < limits[:, 0] - 1e-12) or np.any(seed > limits[:, 1] + 1e-12):
        raise ValueError("IK seed violates joint limits")
    act = np.arange(robot.dof) if active is None else np.asarray(active, dtype=int)
    ca = chain_arrays(robot)
    base12 = pose_to_frame12(base)
    tgt12 = pose_to_frame12(target)
    eye6 = params.damping**2 * np.eye(6)

    err0 = _frame_error(_ee_frame(ca, base12, seed), tgt12)
    if (
        np.linalg.norm(target.position - base.position)
        > reach_radius(robot) + 1e-9
    ):
        return IkFailure(
            "unreachable",
            float(np.linalg.norm(err0[:3])),
            float(np.linalg.norm(err0[3:])),
        )

    rng = np.random.default_rng(rng_seed)
    successes = []
    best_fail = None  # (scaled residual, pos, rot, hit_limit, q)

    for attempt in range(params.max_restarts + 1):
        q = seed.copy()
        if attempt > 0:
            q[act] = rng.uniform(limits[act, 0], limits[act, 1])
        hit_limit = False
        converged = False
        pos_r = rot_r = np.inf
        for _ in range(params.max_iters):
            frames = K.fk_frames(
                ca.jkind, ca.jaxis, ca.jorigin, ca.qmap, base12, q
            )
            ee = K.frame_compose(frames[ca.ee_idx], ca.ee_offset)
            e = _frame_error(ee, tgt12)
            pos_r = float(np.linalg.norm(e[:3]))
            rot_r = float(np.linalg.norm(e[3:]))
            if pos_r <= params.pos_tol and rot_r <= params.rot_tol:
                converged = True
                break
            J = K.jacobian_from_frames(
                frames, ca.jkind, ca.jaxis, ca.jorigin, ca.qmap, ee
            )[:, act]
            dq = J.T @ np.linalg.solve(J @ J.T + eye6, e)
            step = float(np.max(np.abs(dq)))
            if step > params.step_clamp:
                dq *= params.step_clamp / step
            q_new = q.copy()
            q_new[act] = np.clip(q[act] + dq, limits[act, 0], limits[act, 1])
            hit_limit = bool(np.any(np.abs((q[act] + dq) - q_new[act]) > 1e-12))
            stalled = float(np.max(np.abs(q_new - q))) < 1e-14
            q = q_new
            if stalled:
                break
        if not converged:
            e = _frame_error(_ee_frame(ca, base12, q), tgt12)
            pos_r = float(np.linalg.norm(e[:3]))
            rot_r = float(np.linalg.norm(e[3:]))
            converged = pos_r <= params.pos_tol and rot_r <= params.rot_tol
        if converged:
            successes.append(q.copy())
            continue
        scaled = max(pos_r / params.pos_tol, rot_r / params.rot_tol)
        if best_fail is None or scaled < best_fail[0]:
            best_fail = (scaled, pos_r, rot_r, hit_limit, q.copy())

    if successes:
        dists = [float(np.linalg.norm(s - seed)) for s in successes]
        return successes[int(np.argmin(dists))]

    _, pos_r, rot_r, hit_limit, q_stall = best_fail
    if hit_limit:
        reason = "joint_limits"
    else:
        J = jacobian(robot, base, q_stall)[:, act]
        sigma_min = float(np.linalg.svd(J, compute_uv=False)[-1])
        reason = "singular" if sigma_min < 1e-6 else "max_iters"
    return IkFailure(reason, pos_r, rot_r)
