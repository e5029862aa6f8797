"""Rigid-body math: quaternions, poses, axis-aligned boxes.

Quaternions are stored scalar-last, (qx, qy, qz, qw), matching the XML file
format. All rotation helpers operate on that layout.
"""

from __future__ import annotations

import warnings

import numpy as np

IDENTITY_QUAT = np.array([0.0, 0.0, 0.0, 1.0])


def quat_normalize(q, warn: bool = False) -> np.ndarray:
    """Return q scaled to unit norm; rejects near-zero input. With warn=True
    (used at file-input boundaries) norms that look hand-typed rather than
    drifted also emit a warning."""
    q = np.asarray(q, dtype=float)
    if q.shape != (4,):
        raise ValueError(f"quaternion must have 4 components, got shape {q.shape}")
    norm = float(np.linalg.norm(q))
    if norm < 1e-6:
        raise ValueError(f"zero quaternion (norm {norm:.2e})")
    if warn and abs(norm - 1.0) > 1e-6:
        warnings.warn(f"normalizing quaternion with norm {norm:.6f}", stacklevel=3)
    return q / norm


def quat_multiply(q1, q2) -> np.ndarray:
    """Hamilton product q1 * q2, both scalar-last."""
    x1, y1, z1, w1 = q1
    x2, y2, z2, w2 = q2
    return np.array(
        [
            w1 * x2 + x1 * w2 + y1 * z2 - z1 * y2,
            w1 * y2 - x1 * z2 + y1 * w2 + z1 * x2,
            w1 * z2 + x1 * y2 - y1 * x2 + z1 * w2,
            w1 * w2 - x1 * x2 - y1 * y2 - z1 * z2,
        ]
    )


def quat_conjugate(q) -> np.ndarray:
    x, y, z, w = q
    return np.array([-x, -y, -z, w])


def quat_rotate(q, v) -> np.ndarray:
    """Rotate vector(s) v by unit quaternion q. v may be (3,) or (N, 3)."""
    return np.asarray(v, dtype=float) @ quat_to_matrix(q).T


def quat_to_matrix(q) -> np.ndarray:
    x, y, z, w = q
    xx, yy, zz = x * x, y * y, z * z
    xy, xz, yz = x * y, x * z, y * z
    wx, wy, wz = w * x, w * y, w * z
    return np.array(
        [
            [1 - 2 * (yy + zz), 2 * (xy - wz), 2 * (xz + wy)],
            [2 * (xy + wz), 1 - 2 * (xx + zz), 2 * (yz - wx)],
            [2 * (xz - wy), 2 * (yz + wx), 1 - 2 * (xx + yy)],
        ]
    )


def matrix_to_quat(m) -> np.ndarray:
    """Rotation matrix to scalar-last quaternion (Shepperd's method)."""
    m = np.asarray(m, dtype=float)
    trace = m[0, 0] + m[1, 1] + m[2, 2]
    if trace > 0:
        s = 2.0 * np.sqrt(trace + 1.0)
        w = 0.25 * s
        x = (m[2, 1] - m[1, 2]) / s
        y = (m[0, 2] - m[2, 0]) / s
        z = (m[1, 0] - m[0, 1]) / s
    elif m[0, 0] > m[1, 1] and m[0, 0] > m[2, 2]:
        s = 2.0 * np.sqrt(1.0 + m[0, 0] - m[1, 1] - m[2, 2])
        w = (m[2, 1] - m[1, 2]) / s
        x = 0.25 * s
        y = (m[0, 1] + m[1, 0]) / s
        z = (m[0, 2] + m[2, 0]) / s
    elif m[1, 1] > m[2, 2]:
        s = 2.0 * np.sqrt(1.0 + m[1, 1] - m[0, 0] - m[2, 2])
        w = (m[0, 2] - m[2, 0]) / s
        x = (m[0, 1] + m[1, 0]) / s
        y = 0.25 * s
        z = (m[1, 2] + m[2, 1]) / s
    else:
        s = 2.0 * np.sqrt(1.0 + m[2, 2] - m[0, 0] - m[1, 1])
        w = (m[1, 0] - m[0, 1]) / s
        x = (m[0, 2] + m[2, 0]) / s
        y = (m[1, 2] + m[2, 1]) / s
        z = 0.25 * s
    q = np.array([x, y, z, w])
    return q / np.linalg.norm(q)


def quat_from_axis_angle(axis, angle: float) -> np.ndarray:
    axis = np.asarray(axis, dtype=float)
    norm = np.linalg.norm(axis)
    if norm < 1e-12:
        raise ValueError("zero rotation axis")
    half = 0.5 * float(angle)
    q = np.empty(4)
    q[:3] = axis / norm * np.sin(half)
    q[3] = np.cos(half)
    return q


def matrix_to_rotvec(m) -> np.ndarray:
    return quat_to_rotvec(matrix_to_quat(m))


def pose_to_frame12(pose: "Pose") -> np.ndarray:
    """Pack a Pose into the kernels' 12-float frame layout (position +
    row-major rotation matrix)."""
    out = np.empty(12)
    out[:3] = pose.position
    out[3:] = quat_to_matrix(pose.orientation).reshape(9)
    return out


def frame12_to_pose(frame) -> "Pose":
    frame = np.asarray(frame, dtype=float)
    return Pose(frame[:3], matrix_to_quat(frame[3:].reshape(3, 3)))


def quat_to_rotvec(q) -> np.ndarray:
    """Axis-angle vector (axis * angle, radians) of unit quaternion q,
    choosing the short way around."""
    q = np.asarray(q, dtype=float)
    if q[3] < 0:
        q = -q
    s = float(np.linalg.norm(q[:3]))
    if s < 1e-12:
        return 2.0 * q[:3]
    angle = 2.0 * np.arctan2(s, float(q[3]))
    return q[:3] * (angle / s)


class Pose:
    """Rigid transform: translation plus unit quaternion (scalar-last).

    Orientation is normalized on construction; a zero quaternion is
    rejected. Instances are immutable.
    """

    __slots__ = ("position", "orientation")

    def __init__(self, position=(0.0, 0.0, 0.0), orientation=IDENTITY_QUAT):
        position = np.array(position, dtype=float).reshape(3)
        orientation = quat_normalize(orientation, warn=True)
        position.flags.writeable = False
        orientation.flags.writeable = False
        object.__setattr__(self, "position", position)
        object.__setattr__(self, "orientation", orientation)

    def __setattr__(self, name, value):
        raise AttributeError("Pose is immutable")

    @classmethod
    def identity(cls) -> "Pose":
        return cls()

    @classmethod
    def from_matrix(cls, m) -> "Pose":
        m = np.asarray(m, dtype=float)
        return cls(m[:3, 3], matrix_to_quat(m[:3, :3]))

    def matrix(self) -> np.ndarray:
        m = np.eye(4)
        m[:3, :3] = quat_to_matrix(self.orientation)
        m[:3, 3] = self.position
        return m

    def rotation_matrix(self) -> np.ndarray:
        return quat_to_matrix(self.orientation)

    def compose(self, other: "Pose") -> "Pose":
        """self * other: apply other in self's frame."""
        return Pose(
            self.position + quat_rotate(self.orientation, other.position),
            quat_multiply(self.orientation, other.orientation),
        )

    def __mul__(self, other: "Pose") -> "Pose":
        return self.compose(other)

    def inverse(self) -> "Pose":
        q_inv = quat_conjugate(self.orientation)
        return Pose(-quat_rotate(q_inv, self.position), q_inv)

    def apply(self, points) -> np.ndarray:
        """Transform point(s) from this pose's frame to the parent frame."""
        return quat_rotate(self.orientation, points) + self.position

    def allclose(self, other: "Pose", tol: float = 1e-9) -> bool:
        """Equality up to tol, treating q and -q as the same rotation."""
        if not np.allclose(self.position, other.position, atol=tol, rtol=0.0):
            return False
        dot = abs(float(np.dot(self.orientation, other.orientation)))
        return bool(dot >= 1.0 - tol)

    def __repr__(self) -> str:
        p = ", ".join(f"{v:.6g}" for v in self.position)
        q = ", ".join(f"{v:.6g}" for v in self.orientation)
        return f"Pose(position=({p}), orientation=({q}))"


class Aabb:
    """Axis-aligned box stored as center + half-extents."""

    __slots__ = ("center", "half_extents")

    def __init__(self, center, half_extents):
        self.center = np.array(center, dtype=float).reshape(3)
        self.half_extents = np.array(half_extents, dtype=float).reshape(3)
        if np.any(self.half_extents < 0):
            raise ValueError("negative box extents")

    @classmethod
    def from_bounds(cls, lo, hi) -> "Aabb":
        lo = np.asarray(lo, dtype=float)
        hi = np.asarray(hi, dtype=float)
        if np.any(hi < lo):
            raise ValueError("box upper bound below lower bound")
        return cls((lo + hi) / 2.0, (hi - lo) / 2.0)

    @property
    def lo(self) -> np.ndarray:
        return self.center - self.half_extents

    @property
    def hi(self) -> np.ndarray:
        return self.center + self.half_extents

    @property
    def size(self) -> np.ndarray:
        return 2.0 * self.half_extents

    def contains(self, aabb: "Aabb") -> bool:
        return bool(np.all(aabb.lo >= self.lo) and np.all(aabb.hi <= self.hi))

    def contains_point(self, p) -> bool:
        p = np.asarray(p, dtype=float)
        return bool(np.all(p >= self.lo) and np.all(p <= self.hi))

    def union(self, aabb: "Aabb") -> "Aabb":
        return Aabb.from_bounds(
            np.minimum(self.lo, aabb.lo), np.maximum(self.hi, aabb.hi)
        )

    def __repr__(self) -> str:
        c = ", ".join(f"{v:.6g}" for v in self.center)
        h = ", ".join(f"{v:.6g}" for v in self.half_extents)
        return f"Aabb(center=({c}), half_extents=({h}))"
