"""Rigid-transform algebra: poses, twists, wrenches, and rotation averaging.

Quaternions are (w, x, y, z), Hamilton product, right-handed frames. Every
constructor and operation renormalizes, so downstream code can assume unit
quaternions without checking.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

QUAT_NORM_TOL = 1e-9


class DegenerateWeightsError(ValueError):
    """Averaging weights are all zero or the weighted sum cancels out."""


# ---------------------------------------------------------------------------
# quaternion helpers (w, x, y, z)
# ---------------------------------------------------------------------------

def quat_mul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    aw, ax, ay, az = a
    bw, bx, by, bz = b
    return np.array(
        [
            aw * bw - ax * bx - ay * by - az * bz,
            aw * bx + ax * bw + ay * bz - az * by,
            aw * by - ax * bz + ay * bw + az * bx,
            aw * bz + ax * by - ay * bx + az * bw,
        ]
    )


def quat_conj(q: np.ndarray) -> np.ndarray:
    return np.array([q[0], -q[1], -q[2], -q[3]])


def quat_rotate(q: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Rotate vector v by unit quaternion q (q v q*)."""
    w = q[0]
    u = q[1:4]
    t = 2.0 * np.cross(u, v)
    return v + w * t + np.cross(u, t)


def quat_from_axis_angle(axis, angle: float) -> np.ndarray:
    axis = np.asarray(axis, dtype=float)
    n = np.linalg.norm(axis)
    if n == 0.0:
        raise ValueError("zero axis")
    half = 0.5 * angle
    s = math.sin(half) / n
    return np.array([math.cos(half), axis[0] * s, axis[1] * s, axis[2] * s])


def quat_from_rotvec(rv) -> np.ndarray:
    """Axis-angle vector (axis * angle) to quaternion; safe at zero."""
    rv = np.asarray(rv, dtype=float)
    angle = np.linalg.norm(rv)
    if angle < 1e-12:
        # first-order expansion keeps tiny perturbations smooth
        q = np.array([1.0, 0.5 * rv[0], 0.5 * rv[1], 0.5 * rv[2]])
        return q / np.linalg.norm(q)
    return quat_from_axis_angle(rv, angle)


def quat_to_matrix(q: np.ndarray) -> np.ndarray:
    w, x, y, z = q
    return np.array(
        [
            [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
            [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
            [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
        ]
    )


def quat_from_matrix(m: np.ndarray) -> np.ndarray:
    """Shepperd's method; picks the numerically largest pivot."""
    m = np.asarray(m, dtype=float)
    tr = m[0, 0] + m[1, 1] + m[2, 2]
    if tr > 0.0:
        s = math.sqrt(tr + 1.0) * 2.0
        q = np.array(
            [0.25 * s, (m[2, 1] - m[1, 2]) / s, (m[0, 2] - m[2, 0]) / s, (m[1, 0] - m[0, 1]) / s]
        )
    elif m[0, 0] >= m[1, 1] and m[0, 0] >= m[2, 2]:
        s = math.sqrt(1.0 + m[0, 0] - m[1, 1] - m[2, 2]) * 2.0
        q = np.array(
            [(m[2, 1] - m[1, 2]) / s, 0.25 * s, (m[0, 1] + m[1, 0]) / s, (m[0, 2] + m[2, 0]) / s]
        )
    elif m[1, 1] >= m[2, 2]:
        s = math.sqrt(1.0 + m[1, 1] - m[0, 0] - m[2, 2]) * 2.0
        q = np.array(
            [(m[0, 2] - m[2, 0]) / s, (m[0, 1] + m[1, 0]) / s, 0.25 * s, (m[1, 2] + m[2, 1]) / s]
        )
    else:
        s = math.sqrt(1.0 + m[2, 2] - m[0, 0] - m[1, 1]) * 2.0
        q = np.array(
            [(m[1, 0] - m[0, 1]) / s, (m[0, 2] + m[2, 0]) / s, (m[1, 2] + m[2, 1]) / s, 0.25 * s]
        )
    return q / np.linalg.norm(q)


def quat_angle(a: np.ndarray, b: np.ndarray) -> float:
    """Geodesic angle (rad) between the rotations represented by a and b.

    atan2 form: exact down to machine precision for tiny angles, where the
    naive acos of a dot product bottoms out near 3e-8.
    """
    qe = quat_mul(a, quat_conj(b))
    return 2.0 * math.atan2(float(np.linalg.norm(qe[1:4])), abs(float(qe[0])))


# ---------------------------------------------------------------------------
# value types
# ---------------------------------------------------------------------------

def _vec3(v) -> np.ndarray:
    a = np.asarray(v, dtype=float).reshape(3)
    if not np.all(np.isfinite(a)):
        raise ValueError(f"non-finite 3-vector: {a}")
    return a


@dataclass
class Pose:
    """Rigid transform: position (m) plus unit quaternion (w, x, y, z)."""

    position: np.ndarray = field(default_factory=lambda: np.zeros(3))
    orientation: np.ndarray = field(default_factory=lambda: np.array([1.0, 0.0, 0.0, 0.0]))

    def __post_init__(self):
        self.position = _vec3(self.position)
        q = np.asarray(self.orientation, dtype=float).reshape(4)
        if not np.all(np.isfinite(q)):
            raise ValueError(f"non-finite quaternion: {q}")
        n = np.linalg.norm(q)
        if n < 1e-12:
            raise ValueError("zero-norm quaternion")
        self.orientation = q if abs(n - 1.0) <= QUAT_NORM_TOL else q / n

    @staticmethod
    def identity() -> "Pose":
        return Pose()

    @staticmethod
    def from_axis_angle(axis, angle: float, position=(0.0, 0.0, 0.0)) -> "Pose":
        return Pose(np.asarray(position, dtype=float), quat_from_axis_angle(axis, angle))

    @staticmethod
    def from_matrix(t: np.ndarray) -> "Pose":
        t = np.asarray(t, dtype=float)
        return Pose(t[:3, 3], quat_from_matrix(t[:3, :3]))

    def matrix(self) -> np.ndarray:
        t = np.eye(4)
        t[:3, :3] = quat_to_matrix(self.orientation)
        t[:3, 3] = self.position
        return t

    def rotation(self) -> np.ndarray:
        return quat_to_matrix(self.orientation)

    def transform_point(self, v) -> np.ndarray:
        return self.position + quat_rotate(self.orientation, np.asarray(v, dtype=float))

    def copy(self) -> "Pose":
        return Pose(self.position.copy(), self.orientation.copy())

    def to_dict(self) -> dict:
        """Shared wire/log form: {"p": [x,y,z], "q": [w,x,y,z]}."""
        return {"p": self.position.tolist(), "q": self.orientation.tolist()}

    @staticmethod
    def from_dict(d: dict) -> "Pose":
        return Pose(np.asarray(d["p"], dtype=float), np.asarray(d["q"], dtype=float))

    def approx_equal(self, other: "Pose", pos_tol: float = 1e-9, rot_tol: float = 1e-9) -> bool:
        return (
            float(np.linalg.norm(self.position - other.position)) <= pos_tol
            and quat_angle(self.orientation, other.orientation) <= rot_tol
        )


@dataclass
class Twist:
    """Spatial velocity: linear (m/s) and angular (rad/s)."""

    linear: np.ndarray = field(default_factory=lambda: np.zeros(3))
    angular: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        self.linear = _vec3(self.linear)
        self.angular = _vec3(self.angular)


@dataclass
class Wrench:
    """Force (N) and torque (N*m)."""

    force: np.ndarray = field(default_factory=lambda: np.zeros(3))
    torque: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        self.force = _vec3(self.force)
        self.torque = _vec3(self.torque)


# ---------------------------------------------------------------------------
# operations
# ---------------------------------------------------------------------------

def compose(a: Pose, b: Pose) -> Pose:
    """Chain transforms: result maps b-frame coordinates through a."""
    return Pose(
        a.position + quat_rotate(a.orientation, b.position),
        quat_mul(a.orientation, b.orientation),
    )


def invert(t: Pose) -> Pose:
    qi = quat_conj(t.orientation)
    return Pose(-quat_rotate(qi, t.position), qi)


def weighted_pose_mean(poses: list, weights) -> Pose:
    """Reliability-weighted SE(3) average.

    Positions are averaged linearly under normalized weights; orientations by
    the hemisphere-aligned chordal quaternion mean (sign-aligned weighted sum,
    renormalized). Scaling all weights by a positive constant cannot change
    the result. A single input pose is returned unchanged, bit for bit.
    """
    if len(poses) == 0:
        raise ValueError("empty pose list")
    w = np.asarray(weights, dtype=float).reshape(-1)
    if len(w) != len(poses):
        raise ValueError(f"{len(poses)} poses but {len(w)} weights")
    if np.any(w < 0.0):
        raise ValueError("negative weight")
    total = float(np.sum(w))
    if total <= 0.0:
        raise DegenerateWeightsError("all weights are zero")
    if len(poses) == 1:
        return poses[0].copy()

    wn = w / total
    position = np.zeros(3)
    q_ref = poses[0].orientation
    q_sum = np.zeros(4)
    for pose, wi in zip(poses, wn):
        position += wi * pose.position
        q = pose.orientation
        if float(np.dot(q, q_ref)) < 0.0:
            q = -q
        q_sum += wi * q
    n = np.linalg.norm(q_sum)
    if n < 1e-9:
        raise DegenerateWeightsError("weighted quaternion sum cancels; mean undefined")
    return Pose(position, q_sum / n)


def orientation_error(desired: np.ndarray, current: np.ndarray) -> np.ndarray:
    """Axis*angle of desired (x) current^-1, wrapped to angle in (-pi, pi].

    This is the rotational spring displacement: zero iff the orientations
    agree, and bounded so spring torques stay bounded.
    """
    qe = quat_mul(np.asarray(desired, dtype=float), quat_conj(np.asarray(current, dtype=float)))
    if qe[0] < 0.0:
        qe = -qe
    v = qe[1:4]
    s = float(np.linalg.norm(v))
    if s < 1e-12:
        return 2.0 * v  # small-angle limit, exact at zero
    angle = 2.0 * math.atan2(s, float(qe[0]))
    return (angle / s) * v
