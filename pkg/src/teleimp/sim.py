"""Fixed-step world: impedance-driven end-effector, peg, hole fixture.

The end-effector is a gravity-compensated 6-DoF floating rigid body driven by
a Cartesian spring-damper toward the commanded goal. A grasped peg rides
rigidly on it; the peg's weight is deliberately NOT compensated, so carrying
it produces the tracking sag that high stiffness is there to reject. Contact
is penalty-based on the peg's corner points against the hole walls, hole
floor, and table plane. Semi-implicit Euler at a fixed rate keeps the whole
thing deterministic.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .impedance import ImpedanceCommand
from .se3 import (
    Pose,
    Twist,
    Wrench,
    orientation_error,
    quat_mul,
    quat_rotate,
    quat_to_matrix,
)

GRAVITY_DEFAULT = 9.81

SUCCESS_DEPTH = 0.100  # m
SUCCESS_TILT = math.radians(5.0)
INSERT_DEPTH = 0.010  # m, phase boundary
ALIGN_DISTANCE = 0.150  # m, peg bottom to hole mouth
CONSISTENCY_MARGIN = 0.0005  # m of penalty penetration tolerated by the validator

PHASES = ("reach", "transport", "align", "insert", "done")


class SimulationDivergedError(RuntimeError):
    """A state quantity went non-finite; names the offender."""


class InconsistentStateError(RuntimeError):
    """State violates rigid-contact geometry (e.g. deep insertion, wide offset)."""


@dataclass
class BodyState:
    pose: Pose
    twist: Twist = field(default_factory=Twist)
    mass: float = 1.0
    rot_inertia: float = 0.01  # isotropic, kg*m^2

    def __post_init__(self):
        if self.mass <= 0.0:
            raise ValueError("mass must be positive")
        if self.rot_inertia <= 0.0:
            raise ValueError("rotational inertia must be positive")


def _default_hole_pose() -> Pose:
    return Pose(np.array([0.35, 0.18, 0.15]))


def _default_peg_start() -> Pose:
    return Pose(np.array([0.35, -0.18, 0.075]))


def _default_ee_start() -> Pose:
    return Pose(np.array([0.35, -0.18, 0.30]))


@dataclass
class SceneConfig:
    """Task geometry, contact constants, and body parameters.

    Peg and hole are square-section parallelepipeds; the hole is a pocket in a
    fixture block whose mouth plane is the origin of hole_pose (z up out of
    the hole). Defaults reproduce a 50 mm peg in a 56 mm pocket, 150 mm deep.
    """

    peg_dims: tuple = (0.050, 0.050, 0.150)
    hole_inner: tuple = (0.056, 0.056, 0.150)
    peg_mass: float = 0.5
    hole_pose: Pose = field(default_factory=_default_hole_pose)
    peg_start_pose: Pose = field(default_factory=_default_peg_start)
    contact_stiffness: float = 10000.0
    contact_damping: float = 50.0
    friction_mu: float = 0.4
    gravity: float = GRAVITY_DEFAULT
    ee_start_pose: Pose = field(default_factory=_default_ee_start)
    ee_mass: float = 2.0
    ee_rot_inertia: float = 0.02
    peg_rot_inertia: float = 0.002
    wall_thickness: float = 0.020
    grasp_distance: float = 0.030
    dt: float = 0.001
    wrench_noise_sigma: float = 0.0

    def __post_init__(self):
        if not (self.hole_inner[0] > self.peg_dims[0] and self.hole_inner[1] > self.peg_dims[1]):
            raise ValueError("hole cross-section must exceed the peg's")
        if self.dt <= 0.0:
            raise ValueError("dt must be positive")

    @property
    def half_clearance(self) -> float:
        return 0.5 * (self.hole_inner[0] - self.peg_dims[0])

    def to_dict(self) -> dict:
        return {
            "peg_dims": list(self.peg_dims),
            "hole_inner": list(self.hole_inner),
            "peg_mass": self.peg_mass,
            "hole_pose": self.hole_pose.to_dict(),
            "peg_start_pose": self.peg_start_pose.to_dict(),
            "contact_stiffness": self.contact_stiffness,
            "contact_damping": self.contact_damping,
            "friction_mu": self.friction_mu,
            "gravity": self.gravity,
            "ee_start_pose": self.ee_start_pose.to_dict(),
            "ee_mass": self.ee_mass,
            "ee_rot_inertia": self.ee_rot_inertia,
            "peg_rot_inertia": self.peg_rot_inertia,
            "wall_thickness": self.wall_thickness,
            "grasp_distance": self.grasp_distance,
            "dt": self.dt,
            "wrench_noise_sigma": self.wrench_noise_sigma,
        }

    @staticmethod
    def from_dict(d: dict) -> "SceneConfig":
        d = dict(d)
        for key in ("hole_pose", "peg_start_pose", "ee_start_pose"):
            if key in d and isinstance(d[key], dict):
                d[key] = Pose.from_dict(d[key])
        for key in ("peg_dims", "hole_inner"):
            if key in d:
                d[key] = tuple(float(v) for v in d[key])
        return SceneConfig(**d)


@dataclass
class EpisodeStatus:
    phase: str = "reach"
    success: bool = False
    t: float = 0.0


@dataclass
class ContactPoint:
    position: np.ndarray  # world
    force: np.ndarray  # world, acting on the peg


def _cross3(a, b) -> np.ndarray:
    # np.cross pays heavy axis-normalization overhead on 3-vectors
    return np.array(
        [
            a[1] * b[2] - a[2] * b[1],
            a[2] * b[0] - a[0] * b[2],
            a[0] * b[1] - a[1] * b[0],
        ]
    )


def _impedance_forces(goal: Pose, ee: BodyState, impedance: ImpedanceCommand):
    k_t, k_r = impedance.k_diag[0], impedance.k_diag[3]
    d_t, d_r = impedance.d_diag[0], impedance.d_diag[3]
    force = k_t * (goal.position - ee.pose.position) - d_t * ee.twist.linear
    torque = k_r * orientation_error(goal.orientation, ee.pose.orientation) - d_r * ee.twist.angular
    return force, torque


def impedance_wrench(goal: Pose, ee: BodyState, impedance: ImpedanceCommand) -> Wrench:
    """Spring-damper wrench toward the goal, zero at the goal at rest."""
    force, torque = _impedance_forces(goal, ee, impedance)
    return Wrench(force, torque)


class _HoleGeom:
    """Hole-frame collision boxes, precomputed once per scene."""

    def __init__(self, scene: SceneConfig):
        hw_x = 0.5 * scene.hole_inner[0]
        hw_y = 0.5 * scene.hole_inner[1]
        depth = scene.hole_inner[2]
        t = scene.wall_thickness
        lo = []
        hi = []
        # four walls tile the rim without overlap, then the pocket floor
        lo.append([hw_x, -hw_y - t, -depth]); hi.append([hw_x + t, hw_y + t, 0.0])
        lo.append([-hw_x - t, -hw_y - t, -depth]); hi.append([-hw_x, hw_y + t, 0.0])
        lo.append([-hw_x, hw_y, -depth]); hi.append([hw_x, hw_y + t, 0.0])
        lo.append([-hw_x, -hw_y - t, -depth]); hi.append([hw_x, -hw_y, 0.0])
        lo.append([-hw_x - t, -hw_y - t, -depth - t]); hi.append([hw_x + t, hw_y + t, -depth])
        self.lo = np.array(lo)
        self.hi = np.array(hi)
        self.hole_p = scene.hole_pose.position.copy()
        self.hole_r = quat_to_matrix(scene.hole_pose.orientation)

    def to_hole(self, pts: np.ndarray) -> np.ndarray:
        return (pts - self.hole_p) @ self.hole_r

    def from_hole_dir(self, v: np.ndarray) -> np.ndarray:
        return v @ self.hole_r.T


def _peg_corners_local(dims) -> np.ndarray:
    hx, hy, hz = 0.5 * dims[0], 0.5 * dims[1], 0.5 * dims[2]
    return np.array(
        [[sx * hx, sy * hy, sz * hz] for sx in (-1, 1) for sy in (-1, 1) for sz in (-1, 1)]
    )


_SLIP_EPS = 1e-3  # m/s, friction smoothing knee


def _contact_forces(peg: BodyState, scene: SceneConfig, geom: _HoleGeom, corners_local: np.ndarray,
                    r_peg: np.ndarray | None = None):
    """Penalty forces at penetrating peg corners; returns (force, torque, points).

    Torque is taken about the peg origin (its center). Normal force is
    stiffness*depth plus damping that only resists approach, clamped
    non-negative so contacts never pull.
    """
    if r_peg is None:
        r_peg = quat_to_matrix(peg.pose.orientation)
    r_world = corners_local @ r_peg.T
    pts_w = r_world + peg.pose.position
    w = peg.twist.angular
    v = peg.twist.linear
    vel_w = np.empty_like(r_world)
    vel_w[:, 0] = v[0] + w[1] * r_world[:, 2] - w[2] * r_world[:, 1]
    vel_w[:, 1] = v[1] + w[2] * r_world[:, 0] - w[0] * r_world[:, 2]
    vel_w[:, 2] = v[2] + w[0] * r_world[:, 1] - w[1] * r_world[:, 0]

    k_c = scene.contact_stiffness
    d_c = scene.contact_damping
    mu = scene.friction_mu

    force = np.zeros(3)
    torque = np.zeros(3)
    points: list[ContactPoint] = []

    def add(point_w, vel, depth, normal_w):
        nonlocal force, torque
        v_n = float(vel @ normal_w)
        f_n = k_c * depth + d_c * max(0.0, -v_n)
        if f_n <= 0.0:
            return
        f = f_n * normal_w
        if mu > 0.0:
            v_t = vel - v_n * normal_w
            slip = math.sqrt(float(v_t @ v_t))
            if slip > 1e-12:
                f = f - (mu * f_n * min(1.0, slip / _SLIP_EPS) / slip) * v_t
        force += f
        torque += _cross3(point_w - peg.pose.position, f)
        points.append(ContactPoint(point_w.copy(), f))

    # table plane z = 0 (world)
    if np.any(pts_w[:, 2] < 0.0):
        up = np.array([0.0, 0.0, 1.0])
        for i in np.nonzero(pts_w[:, 2] < 0.0)[0]:
            add(pts_w[i], vel_w[i], -pts_w[i, 2], up)

    # hole fixture boxes (hole frame)
    pts_h = geom.to_hole(pts_w)
    d_lo = pts_h[None, :, :] - geom.lo[:, None, :]
    d_hi = geom.hi[:, None, :] - pts_h[None, :, :]
    inside = np.all(d_lo > 0.0, axis=2) & np.all(d_hi > 0.0, axis=2)
    if np.any(inside):
        for b, i in zip(*np.nonzero(inside)):
            gaps = (
                d_lo[b, i, 0], d_hi[b, i, 0], d_lo[b, i, 1], d_hi[b, i, 1], d_lo[b, i, 2], d_hi[b, i, 2],
            )
            face = min(range(6), key=gaps.__getitem__)
            depth = float(gaps[face])
            axis, sign = divmod(face, 2)
            n_h = np.zeros(3)
            n_h[axis] = -1.0 if sign == 0 else 1.0
            add(pts_w[i], vel_w[i], depth, geom.from_hole_dir(n_h))

    return force, torque, points


def contact_wrench(peg: BodyState, scene: SceneConfig):
    """Aggregate penalty contact wrench about the peg frame, plus contact points."""
    geom = _HoleGeom(scene)
    force, torque, points = _contact_forces(peg, scene, geom, _peg_corners_local(scene.peg_dims))
    return Wrench(force, torque), points


@dataclass
class _HoleMetrics:
    depth: float
    offset: float
    tilt: float
    mouth_distance: float


class World:
    """Single-owner simulation state, stepped at a fixed rate."""

    def __init__(self, scene: SceneConfig | None = None, seed: int = 0):
        self.scene = scene if scene is not None else SceneConfig()
        self.ee = BodyState(
            pose=self.scene.ee_start_pose.copy(),
            mass=self.scene.ee_mass,
            rot_inertia=self.scene.ee_rot_inertia,
        )
        self.peg = BodyState(
            pose=self.scene.peg_start_pose.copy(),
            mass=self.scene.peg_mass,
            rot_inertia=self.scene.peg_rot_inertia,
        )
        self.attached = False
        self._grasp_offset: Pose | None = None
        self.gripper = "open"
        self.goal: Pose = self.scene.ee_start_pose.copy()
        self.impedance: ImpedanceCommand | None = None
        self.steps = 0
        self.status = EpisodeStatus()
        self._geom = _HoleGeom(self.scene)
        self._corners = _peg_corners_local(self.scene.peg_dims)
        self._ext_force = np.zeros(3)
        self._ext_torque = np.zeros(3)
        self._contact_points: list[ContactPoint] = []
        self._rng = np.random.default_rng(seed)

    @property
    def t(self) -> float:
        return self.steps * self.scene.dt

    # -- commands ----------------------------------------------------------

    def set_action(self, goal: Pose, impedance: ImpedanceCommand) -> None:
        self.goal = goal
        self.impedance = impedance

    def set_gripper(self, state: str) -> bool:
        """Open/close the gripper; closing near the peg top grasps it.

        Returns True when the attachment state changed.
        """
        if state not in ("open", "closed"):
            raise ValueError(f"unknown gripper state {state!r}")
        changed = False
        if state == "closed" and not self.attached:
            grasp_point = self.peg.pose.transform_point([0.0, 0.0, 0.5 * self.scene.peg_dims[2]])
            if float(np.linalg.norm(self.ee.pose.position - grasp_point)) <= self.scene.grasp_distance:
                self._attach()
                changed = True
        elif state == "open" and self.attached:
            self._detach()
            changed = True
        self.gripper = state
        return changed

    def _attach(self) -> None:
        from .se3 import compose, invert

        self._grasp_offset = compose(invert(self.ee.pose), self.peg.pose)
        self.attached = True

    def _detach(self) -> None:
        # peg keeps the rigid-body velocity it had at release
        r = self.peg.pose.position - self.ee.pose.position
        self.peg.twist = Twist(
            self.ee.twist.linear + np.cross(self.ee.twist.angular, r),
            self.ee.twist.angular.copy(),
        )
        self.attached = False
        self._grasp_offset = None

    # -- dynamics ----------------------------------------------------------

    def step(self) -> None:
        scene = self.scene
        dt = scene.dt
        ee = self.ee
        peg = self.peg

        if self.impedance is not None:
            f_cmd, t_cmd = _impedance_forces(self.goal, ee, self.impedance)
        else:
            f_cmd = np.zeros(3)
            t_cmd = np.zeros(3)

        r_peg_mat = quat_to_matrix(peg.pose.orientation)
        c_force, c_torque, c_points = _contact_forces(peg, scene, self._geom, self._corners, r_peg_mat)
        self._contact_points = c_points
        g_peg = np.array([0.0, 0.0, -scene.gravity * peg.mass])

        if self.attached:
            r_peg = peg.pose.position - ee.pose.position
            ext_force = c_force + g_peg
            # about the ee origin: contact torque transported along the lever,
            # payload gravity acting at the peg center
            ext_torque = c_torque + _cross3(r_peg, c_force) + _cross3(r_peg, g_peg)
            self._ext_force = ext_force
            self._ext_torque = ext_torque
            mass = ee.mass + peg.mass
            inertia = ee.rot_inertia + peg.rot_inertia
            acc = (f_cmd + ext_force) / mass
            ang_acc = (t_cmd + ext_torque) / inertia
            self._integrate(ee, acc, ang_acc, dt)
            self._follow_grasp()
        else:
            self._ext_force = np.zeros(3)
            self._ext_torque = np.zeros(3)
            acc = f_cmd / ee.mass
            ang_acc = t_cmd / ee.rot_inertia
            self._integrate(ee, acc, ang_acc, dt)
            acc_p = (c_force + g_peg) / peg.mass
            ang_acc_p = c_torque / peg.rot_inertia
            self._integrate(peg, acc_p, ang_acc_p, dt)

        self.steps += 1
        self._check_finite()
        # pre-contact rotation is stale by one integration; recompute only
        # when attitude actually moves
        if self.attached or float(peg.twist.angular @ peg.twist.angular) > 0.0:
            r_peg_mat = quat_to_matrix(peg.pose.orientation)
        self._update_status(r_peg_mat)

    @staticmethod
    def _integrate(body: BodyState, acc: np.ndarray, ang_acc: np.ndarray, dt: float) -> None:
        tw = body.twist
        tw.linear = tw.linear + acc * dt
        tw.angular = tw.angular + ang_acc * dt
        pose = body.pose
        pose.position = pose.position + tw.linear * dt
        w = tw.angular
        q = pose.orientation
        dq = 0.5 * dt * quat_mul(np.array([0.0, w[0], w[1], w[2]]), q)
        q = q + dq
        pose.orientation = q / np.linalg.norm(q)

    def _follow_grasp(self) -> None:
        off = self._grasp_offset
        self.peg.pose.position = self.ee.pose.position + quat_rotate(
            self.ee.pose.orientation, off.position
        )
        self.peg.pose.orientation = quat_mul(self.ee.pose.orientation, off.orientation)
        r = self.peg.pose.position - self.ee.pose.position
        self.peg.twist.linear = self.ee.twist.linear + _cross3(self.ee.twist.angular, r)
        self.peg.twist.angular = self.ee.twist.angular.copy()

    def _check_finite(self) -> None:
        # a single nan/inf anywhere poisons these sums
        probe = (
            float(np.sum(self.ee.pose.position))
            + float(np.sum(self.ee.pose.orientation))
            + float(np.sum(self.ee.twist.linear))
            + float(np.sum(self.ee.twist.angular))
            + float(np.sum(self.peg.pose.position))
            + float(np.sum(self.peg.twist.linear))
        )
        if math.isfinite(probe):
            return
        for name, arr in (
            ("ee position", self.ee.pose.position),
            ("ee orientation", self.ee.pose.orientation),
            ("ee velocity", self.ee.twist.linear),
            ("ee angular velocity", self.ee.twist.angular),
            ("peg position", self.peg.pose.position),
            ("peg velocity", self.peg.twist.linear),
        ):
            if not np.all(np.isfinite(arr)):
                raise SimulationDivergedError(f"{name} diverged at t={self.t:.4f}: {arr}")
        raise SimulationDivergedError(f"state diverged at t={self.t:.4f}")

    # -- observation -------------------------------------------------------

    # -- episode boundary snapshots -----------------------------------------

    def snapshot(self) -> dict:
        """Full dynamic state, canonical-JSON friendly; enough to resume exactly."""
        def body(b: BodyState) -> dict:
            return {
                "pose": b.pose.to_dict(),
                "lin": b.twist.linear.tolist(),
                "ang": b.twist.angular.tolist(),
            }

        return {
            "steps": self.steps,
            "ee": body(self.ee),
            "peg": body(self.peg),
            "attached": self.attached,
            "grasp_offset": self._grasp_offset.to_dict() if self._grasp_offset is not None else None,
            "gripper": self.gripper,
            "success": self.status.success,
        }

    def restore(self, snap: dict) -> None:
        def body(b: BodyState, d: dict) -> None:
            b.pose = Pose.from_dict(d["pose"])
            b.twist = Twist(d["lin"], d["ang"])

        self.steps = int(snap["steps"])
        body(self.ee, snap["ee"])
        body(self.peg, snap["peg"])
        self.attached = bool(snap["attached"])
        off = snap.get("grasp_offset")
        self._grasp_offset = Pose.from_dict(off) if off is not None else None
        self.gripper = str(snap["gripper"])
        self.status.success = bool(snap.get("success", False))
        self._update_status()

    def estimate_external_wrench(self) -> Wrench:
        """Contact plus uncompensated payload load felt at the end-effector."""
        force = self._ext_force
        torque = self._ext_torque
        sigma = self.scene.wrench_noise_sigma
        if sigma > 0.0:
            force = force + self._rng.normal(0.0, sigma, 3)
            torque = torque + self._rng.normal(0.0, sigma, 3)
        return Wrench(force.copy(), torque.copy())

    def contact_points(self) -> list:
        return list(self._contact_points)

    def hole_metrics(self, r_peg: np.ndarray | None = None) -> _HoleMetrics:
        scene = self.scene
        if r_peg is None:
            r_peg = quat_to_matrix(self.peg.pose.orientation)
        bottom_w = self.peg.pose.position - 0.5 * scene.peg_dims[2] * r_peg[:, 2]
        rel = bottom_w - self._geom.hole_p
        bottom_h = rel @ self._geom.hole_r
        offset = math.hypot(float(bottom_h[0]), float(bottom_h[1]))
        # depth counts only inside the mouth footprint; below-mouth-plane but
        # off to the side (e.g. resting on the table) is not insertion
        inside = (
            abs(float(bottom_h[0])) <= 0.5 * scene.hole_inner[0]
            and abs(float(bottom_h[1])) <= 0.5 * scene.hole_inner[1]
        )
        depth = max(0.0, -float(bottom_h[2])) if inside else 0.0
        tilt = math.acos(min(1.0, max(-1.0, float(r_peg[:, 2] @ self._geom.hole_r[:, 2]))))
        mouth_distance = math.sqrt(float(rel @ rel))
        return _HoleMetrics(depth, offset, tilt, mouth_distance)

    def _update_status(self, r_peg: np.ndarray | None = None) -> None:
        m = self.hole_metrics(r_peg)
        if not self.status.success:
            if m.depth >= SUCCESS_DEPTH and m.offset <= self.scene.half_clearance and m.tilt <= SUCCESS_TILT:
                self.status.success = True
        if self.status.success:
            phase = "done"
        elif not self.attached:
            phase = "reach"
        elif m.depth >= INSERT_DEPTH:
            phase = "insert"
        elif m.mouth_distance <= ALIGN_DISTANCE:
            phase = "align"
        else:
            phase = "transport"
        self.status.phase = phase
        self.status.t = self.t


def check_success(world: World, strict: bool = True) -> EpisodeStatus:
    """Instantaneous success/phase assessment of a world state.

    With strict=True, a state that rigid contact could never produce (deep
    insertion with the bottom offset beyond the clearance plus a penalty
    penetration margin) raises InconsistentStateError instead of being
    scored; such states only arise from corrupted or fabricated inputs.
    """
    m = world.hole_metrics()
    if strict and m.depth >= INSERT_DEPTH:
        # tilting the peg frees a little lateral room for the bottom center
        tilt_slack = 0.5 * world.scene.peg_dims[0] * (1.0 - math.cos(m.tilt))
        limit = world.scene.half_clearance + CONSISTENCY_MARGIN + tilt_slack
        if m.offset > limit:
            raise InconsistentStateError(
                f"peg {m.depth * 1e3:.1f} mm deep with bottom offset {m.offset * 1e3:.2f} mm "
                f"exceeds the {limit * 1e3:.2f} mm rigid-contact bound"
            )
    success = m.depth >= SUCCESS_DEPTH and m.offset <= world.scene.half_clearance and m.tilt <= SUCCESS_TILT
    if success or world.status.success:
        phase = "done"
    elif not world.attached:
        phase = "reach"
    elif m.depth >= INSERT_DEPTH:
        phase = "insert"
    elif m.mouth_distance <= ALIGN_DISTANCE:
        phase = "align"
    else:
        phase = "transport"
    return EpisodeStatus(phase=phase, success=success or world.status.success, t=world.t)
