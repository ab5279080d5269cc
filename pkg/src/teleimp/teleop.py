"""Leader-to-follower command mapping: clutch, scaling, gripper, haptic cue.

The clutch stores a leader/follower anchor pair at engagement, so the first
goal after engaging equals the follower's current pose (bumpless transfer).
Translation is scaled; rotation maps 1:1 because scaling an orientation is
ill-defined for large angles.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .markers import TrackedPose
from .se3 import Pose, Wrench, quat_conj, quat_mul, quat_rotate

GRIPPER_OPEN = "open"
GRIPPER_CLOSED = "closed"

F_SAT_DEFAULT = 30.0  # N, force at which the vibrotactile cue saturates

SCALE_MIN = 0.1
SCALE_MAX = 2.0


class StalePoseError(RuntimeError):
    """Refused to engage the clutch on a stale tracked pose."""


@dataclass
class ClutchState:
    engaged: bool = False
    leader_anchor: Pose | None = None
    follower_anchor: Pose | None = None


@dataclass(frozen=True)
class ScaleFactor:
    """Leader-to-follower motion scale, clamped to [0.1, 2.0]."""

    s: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "s", min(max(float(self.s), SCALE_MIN), SCALE_MAX))


@dataclass(frozen=True)
class HapticCue:
    amplitude: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "amplitude", min(max(float(self.amplitude), 0.0), 1.0))


def engage(leader_now: TrackedPose, follower_now: Pose, state: ClutchState | None = None) -> ClutchState:
    """Anchor both sides and close the clutch.

    Raises StalePoseError instead of anchoring on a stale leader pose: a
    frozen leader would otherwise teleport the follower on the next update.
    """
    if leader_now.stale:
        raise StalePoseError("leader pose is stale; not engaging")
    return ClutchState(
        engaged=True,
        leader_anchor=leader_now.pose_world.copy(),
        follower_anchor=follower_now.copy(),
    )


def disengage(state: ClutchState) -> ClutchState:
    return ClutchState(engaged=False, leader_anchor=state.leader_anchor, follower_anchor=state.follower_anchor)


def map_leader_to_goal(
    leader_now: Pose,
    state: ClutchState,
    scale: ScaleFactor,
    frame_offset: np.ndarray | None = None,
) -> Pose | None:
    """Follower goal for the current leader pose, or None while disengaged.

    Translation: follower anchor plus s times the (frame-aligned) leader
    displacement. Rotation: the leader's rotation since its anchor, conjugated
    into the follower frame, applied to the follower anchor orientation.
    """
    if not state.engaged:
        return None
    q_off = np.array([1.0, 0.0, 0.0, 0.0]) if frame_offset is None else frame_offset
    dp = leader_now.position - state.leader_anchor.position
    goal_p = state.follower_anchor.position + scale.s * quat_rotate(q_off, dp)
    q_rel = quat_mul(leader_now.orientation, quat_conj(state.leader_anchor.orientation))
    q_rel = quat_mul(quat_mul(q_off, q_rel), quat_conj(q_off))
    goal_q = quat_mul(q_rel, state.follower_anchor.orientation)
    return Pose(goal_p, goal_q)


def gripper_toggle(current: str) -> str:
    if current == GRIPPER_OPEN:
        return GRIPPER_CLOSED
    if current == GRIPPER_CLOSED:
        return GRIPPER_OPEN
    raise ValueError(f"unknown gripper state {current!r}")


def vibro_amplitude(external: Wrench, f_sat: float = F_SAT_DEFAULT) -> HapticCue:
    """Haptic cue amplitude: force norm normalized by saturation, torque ignored."""
    if f_sat <= 0.0:
        raise ValueError("f_sat must be positive")
    return HapticCue(min(1.0, float(np.linalg.norm(external.force)) / f_sat))


class TeleopPipeline:
    """Owns clutch, scale, and gripper state for one operator session.

    Single-owner: only the simulation loop mutates it; commands arrive
    through that loop's message queue.
    """

    def __init__(self, frame_offset: np.ndarray | None = None, f_sat: float = F_SAT_DEFAULT):
        self.clutch = ClutchState()
        self.scale = ScaleFactor(1.0)
        self.gripper = GRIPPER_OPEN
        self.frame_offset = frame_offset
        self.f_sat = f_sat

    @property
    def engaged(self) -> bool:
        return self.clutch.engaged

    def toggle_teleop(self, leader_now: TrackedPose | None, follower_now: Pose) -> bool:
        """Flip the clutch; returns the new engaged state."""
        if self.clutch.engaged:
            self.clutch = disengage(self.clutch)
        else:
            if leader_now is None:
                raise StalePoseError("no leader pose available; not engaging")
            self.clutch = engage(leader_now, follower_now, self.clutch)
        return self.clutch.engaged

    def set_scale(self, s: float) -> ScaleFactor:
        self.scale = ScaleFactor(s)
        return self.scale

    def toggle_gripper(self) -> str:
        self.gripper = gripper_toggle(self.gripper)
        return self.gripper

    def goal(self, leader_now: Pose | None) -> Pose | None:
        if leader_now is None:
            return None
        return map_leader_to_goal(leader_now, self.clutch, self.scale, self.frame_offset)

    def haptic(self, external: Wrench) -> HapticCue:
        return vibro_amplitude(external, self.f_sat)
