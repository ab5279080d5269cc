"""Single-owner loop state shared by the live gateway and the scripted runner.

A Session applies operator messages in arrival order, advances the world one
fixed step at a time, and owns the episode-log lifecycle (a new episode per
clutch engagement, finalized on disengage or success). It never touches a
socket; transports feed it through a bounded queue.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field

import numpy as np

from .episodes import EpisodeHeader, EpisodeWriter, StepRecord
from .impedance import ImpedanceProfile, PressurePair, expand, pressure_to_stiffness, slew_limit
from .markers import (
    MarkerTracker,
    NoiseSpec,
    NoPoseYetError,
    PolyhedronGeometry,
    TrackedPose,
    TrackerConfig,
    synth_observe,
)
from .protocol import (
    Bars,
    ErrorMsg,
    FsrSample,
    GripperToggle,
    Haptic,
    PoseSample,
    ScaleSet,
    Telemetry,
    TeleopToggle,
)
from .se3 import Pose
from .serde import canonical_digest
from .sim import SceneConfig, World
from .teleop import StalePoseError, TeleopPipeline


def _default_camera() -> Pose:
    # overhead camera looking straight down at the leader workspace
    return Pose(np.array([0.0, 0.0, 1.2]), np.array([0.0, 1.0, 0.0, 0.0]))


@dataclass
class SessionConfig:
    """Everything a run needs: scene, impedance profile, tracker, rates, seed."""

    scene: SceneConfig = field(default_factory=SceneConfig)
    profile: ImpedanceProfile = field(default_factory=ImpedanceProfile)
    tracker: TrackerConfig = field(default_factory=lambda: TrackerConfig(camera_in_world=_default_camera()))
    noise: NoiseSpec = field(default_factory=NoiseSpec)
    pose_mode: str = "markers"  # "markers": synthesize+fuse per sample; "direct": trust the sample
    cube_size: float = 0.060
    stem_offset: float = 0.110
    seed: int = 0
    telemetry_hz: float = 20.0
    f_sat: float = 30.0
    frame_offset_q: tuple = (1.0, 0.0, 0.0, 0.0)
    episode_cap: float = 60.0

    def __post_init__(self):
        if self.pose_mode not in ("markers", "direct"):
            raise ValueError(f"pose_mode must be 'markers' or 'direct', got {self.pose_mode!r}")

    def geometry(self) -> PolyhedronGeometry:
        return PolyhedronGeometry.cube(self.cube_size, self.stem_offset)

    def to_dict(self) -> dict:
        return {
            "scene": self.scene.to_dict(),
            "profile": self.profile.to_dict(),
            "tracker": {
                "camera_in_world": self.tracker.camera_in_world.to_dict(),
                "alpha_thr": self.tracker.alpha_thr,
                "stale_timeout": self.tracker.stale_timeout,
            },
            "noise": {
                "pos_sigma": self.noise.pos_sigma,
                "rot_sigma": self.noise.rot_sigma,
                "flip_probability": self.noise.flip_probability,
                "flip_alpha_band": list(self.noise.flip_alpha_band),
            },
            "pose_mode": self.pose_mode,
            "cube_size": self.cube_size,
            "stem_offset": self.stem_offset,
            "seed": self.seed,
            "telemetry_hz": self.telemetry_hz,
            "f_sat": self.f_sat,
            "frame_offset_q": list(self.frame_offset_q),
            "episode_cap": self.episode_cap,
        }

    @staticmethod
    def from_dict(d: dict) -> "SessionConfig":
        tracker = d.get("tracker", {})
        noise = d.get("noise", {})
        return SessionConfig(
            scene=SceneConfig.from_dict(d["scene"]) if "scene" in d else SceneConfig(),
            profile=ImpedanceProfile.from_dict(d["profile"]) if "profile" in d else ImpedanceProfile(),
            tracker=TrackerConfig(
                camera_in_world=Pose.from_dict(tracker["camera_in_world"])
                if "camera_in_world" in tracker
                else _default_camera(),
                alpha_thr=float(tracker.get("alpha_thr", TrackerConfig.__dataclass_fields__["alpha_thr"].default)),
                stale_timeout=float(tracker.get("stale_timeout", 0.5)),
            ),
            noise=NoiseSpec(
                pos_sigma=float(noise.get("pos_sigma", 0.0)),
                rot_sigma=float(noise.get("rot_sigma", 0.0)),
                flip_probability=float(noise.get("flip_probability", 0.0)),
                flip_alpha_band=tuple(noise.get("flip_alpha_band", NoiseSpec.__dataclass_fields__["flip_alpha_band"].default)),
            ),
            pose_mode=str(d.get("pose_mode", "markers")),
            cube_size=float(d.get("cube_size", 0.060)),
            stem_offset=float(d.get("stem_offset", 0.110)),
            seed=int(d.get("seed", 0)),
            telemetry_hz=float(d.get("telemetry_hz", 20.0)),
            f_sat=float(d.get("f_sat", 30.0)),
            frame_offset_q=tuple(float(v) for v in d.get("frame_offset_q", (1.0, 0.0, 0.0, 0.0))),
            episode_cap=float(d.get("episode_cap", 60.0)),
        )

    def digest(self) -> str:
        return canonical_digest(self.to_dict())


def load_scenario(path) -> SessionConfig:
    with open(path, "r", encoding="utf-8") as f:
        return SessionConfig.from_dict(json.load(f))


def save_scenario(path, cfg: SessionConfig) -> None:
    with open(path, "w", encoding="utf-8") as f:
        json.dump(cfg.to_dict(), f, indent=2, sort_keys=True)
        f.write("\n")


class CommandQueue:
    """Bounded FIFO; when full, the oldest pose sample goes first.

    Pose samples are idempotent (the next one supersedes), toggles are not,
    so toggles are never dropped even if the queue has to grow.
    """

    def __init__(self, maxlen: int = 256):
        self.maxlen = maxlen
        self._items: list = []
        self.dropped = 0

    def put(self, msg) -> None:
        if len(self._items) >= self.maxlen:
            for i, m in enumerate(self._items):
                if isinstance(m, PoseSample):
                    del self._items[i]
                    self.dropped += 1
                    break
        self._items.append(msg)

    def drain(self) -> list:
        items = self._items
        self._items = []
        return items

    def __len__(self) -> int:
        return len(self._items)


class Session:
    """Applies operator messages and steps the world; owns episode logging."""

    def __init__(
        self,
        cfg: SessionConfig | None = None,
        log_dir=None,
        out_path=None,
        wall_clock=time.time,
        deterministic_ids: bool = False,
    ):
        self.cfg = cfg if cfg is not None else SessionConfig()
        self.world = World(self.cfg.scene, seed=self.cfg.seed)
        self.geometry = self.cfg.geometry()
        self.tracker = MarkerTracker(self.geometry, self.cfg.tracker)
        self.pipeline = TeleopPipeline(
            frame_offset=np.asarray(self.cfg.frame_offset_q, dtype=float),
            f_sat=self.cfg.f_sat,
        )
        self.profile = self.cfg.profile
        self.pressure = PressurePair(0.0, 0.0)
        self.command = expand(self.profile.kt_min, self.profile.kr_min, self.profile)
        self.target = (self.profile.kt_min, self.profile.kr_min)
        self.queue = CommandQueue()
        self.log_dir = log_dir
        self.out_path = out_path
        self.wall_clock = wall_clock
        self.deterministic_ids = deterministic_ids
        self.writer: EpisodeWriter | None = None
        self.episode_paths: list = []
        self._episode_index = 0
        self._sample_seq = 0
        self._direct_leader: TrackedPose | None = None
        self._last_goal: Pose = self.world.goal.copy()
        self.world.set_action(self._last_goal, self.command)

    # -- leader pose -------------------------------------------------------

    def _leader(self) -> TrackedPose | None:
        last = self._direct_leader if self.cfg.pose_mode == "direct" else self.tracker.last
        if last is None:
            return None
        stale = (self.world.t - last.timestamp) > self.cfg.tracker.stale_timeout
        if stale == last.stale:
            return last
        return TrackedPose(last.pose_world, last.weight_sum, last.n_used, stale, last.timestamp)

    def _apply_pose_sample(self, msg: PoseSample) -> None:
        pose = Pose(np.asarray(msg.p, dtype=float), np.asarray(msg.q, dtype=float))
        now = self.world.t
        if self.cfg.pose_mode == "direct":
            self._direct_leader = TrackedPose(pose, 1.0, 1, False, now)
            return
        observations = synth_observe(
            pose,
            self.geometry,
            self.cfg.tracker,
            noise=self.cfg.noise,
            rng_seed=[self.cfg.seed, self._sample_seq],
            timestamp=now,
        )
        self._sample_seq += 1
        try:
            self.tracker.step(observations, now)
        except NoPoseYetError:
            pass  # nothing fused yet; stay untracked

    # -- message application ------------------------------------------------

    def apply(self, msg) -> list:
        """Apply one operator message; returns server messages to send back."""
        replies: list = []
        if isinstance(msg, PoseSample):
            self._apply_pose_sample(msg)
        elif isinstance(msg, FsrSample):
            self.pressure = PressurePair(msg.pt, msg.pr)
            self.target = pressure_to_stiffness(self.pressure, self.profile)
        elif isinstance(msg, ScaleSet):
            self.pipeline.set_scale(msg.s)
        elif isinstance(msg, GripperToggle):
            state = self.pipeline.toggle_gripper()
            self.world.set_gripper(state)
        elif isinstance(msg, TeleopToggle):
            try:
                engaged = self.pipeline.toggle_teleop(self._leader(), self.world.ee.pose)
            except StalePoseError as e:
                replies.append(ErrorMsg(code="stale", detail=str(e)))
                return replies
            if engaged:
                self._open_episode()
            else:
                self._finalize_episode()
        else:
            replies.append(ErrorMsg(code="unsupported", detail=f"cannot apply {type(msg).__name__}"))
        return replies

    # -- episode lifecycle ---------------------------------------------------

    def _episode_path(self):
        if self.out_path is not None:
            if self._episode_index == 0:
                return self.out_path
            root = str(self.out_path)
            stem, dot, ext = root.rpartition(".")
            if dot:
                return f"{stem}-{self._episode_index + 1}.{ext}"
            return f"{root}-{self._episode_index + 1}"
        import os

        os.makedirs(self.log_dir, exist_ok=True)
        return os.path.join(self.log_dir, f"episode-{self._episode_index:03d}.jsonl")

    def _open_episode(self) -> None:
        if self.writer is not None:
            return
        if self.out_path is None and self.log_dir is None:
            return  # logging not configured for this session
        config = self.cfg.to_dict()
        episode_id = None
        if self.deterministic_ids:
            episode_id = f"ep{self._episode_index:03d}-{canonical_digest(config)[:12]}"
        header = EpisodeHeader.create(
            scene=self.cfg.scene,
            profile=self.profile,
            config=config,
            seed=self.cfg.seed,
            start_walltime=float(self.wall_clock()),
            episode_id=episode_id,
            initial_state=self.world.snapshot(),
        )
        path = self._episode_path()
        self.writer = EpisodeWriter(path, header)
        self.episode_paths.append(path)
        self._episode_index += 1

    def _finalize_episode(self) -> None:
        if self.writer is not None:
            self.writer.close()
            self.writer = None

    def close(self) -> None:
        self._finalize_episode()

    # -- stepping ------------------------------------------------------------

    def drain_and_apply(self) -> list:
        replies = []
        for msg in self.queue.drain():
            replies.extend(self.apply(msg))
        return replies

    def tick(self) -> None:
        """One fixed simulation step with the current goal and gains."""
        leader = self._leader()
        if self.pipeline.engaged and leader is not None:
            goal = self.pipeline.goal(leader.pose_world)
            if goal is not None:
                self._last_goal = goal
        self.command = slew_limit(self.command, self.target, self.cfg.scene.dt, self.profile)
        self.world.set_action(self._last_goal, self.command)
        self.world.step()
        if self.writer is not None:
            self.writer.append_step(self._record())
            if self.world.status.success:
                self._finalize_episode()

    def _record(self) -> StepRecord:
        world = self.world
        ext = world.estimate_external_wrench()
        return StepRecord(
            t=world.t,
            ee_pose=world.ee.pose,
            ee_twist=world.ee.twist,
            ext_wrench=ext,
            peg_pose=world.peg.pose,
            hole_pose=world.scene.hole_pose,
            gripper=world.gripper,
            action_goal_pose=world.goal,
            action_kt=self.command.k_t,
            action_kr=self.command.k_r,
            scale=self.pipeline.scale.s,
            clutch_engaged=self.pipeline.engaged,
            vibro=self.pipeline.haptic(ext).amplitude,
            phase=world.status.phase,
        )

    # -- server-side views -----------------------------------------------------

    def telemetry(self) -> Telemetry:
        leader = self._leader()
        ext = self.world.estimate_external_wrench()
        return Telemetry(
            t=self.world.t,
            ee_pose=self.world.ee.pose.to_dict(),
            goal_pose=self._last_goal.to_dict(),
            kt=self.command.k_t,
            kr=self.command.k_r,
            ext_force_norm=float(np.linalg.norm(ext.force)),
            phase=self.world.status.phase,
            success=self.world.status.success,
            stale=(leader is None) or leader.stale,
            peg_pose=self.world.peg.pose.to_dict(),
            hole_pose=self.world.scene.hole_pose.to_dict(),
        )

    def bars(self) -> Bars:
        p = self.profile
        return Bars(
            kt_frac=(self.command.k_t - p.kt_min) / (p.kt_max - p.kt_min),
            kr_frac=(self.command.k_r - p.kr_min) / (p.kr_max - p.kr_min),
        )

    def haptic(self) -> Haptic:
        ext = self.world.estimate_external_wrench()
        return Haptic(amplitude=self.pipeline.haptic(ext).amplitude)
