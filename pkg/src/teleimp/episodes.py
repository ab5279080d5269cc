"""Demonstration episode files: recording, validation, replay, requirement checks.

An episode is one header line plus one record per simulation step, UTF-8,
canonical key order, 17-significant-digit floats. Each record carries the
full state (poses, twist, external wrench, task objects) and the action that
produced it (goal pose plus the two stiffness channels), which is exactly
what a state-action dataset consumer needs and what replay feeds back in.
"""

from __future__ import annotations

import json
import math
import uuid
from dataclasses import dataclass, field

import numpy as np

from .impedance import DAMPING_COEFF, ImpedanceProfile, expand
from .se3 import Pose, Twist, Wrench
from .serde import canonical_digest, canonical_dumps
from .sim import PHASES, SceneConfig, World

SCHEMA_VERSION = 1


class OrderingError(ValueError):
    """Record timestamp does not advance."""


class WriterClosedError(RuntimeError):
    """Append after the writer was finalized."""


class EpisodeParseError(ValueError):
    """A line could not be parsed; carries the 1-based line number."""

    def __init__(self, line_no: int, message: str):
        super().__init__(f"line {line_no}: {message}")
        self.line_no = line_no


class IncompatibleScenarioError(RuntimeError):
    """Replay target scenario digest does not match the episode header."""


# ---------------------------------------------------------------------------
# records
# ---------------------------------------------------------------------------

@dataclass
class StepRecord:
    t: float
    ee_pose: Pose
    ee_twist: Twist
    ext_wrench: Wrench
    peg_pose: Pose
    hole_pose: Pose
    gripper: str
    action_goal_pose: Pose
    action_kt: float
    action_kr: float
    scale: float
    clutch_engaged: bool
    vibro: float
    phase: str

    def to_record(self) -> dict:
        return {
            "t": self.t,
            "ee": {
                "pose": self.ee_pose.to_dict(),
                "twist": {
                    "lin": self.ee_twist.linear.tolist(),
                    "ang": self.ee_twist.angular.tolist(),
                },
            },
            "ext": {
                "f": self.ext_wrench.force.tolist(),
                "tau": self.ext_wrench.torque.tolist(),
            },
            "peg": self.peg_pose.to_dict(),
            "hole": self.hole_pose.to_dict(),
            "gripper": self.gripper,
            "action": {
                "goal": self.action_goal_pose.to_dict(),
                "kt": self.action_kt,
                "kr": self.action_kr,
            },
            "scale": self.scale,
            "clutch": self.clutch_engaged,
            "vibro": self.vibro,
            "phase": self.phase,
            # reserved for image-capable backends; structured state stands in
            "frames": {"static": None, "wrist": None},
        }

    @staticmethod
    def from_record(rec: dict) -> "StepRecord":
        return StepRecord(
            t=float(rec["t"]),
            ee_pose=Pose.from_dict(rec["ee"]["pose"]),
            ee_twist=Twist(rec["ee"]["twist"]["lin"], rec["ee"]["twist"]["ang"]),
            ext_wrench=Wrench(rec["ext"]["f"], rec["ext"]["tau"]),
            peg_pose=Pose.from_dict(rec["peg"]),
            hole_pose=Pose.from_dict(rec["hole"]),
            gripper=str(rec["gripper"]),
            action_goal_pose=Pose.from_dict(rec["action"]["goal"]),
            action_kt=float(rec["action"]["kt"]),
            action_kr=float(rec["action"]["kr"]),
            scale=float(rec["scale"]),
            clutch_engaged=bool(rec["clutch"]),
            vibro=float(rec["vibro"]),
            phase=str(rec["phase"]),
        )


@dataclass
class EpisodeHeader:
    episode_id: str
    scenario_digest: str
    config_digest: str
    seed: int
    start_walltime: float
    schema_version: int = SCHEMA_VERSION
    scene: dict = field(default_factory=dict)
    profile: dict = field(default_factory=dict)
    dt: float = 0.001
    initial_state: dict | None = None

    def to_record(self) -> dict:
        return {
            "episode_id": self.episode_id,
            "scenario_digest": self.scenario_digest,
            "config_digest": self.config_digest,
            "seed": self.seed,
            "start_walltime": self.start_walltime,
            "schema_version": self.schema_version,
            "scene": self.scene,
            "profile": self.profile,
            "dt": self.dt,
            "initial_state": self.initial_state,
        }

    @staticmethod
    def from_record(rec: dict) -> "EpisodeHeader":
        return EpisodeHeader(
            episode_id=str(rec["episode_id"]),
            scenario_digest=str(rec["scenario_digest"]),
            config_digest=str(rec["config_digest"]),
            seed=int(rec["seed"]),
            start_walltime=float(rec["start_walltime"]),
            schema_version=int(rec["schema_version"]),
            scene=dict(rec["scene"]),
            profile=dict(rec["profile"]),
            dt=float(rec["dt"]),
            initial_state=rec.get("initial_state"),
        )

    @staticmethod
    def create(scene: SceneConfig, profile: ImpedanceProfile, config: dict,
               seed: int, start_walltime: float, episode_id: str | None = None,
               initial_state: dict | None = None) -> "EpisodeHeader":
        scene_dict = scene.to_dict()
        scenario_digest = canonical_digest(scene_dict)
        config_digest = canonical_digest(config)
        if episode_id is None:
            episode_id = uuid.uuid4().hex[:16]
        return EpisodeHeader(
            episode_id=episode_id,
            scenario_digest=scenario_digest,
            config_digest=config_digest,
            seed=seed,
            start_walltime=start_walltime,
            scene=scene_dict,
            profile=profile.to_dict(),
            dt=scene.dt,
            initial_state=initial_state,
        )


class EpisodeWriter:
    """Append-only episode sink; one writer per episode, single-owner."""

    def __init__(self, path, header: EpisodeHeader, flush_every: int = 200):
        self.path = path
        self.header = header
        self._flush_every = max(1, flush_every)
        self._file = open(path, "w", encoding="utf-8")
        self._file.write(canonical_dumps(header.to_record()))
        self._file.write("\n")
        self._last_t = -math.inf
        self._count = 0
        self._closed = False

    @property
    def record_count(self) -> int:
        return self._count

    def append_step(self, record: StepRecord) -> None:
        if self._closed:
            raise WriterClosedError(f"writer for {self.path} is closed")
        if record.t <= self._last_t:
            raise OrderingError(f"t={record.t} does not advance past {self._last_t}")
        self._file.write(canonical_dumps(record.to_record()))
        self._file.write("\n")
        self._last_t = record.t
        self._count += 1
        if self._count % self._flush_every == 0:
            self._file.flush()

    def close(self) -> None:
        if not self._closed:
            self._file.flush()
            self._file.close()
            self._closed = True

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def read_episode(path):
    """Parse an episode file into (header, records). Raises EpisodeParseError."""
    with open(path, "r", encoding="utf-8") as f:
        lines = f.read().splitlines()
    if not lines:
        raise EpisodeParseError(1, "empty file")
    try:
        header = EpisodeHeader.from_record(json.loads(lines[0]))
    except (json.JSONDecodeError, KeyError, TypeError, ValueError) as e:
        raise EpisodeParseError(1, f"bad header: {e}") from None
    records = []
    for i, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        try:
            records.append(StepRecord.from_record(json.loads(line)))
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as e:
            raise EpisodeParseError(i, str(e)) from None
    return header, records


# ---------------------------------------------------------------------------
# validation
# ---------------------------------------------------------------------------

@dataclass
class Violation:
    line: int
    fieldname: str
    message: str


@dataclass
class ValidationReport:
    violations: list
    n_records: int

    @property
    def clean(self) -> bool:
        return not self.violations


_QTOL = 1e-9
_BOUND_TOL = 1e-9


def validate(path) -> ValidationReport:
    """Structural and invariant checks over a recorded episode.

    Schema version, digest consistency, monotone time, quaternion norms,
    impedance bounds against the header profile, and the damping closure on
    any record that logs damping. Every violation is reported with its line.
    """
    violations: list[Violation] = []
    with open(path, "r", encoding="utf-8") as f:
        lines = f.read().splitlines()
    if not lines:
        raise EpisodeParseError(1, "empty file")
    try:
        header_rec = json.loads(lines[0])
        header = EpisodeHeader.from_record(header_rec)
    except (json.JSONDecodeError, KeyError, TypeError, ValueError) as e:
        raise EpisodeParseError(1, f"bad header: {e}") from None

    if header.schema_version != SCHEMA_VERSION:
        violations.append(Violation(1, "schema_version", f"unsupported version {header.schema_version}"))
    if canonical_digest(header.scene) != header.scenario_digest:
        violations.append(Violation(1, "scenario_digest", "embedded scene does not match its digest"))
    for name, digest in (("scenario_digest", header.scenario_digest), ("config_digest", header.config_digest)):
        if len(digest) != 64 or any(c not in "0123456789abcdef" for c in digest):
            violations.append(Violation(1, name, "not a sha256 hex digest"))

    profile = header.profile
    kt_lo = float(profile.get("kt_min", 0.0)) - _BOUND_TOL
    kt_hi = float(profile.get("kt_max", math.inf)) + _BOUND_TOL
    kr_lo = float(profile.get("kr_min", 0.0)) - _BOUND_TOL
    kr_hi = float(profile.get("kr_max", math.inf)) + _BOUND_TOL

    last_t = -math.inf
    n_records = 0
    for i, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        try:
            rec = json.loads(line)
        except json.JSONDecodeError as e:
            raise EpisodeParseError(i, f"unparseable record: {e}") from None
        n_records += 1

        t = rec.get("t")
        if not isinstance(t, (int, float)) or not math.isfinite(t):
            violations.append(Violation(i, "t", f"bad timestamp {t!r}"))
        else:
            if t <= last_t:
                violations.append(Violation(i, "t", f"t={t} does not advance past {last_t}"))
            last_t = t

        for fieldname, q in _iter_quats(rec):
            norm = math.sqrt(sum(v * v for v in q))
            if abs(norm - 1.0) > _QTOL:
                violations.append(Violation(i, fieldname, f"quaternion norm {norm!r} off unit"))

        action = rec.get("action", {})
        kt = action.get("kt")
        kr = action.get("kr")
        if isinstance(kt, (int, float)) and not (kt_lo <= kt <= kt_hi):
            violations.append(Violation(i, "action.kt", f"{kt} outside [{profile.get('kt_min')}, {profile.get('kt_max')}]"))
        if isinstance(kr, (int, float)) and not (kr_lo <= kr <= kr_hi):
            violations.append(Violation(i, "action.kr", f"{kr} outside [{profile.get('kr_min')}, {profile.get('kr_max')}]"))
        for k_key, d_key in (("kt", "kd_t"), ("kr", "kd_r")):
            if d_key in action and isinstance(action.get(k_key), (int, float)):
                expected = DAMPING_COEFF * math.sqrt(max(0.0, action[k_key]))
                if abs(action[d_key] - expected) > 1e-9 * max(1.0, expected):
                    violations.append(Violation(i, f"action.{d_key}", f"{action[d_key]} violates d=2*0.707*sqrt(k)"))

        scale = rec.get("scale")
        if isinstance(scale, (int, float)) and not (0.1 - 1e-12 <= scale <= 2.0 + 1e-12):
            violations.append(Violation(i, "scale", f"{scale} outside [0.1, 2.0]"))
        vibro = rec.get("vibro")
        if isinstance(vibro, (int, float)) and not (0.0 <= vibro <= 1.0):
            violations.append(Violation(i, "vibro", f"{vibro} outside [0, 1]"))
        phase = rec.get("phase")
        if phase not in PHASES:
            violations.append(Violation(i, "phase", f"unknown phase {phase!r}"))
        if rec.get("gripper") not in ("open", "closed"):
            violations.append(Violation(i, "gripper", f"bad gripper state {rec.get('gripper')!r}"))

    return ValidationReport(violations=violations, n_records=n_records)


def _iter_quats(rec: dict):
    try:
        yield "ee.pose.q", rec["ee"]["pose"]["q"]
    except (KeyError, TypeError):
        pass
    for key in ("peg", "hole"):
        try:
            yield f"{key}.q", rec[key]["q"]
        except (KeyError, TypeError):
            pass
    try:
        yield "action.goal.q", rec["action"]["goal"]["q"]
    except (KeyError, TypeError):
        pass


# ---------------------------------------------------------------------------
# replay
# ---------------------------------------------------------------------------

@dataclass
class ReplayReport:
    n_steps: int
    max_position_divergence: float
    max_orientation_divergence: float
    truncated: bool = False
    warnings: list = field(default_factory=list)


def replay(path, scene: SceneConfig | None = None) -> ReplayReport:
    """Re-simulate the logged actions and measure state divergence.

    The episode header embeds the scene it was recorded with; a caller-
    supplied scene must match the header digest or the replay refuses to run
    (divergence against the wrong physics would be meaningless).
    """
    header, records = read_episode(path)
    if scene is not None:
        if canonical_digest(scene.to_dict()) != header.scenario_digest:
            raise IncompatibleScenarioError("scenario digest does not match the episode header")
    else:
        scene = SceneConfig.from_dict(header.scene)

    profile = ImpedanceProfile.from_dict(header.profile)
    world = World(scene, seed=header.seed)
    if header.initial_state:
        world.restore(header.initial_state)
    warnings = []
    if not records:
        warnings.append("episode has no records")

    from .se3 import quat_angle

    max_pos = 0.0
    max_rot = 0.0
    gripper = world.gripper
    for rec in records:
        if rec.gripper != gripper:
            world.set_gripper(rec.gripper)
            gripper = rec.gripper
        world.set_action(rec.action_goal_pose, expand(rec.action_kt, rec.action_kr, profile))
        world.step()
        max_pos = max(
            max_pos,
            float(np.linalg.norm(world.ee.pose.position - rec.ee_pose.position)),
            float(np.linalg.norm(world.peg.pose.position - rec.peg_pose.position)),
        )
        max_rot = max(
            max_rot,
            quat_angle(world.ee.pose.orientation, rec.ee_pose.orientation),
            quat_angle(world.peg.pose.orientation, rec.peg_pose.orientation),
        )
    return ReplayReport(
        n_steps=len(records),
        max_position_divergence=max_pos,
        max_orientation_divergence=max_rot,
        warnings=warnings,
    )


# ---------------------------------------------------------------------------
# phase-stiffness requirement checks
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RequirementThresholds:
    """What counts as low/high stiffness when scoring an episode."""

    kt_low: float = 700.0
    kt_high: float = 1300.0
    kr_low: float = 50.0


@dataclass
class RequirementCheck:
    requirement: int
    description: str
    satisfied: bool
    complete: bool
    stats: dict


@dataclass
class RequirementReport:
    checks: list

    @property
    def all_satisfied(self) -> bool:
        return all(c.satisfied for c in self.checks)

    @property
    def incomplete_phases(self) -> list:
        return [c.stats.get("phase") for c in self.checks if not c.complete]


def _phase_stats(records, phase: str) -> dict:
    kts = [r.action_kt for r in records if r.phase == phase]
    krs = [r.action_kr for r in records if r.phase == phase]
    if not kts:
        return {"phase": phase, "n": 0, "mean_kt": None, "mean_kr": None}
    return {
        "phase": phase,
        "n": len(kts),
        "mean_kt": sum(kts) / len(kts),
        "mean_kr": sum(krs) / len(krs),
    }


def check_requirements(path, thresholds: RequirementThresholds = RequirementThresholds()) -> RequirementReport:
    """Score the four phase-stiffness requirements from logged actions only.

    1. reach with low translational stiffness
    2. transport with high translational stiffness
    3. align with low translational stiffness
    4. insert with high translational and low rotational stiffness

    A missing phase marks its requirement incomplete (and unsatisfied), not
    an error: a short episode is a fact, not a crash.
    """
    _, records = read_episode(path)
    checks = []

    reach = _phase_stats(records, "reach")
    checks.append(
        RequirementCheck(
            1,
            "low translational stiffness while reaching",
            satisfied=reach["n"] > 0 and reach["mean_kt"] < thresholds.kt_low,
            complete=reach["n"] > 0,
            stats=reach,
        )
    )
    transport = _phase_stats(records, "transport")
    checks.append(
        RequirementCheck(
            2,
            "high translational stiffness while carrying",
            satisfied=transport["n"] > 0 and transport["mean_kt"] > thresholds.kt_high,
            complete=transport["n"] > 0,
            stats=transport,
        )
    )
    align = _phase_stats(records, "align")
    checks.append(
        RequirementCheck(
            3,
            "low translational stiffness while aligning",
            satisfied=align["n"] > 0 and align["mean_kt"] < thresholds.kt_low,
            complete=align["n"] > 0,
            stats=align,
        )
    )
    insert = _phase_stats(records, "insert")
    checks.append(
        RequirementCheck(
            4,
            "high translational, low rotational stiffness while inserting",
            satisfied=insert["n"] > 0
            and insert["mean_kt"] > thresholds.kt_high
            and insert["mean_kr"] < thresholds.kr_low,
            complete=insert["n"] > 0,
            stats=insert,
        )
    )
    return RequirementReport(checks=checks)
