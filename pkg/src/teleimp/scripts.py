"""Scripted operators: timed message sequences standing in for a human.

The bundled peg-in-hole script drives the default scene through its four
stiffness regimes: compliant reach, stiff transport, compliant alignment,
stiff-translation / soft-rotation insertion. Waypoints and gain levels are
computed from the scenario (sag compensation included), so the script adapts
to resized scenes as long as the peg starts upright below the gripper and
the hole points up.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .impedance import PressurePair, pressure_to_stiffness
from .protocol import (
    FsrSample,
    GripperToggle,
    PoseSample,
    ScaleSet,
    TeleopToggle,
    decode,
    encode,
)
from .se3 import Pose
from .session import Session, SessionConfig
from .sim import SUCCESS_DEPTH

COMMAND_PERIOD = 0.02  # s, 50 Hz operator pose stream
SCRIPT_TAIL = 0.8  # s of settling simulated after the last message


@dataclass
class OperatorScript:
    """Ordered (t, ClientMessage) pairs; timestamps must not decrease."""

    entries: list = field(default_factory=list)

    def __post_init__(self):
        last = -math.inf
        for t, _ in self.entries:
            if t < last:
                raise ValueError("script timestamps must be nondecreasing")
            last = t

    @property
    def duration(self) -> float:
        return self.entries[-1][0] if self.entries else 0.0

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as f:
            for t, msg in self.entries:
                f.write(json.dumps({"t": t, "msg": json.loads(encode(msg))}, sort_keys=True))
                f.write("\n")

    @staticmethod
    def load(path) -> "OperatorScript":
        entries = []
        with open(path, "r", encoding="utf-8") as f:
            for line in f:
                line = line.strip()
                if not line:
                    continue
                obj = json.loads(line)
                entries.append((float(obj["t"]), decode(json.dumps(obj["msg"])).message))
        return OperatorScript(entries)


# ---------------------------------------------------------------------------
# bundled peg-in-hole demonstration
# ---------------------------------------------------------------------------

# leader home: centered under the overhead camera, cube top facing it
LEADER_HOME = (0.0, 0.0, 0.2)

# pressure levels per regime
P_REACH = PressurePair(0.05, 0.10)
P_CARRY = PressurePair(0.95, 0.60)
P_ALIGN = PressurePair(0.05, 0.10)
P_INSERT = PressurePair(1.00, 0.02)


def peg_in_hole_script(cfg: SessionConfig) -> OperatorScript:
    """Build the demonstration script for the given scenario.

    Leader displacements equal desired end-effector goal displacements
    (scale 1, identity frame offset); vertical goals add the static sag
    m*g/k_t of the grasped peg so the actual height lands where intended.
    """
    scene = cfg.scene
    ee0 = scene.ee_start_pose.position
    peg0 = scene.peg_start_pose.position
    peg_len = scene.peg_dims[2]
    mouth = scene.hole_pose.position

    grasp_gap = 0.002  # ee closes this far above the peg top
    peg_top_z = peg0[2] + 0.5 * peg_len
    grasp_z = peg_top_z + grasp_gap
    ee_to_bottom = grasp_z - (peg0[2] - 0.5 * peg_len)  # ee height above peg bottom

    kt_align, _ = pressure_to_stiffness(P_ALIGN, cfg.profile)
    kt_insert, _ = pressure_to_stiffness(P_INSERT, cfg.profile)
    payload = scene.peg_mass * scene.gravity
    sag_align = payload / kt_align
    sag_insert = payload / kt_insert

    hover_bottom = mouth[2] + 0.020
    insert_depth = SUCCESS_DEPTH + 0.025
    transport_height = mouth[2] + 0.103 + ee_to_bottom  # hover just inside align range

    # ee goal waypoints: (time, x, y, z)
    wp = []

    def seg(t0, t1, a, b):
        wp.append((t0, np.asarray(a, dtype=float), t1, np.asarray(b, dtype=float)))

    start = ee0.copy()
    grasp = np.array([peg0[0], peg0[1], grasp_z])
    lift = np.array([peg0[0], peg0[1], transport_height])
    over = np.array([mouth[0], mouth[1], transport_height])
    hover = np.array([mouth[0], mouth[1], hover_bottom + ee_to_bottom + sag_align])
    seated = np.array([mouth[0], mouth[1], mouth[2] - insert_depth + ee_to_bottom + sag_insert])

    seg(0.30, 3.00, start, grasp)
    seg(3.00, 3.60, grasp, grasp)
    seg(3.70, 5.70, grasp, lift)
    seg(5.70, 9.20, lift, over)
    seg(9.20, 9.50, over, over)
    seg(9.50, 12.00, over, hover)
    seg(12.00, 14.00, hover, hover)
    seg(14.00, 15.20, hover, hover)
    seg(15.20, 17.70, hover, seated)
    seg(17.70, 19.20, seated, seated)

    def goal_at(t: float) -> np.ndarray:
        if t <= wp[0][0]:
            return wp[0][1]
        for t0, a, t1, b in wp:
            if t <= t1:
                if t <= t0:
                    return a
                u = (t - t0) / (t1 - t0) if t1 > t0 else 1.0
                return a + u * (b - a)
        return wp[-1][3]

    home = np.asarray(LEADER_HOME, dtype=float)
    entries: list = [
        (0.0, ScaleSet(s=1.0)),
        (0.0, FsrSample(t=0.0, pt=P_REACH.translational, pr=P_REACH.rotational)),
        (0.30, TeleopToggle()),
        (3.60, GripperToggle()),
        (3.70, FsrSample(t=3.70, pt=P_CARRY.translational, pr=P_CARRY.rotational)),
        (8.00, FsrSample(t=8.00, pt=P_ALIGN.translational, pr=P_ALIGN.rotational)),
        (14.00, FsrSample(t=14.00, pt=P_INSERT.translational, pr=P_INSERT.rotational)),
    ]
    t_end = wp[-1][2]
    n = int(round(t_end / COMMAND_PERIOD))
    for i in range(n + 1):
        t = round(i * COMMAND_PERIOD, 6)
        leader = home + (goal_at(t) - start)
        entries.append(
            (t, PoseSample(t=t, p=(float(leader[0]), float(leader[1]), float(leader[2])), q=(1.0, 0.0, 0.0, 0.0)))
        )
    entries.sort(key=lambda e: e[0])
    return OperatorScript(entries)


# ---------------------------------------------------------------------------
# deterministic headless runner
# ---------------------------------------------------------------------------

@dataclass
class ScriptResult:
    status: str  # "success" | "failure" | "timeout"
    episode_paths: list
    final_phase: str
    success: bool
    sim_time: float
    success_time: float | None = None
    final_depth: float = 0.0
    final_offset: float = 0.0
    final_tilt: float = 0.0

    @property
    def exit_code(self) -> int:
        return {"success": 0, "failure": 1, "timeout": 2}[self.status]


def run_script(script: OperatorScript, cfg: SessionConfig, out_path, cap: float | None = None) -> ScriptResult:
    """Inject script messages against the fixed-step clock and log the episode.

    Fully virtual time: the header wall-time is pinned to zero and episode ids
    derive from the config digest, so identical script+seed produce
    byte-identical files.
    """
    if cap is None:
        cap = cfg.episode_cap
    session = Session(
        cfg,
        out_path=out_path,
        wall_clock=lambda: 0.0,
        deterministic_ids=True,
    )
    dt = cfg.scene.dt
    entries = script.entries
    end_time = (entries[-1][0] + SCRIPT_TAIL) if entries else cap
    capped = end_time > cap or not entries
    end_time = min(end_time, cap)
    n_steps = int(round(end_time / dt))

    success_time = None
    idx = 0
    for step in range(n_steps):
        now = step * dt
        while idx < len(entries) and entries[idx][0] <= now + 1e-12:
            session.apply(entries[idx][1])
            idx += 1
        session.tick()
        if success_time is None and session.world.status.success:
            success_time = session.world.t
    session.close()

    success = session.world.status.success
    if success:
        status = "success"
    elif capped:
        status = "timeout"
    else:
        status = "failure"
    metrics = session.world.hole_metrics()
    return ScriptResult(
        status=status,
        episode_paths=list(session.episode_paths),
        final_phase=session.world.status.phase,
        success=success,
        sim_time=session.world.t,
        success_time=success_time,
        final_depth=metrics.depth,
        final_offset=metrics.offset,
        final_tilt=metrics.tilt,
    )
