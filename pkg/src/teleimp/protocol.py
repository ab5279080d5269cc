"""Operator wire protocol: one JSON object per text frame, tagged by "type".

Client to server: pose samples, button pressures, gripper/teleop toggles,
scale setting. Server to client: telemetry snapshots, stiffness bar
fractions, haptic amplitude, errors. Decoding clamps out-of-range values and
reports what it clamped instead of rejecting, so a slightly out-of-spec
console degrades gracefully; structurally broken frames raise.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, fields

from .serde import canonical_dumps


class ProtocolError(ValueError):
    """Frame cannot be decoded: unknown tag, missing field, or malformed JSON."""


# ---------------------------------------------------------------------------
# client messages
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PoseSample:
    t: float
    p: tuple
    q: tuple
    type: str = field(default="pose_sample", init=False)


@dataclass(frozen=True)
class FsrSample:
    t: float
    pt: float
    pr: float
    type: str = field(default="fsr", init=False)


@dataclass(frozen=True)
class GripperToggle:
    type: str = field(default="gripper_toggle", init=False)


@dataclass(frozen=True)
class TeleopToggle:
    type: str = field(default="teleop_toggle", init=False)


@dataclass(frozen=True)
class ScaleSet:
    s: float
    type: str = field(default="scale_set", init=False)


# ---------------------------------------------------------------------------
# server messages
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Telemetry:
    t: float
    ee_pose: dict
    goal_pose: dict
    kt: float
    kr: float
    ext_force_norm: float
    phase: str
    success: bool
    stale: bool
    # task-object poses feed the console's schematic scene view
    peg_pose: dict | None = None
    hole_pose: dict | None = None
    type: str = field(default="telemetry", init=False)


@dataclass(frozen=True)
class Haptic:
    amplitude: float
    type: str = field(default="haptic", init=False)


@dataclass(frozen=True)
class Bars:
    kt_frac: float
    kr_frac: float
    type: str = field(default="bars", init=False)


@dataclass(frozen=True)
class ErrorMsg:
    code: str
    detail: str
    type: str = field(default="error", init=False)


CLIENT_TYPES = {
    "pose_sample": PoseSample,
    "fsr": FsrSample,
    "gripper_toggle": GripperToggle,
    "teleop_toggle": TeleopToggle,
    "scale_set": ScaleSet,
}

SERVER_TYPES = {
    "telemetry": Telemetry,
    "haptic": Haptic,
    "bars": Bars,
    "error": ErrorMsg,
}

SCALE_MIN, SCALE_MAX = 0.1, 2.0


@dataclass
class DecodeResult:
    message: object
    warnings: list = field(default_factory=list)


def encode(msg) -> str:
    """Message to one canonical text frame (no trailing newline)."""
    d = {}
    for f in fields(msg):
        v = getattr(msg, f.name)
        if isinstance(v, tuple):
            v = list(v)
        d[f.name] = v
    return canonical_dumps(d)


def _need(obj: dict, key: str, kind: str):
    if key not in obj:
        raise ProtocolError(f"{kind} message missing required field {key!r}")
    return obj[key]


def _number(obj: dict, key: str, kind: str) -> float:
    v = _need(obj, key, kind)
    if not isinstance(v, (int, float)) or isinstance(v, bool) or not math.isfinite(v):
        raise ProtocolError(f"field {key!r} of {kind} must be a finite number, got {v!r}")
    return float(v)


def _vector(obj: dict, key: str, kind: str, size: int) -> tuple:
    v = _need(obj, key, kind)
    if not isinstance(v, list) or len(v) != size:
        raise ProtocolError(f"field {key!r} of {kind} must be a {size}-element array")
    out = []
    for x in v:
        if not isinstance(x, (int, float)) or isinstance(x, bool) or not math.isfinite(x):
            raise ProtocolError(f"field {key!r} of {kind} has a non-finite element")
        out.append(float(x))
    return tuple(out)


def _clamp(value: float, lo: float, hi: float, name: str, warnings: list) -> float:
    if value < lo or value > hi:
        clamped = min(max(value, lo), hi)
        warnings.append(f"{name}={value:g} clamped to {clamped:g}")
        return clamped
    return value


def decode(frame: str, side: str = "client") -> DecodeResult:
    """One text frame to a typed message plus clamping warnings.

    side selects the tag table ("client" for operator->server traffic,
    "server" for the reverse), since both directions share the wire format.
    """
    try:
        obj = json.loads(frame)
    except json.JSONDecodeError as e:
        raise ProtocolError(f"malformed frame: {e}") from None
    if not isinstance(obj, dict):
        raise ProtocolError("frame is not a JSON object")
    tag = obj.get("type")
    table = CLIENT_TYPES if side == "client" else SERVER_TYPES
    if tag not in table:
        raise ProtocolError(f"unknown message type {tag!r}")

    warnings: list[str] = []
    if tag == "pose_sample":
        q = _vector(obj, "q", tag, 4)
        n = math.sqrt(sum(v * v for v in q))
        if n < 1e-9:
            raise ProtocolError("field 'q' of pose_sample has zero norm")
        if abs(n - 1.0) > 1e-6:
            warnings.append(f"q norm {n:g} renormalized")
            q = tuple(v / n for v in q)
        msg = PoseSample(t=_number(obj, "t", tag), p=_vector(obj, "p", tag, 3), q=q)
    elif tag == "fsr":
        msg = FsrSample(
            t=_number(obj, "t", tag),
            pt=_clamp(_number(obj, "pt", tag), 0.0, 1.0, "pt", warnings),
            pr=_clamp(_number(obj, "pr", tag), 0.0, 1.0, "pr", warnings),
        )
    elif tag == "gripper_toggle":
        msg = GripperToggle()
    elif tag == "teleop_toggle":
        msg = TeleopToggle()
    elif tag == "scale_set":
        msg = ScaleSet(s=_clamp(_number(obj, "s", tag), SCALE_MIN, SCALE_MAX, "s", warnings))
    elif tag == "telemetry":
        msg = Telemetry(
            t=_number(obj, "t", tag),
            ee_pose=_pose_dict(obj, "ee_pose", tag),
            goal_pose=_pose_dict(obj, "goal_pose", tag),
            kt=_number(obj, "kt", tag),
            kr=_number(obj, "kr", tag),
            ext_force_norm=_number(obj, "ext_force_norm", tag),
            phase=str(_need(obj, "phase", tag)),
            success=bool(_need(obj, "success", tag)),
            stale=bool(_need(obj, "stale", tag)),
            peg_pose=_pose_dict(obj, "peg_pose", tag) if obj.get("peg_pose") is not None else None,
            hole_pose=_pose_dict(obj, "hole_pose", tag) if obj.get("hole_pose") is not None else None,
        )
    elif tag == "haptic":
        msg = Haptic(amplitude=_clamp(_number(obj, "amplitude", tag), 0.0, 1.0, "amplitude", warnings))
    elif tag == "bars":
        msg = Bars(
            kt_frac=_clamp(_number(obj, "kt_frac", tag), 0.0, 1.0, "kt_frac", warnings),
            kr_frac=_clamp(_number(obj, "kr_frac", tag), 0.0, 1.0, "kr_frac", warnings),
        )
    else:  # error
        msg = ErrorMsg(code=str(_need(obj, "code", tag)), detail=str(obj.get("detail", "")))
    return DecodeResult(message=msg, warnings=warnings)


def _pose_dict(obj: dict, key: str, kind: str) -> dict:
    v = _need(obj, key, kind)
    if not isinstance(v, dict):
        raise ProtocolError(f"field {key!r} of {kind} must be an object")
    p = v.get("p")
    q = v.get("q")
    if not (isinstance(p, list) and len(p) == 3 and isinstance(q, list) and len(q) == 4):
        raise ProtocolError(f"field {key!r} of {kind} must hold p[3] and q[4]")
    return {"p": [float(x) for x in p], "q": [float(x) for x in q]}
