"""Two-channel impedance commands: pressure in, stiffness/damping pair out.

Normalized button pressure maps affinely onto a bounded stiffness range, one
channel for translation and one for rotation. Damping always follows the
double-diagonalization rule d = 2 * 0.707 * sqrt(k), so every command the
rest of the system ever sees satisfies that closure exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

DAMPING_COEFF = 2.0 * 0.707  # fixed design ratio, not a tunable


def _clamp01(x: float) -> float:
    return 0.0 if x < 0.0 else (1.0 if x > 1.0 else float(x))


@dataclass(frozen=True)
class PressurePair:
    """Normalized button pressures, clamped to [0, 1] on construction."""

    translational: float = 0.0
    rotational: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "translational", _clamp01(self.translational))
        object.__setattr__(self, "rotational", _clamp01(self.rotational))


@dataclass(frozen=True)
class ImpedanceProfile:
    """Stiffness bounds (N/m, N*m/rad) and slew rates per channel."""

    kt_min: float = 100.0
    kt_max: float = 2000.0
    kr_min: float = 5.0
    kr_max: float = 150.0
    slew_t: float = 2000.0
    slew_r: float = 150.0

    def __post_init__(self):
        if not (0.0 <= self.kt_min < self.kt_max):
            raise ValueError(f"bad translational bounds [{self.kt_min}, {self.kt_max}]")
        if not (0.0 <= self.kr_min < self.kr_max):
            raise ValueError(f"bad rotational bounds [{self.kr_min}, {self.kr_max}]")
        if self.slew_t <= 0.0 or self.slew_r <= 0.0:
            raise ValueError("slew rates must be positive")

    def to_dict(self) -> dict:
        return {
            "kt_min": self.kt_min,
            "kt_max": self.kt_max,
            "kr_min": self.kr_min,
            "kr_max": self.kr_max,
            "slew_t": self.slew_t,
            "slew_r": self.slew_r,
        }

    @staticmethod
    def from_dict(d: dict) -> "ImpedanceProfile":
        return ImpedanceProfile(**{k: float(v) for k, v in d.items()})


@dataclass(frozen=True)
class ImpedanceCommand:
    """Diagonal 6x6 stiffness/damping pair, two scalar channels expanded."""

    k_t: float
    k_r: float
    k_diag: tuple
    d_diag: tuple

    def to_dict(self) -> dict:
        return {"kt": self.k_t, "kr": self.k_r}


def pressure_to_stiffness(p: PressurePair, profile: ImpedanceProfile) -> tuple:
    """Affine map: zero pressure hits the lower bound, full pressure the upper."""
    k_t = profile.kt_min + p.translational * (profile.kt_max - profile.kt_min)
    k_r = profile.kr_min + p.rotational * (profile.kr_max - profile.kr_min)
    return k_t, k_r


def damping_from_stiffness(k_diag) -> tuple:
    """d = 2 * 0.707 * sqrt(k), elementwise."""
    out = []
    for k in k_diag:
        if k < 0.0:
            raise ValueError(f"negative stiffness {k}")
        out.append(DAMPING_COEFF * math.sqrt(k))
    return tuple(out)


def expand(k_t: float, k_r: float, profile: ImpedanceProfile) -> ImpedanceCommand:
    """Two scalars to the 6-vector pair; rejects out-of-bounds stiffness."""
    tol = 1e-9
    if not (profile.kt_min - tol <= k_t <= profile.kt_max + tol):
        raise ValueError(f"k_t={k_t} outside [{profile.kt_min}, {profile.kt_max}]")
    if not (profile.kr_min - tol <= k_r <= profile.kr_max + tol):
        raise ValueError(f"k_r={k_r} outside [{profile.kr_min}, {profile.kr_max}]")
    k_diag = (k_t, k_t, k_t, k_r, k_r, k_r)
    return ImpedanceCommand(k_t=float(k_t), k_r=float(k_r), k_diag=k_diag, d_diag=damping_from_stiffness(k_diag))


def _toward(current: float, target: float, max_step: float) -> float:
    if target > current:
        return min(target, current + max_step)
    return max(target, current - max_step)


def slew_limit(prev: ImpedanceCommand, target: tuple, dt: float, profile: ImpedanceProfile) -> ImpedanceCommand:
    """Move toward the target stiffness at the profile slew rate, no overshoot.

    Damping is recomputed from the limited stiffness, so the closure
    d = 2 * 0.707 * sqrt(k) survives every step of a gain schedule.
    """
    if dt <= 0.0:
        raise ValueError(f"dt must be positive, got {dt}")
    target_t = min(max(target[0], profile.kt_min), profile.kt_max)
    target_r = min(max(target[1], profile.kr_min), profile.kr_max)
    k_t = _toward(prev.k_t, target_t, profile.slew_t * dt)
    k_r = _toward(prev.k_r, target_r, profile.slew_r * dt)
    return expand(k_t, k_r, profile)
