"""Fiducial-face pose fusion for the tracked hand-held interface.

Each marker face yields a camera-frame pose estimate. Per-face estimates are
chained into world-frame interface poses, weighted by how directly the face
points at the camera (cosine similarity between the view ray and the face
normal), gated by a threshold that rejects the grazing-angle observations
where planar-pose ambiguity lives, and averaged.

A synthetic observation generator stands in for the camera and detector so
the whole chain runs headless and deterministically.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .se3 import (
    Pose,
    compose,
    invert,
    quat_from_matrix,
    quat_from_rotvec,
    quat_mul,
    weighted_pose_mean,
)

# gate angle of 50 degrees between view ray and face normal
ALPHA_THRESHOLD_DEFAULT = math.cos(math.radians(50.0))

CUBE_SIZE_DEFAULT = 0.060  # m, marker cube edge
STEM_OFFSET_DEFAULT = 0.110  # m, grasp point to cube center along interface z


class DegenerateObservationError(ValueError):
    """Observation position coincides with the camera origin."""


class UnknownMarkerError(KeyError):
    """Observation names a marker id absent from the polyhedron geometry."""


class NoPoseYetError(RuntimeError):
    """Tracker asked for a pose before any fusion ever succeeded."""


@dataclass(frozen=True)
class MarkerObservation:
    """One detected face: camera-frame pose, identity, timestamp (s)."""

    marker_id: int
    pose_camera: Pose
    timestamp: float


@dataclass(frozen=True)
class NoiseSpec:
    """Synthetic detector noise model.

    pos_sigma is the per-axis standard deviation (m) of Gaussian position
    noise; rot_sigma is the standard deviation (rad) of a Gaussian rotation
    angle applied about a uniformly random axis. Faces whose true cosine
    weight falls inside flip_alpha_band additionally suffer the planar-pose
    ambiguity flip (face normal mirrored across the view ray) with
    flip_probability.
    """

    pos_sigma: float = 0.0
    rot_sigma: float = 0.0
    flip_probability: float = 0.0
    flip_alpha_band: tuple = (0.0, ALPHA_THRESHOLD_DEFAULT)


def _cube_face_transforms(size: float, stem_offset: float) -> dict:
    """Marker-to-interface transforms for the 5 exposed faces of the cube.

    The cube sits on a stem: cube center at (0, 0, stem_offset) in the
    interface frame, axes aligned. Marker z points out of each face; side
    markers keep their y axis along the interface z so the layout is fixed.
    Face ids: 1 top (+z), 2 (+x), 3 (-x), 4 (+y), 5 (-y).
    """
    half = 0.5 * size
    center = np.array([0.0, 0.0, stem_offset])
    normals = {
        1: np.array([0.0, 0.0, 1.0]),
        2: np.array([1.0, 0.0, 0.0]),
        3: np.array([-1.0, 0.0, 0.0]),
        4: np.array([0.0, 1.0, 0.0]),
        5: np.array([0.0, -1.0, 0.0]),
    }
    z_cube = np.array([0.0, 0.0, 1.0])
    faces = {}
    for marker_id, n in normals.items():
        if marker_id == 1:
            r = np.eye(3)
        else:
            x_m = np.cross(z_cube, n)
            r = np.column_stack([x_m, z_cube, n])
        marker_in_interface = Pose(center + half * n, quat_from_matrix(r))
        faces[marker_id] = invert(marker_in_interface)
    return faces


@dataclass
class PolyhedronGeometry:
    """Constant interface-in-marker transforms, one per marker face."""

    face_transforms: dict = field(
        default_factory=lambda: _cube_face_transforms(CUBE_SIZE_DEFAULT, STEM_OFFSET_DEFAULT)
    )

    def __post_init__(self):
        if len(self.face_transforms) < 1:
            raise ValueError("geometry needs at least one face")

    @property
    def n(self) -> int:
        return len(self.face_transforms)

    @staticmethod
    def cube(size: float = CUBE_SIZE_DEFAULT, stem_offset: float = STEM_OFFSET_DEFAULT) -> "PolyhedronGeometry":
        return PolyhedronGeometry(_cube_face_transforms(size, stem_offset))


@dataclass
class TrackerConfig:
    camera_in_world: Pose = field(default_factory=Pose.identity)
    alpha_thr: float = ALPHA_THRESHOLD_DEFAULT
    stale_timeout: float = 0.5

    def __post_init__(self):
        if not 0.0 < self.alpha_thr < 1.0:
            raise ValueError(f"alpha_thr must lie in (0, 1), got {self.alpha_thr}")
        if self.stale_timeout <= 0.0:
            raise ValueError("stale_timeout must be positive")


@dataclass(frozen=True)
class TrackedPose:
    pose_world: Pose
    weight_sum: float
    n_used: int
    stale: bool
    timestamp: float


def cosine_weight(obs: MarkerObservation) -> float:
    """Reliability weight: cosine between the camera->marker ray and -face normal.

    1.0 when the face points straight back at the camera, 0 when edge-on,
    negative when back-facing. Returned unclamped; gating handles the rest.
    """
    p = obs.pose_camera.position
    p_norm = float(np.linalg.norm(p))
    if p_norm < 1e-12:
        raise DegenerateObservationError("marker position coincides with camera origin")
    e_z = obs.pose_camera.rotation()[:, 2]
    return float(np.dot(-e_z, p) / (np.linalg.norm(e_z) * p_norm))


def marker_world_estimate(obs: MarkerObservation, geom: PolyhedronGeometry, cfg: TrackerConfig) -> Pose:
    """World-frame interface pose implied by a single face observation."""
    try:
        face = geom.face_transforms[obs.marker_id]
    except KeyError:
        raise UnknownMarkerError(f"marker id {obs.marker_id} not in geometry") from None
    return compose(cfg.camera_in_world, compose(obs.pose_camera, face))


def fuse(observations, geom: PolyhedronGeometry, cfg: TrackerConfig):
    """Gate by alpha threshold and average the surviving world estimates.

    Returns None when nothing survives the gate; a single survivor passes
    through exactly (no renormalization drift).
    """
    used = []
    weights = []
    timestamp = 0.0
    for obs in observations:
        alpha = cosine_weight(obs)
        if alpha <= cfg.alpha_thr:
            continue
        used.append(marker_world_estimate(obs, geom, cfg))
        weights.append(alpha)
        timestamp = obs.timestamp
    if not used:
        return None
    mean = weighted_pose_mean(used, weights)
    return TrackedPose(
        pose_world=mean,
        weight_sum=float(sum(weights)),
        n_used=len(used),
        stale=False,
        timestamp=timestamp,
    )


class MarkerTracker:
    """Single-owner fusion state: holds the last pose through dropouts.

    When fusion fails, the previous pose is returned unchanged; it is only
    flagged stale once the dropout outlives cfg.stale_timeout.
    """

    def __init__(self, geom: PolyhedronGeometry | None = None, cfg: TrackerConfig | None = None):
        self.geom = geom if geom is not None else PolyhedronGeometry()
        self.cfg = cfg if cfg is not None else TrackerConfig()
        self._last: TrackedPose | None = None

    @property
    def last(self) -> TrackedPose | None:
        return self._last

    def step(self, observations, now: float) -> TrackedPose:
        fused = fuse(observations, self.geom, self.cfg)
        if fused is not None:
            fused = TrackedPose(fused.pose_world, fused.weight_sum, fused.n_used, False, now)
            self._last = fused
            return fused
        if self._last is None:
            raise NoPoseYetError("no fusion has succeeded yet")
        stale = (now - self._last.timestamp) > self.cfg.stale_timeout
        if stale != self._last.stale:
            self._last = TrackedPose(
                self._last.pose_world,
                self._last.weight_sum,
                self._last.n_used,
                stale,
                self._last.timestamp,
            )
        return self._last


def _reflect_across_ray(q_obs: np.ndarray, position: np.ndarray) -> np.ndarray:
    """Planar-ambiguity flip: mirror the face normal across the view ray."""
    from .se3 import quat_to_matrix

    r = quat_to_matrix(q_obs)
    e_z = r[:, 2]
    v = position / np.linalg.norm(position)
    e_flip = 2.0 * float(np.dot(e_z, v)) * v - e_z
    axis = np.cross(e_z, e_flip)
    s = float(np.linalg.norm(axis))
    if s < 1e-12:
        return q_obs  # normal already along the ray; flip is identity
    angle = math.atan2(s, float(np.dot(e_z, e_flip)))
    return quat_mul(quat_from_rotvec(axis / s * angle), q_obs)


def synth_observe(
    true_interface_pose: Pose,
    geom: PolyhedronGeometry,
    cfg: TrackerConfig,
    noise: NoiseSpec = NoiseSpec(),
    rng_seed: int = 0,
    timestamp: float = 0.0,
):
    """Generate per-face camera observations from a known interface pose.

    Inverts the world chain exactly for every face whose true cosine weight
    is positive, then applies the ambiguity flip (band-gated, probabilistic)
    and Gaussian noise. Same seed and inputs give bit-identical output; every
    face consumes a fixed number of draws, so paired runs that differ only in
    flip_probability see identical noise.
    """
    rng = np.random.default_rng(rng_seed)
    camera_from_world = invert(cfg.camera_in_world)
    out = []
    band_lo, band_hi = noise.flip_alpha_band
    for marker_id in sorted(geom.face_transforms):
        exact = compose(
            camera_from_world,
            compose(true_interface_pose, invert(geom.face_transforms[marker_id])),
        )
        alpha_true = cosine_weight(MarkerObservation(marker_id, exact, timestamp))
        if alpha_true <= 0.0:
            continue
        d_pos = rng.normal(0.0, noise.pos_sigma, 3)
        axis = rng.normal(size=3)
        angle = rng.normal(0.0, noise.rot_sigma)
        flip_draw = rng.uniform()
        q = exact.orientation
        if flip_draw < noise.flip_probability and band_lo < alpha_true <= band_hi:
            q = _reflect_across_ray(q, exact.position)
        if angle != 0.0:
            n = float(np.linalg.norm(axis))
            if n > 1e-12:
                q = quat_mul(quat_from_rotvec(axis * (angle / n)), q)
        out.append(
            MarkerObservation(marker_id, Pose(exact.position + d_pos, q), timestamp)
        )
    return out


# ---------------------------------------------------------------------------
# observation log fixtures: one record per line {"t":...,"id":...,"p":...,"q":...}
# ---------------------------------------------------------------------------

def observation_to_record(obs: MarkerObservation) -> dict:
    d = obs.pose_camera.to_dict()
    return {"t": obs.timestamp, "id": obs.marker_id, "p": d["p"], "q": d["q"]}


def observation_from_record(rec: dict) -> MarkerObservation:
    return MarkerObservation(
        marker_id=int(rec["id"]),
        pose_camera=Pose.from_dict({"p": rec["p"], "q": rec["q"]}),
        timestamp=float(rec["t"]),
    )


def write_observation_log(path, observations) -> None:
    from .serde import canonical_dumps

    with open(path, "w", encoding="utf-8") as f:
        for obs in observations:
            f.write(canonical_dumps(observation_to_record(obs)))
            f.write("\n")


def read_observation_log(path):
    out = []
    with open(path, "r", encoding="utf-8") as f:
        for line in f:
            line = line.strip()
            if line:
                out.append(observation_from_record(json.loads(line)))
    return out
