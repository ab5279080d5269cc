"""Desk-scale tele-impedance teleoperation suite.

Marker-fused interface tracking, two-channel impedance commands with
derived damping, clutched and scaled leader-follower control, a
Cartesian-impedance peg-in-hole simulator, demonstration episode logging
with deterministic replay, and a WebSocket/TCP operator gateway.
"""

from .se3 import (
    DegenerateWeightsError,
    Pose,
    Twist,
    Wrench,
    compose,
    invert,
    orientation_error,
    weighted_pose_mean,
)
from .markers import (
    ALPHA_THRESHOLD_DEFAULT,
    MarkerObservation,
    MarkerTracker,
    NoiseSpec,
    PolyhedronGeometry,
    TrackedPose,
    TrackerConfig,
    cosine_weight,
    fuse,
    marker_world_estimate,
    synth_observe,
)
from .impedance import (
    ImpedanceCommand,
    ImpedanceProfile,
    PressurePair,
    damping_from_stiffness,
    expand,
    pressure_to_stiffness,
    slew_limit,
)
from .teleop import (
    ClutchState,
    HapticCue,
    ScaleFactor,
    StalePoseError,
    TeleopPipeline,
    engage,
    disengage,
    gripper_toggle,
    map_leader_to_goal,
    vibro_amplitude,
)
from .sim import (
    BodyState,
    EpisodeStatus,
    SceneConfig,
    World,
    check_success,
    contact_wrench,
    impedance_wrench,
)
from .episodes import (
    EpisodeHeader,
    EpisodeWriter,
    RequirementReport,
    RequirementThresholds,
    StepRecord,
    check_requirements,
    read_episode,
    replay,
    validate,
)
from .session import CommandQueue, Session, SessionConfig, load_scenario, save_scenario
from .scripts import OperatorScript, peg_in_hole_script, run_script

__version__ = "0.1.0"
