"""
Scenario configuration types.

Instances are built by simulation.serializers from YAML files and are
immutable; a ScenarioConfig together with its rng_seed fully determines a run.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Tuple

from geometry.transforms import Pose2

Point = Tuple[float, float]

STATIC_PATH = 'static'
CIRCULAR_PATH = 'circular'
WAYPOINT_PATH = 'waypoints'

REALIGN_OFF = 'off'
REALIGN_STATIC = 'static'
REALIGN_DYNAMIC = 'dynamic'
REALIGN_AUTO = 'auto'
REALIGN_MODES = (REALIGN_OFF, REALIGN_STATIC, REALIGN_DYNAMIC, REALIGN_AUTO)


@dataclass(frozen=True)
class Arena:
    width_m: float = 10.0
    height_m: float = 10.0

    def contains(self, point, margin: float = 1e-9) -> bool:
        x, y = point
        return -margin <= x <= self.width_m + margin and -margin <= y <= self.height_m + margin


@dataclass(frozen=True)
class FieldOfView:
    range_m: float = 6.0
    half_angle_rad: float = math.pi / 4


@dataclass(frozen=True)
class Trajectory:
    kind: str = STATIC_PATH
    center: Point = (0.0, 0.0)
    radius: float = 0.0
    angular_rate: float = 0.0
    waypoints: Tuple[Point, ...] = ()
    speed_mps: float = 0.0


@dataclass(frozen=True)
class RobotSpec:
    initial: Pose2
    trajectory: Trajectory = Trajectory()
    fov: FieldOfView = FieldOfView()


@dataclass(frozen=True)
class PedestrianSpec:
    waypoints: Tuple[Point, ...]
    speed_mps: float = 1.0


@dataclass(frozen=True)
class OdometryNoise:
    sigma_v: float = 0.0
    sigma_omega: float = 0.0


@dataclass(frozen=True)
class DetectionNoise:
    sigma_z_m: float = 0.1
    p_detect: float = 0.95
    clutter_rate: float = 0.0


@dataclass(frozen=True)
class LandmarkNoise:
    sigma_l_m: float = 0.05
    p_detect: float = 0.9


@dataclass(frozen=True)
class NoiseConfig:
    odom: OdometryNoise = OdometryNoise()
    detection: DetectionNoise = DetectionNoise()
    landmark_detection: LandmarkNoise = LandmarkNoise()


@dataclass(frozen=True)
class ErrorInjection:
    sigma_t_m: float = 0.0


@dataclass(frozen=True)
class RealignConfig:
    mode: str = REALIGN_OFF
    tau_eta: int = 100
    window_frames: int = 50
    map_share_hz: float = 1.0
    reactive_gate: bool = False
    dynamic_weighting: str = 'uniform'
    min_correction_sigmas: float = 3.0
    merge_radius_m: float = 0.5
    reject_radius_m: float = 1.0
    icp_max_iter: int = 20
    icp_tol_m: float = 1e-4
    map_max_age_s: float = 20.0


@dataclass(frozen=True)
class TrackingConfig:
    tau_gate: float = 2.0
    initial_gate_scale: float = 1.0
    q: float = 0.5
    n_confirm: int = 3
    n_miss_max: int = 10
    max_speed_mps: float = 2.0
    alpha_t: float = 2.0
    alpha_theta: float = 10.0
    decay: float = 0.9
    c_t: float = 1.0
    c_theta: float = 1.0
    sigma_t0: float = 0.01
    sigma_theta0: float = 0.005
    consensus_gain_cap: Optional[float] = 1.0
    use_alignment_covariance: bool = True


@dataclass(frozen=True)
class LogConfig:
    timings: bool = False
    messages: bool = False


@dataclass(frozen=True)
class ScenarioConfig:
    robots: Tuple[RobotSpec, ...]
    name: str = 'scenario'
    arena: Arena = Arena()
    frame_rate_hz: float = 10.0
    duration_s: float = 60.0
    rng_seed: int = 0
    pedestrians: Tuple[PedestrianSpec, ...] = ()
    landmarks: Tuple[Point, ...] = ()
    noise: NoiseConfig = NoiseConfig()
    error_injection: Optional[ErrorInjection] = None
    realign: RealignConfig = RealignConfig()
    tracking: TrackingConfig = TrackingConfig()
    communication: Optional[Tuple[Tuple[int, int], ...]] = None
    ground_truth_localization: bool = False
    log: LogConfig = field(default_factory=LogConfig)

    @property
    def dt(self) -> float:
        return 1.0 / self.frame_rate_hz

    @property
    def frame_count(self) -> int:
        return int(round(self.duration_s * self.frame_rate_hz))
