"""
Odometry, detection and alignment-error models.

Every sampler takes an explicit numpy Generator; the runner hands each robot
its own substream so draws never depend on iteration order across robots.
"""
from __future__ import annotations

import math
from typing import List, Sequence, Tuple

import numpy as np

from geometry.transforms import Pose2, inverse, transform_point
from geometry.uncertainty import compose_with_covariance, propagate_into_local
from registration.landmark_maps import LandmarkMap
from simulation.scenario import DetectionNoise, FieldOfView, LandmarkNoise, OdometryNoise
from tracking.tracks import Measurement

HEADING_ERROR_DEG_PER_M = 8.12

# Measurement covariances never go below this, so information-form
# conversion stays defined for noiseless sensors.
MIN_MEASUREMENT_SIGMA_M = 1e-3

STILL_TOLERANCE = 1e-12


def step_odometry(estimate: Pose2, cov: np.ndarray, true_increment: Pose2, noise: OdometryNoise,
                  rng: np.random.Generator) -> Tuple[Pose2, np.ndarray]:
    """
    Integrate one body-frame motion increment into the estimated pose.

    A robot that does not move accumulates neither noise nor covariance.
    """
    if max(abs(true_increment.x), abs(true_increment.y), abs(true_increment.theta)) < STILL_TOLERANCE:
        return estimate, cov
    dx, dy = rng.normal(0.0, noise.sigma_v, size=2) if noise.sigma_v > 0 else (0.0, 0.0)
    dtheta = rng.normal(0.0, noise.sigma_omega) if noise.sigma_omega > 0 else 0.0
    noisy = Pose2(true_increment.x + dx, true_increment.y + dy, true_increment.theta + dtheta)
    increment_cov = np.diag([noise.sigma_v ** 2, noise.sigma_v ** 2, noise.sigma_omega ** 2])
    return compose_with_covariance(estimate, cov, noisy, increment_cov)


def body_position(pose: Pose2, point) -> np.ndarray:
    return transform_point(inverse(pose), point)


def in_field_of_view(pose: Pose2, fov: FieldOfView, point) -> bool:
    relative = body_position(pose, point)
    distance = math.hypot(relative[0], relative[1])
    if distance > fov.range_m:
        return False
    return distance == 0 or abs(math.atan2(relative[1], relative[0])) <= fov.half_angle_rad


def sample_wedge(fov: FieldOfView, rng: np.random.Generator) -> np.ndarray:
    """A point uniform by area over the field-of-view wedge, in the body frame"""
    r = fov.range_m * math.sqrt(rng.random())
    bearing = rng.uniform(-fov.half_angle_rad, fov.half_angle_rad)
    return np.array([r * math.cos(bearing), r * math.sin(bearing)])


def detect_pedestrians(true_pose: Pose2, estimate: Pose2, estimate_cov: np.ndarray, fov: FieldOfView,
                       positions: Sequence, noise: DetectionNoise, rng: np.random.Generator,
                       frame: int = 0, source: int = 0) -> List[Measurement]:
    """
    Noisy detections of the visible pedestrians plus Poisson clutter.

    Body-frame detections are mapped into the robot's local frame through its
    estimated pose, so odometric drift shows up in the measurements and the
    pose covariance inflates their covariance.
    """
    sigma = max(noise.sigma_z_m, MIN_MEASUREMENT_SIGMA_M)
    body_cov = sigma ** 2 * np.eye(2)
    bodies = []
    for position in positions:
        if not in_field_of_view(true_pose, fov, position):
            continue
        if rng.random() >= noise.p_detect:
            continue
        z = body_position(true_pose, position)
        if noise.sigma_z_m > 0:
            z = z + rng.normal(0.0, noise.sigma_z_m, size=2)
        bodies.append(z)

    clutter = rng.poisson(noise.clutter_rate) if noise.clutter_rate > 0 else 0
    bodies.extend(sample_wedge(fov, rng) for _ in range(clutter))

    measurements = []
    for z in bodies:
        pos, cov = propagate_into_local(estimate, estimate_cov, z, body_cov)
        measurements.append(Measurement(pos, cov, frame, source))
    return measurements


def detect_landmarks(true_pose: Pose2, estimate: Pose2, fov: FieldOfView, landmarks: Sequence,
                     noise: LandmarkNoise, rng: np.random.Generator, landmark_map: LandmarkMap,
                     frame: int, merge_radius: float) -> int:
    """Merge this frame's landmark detections into landmark_map; returns how many were seen"""
    seen = 0
    for landmark in landmarks:
        if not in_field_of_view(true_pose, fov, landmark):
            continue
        if rng.random() >= noise.p_detect:
            continue
        z = body_position(true_pose, landmark)
        if noise.sigma_l_m > 0:
            z = z + rng.normal(0.0, noise.sigma_l_m, size=2)
        landmark_map.observe(transform_point(estimate, z), frame, merge_radius)
        seen += 1
    return seen


def heading_sigma_rad(sigma_t_m: float) -> float:
    return math.radians(HEADING_ERROR_DEG_PER_M) * sigma_t_m


def inject_alignment_error(sigma_t_m: float, rng: np.random.Generator) -> Pose2:
    """
    T_error with heading ~ N(0, σ_θ) and a translation of magnitude |N(0, σ_t)| in a uniform direction.

    σ_θ is 8.12 degrees per meter of σ_t.
    """
    if sigma_t_m < 0:
        raise ValueError('sigma_t_m must be non-negative')
    if sigma_t_m == 0:
        return Pose2.identity()
    theta = rng.normal(0.0, heading_sigma_rad(sigma_t_m))
    magnitude = abs(rng.normal(0.0, sigma_t_m))
    direction = rng.uniform(0.0, 2.0 * math.pi)
    return Pose2(magnitude * math.cos(direction), magnitude * math.sin(direction), theta)
