"""
Scripted motion of robots and pedestrians.
"""
from __future__ import annotations

import math
from typing import Sequence

import numpy as np

from geometry.transforms import Pose2
from simulation.scenario import (
    CIRCULAR_PATH, STATIC_PATH, WAYPOINT_PATH, PedestrianSpec, RobotSpec,
)


def loop_position(waypoints: Sequence, speed_mps: float, t: float) -> np.ndarray:
    """Position after t seconds on the closed polyline through waypoints at constant speed"""
    points = np.asarray(waypoints, dtype=float).reshape(-1, 2)
    if len(points) == 1 or speed_mps == 0:
        return points[0].copy()
    closed = np.vstack([points, points[:1]])
    lengths = np.linalg.norm(np.diff(closed, axis=0), axis=1)
    total = float(lengths.sum())
    if total == 0:
        return points[0].copy()
    s = math.fmod(speed_mps * t, total)
    for start, end, length in zip(closed[:-1], closed[1:], lengths):
        if s <= length and length > 0:
            return start + (end - start) * (s / length)
        s -= length
    return closed[-1].copy()


def loop_heading(waypoints: Sequence, speed_mps: float, t: float, dt: float = 1e-3) -> float:
    ahead = loop_position(waypoints, speed_mps, t + dt)
    here = loop_position(waypoints, speed_mps, t)
    delta = ahead - here
    return math.atan2(delta[1], delta[0])


def circle_phase(robot: RobotSpec) -> float:
    cx, cy = robot.trajectory.center
    return math.atan2(robot.initial.y - cy, robot.initial.x - cx)


def robot_pose(robot: RobotSpec, t: float) -> Pose2:
    """
    True pose at time t.

    Circular paths keep the heading offset the initial pose has relative to
    the radius direction; waypoint paths face the direction of travel.
    """
    path = robot.trajectory
    if path.kind == STATIC_PATH:
        return robot.initial
    if path.kind == CIRCULAR_PATH:
        phase0 = circle_phase(robot)
        phase = phase0 + path.angular_rate * t
        cx, cy = path.center
        heading = robot.initial.theta + (phase - phase0)
        return Pose2(cx + path.radius * math.cos(phase), cy + path.radius * math.sin(phase), heading)
    if path.kind == WAYPOINT_PATH:
        position = loop_position(path.waypoints, path.speed_mps, t)
        return Pose2(position[0], position[1], loop_heading(path.waypoints, path.speed_mps, t))
    raise ValueError(f'unknown trajectory kind "{path.kind}"')


def pedestrian_position(pedestrian: PedestrianSpec, t: float) -> np.ndarray:
    return loop_position(pedestrian.waypoints, pedestrian.speed_mps, t)
