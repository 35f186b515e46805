"""
SE(2) pose algebra shared by every frame-handling component.

Poses are immutable (x, y, theta) triples with theta kept in (-pi, pi].
Points are numpy arrays of shape (2,) or stacks of shape (N, 2).
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Tuple

import numpy as np

TWO_PI = 2.0 * math.pi


def normalize_angle(theta: float) -> float:
    """Wrap an angle into (-pi, pi]"""
    wrapped = math.remainder(float(theta), TWO_PI)
    if wrapped <= -math.pi:
        wrapped += TWO_PI
    return wrapped


def rotation_matrix(theta: float) -> np.ndarray:
    c, s = math.cos(theta), math.sin(theta)
    return np.array([[c, -s], [s, c]])


def rotation_derivative(theta: float) -> np.ndarray:
    """d Rot(theta) / d theta"""
    c, s = math.cos(theta), math.sin(theta)
    return np.array([[-s, -c], [c, -s]])


@dataclass(frozen=True)
class Pose2:
    """Rigid transform in the plane (translation in meters, heading in radians)"""
    x: float = 0.0
    y: float = 0.0
    theta: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, 'x', float(self.x))
        object.__setattr__(self, 'y', float(self.y))
        object.__setattr__(self, 'theta', normalize_angle(self.theta))

    @classmethod
    def identity(cls) -> 'Pose2':
        return cls(0.0, 0.0, 0.0)

    @classmethod
    def from_matrix(cls, matrix: np.ndarray) -> 'Pose2':
        """Build a pose from a 3x3 homogeneous matrix"""
        return cls(matrix[0, 2], matrix[1, 2], math.atan2(matrix[1, 0], matrix[0, 0]))

    @property
    def translation(self) -> np.ndarray:
        return np.array([self.x, self.y])

    @property
    def rotation(self) -> np.ndarray:
        return rotation_matrix(self.theta)

    def as_vector(self) -> np.ndarray:
        return np.array([self.x, self.y, self.theta])

    def as_matrix(self) -> np.ndarray:
        matrix = np.eye(3)
        matrix[:2, :2] = self.rotation
        matrix[:2, 2] = self.translation
        return matrix

    def __matmul__(self, other: 'Pose2') -> 'Pose2':
        return compose(self, other)


def compose(a: Pose2, b: Pose2) -> Pose2:
    """Head-to-tail composition a ⊕ b"""
    c, s = math.cos(a.theta), math.sin(a.theta)
    return Pose2(
        a.x + c * b.x - s * b.y,
        a.y + s * b.x + c * b.y,
        a.theta + b.theta,
    )


def inverse(a: Pose2) -> Pose2:
    c, s = math.cos(a.theta), math.sin(a.theta)
    return Pose2(
        -c * a.x - s * a.y,
        s * a.x - c * a.y,
        -a.theta,
    )


def between(a: Pose2, b: Pose2) -> Pose2:
    """a⁻¹ ⊕ b, the motion taking a onto b"""
    return compose(inverse(a), b)


def transform_point(transform: Pose2, point) -> np.ndarray:
    """Apply a rigid transform to one point (2,) or a stack of points (N, 2)"""
    points = np.asarray(point, dtype=float)
    return points @ transform.rotation.T + transform.translation


def transform_state(transform: Pose2, state) -> np.ndarray:
    """Express a [p_x, p_y, v_x, v_y] state in another frame"""
    state = np.asarray(state, dtype=float)
    rotation = transform.rotation
    out = np.empty(4)
    out[:2] = rotation @ state[:2] + transform.translation
    out[2:] = rotation @ state[2:]
    return out


def transform_error(est: Pose2, truth: Pose2) -> Tuple[float, float]:
    """
    Translation (m) and absolute heading (deg) of est⁻¹ ⊕ truth.

    Both values are invariant to swapping est and truth.
    """
    delta = between(est, truth)
    return math.hypot(delta.x, delta.y), abs(math.degrees(delta.theta))
