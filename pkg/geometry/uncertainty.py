"""
First-order (Smith-Self-Cheeseman) covariance propagation for planar frames.

Pose covariances are 3x3 over (x, y, theta); point covariances are 2x2.
Every returned covariance is symmetrized.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Tuple

import numpy as np

from geometry.transforms import (
    Pose2, compose, rotation_derivative, transform_point,
)


def symmetrize(matrix: np.ndarray) -> np.ndarray:
    matrix = np.asarray(matrix, dtype=float)
    return 0.5 * (matrix + matrix.T)


def is_psd(matrix: np.ndarray, tol: float = 1e-10) -> bool:
    matrix = np.asarray(matrix, dtype=float)
    if not np.allclose(matrix, matrix.T, atol=1e-12, rtol=0.0):
        return False
    return bool(np.all(np.linalg.eigvalsh(matrix) >= -tol))


def point_jacobian(transform: Pose2, point) -> np.ndarray:
    """∂(T·z)/∂(x, y, theta) evaluated at T, a 2x3 matrix [I₂ | ∂Rot/∂θ · z]"""
    jacobian = np.zeros((2, 3))
    jacobian[:, :2] = np.eye(2)
    jacobian[:, 2] = rotation_derivative(transform.theta) @ np.asarray(point, dtype=float)
    return jacobian


@dataclass(frozen=True, eq=False)
class NoisyTransform:
    """A frame alignment estimate with its 3x3 covariance and frame stamp"""
    pose: Pose2
    cov: np.ndarray = field(default_factory=lambda: np.zeros((3, 3)))
    stamp: int = 0

    def __post_init__(self):
        cov = symmetrize(np.asarray(self.cov, dtype=float).reshape(3, 3))
        cov.setflags(write=False)
        object.__setattr__(self, 'cov', cov)

    @classmethod
    def exact(cls, pose: Pose2, stamp: int = 0) -> 'NoisyTransform':
        return cls(pose, np.zeros((3, 3)), stamp)


def propagate_into_local(pose: Pose2, pose_cov: np.ndarray, point,
                         point_cov: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """
    Map a body-frame measurement into the robot's local frame.

    Returns (T̂·z, F Σ Fᵀ + G R Gᵀ) with F the point Jacobian with respect to
    the pose and G the rotation block of the pose.
    """
    point = np.asarray(point, dtype=float)
    F = point_jacobian(pose, point)
    G = pose.rotation
    cov = F @ np.asarray(pose_cov, dtype=float) @ F.T + G @ np.asarray(point_cov, dtype=float) @ G.T
    return transform_point(pose, point), symmetrize(cov)


def propagate_into_neighbor(alignment: NoisyTransform, point,
                            point_cov: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """
    Tail-to-tail transfer of a local measurement into a neighbor's frame.

    The alignment covariance is pushed through the point Jacobian, so heading
    uncertainty grows with the lever arm of the point.
    """
    point = np.asarray(point, dtype=float)
    J = alignment.pose.rotation
    F = point_jacobian(alignment.pose, point)
    cov = J @ np.asarray(point_cov, dtype=float) @ J.T + F @ alignment.cov @ F.T
    return transform_point(alignment.pose, point), symmetrize(cov)


def compose_with_covariance(a: Pose2, cov_a: np.ndarray, b: Pose2,
                            cov_b: np.ndarray) -> Tuple[Pose2, np.ndarray]:
    """Head-to-tail composition of two independent uncertain poses"""
    c, s = math.cos(a.theta), math.sin(a.theta)
    J1 = np.array([
        [1.0, 0.0, -s * b.x - c * b.y],
        [0.0, 1.0, c * b.x - s * b.y],
        [0.0, 0.0, 1.0],
    ])
    J2 = np.eye(3)
    J2[:2, :2] = a.rotation
    cov = J1 @ np.asarray(cov_a, dtype=float) @ J1.T + J2 @ np.asarray(cov_b, dtype=float) @ J2.T
    return compose(a, b), symmetrize(cov)
