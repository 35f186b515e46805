"""
Constant-velocity motion model over the state [p_x, p_y, v_x, v_y].
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

DEFAULT_PROCESS_INTENSITY = 0.5


@dataclass(frozen=True, eq=False)
class MotionModel:
    dt: float
    q: float
    A: np.ndarray
    H: np.ndarray
    Q: np.ndarray

    @classmethod
    def constant_velocity(cls, dt: float, q: float = DEFAULT_PROCESS_INTENSITY) -> 'MotionModel':
        """White-noise-acceleration discretization with scalar intensity q"""
        if dt <= 0:
            raise ValueError('timestep must be positive')
        if q < 0:
            raise ValueError('process noise intensity must be nonnegative')
        eye = np.eye(2)
        A = np.block([[eye, dt * eye], [np.zeros((2, 2)), eye]])
        H = np.hstack([eye, np.zeros((2, 2))])
        Q = q * np.block([
            [dt ** 3 / 3 * eye, dt ** 2 / 2 * eye],
            [dt ** 2 / 2 * eye, dt * eye],
        ])
        return cls(dt, q, A, H, Q)

    @classmethod
    def static(cls) -> 'MotionModel':
        """A = I, Q = 0; objects never move"""
        return cls(1.0, 0.0, np.eye(4), np.hstack([np.eye(2), np.zeros((2, 2))]), np.zeros((4, 4)))
