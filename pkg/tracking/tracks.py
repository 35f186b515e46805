"""
Track, measurement and track-information message types.
"""
from __future__ import annotations

from dataclasses import dataclass, replace
from typing import NamedTuple, Optional

import numpy as np

from geometry.uncertainty import NoisyTransform, symmetrize
from tracking.motion_models import MotionModel

DEFAULT_MAX_SPEED = 2.0


class TrackId(NamedTuple):
    """(creator robot, sequence number); tuple order is the alias order"""
    creator: int
    seq: int

    def __str__(self):
        return f'{self.creator}-{self.seq}'

    @classmethod
    def parse(cls, text: str) -> 'TrackId':
        creator, seq = str(text).split('-')
        return cls(int(creator), int(seq))


class TrackStatus:
    TENTATIVE = 'tentative'
    CONFIRMED = 'confirmed'


@dataclass(frozen=True, eq=False)
class Measurement:
    pos: np.ndarray
    cov: np.ndarray
    stamp: int = 0
    source: int = 0

    def __post_init__(self):
        object.__setattr__(self, 'pos', np.asarray(self.pos, dtype=float).reshape(2))
        object.__setattr__(self, 'cov', symmetrize(np.asarray(self.cov, dtype=float).reshape(2, 2)))


@dataclass(frozen=True, eq=False)
class Track:
    id: TrackId
    x: np.ndarray
    P: np.ndarray
    lifetime: int = 0
    missed: int = 0
    hits: int = 1
    status: str = TrackStatus.TENTATIVE

    @property
    def position(self) -> np.ndarray:
        return self.x[:2]

    @property
    def is_confirmed(self) -> bool:
        return self.status == TrackStatus.CONFIRMED

    def with_id(self, track_id: TrackId) -> 'Track':
        return replace(self, id=track_id)


@dataclass(frozen=True, eq=False)
class InfoMessage:
    """
    One track's contribution to a neighbor's consensus round, in the neighbor's frame.

    u and U are zero when the sender had no measurement of the track this
    frame. z_tilde is the sender's measurement mapped through alignment,
    the sender's estimate of the frame transform at send time.
    """
    track_id: TrackId
    prior: np.ndarray
    u: np.ndarray
    U: np.ndarray
    sender: int
    stamp: int
    z_tilde: Optional[np.ndarray] = None
    alignment: Optional[NoisyTransform] = None

    @property
    def has_measurement(self) -> bool:
        return self.z_tilde is not None

    def nbytes(self) -> int:
        return 16 + 8 * (4 + 4 + 16) + (16 if self.z_tilde is not None else 0) + (104 if self.alignment else 0)


def initial_covariance(position_cov: np.ndarray, max_speed: float = DEFAULT_MAX_SPEED) -> np.ndarray:
    P = np.zeros((4, 4))
    P[:2, :2] = position_cov
    P[2:, 2:] = max_speed ** 2 * np.eye(2)
    return P


def initial_track(measurement: Measurement, track_id: TrackId, max_speed: float = DEFAULT_MAX_SPEED) -> Track:
    """Tentative track at the measurement with zero velocity"""
    x = np.concatenate([measurement.pos, np.zeros(2)])
    return Track(track_id, x, initial_covariance(measurement.cov, max_speed))


def predict(track: Track, model: MotionModel) -> Track:
    x = model.A @ track.x
    P = symmetrize(model.A @ track.P @ model.A.T + model.Q)
    return replace(track, x=x, P=P, lifetime=track.lifetime + 1)
