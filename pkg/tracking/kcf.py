"""
Kalman-Consensus Filter update in information form.

Each robot adds its own and its neighbors' measurement information
(u, U), corrects its prior with the information-form gain M, pulls the
result toward the neighbors' priors, and predicts to the next frame.
"""
from __future__ import annotations

import logging
from dataclasses import replace
from typing import Optional, Sequence, Tuple

import numpy as np

from geometry.uncertainty import symmetrize
from tracking.exceptions import SingularCovariance, SingularGain
from tracking.motion_models import MotionModel
from tracking.tracks import Track

logger = logging.getLogger(__name__)

MAX_CONDITION = 1e12
DEFAULT_CONSENSUS_GAIN_CAP = 1.0


def to_information(z_tilde, R_tilde, model: MotionModel) -> Tuple[np.ndarray, np.ndarray]:
    """u = Hᵀ R⁻¹ z, U = Hᵀ R⁻¹ H"""
    R_tilde = np.asarray(R_tilde, dtype=float)
    if not np.all(np.isfinite(R_tilde)) or np.linalg.cond(R_tilde) > MAX_CONDITION:
        raise SingularCovariance('measurement covariance is not invertible')
    R_inv = symmetrize(np.linalg.inv(R_tilde))
    u = model.H.T @ R_inv @ np.asarray(z_tilde, dtype=float)
    U = model.H.T @ R_inv @ model.H
    return u, U


def consensus_gain(M: np.ndarray, neighbor_count: int,
                   cap: Optional[float] = DEFAULT_CONSENSUS_GAIN_CAP) -> np.ndarray:
    """
    M / (1 + ‖M‖_F), scaled down when needed so (neighbors + 1)·‖gain‖₂ ≤ cap.

    cap=None leaves the gain unscaled.
    """
    gain = M / (1.0 + np.linalg.norm(M, 'fro'))
    if cap is None or neighbor_count == 0:
        return gain
    spectral = (neighbor_count + 1) * np.linalg.norm(gain, 2)
    if spectral > cap:
        gain = gain * (cap / spectral)
    return gain


def kcf_correct(track: Track, y, Y, neighbor_priors: Sequence[np.ndarray],
                consensus_gain_cap: Optional[float] = DEFAULT_CONSENSUS_GAIN_CAP) -> Tuple[np.ndarray, np.ndarray]:
    """Posterior state and information-form gain M at the current frame"""
    Y = np.asarray(Y, dtype=float)
    y = np.asarray(y, dtype=float)
    prior = track.x
    try:
        information = np.linalg.inv(track.P) + Y
    except np.linalg.LinAlgError as exc:
        raise SingularGain(f'track {track.id}: prior covariance is singular') from exc
    if not np.all(np.isfinite(information)) or np.linalg.cond(information) > MAX_CONDITION:
        raise SingularGain(f'track {track.id}: P⁻¹ + Y is not invertible')
    M = symmetrize(np.linalg.inv(information))

    x = prior + M @ (y - Y @ prior)
    if len(neighbor_priors):
        disagreement = np.sum(np.asarray(neighbor_priors, dtype=float) - prior, axis=0)
        x = x + consensus_gain(M, len(neighbor_priors), consensus_gain_cap) @ disagreement
    return x, M


def kcf_update(track: Track, y, Y, neighbor_priors: Sequence[np.ndarray], model: MotionModel,
               consensus_gain_cap: Optional[float] = DEFAULT_CONSENSUS_GAIN_CAP) -> Track:
    """
    Correct, reach consensus, then predict to the next frame.

    missed resets when Y carries any measurement information, otherwise it
    counts up; hits counts frames with information.
    """
    x, M = kcf_correct(track, y, Y, neighbor_priors, consensus_gain_cap)
    return advance(track, x, M, model, contributed=bool(np.any(np.asarray(Y) != 0)))


def advance(track: Track, x: np.ndarray, M: np.ndarray, model: MotionModel, contributed: bool) -> Track:
    return replace(
        track,
        x=model.A @ x,
        P=symmetrize(model.A @ M @ model.A.T + model.Q),
        lifetime=track.lifetime + 1,
        missed=0 if contributed else track.missed + 1,
        hits=track.hits + 1 if contributed else track.hits,
    )
