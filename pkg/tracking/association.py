"""
Global nearest neighbor association of local measurements to tracks.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Sequence, Tuple

import numpy as np
from scipy.optimize import linear_sum_assignment

from tracking.exceptions import SingularInnovation
from tracking.gating import GateState
from tracking.motion_models import MotionModel
from tracking.tracks import Measurement, Track

logger = logging.getLogger(__name__)

# Cost carried by gated-out pairs; any assignment using one is discarded.
GATED_COST = 1e6
MAX_CONDITION = 1e12


@dataclass
class Association:
    matches: List[Tuple[int, int]] = field(default_factory=list)
    unmatched_measurements: List[int] = field(default_factory=list)
    unmatched_tracks: List[int] = field(default_factory=list)


def innovation(position, cov, track: Track, model: MotionModel) -> Tuple[np.ndarray, np.ndarray]:
    residual = np.asarray(position, dtype=float) - model.H @ track.x
    S = model.H @ track.P @ model.H.T + np.asarray(cov, dtype=float)
    return residual, S


def squared_distance(residual: np.ndarray, S: np.ndarray) -> float:
    if not np.all(np.isfinite(S)) or np.linalg.cond(S) > MAX_CONDITION:
        raise SingularInnovation('innovation covariance is singular')
    return float(residual @ np.linalg.solve(S, residual))


def mahalanobis(z: Measurement, t: Track, model: MotionModel) -> float:
    """Squared Mahalanobis distance of z to the track's predicted position"""
    residual, S = innovation(z.pos, z.cov, t, model)
    return squared_distance(residual, S)


def hungarian(cost: np.ndarray, gated_cost: float = GATED_COST) -> Dict[int, int]:
    """
    Minimum-cost row -> column assignment.

    Rows or columns left over in a rectangular problem, and pairs whose
    cost reaches gated_cost, are unassigned.
    """
    cost = np.asarray(cost, dtype=float)
    if cost.size == 0:
        return {}
    rows, cols = linear_sum_assignment(cost)
    return {int(r): int(c) for r, c in zip(rows, cols) if cost[r, c] < gated_cost}


def gnn_associate(measurements: Sequence[Measurement], tracks: Sequence[Track],
                  gate: GateState, model: MotionModel) -> Association:
    cost = np.full((len(measurements), len(tracks)), GATED_COST)
    for m, z in enumerate(measurements):
        for t, track in enumerate(tracks):
            try:
                d = mahalanobis(z, track, model)
            except SingularInnovation:
                logger.warning(f'Singular innovation for track {track.id}; pair gated out')
                continue
            if d <= gate.tau:
                cost[m, t] = d

    assignment = hungarian(cost)
    matched_tracks = set(assignment.values())
    return Association(
        matches=sorted(assignment.items()),
        unmatched_measurements=[m for m in range(len(measurements)) if m not in assignment],
        unmatched_tracks=[t for t in range(len(tracks)) if t not in matched_tracks],
    )
