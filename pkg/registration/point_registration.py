"""
Weighted rigid registration of corresponded planar point sets (Arun's method).
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np

from geometry.transforms import Pose2
from registration.exceptions import DegenerateInput

logger = logging.getLogger(__name__)

# Below this weighted spread the source points are treated as coincident.
COINCIDENT_SPREAD = 1e-12


@dataclass(frozen=True, eq=False)
class WeightedPairs:
    """Correspondences a_k -> b_k with nonnegative weights"""
    source: np.ndarray
    target: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        source = np.asarray(self.source, dtype=float).reshape(-1, 2)
        target = np.asarray(self.target, dtype=float).reshape(-1, 2)
        weights = np.asarray(self.weights, dtype=float).reshape(-1)
        if not (len(source) == len(target) == len(weights)):
            raise ValueError('source, target and weights must have the same length')
        if np.any(weights < 0) or not np.all(np.isfinite(weights)):
            raise ValueError('weights must be finite and nonnegative')
        object.__setattr__(self, 'source', source)
        object.__setattr__(self, 'target', target)
        object.__setattr__(self, 'weights', weights)

    @classmethod
    def uniform(cls, source, target) -> 'WeightedPairs':
        source = np.asarray(source, dtype=float).reshape(-1, 2)
        return cls(source, target, np.ones(len(source)))

    @classmethod
    def empty(cls) -> 'WeightedPairs':
        return cls(np.zeros((0, 2)), np.zeros((0, 2)), np.zeros(0))

    def __len__(self) -> int:
        return len(self.weights)

    @property
    def positive_count(self) -> int:
        return int(np.count_nonzero(self.weights > 0))

    def with_weights(self, weights) -> 'WeightedPairs':
        return WeightedPairs(self.source, self.target, weights)


def arun_weighted(pairs: WeightedPairs) -> Pose2:
    """
    Pose T minimizing Σ w_k ‖T·a_k − b_k‖².

    Weighted centroids, SVD of the weighted 2x2 cross-covariance and a
    determinant correction so the rotation is never a reflection.
    """
    if pairs.positive_count < 2:
        raise DegenerateInput(f'need at least 2 positively weighted pairs, got {pairs.positive_count}')

    weights = pairs.weights / pairs.weights.sum()
    source_centroid = weights @ pairs.source
    target_centroid = weights @ pairs.target
    source_centered = pairs.source - source_centroid
    target_centered = pairs.target - target_centroid

    spread = float(weights @ np.sum(source_centered ** 2, axis=1))
    if spread < COINCIDENT_SPREAD:
        raise DegenerateInput('all positively weighted source points coincide')

    cross = (source_centered * weights[:, None]).T @ target_centered
    U, _, Vt = np.linalg.svd(cross)
    V = Vt.T
    d = 1.0 if np.linalg.det(V @ U.T) >= 0 else -1.0
    rotation = V @ np.diag([1.0, d]) @ U.T
    translation = target_centroid - rotation @ source_centroid
    return Pose2(translation[0], translation[1], np.arctan2(rotation[1, 0], rotation[0, 0]))


def recency_weight(frames_since_i: int, frames_since_j: int) -> float:
    """Larger for landmarks both robots saw recently; 1.0 when both were seen this frame"""
    if frames_since_i < 0 or frames_since_j < 0:
        raise ValueError('frames since last detection must be nonnegative')
    return 1.0 / ((frames_since_i + 1) * (frames_since_j + 1))


def residuals(pose: Pose2, pairs: WeightedPairs, weights: Optional[np.ndarray] = None) -> float:
    """Weighted sum of squared correspondence distances under pose"""
    if len(pairs) == 0:
        return 0.0
    moved = pairs.source @ pose.rotation.T + pose.translation
    squared = np.sum((moved - pairs.target) ** 2, axis=1)
    w = pairs.weights if weights is None else weights
    return float(w @ squared)


@dataclass(frozen=True)
class FitStatistics:
    """Spread of a registration's residuals, for judging how well its parameters are pinned down"""
    residual_rms_m: float
    effective_pairs: float
    source_spread_m2: float
    source_centroid: np.ndarray


def distances(pose: Pose2, pairs: WeightedPairs) -> np.ndarray:
    moved = pairs.source @ pose.rotation.T + pose.translation
    return np.linalg.norm(moved - pairs.target, axis=1)


def fit_statistics(pose: Pose2, pairs: WeightedPairs) -> FitStatistics:
    """
    Weighted residual RMS, Kish effective pair count and source spread.

    Raises DegenerateInput when no pair carries weight.
    """
    total = pairs.weights.sum()
    if total <= 0:
        raise DegenerateInput('no positively weighted pairs')
    weights = pairs.weights / total
    rms = float(np.sqrt(weights @ distances(pose, pairs) ** 2))
    effective = 1.0 / float(weights @ weights)
    centroid = weights @ pairs.source
    spread = float(weights @ np.sum((pairs.source - centroid) ** 2, axis=1))
    return FitStatistics(rms, effective, spread, centroid)
