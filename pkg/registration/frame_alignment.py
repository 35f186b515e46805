"""
Frame realignment between robot pairs.

Static realignment registers two landmark maps with ICP and recency-weighted
Arun. Dynamic realignment registers time-matched detections of tracked
objects, weighting each pair by its consistency with the fused track state,
and composes the resulting correction onto the previous alignment.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from geometry.transforms import Pose2, compose, transform_error
from geometry.uncertainty import NoisyTransform
from registration.exceptions import DegenerateInput
from registration.icp import MAX_ITERATIONS, REJECT_RADIUS_M, TOLERANCE_M, icp_register
from registration.landmark_maps import LandmarkMap
from registration.point_registration import (
    FitStatistics, WeightedPairs, arun_weighted, distances, fit_statistics,
)

logger = logging.getLogger(__name__)

STATIC = 'static'
DYNAMIC = 'dynamic'

CONSISTENCY = 'consistency'
UNIFORM = 'uniform'
WEIGHTING_CHOICES = (CONSISTENCY, UNIFORM)

MAX_CONSISTENCY_WEIGHT = 1e4
MIN_CONSISTENCY_PRODUCT = 1e-6

# Pairs farther than this many residual RMS from the first fit are dropped before refitting.
OUTLIER_RMS = 3.0
# Residuals below this are exact fits; corrections below it are no correction.
EXACT_FIT_M = 1e-9

POSITION_EXTRACTION = np.hstack([np.eye(2), np.zeros((2, 2))])


@dataclass(frozen=True)
class CorrectionMagnitude:
    trans_m: float = 0.0
    rot_rad: float = 0.0

    @classmethod
    def between(cls, current: Pose2, previous: Pose2) -> 'CorrectionMagnitude':
        trans_m, rot_deg = transform_error(current, previous)
        return cls(trans_m, math.radians(rot_deg))


@dataclass(frozen=True)
class AlignmentCovarianceScale:
    """Linear growth of alignment standard deviation with the size of the latest correction"""
    c_t: float = 1.0
    c_theta: float = 1.0
    sigma_t0: float = 0.01
    sigma_theta0: float = 0.005


@dataclass(frozen=True, eq=False)
class AlignmentResult:
    transform: NoisyTransform
    correction_magnitude: CorrectionMagnitude
    pair_count: int
    method: str
    score: float = math.inf

    @property
    def pose(self) -> Pose2:
        return self.transform.pose


@dataclass(frozen=True, eq=False)
class CoDetection:
    """
    One object seen by both robots in the same frame.

    z_tilde_j is the neighbor's detection already mapped into this robot's
    frame through the alignment the neighbor held at that time.
    """
    stamp: int
    x_hat: np.ndarray
    z_i: np.ndarray
    z_tilde_j: np.ndarray


def alignment_covariance(current: Pose2, previous: Pose2,
                         scale: AlignmentCovarianceScale = AlignmentCovarianceScale()) -> np.ndarray:
    correction = CorrectionMagnitude.between(current, previous)
    sigma_t = scale.c_t * correction.trans_m + scale.sigma_t0
    sigma_theta = scale.c_theta * correction.rot_rad + scale.sigma_theta0
    return np.diag([sigma_t ** 2, sigma_t ** 2, sigma_theta ** 2])


def align_static(map_i: LandmarkMap, map_j: LandmarkMap, prev: NoisyTransform, k: int,
                 scale: AlignmentCovarianceScale = AlignmentCovarianceScale(),
                 max_iter: int = MAX_ITERATIONS, tol: float = TOLERANCE_M,
                 reject_radius: float = REJECT_RADIUS_M) -> AlignmentResult:
    """
    Re-estimate the alignment mapping map_i's frame into map_j's.

    Raises NoCorrespondences or DegenerateInput; callers keep prev on failure.
    """
    outcome = icp_register(map_i, map_j, prev.pose, max_iter, tol, reject_radius)
    pose = arun_weighted(outcome.pairs)
    correction = CorrectionMagnitude.between(pose, prev.pose)
    transform = NoisyTransform(pose, alignment_covariance(pose, prev.pose, scale), k)
    logger.debug(f'Static alignment {map_i.owner}->{map_j.owner} at frame {k}: '
                 f'{len(outcome.pairs)} pairs, correction {correction.trans_m:.3f} m / '
                 f'{math.degrees(correction.rot_rad):.2f} deg')
    return AlignmentResult(transform, correction, len(outcome.pairs), STATIC)


def consistency_weight(x_hat, z_i, z_tilde_j, H: Optional[np.ndarray] = None,
                       w_max: float = MAX_CONSISTENCY_WEIGHT,
                       eps: float = MIN_CONSISTENCY_PRODUCT) -> float:
    """
    Inverse inner product of the two residuals against the fused position.

    Clamped into [0, w_max]; a product at or below eps gives weight 0.
    """
    H = POSITION_EXTRACTION if H is None else H
    position = H @ np.asarray(x_hat, dtype=float)
    d = float((position - np.asarray(z_i, dtype=float)) @ (position - np.asarray(z_tilde_j, dtype=float)))
    if not math.isfinite(d) or d <= eps:
        return 0.0
    return min(1.0 / d, w_max)


def co_detection_pairs(codetections: Sequence[CoDetection], weighting: str = CONSISTENCY,
                       H: Optional[np.ndarray] = None, w_max: float = MAX_CONSISTENCY_WEIGHT,
                       eps: float = MIN_CONSISTENCY_PRODUCT) -> WeightedPairs:
    """Pairs z̃_j -> z_i with the chosen weighting"""
    if weighting not in WEIGHTING_CHOICES:
        raise ValueError(f'unknown dynamic weighting "{weighting}"')
    if not codetections:
        return WeightedPairs.empty()
    source = np.array([c.z_tilde_j for c in codetections], dtype=float)
    target = np.array([c.z_i for c in codetections], dtype=float)
    if weighting == UNIFORM:
        weights = np.ones(len(codetections))
    else:
        weights = np.array([consistency_weight(c.x_hat, c.z_i, c.z_tilde_j, H, w_max, eps)
                            for c in codetections])
    return WeightedPairs(source, target, weights)


def correction_score(correction: Pose2, stats: FitStatistics) -> float:
    """
    Size of a correction in standard errors of the fit that produced it.

    Translation is measured at the source centroid, where it decouples from
    the heading. The larger of the two ratios is returned; an exact fit
    scores infinity for any nonzero correction and zero otherwise.
    """
    centroid = np.asarray(stats.source_centroid, dtype=float)
    shift = float(np.linalg.norm(correction.rotation @ centroid + correction.translation - centroid))
    turn = abs(correction.theta)
    if stats.residual_rms_m <= EXACT_FIT_M:
        return math.inf if max(shift, turn) > EXACT_FIT_M else 0.0
    se_t = stats.residual_rms_m / math.sqrt(stats.effective_pairs)
    if stats.source_spread_m2 <= 0:
        return shift / se_t
    se_theta = stats.residual_rms_m / math.sqrt(stats.effective_pairs * stats.source_spread_m2)
    return max(shift / se_t, turn / se_theta)


def reject_outliers(pairs: WeightedPairs, pose: Pose2, stats: FitStatistics) -> WeightedPairs:
    """Zero the weight of pairs lying beyond OUTLIER_RMS residual RMS of pose"""
    if stats.residual_rms_m <= EXACT_FIT_M:
        return pairs
    inliers = distances(pose, pairs) <= OUTLIER_RMS * stats.residual_rms_m
    return pairs.with_weights(np.where(inliers, pairs.weights, 0.0))


def align_dynamic(codetections: Sequence[CoDetection], prev: NoisyTransform, k: int,
                  scale: AlignmentCovarianceScale = AlignmentCovarianceScale(),
                  weighting: str = CONSISTENCY, H: Optional[np.ndarray] = None,
                  w_max: float = MAX_CONSISTENCY_WEIGHT,
                  eps: float = MIN_CONSISTENCY_PRODUCT) -> AlignmentResult:
    """
    Correct prev with the transform registering the neighbor's detections onto ours.

    Pairs far off the first fit are dropped and the fit is redone once. The
    correction magnitude reported is that of the correction transform
    itself, and the score is its size in standard errors. Raises
    DegenerateInput with fewer than 2 positively weighted pairs.
    """
    pairs = co_detection_pairs(codetections, weighting, H, w_max, eps)
    realign = arun_weighted(pairs)
    stats = fit_statistics(realign, pairs)

    trimmed = reject_outliers(pairs, realign, stats)
    if trimmed.positive_count < pairs.positive_count:
        try:
            refit = arun_weighted(trimmed)
        except DegenerateInput:
            logger.debug(f'Dynamic alignment at frame {k}: refit without outliers degenerate, first fit kept')
        else:
            logger.debug(f'Dynamic alignment at frame {k}: '
                         f'{pairs.positive_count - trimmed.positive_count} outlying pairs dropped')
            pairs, realign = trimmed, refit
            stats = fit_statistics(realign, pairs)

    pose = compose(realign, prev.pose)
    correction = CorrectionMagnitude.between(realign, Pose2.identity())
    transform = NoisyTransform(pose, alignment_covariance(pose, prev.pose, scale), k)
    return AlignmentResult(transform, correction, pairs.positive_count, DYNAMIC, correction_score(realign, stats))
