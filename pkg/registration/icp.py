"""
Iterative closest point association between two robots' landmark maps.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import List, Tuple

import numpy as np
from scipy.spatial import cKDTree

from geometry.transforms import Pose2, transform_error, transform_point
from registration.exceptions import DegenerateInput, NoCorrespondences
from registration.landmark_maps import LandmarkMap
from registration.point_registration import (
    WeightedPairs, arun_weighted, recency_weight, residuals,
)

logger = logging.getLogger(__name__)

REJECT_RADIUS_M = 1.0
MAX_ITERATIONS = 20
TOLERANCE_M = 1e-4


@dataclass
class IcpOutcome:
    pose: Pose2
    pairs: WeightedPairs
    iterations: int
    objective_history: List[float] = field(default_factory=list)


def nearest_pairs(source: np.ndarray, target: np.ndarray, pose: Pose2,
                  reject_radius: float, tree: cKDTree = None) -> Tuple[np.ndarray, np.ndarray]:
    """
    One-to-one nearest-neighbor correspondences of pose·source onto target.

    Returns (source_index, target_index) arrays. When several source points
    pick the same target, only the closest one keeps it.
    """
    tree = tree if tree is not None else cKDTree(target)
    moved = transform_point(pose, source)
    distances, indices = tree.query(moved, k=1, distance_upper_bound=reject_radius)
    found = np.isfinite(distances)
    src_idx = np.nonzero(found)[0]
    tgt_idx = indices[found]
    dist = distances[found]

    order = np.lexsort((src_idx, dist))
    _, first = np.unique(tgt_idx[order], return_index=True)
    keep = np.sort(order[first])
    return src_idx[keep], tgt_idx[keep]


def icp_register(map_i: LandmarkMap, map_j: LandmarkMap, initial: Pose2,
                 max_iter: int = MAX_ITERATIONS, tol: float = TOLERANCE_M,
                 reject_radius: float = REJECT_RADIUS_M) -> IcpOutcome:
    """
    Register map_i onto map_j starting from initial (maps i-frame points into j's frame).

    Each iteration associates under the current pose and re-fits with
    unweighted Arun; the loop ends when the fitted pose moves less than tol
    or after max_iter iterations. The returned pairs carry recency weights.
    """
    if map_i.is_empty or map_j.is_empty:
        raise NoCorrespondences(f'empty landmark map (robot {map_i.owner}: {len(map_i)}, '
                                f'robot {map_j.owner}: {len(map_j)})')

    tree = cKDTree(map_j.positions)
    pose = initial
    history: List[float] = []
    iterations = 0
    src_idx = tgt_idx = np.zeros(0, dtype=int)

    while iterations < max_iter:
        src_idx, tgt_idx = nearest_pairs(map_i.positions, map_j.positions, pose, reject_radius, tree)
        if len(src_idx) == 0:
            break
        uniform = WeightedPairs.uniform(map_i.positions[src_idx], map_j.positions[tgt_idx])
        history.append(residuals(pose, uniform))
        iterations += 1
        if len(src_idx) < 2:
            break
        try:
            fitted = arun_weighted(uniform)
        except DegenerateInput:
            break
        step_m, step_deg = transform_error(fitted, pose)
        pose = fitted
        if step_m < tol and np.radians(step_deg) < tol:
            break

    if len(src_idx) == 0:
        raise NoCorrespondences(f'no landmark of robot {map_i.owner} within {reject_radius} m '
                                f'of a landmark of robot {map_j.owner}')

    ages_i = map_i.frames_since_seen()[src_idx]
    ages_j = map_j.frames_since_seen()[tgt_idx]
    weights = np.array([recency_weight(int(a), int(b)) for a, b in zip(ages_i, ages_j)])
    pairs = WeightedPairs(map_i.positions[src_idx], map_j.positions[tgt_idx], weights)
    logger.debug(f'ICP {map_i.owner}->{map_j.owner}: {len(pairs)} pairs after {iterations} iterations')
    return IcpOutcome(pose, pairs, iterations, history)


def icp_associate(map_i: LandmarkMap, map_j: LandmarkMap, initial: Pose2,
                  max_iter: int = MAX_ITERATIONS, tol: float = TOLERANCE_M,
                  reject_radius: float = REJECT_RADIUS_M) -> WeightedPairs:
    return icp_register(map_i, map_j, initial, max_iter, tol, reject_radius).pairs
