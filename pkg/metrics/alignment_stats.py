"""
Frame-alignment error statistics over a run's alignments table.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import pandas as pd

from geometry.transforms import Pose2, transform_error

TRANSLATION_BIN_M = 0.05
HEADING_BIN_DEG = 0.5


@dataclass(frozen=True, eq=False)
class AlignmentStats:
    median_heading_deg: float
    median_translation_m: float
    translation_hist: pd.DataFrame
    heading_hist: pd.DataFrame
    samples: int


def alignment_errors(alignments: pd.DataFrame) -> pd.DataFrame:
    """One row per (frame, i, j) with the translation (m) and heading (deg) error of the estimate"""
    rows = []
    for row in alignments.itertuples(index=False):
        translation, heading = transform_error(Pose2(row.est_x, row.est_y, row.est_theta),
                                               Pose2(row.true_x, row.true_y, row.true_theta))
        rows.append((row.frame, row.i, row.j, row.method, translation, heading))
    return pd.DataFrame(rows, columns=['frame', 'i', 'j', 'method', 'translation_m', 'heading_deg'])


def histogram(values: np.ndarray, width: float) -> pd.DataFrame:
    """Fixed-width bins starting at zero and covering the largest value"""
    if not len(values):
        return pd.DataFrame(columns=['bin_start', 'bin_end', 'count'])
    top = max(float(np.max(values)), width)
    edges = np.arange(0.0, top + width, width)
    if edges[-1] < top:
        edges = np.append(edges, edges[-1] + width)
    counts, edges = np.histogram(values, bins=edges)
    return pd.DataFrame({'bin_start': edges[:-1], 'bin_end': edges[1:], 'count': counts})


def alignment_stats(alignments: pd.DataFrame, translation_bin_m: float = TRANSLATION_BIN_M,
                    heading_bin_deg: float = HEADING_BIN_DEG) -> AlignmentStats:
    errors = alignment_errors(alignments)
    translation = errors['translation_m'].to_numpy(dtype=float)
    heading = errors['heading_deg'].to_numpy(dtype=float)
    return AlignmentStats(
        median_heading_deg=float(np.median(heading)) if len(heading) else math.nan,
        median_translation_m=float(np.median(translation)) if len(translation) else math.nan,
        translation_hist=histogram(translation, translation_bin_m),
        heading_hist=histogram(heading, heading_bin_deg),
        samples=len(errors),
    )
