"""
CLEAR-MOT accumulation and MOTA on top of motmetrics.

Ground-truth objects and tracks are matched on Euclidean distance in the
world frame, gated at d_match. motmetrics keeps last frame's matches that
are still inside the gate, assigns the rest by minimum total distance and
counts a mismatch whenever an object is matched to a different track than
the last time it was matched at all.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Dict, Hashable, List, Optional, Sequence, Tuple

import motmetrics as mm
import numpy as np
import pandas as pd

from metrics.exceptions import EmptyGroundTruth

logger = logging.getLogger(__name__)

DEFAULT_D_MATCH = 1.0

COUNTED_EVENTS = ['MATCH', 'SWITCH', 'MISS', 'FP']
COUNT_METRICS = ['num_objects', 'num_misses', 'num_false_positives', 'num_switches']

Labeled = Tuple[Hashable, Sequence[float]]


def distance_matrix(gt: Sequence[Labeled], tracks: Sequence[Labeled], d_match: float) -> np.ndarray:
    """Object-by-track distances, NaN where a pair lies beyond d_match"""
    gt_positions = np.array([p for _, p in gt], dtype=float).reshape(-1, 2)
    track_positions = np.array([p for _, p in tracks], dtype=float).reshape(-1, 2)
    distances = np.linalg.norm(gt_positions[:, None, :] - track_positions[None, :, :], axis=2)
    return np.where(distances <= d_match, distances, np.nan)


@dataclass
class FrameEval:
    misses: int = 0
    false_positives: int = 0
    mismatches: int = 0
    gt_count: int = 0
    matches: Dict[Hashable, Hashable] = field(default_factory=dict)

    @property
    def errors(self) -> int:
        return self.misses + self.false_positives + self.mismatches


def frame_eval(events: pd.DataFrame) -> FrameEval:
    """Counts and gt -> track matches from one frame's motmetrics events"""
    types = events['Type'].astype(str)
    matched = events[types.isin(['MATCH', 'SWITCH'])]
    misses = int((types == 'MISS').sum())
    return FrameEval(
        misses=misses,
        false_positives=int((types == 'FP').sum()),
        mismatches=int((types == 'SWITCH').sum()),
        gt_count=len(matched) + misses,
        matches=dict(zip(matched['OId'], matched['HId'])),
    )


def events_of(acc: mm.MOTAccumulator, frame: int) -> pd.DataFrame:
    events = acc.mot_events
    return events[events.index.get_level_values('FrameId') == frame]


def replay_history(acc: mm.MOTAccumulator, prev_matches: Dict[Hashable, Hashable],
                   last_matched: Dict[Hashable, Hashable]) -> int:
    """
    Feed acc exact-match frames so its memory holds last_matched, with
    prev_matches as the most recent frame. Returns the next frame id.
    """
    older: List[Dict[Hashable, Hashable]] = []
    for g, t in last_matched.items():
        if g in prev_matches:
            continue
        for pairs in older:
            if t not in pairs.values():
                pairs[g] = t
                break
        else:
            older.append({g: t})
    history = older + [dict(prev_matches)]
    for frame, pairs in enumerate(history):
        n = len(pairs)
        acc.update(list(pairs), list(pairs.values()), np.where(np.eye(n) > 0, 0.0, np.nan), frameid=frame)
    return len(history)


def eval_frame(gt: Sequence[Labeled], tracks: Sequence[Labeled], prev_matches: Dict[Hashable, Hashable],
               d_match: float = DEFAULT_D_MATCH,
               last_matched: Optional[Dict[Hashable, Hashable]] = None) -> FrameEval:
    """
    Score one frame in isolation.

    last_matched maps each ground-truth id to the track it was last matched
    to in any earlier frame; it defaults to prev_matches.
    """
    last_matched = prev_matches if last_matched is None else last_matched
    acc = mm.MOTAccumulator(auto_id=False)
    frame = replay_history(acc, prev_matches, last_matched)
    acc.update([g for g, _ in gt], [t for t, _ in tracks], distance_matrix(gt, tracks, d_match), frameid=frame)
    return frame_eval(events_of(acc, frame))


class MotAccumulator:
    """One motmetrics accumulator fed a frame at a time; frame ids count updates from 0"""

    def __init__(self, d_match: float = DEFAULT_D_MATCH):
        self.d_match = d_match
        self.acc = mm.MOTAccumulator(auto_id=False)
        self.frame_count = 0

    def update(self, gt: Sequence[Labeled], tracks: Sequence[Labeled]) -> int:
        frame = self.frame_count
        self.acc.update([g for g, _ in gt], [t for t, _ in tracks], distance_matrix(gt, tracks, self.d_match),
                        frameid=frame)
        self.frame_count += 1
        return frame

    def frames(self) -> List[FrameEval]:
        """One FrameEval per update, in order"""
        events = self.acc.mot_events
        grouped = dict(tuple(events.groupby(events.index.get_level_values('FrameId'))))
        empty = events.iloc[:0]
        return [frame_eval(grouped.get(frame, empty)) for frame in range(self.frame_count)]

    def frame_counts(self) -> pd.DataFrame:
        """misses, false_positives, mismatches and gt_count for every frame"""
        events = self.acc.mot_events
        events = events[events['Type'].isin(COUNTED_EVENTS)]
        if events.empty:
            counts = pd.DataFrame(columns=COUNTED_EVENTS)
        else:
            typed = pd.DataFrame({
                'frame': events.index.get_level_values('FrameId').to_numpy(),
                'type': events['Type'].astype(str).to_numpy(),
            })
            counts = typed.groupby(['frame', 'type']).size().unstack(fill_value=0)
        counts = counts.reindex(index=range(self.frame_count), columns=COUNTED_EVENTS, fill_value=0).astype(int)
        return pd.DataFrame({
            'misses': counts['MISS'],
            'false_positives': counts['FP'],
            'mismatches': counts['SWITCH'],
            'gt_count': counts['MATCH'] + counts['SWITCH'] + counts['MISS'],
        })

    def totals(self) -> Dict[str, int]:
        if self.frame_count == 0:
            return {'misses': 0, 'false_positives': 0, 'mismatches': 0, 'gt_count': 0}
        summary = mm.metrics.create().compute(self.acc, metrics=COUNT_METRICS, name='run').iloc[0]
        return {
            'misses': int(summary['num_misses']),
            'false_positives': int(summary['num_false_positives']),
            'mismatches': int(summary['num_switches']),
            'gt_count': int(summary['num_objects']),
        }

    def components(self) -> Tuple[np.ndarray, np.ndarray]:
        """Per-frame error and ground-truth counts"""
        counts = self.frame_counts()
        errors = (counts['misses'] + counts['false_positives'] + counts['mismatches']).to_numpy(dtype=float)
        return errors, counts['gt_count'].to_numpy(dtype=float)


def mota(acc: MotAccumulator) -> float:
    if acc.totals()['gt_count'] == 0:
        raise EmptyGroundTruth('no ground-truth objects in any frame')
    return float(mm.metrics.create().compute(acc.acc, metrics=['mota'], name='run').iloc[0]['mota'])


def window_frames(window_s: float, frame_rate_hz: float, frame_count: int) -> int:
    return max(1, min(int(round(window_s * frame_rate_hz)), frame_count))


def sliding_mota(acc: MotAccumulator, window_s: float, frame_rate_hz: float) -> np.ndarray:
    """
    MOTA over every contiguous window of window_s seconds, stepped one frame.

    A window longer than the run is clamped to the run; windows without
    ground truth are NaN.
    """
    errors, gt = acc.components()
    if not len(errors):
        return np.zeros(0)
    w = window_frames(window_s, frame_rate_hz, len(errors))
    error_sums = np.convolve(errors, np.ones(w), mode='valid')
    gt_sums = np.convolve(gt, np.ones(w), mode='valid')
    with np.errstate(divide='ignore', invalid='ignore'):
        series = np.where(gt_sums > 0, 1.0 - error_sums / np.where(gt_sums > 0, gt_sums, 1.0), np.nan)
    return series
