"""
Run evaluation shared by the run and eval commands.

evaluate_run is a pure function of the loaded RunLog, d_match and the
window length, so re-evaluating a written run log reproduces the numbers
reported when it was produced.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Tuple

import numpy as np
import pandas as pd

from metrics.alignment_stats import AlignmentStats, alignment_stats
from metrics.clear_mot import DEFAULT_D_MATCH, MotAccumulator, mota, sliding_mota, window_frames
from metrics.exceptions import EmptyGroundTruth

logger = logging.getLogger(__name__)

DEFAULT_WINDOW_S = 10.0

SUMMARY_CSV = 'summary.csv'
MOTA_WINDOW_CSV = 'mota_window.csv'
ALIGNMENT_HIST_CSV = 'alignment_hist.csv'


@dataclass(eq=False)
class RunSummary:
    mota: float
    misses: int
    false_positives: int
    mismatches: int
    gt_count: int
    frames: int
    per_robot_mota: Dict[int, float]
    alignment: AlignmentStats
    mota_window: np.ndarray
    window_frames: int
    frame_rate_hz: float
    d_match: float
    timings_ms: Dict[str, Tuple[float, float]] = field(default_factory=dict)

    @property
    def per_robot_mota_mean(self) -> float:
        values = [v for v in self.per_robot_mota.values() if not math.isnan(v)]
        return float(np.mean(values)) if values else math.nan

    def rows(self) -> List[Tuple[str, float]]:
        rows = [
            ('mota', self.mota),
            ('misses', self.misses),
            ('false_positives', self.false_positives),
            ('mismatches', self.mismatches),
            ('gt_count', self.gt_count),
            ('frames', self.frames),
            ('per_robot_mota_mean', self.per_robot_mota_mean),
        ]
        rows.extend((f'mota_robot_{robot}', value) for robot, value in sorted(self.per_robot_mota.items()))
        rows.extend([
            ('median_heading_error_deg', self.alignment.median_heading_deg),
            ('median_translation_error_m', self.alignment.median_translation_m),
            ('alignment_samples', self.alignment.samples),
            ('d_match_m', self.d_match),
            ('window_s', self.window_frames / self.frame_rate_hz),
        ])
        for stage, (mean, std) in sorted(self.timings_ms.items()):
            rows.append((f'{stage}_ms_mean', mean))
            rows.append((f'{stage}_ms_std', std))
        return rows


def frame_ground_truth(ground_truth: pd.DataFrame) -> Dict[int, list]:
    """Visible pedestrians per frame as (id, (x, y))"""
    pedestrians = ground_truth[(ground_truth['kind'] == 'pedestrian') & (ground_truth['visible'] == 1)]
    frames: Dict[int, list] = {}
    for row in pedestrians.itertuples(index=False):
        frames.setdefault(int(row.frame), []).append((int(row.id), (row.x, row.y)))
    return frames


def team_tracks(frame_tracks: pd.DataFrame) -> List[Tuple[str, Tuple[float, float]]]:
    """
    Confirmed tracks of the whole team for one frame, merged by track id.

    Robots holding the same id contribute the mean of their world positions;
    distinct ids stay distinct, so duplicate tracks of one object count as
    false positives.
    """
    confirmed = frame_tracks[frame_tracks['status'] == 'confirmed']
    if confirmed.empty:
        return []
    merged = confirmed.groupby('track_id', sort=True)[['world_x', 'world_y']].mean()
    return [(track_id, (row.world_x, row.world_y)) for track_id, row in merged.iterrows()]


def robot_tracks(frame_tracks: pd.DataFrame, robot: int) -> List[Tuple[str, Tuple[float, float]]]:
    own = frame_tracks[(frame_tracks['robot'] == robot) & (frame_tracks['status'] == 'confirmed')]
    return [(row.track_id, (row.world_x, row.world_y)) for row in own.itertuples(index=False)]


def accumulate(frame_count: int, gt_frames: Dict[int, list], track_frames: Dict[int, pd.DataFrame],
               select, d_match: float) -> MotAccumulator:
    acc = MotAccumulator(d_match)
    empty = pd.DataFrame(columns=['robot', 'track_id', 'status', 'world_x', 'world_y'])
    for frame in range(frame_count):
        acc.update(gt_frames.get(frame, []), select(track_frames.get(frame, empty)))
    return acc


def timing_stats(timings: pd.DataFrame) -> Dict[str, Tuple[float, float]]:
    """Per-stage mean and std in milliseconds of one robot's per-frame work"""
    if timings is None or timings.empty:
        return {}
    stats = {}
    for stage, group in timings.groupby('stage', sort=True):
        ms = group['seconds'].to_numpy(dtype=float) * 1e3
        stats[stage] = (float(ms.mean()), float(ms.std(ddof=0)))
    return stats


def safe_mota(acc: MotAccumulator) -> float:
    try:
        return mota(acc)
    except EmptyGroundTruth:
        return math.nan


def evaluate_run(run_log, d_match: float = DEFAULT_D_MATCH, window_s: float = DEFAULT_WINDOW_S) -> RunSummary:
    """
    Team MOTA with components, per-robot MOTA, sliding-window MOTA and alignment errors.

    Raises EmptyGroundTruth when no pedestrian was ever visible.
    """
    frame_count = run_log.frame_count
    gt_frames = frame_ground_truth(run_log.ground_truth)
    track_frames = {int(frame): group for frame, group in run_log.tracks.groupby('frame', sort=True)}

    team = accumulate(frame_count, gt_frames, track_frames, team_tracks, d_match)
    team_mota = mota(team)
    totals = team.totals()

    robots = sorted(int(r) for r in run_log.ground_truth.loc[run_log.ground_truth['kind'] == 'robot', 'id'].unique())
    per_robot = {
        robot: safe_mota(accumulate(frame_count, gt_frames, track_frames,
                                    lambda tracks, robot=robot: robot_tracks(tracks, robot), d_match))
        for robot in robots
    }

    summary = RunSummary(
        mota=team_mota,
        misses=totals['misses'],
        false_positives=totals['false_positives'],
        mismatches=totals['mismatches'],
        gt_count=totals['gt_count'],
        frames=frame_count,
        per_robot_mota=per_robot,
        alignment=alignment_stats(run_log.alignments),
        mota_window=sliding_mota(team, window_s, run_log.frame_rate_hz),
        window_frames=window_frames(window_s, run_log.frame_rate_hz, max(frame_count, 1)),
        frame_rate_hz=run_log.frame_rate_hz,
        d_match=d_match,
        timings_ms=timing_stats(run_log.timings),
    )
    logger.info(f'MOTA {summary.mota:.3f} (misses {summary.misses}, fp {summary.false_positives}, '
                f'mme {summary.mismatches}, gt {summary.gt_count}); per-robot mean {summary.per_robot_mota_mean:.3f}')
    return summary


def summary_table(summary: RunSummary) -> pd.DataFrame:
    return pd.DataFrame(summary.rows(), columns=['metric', 'value'])


def mota_window_table(summary: RunSummary) -> pd.DataFrame:
    starts = np.arange(len(summary.mota_window))
    ends = starts + summary.window_frames - 1
    return pd.DataFrame({
        'start_frame': starts,
        'end_frame': ends,
        't_end_s': (ends + 1) / summary.frame_rate_hz,
        'mota': summary.mota_window,
    })


def alignment_hist_table(summary: RunSummary) -> pd.DataFrame:
    translation = summary.alignment.translation_hist.assign(quantity='translation_m')
    heading = summary.alignment.heading_hist.assign(quantity='heading_deg')
    table = pd.concat([translation, heading], ignore_index=True)
    return table[['quantity', 'bin_start', 'bin_end', 'count']]


def write_summary(summary: RunSummary, directory) -> Path:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    summary_table(summary).to_csv(directory / SUMMARY_CSV, index=False)
    mota_window_table(summary).to_csv(directory / MOTA_WINDOW_CSV, index=False)
    alignment_hist_table(summary).to_csv(directory / ALIGNMENT_HIST_CSV, index=False)
    return directory
