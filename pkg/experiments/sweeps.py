"""
Error-level sweeps: modes × injected-error levels × seeds, one scenario run per cell.

Cells are independent. Each finished cell is written atomically to its own
CSV, then the long-format sweep table is assembled from them.
"""
from __future__ import annotations

import logging
import os
import tempfile
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional

import django
import pandas as pd
from rest_framework import serializers
from tqdm import tqdm

from metrics.clear_mot import DEFAULT_D_MATCH
from metrics.exceptions import EmptyGroundTruth
from metrics.reports import DEFAULT_WINDOW_S, evaluate_run
from simulation.exceptions import ConfigError
from simulation.scenario import ScenarioConfig
from simulation.scenario_runner import run_scenario
from simulation.serializers import deep_merge, flatten_errors, parse_scenario, read_yaml

logger = logging.getLogger(__name__)

MODE_OFF = 'off'
MODE_STATIC = 'static'
MODE_DYNAMIC = 'dynamic'
MODE_REACTIVE = 'dynamic+reactive-gate'
MODE_GROUND_TRUTH = 'ground-truth-localization'

MODE_OVERRIDES = {
    MODE_OFF: {'realign': {'mode': 'off'}, 'tracking': {'use_alignment_covariance': False}},
    MODE_STATIC: {'realign': {'mode': 'static'}},
    MODE_DYNAMIC: {'realign': {'mode': 'dynamic', 'reactive_gate': False}},
    MODE_REACTIVE: {'realign': {'mode': 'dynamic', 'reactive_gate': True}},
    MODE_GROUND_TRUTH: {'ground_truth_localization': True},
}

SWEEP_COLUMNS = ['mode', 'sigma_t_m', 'seed', 'mota', 'misses', 'false_positives', 'mismatches', 'gt_count',
                 'per_robot_mota_mean', 'median_heading_deg', 'median_translation_m']

SWEEP_CSV = 'sweep.csv'


class SweepSpecSerializer(serializers.Serializer):
    base_config = serializers.CharField()
    levels = serializers.ListField(child=serializers.FloatField(min_value=0.0), min_length=1)
    seeds_per_level = serializers.IntegerField(min_value=1)
    modes = serializers.ListField(child=serializers.ChoiceField(choices=list(MODE_OVERRIDES)), min_length=1)
    first_seed = serializers.IntegerField(min_value=0, default=0)
    overrides = serializers.DictField(default=dict)


@dataclass(frozen=True)
class SweepSpec:
    base_config: Path
    levels: tuple
    seeds_per_level: int
    modes: tuple
    first_seed: int = 0
    overrides: Dict[str, Any] = field(default_factory=dict, hash=False)


@dataclass(frozen=True)
class SweepCell:
    mode: str
    sigma_t_m: float
    seed: int
    config: ScenarioConfig

    @property
    def name(self) -> str:
        return f'{self.mode.replace("+", "_")}__{self.sigma_t_m:g}__{self.seed}'


def load_sweep(path) -> SweepSpec:
    path = Path(path)
    serializer = SweepSpecSerializer(data=read_yaml(path))
    if not serializer.is_valid():
        raise ConfigError('; '.join(flatten_errors(serializer.errors)))
    data = serializer.validated_data
    base = Path(data['base_config'])
    if not base.is_absolute():
        base = path.parent / base
    return SweepSpec(base, tuple(data['levels']), data['seeds_per_level'], tuple(data['modes']),
                     data['first_seed'], dict(data['overrides']))


def expand_sweep(spec: SweepSpec) -> List[SweepCell]:
    """Resolve every (mode, level, seed) cell into a validated ScenarioConfig"""
    base = deep_merge(read_yaml(spec.base_config), spec.overrides)
    cells = []
    for mode in spec.modes:
        for level in spec.levels:
            for offset in range(spec.seeds_per_level):
                seed = spec.first_seed + offset
                overrides = deep_merge(MODE_OVERRIDES[mode], {
                    'error_injection': {'sigma_t_m': level},
                    'rng_seed': seed,
                })
                cells.append(SweepCell(mode, level, seed, parse_scenario(base, overrides)))
    logger.info(f'Sweep expanded to {len(cells)} cells from {spec.base_config}')
    return cells


def run_cell(cell: SweepCell, d_match: float = DEFAULT_D_MATCH, window_s: float = DEFAULT_WINDOW_S) -> Dict[str, Any]:
    run_log = run_scenario(cell.config, timings=False, trace_messages=False)
    row = {'mode': cell.mode, 'sigma_t_m': cell.sigma_t_m, 'seed': cell.seed}
    try:
        summary = evaluate_run(run_log, d_match, window_s)
    except EmptyGroundTruth:
        logger.warning(f'Cell {cell.name}: no visible pedestrians, metrics left empty')
        return row
    row.update({
        'mota': summary.mota,
        'misses': summary.misses,
        'false_positives': summary.false_positives,
        'mismatches': summary.mismatches,
        'gt_count': summary.gt_count,
        'per_robot_mota_mean': summary.per_robot_mota_mean,
        'median_heading_deg': summary.alignment.median_heading_deg,
        'median_translation_m': summary.alignment.median_translation_m,
    })
    return row


def write_atomic(table: pd.DataFrame, path: Path):
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f'.{path.name}.', suffix='.tmp')
    try:
        with os.fdopen(fd, 'w') as f:
            table.to_csv(f, index=False)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _run_and_store(cell: SweepCell, out_dir: str, d_match: float, window_s: float) -> Dict[str, Any]:
    row = run_cell(cell, d_match, window_s)
    write_atomic(pd.DataFrame([row], columns=SWEEP_COLUMNS), Path(out_dir) / 'cells' / f'{cell.name}.csv')
    return row


def _init_worker():
    os.environ.setdefault('DJANGO_SETTINGS_MODULE', 'teamtrack_platform.settings')
    django.setup()


def run_sweep(cells: Iterable[SweepCell], out_dir, workers: int = 1, d_match: float = DEFAULT_D_MATCH,
              window_s: float = DEFAULT_WINDOW_S, progress: bool = True) -> pd.DataFrame:
    """Run every cell and write the long-format sweep table; rows follow cell order"""
    cells = list(cells)
    out_dir = Path(out_dir)
    if workers <= 1:
        rows = [_run_and_store(cell, str(out_dir), d_match, window_s)
                for cell in tqdm(cells, desc='sweep', unit='cell', disable=not progress)]
    else:
        with ProcessPoolExecutor(max_workers=workers, initializer=_init_worker) as pool:
            futures = [pool.submit(_run_and_store, cell, str(out_dir), d_match, window_s) for cell in cells]
            rows = [future.result() for future in tqdm(futures, desc='sweep', unit='cell', disable=not progress)]
    table = pd.DataFrame(rows, columns=SWEEP_COLUMNS)
    write_atomic(table, out_dir / SWEEP_CSV)
    logger.info(f'Sweep of {len(cells)} cells written to {out_dir / SWEEP_CSV}')
    return table


def summarize_sweep(table: pd.DataFrame) -> pd.DataFrame:
    """Mean metrics per (mode, level)"""
    metrics = ['mota', 'misses', 'false_positives', 'mismatches', 'median_heading_deg', 'median_translation_m']
    return table.groupby(['mode', 'sigma_t_m'], sort=False)[metrics].mean().reset_index()


def default_workers(requested: Optional[int], configured: int) -> int:
    return max(1, requested if requested is not None else configured)
