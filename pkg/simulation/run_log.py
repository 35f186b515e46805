"""
RunLog: the CSV directory a scenario run leaves behind.

manifest.csv records the row count of every table written, so a table cut
short after the fact is reported by name on load.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Optional

import pandas as pd
import yaml

from metrics.exceptions import RunLogError

logger = logging.getLogger(__name__)

GROUND_TRUTH = 'ground_truth'
TRACKS = 'tracks'
ALIGNMENTS = 'alignments'
TIMINGS = 'timings'
MESSAGES = 'messages'

COLUMNS = {
    GROUND_TRUTH: ['frame', 'kind', 'id', 'x', 'y', 'theta', 'visible'],
    TRACKS: ['frame', 'robot', 'track_id', 'status', 'x', 'y', 'vx', 'vy', 'trace_P', 'world_x', 'world_y'],
    ALIGNMENTS: ['frame', 'i', 'j', 'est_x', 'est_y', 'est_theta', 'true_x', 'true_y', 'true_theta',
                 'cov_x', 'cov_y', 'cov_theta', 'method'],
    TIMINGS: ['frame', 'robot', 'stage', 'seconds'],
    MESSAGES: ['frame', 'sender', 'recipient', 'kind', 'bytes'],
}
REQUIRED_TABLES = (GROUND_TRUTH, TRACKS, ALIGNMENTS)
OPTIONAL_TABLES = (TIMINGS, MESSAGES)

MANIFEST = 'manifest.csv'
CONFIG = 'config.yaml'

STRING_COLUMNS = {'table', 'kind', 'track_id', 'status', 'method', 'stage'}


def empty_table(name: str) -> pd.DataFrame:
    return pd.DataFrame(columns=COLUMNS[name])


def table_from_rows(name: str, rows) -> pd.DataFrame:
    return pd.DataFrame(list(rows), columns=COLUMNS[name])


@dataclass
class RunLog:
    config: Dict[str, Any]
    ground_truth: pd.DataFrame = field(default_factory=lambda: empty_table(GROUND_TRUTH))
    tracks: pd.DataFrame = field(default_factory=lambda: empty_table(TRACKS))
    alignments: pd.DataFrame = field(default_factory=lambda: empty_table(ALIGNMENTS))
    timings: Optional[pd.DataFrame] = None
    messages: Optional[pd.DataFrame] = None

    def tables(self) -> Dict[str, pd.DataFrame]:
        tables = {
            GROUND_TRUTH: self.ground_truth,
            TRACKS: self.tracks,
            ALIGNMENTS: self.alignments,
        }
        for name in OPTIONAL_TABLES:
            table = getattr(self, name)
            if table is not None:
                tables[name] = table
        return tables

    @property
    def frame_rate_hz(self) -> float:
        return float(self.config.get('frame_rate_hz', 10.0))

    @property
    def frame_count(self) -> int:
        if self.ground_truth.empty:
            return 0
        return int(self.ground_truth['frame'].max()) + 1

    def write(self, directory) -> Path:
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        manifest = []
        for name, table in self.tables().items():
            table.to_csv(directory / f'{name}.csv', index=False)
            manifest.append({'table': name, 'rows': len(table)})
        with open(directory / CONFIG, 'w') as f:
            yaml.safe_dump(self.config, f, sort_keys=False)
        pd.DataFrame(manifest, columns=['table', 'rows']).to_csv(directory / MANIFEST, index=False)
        logger.info(f'Run log written to {directory}: ' +
                    ', '.join(f'{row["table"]}={row["rows"]}' for row in manifest))
        return directory

    @classmethod
    def load(cls, directory) -> 'RunLog':
        directory = Path(directory)
        if not directory.is_dir():
            raise RunLogError(f'run log directory not found: {directory}')
        manifest = read_table(directory, 'manifest', ['table', 'rows'], MANIFEST)
        expected = dict(zip(manifest['table'], manifest['rows']))

        tables = {}
        for name in REQUIRED_TABLES + OPTIONAL_TABLES:
            if name not in expected:
                if name in REQUIRED_TABLES:
                    raise RunLogError(f'{name}.csv is not listed in {MANIFEST}')
                continue
            table = read_table(directory, name, COLUMNS[name])
            if len(table) != int(expected[name]):
                raise RunLogError(f'{name}.csv is truncated: expected {expected[name]} rows, found {len(table)}')
            tables[name] = table

        config_path = directory / CONFIG
        if not config_path.is_file():
            raise RunLogError(f'{CONFIG} is missing from {directory}')
        with open(config_path, 'r') as f:
            config = yaml.safe_load(f) or {}
        return cls(config=config, **tables)


def read_table(directory: Path, name: str, columns, filename: Optional[str] = None) -> pd.DataFrame:
    path = directory / (filename or f'{name}.csv')
    if not path.is_file():
        raise RunLogError(f'{path.name} is missing from {directory}')
    try:
        table = pd.read_csv(path, float_precision='round_trip', keep_default_na=False, na_values=[''])
    except (pd.errors.ParserError, pd.errors.EmptyDataError, UnicodeDecodeError) as exc:
        raise RunLogError(f'{path.name} is corrupt: {exc}')
    missing = [c for c in columns if c not in table.columns]
    if missing:
        raise RunLogError(f'{path.name} is corrupt: missing columns {", ".join(missing)}')
    numeric = [c for c in columns if c not in STRING_COLUMNS]
    if len(table) and table[list(columns)].isna().any().any():
        raise RunLogError(f'{path.name} is truncated or corrupt: empty fields')
    if numeric and len(table):
        try:
            table[numeric] = table[numeric].apply(pd.to_numeric)
        except (ValueError, TypeError) as exc:
            raise RunLogError(f'{path.name} is corrupt: {exc}')
    return table
