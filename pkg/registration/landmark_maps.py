"""
Small local maps of recently observed static landmarks.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import List

import numpy as np

logger = logging.getLogger(__name__)


@dataclass
class LandmarkMap:
    """
    Landmark positions in the owner's local frame with the frame each was last seen.

    Entries are kept at least merge_radius apart: a detection inside that
    radius of an entry refines it with a running mean.
    """
    owner: int
    stamp: int = 0
    positions: np.ndarray = field(default_factory=lambda: np.zeros((0, 2)))
    last_seen: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=int))
    hits: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=int))

    def __post_init__(self):
        self.positions = np.asarray(self.positions, dtype=float).reshape(-1, 2)
        self.last_seen = np.asarray(self.last_seen, dtype=int).reshape(-1)
        if len(self.hits) != len(self.positions):
            self.hits = np.ones(len(self.positions), dtype=int)
        self.hits = np.asarray(self.hits, dtype=int).reshape(-1)

    def __len__(self) -> int:
        return len(self.positions)

    @property
    def is_empty(self) -> bool:
        return len(self.positions) == 0

    def frames_since_seen(self) -> np.ndarray:
        return self.stamp - self.last_seen

    def observe(self, point, frame: int, merge_radius: float) -> int:
        """Merge a detection into the map and return the index of the entry it landed in"""
        point = np.asarray(point, dtype=float)
        self.stamp = max(self.stamp, frame)
        if len(self.positions):
            distances = np.linalg.norm(self.positions - point, axis=1)
            nearest = int(np.argmin(distances))
            if distances[nearest] <= merge_radius:
                count = self.hits[nearest] + 1
                self.positions[nearest] += (point - self.positions[nearest]) / count
                self.hits[nearest] = count
                self.last_seen[nearest] = frame
                return self._coalesce(nearest, merge_radius)

        self.positions = np.vstack([self.positions, point])
        self.last_seen = np.append(self.last_seen, frame)
        self.hits = np.append(self.hits, 1)
        logger.debug(f'Map of robot {self.owner}: new landmark at ({point[0]:.2f}, {point[1]:.2f})')
        return len(self.positions) - 1

    def _coalesce(self, index: int, merge_radius: float) -> int:
        """Fold entries that drifted within merge_radius of entry index into it"""
        while True:
            distances = np.linalg.norm(self.positions - self.positions[index], axis=1)
            distances[index] = np.inf
            other = int(np.argmin(distances))
            if distances[other] > merge_radius:
                return index
            total = self.hits[index] + self.hits[other]
            self.positions[index] = (self.hits[index] * self.positions[index]
                                     + self.hits[other] * self.positions[other]) / total
            self.hits[index] = total
            self.last_seen[index] = max(self.last_seen[index], self.last_seen[other])
            keep = np.arange(len(self.positions)) != other
            self.positions = self.positions[keep]
            self.last_seen = self.last_seen[keep]
            self.hits = self.hits[keep]
            if other < index:
                index -= 1

    def prune(self, frame: int, max_age_frames: int) -> int:
        """Drop entries unseen for more than max_age_frames; returns how many were dropped"""
        keep = (frame - self.last_seen) <= max_age_frames
        dropped = int(np.count_nonzero(~keep))
        if dropped:
            self.positions = self.positions[keep]
            self.last_seen = self.last_seen[keep]
            self.hits = self.hits[keep]
        return dropped

    def snapshot(self) -> 'LandmarkMap':
        return LandmarkMap(self.owner, self.stamp, self.positions.copy(),
                           self.last_seen.copy(), self.hits.copy())

    def to_record(self) -> str:
        """Line-oriented text record: owner, stamp, then one "x y last_seen" line per entry"""
        lines = [str(self.owner), str(self.stamp)]
        lines.extend(f'{x!r} {y!r} {int(seen)}' for (x, y), seen in zip(self.positions.tolist(), self.last_seen))
        return '\n'.join(lines) + '\n'

    @classmethod
    def from_record(cls, record: str) -> 'LandmarkMap':
        lines = [line for line in record.splitlines() if line.strip()]
        if len(lines) < 2:
            raise ValueError('landmark map record needs an owner line and a stamp line')
        owner, stamp = int(lines[0]), int(lines[1])
        positions: List[List[float]] = []
        last_seen: List[int] = []
        for line in lines[2:]:
            x, y, seen = line.split()
            positions.append([float(x), float(y)])
            last_seen.append(int(seen))
        return cls(owner, stamp, np.array(positions).reshape(-1, 2), np.array(last_seen, dtype=int))

    def nbytes(self) -> int:
        return 16 + 24 * len(self.positions)
