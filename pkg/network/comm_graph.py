"""
Undirected communication graph between robots.
"""
from __future__ import annotations

from typing import FrozenSet, Iterable, Tuple

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components, shortest_path

from network.exceptions import DisconnectedGraph


class CommGraph:
    """Symmetric adjacency without self-loops; connectivity is checked on construction"""

    def __init__(self, adjacency):
        adjacency = np.array(adjacency, dtype=bool)
        if adjacency.ndim != 2 or adjacency.shape[0] != adjacency.shape[1]:
            raise ValueError('adjacency must be a square matrix')
        if not np.array_equal(adjacency, adjacency.T):
            raise ValueError('adjacency must be symmetric')
        if np.any(np.diag(adjacency)):
            raise ValueError('adjacency must not contain self-loops')
        if adjacency.shape[0] == 0:
            raise ValueError('communication graph needs at least one robot')

        components, _ = connected_components(csr_matrix(adjacency), directed=False)
        if components > 1:
            raise DisconnectedGraph(f'communication graph must be connected '
                                    f'(found {components} components)')
        self.adjacency = adjacency
        self.adjacency.setflags(write=False)
        self._neighbors = [frozenset(np.nonzero(row)[0].tolist()) for row in adjacency]

    @property
    def n(self) -> int:
        return self.adjacency.shape[0]

    @classmethod
    def complete(cls, n: int) -> 'CommGraph':
        return cls(~np.eye(n, dtype=bool))

    @classmethod
    def line(cls, n: int) -> 'CommGraph':
        return cls.from_edges(n, [(i, i + 1) for i in range(n - 1)])

    @classmethod
    def from_edges(cls, n: int, edges: Iterable[Tuple[int, int]]) -> 'CommGraph':
        adjacency = np.zeros((n, n), dtype=bool)
        for i, j in edges:
            if not (0 <= i < n and 0 <= j < n):
                raise ValueError(f'edge ({i}, {j}) references a robot outside 0..{n - 1}')
            if i == j:
                raise ValueError(f'edge ({i}, {j}) is a self-loop')
            adjacency[i, j] = adjacency[j, i] = True
        return cls(adjacency)

    def neighbors(self, i: int) -> FrozenSet[int]:
        if not 0 <= i < self.n:
            raise ValueError(f'robot {i} is not in a graph of {self.n} robots')
        return self._neighbors[i]

    def are_neighbors(self, i: int, j: int) -> bool:
        return bool(self.adjacency[i, j])

    def diameter(self) -> int:
        distances = shortest_path(csr_matrix(self.adjacency), unweighted=True, directed=False)
        return int(distances.max())


def neighbors(g: CommGraph, i: int) -> FrozenSet[int]:
    return g.neighbors(i)
