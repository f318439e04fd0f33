"""Clique-compressed moment-matrix indexing shared by the FK and SOS builders.

Rows are vertex sets of size <= 2 stored as int pairs padded with -1: () -> (-1, -1),
{i} -> (i, -1), {a, b} -> (a, b) with a < b. Only cliques are kept as rows.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations

import numpy as np


@dataclass(frozen=True, eq=False)
class MomentIndex:
    n: int  # number of vertices
    rows: np.ndarray = field(repr=False)  # (dim, 2)
    block_index: tuple[int, int, int]  # start rows of the size-0, size-1, size-2 blocks

    @property
    def dim(self) -> int:
        return len(self.rows)


def moment_index(adjacency: np.ndarray, degree: int = 2) -> MomentIndex:
    """Rows: the empty set, singletons and (for degree 2) edges."""
    n = adjacency.shape[0]
    rows = [(-1, -1)] + [(i, -1) for i in range(n)]
    if degree >= 2:
        rows += [(a, b) for a, b in combinations(range(n), 2) if adjacency[a, b]]
    return MomentIndex(n, np.array(rows, dtype=np.int64), (0, 1, 1 + n))


def union_sets(left: np.ndarray, right: np.ndarray) -> np.ndarray:
    """Sorted union of padded row tuples, padded with -1 to width 4 (leading -1s)."""
    e = np.sort(np.concatenate([left, right], axis=-1), axis=-1)
    dup = np.zeros(e.shape, dtype=bool)
    dup[..., 1:] = (e[..., 1:] == e[..., :-1]) & (e[..., 1:] >= 0)
    e = np.where(dup, -1, e)
    return np.sort(e, axis=-1)


def union_profile(adjacency: np.ndarray, left: np.ndarray, right: np.ndarray):
    """For each entry: union set (width 4), its size, and whether it is a clique."""
    u = union_sets(left, right)
    size = (u >= 0).sum(axis=-1)
    clique = np.ones(size.shape, dtype=bool)
    for k, l in combinations(range(4), 2):
        x, y = u[..., k], u[..., l]
        both = (x >= 0) & (y >= 0)
        clique &= ~both | (adjacency[np.maximum(x, 0), np.maximum(y, 0)] == 1)
    return u, size, clique


def entry_profile(adjacency: np.ndarray, index: MomentIndex):
    """Union profile for every (row, column) pair of the moment matrix."""
    d = index.dim
    left = np.broadcast_to(index.rows[:, None, :], (d, d, 2))
    right = np.broadcast_to(index.rows[None, :, :], (d, d, 2))
    return union_profile(adjacency, left, right)
