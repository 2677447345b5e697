"""Enumeration of the square column-selection matrices of a partitioned gain.

Picking exactly one column from each block of an m-by-n partitioned matrix
yields an m-by-m matrix; there are N = prod(p_i) of them.  When blocks are
deactivated the same construction runs over the remaining blocks (and their
output rows), giving reduced k-by-k variants.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Iterator

import numpy as np

from .core import PartitionedGain, flat_index


def _check_blocks(partition, blocks):
    m = len(partition)
    if blocks is None:
        return tuple(range(1, m + 1))
    blocks = tuple(int(b) for b in blocks)
    if not blocks:
        raise ValueError("at least one active block required")
    if list(blocks) != sorted(set(blocks)):
        raise ValueError("active blocks must be strictly increasing")
    if blocks[0] < 1 or blocks[-1] > m:
        raise ValueError(f"active blocks must lie in 1..{m}")
    return blocks


@dataclass(frozen=True, order=True)
class SquaredSelection:
    """One chosen column offset per active block, both 1-based."""

    blocks: tuple[int, ...]
    kappa: tuple[int, ...]

    def __post_init__(self):
        if len(self.blocks) != len(self.kappa):
            raise ValueError("one offset per active block required")

    @property
    def size(self) -> int:
        return len(self.blocks)


def count_selections(partition, blocks=None) -> int:
    """Number of selection matrices over the active blocks: prod of p_i."""
    partition = tuple(int(p) for p in partition)
    blocks = _check_blocks(partition, blocks)
    return math.prod(partition[b - 1] for b in blocks)


def enumerate_selections(partition, blocks=None) -> Iterator[SquaredSelection]:
    """Yield all selections in lexicographic order of their offset tuples."""
    partition = tuple(int(p) for p in partition)
    blocks = _check_blocks(partition, blocks)
    ranges = [range(1, partition[b - 1] + 1) for b in blocks]
    for kappa in itertools.product(*ranges):
        yield SquaredSelection(blocks, kappa)


def selection_rank(partition, kappa) -> int:
    """0-based lexicographic rank of a full-dimension selection tuple."""
    partition = tuple(int(p) for p in partition)
    if len(kappa) != len(partition):
        raise ValueError("selection length does not match the partition")
    rank = 0
    for k, p in zip(kappa, partition):
        if not 1 <= k <= p:
            raise ValueError(f"offset {k} out of range 1..{p}")
        rank = rank * p + (k - 1)
    return rank


def extract_squared(gain: PartitionedGain, selection: SquaredSelection) -> np.ndarray:
    """Square matrix whose i-th column is the selected column of the i-th
    active block, restricted to the active output rows."""
    blocks = _check_blocks(gain.partition, selection.blocks)
    cols = [
        flat_index(gain.partition, b, k) - 1 for b, k in zip(blocks, selection.kappa)
    ]
    rows = [b - 1 for b in blocks]
    return gain.entries[np.ix_(rows, cols)].copy()
