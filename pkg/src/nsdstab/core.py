"""Partitioned gain matrices, block mixing structure and the scaled product.

A gain matrix with m output rows and n input columns carries an ordered
column partition p_1..p_m assigning each input to one output channel.
A nonnegative scaling diagonal E and a block mixing matrix K collapse each
block to a linear combination of its columns; blocks whose scale-gain
products all vanish are dropped from the analysis (their column and the
matching output row are removed), so the product is always square on the
remaining active blocks.

All indices exposed by this module (blocks, offsets, flat column indices,
selection tuples) are 1-based, matching the usual mathematical notation.
Array internals are 0-based as usual.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

# A scale-gain product is treated as zero when it is this small relative to
# the largest product; only the products enter the column combination, so
# activity is decided on them rather than on the scales alone.
ZERO_PRODUCT_RTOL = 1e-14


class DocumentError(ValueError):
    """Raised when a structured text document cannot be parsed or validated."""


def _frozen_array(values, dtype=float):
    arr = np.array(values, dtype=dtype)
    arr.setflags(write=False)
    return arr


def _check_partition(partition):
    partition = tuple(int(p) for p in partition)
    if not partition:
        raise ValueError("partition must contain at least one block")
    if any(p < 1 for p in partition):
        raise ValueError("partition entries must be positive integers")
    return partition


def _ragged_rows(values, partition, name):
    if len(values) != len(partition):
        raise ValueError(f"{name} must have one row per partition block")
    rows = []
    for i, (row, p) in enumerate(zip(values, partition)):
        arr = np.atleast_1d(np.array(row, dtype=float))
        if arr.shape != (p,):
            raise ValueError(f"{name} row {i + 1} must have length {p}")
        if not np.all(np.isfinite(arr)):
            raise ValueError(f"{name} row {i + 1} contains non-finite entries")
        arr.setflags(write=False)
        rows.append(arr)
    return tuple(rows)


@dataclass(frozen=True, eq=False)
class PartitionedGain:
    """Real m-by-n matrix with an ordered column partition p_1..p_m."""

    entries: np.ndarray
    partition: tuple[int, ...]

    def __post_init__(self):
        entries = np.asarray(self.entries, dtype=float)
        if entries.ndim != 2:
            raise ValueError("entries must be a 2-D matrix")
        if not np.all(np.isfinite(entries)):
            raise ValueError("entries contain non-finite values")
        partition = _check_partition(self.partition)
        m, n = entries.shape
        if m < 1 or n < m:
            raise ValueError(f"need n >= m >= 1, got m={m}, n={n}")
        if len(partition) != m:
            raise ValueError(f"partition has {len(partition)} blocks, matrix has {m} rows")
        if sum(partition) != n:
            raise ValueError(f"partition sums to {sum(partition)}, matrix has {n} columns")
        object.__setattr__(self, "entries", _frozen_array(entries))
        object.__setattr__(self, "partition", partition)

    @property
    def m(self) -> int:
        return self.entries.shape[0]

    @property
    def n(self) -> int:
        return self.entries.shape[1]

    def block_slice(self, block: int) -> slice:
        """0-based column slice of a 1-based block index."""
        if not 1 <= block <= self.m:
            raise ValueError(f"block {block} out of range 1..{self.m}")
        start = sum(self.partition[: block - 1])
        return slice(start, start + self.partition[block - 1])

    def column(self, block: int, offset: int) -> np.ndarray:
        """Column vector addressed by 1-based (block, offset)."""
        return self.entries[:, flat_index(self.partition, block, offset) - 1]


@dataclass(frozen=True, eq=False)
class MixingMatrix:
    """Block mixing gains k_{i,1}..k_{i,p_i} per output channel.

    Realized as the n-by-m block matrix whose i-th column holds the i-th
    gain row in that block's rows and zeros elsewhere.
    """

    gains: tuple[np.ndarray, ...]

    def __post_init__(self):
        partition = _check_partition(len(row) if np.ndim(row) else 1 for row in self.gains)
        rows = _ragged_rows(self.gains, partition, "gains")
        if any((row < 0).any() for row in rows):
            raise ValueError("mixing gains must be nonnegative")
        object.__setattr__(self, "gains", rows)

    @classmethod
    def ones(cls, partition) -> "MixingMatrix":
        return cls(tuple(np.ones(p) for p in _check_partition(partition)))

    @property
    def partition(self) -> tuple[int, ...]:
        return tuple(len(row) for row in self.gains)

    def as_vector(self) -> np.ndarray:
        return np.concatenate(self.gains)

    def as_dense(self) -> np.ndarray:
        partition = self.partition
        n, m = sum(partition), len(partition)
        dense = np.zeros((n, m))
        start = 0
        for i, row in enumerate(self.gains):
            dense[start : start + len(row), i] = row
            start += len(row)
        return dense


@dataclass(frozen=True, eq=False)
class ScalingDiagonal:
    """Nonnegative diagonal scales, stored per block to match a partition."""

    epsilons: tuple[np.ndarray, ...]

    def __post_init__(self):
        partition = _check_partition(len(row) if np.ndim(row) else 1 for row in self.epsilons)
        rows = _ragged_rows(self.epsilons, partition, "epsilons")
        if any((row < 0).any() for row in rows):
            raise ValueError("scaling entries must be nonnegative")
        object.__setattr__(self, "epsilons", rows)

    @classmethod
    def ones(cls, partition) -> "ScalingDiagonal":
        return cls(tuple(np.ones(p) for p in _check_partition(partition)))

    @classmethod
    def from_vector(cls, partition, values) -> "ScalingDiagonal":
        partition = _check_partition(partition)
        values = np.asarray(values, dtype=float)
        if values.shape != (sum(partition),):
            raise ValueError("flat scaling vector does not match the partition")
        out, start = [], 0
        for p in partition:
            out.append(values[start : start + p])
            start += p
        return cls(tuple(out))

    @property
    def partition(self) -> tuple[int, ...]:
        return tuple(len(row) for row in self.epsilons)

    def as_vector(self) -> np.ndarray:
        return np.concatenate(self.epsilons)

    @property
    def strictly_positive(self) -> bool:
        return bool(all((row > 0).all() for row in self.epsilons))


@dataclass(frozen=True)
class ActiveSet:
    """Blocks that survive the zero-scale reduction, with their live offsets."""

    blocks: tuple[int, ...]
    columns: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        if len(self.blocks) != len(self.columns):
            raise ValueError("one offset tuple per active block required")

    @property
    def size(self) -> int:
        return len(self.blocks)


def flat_index(partition, block: int, offset: int) -> int:
    """Map a 1-based (block, offset) column address to its 1-based flat index."""
    partition = _check_partition(partition)
    if not 1 <= block <= len(partition):
        raise ValueError(f"block {block} out of range 1..{len(partition)}")
    if not 1 <= offset <= partition[block - 1]:
        raise ValueError(f"offset {offset} out of range 1..{partition[block - 1]}")
    return sum(partition[: block - 1]) + offset


def block_offset(partition, index: int) -> tuple[int, int]:
    """Inverse of flat_index: 1-based flat column index to (block, offset)."""
    partition = _check_partition(partition)
    if not 1 <= index <= sum(partition):
        raise ValueError(f"flat index {index} out of range 1..{sum(partition)}")
    remaining = index
    for block, p in enumerate(partition, start=1):
        if remaining <= p:
            return block, remaining
        remaining -= p
    raise AssertionError("unreachable")


def active_mask(products) -> np.ndarray:
    """Boolean mask of scale-gain products that count as nonzero.

    Vectorized over leading axes; the threshold is relative to the largest
    magnitude in each trailing row, so uniform rescaling never changes the
    mask.
    """
    mags = np.abs(np.asarray(products, dtype=float))
    top = mags.max(axis=-1, keepdims=True)
    return mags > ZERO_PRODUCT_RTOL * top


def apply_scaling(
    gain: PartitionedGain, scaling: ScalingDiagonal, mixing: MixingMatrix
) -> tuple[np.ndarray, ActiveSet]:
    """Collapse each block to the scale-gain combination of its columns.

    Column j of the result is sum_r eps_{j,r} k_{j,r} a_{j,r}; blocks whose
    products are all zero are removed together with their output row, giving
    a k-by-k matrix over the k active blocks.
    """
    partition = gain.partition
    if scaling.partition != partition or mixing.partition != partition:
        raise ValueError("partition mismatch between gain, scaling and mixing")
    weights = scaling.as_vector() * mixing.as_vector()
    col_active = active_mask(weights)

    blocks, columns, combined = [], [], []
    for b in range(1, gain.m + 1):
        sl = gain.block_slice(b)
        live = col_active[sl]
        if not live.any():
            continue
        blocks.append(b)
        columns.append(tuple(int(j + 1) for j in np.flatnonzero(live)))
        combined.append(gain.entries[:, sl] @ weights[sl])

    active = ActiveSet(tuple(blocks), tuple(columns))
    if not blocks:
        return np.empty((0, 0)), active
    rows = np.array(blocks) - 1
    reduced = np.column_stack(combined)[rows, :]
    return reduced, active


def kbar_matrix(scaling: ScalingDiagonal, mixing: MixingMatrix) -> np.ndarray:
    """Dense n-by-m product of the scaling diagonal and the mixing matrix."""
    if scaling.partition != mixing.partition:
        raise ValueError("partition mismatch between scaling and mixing")
    return scaling.as_vector()[:, None] * mixing.as_dense()


def _parse_entries(raw, m, n, name="A"):
    arr = np.asarray(raw, dtype=float)
    if arr.ndim == 1:
        if arr.size != m * n:
            raise DocumentError(f"{name} has {arr.size} entries, expected {m * n}")
        arr = arr.reshape(m, n)
    elif arr.shape != (m, n):
        raise DocumentError(f"{name} has shape {arr.shape}, expected ({m}, {n})")
    if not np.all(np.isfinite(arr)):
        raise DocumentError(f"{name} contains non-finite entries")
    return arr


def read_gain_document(document: str) -> tuple[PartitionedGain, MixingMatrix | None]:
    """Parse a gain-system document (JSON text).

    Required fields: m, n, partition (list of positive ints summing to n),
    A (row-major flat list or nested rows).  Optional: K_gains, a ragged
    list of nonnegative mixing gains matching the partition.
    """
    try:
        obj = json.loads(document)
    except json.JSONDecodeError as exc:
        raise DocumentError(f"invalid JSON: {exc}") from exc
    if not isinstance(obj, dict):
        raise DocumentError("gain document must be a JSON object")
    for key in ("m", "n", "partition", "A"):
        if key not in obj:
            raise DocumentError(f"gain document missing field '{key}'")
    try:
        m, n = int(obj["m"]), int(obj["n"])
        partition = _check_partition(obj["partition"])
    except (TypeError, ValueError) as exc:
        raise DocumentError(str(exc)) from exc
    if sum(partition) != n:
        raise DocumentError(f"partition sums to {sum(partition)}, expected n={n}")
    if len(partition) != m:
        raise DocumentError(f"partition has {len(partition)} blocks, expected m={m}")
    try:
        entries = _parse_entries(obj["A"], m, n)
        gain = PartitionedGain(entries, partition)
    except (TypeError, ValueError) as exc:
        raise DocumentError(str(exc)) from exc
    mixing = None
    if obj.get("K_gains") is not None:
        try:
            mixing = MixingMatrix(tuple(np.asarray(r, dtype=float) for r in obj["K_gains"]))
        except (TypeError, ValueError) as exc:
            raise DocumentError(f"bad K_gains: {exc}") from exc
        if mixing.partition != partition:
            raise DocumentError("K_gains shape does not match the partition")
    return gain, mixing


def load_gain(document: str) -> PartitionedGain:
    """Parse and validate the gain matrix of a gain-system document."""
    gain, _ = read_gain_document(document)
    return gain


def gain_document(gain: PartitionedGain, mixing: MixingMatrix | None = None) -> str:
    """Serialize a gain system; floats round-trip losslessly."""
    obj = {
        "m": gain.m,
        "n": gain.n,
        "partition": list(gain.partition),
        "A": [float(x) for x in gain.entries.ravel()],
    }
    if mixing is not None:
        obj["K_gains"] = [[float(x) for x in row] for row in mixing.gains]
    return json.dumps(obj, sort_keys=True)
