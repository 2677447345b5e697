"""Shared generators for the test suite."""

from __future__ import annotations

import numpy as np

from nsdstab import MixingMatrix, PartitionedGain, PlantRealization, ScalingDiagonal


def random_partition(rng, m, max_block=3):
    return tuple(int(rng.integers(1, max_block + 1)) for _ in range(m))


def certified_gain(rng, partition):
    """Gain whose every selection matrix is strictly diagonally dominant in
    both senses, so the uniform diagonal certifies each one."""
    m = len(partition)
    n = sum(partition)
    entries = np.zeros((m, n))
    spread = 0.3 / max(1, m - 1)
    col = 0
    for block in range(m):
        for _ in range(partition[block]):
            entries[:, col] = rng.uniform(-spread, spread, size=m)
            entries[block, col] = 2.0 + rng.uniform(0.0, 1.0)
            col += 1
    return PartitionedGain(entries, partition)


def random_mixing(rng, partition, lo=0.2, hi=2.0):
    return MixingMatrix(tuple(rng.uniform(lo, hi, size=p) for p in partition))


def random_positive_scaling(rng, partition, lo=0.1, hi=10.0):
    return ScalingDiagonal(
        tuple(np.exp(rng.uniform(np.log(lo), np.log(hi), size=p)) for p in partition)
    )


def random_stable_plant(rng, q, m, n, decay=(1.0, 2.0), coupling=0.5):
    raw = rng.normal(size=(q, q))
    shift = float(np.linalg.eigvals(raw).real.max())
    a = raw - (shift + rng.uniform(*decay)) * np.eye(q)
    b = coupling * rng.uniform(-1.0, 1.0, size=(q, n))
    c = coupling * rng.uniform(-1.0, 1.0, size=(m, q))
    d = 0.2 * rng.uniform(-1.0, 1.0, size=(m, n))
    return PlantRealization(a, b, c, d)


def sweep_corpus_plant(rng, want_stable):
    """Plant plus Kbar whose reduced model is decisively stable or unstable
    (margin above 0.05 either way); rejection-sampled deterministically."""
    from nsdstab import reduced_model_matrix

    while True:
        q = int(rng.integers(2, 7))
        m = int(rng.integers(1, 4))
        n = int(rng.integers(m, 7))
        plant = random_stable_plant(rng, q, m, n)
        partition = random_composition(rng, n, m)
        kbar = np.zeros((n, m))
        start = 0
        for i, p in enumerate(partition):
            kbar[start : start + p, i] = rng.uniform(0.2, 1.0, size=p)
            start += p
        reduced = reduced_model_matrix(plant, kbar)
        max_re = float(np.linalg.eigvals(reduced).real.max())
        if want_stable and max_re < -0.05:
            return plant, kbar, -max_re
        if not want_stable and max_re > 0.05:
            return plant, kbar, -max_re


def random_composition(rng, n, m):
    """Composition of n into m positive parts, uniform over cut positions."""
    cuts = np.sort(rng.choice(np.arange(1, n), size=m - 1, replace=False)) if m > 1 else []
    bounds = [0, *cuts, n]
    return tuple(int(bounds[i + 1] - bounds[i]) for i in range(m))
