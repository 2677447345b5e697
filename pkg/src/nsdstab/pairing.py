"""Search and ranking of decentralized input-output pairings.

A pairing assigns each of the n inputs to exactly one of the m outputs
(surjectively), inducing a column regrouping of the raw gain matrix.  Every
pairing is scored by the certificate machinery: all selection matrices
certified gives the strongest verdict, all of them column diagonally
dominant the alternate one, a provably uncertifiable selection refutes the
sufficient condition, and anything else is inconclusive-infeasible.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterator

import numpy as np

from . import vl
from .core import PartitionedGain
from .squared import enumerate_selections, extract_squared

PAIRING_CERTIFIED = "certified-sufficient"
PAIRING_DOMINANCE = "dominance-only"
PAIRING_INFEASIBLE = "infeasible-sufficient"
PAIRING_REFUTED = "refuted"

_VERDICT_ORDER = {
    PAIRING_CERTIFIED: 0,
    PAIRING_DOMINANCE: 1,
    PAIRING_INFEASIBLE: 2,
    PAIRING_REFUTED: 3,
}

DEFAULT_CAP = 100_000


@dataclass(frozen=True)
class PairingAssignment:
    """outputs[i] is the 1-based output channel of 1-based input i+1."""

    outputs: tuple[int, ...]

    def __post_init__(self):
        if not self.outputs:
            raise ValueError("assignment must cover at least one input")
        object.__setattr__(self, "outputs", tuple(int(o) for o in self.outputs))

    def n_outputs(self) -> int:
        return max(self.outputs)

    def induced(self) -> tuple[tuple[int, ...], tuple[int, ...]]:
        """(partition, column order): inputs grouped by output, original
        column order preserved inside each block."""
        m = self.n_outputs()
        groups: list[list[int]] = [[] for _ in range(m)]
        for idx, out in enumerate(self.outputs, start=1):
            if not 1 <= out <= m:
                raise ValueError(f"output {out} out of range")
            groups[out - 1].append(idx)
        if any(not g for g in groups):
            raise ValueError("every output must receive at least one input")
        partition = tuple(len(g) for g in groups)
        order = tuple(idx for g in groups for idx in g)
        return partition, order


@dataclass(frozen=True)
class PairingReport:
    assignment: PairingAssignment
    verdict: str
    margin: float
    heuristic: bool = False


def surjection_count(m: int, n: int) -> int:
    """Number of onto maps from n inputs to m outputs (inclusion-exclusion)."""
    if m < 1 or n < m:
        raise ValueError(f"need n >= m >= 1, got m={m}, n={n}")
    return sum((-1) ** i * math.comb(m, i) * (m - i) ** n for i in range(m + 1))


def enumerate_assignments(m: int, n: int, cap: int | None = None) -> Iterator[PairingAssignment]:
    """Stream surjective assignments in lexicographic order, at most cap."""
    if m < 1 or n < m:
        raise ValueError(f"need n >= m >= 1, got m={m}, n={n}")
    if cap is not None and cap < 1:
        raise ValueError("cap must be at least 1")
    emitted = 0
    for outputs in _surjections(m, n):
        if cap is not None and emitted >= cap:
            return
        yield PairingAssignment(outputs)
        emitted += 1


def _surjections(m, n):
    import itertools

    for outputs in itertools.product(range(1, m + 1), repeat=n):
        if len(set(outputs)) == m:
            yield outputs


def permuted_gain(entries, assignment: PairingAssignment) -> tuple[PartitionedGain, tuple[int, ...]]:
    """Regroup the raw matrix columns into the blocks the assignment induces."""
    entries = np.asarray(entries, dtype=float)
    if entries.ndim != 2:
        raise ValueError("gain entries must be a 2-D matrix")
    m, n = entries.shape
    if len(assignment.outputs) != n:
        raise ValueError("assignment length does not match the number of inputs")
    if assignment.n_outputs() != m:
        raise ValueError("assignment outputs do not match the number of rows")
    partition, order = assignment.induced()
    cols = [o - 1 for o in order]
    return PartitionedGain(entries[:, cols], partition), order


def evaluate_pairing(
    entries,
    assignment: PairingAssignment,
    tol: float = vl.DEFAULT_TOL,
    budget: int = vl.DEFAULT_BUDGET,
    heuristic: bool = False,
) -> PairingReport:
    """Score one pairing by certificates and by column dominance.

    The reported margin is the smallest certificate margin when certified,
    the smallest dominance slack for dominance-only, and otherwise the
    worst best-effort margin clamped to zero so that a positive margin
    always means a feasible verdict.
    """
    gain, _ = permuted_gain(entries, assignment)
    verdicts = vl.certify_individual_vl(gain, tol, budget)

    dominance_ok = True
    dominance_slack = np.inf
    for sel in enumerate_selections(gain.partition):
        ok, slack = vl.check_column_dominance(extract_squared(gain, sel))
        dominance_ok = dominance_ok and ok
        dominance_slack = min(dominance_slack, float(slack.min()))

    if vl.all_certified(verdicts):
        margin = min(v.certificate.margin for v in verdicts.values())
        return PairingReport(assignment, PAIRING_CERTIFIED, float(margin), heuristic)
    if dominance_ok:
        return PairingReport(assignment, PAIRING_DOMINANCE, dominance_slack, heuristic)
    worst = min(min(v.best_margin, 0.0) for v in verdicts.values())
    if any(v.status == vl.REFUTED for v in verdicts.values()):
        return PairingReport(assignment, PAIRING_REFUTED, float(worst), heuristic)
    return PairingReport(assignment, PAIRING_INFEASIBLE, float(worst), heuristic)


def greedy_assignment(entries) -> PairingAssignment:
    """Heuristic pairing: largest-magnitude entry per input, repaired to be
    surjective, then improved by pairwise swaps on the magnitude score.
    Clearly a heuristic; used only beyond the enumeration cap."""
    entries = np.asarray(entries, dtype=float)
    m, n = entries.shape
    outputs = [int(np.argmax(np.abs(entries[:, j]))) + 1 for j in range(n)]

    def block_sizes():
        sizes = [0] * m
        for o in outputs:
            sizes[o - 1] += 1
        return sizes

    sizes = block_sizes()
    for missing in range(1, m + 1):
        if sizes[missing - 1] > 0:
            continue
        movable = [j for j in range(n) if sizes[outputs[j] - 1] > 1]
        j = max(movable, key=lambda jj: (abs(entries[missing - 1, jj]), -jj))
        sizes[outputs[j] - 1] -= 1
        outputs[j] = missing
        sizes[missing - 1] += 1

    def score():
        return sum(abs(entries[outputs[j] - 1, j]) for j in range(n))

    improved = True
    while improved:
        improved = False
        for a in range(n):
            for b in range(a + 1, n):
                if outputs[a] == outputs[b]:
                    continue
                base = abs(entries[outputs[a] - 1, a]) + abs(entries[outputs[b] - 1, b])
                swapped = abs(entries[outputs[b] - 1, a]) + abs(entries[outputs[a] - 1, b])
                if swapped > base + 1e-15:
                    outputs[a], outputs[b] = outputs[b], outputs[a]
                    improved = True
    return PairingAssignment(tuple(outputs))


def rank_pairings(
    entries,
    cap: int = DEFAULT_CAP,
    tol: float = vl.DEFAULT_TOL,
    budget: int = vl.DEFAULT_BUDGET,
) -> tuple[list[PairingReport], bool]:
    """Evaluate assignments up to the cap and rank them.

    Order: verdict class (certified, dominance-only, infeasible, refuted),
    then margin descending, then lexicographic assignment.  Returns the
    ranked reports and whether the enumeration was truncated; a truncated
    run also scores the greedy heuristic assignment, flagged as such.
    """
    entries = np.asarray(entries, dtype=float)
    m, n = entries.shape
    total = surjection_count(m, n)
    truncated = total > cap

    reports = [
        evaluate_pairing(entries, pa, tol, budget)
        for pa in enumerate_assignments(m, n, cap)
    ]
    if truncated:
        extra = greedy_assignment(entries)
        if all(r.assignment != extra for r in reports):
            reports.append(evaluate_pairing(entries, extra, tol, budget, heuristic=True))

    reports.sort(
        key=lambda r: (_VERDICT_ORDER[r.verdict], -r.margin, r.assignment.outputs)
    )
    return reports, truncated
