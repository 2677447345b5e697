"""Constructive solution of the combinatorial weight-existence problem.

Given m index groups of sizes p_1..p_m, a strictly positive factor
lambda^phi_kappa for every group phi and selection tuple kappa, and target
ratios k^phi_j > 0, the goal is strictly positive global weights
gamma_kappa whose payoffs

    P_{phi,j} = sum over kappa with kappa_phi = j of gamma_kappa lambda^phi_kappa

satisfy P_{phi,j+1} / P_{phi,1} = k^phi_j for every group and index.

The construction processes groups in ascending order.  For the first group
the ratio is enforced term-wise for every tail tuple; each later group
accumulates the coefficients produced by the earlier substitutions and
enforces its ratios term-wise on those.  Collapsing the backward
substitution, every weight is the product of its per-group factors times
the free base weight gamma_(1,..,1), so all weights stay strictly positive.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .squared import enumerate_selections, selection_rank

# Switch to log-space accumulation for huge selection counts or wildly
# scaled factors, where chained products can leave the double range.
LOG_SPACE_COUNT = 10**4
LOG_SPACE_DYNAMIC_RANGE = 1e6


@dataclass(frozen=True, eq=False)
class WeightProblem:
    """Positive factor table and target payoff ratios over a partition.

    lambdas has shape (m, N) indexed by (group, lexicographic selection
    rank); ratios[phi] has length p_phi - 1.
    """

    partition: tuple[int, ...]
    lambdas: np.ndarray
    ratios: tuple[np.ndarray, ...]

    def __post_init__(self):
        partition = tuple(int(p) for p in self.partition)
        if not partition or any(p < 1 for p in partition):
            raise ValueError("partition entries must be positive integers")
        n_sel = math.prod(partition)
        lambdas = np.asarray(self.lambdas, dtype=float)
        if lambdas.shape != (len(partition), n_sel):
            raise ValueError(
                f"lambda table must have shape ({len(partition)}, {n_sel}), got {lambdas.shape}"
            )
        if not np.all(np.isfinite(lambdas)) or not (lambdas > 0).all():
            raise ValueError("lambda factors must be strictly positive")
        if len(self.ratios) != len(partition):
            raise ValueError("one ratio vector per group required")
        ratios = []
        for phi, (vec, p) in enumerate(zip(self.ratios, partition), start=1):
            arr = np.atleast_1d(np.array(vec, dtype=float))
            if arr.shape != (p - 1,):
                raise ValueError(f"ratio vector for group {phi} must have length {p - 1}")
            if not np.all(np.isfinite(arr)) or not (arr > 0).all():
                raise ValueError("target ratios must be strictly positive")
            arr.setflags(write=False)
            ratios.append(arr)
        lambdas = lambdas.copy()
        lambdas.setflags(write=False)
        object.__setattr__(self, "partition", partition)
        object.__setattr__(self, "lambdas", lambdas)
        object.__setattr__(self, "ratios", tuple(ratios))

    @property
    def n_selections(self) -> int:
        return math.prod(self.partition)

    @classmethod
    def uniform_lambdas(cls, partition, ratios) -> "WeightProblem":
        partition = tuple(int(p) for p in partition)
        n_sel = math.prod(partition)
        return cls(partition, np.ones((len(partition), n_sel)), tuple(ratios))


@dataclass(frozen=True, eq=False)
class WeightSystem:
    """Strictly positive global weights in lexicographic selection order."""

    partition: tuple[int, ...]
    gammas: np.ndarray
    base: float

    def __post_init__(self):
        partition = tuple(int(p) for p in self.partition)
        gammas = np.asarray(self.gammas, dtype=float)
        if gammas.shape != (math.prod(partition),):
            raise ValueError("one weight per selection required")
        if not np.all(np.isfinite(gammas)) or not (gammas > 0).all():
            raise ValueError("weights must be strictly positive")
        if not self.base > 0:
            raise ValueError("base weight must be strictly positive")
        gammas = gammas.copy()
        gammas.setflags(write=False)
        object.__setattr__(self, "partition", partition)
        object.__setattr__(self, "gammas", gammas)

    def gamma(self, kappa) -> float:
        """Weight of a full-dimension selection tuple."""
        return float(self.gammas[selection_rank(self.partition, kappa)])


def payoff(ws: WeightSystem, wp: WeightProblem, group: int, index: int) -> float:
    """Weighted payoff P_{group,index} by direct enumeration.

    Deliberately brute force: this is the independent oracle against which
    construct_weights is checked.
    """
    if ws.partition != wp.partition:
        raise ValueError("weight system and problem partitions differ")
    if not 1 <= group <= len(wp.partition):
        raise ValueError(f"group {group} out of range 1..{len(wp.partition)}")
    if not 1 <= index <= wp.partition[group - 1]:
        raise ValueError(f"index {index} out of range 1..{wp.partition[group - 1]}")
    total = 0.0
    for rank, sel in enumerate(enumerate_selections(wp.partition)):
        if sel.kappa[group - 1] == index:
            total += float(ws.gammas[rank]) * float(wp.lambdas[group - 1, rank])
    return total


def _stage_multipliers_linear(wp: WeightProblem):
    shape = wp.partition
    coef = np.ones(shape)
    for g, p in enumerate(shape):
        lam_g = wp.lambdas[g].reshape(shape)
        acc = np.sum(coef * lam_g, axis=tuple(range(g)))
        mult = np.empty_like(acc)
        mult[0] = 1.0
        for j in range(1, p):
            mult[j] = wp.ratios[g][j - 1] * acc[0] / acc[j]
        coef = coef * mult[(np.newaxis,) * g + (Ellipsis,)]
    return coef


def _stage_multipliers_log(wp: WeightProblem):
    from scipy.special import logsumexp

    shape = wp.partition
    log_coef = np.zeros(shape)
    for g, p in enumerate(shape):
        log_lam = np.log(wp.lambdas[g]).reshape(shape)
        axes = tuple(range(g))
        log_acc = logsumexp(log_coef + log_lam, axis=axes) if axes else log_coef + log_lam
        log_mult = np.empty_like(log_acc)
        log_mult[0] = 0.0
        for j in range(1, p):
            log_mult[j] = np.log(wp.ratios[g][j - 1]) + log_acc[0] - log_acc[j]
        log_coef = log_coef + log_mult[(np.newaxis,) * g + (Ellipsis,)]
    return np.exp(log_coef)


def construct_weights(
    wp: WeightProblem, base: float = 1.0, log_space: bool | None = None
) -> WeightSystem:
    """Build strictly positive weights realizing all target payoff ratios.

    Groups are processed in ascending index order; the free base parameter
    is the weight of the all-ones selection (default 1).  Scaling base by
    c > 0 scales every weight by c and leaves all payoff ratios unchanged.
    """
    if not base > 0:
        raise ValueError("base weight must be strictly positive")
    if log_space is None:
        spread = float(wp.lambdas.max() / wp.lambdas.min())
        log_space = wp.n_selections > LOG_SPACE_COUNT or spread > LOG_SPACE_DYNAMIC_RANGE
    coef = _stage_multipliers_log(wp) if log_space else _stage_multipliers_linear(wp)
    return WeightSystem(wp.partition, coef.reshape(-1) * base, float(base))


def verify_ratios(ws: WeightSystem, wp: WeightProblem) -> float:
    """Largest relative error across all prescribed payoff ratios."""
    if ws.partition != wp.partition:
        raise ValueError("weight system and problem partitions differ")
    worst = 0.0
    for g, p in enumerate(wp.partition, start=1):
        first = payoff(ws, wp, g, 1)
        for j in range(1, p):
            target = float(wp.ratios[g - 1][j - 1])
            achieved = payoff(ws, wp, g, j + 1) / first
            worst = max(worst, abs(achieved - target) / target)
    return worst
