"""End-to-end D-stability certification for partitioned non-square gains.

The sufficient route: certify every selection matrix with its own diagonal
(vl module), then for any strictly positive scaling/mixing pair build
global weights so that the weighted sum of selection-times-certificate
matrices matches the scaled product column by column up to positive column
scales.  The sum inherits a diagonal Lyapunov certificate, so its spectrum
lies in the open right half-plane.

The independent probe: sample nonnegative scalings (including zeros that
trigger the block reduction) and test the spectrum of every reduced product
directly.  A counterexample refutes D-stability outright; the sufficient
condition failing without a counterexample leaves the question open.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from . import vl
from .core import (
    ActiveSet,
    MixingMatrix,
    PartitionedGain,
    ScalingDiagonal,
    active_mask,
    apply_scaling,
)
from .squared import SquaredSelection, count_selections, enumerate_selections, extract_squared
from .vl import VlCertificate, VlVerdict
from .weights import WeightProblem, WeightSystem, construct_weights, payoff

logger = logging.getLogger(__name__)

VERDICT_CERTIFIED = "certified-sufficient"
VERDICT_REFUTED = "refuted-by-counterexample"
VERDICT_INCONCLUSIVE = "inconclusive"

# A sampled spectrum counts as a violation only when its smallest real part
# is at or below this relative threshold; values inside the band around zero
# are logged as marginal instead of being reported as counterexamples.
EIG_TOL_COEFF = -1e-9

MATCH_RTOL = 1e-9
WITNESS_MARGIN_RTOL = 1e-10
WITNESS_SPECTRUM_RTOL = 1e-9


@dataclass(frozen=True)
class SamplerConfig:
    """Randomized scaling sampler: each entry is zero with the given
    probability, otherwise log-uniform over the magnitude range."""

    count: int = 10_000
    zero_probability: float = 0.15
    magnitude_range: tuple[float, float] = (1e-3, 1e3)
    seed: int = 42

    def __post_init__(self):
        if self.count < 1:
            raise ValueError("sample count must be positive")
        if not 0.0 <= self.zero_probability <= 1.0:
            raise ValueError("zero probability must lie in [0, 1]")
        lo, hi = self.magnitude_range
        if not (0 < lo <= hi):
            raise ValueError("magnitude range must satisfy 0 < lo <= hi")


@dataclass(frozen=True, eq=False)
class AggregateWitness:
    """Weighted sum of selection-times-certificate matrices with its
    Lyapunov margin and spectrum."""

    d_sum: np.ndarray
    lyapunov_margin: float
    spectrum: np.ndarray


@dataclass(frozen=True, eq=False)
class Counterexample:
    """Sampled scaling whose reduced product has an eigenvalue with
    nonpositive real part; reproducible from the stored scaling."""

    scaling: ScalingDiagonal
    active: ActiveSet
    offending_eigenvalue: complex
    sample_index: int


@dataclass(frozen=True, eq=False)
class FalsifyOutcome:
    counterexample: Counterexample | None
    checked: int
    marginal_count: int


@dataclass(eq=False)
class CertifyReport:
    """Full evidence trail of a certification run."""

    verdict: str
    verdicts: dict[SquaredSelection, VlVerdict]
    witnesses: list[dict] = field(default_factory=list)
    falsification: FalsifyOutcome | None = None
    theorem_conflict: bool = False


def assemble_witness(
    gain: PartitionedGain,
    certificates: dict[SquaredSelection, VlCertificate],
    weight_system: WeightSystem,
) -> AggregateWitness:
    """Aggregate sum over all selections of gamma * selection * certificate.

    Requires one valid certificate per selection and strictly positive
    weights; the symmetrized aggregate is then a sum of positive definite
    terms, so the Lyapunov margin must come out positive and the spectrum
    of the sum must lie in the open right half-plane.  Both implications
    are re-checked numerically.
    """
    if weight_system.partition != gain.partition:
        raise ValueError("weight system partition does not match the gain")
    selections = list(enumerate_selections(gain.partition))
    missing = [s for s in selections if s not in certificates]
    if missing:
        raise ValueError(f"missing certificate for selection {missing[0].kappa}")

    k = gain.m
    d_sum = np.zeros((k, k))
    for rank, sel in enumerate(selections):
        cert = certificates[sel]
        if cert.diagonal.shape != (k,):
            raise ValueError(f"certificate for {sel.kappa} has wrong dimension")
        mat = extract_squared(gain, sel)
        margin = vl.verify_certificate(mat, cert.diagonal)
        if margin <= 0:
            raise ValueError(f"certificate for selection {sel.kappa} is invalid (margin {margin})")
        d_sum += weight_system.gammas[rank] * (mat * cert.diagonal)

    aggregate = d_sum + d_sum.T
    lyap_margin = float(np.linalg.eigvalsh(aggregate)[0])
    agg_norm = float(np.linalg.norm(aggregate))
    if lyap_margin <= -WITNESS_MARGIN_RTOL * agg_norm:
        raise ValueError(f"aggregate lost definiteness (margin {lyap_margin})")
    spectrum = np.linalg.eigvals(d_sum)
    if spectrum.real.min() <= -WITNESS_SPECTRUM_RTOL * float(np.linalg.norm(d_sum)):
        raise ValueError("aggregate spectrum left the right half-plane")
    return AggregateWitness(d_sum, lyap_margin, spectrum)


def _weight_problem_from_certificates(partition, certificates, target_ratios):
    n_sel = count_selections(partition)
    m = len(partition)
    lambdas = np.empty((m, n_sel))
    for rank, sel in enumerate(enumerate_selections(partition)):
        lambdas[:, rank] = certificates[sel].diagonal
    return WeightProblem(tuple(partition), lambdas, tuple(target_ratios))


def match_ek(
    gain: PartitionedGain,
    certificates: dict[SquaredSelection, VlCertificate],
    scaling: ScalingDiagonal,
    mixing: MixingMatrix,
) -> tuple[WeightSystem, AggregateWitness, np.ndarray]:
    """Choose weights so the aggregate matches the scaled product columnwise.

    The factor table takes group phi of each selection's certificate
    diagonal; the target ratios are the within-block ratios of the
    scale-gain products.  Returns the weights, the assembled witness and
    the positive column scales c with d_sum = (A E K) diag(c), verified
    column by column.
    """
    partition = gain.partition
    if scaling.partition != partition or mixing.partition != partition:
        raise ValueError("partition mismatch between gain, scaling and mixing")
    products = [e * g for e, g in zip(scaling.epsilons, mixing.gains)]
    if any(not (w > 0).all() for w in products):
        raise ValueError(
            "scale-gain products must be strictly positive; drop inactive "
            "blocks via the zero-scale reduction first"
        )
    ratios = [w[1:] / w[0] for w in products]
    problem = _weight_problem_from_certificates(partition, certificates, ratios)
    ws = construct_weights(problem)
    witness = assemble_witness(gain, certificates, ws)

    scaled_product, active = apply_scaling(gain, scaling, mixing)
    col_scales = np.array(
        [payoff(ws, problem, j, 1) / products[j - 1][0] for j in range(1, gain.m + 1)]
    )
    for j in range(gain.m):
        residual = witness.d_sum[:, j] - col_scales[j] * scaled_product[:, j]
        if np.linalg.norm(residual) > MATCH_RTOL * np.linalg.norm(witness.d_sum[:, j]):
            raise ValueError(f"columnwise match failed for block {j + 1}")
    assert active.size == gain.m
    return ws, witness, col_scales


def _sample_scalings(partition, sampler, rng, count):
    n = sum(partition)
    lo, hi = sampler.magnitude_range
    zero = rng.random((count, n)) < sampler.zero_probability
    mags = np.exp(rng.uniform(np.log(lo), np.log(hi), size=(count, n)))
    eps = np.where(zero, 0.0, mags)
    return eps


def falsify_scan(
    gain: PartitionedGain,
    mixing: MixingMatrix | None = None,
    sampler: SamplerConfig | None = None,
    tol: float | None = None,
) -> FalsifyOutcome:
    """Randomized search for a scaling that breaks the spectrum condition.

    Each sampled scaling is reduced over its active blocks and the reduced
    product's eigenvalues are tested directly.  A sample violates when its
    smallest real part is <= tol (default: -1e-9 scaled by the matrix
    norm); samples whose smallest real part lies within |tol| of zero are
    counted as marginal.  Deterministic under the sampler seed; the
    counterexample with the smallest sample index is returned.
    """
    sampler = sampler or SamplerConfig()
    mixing = mixing or MixingMatrix.ones(gain.partition)
    if mixing.partition != gain.partition:
        raise ValueError("mixing partition does not match the gain")
    rng = np.random.default_rng(sampler.seed)
    kflat = mixing.as_vector()
    partition = gain.partition
    m = gain.m
    entries = gain.entries

    block_slices = [gain.block_slice(b) for b in range(1, m + 1)]
    marginal = 0
    best: Counterexample | None = None

    done = 0
    chunk = 65536
    while done < sampler.count:
        take = min(chunk, sampler.count - done)
        eps = _sample_scalings(partition, sampler, rng, take)
        w = eps * kflat
        col_live = active_mask(w)
        block_live = np.stack(
            [col_live[:, sl].any(axis=1) for sl in block_slices], axis=1
        )

        # Column combinations for every sample at full dimension; reduction
        # just selects rows/columns of this stack.
        cols = np.stack(
            [w[:, sl] @ entries[:, sl].T for sl in block_slices], axis=2
        )  # (take, m, m): sample, row, block

        signatures: dict[tuple, list[int]] = {}
        for i in range(take):
            signatures.setdefault(tuple(np.flatnonzero(block_live[i])), []).append(i)

        for sig, members in signatures.items():
            if not sig:
                continue
            rows = np.array(sig)
            sub = cols[np.ix_(members, rows, rows)]
            eigs = np.linalg.eigvals(sub)
            min_re = eigs.real.min(axis=1)
            if tol is None:
                norms = np.linalg.norm(sub, axis=(1, 2))
                thresholds = EIG_TOL_COEFF * np.maximum(1.0, norms)
            else:
                thresholds = np.full(len(members), tol)
            marginal += int(np.count_nonzero(np.abs(min_re) <= np.abs(thresholds)))
            bad = np.flatnonzero(min_re <= thresholds)
            for b in bad:
                idx = done + members[b]
                if best is not None and best.sample_index <= idx:
                    continue
                which = int(np.argmin(eigs[b].real))
                scaling = ScalingDiagonal.from_vector(partition, eps[members[b]])
                live_cols = tuple(
                    tuple(int(c + 1) for c in np.flatnonzero(col_live[members[b], sl]))
                    for blk, sl in enumerate(block_slices)
                    if blk in sig
                )
                active = ActiveSet(tuple(int(r + 1) for r in sig), live_cols)
                best = Counterexample(scaling, active, complex(eigs[b][which]), idx)
        done += take

    if marginal:
        logger.info("falsify: %d marginal spectra within tolerance of zero", marginal)
    return FalsifyOutcome(best, sampler.count, marginal)


def falsify(
    gain: PartitionedGain,
    mixing: MixingMatrix | None = None,
    sampler: SamplerConfig | None = None,
    tol: float | None = None,
) -> Counterexample | None:
    """Randomized falsification probe; see falsify_scan for the details."""
    return falsify_scan(gain, mixing, sampler, tol).counterexample


def _positive_scaling_samples(partition, rng, count):
    n = sum(partition)
    vals = np.exp(rng.uniform(np.log(0.05), np.log(20.0), size=(count, n)))
    return [ScalingDiagonal.from_vector(partition, row) for row in vals]


def full_certify(
    gain: PartitionedGain,
    mixing: MixingMatrix | None = None,
    tol: float = vl.DEFAULT_TOL,
    budget: int = vl.DEFAULT_BUDGET,
    sampler: SamplerConfig | None = None,
    eig_tol: float | None = None,
    witness_samples: int = 5,
    threads: int | None = None,
) -> CertifyReport:
    """Sufficient-condition pipeline plus the independent falsification probe.

    certified-sufficient   every selection certified and no counterexample;
    refuted-by-counterexample   the probe found a violating scaling (takes
        precedence; if the certificates also all passed, the conflict flag
        is raised instead of being masked);
    inconclusive   the sufficient condition failed and the probe found
        nothing, so D-stability remains unresolved.
    """
    sampler = sampler or SamplerConfig()
    mixing = mixing or MixingMatrix.ones(gain.partition)
    verdicts = vl.certify_individual_vl(gain, tol, budget, threads)
    certified = vl.all_certified(verdicts)

    witnesses: list[dict] = []
    if certified and not mixing.as_vector().all():
        logger.info("mixing matrix has zero gains; skipping witness sampling")
        witness_samples = 0
    if certified:
        certificates = vl.collect_certificates(verdicts)
        rng = np.random.default_rng(sampler.seed)
        for scaling in _positive_scaling_samples(gain.partition, rng, witness_samples):
            ws, witness, col_scales = match_ek(gain, certificates, scaling, mixing)
            witnesses.append(
                {
                    "scaling": [list(map(float, row)) for row in scaling.epsilons],
                    "gammas": [float(g) for g in ws.gammas],
                    "column_scales": [float(c) for c in col_scales],
                    "lyapunov_margin": witness.lyapunov_margin,
                    "spectrum": [complex(z) for z in witness.spectrum],
                }
            )

    outcome = falsify_scan(gain, mixing, sampler, eig_tol)
    conflict = certified and outcome.counterexample is not None
    if conflict:
        logger.warning(
            "individually certified gain produced a sampled counterexample at "
            "index %d; recording the conflict",
            outcome.counterexample.sample_index,
        )
    if outcome.counterexample is not None:
        verdict = VERDICT_REFUTED
    elif certified:
        verdict = VERDICT_CERTIFIED
    else:
        verdict = VERDICT_INCONCLUSIVE
    return CertifyReport(verdict, verdicts, witnesses, outcome, conflict)
