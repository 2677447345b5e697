"""Diagonal Lyapunov (Volterra-Lyapunov) stability certificates.

A square matrix M is Volterra-Lyapunov stable when some strictly positive
diagonal D makes M D + D M^T positive definite.  Scaling D leaves
definiteness unchanged, so the search is normalized to the diagonal simplex
{d_i >= floor, sum d_i = 1} and the objective is the concave map

    f(d) = lambda_min(M diag(d) + diag(d) M^T).

check_vl maximizes f by projected supergradient ascent with Polyak-style
steps from the uniform diagonal.  Every evaluation also yields a tangent
cut f(d') <= c . d' valid on the whole simplex, so the running cut model
provides a certified upper bound on the optimum: the verdict is "certified"
when a point with margin above tolerance is found, "refuted" when the bound
proves the optimum cannot be positive, and "undecided" otherwise.  For
matrices of size two and three a fine simplex grid backs up the ascent.
"""

from __future__ import annotations

import concurrent.futures
import os
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .core import PartitionedGain
from .squared import SquaredSelection, enumerate_selections, extract_squared

DEFAULT_TOL = 1e-9
DEFAULT_BUDGET = 500
SIMPLEX_FLOOR = 1e-12
GRID_POINTS_2 = 4001
GRID_RESOLUTION_3 = 140

CERTIFIED = "certified"
REFUTED = "refuted"
UNDECIDED = "undecided"


@dataclass(frozen=True, eq=False)
class VlCertificate:
    """Strictly positive diagonal with the margin it achieves."""

    diagonal: np.ndarray
    margin: float

    def __post_init__(self):
        diagonal = np.asarray(self.diagonal, dtype=float)
        if diagonal.ndim != 1 or not (diagonal > 0).all():
            raise ValueError("certificate diagonal must be a strictly positive vector")
        diagonal = diagonal.copy()
        diagonal.setflags(write=False)
        object.__setattr__(self, "diagonal", diagonal)


@dataclass(frozen=True, eq=False)
class VlVerdict:
    """Outcome of a certificate search.

    best_margin is the largest verified margin found; upper_bound is a
    certified bound on the achievable optimum (refuted means it is <= 0).
    witness_cuts holds the tangent cuts establishing the bound.
    """

    status: str
    certificate: VlCertificate | None
    best_margin: float
    upper_bound: float
    witness_cuts: np.ndarray | None = None


def _as_square(m) -> np.ndarray:
    arr = np.asarray(m, dtype=float)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
        raise ValueError(f"square matrix required, got shape {arr.shape}")
    if arr.shape[0] < 1:
        raise ValueError("matrix must be at least 1x1")
    if not np.all(np.isfinite(arr)):
        raise ValueError("matrix contains non-finite entries")
    return arr


def verify_certificate(m, diagonal) -> float:
    """Margin lambda_min(M diag + diag M^T) of a candidate certificate.

    Positive return value means the certificate is valid.  Uses a direct
    symmetric eigensolve, independent of the search in check_vl.
    """
    m = _as_square(m)
    d = np.asarray(diagonal, dtype=float)
    if d.shape != (m.shape[0],):
        raise ValueError("diagonal length does not match the matrix")
    if not (d > 0).all():
        raise ValueError("diagonal entries must be strictly positive")
    scaled = m * d
    return float(np.linalg.eigvalsh(scaled + scaled.T)[0])


def check_column_dominance(m) -> tuple[bool, np.ndarray]:
    """Column strict diagonal dominance test with per-column slacks.

    slack_j = m_jj - sum_{i != j} |m_ij|; the test holds when every
    diagonal entry is positive and every slack is positive.
    """
    m = _as_square(m)
    diag = np.diag(m)
    off = np.abs(m).sum(axis=0) - np.abs(diag)
    slack = diag - off
    ok = bool((diag > 0).all() and (slack > 0).all())
    return ok, slack


def _project_simplex(v, total):
    """Euclidean projection onto {x >= 0, sum x = total}."""
    u = np.sort(v)[::-1]
    css = np.cumsum(u) - total
    idx = np.arange(1, v.size + 1)
    cond = u - css / idx > 0
    rho = int(np.max(idx[cond]))
    theta = css[rho - 1] / rho
    return np.maximum(v - theta, 0.0)


def _project_floor(v, floor):
    """Projection onto {d >= floor, sum d = 1}."""
    k = v.size
    return floor + _project_simplex(v - floor, 1.0 - k * floor)


def _cut_model_max_1d(cuts):
    """Exact maximizer of min_t (c_t . d) over the segment d = (t, 1-t)."""
    c = np.asarray(cuts, dtype=float)
    a = c[:, 0] - c[:, 1]
    b = c[:, 1]
    with np.errstate(divide="ignore", invalid="ignore"):
        denom = a[:, None] - a[None, :]
        cross = (b[None, :] - b[:, None]) / denom
    cand = cross[np.isfinite(cross)]
    cand = cand[(cand > 0.0) & (cand < 1.0)]
    ts = np.concatenate(([0.0, 1.0], cand))
    envelope = (a[:, None] * ts[None, :] + b[:, None]).min(axis=0)
    i = int(np.argmax(envelope))
    t = float(ts[i])
    return np.array([t, 1.0 - t]), float(envelope[i])


def _cut_model_max_lp(cuts, k):
    """LP solution of max_{d in simplex} min_t (c_t . d)."""
    from scipy.optimize import linprog

    c = np.asarray(cuts, dtype=float)
    n_cuts = c.shape[0]
    obj = np.zeros(k + 1)
    obj[-1] = -1.0
    a_ub = np.hstack([-c, np.ones((n_cuts, 1))])
    a_eq = np.zeros((1, k + 1))
    a_eq[0, :k] = 1.0
    bounds = [(0.0, 1.0)] * k + [(None, None)]
    res = linprog(
        obj,
        A_ub=a_ub,
        b_ub=np.zeros(n_cuts),
        A_eq=a_eq,
        b_eq=[1.0],
        bounds=bounds,
        method="highs",
    )
    if not res.success:  # pragma: no cover - highs is robust on these tiny LPs
        bound = float(np.min(c.max(axis=1)))
        return np.full(k, 1.0 / k), bound
    return np.maximum(res.x[:k], 0.0), float(res.x[k])


def _cut_model_max(cuts, k):
    if k == 2:
        return _cut_model_max_1d(cuts)
    return _cut_model_max_lp(cuts, k)


def _diag_condition(d):
    return float(np.max(d) / np.min(d))


def check_vl(m, tol: float = DEFAULT_TOL, budget: int = DEFAULT_BUDGET) -> VlVerdict:
    """Decide Volterra-Lyapunov stability by diagonal certificate search.

    Parameters
    ----------
    m : array_like
        Square real matrix.
    tol : float
        Positive margin a certificate must exceed to count as certified.
    budget : int
        Maximum number of margin evaluations.

    Returns
    -------
    VlVerdict
        certified  - a strictly positive diagonal with margin > tol exists
                     (returned, re-verifiable via verify_certificate);
        refuted    - the cut model proves the optimum margin is <= 0, so no
                     positive-definite scaling exists;
        undecided  - the optimum is pinned inside [-tol, tol] or the budget
                     ran out first.
    """
    m = _as_square(m)
    if tol <= 0:
        raise ValueError("tol must be positive")
    if budget < 1:
        raise ValueError("budget must be at least 1")
    k = m.shape[0]

    if k == 1:
        margin = 2.0 * float(m[0, 0])
        cuts = np.array([[margin]])
        if margin > tol:
            cert = VlCertificate(np.ones(1), margin)
            return VlVerdict(CERTIFIED, cert, margin, margin, cuts)
        status = REFUTED if margin <= 0 else UNDECIDED
        return VlVerdict(status, None, margin, margin, cuts)

    scale = max(1.0, float(np.linalg.norm(m)))
    floor = SIMPLEX_FLOOR
    uniform = np.full(k, 1.0 / k)

    cuts: list[np.ndarray] = []
    best_f = -np.inf
    best_d = uniform
    upper = np.inf

    def evaluate(d):
        nonlocal best_f, best_d, upper
        f, cut = _kernels.eigmin_scaled_grad(m, d)
        cuts.append(np.asarray(cut, dtype=float))
        upper = min(upper, float(np.max(cut)))
        if f > best_f:
            best_f, best_d = f, np.array(d, dtype=float)
        return f, cut

    d = uniform.copy()
    f, cut = evaluate(d)
    evals = 1
    pin_gap = max(1e-13 * scale, 1e-15)

    def converged():
        gap = upper - best_f
        if gap <= pin_gap:
            return True
        return best_f > tol and gap <= 0.005 * abs(best_f)

    # Phase 1: projected supergradient ascent, Polyak-style steps towards
    # the running upper bound.
    stall = 0
    last_best = best_f
    phase1_cap = min(budget, max(10, budget // 2))
    while evals < phase1_cap:
        if upper <= 0 or converged():
            break
        gnorm2 = float(cut @ cut)
        if gnorm2 <= (1e-16 * scale) ** 2:
            break
        step = (upper - f) / gnorm2
        d = _project_floor(d + step * np.asarray(cut), floor)
        f, cut = evaluate(d)
        evals += 1
        if best_f > last_best + 1e-15 * scale:
            stall, last_best = 0, best_f
        else:
            stall += 1
            if stall >= 12:
                break

    # Phase 2: fine simplex grid for small matrices when still unresolved.
    grid_d = None
    if k <= 3 and not converged() and upper > 0 and evals < budget:
        if k == 2:
            _, grid_d = _kernels.margin_grid_2x2(m, floor, 1.0 - floor, GRID_POINTS_2)
        else:
            _, grid_d = _kernels.margin_grid_3(m, GRID_RESOLUTION_3, floor)
        evaluate(np.asarray(grid_d, dtype=float))
        evals += 1

    # Phase 3: cutting-plane refinement; the model maximum certifies the
    # upper bound and proposes the next evaluation point.
    while evals < budget and upper > 0 and not converged():
        d_model, u_model = _cut_model_max(cuts, k)
        upper = min(upper, u_model)
        if upper <= 0 or converged():
            break
        f, cut = evaluate(_project_floor(d_model, floor))
        evals += 1
        if u_model - f <= pin_gap:
            break

    # Final decision uses verify-grade margins; equal-margin ties go to the
    # better conditioned diagonal.
    candidates = [best_d, uniform]
    if grid_d is not None:
        candidates.append(np.asarray(grid_d, dtype=float))
    margins = [verify_certificate(m, c) for c in candidates]
    top = max(margins)
    eligible = [i for i, mg in enumerate(margins) if mg >= top - 1e-12 * scale]
    pick = min(eligible, key=lambda i: _diag_condition(candidates[i]))
    final_margin = margins[pick]
    final_d = candidates[pick]
    upper = max(upper, final_margin)
    witness = np.array(cuts)

    if final_margin > tol:
        cert = VlCertificate(final_d, final_margin)
        return VlVerdict(CERTIFIED, cert, final_margin, upper, witness)
    if upper <= 0:
        return VlVerdict(REFUTED, None, final_margin, upper, witness)
    return VlVerdict(UNDECIDED, None, final_margin, upper, witness)


def _thread_count(threads):
    if threads is not None:
        return max(1, int(threads))
    env = os.environ.get("NSDSTAB_THREADS", "")
    try:
        return max(1, int(env))
    except ValueError:
        return 1


def certify_individual_vl(
    gain: PartitionedGain,
    tol: float = DEFAULT_TOL,
    budget: int = DEFAULT_BUDGET,
    threads: int | None = None,
) -> dict[SquaredSelection, VlVerdict]:
    """Run check_vl on every full-dimension selection matrix of the gain.

    The result map is keyed by selection in lexicographic order; the gain is
    individually Volterra-Lyapunov stable exactly when every entry is
    certified (see all_certified).
    """
    selections = list(enumerate_selections(gain.partition))
    matrices = [extract_squared(gain, s) for s in selections]
    workers = _thread_count(threads)
    if workers > 1 and len(matrices) > 1:
        with concurrent.futures.ThreadPoolExecutor(max_workers=workers) as pool:
            verdicts = list(pool.map(lambda mm: check_vl(mm, tol, budget), matrices))
    else:
        verdicts = [check_vl(mm, tol, budget) for mm in matrices]
    return dict(zip(selections, verdicts))


def all_certified(verdicts: dict[SquaredSelection, VlVerdict]) -> bool:
    return all(v.status == CERTIFIED for v in verdicts.values())


def overall_status(verdicts: dict[SquaredSelection, VlVerdict]) -> str:
    """certified when every selection is, refuted when any is, else undecided."""
    if all_certified(verdicts):
        return CERTIFIED
    if any(v.status == REFUTED for v in verdicts.values()):
        return REFUTED
    return UNDECIDED


def collect_certificates(
    verdicts: dict[SquaredSelection, VlVerdict]
) -> dict[SquaredSelection, VlCertificate]:
    """Extract the certificate map; raises if any selection is uncertified."""
    out = {}
    for sel, verdict in verdicts.items():
        if verdict.status != CERTIFIED or verdict.certificate is None:
            raise ValueError(f"selection {sel.kappa} is not certified")
        out[sel] = verdict.certificate
    return out
