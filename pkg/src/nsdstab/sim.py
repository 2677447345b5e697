"""Closed-loop validation of the gain-level stability conclusions.

A stable plant (A, B, C, D) under per-channel integral action with rate eta
and mixing matrix Kbar gives the unforced closed loop

    x' = -eta D Kbar x - eta C z
    z' = B Kbar x + A z

For small eta the plant settles onto z = -A^{-1} B Kbar x and the slow
dynamics reduce to x' = -H(0) Kbar x with H(0) = D - C A^{-1} B, so the
closed loop is asymptotically stable for small enough eta exactly when
-H(0) Kbar is Hurwitz.  This module assembles the closed loop, sweeps eta
over a grid against the reduced-model criterion, integrates trajectories
with a fixed-step classical Runge-Kutta scheme, and measures the
quasi-steady-state deviation.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .core import DocumentError, _parse_entries

# A matrix counts as Hurwitz when its largest eigenvalue real part clears
# zero by this relative margin.
HURWITZ_RTOL = 1e-9

DEFAULT_ETA_GRID_POINTS = 17
DEFAULT_ETA_MAX = 1.0
DEFAULT_ETA_MIN = 1e-4


@dataclass(frozen=True, eq=False)
class PlantRealization:
    """State-space quadruple with a stable (Hurwitz) state matrix."""

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    D: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.A, dtype=float)
        b = np.asarray(self.B, dtype=float)
        c = np.asarray(self.C, dtype=float)
        d = np.asarray(self.D, dtype=float)
        if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] < 1:
            raise ValueError("state matrix must be square and nonempty")
        q = a.shape[0]
        if b.ndim != 2 or b.shape[0] != q:
            raise ValueError("input matrix rows must match the state dimension")
        n = b.shape[1]
        if c.ndim != 2 or c.shape[1] != q:
            raise ValueError("output matrix columns must match the state dimension")
        m = c.shape[0]
        if d.shape != (m, n):
            raise ValueError(f"feedthrough must have shape ({m}, {n})")
        for name, mat in (("A", a), ("B", b), ("C", c), ("D", d)):
            if not np.all(np.isfinite(mat)):
                raise ValueError(f"{name} contains non-finite entries")
        hurwitz, max_re = is_hurwitz(a)
        if not hurwitz:
            raise ValueError(f"state matrix is not Hurwitz (max Re eigenvalue {max_re:.3e})")
        for name, mat in (("A", a), ("B", b), ("C", c), ("D", d)):
            mat = mat.copy()
            mat.setflags(write=False)
            object.__setattr__(self, name, mat)

    @property
    def q(self) -> int:
        return self.A.shape[0]

    @property
    def n(self) -> int:
        return self.B.shape[1]

    @property
    def m(self) -> int:
        return self.C.shape[0]


@dataclass(frozen=True, eq=False)
class ClosedLoop:
    """Assembled closed-loop matrix over the stacked states (x, z)."""

    eta: float
    kbar: np.ndarray
    matrix: np.ndarray


@dataclass(frozen=True, eq=False)
class Trajectory:
    times: np.ndarray
    x: np.ndarray
    z: np.ndarray
    convergence: float
    diverged: bool


@dataclass(frozen=True, eq=False)
class EtaSweep:
    """Stability of the closed loop across a descending eta grid."""

    grid: np.ndarray
    stable: np.ndarray
    threshold: float | None
    reduced_hurwitz: bool
    reduced_margin: float
    stable_suffix: bool
    consistent: bool


def is_hurwitz(matrix) -> tuple[bool, float]:
    """Stability test with the relative eigenvalue tolerance."""
    matrix = np.asarray(matrix, dtype=float)
    max_re = float(np.linalg.eigvals(matrix).real.max())
    return max_re < -HURWITZ_RTOL * float(np.linalg.norm(matrix)), max_re


def steady_state_gain(plant: PlantRealization) -> np.ndarray:
    """Zero-frequency gain D - C A^{-1} B."""
    return plant.D - plant.C @ np.linalg.solve(plant.A, plant.B)


def reduced_model_matrix(plant: PlantRealization, kbar) -> np.ndarray:
    """Slow dynamics matrix -H(0) Kbar of the small-eta reduced model.

    The closed loop is stable for small eta exactly when this matrix is
    Hurwitz, i.e. when the spectrum of H(0) Kbar lies in the open right
    half-plane.  Gain-level certification therefore applies to +H(0): its
    scaled block products must have spectra with positive real parts.
    """
    kbar = _check_kbar(plant, kbar)
    return -(steady_state_gain(plant) @ kbar)


def _check_kbar(plant, kbar):
    kbar = np.asarray(kbar, dtype=float)
    if kbar.shape != (plant.n, plant.m):
        raise ValueError(f"Kbar must have shape ({plant.n}, {plant.m})")
    return kbar


def closed_loop_matrix(plant: PlantRealization, kbar, eta: float) -> ClosedLoop:
    """Stack the integral states over the plant states."""
    kbar = _check_kbar(plant, kbar)
    if not eta > 0:
        raise ValueError("eta must be positive")
    m, q = plant.m, plant.q
    full = np.zeros((m + q, m + q))
    full[:m, :m] = -eta * (plant.D @ kbar)
    full[:m, m:] = -eta * plant.C
    full[m:, :m] = plant.B @ kbar
    full[m:, m:] = plant.A
    return ClosedLoop(float(eta), kbar, full)


def default_eta_grid() -> np.ndarray:
    return np.logspace(
        np.log10(DEFAULT_ETA_MAX), np.log10(DEFAULT_ETA_MIN), DEFAULT_ETA_GRID_POINTS
    )


def eta_threshold(plant: PlantRealization, kbar, grid=None) -> EtaSweep:
    """Sweep a descending eta grid and compare with the reduced criterion.

    threshold is the largest grid eta whose closed loop is Hurwitz (None if
    none is); stable_suffix reports whether stability holds down to the
    grid minimum.  When the reduced model is Hurwitz such a suffix must
    exist for a fine enough grid, which the consistency flag records.
    """
    kbar = _check_kbar(plant, kbar)
    grid = default_eta_grid() if grid is None else np.asarray(grid, dtype=float)
    if grid.size == 0:
        raise ValueError("eta grid must be nonempty")
    if not (grid > 0).all():
        raise ValueError("eta grid must be strictly positive")
    if grid.size > 1 and not (np.diff(grid) < 0).all():
        raise ValueError("eta grid must be strictly descending")

    stable = np.array(
        [is_hurwitz(closed_loop_matrix(plant, kbar, eta).matrix)[0] for eta in grid]
    )
    reduced = reduced_model_matrix(plant, kbar)
    red_hurwitz, red_max_re = is_hurwitz(reduced)
    threshold = float(grid[stable].max()) if stable.any() else None
    suffix = bool(stable[-1])
    consistent = (not red_hurwitz) or suffix
    return EtaSweep(grid, stable, threshold, red_hurwitz, -red_max_re, suffix, consistent)


def simulate(
    plant: PlantRealization,
    kbar,
    eta: float,
    x0,
    z0,
    horizon: float,
    step: float | None = None,
) -> Trajectory:
    """Integrate the closed loop with the classical fixed-step scheme.

    The default step is min(1e-2, 0.1 / spectral_radius).  The trajectory
    is sampled at every step; divergence (non-finite state) truncates the
    trajectory and is flagged rather than raised.
    """
    loop = closed_loop_matrix(plant, kbar, eta)
    x0 = np.atleast_1d(np.asarray(x0, dtype=float))
    z0 = np.atleast_1d(np.asarray(z0, dtype=float))
    if x0.shape != (plant.m,) or z0.shape != (plant.q,):
        raise ValueError("initial state dimensions do not match the plant")
    if step is None:
        radius = float(np.abs(np.linalg.eigvals(loop.matrix)).max())
        step = min(1e-2, 0.1 / radius) if radius > 0 else 1e-2
    if not step > 0:
        raise ValueError("step must be positive")
    if horizon < step:
        raise ValueError("horizon must be at least one step")

    n_steps = int(np.ceil(horizon / step - 1e-12))
    y0 = np.concatenate([x0, z0])
    traj, completed = _kernels.rk4_trajectory(loop.matrix, y0, step, n_steps)
    times = np.arange(completed + 1) * step
    x = traj[:, : plant.m]
    z = traj[:, plant.m :]
    norm0 = float(np.linalg.norm(y0))
    convergence = float(np.linalg.norm(traj[-1]) / norm0) if norm0 > 0 else 0.0
    return Trajectory(times, x, z, convergence, completed < n_steps)


def quasi_steady_state_check(
    plant: PlantRealization, kbar, eta: float, trajectory: Trajectory
) -> float:
    """Largest tail deviation of z + A^{-1} B Kbar x after the fast transient.

    The tail starts ten slowest-plant time constants into the trajectory;
    the deviation shrinks as eta decreases.
    """
    kbar = _check_kbar(plant, kbar)
    if trajectory.diverged:
        raise ValueError("trajectory diverged; quasi-steady-state undefined")
    slowest = 1.0 / float(np.abs(np.linalg.eigvals(plant.A).real).min())
    cutoff = 10.0 * slowest
    tail = trajectory.times > cutoff
    if not tail.any():
        raise ValueError(f"horizon too short: needs samples beyond t = {cutoff:.3g}")
    chase = np.linalg.solve(plant.A, plant.B @ kbar)
    deviation = trajectory.z[tail] + trajectory.x[tail] @ chase.T
    return float(np.linalg.norm(deviation, axis=1).max())


def read_plant_document(document: str) -> tuple[PlantRealization, np.ndarray | None]:
    """Parse a plant document (JSON): q, m, n, matrices A, B, C, D row-major,
    optional Kbar (n-by-m row-major)."""
    try:
        obj = json.loads(document)
    except json.JSONDecodeError as exc:
        raise DocumentError(f"invalid JSON: {exc}") from exc
    if not isinstance(obj, dict):
        raise DocumentError("plant document must be a JSON object")
    for key in ("q", "m", "n", "A", "B", "C", "D"):
        if key not in obj:
            raise DocumentError(f"plant document missing field '{key}'")
    try:
        q, m, n = int(obj["q"]), int(obj["m"]), int(obj["n"])
        if q < 1:
            raise DocumentError("plant needs at least one state (q >= 1)")
        plant = PlantRealization(
            _parse_entries(obj["A"], q, q, "A"),
            _parse_entries(obj["B"], q, n, "B"),
            _parse_entries(obj["C"], m, q, "C"),
            _parse_entries(obj["D"], m, n, "D"),
        )
        kbar = None
        if obj.get("Kbar") is not None:
            kbar = _parse_entries(obj["Kbar"], n, m, "Kbar")
    except (TypeError, ValueError) as exc:
        raise DocumentError(str(exc)) from exc
    return plant, kbar


def trajectory_csv(trajectory: Trajectory) -> str:
    """Comma-separated time series: t, x_1..x_m, z_1..z_q."""
    m = trajectory.x.shape[1]
    q = trajectory.z.shape[1]
    header = ",".join(
        ["t"] + [f"x{i + 1}" for i in range(m)] + [f"z{i + 1}" for i in range(q)]
    )
    lines = [header]
    for t, xr, zr in zip(trajectory.times, trajectory.x, trajectory.z):
        lines.append(",".join(repr(float(v)) for v in (t, *xr, *zr)))
    return "\n".join(lines) + "\n"
