"""Pure-numpy implementation of the hot kernels.

Mirrors nsdstab._kernels._native; used when the compiled extension is
unavailable or when NSDSTAB_PURE_PYTHON is set.
"""

from __future__ import annotations

import numpy as np

IMPL = "numpy"


def _scaled_symmetric(m, d):
    b = m * d  # columns of m scaled by the diagonal
    return b + b.T


def eigmin_scaled(m, d):
    """Smallest eigenvalue of M diag(d) + diag(d) M^T."""
    return float(np.linalg.eigvalsh(_scaled_symmetric(m, d))[0])


def eigmin_scaled_grad(m, d):
    """Smallest eigenvalue plus the coefficients of its linear overestimator.

    Returns (lam, c) with lam = eigmin_scaled(m, d) and c such that
    eigmin_scaled(m, d') <= c . d' for every nonnegative d' (tangent cut of
    the concave eigenvalue map); c . d == lam.
    """
    w, v = np.linalg.eigh(_scaled_symmetric(m, d))
    vec = v[:, 0]
    cut = 2.0 * vec * (m.T @ vec)
    return float(w[0]), cut


def rk4_trajectory(f, y0, h, n_steps):
    """Fixed-step classical Runge-Kutta integration of y' = F y.

    Returns (trajectory, completed): trajectory has completed+1 rows; the
    integration stops early if the state leaves the finite range.
    """
    f = np.ascontiguousarray(f, dtype=float)
    y = np.array(y0, dtype=float)
    out = np.empty((n_steps + 1, y.size))
    out[0] = y
    completed = 0
    with np.errstate(over="ignore", invalid="ignore"):
        for i in range(1, n_steps + 1):
            k1 = f @ y
            k2 = f @ (y + 0.5 * h * k1)
            k3 = f @ (y + 0.5 * h * k2)
            k4 = f @ (y + h * k3)
            y = y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
            if not np.all(np.isfinite(y)):
                break
            out[i] = y
            completed = i
    return out[: completed + 1].copy(), completed


def _eigmin_2x2(a, b, c):
    # symmetric [[a, b], [b, c]]
    half = 0.5 * (a - c)
    return 0.5 * (a + c) - np.sqrt(half * half + b * b)


def margin_grid_2x2(m, lo, hi, npts):
    """Best margin over the diagonal segment d = (t, 1-t), t in [lo, hi]."""
    t = np.linspace(lo, hi, npts)
    u = 1.0 - t
    s11 = 2.0 * m[0, 0] * t
    s22 = 2.0 * m[1, 1] * u
    s12 = m[0, 1] * u + m[1, 0] * t
    vals = _eigmin_2x2(s11, s12, s22)
    i = int(np.argmax(vals))
    return float(vals[i]), np.array([t[i], u[i]])


def margin_grid_3(m, resolution, floor):
    """Best margin over a barycentric grid on the 3-dim scaled simplex."""
    step = (1.0 - 3.0 * floor) / resolution
    ij = [(i, j) for i in range(resolution + 1) for j in range(resolution + 1 - i)]
    idx = np.array(ij, dtype=float)
    d = np.empty((len(idx), 3))
    d[:, 0] = floor + idx[:, 0] * step
    d[:, 1] = floor + idx[:, 1] * step
    d[:, 2] = 1.0 - d[:, 0] - d[:, 1]
    s = m[None, :, :] * d[:, None, :]
    s = s + np.transpose(s, (0, 2, 1))
    vals = np.linalg.eigvalsh(s)[:, 0]
    i = int(np.argmax(vals))
    return float(vals[i]), d[i].copy()
