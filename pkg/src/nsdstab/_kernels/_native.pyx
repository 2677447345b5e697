# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled inner loops: small symmetric eigensolves, simplex grid scans and
fixed-step Runge-Kutta integration.  API mirrors nsdstab._kernels._numpy."""

import numpy as np

cimport cython
from libc.math cimport fabs, isfinite, sqrt

IMPL = "native"


cdef double _jacobi_eigmin(double[:, ::1] s, double[:, ::1] v, int k, bint want_vec) noexcept nogil:
    """Cyclic Jacobi on the symmetric matrix s (destroyed); returns the
    smallest eigenvalue.  If want_vec, v accumulates the rotations so its
    columns end up as eigenvectors."""
    cdef int sweep, p, q, i, jmin
    cdef double off, frob, apq, app, aqq, theta, t, c, sn, sp, sq, best

    if want_vec:
        for p in range(k):
            for q in range(k):
                v[p, q] = 1.0 if p == q else 0.0

    frob = 0.0
    for p in range(k):
        for q in range(k):
            frob += s[p, q] * s[p, q]
    if frob == 0.0:
        return 0.0

    for sweep in range(64):
        off = 0.0
        for p in range(k - 1):
            for q in range(p + 1, k):
                off += s[p, q] * s[p, q]
        if off <= 1e-30 * frob:
            break
        for p in range(k - 1):
            for q in range(p + 1, k):
                apq = s[p, q]
                if apq * apq <= 1e-32 * frob:
                    continue
                app = s[p, p]
                aqq = s[q, q]
                theta = (aqq - app) / (2.0 * apq)
                if theta >= 0.0:
                    t = 1.0 / (theta + sqrt(theta * theta + 1.0))
                else:
                    t = -1.0 / (-theta + sqrt(theta * theta + 1.0))
                c = 1.0 / sqrt(t * t + 1.0)
                sn = t * c
                for i in range(k):
                    sp = s[i, p]
                    sq = s[i, q]
                    s[i, p] = c * sp - sn * sq
                    s[i, q] = sn * sp + c * sq
                for i in range(k):
                    sp = s[p, i]
                    sq = s[q, i]
                    s[p, i] = c * sp - sn * sq
                    s[q, i] = sn * sp + c * sq
                if want_vec:
                    for i in range(k):
                        sp = v[i, p]
                        sq = v[i, q]
                        v[i, p] = c * sp - sn * sq
                        v[i, q] = sn * sp + c * sq

    best = s[0, 0]
    jmin = 0
    for p in range(1, k):
        if s[p, p] < best:
            best = s[p, p]
            jmin = p
    if want_vec and jmin != 0:
        for i in range(k):
            sp = v[i, 0]
            v[i, 0] = v[i, jmin]
            v[i, jmin] = sp
    return best


cdef void _build_scaled(double[:, ::1] m, double[::1] d, double[:, ::1] s, int k) noexcept nogil:
    cdef int i, j
    for i in range(k):
        for j in range(k):
            s[i, j] = m[i, j] * d[j] + m[j, i] * d[i]


def eigmin_scaled(m, d):
    """Smallest eigenvalue of M diag(d) + diag(d) M^T."""
    cdef double[:, ::1] mv = np.ascontiguousarray(m, dtype=np.float64)
    cdef double[::1] dv = np.ascontiguousarray(d, dtype=np.float64)
    cdef int k = mv.shape[0]
    s_arr = np.empty((k, k))
    cdef double[:, ::1] sv = s_arr
    cdef double[:, ::1] dummy = s_arr
    _build_scaled(mv, dv, sv, k)
    return float(_jacobi_eigmin(sv, dummy, k, False))


def eigmin_scaled_grad(m, d):
    """Smallest eigenvalue plus its tangent-cut coefficients (see _numpy twin)."""
    cdef double[:, ::1] mv = np.ascontiguousarray(m, dtype=np.float64)
    cdef double[::1] dv = np.ascontiguousarray(d, dtype=np.float64)
    cdef int k = mv.shape[0]
    s_arr = np.empty((k, k))
    v_arr = np.empty((k, k))
    cut_arr = np.empty(k)
    cdef double[:, ::1] sv = s_arr
    cdef double[:, ::1] vv = v_arr
    cdef double[::1] cut = cut_arr
    cdef double lam, acc
    cdef int i, j
    _build_scaled(mv, dv, sv, k)
    lam = _jacobi_eigmin(sv, vv, k, True)
    for i in range(k):
        acc = 0.0
        for j in range(k):
            acc += mv[j, i] * vv[j, 0]
        cut[i] = 2.0 * vv[i, 0] * acc
    return float(lam), cut_arr


def rk4_trajectory(f, y0, double h, long n_steps):
    """Fixed-step classical Runge-Kutta integration of y' = F y."""
    cdef double[:, ::1] fv = np.ascontiguousarray(f, dtype=np.float64)
    y_arr = np.array(y0, dtype=np.float64)
    cdef double[::1] y = y_arr
    cdef int dim = y.shape[0]
    out_arr = np.empty((n_steps + 1, dim))
    cdef double[:, ::1] out = out_arr
    k1_arr = np.empty(dim)
    k2_arr = np.empty(dim)
    k3_arr = np.empty(dim)
    k4_arr = np.empty(dim)
    t_arr = np.empty(dim)
    cdef double[::1] k1 = k1_arr, k2 = k2_arr, k3 = k3_arr, k4 = k4_arr, tmp = t_arr
    cdef long step, completed = 0
    cdef int i, j
    cdef double acc
    cdef bint ok

    for i in range(dim):
        out[0, i] = y[i]
    with nogil:
        for step in range(1, n_steps + 1):
            for i in range(dim):
                acc = 0.0
                for j in range(dim):
                    acc += fv[i, j] * y[j]
                k1[i] = acc
            for i in range(dim):
                tmp[i] = y[i] + 0.5 * h * k1[i]
            for i in range(dim):
                acc = 0.0
                for j in range(dim):
                    acc += fv[i, j] * tmp[j]
                k2[i] = acc
            for i in range(dim):
                tmp[i] = y[i] + 0.5 * h * k2[i]
            for i in range(dim):
                acc = 0.0
                for j in range(dim):
                    acc += fv[i, j] * tmp[j]
                k3[i] = acc
            for i in range(dim):
                tmp[i] = y[i] + h * k3[i]
            for i in range(dim):
                acc = 0.0
                for j in range(dim):
                    acc += fv[i, j] * tmp[j]
                k4[i] = acc
            ok = True
            for i in range(dim):
                y[i] = y[i] + (h / 6.0) * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])
                if not isfinite(y[i]):
                    ok = False
            if not ok:
                break
            for i in range(dim):
                out[step, i] = y[i]
            completed = step
    return out_arr[: completed + 1].copy(), completed


def margin_grid_2x2(m, double lo, double hi, long npts):
    """Best margin over the diagonal segment d = (t, 1-t), t in [lo, hi]."""
    cdef double[:, ::1] mv = np.ascontiguousarray(m, dtype=np.float64)
    cdef double m00 = mv[0, 0], m01 = mv[0, 1], m10 = mv[1, 0], m11 = mv[1, 1]
    cdef double step = (hi - lo) / (npts - 1) if npts > 1 else 0.0
    cdef double best = -1e300, best_t = lo
    cdef double t, u, a, b, c, half, val
    cdef long i
    with nogil:
        for i in range(npts):
            t = lo + step * i
            u = 1.0 - t
            a = 2.0 * m00 * t
            c = 2.0 * m11 * u
            b = m01 * u + m10 * t
            half = 0.5 * (a - c)
            val = 0.5 * (a + c) - sqrt(half * half + b * b)
            if val > best:
                best = val
                best_t = t
    return float(best), np.array([best_t, 1.0 - best_t])


def margin_grid_3(m, long resolution, double floor):
    """Best margin over a barycentric grid on the 3-dim scaled simplex."""
    cdef double[:, ::1] mv = np.ascontiguousarray(m, dtype=np.float64)
    s_arr = np.empty((3, 3))
    cdef double[:, ::1] sv = s_arr
    cdef double[:, ::1] dummy = s_arr
    d_arr = np.empty(3)
    cdef double[::1] dv = d_arr
    cdef double step = (1.0 - 3.0 * floor) / resolution
    cdef double best = -1e300, b0 = floor, b1 = floor
    cdef double val
    cdef long i, j
    for i in range(resolution + 1):
        for j in range(resolution + 1 - i):
            dv[0] = floor + i * step
            dv[1] = floor + j * step
            dv[2] = 1.0 - dv[0] - dv[1]
            _build_scaled(mv, dv, sv, 3)
            val = _jacobi_eigmin(sv, dummy, 3, False)
            if val > best:
                best = val
                b0 = dv[0]
                b1 = dv[1]
    return float(best), np.array([b0, b1, 1.0 - b0 - b1])
