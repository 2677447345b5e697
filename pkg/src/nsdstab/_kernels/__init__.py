"""Hot numerical kernels with a compiled core and a pure-python fallback.

The compiled extension (Cython) is preferred; set NSDSTAB_PURE_PYTHON=1 to
force the numpy implementation, e.g. for benchmarking.
"""

from __future__ import annotations

import os

if os.environ.get("NSDSTAB_PURE_PYTHON"):
    from . import _numpy as _impl
else:
    try:
        from . import _native as _impl  # type: ignore[attr-defined]
    except ImportError:
        from . import _numpy as _impl

IMPL = _impl.IMPL
eigmin_scaled = _impl.eigmin_scaled
eigmin_scaled_grad = _impl.eigmin_scaled_grad
rk4_trajectory = _impl.rk4_trajectory
margin_grid_2x2 = _impl.margin_grid_2x2
margin_grid_3 = _impl.margin_grid_3

__all__ = [
    "IMPL",
    "eigmin_scaled",
    "eigmin_scaled_grad",
    "rk4_trajectory",
    "margin_grid_2x2",
    "margin_grid_3",
]
