"""Kernel dispatch: compiled extension when present, numpy otherwise.

Set ``TSLAB_KERNELS=py`` to force the numpy implementations even when
the extension built.  ``backend()`` reports what is active.
"""

from __future__ import annotations

import os

import numpy as np

from tslab import _kernels_py

_impl = None
if os.environ.get("TSLAB_KERNELS", "").lower() not in ("py", "python", "numpy"):
    try:
        from tslab import _kernels_cy as _impl  # type: ignore[no-redef]
    except ImportError:
        _impl = None
if _impl is None:
    _impl = _kernels_py


def backend() -> str:
    return _impl.BACKEND


def cotan_lap_areas(v, f):
    v = np.ascontiguousarray(v, dtype=np.float64)
    f = np.ascontiguousarray(f, dtype=np.int32)
    return _impl.cotan_lap_areas(v, f)


def gaussian_area_sum(v, f, x0, s0, split=0.25, exp_cut=46.0, max_depth=14):
    v = np.ascontiguousarray(v, dtype=np.float64)
    f = np.ascontiguousarray(f, dtype=np.int32)
    x0 = np.ascontiguousarray(x0, dtype=np.float64)
    return _impl.gaussian_area_sum(v, f, x0, float(s0), float(split),
                                   float(exp_cut), int(max_depth))
