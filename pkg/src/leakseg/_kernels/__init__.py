"""Hot per-pixel kernels with two interchangeable backends.

The numba backend JIT-compiles the inner loops; the numpy backend is a pure
vectorized fallback producing bit-identical results. Selection order:

* ``LEAKSEG_BACKEND=numba`` - require numba, fail loudly if missing.
* ``LEAKSEG_BACKEND=numpy`` - force the fallback.
* unset - numba when importable, numpy otherwise.
"""

import os

import numpy as np

# Shared exp(-u) lookup table. Both backends interpolate this table instead of
# calling exp() so their float results match bit-for-bit (libm exp differs at
# ULP level between LLVM and numpy's SIMD implementations).
EXP_TABLE_UMAX = 16.0
EXP_TABLE_BINS = 8192
EXP_TABLE = np.exp(-np.linspace(0.0, EXP_TABLE_UMAX, EXP_TABLE_BINS + 1))
EXP_TABLE_SCALE = EXP_TABLE_BINS / EXP_TABLE_UMAX


def _select():
    requested = os.environ.get("LEAKSEG_BACKEND", "").strip().lower()
    if requested not in ("", "numba", "numpy"):
        raise ValueError(
            f"LEAKSEG_BACKEND must be 'numba' or 'numpy', got {requested!r}"
        )
    if requested == "numpy":
        from . import numpy_impl

        return numpy_impl, "numpy"
    try:
        from . import numba_impl

        return numba_impl, "numba"
    except ImportError:
        if requested == "numba":
            raise
        from . import numpy_impl

        return numpy_impl, "numpy"


_impl, BACKEND = _select()

erode = _impl.erode
dilate = _impl.dilate
mog2_update = _impl.mog2_update
knn_background = _impl.knn_background
render_puffs = _impl.render_puffs
