"""Selects the aggregation kernel backend at import time.

The compiled extension is preferred when it built successfully. Set
``NETQUANT_PURE_PYTHON=1`` to force the numpy fallback, e.g. to benchmark
one backend against the other.
"""

import os

if os.environ.get("NETQUANT_PURE_PYTHON", "") not in ("", "0"):
    from . import _kernels_py as _impl

    COMPILED = False
else:
    try:
        from . import _kernels as _impl  # type: ignore[attr-defined]

        COMPILED = True
    except ImportError:
        from . import _kernels_py as _impl

        COMPILED = False

neighbor_sum = _impl.neighbor_sum
spmv = _impl.spmv
FIXED_POINT_SCALE = _impl.FIXED_POINT_SCALE


def backend_name():
    """Return the active kernel backend, "compiled" or "python"."""
    return "compiled" if COMPILED else "python"
