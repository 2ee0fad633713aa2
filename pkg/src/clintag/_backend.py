"""Lattice-kernel backend selection.

The compiled extension is preferred when it was built; the pure-numpy
fallback is always available.  Set CLINTAG_PURE_PYTHON=1 to force the
fallback (used by the benchmark and the equivalence tests).
"""

from __future__ import annotations

import os

if os.environ.get("CLINTAG_PURE_PYTHON"):
    from . import _crf_numpy as kernels

    _BACKEND = "numpy"
else:
    try:
        from . import _crf_cy as kernels  # type: ignore[no-redef]

        _BACKEND = "cython"
    except ImportError:
        from . import _crf_numpy as kernels  # type: ignore[no-redef]

        _BACKEND = "numpy"


def backend_name() -> str:
    """Name of the lattice kernel backend selected at import time."""
    return _BACKEND


__all__ = ["kernels", "backend_name"]
