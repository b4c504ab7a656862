"""Hot loops with a numba backend and a pure-numpy fallback.

The backend is chosen once at import time. Set ``TELECERT_USE_NUMBA=0`` to
force the numpy path; numba is also skipped silently when it is not
installed. Both backends are importable directly as ``kernels.numpy_impl``
and ``kernels.numba_impl`` (the latter is ``None`` without numba).
"""

from __future__ import annotations

import os

from . import _numpy as numpy_impl

try:
    from . import _numba as numba_impl
except ImportError:  # pragma: no cover - numba is optional
    numba_impl = None


def _wanted() -> bool:
    flag = os.environ.get("TELECERT_USE_NUMBA", "1").strip().lower()
    return flag not in ("0", "false", "no", "off", "")


_impl = numba_impl if (numba_impl is not None and _wanted()) else numpy_impl
BACKEND = "numba" if _impl is numba_impl else "numpy"

sector_index = _impl.sector_index
pcrit_map = _impl.pcrit_map
capped_map = _impl.capped_map
linear_probabilities = _impl.linear_probabilities
sample_categorical = _impl.sample_categorical
toner_bacon = _impl.toner_bacon
frame_gisin = _impl.frame_gisin

__all__ = [
    "BACKEND",
    "numpy_impl",
    "numba_impl",
    "sector_index",
    "pcrit_map",
    "capped_map",
    "linear_probabilities",
    "sample_categorical",
    "toner_bacon",
    "frame_gisin",
]
