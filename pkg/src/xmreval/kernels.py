"""Backend selection for the numeric inner loops.

The numba backend is used when numba imports cleanly, unless the environment
variable ``XMREVAL_DISABLE_NUMBA`` is set to a truthy value. Both backends
return bit-identical results; the numpy one exists for platforms without
numba and as a cross-check in the test suite.

All array arguments are expected in canonical dtypes, which the wrappers
below enforce: credits/matches as C-contiguous float64, positive counts as
int64, class bits as uint8.
"""

from __future__ import annotations

import os
from types import ModuleType

import numpy as np

from . import _kernels_numpy

_FLAG = "XMREVAL_DISABLE_NUMBA"


def _load_numba() -> ModuleType | None:
    if os.environ.get(_FLAG, "").strip().lower() in {"1", "true", "yes", "on"}:
        return None
    try:
        from . import _kernels_numba
    except ImportError:
        return None
    return _kernels_numba


numpy_backend: ModuleType = _kernels_numpy
numba_backend: ModuleType | None = _load_numba()
backend: ModuleType = numba_backend or numpy_backend
BACKEND_NAME = "numba" if numba_backend is not None else "numpy"


def _f64(a) -> np.ndarray:
    return np.ascontiguousarray(a, dtype=np.float64)


def _i64(a) -> np.ndarray:
    return np.ascontiguousarray(a, dtype=np.int64)


def recall_at_k(match, k: int, impl: ModuleType | None = None) -> np.ndarray:
    """Per-row 1.0 when any of the first ``k`` entries is positive."""
    return (impl or backend).recall_at_k(_f64(match), int(k))


def r_precision(credit, R, impl: ModuleType | None = None) -> np.ndarray:
    """Per-row mean credit over the first ``R[i]`` ranks; missing ranks count 0."""
    return (impl or backend).r_precision(_f64(credit), _i64(R))


def map_at_r(match, R, impl: ModuleType | None = None) -> np.ndarray:
    """Per-row average precision truncated at ``R[i]`` and divided by ``R[i]``."""
    return (impl or backend).map_at_r(_f64(match), _i64(R))


def plausible_mask(query_bits, gallery_bits, zeta: int, impl: ModuleType | None = None) -> np.ndarray:
    qb = np.ascontiguousarray(np.atleast_2d(query_bits), dtype=np.uint8)
    gb = np.ascontiguousarray(np.atleast_2d(gallery_bits), dtype=np.uint8)
    return (impl or backend).plausible_mask(qb, gb, int(zeta))


def tau_b_counts(x, y, impl: ModuleType | None = None) -> tuple[int, int, int, int]:
    """(concordant, discordant, tied only in x, tied only in y) pair counts."""
    return (impl or backend).tau_b_counts(_f64(x), _f64(y))
