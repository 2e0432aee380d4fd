"""numba versions of the hot loops; same signatures as ``_kernels_numpy``."""

from __future__ import annotations

import os

# the TBB probe warns on older system TBB; workqueue needs nothing external
os.environ.setdefault("NUMBA_THREADING_LAYER", "workqueue")

import numpy as np  # noqa: E402
from numba import njit, prange  # noqa: E402


@njit(cache=True, parallel=True)
def _recall_at_k(match, k):
    n, width = match.shape
    k = min(k, width)
    out = np.zeros(n)
    for i in prange(n):
        for j in range(k):
            if match[i, j] > 0:
                out[i] = 1.0
                break
    return out


@njit(cache=True, parallel=True)
def _r_precision(credit, R):
    n, width = credit.shape
    out = np.empty(n)
    for i in prange(n):
        acc = 0.0
        for j in range(min(width, R[i])):
            acc += credit[i, j]
        out[i] = acc / R[i]
    return out


@njit(cache=True, parallel=True)
def _map_at_r(match, R):
    n, width = match.shape
    out = np.empty(n)
    for i in prange(n):
        acc = 0.0
        hits = 0
        for j in range(min(width, R[i])):
            if match[i, j] > 0:
                hits += 1
                acc += hits / (j + 1)
        out[i] = acc / R[i]
    return out


@njit(cache=True, parallel=True)
def _plausible_mask(query_bits, gallery_bits, zeta):
    m, d = query_bits.shape
    n = gallery_bits.shape[0]
    out = np.empty((m, n), dtype=np.bool_)
    for i in prange(m):
        for g in range(n):
            diff = 0
            for b in range(d):
                if query_bits[i, b] != gallery_bits[g, b]:
                    diff += 1
                    if diff > zeta:
                        break
            out[i, g] = diff <= zeta
    return out


@njit(cache=True)
def _tau_b_counts(x, y):
    n = x.shape[0]
    P = 0
    Q = 0
    Tx = 0
    Ty = 0
    for i in range(n - 1):
        for j in range(i + 1, n):
            dx = x[i] - x[j]
            dy = y[i] - y[j]
            if dx == 0.0:
                if dy != 0.0:
                    Tx += 1
            elif dy == 0.0:
                Ty += 1
            elif (dx > 0.0) == (dy > 0.0):
                P += 1
            else:
                Q += 1
    return P, Q, Tx, Ty


def recall_at_k(match: np.ndarray, k: int) -> np.ndarray:
    return _recall_at_k(match, k)


def r_precision(credit: np.ndarray, R: np.ndarray) -> np.ndarray:
    return _r_precision(credit, R)


def map_at_r(match: np.ndarray, R: np.ndarray) -> np.ndarray:
    return _map_at_r(match, R)


def plausible_mask(query_bits: np.ndarray, gallery_bits: np.ndarray, zeta: int) -> np.ndarray:
    return _plausible_mask(query_bits, gallery_bits, zeta)


def tau_b_counts(x: np.ndarray, y: np.ndarray) -> tuple[int, int, int, int]:
    P, Q, Tx, Ty = _tau_b_counts(x, y)
    return int(P), int(Q), int(Tx), int(Ty)
