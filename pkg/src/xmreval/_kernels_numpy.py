"""Pure-numpy versions of the hot loops.

Column sums are accumulated left to right so results are bit-identical with
the numba backend, which walks each row in the same order.
"""

from __future__ import annotations

import numpy as np

_TAU_BLOCK = 512


def recall_at_k(match: np.ndarray, k: int) -> np.ndarray:
    k = min(k, match.shape[1])
    return (match[:, :k] > 0).any(axis=1).astype(np.float64)


def r_precision(credit: np.ndarray, R: np.ndarray) -> np.ndarray:
    n, width = credit.shape
    acc = np.zeros(n)
    for j in range(min(width, int(R.max(initial=0)))):
        acc += np.where(j < R, credit[:, j], 0.0)
    return acc / R


def map_at_r(match: np.ndarray, R: np.ndarray) -> np.ndarray:
    n, width = match.shape
    acc = np.zeros(n)
    hits = np.zeros(n, dtype=np.int64)
    for j in range(min(width, int(R.max(initial=0)))):
        hit = (match[:, j] > 0) & (j < R)
        hits += hit
        acc += np.where(hit, hits / (j + 1), 0.0)
    return acc / R


def plausible_mask(query_bits: np.ndarray, gallery_bits: np.ndarray, zeta: int) -> np.ndarray:
    out = np.empty((query_bits.shape[0], gallery_bits.shape[0]), dtype=np.bool_)
    for i in range(query_bits.shape[0]):
        out[i] = (gallery_bits != query_bits[i]).sum(axis=1) <= zeta
    return out


def tau_b_counts(x: np.ndarray, y: np.ndarray) -> tuple[int, int, int, int]:
    n = x.shape[0]
    P = Q = Tx = Ty = 0
    for start in range(0, n, _TAU_BLOCK):
        stop = min(start + _TAU_BLOCK, n)
        sx = np.sign(x[start:stop, None] - x[None, :])
        sy = np.sign(y[start:stop, None] - y[None, :])
        # keep only pairs (i, j) with j > i
        upper = np.arange(n)[None, :] > np.arange(start, stop)[:, None]
        prod = sx * sy
        P += int(np.count_nonzero((prod > 0) & upper))
        Q += int(np.count_nonzero((prod < 0) & upper))
        Tx += int(np.count_nonzero((sx == 0) & (sy != 0) & upper))
        Ty += int(np.count_nonzero((sy == 0) & (sx != 0) & upper))
    return P, Q, Tx, Ty
