"""Bradley-Terry fitting of pairwise preference counts.

Strengths are estimated by maximum likelihood under
``P(i beats j) = p_i / (p_i + p_j)`` using Hunter's minorize-maximize
iteration, which increases the likelihood monotonically and needs no step
size. Reported scores are rescaled to sum to 100.
"""

from __future__ import annotations

import csv
import warnings
from collections.abc import Sequence
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

from .errors import ConvergenceError, InputError


@dataclass(frozen=True, eq=False)
class PreferenceMatrix:
    """``wins[i, j]`` counts how often option i was preferred over option j."""

    labels: tuple[str, ...]
    wins: np.ndarray

    def __post_init__(self):
        wins = np.array(self.wins, dtype=np.float64)
        object.__setattr__(self, "labels", tuple(self.labels))
        object.__setattr__(self, "wins", wins)
        n = len(self.labels)
        if wins.shape != (n, n):
            raise InputError(f"win matrix shape {wins.shape} does not match {n} labels")
        if (wins < 0).any() or not np.isfinite(wins).all():
            raise InputError("win counts must be finite and non-negative")
        if len(set(self.labels)) != n:
            raise InputError("duplicate option labels")

    def permuted(self, order: Sequence[int]) -> PreferenceMatrix:
        order = list(order)
        return PreferenceMatrix(tuple(self.labels[i] for i in order), self.wins[np.ix_(order, order)])


@dataclass(frozen=True, eq=False)
class PreferenceScores:
    labels: tuple[str, ...]
    scores: np.ndarray
    raw_mle: np.ndarray
    iterations: int
    log_likelihood: list[float] = field(default_factory=list)

    def as_dict(self) -> dict[str, float]:
        return {k: float(v) for k, v in zip(self.labels, self.scores)}


def log_likelihood(wins: np.ndarray, p: np.ndarray) -> float:
    w = np.array(wins, dtype=np.float64)
    np.fill_diagonal(w, 0.0)
    lp = np.log(p)
    pair = np.log(p[:, None] + p[None, :])
    mask = w > 0
    return float(np.sum(w[mask] * (lp[:, None] - pair)[mask]))


def _check_connected(wins: np.ndarray, labels: Sequence[str]) -> None:
    n_comp, comp = connected_components(csr_matrix(wins > 0), directed=True, connection="strong")
    if n_comp > 1:
        groups = [[labels[i] for i in np.flatnonzero(comp == c)] for c in range(n_comp)]
        desc = "; ".join("{" + ", ".join(g) + "}" for g in groups)
        raise ValueError(
            f"win graph is not strongly connected, so the MLE does not exist; components: {desc}"
        )


def fit_bradley_terry(
    prefs: PreferenceMatrix,
    tol: float = 1e-10,
    max_iter: int = 10000,
) -> PreferenceScores:
    """Maximum-likelihood Bradley-Terry strengths for a win-count matrix.

    Self-comparisons on the diagonal carry no information and are ignored
    (with a warning when non-zero). Iteration stops once the largest relative
    change of any strength falls below ``tol``.
    """
    wins = prefs.wins.copy()
    if np.any(np.diag(wins) != 0):
        warnings.warn("ignoring non-zero diagonal entries of the win matrix", stacklevel=2)
    np.fill_diagonal(wins, 0.0)
    n = len(prefs.labels)
    if n < 2:
        raise ValueError("need at least two options")
    _check_connected(wins, prefs.labels)

    total_wins = wins.sum(axis=1)
    games = wins + wins.T
    p = np.full(n, 1.0 / n)
    history = [log_likelihood(wins, p)]
    residual = np.inf
    for it in range(1, max_iter + 1):
        denom = (games / (p[:, None] + p[None, :])).sum(axis=1)
        raw = total_wins / denom
        new = raw / raw.sum()
        residual = float(np.max(np.abs(new - p) / p))
        p = new
        history.append(log_likelihood(wins, p))
        if residual < tol:
            return PreferenceScores(prefs.labels, 100.0 * p, raw, it, history)
    raise ConvergenceError("Bradley-Terry fit did not converge", residual, max_iter)


def load_preferences(path: str | Path) -> PreferenceMatrix:
    """Read a square CSV with option labels on the header row and first column."""
    path = Path(path)
    if not path.exists():
        raise InputError("file not found", path=str(path))
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if not header or len(header) < 3:
            raise InputError("expected a header row of option labels", path=str(path), line=1)
        labels = header[1:]
        row_labels, rows = [], []
        for line, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise InputError(f"expected {len(header)} cells, got {len(row)}", path=str(path), line=line)
            try:
                counts = [int(c) for c in row[1:]]
            except ValueError:
                raise InputError("counts must be integers", path=str(path), line=line) from None
            row_labels.append(row[0])
            rows.append(counts)
    if row_labels != labels:
        raise InputError("row labels must match the header labels in the same order", path=str(path))
    try:
        return PreferenceMatrix(tuple(labels), np.array(rows))
    except InputError as exc:
        raise InputError(str(exc), path=str(path)) from None
