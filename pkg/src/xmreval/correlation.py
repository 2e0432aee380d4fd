"""Agreement between metrics and between models' rankings."""

from __future__ import annotations

import csv
import math
from collections.abc import Mapping, Sequence
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import kernels
from .errors import InputError
from .ranking import RankedList


@dataclass(frozen=True, eq=False)
class ScoreTable:
    """Models (rows) by metrics (columns)."""

    rows: tuple[str, ...]
    cols: tuple[str, ...]
    values: np.ndarray

    def __post_init__(self):
        values = np.array(self.values, dtype=np.float64)
        object.__setattr__(self, "rows", tuple(self.rows))
        object.__setattr__(self, "cols", tuple(self.cols))
        object.__setattr__(self, "values", values)
        if values.shape != (len(self.rows), len(self.cols)):
            raise InputError(f"table shape {values.shape} does not match labels")
        if np.isnan(values).any():
            raise InputError("score table has missing cells")
        if len(set(self.rows)) != len(self.rows):
            raise InputError("duplicate model names")
        if len(set(self.cols)) != len(self.cols):
            raise InputError("duplicate metric names")

    def column(self, name: str) -> dict[str, float]:
        try:
            j = self.cols.index(name)
        except ValueError:
            raise KeyError(f"no metric column {name!r}") from None
        return {m: float(v) for m, v in zip(self.rows, self.values[:, j])}

    def select(self, cols: Sequence[str]) -> ScoreTable:
        idx = [self.cols.index(c) for c in cols]
        return ScoreTable(self.rows, tuple(cols), self.values[:, idx])


def load_score_table(path: str | Path) -> ScoreTable:
    path = Path(path)
    if not path.exists():
        raise InputError("file not found", path=str(path))
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if not header or len(header) < 2:
            raise InputError("expected header model,<metric>,...", path=str(path), line=1)
        rows, values = [], []
        for line, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise InputError(f"expected {len(header)} cells, got {len(row)}", path=str(path), line=line)
            rows.append(row[0])
            try:
                values.append([float(c) for c in row[1:]])
            except ValueError:
                raise InputError("non-numeric cell", path=str(path), line=line) from None
    try:
        return ScoreTable(tuple(rows), tuple(header[1:]), np.array(values).reshape(len(rows), len(header) - 1))
    except InputError as exc:
        raise InputError(str(exc), path=str(path)) from None


def kendall_tau_b(x: Sequence[float], y: Sequence[float]) -> float:
    """Kendall's tau-b with the usual tie correction.

    Returns NaN when either list is constant, since the coefficient is
    undefined there.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError("x and y must be 1-D and of equal length")
    if len(x) < 2:
        raise ValueError("need at least two observations")
    P, Q, Tx, Ty = kernels.tau_b_counts(x, y)
    denom = (P + Q + Tx) * (P + Q + Ty)
    if denom == 0:
        return math.nan
    return (P - Q) / math.sqrt(denom)


@dataclass(frozen=True, eq=False)
class CorrelationMatrix:
    labels: tuple[str, ...]
    values: np.ndarray

    def __getitem__(self, pair: tuple[str, str]) -> float:
        a, b = pair
        return float(self.values[self.labels.index(a), self.labels.index(b)])


def correlation_matrix(table: ScoreTable) -> CorrelationMatrix:
    """Pairwise tau-b between metric columns; constant columns give NaN cells."""
    if len(table.rows) < 2:
        raise ValueError("need at least two models")
    n = len(table.cols)
    out = np.eye(n)
    for i in range(n):
        for j in range(i + 1, n):
            out[i, j] = out[j, i] = kendall_tau_b(table.values[:, i], table.values[:, j])
    return CorrelationMatrix(table.cols, out)


def cross_model_rank(
    rankings_a: Mapping[str, RankedList | Sequence[str]],
    rankings_b: Mapping[str, RankedList | Sequence[str]],
) -> float:
    """Mean 1-based rank, under ``b``, of the item ``a`` ranks first."""
    if set(rankings_a) != set(rankings_b):
        raise ValueError("rankings cover different query sets")
    if not rankings_a:
        raise ValueError("no queries")
    ranks = []
    for q in sorted(rankings_a):
        a = list(rankings_a[q])
        b = list(rankings_b[q])
        try:
            ranks.append(b.index(a[0]) + 1)
        except ValueError:
            raise ValueError(f"{q!r}: top item {a[0]!r} missing from the other ranking") from None
    return math.fsum(ranks) / len(ranks)
