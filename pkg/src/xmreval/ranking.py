"""Similarity matrices and deterministic rankings.

Rankings sort by descending score and break ties by ascending candidate id
(plain string order), so the order of gallery columns in the input never
affects the result.
"""

from __future__ import annotations

import csv
from collections.abc import Sequence
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import InputError


@dataclass(frozen=True, eq=False)
class SimilarityMatrix:
    queries: tuple[str, ...]
    gallery: tuple[str, ...]
    scores: np.ndarray

    def __post_init__(self):
        scores = np.array(self.scores, dtype=np.float64)
        object.__setattr__(self, "queries", tuple(self.queries))
        object.__setattr__(self, "gallery", tuple(self.gallery))
        object.__setattr__(self, "scores", scores)
        if scores.shape != (len(self.queries), len(self.gallery)):
            raise InputError(
                f"score matrix shape {scores.shape} does not match "
                f"{len(self.queries)} queries x {len(self.gallery)} gallery items"
            )
        if np.isnan(scores).any():
            q, g = np.argwhere(np.isnan(scores))[0]
            raise InputError(f"NaN score for ({self.queries[q]!r}, {self.gallery[g]!r})")
        for name, ids in (("query", self.queries), ("gallery", self.gallery)):
            if len(set(ids)) != len(ids):
                raise InputError(f"duplicate {name} ids")
            if any(not i for i in ids):
                raise InputError(f"empty {name} id")
        scores.setflags(write=False)

    def row(self, query: str) -> np.ndarray:
        return self.scores[self.query_index(query)]

    def query_index(self, query: str) -> int:
        try:
            return self._qindex[query]
        except KeyError:
            raise KeyError(f"unknown query {query!r}") from None

    @property
    def _qindex(self) -> dict[str, int]:
        cached = self.__dict__.get("_qindex_cache")
        if cached is None:
            cached = {q: i for i, q in enumerate(self.queries)}
            object.__setattr__(self, "_qindex_cache", cached)
        return cached

    @property
    def id_order(self) -> np.ndarray:
        """Gallery column indices sorted by candidate id."""
        cached = self.__dict__.get("_id_order_cache")
        if cached is None:
            cached = np.array(sorted(range(len(self.gallery)), key=self.gallery.__getitem__), dtype=np.int64)
            object.__setattr__(self, "_id_order_cache", cached)
        return cached


@dataclass(frozen=True)
class RankedList:
    query: str
    ordered_candidates: tuple[str, ...]

    def __len__(self) -> int:
        return len(self.ordered_candidates)

    def __iter__(self):
        return iter(self.ordered_candidates)

    def position(self, candidate: str) -> int:
        """1-based rank of ``candidate``."""
        try:
            return self.ordered_candidates.index(candidate) + 1
        except ValueError:
            raise KeyError(f"{candidate!r} not in ranking of {self.query!r}") from None


def rank_indices(scores: np.ndarray, id_order: np.ndarray) -> np.ndarray:
    """Gallery column indices of each row in ranked order.

    ``id_order`` lists the columns sorted by candidate id; a stable sort over
    the negated scores in that column order yields the id tie-break.
    """
    scores = np.atleast_2d(scores)
    permuted = -scores[:, id_order]
    order = np.argsort(permuted, axis=1, kind="stable")
    return id_order[order]


def rank_gallery(sims: SimilarityMatrix, query: str) -> RankedList:
    idx = rank_indices(sims.row(query), sims.id_order)[0]
    return RankedList(query, tuple(sims.gallery[i] for i in idx))


def rank_all(sims: SimilarityMatrix) -> dict[str, RankedList]:
    order = rank_indices(sims.scores, sims.id_order)
    return {q: RankedList(q, tuple(sims.gallery[i] for i in row)) for q, row in zip(sims.queries, order)}


def topk(ranked: RankedList | Sequence[str], k: int) -> list[str]:
    if k < 1:
        raise ValueError("k must be >= 1")
    items = ranked.ordered_candidates if isinstance(ranked, RankedList) else ranked
    return list(items[:k])


def _parse_score(text: str, path: str, line: int) -> float:
    try:
        value = float(text)
    except ValueError:
        raise InputError(f"not a number: {text!r}", path=path, line=line) from None
    if value != value:
        raise InputError("NaN score", path=path, line=line)
    return value


def load_similarity(path: str | Path) -> SimilarityMatrix:
    """Read a dense CSV matrix or a ``query<TAB>candidate<TAB>score`` TSV.

    The dense form has gallery ids in the header row (first cell ignored) and
    one row per query. The TSV form must cover every (query, candidate) cell.
    """
    path = Path(path)
    if not path.exists():
        raise InputError("file not found", path=str(path))
    with path.open(newline="", encoding="utf-8") as fh:
        first = fh.readline()
        fh.seek(0)
        if path.suffix.lower() == ".tsv" or (first.count("\t") == 2 and "," not in first):
            return _load_triples(fh, str(path))
        return _load_dense(fh, str(path))


def _load_dense(fh, path: str) -> SimilarityMatrix:
    reader = csv.reader(fh)
    try:
        header = next(reader)
    except StopIteration:
        raise InputError("empty file", path=path) from None
    gallery = header[1:]
    queries, rows = [], []
    for line, row in enumerate(reader, start=2):
        if not row:
            continue
        if len(row) != len(header):
            raise InputError(f"expected {len(header)} cells, got {len(row)}", path=path, line=line)
        queries.append(row[0])
        rows.append([_parse_score(c, path, line) for c in row[1:]])
    try:
        return SimilarityMatrix(tuple(queries), tuple(gallery), np.array(rows, dtype=np.float64).reshape(len(queries), len(gallery)))
    except InputError as exc:
        raise InputError(str(exc), path=path) from None


def _load_triples(fh, path: str) -> SimilarityMatrix:
    cells: dict[tuple[str, str], float] = {}
    queries: dict[str, None] = {}
    gallery: dict[str, None] = {}
    for line, raw in enumerate(fh, start=1):
        raw = raw.rstrip("\r\n")
        if not raw:
            continue
        parts = raw.split("\t")
        if len(parts) != 3:
            raise InputError(f"expected 3 tab-separated fields, got {len(parts)}", path=path, line=line)
        q, c, s = parts
        if line == 1:
            try:
                float(s)
            except ValueError:
                continue  # header row
        if (q, c) in cells:
            raise InputError(f"duplicate cell ({q!r}, {c!r})", path=path, line=line)
        cells[(q, c)] = _parse_score(s, path, line)
        queries.setdefault(q)
        gallery.setdefault(c)
    qs, gs = tuple(queries), tuple(gallery)
    scores = np.empty((len(qs), len(gs)))
    for i, q in enumerate(qs):
        for j, c in enumerate(gs):
            try:
                scores[i, j] = cells[(q, c)]
            except KeyError:
                raise InputError(f"missing score for ({q!r}, {c!r})", path=path) from None
    try:
        return SimilarityMatrix(qs, gs, scores)
    except InputError as exc:
        raise InputError(str(exc), path=path) from None
