"""Retrieval metrics over multi-positive ground truth.

Binary metrics treat any positive judgment (yes or weak yes) as a match.
Graded credit (1 / 0.5 / 0) is only defined for R@1 and R-Precision; asking
for it on other metrics is an error rather than a guess.
"""

from __future__ import annotations

import csv
import enum
import math
import re
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import kernels
from .annotations import GroundTruth, Judgment, Modality, PositiveEntry
from .errors import InputError
from .ranking import RankedList, SimilarityMatrix, rank_indices

PMRP_CAP = 50


class CreditMode(enum.Enum):
    BINARY = "binary"
    GRADED = "graded"


class DegenerateQueryError(ValueError):
    """The query has no positives, so the metric is undefined for it."""


@dataclass(frozen=True, eq=False)
class MatchVector:
    values: np.ndarray
    R: int
    mode: CreditMode = CreditMode.BINARY

    def __len__(self) -> int:
        return len(self.values)


def _credit_of(entry) -> float:
    if isinstance(entry, PositiveEntry):
        return entry.judgment.credit
    if isinstance(entry, Judgment):
        return entry.credit
    return float(entry)


def match_vector(
    ranked: RankedList | Sequence[str],
    positives: Mapping[str, PositiveEntry | Judgment | float] | Iterable[str],
    credit_mode: CreditMode = CreditMode.BINARY,
) -> MatchVector:
    """Credits of each ranked candidate, with R = number of positives.

    ``positives`` is either a plain collection of ids (binary only) or a
    mapping from id to judgment.
    """
    credit_mode = CreditMode(credit_mode)
    items = ranked.ordered_candidates if isinstance(ranked, RankedList) else tuple(ranked)
    if isinstance(positives, Mapping):
        credit = {c: _credit_of(e) for c, e in positives.items()}
    else:
        if credit_mode is CreditMode.GRADED:
            raise ValueError("graded credit needs judgments, not a bare id set")
        credit = dict.fromkeys(positives, 1.0)
    if not credit:
        raise DegenerateQueryError("query has no positives")
    if credit_mode is CreditMode.BINARY:
        values = np.array([1.0 if c in credit else 0.0 for c in items])
    else:
        values = np.array([credit.get(c, 0.0) for c in items])
    return MatchVector(values, len(credit), credit_mode)


def recall_at_k(m: MatchVector, k: int) -> float:
    if k < 1:
        raise ValueError("k must be >= 1")
    if m.mode is CreditMode.GRADED:
        if k != 1:
            raise ValueError("graded recall is only defined for k=1")
        return float(m.values[0]) if len(m.values) else 0.0
    return float(kernels.recall_at_k(m.values[None, :], k)[0])


def r_precision(m: MatchVector) -> float:
    if m.R < 1:
        raise DegenerateQueryError("query has no positives")
    return float(kernels.r_precision(m.values[None, :], [m.R])[0])


def map_at_r(m: MatchVector) -> float:
    if m.mode is CreditMode.GRADED:
        raise ValueError("mAP@R is defined on binary matches only")
    if m.R < 1:
        raise DegenerateQueryError("query has no positives")
    return float(kernels.map_at_r(m.values[None, :], [m.R])[0])


def plausible_match(y1, y2, zeta: int) -> bool:
    """True when two class-presence vectors differ in at most ``zeta`` positions."""
    a = np.asarray(y1)
    b = np.asarray(y2)
    if a.shape != b.shape:
        raise ValueError(f"class vectors differ in length: {a.shape} vs {b.shape}")
    return bool(kernels.plausible_mask(a, b, zeta)[0, 0])


def pmrp(
    ranked: RankedList | Sequence[str],
    classes: Mapping[str, np.ndarray],
    query_class,
    zeta: int = 0,
    cap: int = PMRP_CAP,
) -> float:
    """R-Precision against plausible matches, with R capped at ``cap``."""
    items = ranked.ordered_candidates if isinstance(ranked, RankedList) else tuple(ranked)
    try:
        gallery_bits = np.array([classes[c] for c in items])
    except KeyError as exc:
        raise ValueError(f"no class vector for gallery item {exc.args[0]!r}") from None
    mask = kernels.plausible_mask(query_class, gallery_bits, zeta)[0]
    n_pos = int(mask.sum())
    if n_pos == 0:
        raise DegenerateQueryError("query has no plausible matches")
    return float(kernels.r_precision(mask[None, :], [min(n_pos, cap)])[0])


# --- metric specs -----------------------------------------------------------

_SPEC_RE = re.compile(r"^(recall@(?P<k>\d+)|r_precision|map_at_r|pmrp)(?::(?P<mod>\w+))?$")


@dataclass(frozen=True)
class MetricSpec:
    kind: str
    k: int | None = None
    graded: bool = False

    @classmethod
    def parse(cls, text: str) -> MetricSpec:
        m = _SPEC_RE.match(text.strip())
        if m is None:
            raise ValueError(f"unknown metric {text!r}")
        head = m.group(1)
        kind = "recall" if head.startswith("recall@") else head
        k = int(m.group("k")) if m.group("k") else None
        if k is not None and k < 1:
            raise ValueError(f"{text!r}: K must be >= 1")
        mod = m.group("mod")
        if mod not in (None, "graded"):
            raise ValueError(f"{text!r}: unknown modifier {mod!r}")
        graded = mod == "graded"
        if graded and not (kind == "r_precision" or (kind == "recall" and k == 1)):
            raise ValueError(f"{text!r}: ':graded' is only valid on recall@1 and r_precision")
        return cls(kind, k, graded)

    @property
    def name(self) -> str:
        base = f"recall@{self.k}" if self.kind == "recall" else self.kind
        return base + (":graded" if self.graded else "")

    def __str__(self) -> str:
        return self.name


def parse_metric_specs(items: Iterable[str]) -> list[MetricSpec]:
    specs = []
    for item in items:
        spec = MetricSpec.parse(item)
        if spec not in specs:
            specs.append(spec)
    return specs


# --- batch evaluation -------------------------------------------------------


@dataclass
class MetricReport:
    direction: Modality | None
    per_query: dict[str, dict[str, float]]
    averaged: dict[str, float]
    n_queries: int
    n_used: dict[str, int] = field(default_factory=dict)
    n_degenerate: dict[str, int] = field(default_factory=dict)

    @property
    def metrics(self) -> list[str]:
        return list(self.averaged)


@dataclass
class EvaluationResult:
    i2t: MetricReport | None
    t2i: MetricReport | None
    bidirectional: dict[str, float]


def _mean_in_id_order(values: Mapping[str, float]) -> float:
    return math.fsum(values[q] for q in sorted(values)) / len(values)


def evaluate_direction(
    sims: SimilarityMatrix,
    gt: GroundTruth | None,
    specs: Sequence[MetricSpec],
    classes: Mapping[str, np.ndarray] | None = None,
    zeta: int = 0,
    cap: int = PMRP_CAP,
    direction: Modality | None = None,
    chunk_size: int = 256,
) -> MetricReport:
    """Average every metric in ``specs`` over the queries of ``sims``.

    Queries without positives (or without plausible matches, for PMRP) are
    left out of that metric's average and counted in ``n_degenerate``.
    """
    specs = list(specs)
    if not specs:
        raise ValueError("no metrics requested")
    gt_specs = [s for s in specs if s.kind != "pmrp"]
    want_pmrp = len(gt_specs) < len(specs)
    if gt_specs and gt is None:
        raise ValueError("ground truth is required for non-PMRP metrics")
    if want_pmrp and classes is None:
        raise ValueError("PMRP needs class vectors")

    n_q, n_g = sims.scores.shape
    gindex = {g: j for j, g in enumerate(sims.gallery)}
    positives = [gt.get(q) if gt is not None else {} for q in sims.queries]
    R_all = np.array([len(p) for p in positives], dtype=np.int64)

    depth = 1
    for s in gt_specs:
        depth = max(depth, s.k if s.kind == "recall" else int(R_all.max(initial=0)))
    if want_pmrp:
        depth = max(depth, cap)
        try:
            gallery_bits = np.array([classes[g] for g in sims.gallery], dtype=np.uint8)
            query_bits = np.array([classes[q] for q in sims.queries], dtype=np.uint8)
        except KeyError as exc:
            raise ValueError(f"no class vector for item {exc.args[0]!r}") from None
    depth = min(depth, n_g)
    need_graded = any(s.graded for s in gt_specs)

    columns: dict[str, np.ndarray] = {s.name: np.full(n_q, np.nan) for s in specs}
    id_order = sims.id_order
    for start in range(0, n_q, chunk_size):
        stop = min(start + chunk_size, n_q)
        order = rank_indices(sims.scores[start:stop], id_order)[:, :depth]
        rows = np.arange(stop - start)[:, None]

        if gt_specs:
            binary = np.zeros((stop - start, n_g))
            graded = np.zeros((stop - start, n_g)) if need_graded else None
            for r, q_pos in enumerate(positives[start:stop]):
                for cand, entry in q_pos.items():
                    j = gindex.get(cand)
                    if j is None:
                        continue
                    binary[r, j] = 1.0
                    if graded is not None:
                        graded[r, j] = entry.judgment.credit
            mb = binary[rows, order]
            mg = graded[rows, order] if graded is not None else None
            R = R_all[start:stop]
            ok = R > 0
            Rsafe = np.where(ok, R, 1)
            for s in gt_specs:
                if s.kind == "recall":
                    vals = mg[:, 0].copy() if s.graded else kernels.recall_at_k(mb, s.k)
                elif s.kind == "r_precision":
                    vals = kernels.r_precision(mg if s.graded else mb, Rsafe)
                else:
                    vals = kernels.map_at_r(mb, Rsafe)
                columns[s.name][start:stop] = np.where(ok, vals, np.nan)

        if want_pmrp:
            mask = kernels.plausible_mask(query_bits[start:stop], gallery_bits, zeta)
            n_pm = mask.sum(axis=1)
            Rp = np.minimum(n_pm, cap)
            ok = Rp > 0
            vals = kernels.r_precision(mask[rows, order].astype(np.float64), np.where(ok, Rp, 1))
            for s in specs:
                if s.kind == "pmrp":
                    columns[s.name][start:stop] = np.where(ok, vals, np.nan)

    per_query: dict[str, dict[str, float]] = {q: {} for q in sims.queries}
    averaged, n_used, n_degenerate = {}, {}, {}
    for s in specs:
        col = columns[s.name]
        usable = {q: float(v) for q, v in zip(sims.queries, col) if not np.isnan(v)}
        for q, v in zip(sims.queries, col):
            per_query[q][s.name] = float(v)
        if not usable:
            raise ValueError(f"{s.name}: no usable queries in this direction")
        averaged[s.name] = _mean_in_id_order(usable)
        n_used[s.name] = len(usable)
        n_degenerate[s.name] = n_q - len(usable)
    return MetricReport(direction, per_query, averaged, n_q, n_used, n_degenerate)


def evaluate(
    sims_i2t: SimilarityMatrix | None,
    sims_t2i: SimilarityMatrix | None,
    gt_i2t: GroundTruth | None,
    gt_t2i: GroundTruth | None,
    specs: Sequence[MetricSpec],
    classes: Mapping[str, np.ndarray] | None = None,
    zeta: int = 0,
    cap: int = PMRP_CAP,
) -> EvaluationResult:
    """Evaluate both retrieval directions; the bidirectional value is their mean."""
    if sims_i2t is None and sims_t2i is None:
        raise ValueError("at least one direction is required")
    reports = {}
    for key, sims, gt, direction in (
        ("i2t", sims_i2t, gt_i2t, Modality.IMAGE),
        ("t2i", sims_t2i, gt_t2i, Modality.TEXT),
    ):
        if sims is None:
            reports[key] = None
            continue
        if gt is not None and gt.direction is not direction:
            raise ValueError(f"{key} ground truth has direction {gt.direction.value}")
        reports[key] = evaluate_direction(sims, gt, specs, classes, zeta, cap, direction)
    both = {}
    if reports["i2t"] is not None and reports["t2i"] is not None:
        for s in specs:
            both[s.name] = (reports["i2t"].averaged[s.name] + reports["t2i"].averaged[s.name]) / 2
    return EvaluationResult(reports["i2t"], reports["t2i"], both)


def load_class_vectors(path: str | Path) -> dict[str, np.ndarray]:
    """Read ``item_id,bit_0,...,bit_{d-1}`` rows into uint8 vectors."""
    path = Path(path)
    if not path.exists():
        raise InputError("file not found", path=str(path))
    out: dict[str, np.ndarray] = {}
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or len(header) < 2:
            raise InputError("expected header item_id,bit_0,...", path=str(path), line=1)
        d = len(header) - 1
        for line, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != d + 1:
                raise InputError(f"expected {d + 1} cells, got {len(row)}", path=str(path), line=line)
            if row[0] in out:
                raise InputError(f"duplicate item {row[0]!r}", path=str(path), line=line)
            bits = row[1:]
            if any(b not in ("0", "1") for b in bits):
                raise InputError("class bits must be 0 or 1", path=str(path), line=line)
            out[row[0]] = np.array([int(b) for b in bits], dtype=np.uint8)
    return out
