"""Annotation data model: bundles of judged (query, candidate) pairs.

A bundle is a flat list of records, each saying that some source judged a
candidate for a query. Ground truth for one retrieval direction is built by
merging the positive records of a chosen set of sources.
"""

from __future__ import annotations

import enum
import json
import logging
import math
from collections import Counter
from collections.abc import Iterable, Mapping
from dataclasses import dataclass, field, replace
from pathlib import Path

import jsonschema

from .errors import BundleError, InputError

log = logging.getLogger(__name__)

SCHEMA_VERSION = 1

ORIGINAL = "original"
HUMAN_VERIFIED = "human_verified"


class Modality(enum.Enum):
    IMAGE = "image"
    TEXT = "text"

    @property
    def other(self) -> Modality:
        return Modality.TEXT if self is Modality.IMAGE else Modality.IMAGE


class Judgment(enum.Enum):
    """Four-level human verdict, ordered from strongest to weakest."""

    YES = "yes"
    WEAK_YES = "weak_yes"
    WEAK_NO = "weak_no"
    NO = "no"

    @property
    def credit(self) -> float:
        return _CREDIT[self]

    @property
    def positive(self) -> bool:
        return self in (Judgment.YES, Judgment.WEAK_YES)

    @property
    def strength(self) -> int:
        return _STRENGTH[self]


_CREDIT = {Judgment.YES: 1.0, Judgment.WEAK_YES: 0.5, Judgment.WEAK_NO: 0.0, Judgment.NO: 0.0}
_STRENGTH = {Judgment.YES: 3, Judgment.WEAK_YES: 2, Judgment.WEAK_NO: 1, Judgment.NO: 0}


def source_kind(tag: str) -> str:
    """Classify a source tag as ``original``, ``human_verified`` or ``auxiliary``."""
    if tag in (ORIGINAL, HUMAN_VERIFIED):
        return tag
    return "auxiliary"


@dataclass(frozen=True)
class AnnotationRecord:
    query: str
    query_modality: Modality
    candidate: str
    judgment: Judgment
    source: str

    @property
    def candidate_modality(self) -> Modality:
        return self.query_modality.other

    def key(self) -> tuple:
        return (self.query_modality, self.query, self.candidate, self.source)


@dataclass(frozen=True)
class FilterReport:
    records_removed: int
    ids_removed: int
    unknown_ids: int


@dataclass(frozen=True)
class DatasetBundle:
    records: tuple[AnnotationRecord, ...]
    invalid_captions: frozenset[str] = frozenset()
    invalid_images: frozenset[str] = frozenset()
    query_universe: Mapping[Modality, frozenset[str]] = field(
        default_factory=lambda: {Modality.IMAGE: frozenset(), Modality.TEXT: frozenset()}
    )
    filter_report: FilterReport | None = None

    @property
    def sources(self) -> frozenset[str]:
        return frozenset(r.source for r in self.records)

    def source_counts(self) -> Counter:
        """Record counts keyed by source kind (original / human_verified / auxiliary)."""
        return Counter(source_kind(r.source) for r in self.records)

    def invalid_ids(self, modality: Modality) -> frozenset[str]:
        return self.invalid_images if modality is Modality.IMAGE else self.invalid_captions


@dataclass(frozen=True)
class PositiveEntry:
    judgment: Judgment
    sources: frozenset[str]


@dataclass(frozen=True)
class GroundTruth:
    """Per-query positives for one retrieval direction (the query modality)."""

    direction: Modality
    positives: Mapping[str, Mapping[str, PositiveEntry]]

    def get(self, query: str) -> Mapping[str, PositiveEntry]:
        return self.positives.get(query, {})

    def ids(self, query: str) -> frozenset[str]:
        return frozenset(self.positives.get(query, ()))

    def judgments(self, query: str) -> dict[str, Judgment]:
        return {c: e.judgment for c, e in self.get(query).items()}

    def __len__(self) -> int:
        return len(self.positives)


BUNDLE_SCHEMA = {
    "type": "object",
    "required": ["schema_version", "records"],
    "properties": {
        "schema_version": {"const": SCHEMA_VERSION},
        "records": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["query", "query_modality", "candidate", "judgment", "source"],
                "properties": {
                    "query": {"type": "string", "minLength": 1},
                    "query_modality": {"enum": ["image", "text"]},
                    "candidate": {"type": "string", "minLength": 1},
                    "candidate_modality": {"enum": ["image", "text"]},
                    "judgment": {"enum": [j.value for j in Judgment]},
                    "source": {"type": "string", "minLength": 1},
                },
            },
        },
        "invalid_captions": {"type": "array", "items": {"type": "string"}},
        "invalid_images": {"type": "array", "items": {"type": "string"}},
        "query_universe": {
            "type": "object",
            "properties": {
                "image": {"type": "array", "items": {"type": "string"}},
                "text": {"type": "array", "items": {"type": "string"}},
            },
        },
    },
}


def parse_bundle(doc: Mapping, path: str | None = None) -> DatasetBundle:
    """Validate a decoded bundle document and build a :class:`DatasetBundle`."""
    validator = jsonschema.Draft202012Validator(BUNDLE_SCHEMA)
    errors = sorted(validator.iter_errors(doc), key=lambda e: list(e.absolute_path))
    if errors:
        err = errors[0]
        where = list(err.absolute_path)
        index = where[1] if len(where) >= 2 and where[0] == "records" else None
        loc = "/".join(str(p) for p in where) or "<root>"
        raise BundleError(f"{loc}: {err.message}", index=index, path=path)

    qu = doc.get("query_universe", {})
    universe = {m: frozenset(qu.get(m.value, ())) for m in Modality}
    declared = bool(qu)

    records = []
    seen = set()
    for i, raw in enumerate(doc["records"]):
        qm = Modality(raw["query_modality"])
        if "candidate_modality" in raw and Modality(raw["candidate_modality"]) is qm:
            raise BundleError("query and candidate share a modality", index=i, path=path)
        cand = raw["candidate"]
        if cand in universe[qm] and cand not in universe[qm.other]:
            raise BundleError(
                f"candidate {cand!r} is a {qm.value} item, same modality as the query",
                index=i, path=path,
            )
        rec = AnnotationRecord(raw["query"], qm, cand, Judgment(raw["judgment"]), raw["source"])
        if rec.key() in seen:
            raise BundleError(
                f"duplicate record for ({rec.query!r}, {rec.candidate!r}, {rec.source!r})",
                index=i, path=path,
            )
        seen.add(rec.key())
        records.append(rec)

    if declared:
        for i, rec in enumerate(records):
            if rec.query not in universe[rec.query_modality]:
                raise BundleError(
                    f"query {rec.query!r} missing from query_universe[{rec.query_modality.value}]",
                    index=i, path=path,
                )
    else:
        for m in Modality:
            universe[m] = frozenset(r.query for r in records if r.query_modality is m)

    return DatasetBundle(
        records=tuple(records),
        invalid_captions=frozenset(doc.get("invalid_captions", ())),
        invalid_images=frozenset(doc.get("invalid_images", ())),
        query_universe=universe,
    )


def load_bundle(path: str | Path) -> DatasetBundle:
    path = Path(path)
    try:
        with path.open(encoding="utf-8") as fh:
            doc = json.load(fh)
    except FileNotFoundError:
        raise InputError("file not found", path=str(path)) from None
    except json.JSONDecodeError as exc:
        raise InputError(f"invalid JSON: {exc.msg}", path=str(path), line=exc.lineno) from None
    return parse_bundle(doc, path=str(path))


def bundle_to_dict(bundle: DatasetBundle) -> dict:
    """Inverse of :func:`parse_bundle`, with deterministic ordering."""
    return {
        "schema_version": SCHEMA_VERSION,
        "records": [
            {
                "query": r.query,
                "query_modality": r.query_modality.value,
                "candidate": r.candidate,
                "judgment": r.judgment.value,
                "source": r.source,
            }
            for r in bundle.records
        ],
        "invalid_captions": sorted(bundle.invalid_captions),
        "invalid_images": sorted(bundle.invalid_images),
        "query_universe": {m.value: sorted(bundle.query_universe.get(m, ())) for m in Modality},
    }


def filter_invalid(
    bundle: DatasetBundle,
    invalid_captions: Iterable[str] = (),
    invalid_images: Iterable[str] = (),
) -> DatasetBundle:
    """Drop every record and query touching an invalid caption or image.

    The returned bundle carries a :class:`FilterReport`. Ids that do not occur
    in the bundle are ignored and counted as ``unknown_ids``.
    """
    bad = {Modality.TEXT: frozenset(invalid_captions), Modality.IMAGE: frozenset(invalid_images)}

    present = {m: set(bundle.query_universe.get(m, ())) for m in Modality}
    for r in bundle.records:
        present[r.query_modality].add(r.query)
        present[r.candidate_modality].add(r.candidate)

    def touches(r: AnnotationRecord) -> bool:
        return r.query in bad[r.query_modality] or r.candidate in bad[r.candidate_modality]

    kept = tuple(r for r in bundle.records if not touches(r))
    removed_ids = sum(len(bad[m] & present[m]) for m in Modality)
    unknown = sum(len(bad[m] - present[m]) for m in Modality)
    if unknown:
        log.warning("%d invalid ids not present in bundle; ignored", unknown)

    report = FilterReport(
        records_removed=len(bundle.records) - len(kept), ids_removed=removed_ids, unknown_ids=unknown
    )
    return replace(
        bundle,
        records=kept,
        invalid_captions=bundle.invalid_captions | bad[Modality.TEXT],
        invalid_images=bundle.invalid_images | bad[Modality.IMAGE],
        query_universe={m: frozenset(bundle.query_universe.get(m, ())) - bad[m] for m in Modality},
        filter_report=report,
    )


def merge_positive_sources(
    bundle: DatasetBundle, sources: Iterable[str], direction: Modality
) -> GroundTruth:
    """Union the positives of ``sources`` for queries of modality ``direction``.

    When several sources judge the same pair, the strongest judgment wins and
    every source that marked the pair positive is kept as provenance.
    """
    wanted = frozenset(sources)
    if not wanted:
        raise ValueError("at least one source is required")
    unknown = wanted - bundle.sources
    if unknown:
        raise ValueError(f"unknown source tag(s): {', '.join(sorted(unknown))}")

    merged: dict[str, dict[str, PositiveEntry]] = {}
    for r in bundle.records:
        if r.source not in wanted or r.query_modality is not direction or not r.judgment.positive:
            continue
        per_query = merged.setdefault(r.query, {})
        prev = per_query.get(r.candidate)
        if prev is None:
            per_query[r.candidate] = PositiveEntry(r.judgment, frozenset({r.source}))
        else:
            best = r.judgment if r.judgment.strength > prev.judgment.strength else prev.judgment
            per_query[r.candidate] = PositiveEntry(best, prev.sources | {r.source})
    return GroundTruth(direction=direction, positives=merged)


def verified_universe(bundle: DatasetBundle, source: str, direction: Modality) -> dict[str, frozenset[str]]:
    """Every candidate a source judged for each query, regardless of verdict."""
    out: dict[str, set[str]] = {}
    for r in bundle.records:
        if r.source == source and r.query_modality is direction:
            out.setdefault(r.query, set()).add(r.candidate)
    return {q: frozenset(c) for q, c in out.items()}


@dataclass(frozen=True)
class PrecisionRecall:
    precision: float
    recall: float
    n_used: int
    n_excluded: int
    n_degenerate: int = 0


def dataset_precision_recall(
    candidate: GroundTruth,
    reference: GroundTruth,
    verified: Mapping[str, Iterable[str]],
) -> PrecisionRecall:
    """Precision and recall of a candidate annotation set against a reference.

    The candidate positives of each query are first restricted to the items
    that were actually verified for it, since unverified items can be neither
    confirmed nor refuted. Queries whose restricted set is empty are excluded
    (``n_excluded``), as are queries with no reference positives
    (``n_degenerate``).
    """
    queries = sorted(set(candidate.positives) | set(reference.positives) | set(verified))
    precisions = []
    recalls = []
    excluded = degenerate = 0
    for q in queries:
        restricted = candidate.ids(q) & frozenset(verified.get(q, ()))
        truth = reference.ids(q)
        if not restricted:
            excluded += 1
            continue
        if not truth:
            degenerate += 1
            continue
        precisions.append(len(restricted & truth) / len(restricted))
        recalls.append(1.0 - len(truth - restricted) / len(truth))
    if not precisions:
        raise ValueError("no query has both verified candidate positives and reference positives")
    n = len(precisions)
    return PrecisionRecall(
        precision=math.fsum(precisions) / n,
        recall=math.fsum(recalls) / n,
        n_used=n,
        n_excluded=excluded,
        n_degenerate=degenerate,
    )
