"""Machine-in-the-loop benchmark construction.

Covers the three steps around human verification: pooling the top-k
proposals of several machine annotators, packaging the pool into fixed-size
HITs with known-answer controls, and measuring how much a benchmark built
from a subset of annotators favours particular models.
"""

from __future__ import annotations

import enum
import itertools
import json
import logging
import math
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .annotations import GroundTruth
from .correlation import load_score_table
from .errors import InputError
from .ranking import RankedList

log = logging.getLogger(__name__)

HIT_SIZE = 20
CANDIDATES_PER_HIT = 18

Pair = tuple[str, str]
Rankings = Mapping[str, RankedList | Sequence[str]]


@dataclass(frozen=True)
class CandidatePool:
    pairs: frozenset[Pair]
    per_annotator_contribution: dict[str, int]
    raw_count: int
    proposers: Mapping[Pair, frozenset[str]]
    n_saturated: int = 0

    @property
    def n_duplicates(self) -> int:
        return self.raw_count - len(self.pairs)

    def exclusive_contribution(self) -> dict[str, int]:
        """Pairs that only one annotator proposed, per annotator."""
        out = dict.fromkeys(self.per_annotator_contribution, 0)
        for who in self.proposers.values():
            if len(who) == 1:
                out[next(iter(who))] += 1
        return out


def _top(ranking: RankedList | Sequence[str], k: int) -> tuple[str, ...]:
    items = ranking.ordered_candidates if isinstance(ranking, RankedList) else tuple(ranking)
    return tuple(items[:k])


def pool_candidates(rankings: Mapping[str, Rankings], k: int = 5) -> CandidatePool:
    """Union of every annotator's top-``k`` (query, candidate) pairs."""
    if k < 1:
        raise ValueError("k must be >= 1")
    if not rankings:
        raise ValueError("no annotators")
    annotators = sorted(rankings)
    queries = set(rankings[annotators[0]])
    for a in annotators[1:]:
        if set(rankings[a]) != queries:
            raise ValueError(f"annotator {a!r} covers a different query set than {annotators[0]!r}")

    proposers: dict[Pair, set[str]] = {}
    raw = saturated = 0
    per_annotator = {}
    for a in annotators:
        mine = set()
        for q in sorted(queries):
            top = _top(rankings[a][q], k)
            if len(top) < k:
                saturated += 1
            raw += len(top)
            for c in top:
                mine.add((q, c))
                proposers.setdefault((q, c), set()).add(a)
        per_annotator[a] = len(mine)
    if saturated:
        log.warning("%d rankings shorter than k=%d; took the whole gallery", saturated, k)
    return CandidatePool(
        pairs=frozenset(proposers),
        per_annotator_contribution=per_annotator,
        raw_count=raw,
        proposers={p: frozenset(w) for p, w in proposers.items()},
        n_saturated=saturated,
    )


def top_pairs(rankings: Mapping[str, Rankings], depth: int = 25) -> frozenset[Pair]:
    """All pairs inside any annotator's top-``depth``; golden negatives avoid these."""
    out = set()
    for per_query in rankings.values():
        for q, ranking in per_query.items():
            out.update((q, c) for c in _top(ranking, depth))
    return frozenset(out)


class Role(enum.Enum):
    CANDIDATE = "candidate"
    GOLDEN_POSITIVE = "golden_positive"
    GOLDEN_NEGATIVE = "golden_negative"
    PADDING = "padding"


@dataclass(frozen=True)
class HitItem:
    query: str
    candidate: str
    role: Role


@dataclass(frozen=True)
class Hit:
    hit_id: int
    items: tuple[HitItem, ...]

    def count(self, role: Role) -> int:
        return sum(1 for it in self.items if it.role is role)


@dataclass(frozen=True)
class NegativeSource:
    """Where golden negatives come from: random (query, gallery) pairs that
    are neither known positives nor inside any annotator's top list."""

    queries: Sequence[str]
    gallery: Sequence[str]
    exclusion: frozenset[Pair]
    gt: GroundTruth | None = None

    def eligible(self, pair: Pair) -> bool:
        q, c = pair
        if pair in self.exclusion:
            return False
        return not (self.gt is not None and c in self.gt.get(q))


@dataclass
class HitPlan:
    hits: list[Hit]
    n_padding: int
    n_candidates: int

    @property
    def n_pairs(self) -> int:
        return sum(len(h.items) for h in self.hits)


def _sample_negatives(source: NegativeSource, n: int, avoid: set[Pair], rng: np.random.Generator) -> list[Pair]:
    queries = sorted(source.queries)
    gallery = sorted(source.gallery)
    if not queries or not gallery:
        raise ValueError("golden negative pool is empty")
    picked: list[Pair] = []
    used = set(avoid)
    attempts = 0
    budget = 100 * n + 1000
    while len(picked) < n and attempts < budget:
        attempts += 1
        pair = (queries[rng.integers(len(queries))], gallery[rng.integers(len(gallery))])
        if pair not in used and source.eligible(pair):
            used.add(pair)
            picked.append(pair)
    if len(picked) < n:
        # rejection sampling stalled; the eligible set must be small, so enumerate it
        rest = [p for p in itertools.product(queries, gallery) if p not in used and source.eligible(p)]
        if not rest and not picked:
            raise ValueError("golden negative pool is empty")
        if len(rest) < n - len(picked):
            raise ValueError(f"only {len(picked) + len(rest)} golden negatives available, need {n}")
        idx = rng.choice(len(rest), size=n - len(picked), replace=False)
        picked.extend(rest[i] for i in sorted(idx))
    return picked


def package_hits(
    pool: CandidatePool,
    golden_positives: Iterable[Pair],
    negatives: NegativeSource,
    seed: int,
) -> HitPlan:
    """Split the pool into HITs of 18 candidates plus one golden positive and
    one golden negative each.

    The last HIT, if short, is topped up with extra known positives marked
    ``Role.PADDING`` so every HIT has exactly 20 items. All sampling is driven
    by ``seed``.
    """
    rng = np.random.default_rng(seed)
    cands = sorted(pool.pairs)
    cands = [cands[i] for i in rng.permutation(len(cands))]
    n_hits = math.ceil(len(cands) / CANDIDATES_PER_HIT)
    n_pad = n_hits * CANDIDATES_PER_HIT - len(cands)

    golden = sorted(set(golden_positives))
    golden = [golden[i] for i in rng.permutation(len(golden))]
    if len(golden) < n_hits + n_pad:
        raise ValueError(f"need {n_hits + n_pad} golden positives, got {len(golden)}")
    negs = _sample_negatives(negatives, n_hits, set(pool.pairs) | set(golden), rng)

    hits = []
    cursor = 0
    for h in range(n_hits):
        chunk = cands[h * CANDIDATES_PER_HIT:(h + 1) * CANDIDATES_PER_HIT]
        items = [HitItem(q, c, Role.CANDIDATE) for q, c in chunk]
        taken = set(chunk)
        need = [Role.GOLDEN_POSITIVE] + [Role.PADDING] * (CANDIDATES_PER_HIT - len(chunk))
        for role in need:
            while cursor < len(golden) and golden[cursor] in taken:
                cursor += 1
            if cursor >= len(golden):
                raise ValueError("ran out of golden positives")
            pair = golden[cursor]
            cursor += 1
            taken.add(pair)
            items.append(HitItem(pair[0], pair[1], role))
        items.append(HitItem(negs[h][0], negs[h][1], Role.GOLDEN_NEGATIVE))
        items = [items[i] for i in rng.permutation(len(items))]
        hits.append(Hit(h, tuple(items)))
    return HitPlan(hits, n_pad, len(cands))


def hits_to_json(plan: HitPlan) -> str:
    doc = [
        {
            "hit_id": h.hit_id,
            "pairs": [{"query": it.query, "candidate": it.candidate, "role": it.role.value} for it in h.items],
        }
        for h in plan.hits
    ]
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


# --- bias -----------------------------------------------------------------------


@dataclass(frozen=True)
class BiasReport:
    theta: frozenset[str]
    b_theta: float
    self_bias: float
    non_self_bias: float


def _subset_scores(
    scores_by_theta: Mapping[frozenset[str], Mapping[str, float]],
    scores_all: Mapping[str, float],
    theta: frozenset[str],
) -> Mapping[str, float]:
    if theta in scores_by_theta:
        return scores_by_theta[theta]
    if theta == frozenset(scores_all):
        return scores_all
    raise KeyError(f"no scores for annotator subset {'+'.join(sorted(theta))}")


def bias_quantity(
    scores_by_theta: Mapping[frozenset[str], Mapping[str, float]],
    scores_all: Mapping[str, float],
    theta: Iterable[str],
) -> BiasReport:
    """Mean absolute score shift caused by building the benchmark from ``theta``.

    Also splits the shift into the part landing on the annotators themselves
    (self-bias) and on every other model (non-self-bias).
    """
    theta = frozenset(theta)
    models = sorted(scores_all)
    if not models:
        raise ValueError("no models")
    outside = theta - set(models)
    if outside:
        raise KeyError(f"annotator(s) {sorted(outside)} missing from the all-annotator scores")
    s_theta = _subset_scores(scores_by_theta, scores_all, theta)
    missing = [m for m in models if m not in s_theta]
    if missing:
        raise KeyError(f"model(s) {missing} missing from the scores of subset {'+'.join(sorted(theta))}")

    dev = {m: abs(s_theta[m] - scores_all[m]) for m in models}
    inside = [dev[m] for m in models if m in theta]
    rest = [dev[m] for m in models if m not in theta]
    return BiasReport(
        theta=theta,
        b_theta=math.fsum(dev.values()) / len(models),
        self_bias=math.fsum(inside) / len(inside) if inside else 0.0,
        non_self_bias=math.fsum(rest) / len(rest) if rest else 0.0,
    )


@dataclass(frozen=True)
class BiasCurvePoint:
    subset_size: int
    b_theta: float
    self_bias: float
    non_self_bias: float
    n_subsets: int


def bias_curve(
    scores_by_theta: Mapping[frozenset[str], Mapping[str, float]],
    scores_all: Mapping[str, float],
    subset_size: int,
    annotators: Iterable[str] | None = None,
) -> BiasCurvePoint:
    """Bias measures averaged over every annotator subset of one size."""
    pool = sorted(annotators) if annotators is not None else sorted(scores_all)
    if not 1 <= subset_size <= len(pool):
        raise ValueError(f"subset size must be in 1..{len(pool)}")
    subsets = [frozenset(c) for c in itertools.combinations(pool, subset_size)]
    missing = [
        "+".join(sorted(s)) for s in subsets
        if s not in scores_by_theta and s != frozenset(scores_all)
    ]
    if missing:
        raise KeyError(f"missing subset scores: {', '.join(missing)}")
    reports = [bias_quantity(scores_by_theta, scores_all, s) for s in subsets]
    n = len(reports)
    return BiasCurvePoint(
        subset_size,
        math.fsum(r.b_theta for r in reports) / n,
        math.fsum(r.self_bias for r in reports) / n,
        math.fsum(r.non_self_bias for r in reports) / n,
        n,
    )


def subset_key(name: str) -> frozenset[str]:
    return frozenset(part for part in name.split("+") if part)


def load_subset_scores(
    directory: str | Path, metric: str
) -> tuple[dict[frozenset[str], dict[str, float]], dict[str, float]]:
    """Read ``<A>+<B>.csv`` score tables and ``ALL.csv`` from a directory."""
    directory = Path(directory)
    if not directory.is_dir():
        raise InputError("not a directory", path=str(directory))
    all_path = directory / "ALL.csv"
    if not all_path.exists():
        raise InputError("missing ALL.csv", path=str(directory))

    def column(path: Path) -> dict[str, float]:
        table = load_score_table(path)
        try:
            return table.column(metric)
        except KeyError:
            raise InputError(f"no column {metric!r}", path=str(path)) from None

    by_theta = {}
    for path in sorted(directory.glob("*.csv")):
        if path.name == "ALL.csv":
            continue
        by_theta[subset_key(path.stem)] = column(path)
    return by_theta, column(all_path)
