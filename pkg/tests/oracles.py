"""Brute-force reference implementations, written from the definitions only.

Nothing here imports the package's kernels; every function loops in plain
Python so that it can serve as an independent check.
"""

from __future__ import annotations

import math


def rank(scores: dict[str, float]) -> list[str]:
    return sorted(scores, key=lambda g: (-scores[g], g))


def recall_at_k(ranked: list[str], positives: set[str], k: int) -> float:
    return 1.0 if any(c in positives for c in ranked[:k]) else 0.0


def r_precision(ranked: list[str], credit: dict[str, float], R: int) -> float:
    total = 0.0
    for c in ranked[:R]:
        total += credit.get(c, 0.0)
    return total / R


def map_at_r(ranked: list[str], positives: set[str], R: int) -> float:
    hits = 0
    acc = 0.0
    for i, c in enumerate(ranked[:R], start=1):
        if c in positives:
            hits += 1
            acc += hits / i
    return acc / R


def hamming(a, b) -> int:
    return sum(1 for x, y in zip(a, b) if x != y)


def pmrp(ranked: list[str], classes: dict, query_bits, zeta: int, cap: int = 50) -> float | None:
    plausible = {c for c in ranked if hamming(classes[c], query_bits) <= zeta}
    if not plausible:
        return None
    R = min(len(plausible), cap)
    return sum(1 for c in ranked[:R] if c in plausible) / R


def tau_b(x, y) -> float:
    n = len(x)
    conc = disc = tx = ty = 0
    for i in range(n):
        for j in range(i + 1, n):
            dx = x[i] - x[j]
            dy = y[i] - y[j]
            if dx == 0 and dy == 0:
                continue
            if dx == 0:
                tx += 1
            elif dy == 0:
                ty += 1
            elif (dx > 0) == (dy > 0):
                conc += 1
            else:
                disc += 1
    denom = (conc + disc + tx) * (conc + disc + ty)
    if denom == 0:
        return math.nan
    return (conc - disc) / math.sqrt(denom)


def precision_recall(cand: dict[str, set], ref: dict[str, set], verified: dict[str, set]):
    ps, rs = [], []
    for q in sorted(set(cand) | set(ref) | set(verified)):
        t = cand.get(q, set()) & verified.get(q, set())
        r = ref.get(q, set())
        if not t or not r:
            continue
        ps.append(len(t & r) / len(t))
        rs.append(len(t & r) / len(r))
    if not ps:
        return None
    return math.fsum(ps) / len(ps), math.fsum(rs) / len(rs)


def union_positives(records, sources, modality):
    out: dict[str, set] = {}
    for q, qm, c, judgment, src in records:
        if qm == modality and src in sources and judgment in ("yes", "weak_yes"):
            out.setdefault(q, set()).add(c)
    return out
