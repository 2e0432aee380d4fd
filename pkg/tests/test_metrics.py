import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

import oracles
from xmreval.annotations import GroundTruth, Judgment, Modality, PositiveEntry
from xmreval.errors import InputError
from xmreval.metrics import (
    CreditMode,
    DegenerateQueryError,
    MetricSpec,
    evaluate,
    evaluate_direction,
    load_class_vectors,
    map_at_r,
    match_vector,
    parse_metric_specs,
    plausible_match,
    pmrp,
    r_precision,
    recall_at_k,
)
from xmreval.ranking import SimilarityMatrix


def gt_from(d, modality=Modality.TEXT):
    return GroundTruth(modality, {q: {c: PositiveEntry(Judgment(j), frozenset({"s"})) for c, j in per.items()}
                                  for q, per in d.items()})


# --- match vectors and single-query metrics --------------------------------------------


def test_binary_match_vector():
    m = match_vector(["a", "b", "c"], {"b"})
    assert m.values.tolist() == [0.0, 1.0, 0.0] and m.R == 1


def test_graded_match_vector():
    m = match_vector(["a", "b", "c"], {"b": Judgment.WEAK_YES}, CreditMode.GRADED)
    assert m.values.tolist() == [0.0, 0.5, 0.0]


def test_empty_positives_degenerate():
    with pytest.raises(DegenerateQueryError):
        match_vector(["a"], set())


def test_graded_needs_judgments():
    with pytest.raises(ValueError):
        match_vector(["a"], {"a"}, CreditMode.GRADED)


def test_graded_recall_only_at_one():
    m = match_vector(["a", "b"], {"a": Judgment.WEAK_YES}, CreditMode.GRADED)
    assert recall_at_k(m, 1) == 0.5
    with pytest.raises(ValueError):
        recall_at_k(m, 2)
    with pytest.raises(ValueError):
        map_at_r(m)


def test_recall_k_zero():
    with pytest.raises(ValueError):
        recall_at_k(match_vector(["a"], {"a"}), 0)


def test_graded_r_precision_example():
    m = match_vector(["a", "b", "c", "d"], {"a": Judgment.YES, "b": Judgment.WEAK_YES, "d": Judgment.YES},
                     CreditMode.GRADED)
    assert r_precision(m) == 0.5


def test_perfect_ranking():
    m = match_vector(list("abcdef"), set("abc"))
    assert map_at_r(m) == r_precision(m) == recall_at_k(m, 1) == 1.0


def test_scheme_b_r_precision():
    ranked = [f"g{i}" for i in range(16)]
    m = match_vector(ranked, {"g0", *[f"g{i}" for i in range(9, 16)]})
    assert r_precision(m) == 0.125
    assert recall_at_k(m, 1) == 1.0


def test_scheme_ordering():
    ranked = [f"g{i:02d}" for i in range(1, 16)]
    vals = []
    for ranks in ([2, 3, 4, 5, 6, 7, 8, 9], [1, 9, 10, 11, 12, 13, 14, 15],
                  [6, 7, 8, 9, 10, 11, 12, 13], [5, 9, 10, 11, 12, 13, 14, 15]):
        vals.append(map_at_r(match_vector(ranked, {ranked[r - 1] for r in ranks})))
    assert vals == sorted(vals, reverse=True) and len(set(vals)) == 4


def test_short_gallery():
    m = match_vector(["a", "b"], {"a", "b", "x", "y"})
    assert r_precision(m) == 0.5
    assert map_at_r(m) == 0.5


ranking_case = st.integers(1, 10).flatmap(lambda n: st.tuples(
    st.permutations([f"g{i}" for i in range(n)]),
    st.sets(st.sampled_from([f"g{i}" for i in range(n)]), min_size=1, max_size=min(n, 6)),
))


@given(ranking_case)
def test_single_query_metrics_match_oracle(case):
    ranked, pos = case
    ranked = list(ranked)
    m = match_vector(ranked, pos)
    R = len(pos)
    for k in range(1, len(ranked) + 2):
        assert recall_at_k(m, k) == oracles.recall_at_k(ranked, pos, k)
    assert abs(r_precision(m) - oracles.r_precision(ranked, dict.fromkeys(pos, 1.0), R)) <= 1e-12
    assert abs(map_at_r(m) - oracles.map_at_r(ranked, pos, R)) <= 1e-12
    assert 0.0 <= map_at_r(m) <= 1.0 and 0.0 <= r_precision(m) <= 1.0
    all_top = all(c in pos for c in ranked[:R]) and len(ranked) >= R
    assert (map_at_r(m) == 1.0) == all_top
    assert (r_precision(m) == 1.0) == all_top


@given(ranking_case)
def test_recall_monotone_in_k(case):
    ranked, pos = case
    m = match_vector(list(ranked), pos)
    vals = [recall_at_k(m, k) for k in range(1, len(ranked) + 3)]
    assert vals == sorted(vals)


# --- plausible matches and PMRP ------------------------------------------------------------


def test_plausible_match_basic():
    assert plausible_match([1, 0, 1], [1, 0, 1], 0)
    assert not plausible_match([1, 0, 1], [1, 1, 1], 0)
    assert plausible_match([1, 0, 1], [1, 1, 1], 1)
    with pytest.raises(ValueError):
        plausible_match([1, 0], [1, 0, 1], 0)


@given(st.integers(0, 2), st.randoms())
def test_plausible_match_oracle(zeta, rnd):
    a = [rnd.randint(0, 1) for _ in range(80)]
    b = [rnd.randint(0, 1) if rnd.random() < 0.05 else x for x in a]
    assert plausible_match(a, b, zeta) == (oracles.hamming(a, b) <= zeta)


def test_pmrp_all_same_class():
    classes = {g: np.array([1, 0, 1]) for g in "abc"}
    assert pmrp(list("abc"), classes, np.array([1, 0, 1])) == 1.0


def test_pmrp_cap():
    gallery = [f"g{i:02d}" for i in range(80)]
    classes = {g: np.array([1 if i < 60 else 0]) for i, g in enumerate(gallery)}
    assert pmrp(gallery, classes, np.array([1])) == 1.0
    # uncapped R-Precision would be 50/60 for a ranking with 10 misses in the top 60
    reordered = gallery[:50] + gallery[60:70] + gallery[50:60] + gallery[70:]
    assert pmrp(reordered, classes, np.array([1])) == 1.0
    assert pmrp(reordered, classes, np.array([1]), cap=60) == 50 / 60


def test_pmrp_degenerate():
    with pytest.raises(DegenerateQueryError):
        pmrp(["a"], {"a": np.array([0])}, np.array([1]))


@given(st.integers(1, 10), st.integers(1, 4), st.integers(0, 2), st.integers(1, 12), st.randoms())
def test_pmrp_oracle(n, d, zeta, cap, rnd):
    gallery = [f"g{i}" for i in range(n)]
    rnd.shuffle(gallery)
    classes = {g: np.array([rnd.randint(0, 1) for _ in range(d)], dtype=np.uint8) for g in gallery}
    q = np.array([rnd.randint(0, 1) for _ in range(d)], dtype=np.uint8)
    want = oracles.pmrp(gallery, classes, q, zeta, cap)
    if want is None:
        with pytest.raises(DegenerateQueryError):
            pmrp(gallery, classes, q, zeta, cap)
    else:
        assert abs(pmrp(gallery, classes, q, zeta, cap) - want) <= 1e-12


# --- metric specs --------------------------------------------------------------------------


@pytest.mark.parametrize("text", ["recall@1", "recall@10", "r_precision", "map_at_r", "pmrp",
                                  "recall@1:graded", "r_precision:graded"])
def test_spec_round_trip(text):
    assert MetricSpec.parse(text).name == text


@pytest.mark.parametrize("text", ["map_at_r:graded", "recall@5:graded", "recall@0", "ndcg", "pmrp:graded",
                                  "recall@1:soft"])
def test_spec_rejected(text):
    with pytest.raises(ValueError):
        MetricSpec.parse(text)


def test_spec_dedup():
    assert [s.name for s in parse_metric_specs(["map_at_r", "recall@1", "map_at_r"])] == ["map_at_r", "recall@1"]


# --- batch evaluation -------------------------------------------------------------------------


def _pipeline_oracle(queries, gallery, scores, positives, k):
    out = {"recall": {}, "rp": {}, "map": {}}
    for qi, q in enumerate(queries):
        pos = positives.get(q, set())
        if not pos:
            continue
        ranked = oracles.rank(dict(zip(gallery, scores[qi])))
        out["recall"][q] = oracles.recall_at_k(ranked, pos, k)
        out["rp"][q] = oracles.r_precision(ranked, dict.fromkeys(pos, 1.0), len(pos))
        out["map"][q] = oracles.map_at_r(ranked, pos, len(pos))
    return {name: math.fsum(v[q] for q in sorted(v)) / len(v) for name, v in out.items()}


def test_synthetic_corpus_end_to_end():
    rng = np.random.default_rng(3)
    queries = [f"q{i:02d}" for i in range(20)]
    gallery = [f"g{i:02d}" for i in range(30)]
    scores = np.round(rng.random((20, 30)), 2)
    positives = {q: {gallery[j] for j in rng.choice(30, size=int(rng.integers(1, 7)), replace=False)}
                 for q in queries}
    gt = gt_from({q: dict.fromkeys(p, "yes") for q, p in positives.items()})
    sims = SimilarityMatrix(tuple(queries), tuple(gallery), scores)
    specs = parse_metric_specs(["recall@5", "r_precision", "map_at_r"])
    for chunk in (1, 7, 256):
        rep = evaluate_direction(sims, gt, specs, chunk_size=chunk)
        want = _pipeline_oracle(queries, gallery, scores, positives, 5)
        assert rep.averaged["recall@5"] == want["recall"]
        assert rep.averaged["r_precision"] == want["rp"]
        assert rep.averaged["map_at_r"] == want["map"]


def test_degenerate_queries_excluded_and_counted():
    sims = SimilarityMatrix(("q1", "q2"), ("a", "b"), np.array([[1.0, 0.0], [1.0, 0.0]]))
    gt = gt_from({"q1": {"a": "yes"}})
    rep = evaluate_direction(sims, gt, parse_metric_specs(["recall@1"]))
    assert rep.averaged["recall@1"] == 1.0
    assert rep.n_used["recall@1"] == 1 and rep.n_degenerate["recall@1"] == 1
    assert math.isnan(rep.per_query["q2"]["recall@1"])


def test_no_usable_queries_is_error():
    sims = SimilarityMatrix(("q1",), ("a",), np.array([[1.0]]))
    with pytest.raises(ValueError, match="no usable"):
        evaluate_direction(sims, gt_from({}), parse_metric_specs(["recall@1"]))


def test_bidirectional_is_mean():
    i2t = SimilarityMatrix(("i1", "i2"), ("c1", "c2"), np.array([[1.0, 0.0], [1.0, 0.0]]))
    t2i = SimilarityMatrix(("c1", "c2"), ("i1", "i2"), np.array([[1.0, 0.0], [0.0, 1.0]]))
    gi = gt_from({"i1": {"c1": "yes"}, "i2": {"c2": "yes"}}, Modality.IMAGE)
    gtxt = gt_from({"c1": {"i1": "yes"}, "c2": {"i2": "yes"}})
    res = evaluate(i2t, t2i, gi, gtxt, parse_metric_specs(["recall@1"]))
    assert res.i2t.averaged["recall@1"] == 0.5 and res.t2i.averaged["recall@1"] == 1.0
    assert res.bidirectional["recall@1"] == 0.75


def test_direction_mismatch():
    s = SimilarityMatrix(("i1",), ("c1",), np.array([[1.0]]))
    with pytest.raises(ValueError, match="direction"):
        evaluate(s, None, gt_from({"i1": {"c1": "yes"}}), None, parse_metric_specs(["recall@1"]))


def test_graded_batch_matches_single_query():
    sims = SimilarityMatrix(("q",), ("a", "b", "c"), np.array([[0.9, 0.8, 0.1]]))
    gt = gt_from({"q": {"a": "weak_yes", "c": "yes"}})
    rep = evaluate_direction(sims, gt, parse_metric_specs(["recall@1:graded", "r_precision:graded", "r_precision"]))
    assert rep.per_query["q"] == {"recall@1:graded": 0.5, "r_precision:graded": 0.25, "r_precision": 0.5}


@given(st.integers(2, 8), st.randoms())
def test_permuting_tied_gallery_columns_changes_nothing(n, rnd):
    gallery = [f"g{i}" for i in range(n)]
    scores = [float(rnd.randint(0, 2)) for _ in range(n)]
    pos = {g: "yes" for g in gallery if rnd.random() < 0.5} or {gallery[0]: "yes"}
    perm = list(range(n))
    rnd.shuffle(perm)
    specs = parse_metric_specs(["recall@1", "recall@3", "r_precision", "map_at_r"])
    a = evaluate_direction(SimilarityMatrix(("q",), tuple(gallery), np.array([scores])), gt_from({"q": pos}), specs)
    b = evaluate_direction(SimilarityMatrix(("q",), tuple(gallery[i] for i in perm),
                                            np.array([[scores[i] for i in perm]])), gt_from({"q": pos}), specs)
    assert a.per_query == b.per_query


def test_pmrp_in_batch():
    classes = {"q": np.array([1, 0], dtype=np.uint8), "a": np.array([1, 0], dtype=np.uint8),
               "b": np.array([0, 1], dtype=np.uint8), "c": np.array([1, 0], dtype=np.uint8)}
    sims = SimilarityMatrix(("q",), ("a", "b", "c"), np.array([[0.9, 0.8, 0.1]]))
    rep = evaluate_direction(sims, None, parse_metric_specs(["pmrp"]), classes=classes)
    assert rep.per_query["q"]["pmrp"] == 0.5
    rep = evaluate_direction(sims, None, parse_metric_specs(["pmrp"]), classes=classes, zeta=2)
    assert rep.per_query["q"]["pmrp"] == 1.0


def test_load_class_vectors(tmp_path):
    p = tmp_path / "c.csv"
    p.write_text("item_id,b0,b1\na,1,0\nb,0,1\n")
    v = load_class_vectors(p)
    assert v["a"].tolist() == [1, 0] and v["a"].dtype == np.uint8
    p.write_text("item_id,b0,b1\na,1,2\n")
    with pytest.raises(InputError) as err:
        load_class_vectors(p)
    assert err.value.line == 2
