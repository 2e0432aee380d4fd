import math

import numpy as np
import pytest
from hypothesis import assume, given, strategies as st

import oracles
from xmreval.correlation import (
    ScoreTable,
    correlation_matrix,
    cross_model_rank,
    kendall_tau_b,
    load_score_table,
)
from xmreval.errors import InputError


def test_identity_and_reversal():
    x = [1.0, 2.0, 3.0, 4.0]
    assert kendall_tau_b(x, x) == 1.0
    assert kendall_tau_b(x, x[::-1]) == -1.0


def test_constant_is_undefined():
    assert math.isnan(kendall_tau_b([1, 1, 1], [1, 2, 3]))


def test_bad_inputs():
    with pytest.raises(ValueError):
        kendall_tau_b([1], [1])
    with pytest.raises(ValueError):
        kendall_tau_b([1, 2], [1, 2, 3])


def test_matches_scipy_on_ties():
    from scipy.stats import kendalltau

    rng = np.random.default_rng(1)
    for _ in range(20):
        x = rng.integers(0, 5, 25).astype(float)
        y = rng.integers(0, 5, 25).astype(float)
        assert abs(kendall_tau_b(x, y) - kendalltau(x, y, variant="b").statistic) <= 1e-12


short_lists = st.integers(2, 8).flatmap(lambda n: st.tuples(
    st.lists(st.integers(0, 4).map(float), min_size=n, max_size=n),
    st.lists(st.integers(0, 4).map(float), min_size=n, max_size=n),
))


@given(short_lists)
def test_tau_b_oracle_and_symmetry(xy):
    x, y = xy
    got, want = kendall_tau_b(x, y), oracles.tau_b(x, y)
    if math.isnan(want):
        assert math.isnan(got)
        return
    assert abs(got - want) <= 1e-12
    assert kendall_tau_b(y, x) == got
    assert -1.0 <= got <= 1.0


@given(short_lists, st.floats(0.1, 10), st.floats(-5, 5))
def test_tau_b_monotone_transform_invariance(xy, scale, shift):
    x, y = xy
    t = kendall_tau_b(x, y)
    assume(not math.isnan(t))
    x = np.array(x)
    for fx in (scale * x + shift, np.exp(x), x ** 3 + x):
        assert abs(kendall_tau_b(fx, y) - t) <= 1e-12
        assert abs(kendall_tau_b(y, fx) - t) <= 1e-12


@given(st.lists(st.integers(-50, 50), min_size=2, max_size=8, unique=True))
def test_unit_only_for_monotone(x):
    y = [v ** 3 for v in x]
    assert kendall_tau_b(x, y) == 1.0
    assert kendall_tau_b(x, [-v for v in y]) == -1.0


def _table(cols, values):
    return ScoreTable(tuple(f"m{i}" for i in range(len(values))), tuple(cols), np.array(values, dtype=float))


def test_duplicated_column():
    cm = correlation_matrix(_table(["a", "b"], [[1, 1], [3, 3], [2, 2]]))
    assert cm["a", "b"] == 1.0 and cm["a", "a"] == 1.0


def test_constant_column_marked():
    cm = correlation_matrix(_table(["a", "b"], [[1, 5], [2, 5], [3, 5]]))
    assert math.isnan(cm["a", "b"])
    assert cm["b", "b"] == 1.0


def test_matrix_matches_pairwise():
    rng = np.random.default_rng(8)
    t = _table(["a", "b", "c"], rng.random((25, 3)))
    cm = correlation_matrix(t)
    assert np.array_equal(cm.values, cm.values.T)
    for i, a in enumerate(t.cols):
        for j, b in enumerate(t.cols):
            if i != j:
                assert cm[a, b] == kendall_tau_b(t.values[:, i], t.values[:, j])


def test_matrix_needs_two_models():
    with pytest.raises(ValueError):
        correlation_matrix(_table(["a"], [[1.0]]))


def test_table_validation(tmp_path):
    with pytest.raises(InputError):
        ScoreTable(("a", "a"), ("x",), np.zeros((2, 1)))
    p = tmp_path / "t.csv"
    p.write_text("model,x\nm1,1\nm2,oops\n")
    with pytest.raises(InputError) as err:
        load_score_table(p)
    assert err.value.line == 3


def test_cross_model_rank():
    a = {"q1": list("abcde"), "q2": list("edcba")}
    assert cross_model_rank(a, a) == 1.0
    rev = {q: r[::-1] for q, r in a.items()}
    assert cross_model_rank(a, rev) == 5.0
    with pytest.raises(ValueError):
        cross_model_rank(a, {"q1": list("bcde"), "q2": list("abcde")})
    with pytest.raises(ValueError):
        cross_model_rank(a, {"q1": list("abcde")})


@given(st.lists(st.permutations(list("abcdef")), min_size=1, max_size=5),
       st.lists(st.permutations(list("abcdef")), min_size=5, max_size=5))
def test_cross_model_rank_oracle(ra, rb):
    a = {f"q{i}": r for i, r in enumerate(ra)}
    b = {f"q{i}": rb[i] for i in range(len(ra))}
    want = sum(b[q].index(a[q][0]) + 1 for q in a) / len(a)
    assert cross_model_rank(a, b) == want
