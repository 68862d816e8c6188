import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dyncorr.errors import NumericError, ValidationError
from dyncorr.lac import (
    PairScoreTable,
    lac_absolute,
    lac_matrix,
    lac_squared,
    pair_count,
    pair_from_index,
    pair_index,
    pearson,
    select_top_pairs,
)
from dyncorr.simulate import gen_dynamic_pair, gen_correlated_pair, make_rng

from conftest import standardized_matrix


def std(v):
    v = np.asarray(v, dtype=float)
    return (v - v.mean()) / v.std(ddof=1)


def naive_lac_table(values, variant):
    """Oracle: per-pair scalar calls in a double loop."""
    fn = lac_squared if variant == "squared" else lac_absolute
    p = values.shape[0]
    out = np.empty(pair_count(p))
    t = 0
    for i in range(p):
        for j in range(i + 1, p):
            out[t] = fn(values[i], values[j])
            t += 1
    return out


# ---------------------------------------------------------------------------
# pearson
# ---------------------------------------------------------------------------

def test_pearson_self_is_one():
    assert pearson([1, 2, 3], [1, 2, 3]) == pytest.approx(1.0, abs=1e-12)


def test_pearson_reversal_is_minus_one():
    assert pearson([1, 2, 3], [3, 2, 1]) == pytest.approx(-1.0, abs=1e-12)


def test_pearson_hand_case():
    # centered products sum to 4, each variance sum is 5
    assert pearson([1, 2, 3, 4], [1, 3, 2, 4]) == pytest.approx(0.8, abs=1e-12)


def test_pearson_rejects_constant_input():
    with pytest.raises(NumericError):
        pearson([1.0, 1.0, 1.0], [1.0, 2.0, 3.0])


def test_pearson_requires_three_points():
    with pytest.raises(ValidationError):
        pearson([1.0, 2.0], [3.0, 4.0])


# ---------------------------------------------------------------------------
# scalar coefficients
# ---------------------------------------------------------------------------

def test_lac_squared_zero_for_identical_genes():
    x = std([0.3, -1.1, 2.0, 0.4, -0.6])
    assert lac_squared(x, x) == pytest.approx(0.0, abs=1e-12)


def test_lac_absolute_zero_for_identical_genes():
    x = std([0.3, -1.1, 2.0, 0.4, -0.6])
    assert lac_absolute(x, x) == pytest.approx(0.0, abs=1e-12)


def test_lac_squared_near_zero_for_plain_correlation():
    # population value is zero for a correlated bivariate normal
    x, y = gen_correlated_pair(200_000, 0.7, make_rng(404, 1))
    assert abs(lac_squared(std(x), std(y))) < 0.02


def monte_carlo_oracle(variant_fn, generator, n, rho, replicates=200, seed=900):
    values = np.empty(replicates)
    for rep in range(replicates):
        x, y = generator(n, rho, make_rng(seed, rep))
        values[rep] = variant_fn(std(x), std(y))
    return values.mean(), values.std(ddof=1)


def test_lac_squared_mixture_matches_monte_carlo_oracle():
    x, y = gen_dynamic_pair(10_000, 0.8, make_rng(41, 0))
    observed = lac_squared(std(x), std(y))
    mean, sd = monte_carlo_oracle(lac_squared, gen_dynamic_pair, 10_000, 0.8)
    assert observed > 0
    assert abs(observed - mean) < 3 * sd


def test_lac_absolute_mixture_matches_monte_carlo_oracle():
    x, y = gen_dynamic_pair(10_000, 0.8, make_rng(42, 0))
    observed = lac_absolute(std(x), std(y))
    mean, sd = monte_carlo_oracle(lac_absolute, gen_dynamic_pair, 10_000, 0.8)
    assert observed > 0
    assert abs(observed - mean) < 3 * sd


def test_lac_absolute_negative_center_under_plain_correlation():
    mean, sd = monte_carlo_oracle(lac_absolute, gen_correlated_pair, 2_000, 0.8, replicates=100)
    assert mean < -0.02


def test_lac_rejects_constant_transformed_row():
    x = np.array([1.0, -1.0, 1.0, -1.0, 1.0, -1.0])  # squares constant
    y = std(np.arange(6.0))
    with pytest.raises(NumericError):
        lac_squared(x, y)


# ---------------------------------------------------------------------------
# pair indexing
# ---------------------------------------------------------------------------

def test_pair_index_round_trip():
    p = 13
    idx = np.arange(pair_count(p))
    i, j = pair_from_index(idx, p)
    assert (i < j).all()
    assert np.array_equal(pair_index(i, j, p), idx)


# ---------------------------------------------------------------------------
# all-pairs table
# ---------------------------------------------------------------------------

def test_lac_matrix_two_genes_matches_scalar(rng):
    m = standardized_matrix(rng, 2, 15)
    table = lac_matrix(m)
    assert table.score(0, 1) == pytest.approx(lac_squared(m.values[0], m.values[1]), abs=1e-12)


@pytest.mark.parametrize("variant", ["squared", "absolute"])
def test_lac_matrix_matches_naive_loop(rng, variant):
    m = standardized_matrix(rng, 50, 20)
    table = lac_matrix(m, variant=variant, block=16)
    np.testing.assert_allclose(table.scores, naive_lac_table(m.values, variant), atol=1e-10)


def test_lac_matrix_duplicated_gene_rows_score_zero(rng):
    m = standardized_matrix(rng, 4, 12)
    m.values[2] = m.values[0]
    table = lac_matrix(m)
    assert table.score(0, 2) == pytest.approx(0.0, abs=1e-10)


def test_lac_matrix_names_offending_gene(rng):
    m = standardized_matrix(rng, 3, 8)
    sign = np.sign(m.values[1])
    sign[sign == 0] = 1.0
    m.values[1] = std(sign)  # squares become constant
    with pytest.raises(NumericError, match="g1"):
        lac_matrix(m)


def test_lac_matrix_thread_count_is_invisible(rng):
    m = standardized_matrix(rng, 37, 11)
    one = lac_matrix(m, threads=1, block=8)
    four = lac_matrix(m, threads=4, block=8)
    assert np.array_equal(one.scores, four.scores)


def test_lac_matrix_requires_standardized(rng):
    m = standardized_matrix(rng, 4, 9)
    m.standardized = False
    with pytest.raises(ValidationError):
        lac_matrix(m)


# ---------------------------------------------------------------------------
# selection
# ---------------------------------------------------------------------------

def _table(scores):
    scores = np.asarray(scores, dtype=float)
    # infer p from the condensed length
    p = int((1 + np.sqrt(1 + 8 * scores.size)) / 2)
    assert pair_count(p) == scores.size
    return PairScoreTable([f"g{i}" for i in range(p)], scores, "squared")


def test_select_all_pairs():
    t = _table(np.arange(10.0))
    sel = select_top_pairs(t, 1.0)
    assert len(sel) == 10


def test_select_two_largest_of_ten():
    t = _table(np.array([5.0, 1, 9, 2, 8, 3, 0, 4, 7, 6]))
    sel = select_top_pairs(t, 0.2)
    assert len(sel) == 2
    assert sel.score.tolist() == [9.0, 8.0]


def test_select_breaks_ties_deterministically():
    scores = np.zeros(15)
    scores[[2, 5, 11]] = 1.0  # three maxima, rest tied at 0
    t = _table(scores)
    a = select_top_pairs(t, 0.3)  # ceil(4.5) = 5 pairs: 3 maxima + 2 tie-broken zeros
    b = select_top_pairs(t, 0.3)
    assert len(a) == 5
    assert np.array_equal(a.i, b.i) and np.array_equal(a.j, b.j)
    # the tied zeros picked are the lexicographically smallest pairs
    zeros = sorted(zip(a.i, a.j))[:2]
    assert zeros == [(0, 1), (0, 2)]


def test_select_rejects_bad_fraction():
    t = _table(np.arange(6.0))
    with pytest.raises(ValidationError):
        select_top_pairs(t, 0.0)
    with pytest.raises(ValidationError):
        select_top_pairs(t, 1.5)


# ---------------------------------------------------------------------------
# invariance properties
# ---------------------------------------------------------------------------

finite_vecs = st.lists(
    st.floats(min_value=-50, max_value=50, allow_nan=False),
    min_size=6, max_size=12,
)


@settings(max_examples=40, deadline=None)
@given(xs=finite_vecs, ys=finite_vecs)
def test_lac_symmetry_and_sign_flip(xs, ys):
    n = min(len(xs), len(ys))
    x, y = np.array(xs[:n]), np.array(ys[:n])
    for v in (x, y, x * x, y * y, np.abs(x), np.abs(y)):
        if v.std(ddof=1) <= 1e-9:
            return  # degenerate draw, nothing to assert
    x, y = std(x), std(y)
    for fn in (lac_squared, lac_absolute):
        assert fn(x, y) == fn(y, x)
        assert fn(-x, y) == pytest.approx(fn(x, y), abs=1e-12)
        assert fn(x, -y) == pytest.approx(fn(x, y), abs=1e-12)
