"""Classical item statistics and the K_j correction."""

import math

import numpy as np
import pytest
import scipy.stats
from hypothesis import given, settings
from hypothesis import strategies as st

from guesscorr import (
    InputFormatError, ItemBank, Kind, Scheme, ScoredMatrix,
    UndefinedStatisticError, corrected_item_total, correction_coefficient,
    correction_coefficients, intercorrelation_matrix, item_rest_correlation,
    item_statistics, item_total_correlation, item_total_correlations, pearson,
    pearson_sum_form, point_biserial, validity_flags,
)


def true_matrix(values):
    values = np.array(values, dtype=np.float64)
    n, k = values.shape
    return ScoredMatrix(tuple(f"p{i}" for i in range(n)), ItemBank.uniform(k, 4),
                        values, Kind.TRUE)


def corrected_matrix(values, options=4):
    values = np.array(values, dtype=np.float64)
    n, k = values.shape
    if isinstance(options, int):
        options = (options,) * k
    return ScoredMatrix(tuple(f"p{i}" for i in range(n)),
                        ItemBank(tuple(f"q{j}" for j in range(k)), tuple(options)),
                        values, Kind.CORRECTED, Scheme.CORRECTED)


finite_vectors = st.lists(
    st.floats(-4, 4, allow_nan=False).map(lambda v: round(v, 3)),
    min_size=3, max_size=40)


# --- pearson ---------------------------------------------------------------

def test_pearson_self_correlation_is_one():
    x = [0.0, 1.0, 3.0, 2.0]
    assert pearson(x, x) == pytest.approx(1.0, abs=1e-15)


def test_pearson_perfect_linear_relation():
    assert pearson([1, 1, 0, 0], [3, 3, 1, 1]) == pytest.approx(1.0, abs=1e-12)


def test_pearson_antithetic_pair():
    assert pearson([1, 0], [0, 1]) == pytest.approx(-1.0, abs=1e-15)


def test_pearson_constant_vector_raises():
    with pytest.raises(UndefinedStatisticError):
        pearson([1.0, 1.0, 1.0], [0.0, 1.0, 2.0])


def test_pearson_matches_scipy():
    rng = np.random.default_rng(42)
    for _ in range(50):
        x = rng.normal(size=30)
        y = rng.normal(size=30) + 0.3 * x
        assert pearson(x, y) == pytest.approx(scipy.stats.pearsonr(x, y).statistic,
                                              abs=1e-12)


@settings(max_examples=200)
@given(finite_vectors, finite_vectors)
def test_pearson_two_forms_agree(x, y):
    size = min(len(x), len(y))
    x, y = np.array(x[:size]), np.array(y[:size])
    if np.var(x) < 0.5 or np.var(y) < 0.5:
        return
    assert abs(pearson(x, y) - pearson_sum_form(x, y)) < 1e-12


@settings(max_examples=200)
@given(finite_vectors, finite_vectors)
def test_pearson_bounded(x, y):
    size = min(len(x), len(y))
    x, y = np.array(x[:size]), np.array(y[:size])
    if np.var(x) == 0 or np.var(y) == 0:
        return
    assert -1.0 <= pearson(x, y) <= 1.0


# --- point-biserial --------------------------------------------------------

def test_point_biserial_hand_value():
    # M1 = 3, M0 = 1, s_y = 2/sqrt(3): the expression collapses to exactly 1
    assert point_biserial([1, 1, 0, 0], [3, 3, 1, 1]) == pytest.approx(1.0, abs=1e-12)


def test_point_biserial_equals_pearson_on_dichotomous_columns():
    rng = np.random.default_rng(7)
    for _ in range(50):
        col = (rng.random(40) < rng.uniform(0.2, 0.8)).astype(float)
        if col.min() == col.max():
            continue
        totals = rng.normal(size=40) + col
        assert abs(point_biserial(col, totals) - pearson(col, totals)) < 1e-10


def test_point_biserial_independent_near_zero():
    rng = np.random.default_rng(8)
    col = (rng.random(10000) < 0.5).astype(float)
    totals = rng.normal(size=10000)
    assert abs(point_biserial(col, totals)) < 0.05


def test_point_biserial_rejects_single_class():
    with pytest.raises(UndefinedStatisticError):
        point_biserial([1.0, 1.0, 1.0], [1.0, 2.0, 3.0])


def test_point_biserial_rejects_non_dichotomous():
    with pytest.raises(InputFormatError):
        point_biserial([0.5, 1.0], [1.0, 2.0])


# --- correction coefficient ------------------------------------------------

def test_correction_coefficient_is_one_on_dichotomous_column():
    assert correction_coefficient([1.0, 0.0, 1.0, 0.0]) == 1.0


def test_correction_coefficient_hand_value_three_options():
    col = [1.0, 1.0, -0.5, -0.5, 0.0, 0.0]
    k = correction_coefficient(col)
    assert k == pytest.approx(math.sqrt(2.8), abs=1e-5)
    assert k == pytest.approx(1.67332, abs=1e-5)


def test_correction_coefficient_zero_sum_column_undefined():
    with pytest.raises(UndefinedStatisticError):
        correction_coefficient([1.0, -0.5, -0.5, 0.0])


def test_correction_exceeds_one_with_corrective_entries():
    col = np.array([1.0, 1.0, -1 / 3, 0.0, 0.0, 0.0])
    assert correction_coefficient(col) > 1.0


@settings(max_examples=150)
@given(st.integers(2, 6), st.data())
def test_correction_coefficient_at_least_one_on_grid_columns(m, data):
    neg = -1.0 / (m - 1)
    col = data.draw(st.lists(st.sampled_from([0.0, 1.0, neg]), min_size=4, max_size=30))
    col = np.array(col)
    if not 0.0 < col.mean() < 1.0:
        return
    assert correction_coefficient(col) >= 1.0 - 1e-12


# --- item-total / item-rest -----------------------------------------------

def test_item_rest_with_two_items_is_cross_correlation():
    m = true_matrix([[1, 0], [0, 1], [1, 1], [0, 0], [1, 0], [0, 0]])
    assert item_rest_correlation(m, 0) == pytest.approx(
        pearson(m.column(0), m.column(1)), abs=1e-14)


def test_item_rest_detects_single_item_dominance():
    rng = np.random.default_rng(13)
    a = (rng.random(400) < 0.5).astype(float)
    b = (rng.random(400) < 0.5).astype(float)  # independent of a
    m = true_matrix(np.column_stack([a, b]))
    assert item_total_correlation(m, 0) > 0.6
    assert abs(item_rest_correlation(m, 0)) < 0.15


def test_item_rest_identical_columns():
    col = np.array([1.0, 0, 1, 0, 1, 1])
    m = true_matrix(np.column_stack([col, col, col]))
    assert item_rest_correlation(m, 0) == pytest.approx(1.0, abs=1e-12)


def test_corrected_item_total_equals_plain_on_true_matrix():
    rng = np.random.default_rng(21)
    m = true_matrix((rng.random((50, 6)) < 0.6).astype(float))
    for j in range(6):
        assert corrected_item_total(m, j) == item_total_correlation(m, j)


def test_corrected_item_total_is_k_times_r():
    vals = np.array([
        [1.0, 1.0, 0.0],
        [1.0, -1 / 3, 0.0],
        [0.0, 1.0, 1.0],
        [-1 / 3, 0.0, 1.0],
        [0.0, 0.0, 1.0],
        [1.0, 0.0, 0.0],
    ])
    m = corrected_matrix(vals)
    for j in range(3):
        expected = correction_coefficient(m.column(j)) * item_total_correlation(m, j)
        assert corrected_item_total(m, j) == pytest.approx(expected, abs=1e-15)


def test_corrected_item_total_matches_direct_formula():
    """K_j * r_j must agree with the one-pass corrected correlation.

    Independent route: same numerator as the plain product-sum correlation,
    but the column factor of the denominator uses sum(x) - n*mean^2 in place
    of sum(x^2) - n*mean^2, consuming the corrective entries directly.
    """
    rng = np.random.default_rng(31)
    vals = rng.choice([0.0, 1.0, -1 / 3], size=(200, 8), p=[0.45, 0.35, 0.2])
    m = corrected_matrix(vals)
    y = m.values.sum(axis=1)
    n = m.n_persons
    my = y.mean()
    for j in range(8):
        x = m.column(j)
        mx = x.mean()
        if not 0 < mx < 1:
            continue
        num = float(x @ y) - n * mx * my
        den = math.sqrt((float(x.sum()) - n * mx * mx)
                        * (float(y @ y) - n * my * my))
        direct = num / den
        assert corrected_item_total(m, j) == pytest.approx(direct, abs=1e-10)


# --- intercorrelations ------------------------------------------------------

def test_intercorrelation_true_matrix_scaled_equals_raw():
    rng = np.random.default_rng(5)
    m = true_matrix((rng.random((80, 5)) < 0.5).astype(float))
    inter = intercorrelation_matrix(m)
    np.testing.assert_array_equal(inter.raw, inter.scaled)
    for s in range(5):
        for t in range(5):
            if s != t:
                assert inter.raw[s, t] == pytest.approx(
                    pearson(m.column(s), m.column(t)), abs=1e-12)
    assert (inter.flags == "ok").all()


def test_intercorrelation_duplicate_corrected_columns_flagged():
    col = np.array([1.0, -1 / 3, 0.0, 1.0, 0.0, -1 / 3])
    m = corrected_matrix(np.column_stack([col, col]))
    inter = intercorrelation_matrix(m)
    assert inter.raw[0, 1] == pytest.approx(1.0, abs=1e-12)
    assert inter.scaled[0, 1] > 1.0
    assert inter.flags[0, 1] == "out-of-range"


def test_intercorrelation_undefined_column_flagged():
    vals = np.array([[1.0, 0.0], [1.0, 1.0], [1.0, 0.0]])
    m = true_matrix(vals)
    inter = intercorrelation_matrix(m)
    assert np.isnan(inter.raw[0, 1])
    assert inter.flags[0, 1] == "undefined"
    assert inter.raw[0, 0] == 1.0  # diagonal pinned even for constant columns


def test_intercorrelation_diagonal_is_one():
    rng = np.random.default_rng(17)
    vals = rng.choice([0.0, 1.0, -1 / 3], size=(60, 4), p=[0.4, 0.4, 0.2])
    inter = intercorrelation_matrix(corrected_matrix(vals))
    np.testing.assert_array_equal(np.diag(inter.raw), np.ones(4))
    np.testing.assert_array_equal(np.diag(inter.scaled), np.ones(4))


# --- vectorized helpers -----------------------------------------------------

def test_vectorized_item_totals_match_scalar():
    rng = np.random.default_rng(19)
    vals = rng.choice([0.0, 1.0, -1 / 3], size=(120, 6), p=[0.4, 0.4, 0.2])
    m = corrected_matrix(vals)
    vec = item_total_correlations(m)
    for j in range(6):
        assert vec[j] == pytest.approx(item_total_correlation(m, j), abs=1e-12)


def test_vectorized_correction_coefficients_match_scalar():
    rng = np.random.default_rng(23)
    vals = rng.choice([0.0, 1.0, -1 / 3], size=(120, 6), p=[0.4, 0.4, 0.2])
    m = corrected_matrix(vals)
    vec = correction_coefficients(m)
    for j in range(6):
        assert vec[j] == pytest.approx(correction_coefficient(m.column(j)), abs=1e-14)


# --- item statistics table ---------------------------------------------------

def test_item_statistics_fields_and_validity():
    rng = np.random.default_rng(29)
    vals = rng.choice([0.0, 1.0, -1 / 3], size=(300, 5), p=[0.35, 0.45, 0.2])
    m = corrected_matrix(vals)
    stats = item_statistics(m)
    assert len(stats) == 5
    for s in stats:
        assert s.n == 300
        assert s.var_sample == pytest.approx(s.var_pop * 300 / 299, abs=1e-12)
        assert s.k_j >= 1.0 - 1e-12
        assert s.r_corrected == pytest.approx(s.k_j * s.r_raw, abs=1e-12)
        assert s.valid == (s.r_corrected >= 0.2)


def test_validity_threshold_boundary():
    class Stub:
        def __init__(self, r):
            self.r_corrected = r

    flags = validity_flags([Stub(0.2), Stub(0.19), Stub(None)])
    assert flags == [True, False, None]


def test_item_statistics_reports_undefined_columns_as_values():
    vals = np.array([[0.0, 1.0], [0.0, 0.0], [0.0, 1.0]])
    stats = item_statistics(true_matrix(vals))
    assert stats[0].k_j is None
    assert stats[0].r_raw is None
    assert stats[0].valid is None
    assert any("K:" in note for note in stats[0].notes)


def test_item_statistics_refuses_punitive_scheme():
    bank = ItemBank.uniform(2, 4)
    m = ScoredMatrix(("p1", "p2"), bank, np.array([[1.0, -1.0], [0.0, 1.0]]),
                     Kind.CORRECTED, Scheme.PUNITIVE)
    with pytest.raises(InputFormatError):
        item_statistics(m)
