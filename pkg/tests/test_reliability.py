"""Reliability coefficients and their behaviour on corrected matrices."""

import numpy as np
import pytest

from guesscorr import (
    ALPHA_CORRECTED_WARNING, ItemBank, Kind, Method, Normal, Scheme,
    ScoredMatrix, SimConfig, SplitScheme, UndefinedStatisticError,
    cronbach_alpha, generate_bundle, kr20, spearman_brown, split_half,
    test_retest,
)


def true_matrix(values):
    values = np.array(values, dtype=np.float64)
    n, k = values.shape
    return ScoredMatrix(tuple(f"p{i}" for i in range(n)), ItemBank.uniform(k, 4),
                        values, Kind.TRUE)


def corrected_matrix(values):
    values = np.array(values, dtype=np.float64)
    n, k = values.shape
    return ScoredMatrix(tuple(f"p{i}" for i in range(n)), ItemBank.uniform(k, 4),
                        values, Kind.CORRECTED, Scheme.CORRECTED)


# --- test-retest ------------------------------------------------------------

def test_retest_identical_vectors():
    assert test_retest([1.0, 2, 3, 4], [1.0, 2, 3, 4]).value == pytest.approx(1.0)


def test_retest_affine_transform_invariance():
    s1 = np.array([3.0, 7, 1, 5, 2])
    assert test_retest(s1, 2 * s1 + 3).value == pytest.approx(1.0, abs=1e-12)


def test_retest_independent_vectors_near_zero():
    rng = np.random.default_rng(11)
    r = test_retest(rng.normal(size=10000), rng.normal(size=10000))
    assert abs(r.value) < 0.05


# --- split-half ---------------------------------------------------------------

def test_split_half_identical_halves():
    # columns 0/2 and 1/3 pair up identically under first-second and odd-even
    col = np.array([1.0, 0, 1, 0, 1, 1, 0, 0])
    m = true_matrix(np.column_stack([col, col, col, col]))
    rep = split_half(m, SplitScheme.FIRST_SECOND)
    assert rep.detail.r_halves == pytest.approx(1.0)
    assert rep.detail.r_difference == pytest.approx(1.0)  # s_d = 0
    assert rep.value == pytest.approx(1.0)


def test_spearman_brown_hand_value():
    assert spearman_brown(0.6) == pytest.approx(0.75, abs=1e-15)


def test_split_half_report_structure():
    rng = np.random.default_rng(3)
    m = true_matrix((rng.random((40, 6)) < 0.5).astype(float))
    rep = split_half(m)
    assert rep.method is Method.SPLIT_HALF
    assert rep.detail is not None
    assert rep.value == pytest.approx(spearman_brown(rep.detail.r_halves), abs=1e-15)


def test_split_half_difference_form_equals_projected_r_under_equal_variances():
    # symmetric construction: swapping the halves permutes persons, so both
    # half-score distributions coincide and 1 - s_d^2/s_y^2 = 2r/(1+r)
    a = np.array([3.0, 2, 2, 1, 3, 0])
    b = np.array([2.0, 3, 1, 2, 0, 3])
    s_y2 = np.var(a + b)
    r_diff = 1 - np.var(a - b) / s_y2
    from guesscorr import pearson
    r = pearson(a, b)
    assert r_diff == pytest.approx(2 * r / (1 + r), abs=1e-6)


def test_split_half_degenerate_halves_undefined():
    m = true_matrix(np.array([[1.0, 1.0], [1.0, 1.0], [1.0, 1.0]]))
    with pytest.raises(UndefinedStatisticError):
        split_half(m)


def test_split_half_corrected_close_to_true_in_simulation():
    bundle = generate_bundle(SimConfig(n=2000, k=40, options=4,
                                       guess_rate=0.5, seed=31))
    rep_true = split_half(bundle.true_matrix)
    rep_corr = split_half(bundle.corrected)
    assert abs(rep_corr.value - rep_true.value) < 0.05
    assert abs(rep_corr.detail.r_difference - rep_true.detail.r_difference) < 0.05


# --- KR-20 ---------------------------------------------------------------------

def test_kr20_parallel_items_hand_case():
    m = true_matrix([[1.0, 1.0], [0.0, 0.0]])
    assert kr20(m).value == pytest.approx(1.0, abs=1e-12)


def test_kr20_independent_columns_near_zero():
    # equal abilities make the columns independent Bernoulli draws
    bundle = generate_bundle(SimConfig(n=4000, k=20, theta=Normal(0, 0), seed=7))
    assert abs(kr20(bundle.true_matrix).value) < 0.06


def test_kr20_corrected_tracks_true_in_simulation():
    bundle = generate_bundle(SimConfig(n=2000, k=40, options=4,
                                       guess_rate=0.5, seed=31))
    v_true = kr20(bundle.true_matrix).value
    v_corr = kr20(bundle.corrected).value
    assert abs(v_corr - v_true) < 0.03


def test_kr20_zero_variance_undefined():
    m = true_matrix([[1.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
    with pytest.raises(UndefinedStatisticError):
        kr20(m)


# --- alpha ---------------------------------------------------------------------

def test_alpha_equals_kr20_on_dichotomous_matrix():
    rng = np.random.default_rng(13)
    m = true_matrix((rng.random((60, 8)) < 0.5).astype(float))
    assert cronbach_alpha(m).value == pytest.approx(kr20(m).value, abs=1e-12)
    assert cronbach_alpha(m).warning is None


def test_alpha_parallel_rows_hand_case():
    m = true_matrix([[1.0, 1.0], [0.0, 0.0]])
    assert cronbach_alpha(m).value == pytest.approx(1.0, abs=1e-12)


def test_alpha_below_kr20_on_corrected_matrix():
    bundle = generate_bundle(SimConfig(n=500, k=20, options=4,
                                       guess_rate=0.4, seed=17))
    assert cronbach_alpha(bundle.corrected).value < kr20(bundle.corrected).value


def test_alpha_strictly_below_kr20_with_any_corrective_entry():
    vals = np.array([
        [1.0, 1.0, 0.0],
        [1.0, -1 / 3, 1.0],
        [0.0, 1.0, 1.0],
        [1.0, 0.0, 0.0],
    ])
    m = corrected_matrix(vals)
    assert cronbach_alpha(m).value < kr20(m).value


def test_alpha_on_corrected_matrix_always_warns():
    vals = np.array([[1.0, 0.0], [0.0, 1.0], [1.0, 1.0]])
    m = corrected_matrix(vals)
    assert cronbach_alpha(m).warning == ALPHA_CORRECTED_WARNING
