"""Scoring schemes, score vectors, double ordering and pruning."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from guesscorr import (
    CORRECT, OMITTED, WRONG,
    InputFormatError, ItemBank, Kind, ResponseMatrix, Scheme, ScoredMatrix,
    double_order, needs_pruning, prune, row_and_column_scores, score_matrix,
)


def make_responses(codes, options=4, person_prefix="p"):
    codes = np.array(codes, dtype=np.int8)
    n, k = codes.shape
    if isinstance(options, int):
        options = (options,) * k
    bank = ItemBank(tuple(f"q{j + 1}" for j in range(k)), tuple(options))
    return ResponseMatrix(tuple(f"{person_prefix}{i + 1}" for i in range(n)), bank, codes)


def corrected_from_values(values, options=4):
    values = np.array(values, dtype=np.float64)
    n, k = values.shape
    if isinstance(options, int):
        options = (options,) * k
    bank = ItemBank(tuple(f"q{j + 1}" for j in range(k)), tuple(options))
    return ScoredMatrix(tuple(f"p{i + 1}" for i in range(n)), bank, values,
                        Kind.CORRECTED, Scheme.CORRECTED)


# --- item bank / matrix validation ---------------------------------------

def test_item_bank_rejects_single_option():
    with pytest.raises(InputFormatError):
        ItemBank(("a",), (1,))


def test_item_bank_rejects_duplicate_ids():
    with pytest.raises(InputFormatError):
        ItemBank(("a", "a"), (4, 4))


def test_response_matrix_shape_checked():
    bank = ItemBank.uniform(3, 4)
    with pytest.raises(InputFormatError):
        ResponseMatrix(("p1",), bank, np.zeros((2, 3), dtype=np.int8))


def test_scored_matrix_rejects_off_grid_values():
    bank = ItemBank.uniform(2, 4)
    with pytest.raises(InputFormatError):
        ScoredMatrix(("p1",), bank, np.array([[0.5, 0.0]]), Kind.TRUE)
    with pytest.raises(InputFormatError):
        # -1 is the two-option corrective value, not the four-option one
        ScoredMatrix(("p1",), bank, np.array([[-1.0, 0.0]]),
                     Kind.CORRECTED, Scheme.CORRECTED)


def test_corrected_kind_requires_penalty_scheme():
    bank = ItemBank.uniform(2, 4)
    with pytest.raises(InputFormatError):
        ScoredMatrix(("p1",), bank, np.array([[0.0, 1.0]]), Kind.CORRECTED, Scheme.IGNORE)


# --- scoring --------------------------------------------------------------

def test_wrong_cell_scores_minus_third_on_four_options():
    rm = make_responses([[WRONG]], options=4)
    sm = score_matrix(rm, Scheme.CORRECTED)
    assert sm.values[0, 0] == -1.0 / 3.0
    assert sm.kind is Kind.CORRECTED


def test_two_option_corrected_equals_punitive():
    rm = make_responses([[WRONG, CORRECT], [OMITTED, WRONG]], options=2)
    corrected = score_matrix(rm, Scheme.CORRECTED)
    punitive = score_matrix(rm, Scheme.PUNITIVE)
    np.testing.assert_array_equal(corrected.values, punitive.values)


def test_row_score_matches_penalty_formula():
    # 10 correct, 6 wrong, 4 omitted on four-option items: 10 - 6/3 = 8
    codes = [[CORRECT] * 10 + [WRONG] * 6 + [OMITTED] * 4]
    sm = score_matrix(make_responses(codes, options=4), Scheme.CORRECTED)
    scores = row_and_column_scores(sm)
    assert scores.person_scores[0] == pytest.approx(8.0, abs=1e-12)


def test_ignore_scheme_gives_distorted_01():
    rm = make_responses([[CORRECT, WRONG, OMITTED]])
    sm = score_matrix(rm, Scheme.IGNORE)
    assert sm.kind is Kind.DISTORTED
    np.testing.assert_array_equal(sm.values, [[1.0, 0.0, 0.0]])


def test_omitted_scores_zero_under_every_scheme():
    rm = make_responses([[OMITTED]])
    for scheme in Scheme:
        assert score_matrix(rm, scheme).values[0, 0] == 0.0


@settings(max_examples=60)
@given(st.integers(2, 8))
def test_corrected_equals_punitive_iff_two_options(m):
    rm = make_responses([[WRONG]], options=m)
    value = score_matrix(rm, Scheme.CORRECTED).values[0, 0]
    if m == 2:
        assert value == -1.0
    else:
        assert value == -1.0 / (m - 1)


# --- score vectors --------------------------------------------------------

def test_all_zero_matrix_scores_zero():
    sm = score_matrix(make_responses(np.zeros((3, 4), dtype=int)), Scheme.CORRECTED)
    scores = row_and_column_scores(sm)
    assert (scores.person_scores == 0).all()
    assert (scores.item_scores == 0).all()


def test_small_matrix_scores():
    sm = ScoredMatrix(("p1", "p2"), ItemBank.uniform(2, 4),
                      np.array([[1.0, 1.0], [0.0, 0.0]]), Kind.TRUE)
    scores = row_and_column_scores(sm)
    np.testing.assert_array_equal(scores.person_scores, [2.0, 0.0])
    np.testing.assert_array_equal(scores.item_scores, [1.0, 1.0])


def test_one_guess_balanced_by_corrections():
    codes = [[CORRECT, WRONG, WRONG, WRONG]]
    sm = score_matrix(make_responses(codes, options=4), Scheme.CORRECTED)
    assert row_and_column_scores(sm).person_scores[0] == pytest.approx(0.0, abs=1e-12)


# --- double ordering ------------------------------------------------------

def test_double_order_identity_on_ordered_matrix():
    sm = ScoredMatrix(("p1", "p2"), ItemBank.uniform(2, 4),
                      np.array([[1.0, 1.0], [1.0, 0.0]]), Kind.TRUE)
    ordered, record = double_order(sm)
    assert record.row_order == (0, 1)
    assert record.col_order == (0, 1)
    np.testing.assert_array_equal(ordered.values, sm.values)


def test_double_order_rows_by_descending_score():
    values = np.array([[1, 0, 0], [1, 1, 1], [1, 1, 0]], dtype=float)
    sm = ScoredMatrix(("a", "b", "c"), ItemBank.uniform(3, 4), values, Kind.TRUE)
    _, record = double_order(sm)
    assert record.row_order == (1, 2, 0)


def test_double_order_breaks_ties_by_original_index():
    values = np.array([[1.0, 0.0], [0.0, 1.0]])
    sm = ScoredMatrix(("a", "b"), ItemBank.uniform(2, 4), values, Kind.TRUE)
    _, record = double_order(sm)
    assert record.row_order == (0, 1)
    assert record.col_order == (0, 1)


@settings(max_examples=40)
@given(st.integers(0, 2 ** 20 - 1))
def test_double_order_preserves_values_and_score_multisets(bits):
    vals = np.array([(bits >> i) & 1 for i in range(20)], dtype=float).reshape(4, 5)
    sm = ScoredMatrix(tuple("abcd"), ItemBank.uniform(5, 4), vals, Kind.TRUE)
    ordered, record = double_order(sm)
    assert sorted(ordered.values.ravel()) == sorted(sm.values.ravel())
    before = row_and_column_scores(sm)
    after = row_and_column_scores(ordered)
    assert sorted(before.person_scores) == sorted(after.person_scores)
    assert sorted(before.item_scores) == sorted(after.item_scores)
    assert np.all(np.diff(after.person_scores) <= 0)
    assert np.all(np.diff(after.item_scores) <= 0)


# --- pruning --------------------------------------------------------------

def test_prune_removes_all_zero_column():
    values = np.array([[1.0, 0.0], [0.0, 0.0], [1.0, 0.0]])
    sm = corrected_from_values(values)
    pruned, report = prune(sm)
    cols = [r for r in report.removals if r.axis == "column"]
    assert len(cols) == 1 and cols[0].label == "q2" and cols[0].trigger == "all-constant"


def test_prune_removes_negative_sum_row():
    # 1 - 4/3 = -1/3: persistent wrong answers beyond what one lucky guess offsets
    values = np.array([
        [1.0, -1 / 3, -1 / 3, -1 / 3, -1 / 3],
        [1.0, 1.0, 0.0, 1.0, 0.0],
        [0.0, 1.0, 1.0, 0.0, 1.0],
    ])
    sm = corrected_from_values(values)
    pruned, report = prune(sm)
    rows = [r for r in report.removals if r.axis == "row"]
    assert [(r.label, r.trigger) for r in rows] == [("p1", "negative-sum")]
    assert pruned.n_persons == 2


def test_prune_keeps_zero_sum_rows():
    values = np.array([
        [1.0, -1 / 3, -1 / 3, -1 / 3],  # exactly zero
        [1.0, 1.0, 0.0, 0.0],
        [0.0, 1.0, 1.0, 0.0],
        [0.0, 0.0, 1.0, 1.0],
    ])
    sm = corrected_from_values(values)
    pruned, report = prune(sm)
    assert "p1" in pruned.person_ids
    assert not any(r.axis == "row" and r.label == "p1" for r in report.removals)


def test_prune_cascade_takes_two_passes():
    # dropping the all-1 column exposes an all-0 row on the next pass
    values = np.array([
        [1.0, 0.0, 1.0],
        [0.0, 1.0, 1.0],
        [0.0, 0.0, 1.0],
    ])
    sm = corrected_from_values(values)
    pruned, report = prune(sm)
    by_pass = {(r.pass_no, r.axis, r.label, r.trigger) for r in report.removals}
    assert by_pass == {(1, "column", "q3", "all-constant"),
                       (2, "row", "p3", "all-constant")}
    assert report.passes == 2
    assert pruned.shape == (2, 2)


def test_prune_empty_result_is_reported_not_raised():
    values = np.ones((2, 2))
    sm = corrected_from_values(values)
    pruned, report = prune(sm)
    assert report.is_empty
    assert pruned.values.size == 0


def test_needs_pruning_matches_prune():
    clean = corrected_from_values(np.array([[1.0, 0.0], [0.0, 1.0]]))
    assert not needs_pruning(clean)
    dirty = corrected_from_values(np.array([[1.0, 1.0], [0.0, 1.0]]))
    assert needs_pruning(dirty)


def test_prune_sign_test_is_exact_rational():
    # float sum of 1 - 1/3 - 1/3 - 1/3 is ~1e-16, not 0; the trigger must not fire
    values = np.array([
        [1.0, -1 / 3, -1 / 3, -1 / 3],
        [0.0, 1.0, 1.0, 0.0],
        [1.0, 0.0, 0.0, 1.0],
    ])
    sm = corrected_from_values(values)
    _, report = prune(sm)
    assert not any(r.trigger == "negative-sum" for r in report.removals)


@st.composite
def small_corrected_matrices(draw):
    n = draw(st.integers(2, 6))
    k = draw(st.integers(2, 6))
    m = draw(st.integers(2, 5))
    cells = draw(st.lists(st.sampled_from([OMITTED, CORRECT, WRONG]),
                          min_size=n * k, max_size=n * k))
    codes = np.array(cells, dtype=np.int8).reshape(n, k)
    return score_matrix(make_responses(codes, options=m), Scheme.CORRECTED)


@settings(max_examples=150, deadline=None)
@given(small_corrected_matrices())
def test_prune_is_idempotent(sm):
    once, _ = prune(sm)
    twice, report = prune(once)
    assert report.removals == ()
    np.testing.assert_array_equal(once.values, twice.values)
    assert once.person_ids == twice.person_ids
    assert once.bank.item_ids == twice.bank.item_ids


@settings(max_examples=100, deadline=None)
@given(small_corrected_matrices())
def test_pruned_matrix_has_no_triggers_left(sm):
    pruned, _ = prune(sm)
    assert not needs_pruning(pruned)
