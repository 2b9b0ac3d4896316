"""Reliability coefficients for scored matrices.

KR-20 and the split-half estimates stay valid on guessing-corrected matrices:
column means and total scores keep their no-guessing expectations there.
Cronbach's alpha does not — the negative corrective entries push every item
variance above p(1 - p) — so alpha on a corrected matrix always carries a
warning and will sit strictly below KR-20.

All internal variances use the population (divide-by-n) convention: p(1 - p)
is itself the population variance of a 0/1 column, which makes alpha equal
KR-20 exactly on dichotomous data.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Optional

import numpy as np

from .errors import UndefinedStatisticError
from .matrix import Kind, ScoredMatrix, row_and_column_scores
from .stats import pearson

ALPHA_CORRECTED_WARNING = (
    "Cronbach's alpha is not applicable to guessing-corrected matrices: "
    "negative corrective entries make every item variance exceed p(1-p), "
    "so alpha understates reliability; use KR-20 or split-half instead.")


class Method(Enum):
    TEST_RETEST = "test-retest"
    SPLIT_HALF = "split-half"
    KR20 = "kr20"
    CRONBACH_ALPHA = "alpha"


class SplitScheme(Enum):
    ODD_EVEN = "odd-even"
    FIRST_SECOND = "first-second"


@dataclass(frozen=True)
class HalvesDetail:
    r_halves: float      # Pearson correlation of the two half scores
    r_difference: float  # 1 - s_d^2 / s_y^2
    r_full: float        # Spearman-Brown 2r/(1+r) applied to r_halves


@dataclass(frozen=True)
class ReliabilityReport:
    method: Method
    value: float
    detail: Optional[HalvesDetail] = None
    warning: Optional[str] = None


def spearman_brown(r_half: float) -> float:
    """Project a half-test coefficient to full test length: 2r / (1 + r)."""
    if r_half <= -1.0:
        raise UndefinedStatisticError("Spearman-Brown undefined at r = -1")
    return 2.0 * r_half / (1.0 + r_half)


def test_retest(scores_1, scores_2) -> ReliabilityReport:
    """Pearson correlation between two administrations' score vectors.

    Unbiased on corrected scores, whose expectation is the no-guessing score.
    """
    return ReliabilityReport(Method.TEST_RETEST, pearson(scores_1, scores_2))


def _population_variance(x: np.ndarray) -> float:
    return float(np.var(x))


def split_half(matrix: ScoredMatrix,
               scheme: SplitScheme = SplitScheme.ODD_EVEN) -> ReliabilityReport:
    """Split the items in two, score each half per person, estimate reliability.

    odd-even (default): items are first ordered by descending item score, then
    dealt alternately, which yields difficulty-matched halves.  first-second:
    the first ceil(k/2) columns against the rest, in given order.

    Three numbers are reported: the half-score correlation r_halves; the
    difference-variance coefficient 1 - s_d^2/s_y^2 (s_d from per-person
    half-score differences, s_y from total scores), which under equal-variance
    halves equals the Spearman-Brown projection of r_halves; and that
    projection 2r/(1+r) itself, the report's headline value.
    """
    n, k = matrix.shape
    if k < 2:
        raise UndefinedStatisticError("split-half needs at least 2 items")
    if scheme is SplitScheme.ODD_EVEN:
        item_scores = row_and_column_scores(matrix).item_scores
        order = np.argsort(-item_scores, kind="stable")
        idx_a, idx_b = order[0::2], order[1::2]
    else:
        half = (k + 1) // 2
        idx_a, idx_b = np.arange(half), np.arange(half, k)
    a = matrix.values[:, idx_a].sum(axis=1)
    b = matrix.values[:, idx_b].sum(axis=1)
    try:
        r_halves = pearson(a, b)
    except UndefinedStatisticError as e:
        raise UndefinedStatisticError(f"degenerate halves: {e}") from e
    s_y2 = _population_variance(a + b)
    if s_y2 == 0.0:
        raise UndefinedStatisticError("total scores have zero variance")
    r_difference = 1.0 - _population_variance(a - b) / s_y2
    r_full = spearman_brown(r_halves)
    return ReliabilityReport(Method.SPLIT_HALF, r_full,
                             HalvesDetail(r_halves, r_difference, r_full))


def kr20(matrix: ScoredMatrix) -> ReliabilityReport:
    """Kuder-Richardson 20: (k/(k-1)) * (1 - sum_j p_j(1-p_j) / s_y^2).

    p_j is the plain column mean.  On a corrected matrix that mean still
    estimates the no-guessing share of correct answers, which is why this
    formula remains usable there while alpha does not.
    """
    n, k = matrix.shape
    if k < 2:
        raise UndefinedStatisticError("KR-20 needs at least 2 items")
    p = matrix.values.mean(axis=0)
    pq_sum = float((p - p * p).sum())
    s_y2 = _population_variance(matrix.values.sum(axis=1))
    if s_y2 == 0.0:
        raise UndefinedStatisticError("total scores have zero variance")
    value = (k / (k - 1.0)) * (1.0 - pq_sum / s_y2)
    return ReliabilityReport(Method.KR20, value)


def cronbach_alpha(matrix: ScoredMatrix) -> ReliabilityReport:
    """Cronbach's alpha: (k/(k-1)) * (1 - sum_j s_j^2 / s_y^2).

    Equals KR-20 exactly on dichotomous matrices.  On corrected matrices it
    is reported for comparison only, with a warning attached.
    """
    n, k = matrix.shape
    if k < 2:
        raise UndefinedStatisticError("alpha needs at least 2 items")
    X = matrix.values
    p = X.mean(axis=0)
    var_sum = float(((X * X).mean(axis=0) - p * p).sum())
    s_y2 = _population_variance(X.sum(axis=1))
    if s_y2 == 0.0:
        raise UndefinedStatisticError("total scores have zero variance")
    value = (k / (k - 1.0)) * (1.0 - var_sum / s_y2)
    warning = ALPHA_CORRECTED_WARNING if matrix.kind is Kind.CORRECTED else None
    return ReliabilityReport(Method.CRONBACH_ALPHA, value, warning=warning)
