"""Classical item statistics with the variance-based guessing correction.

Correlations computed on a corrected matrix come out systematically low: the
negative corrective entries inflate each item column's variance while leaving
its covariance with the total scores untouched on average.  The rescaling
factor

    K_j = sqrt(var_pop(column) / (p_j (1 - p_j))),   p_j = column mean,

undoes exactly that inflation, so K_j * r_j estimates the correlation the
hypothetical no-guessing matrix would have produced.  On a plain 0/1 column
K_j is 1 and nothing changes.

Variance conventions: ``var_pop`` divides by n, ``var_sample`` by n - 1.
Undefined statistics are reported as values (None plus a note), never as
silently propagated NaNs; only the low-level vector functions raise.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import InputFormatError, UndefinedStatisticError
from .matrix import Scheme, ScoredMatrix

VALIDITY_THRESHOLD = 0.2


def _as_vector(x, name: str) -> np.ndarray:
    v = np.asarray(x, dtype=np.float64)
    if v.ndim != 1:
        raise InputFormatError(f"{name} must be one-dimensional")
    return v


def pearson(x, y) -> float:
    """Product-moment correlation from centered sums.

    r = sum((x - mx)(y - my)) / sqrt(sum((x - mx)^2) * sum((y - my)^2))
    """
    x = _as_vector(x, "x")
    y = _as_vector(y, "y")
    if x.size != y.size:
        raise InputFormatError("vectors must have equal length")
    if x.size < 2:
        raise UndefinedStatisticError("correlation needs at least 2 observations")
    dx = x - x.mean()
    dy = y - y.mean()
    sxx = float(dx @ dx)
    syy = float(dy @ dy)
    if sxx == 0.0 or syy == 0.0:
        raise UndefinedStatisticError("correlation of a constant vector is undefined")
    r = float(dx @ dy) / math.sqrt(sxx * syy)
    return min(1.0, max(-1.0, r))


def pearson_sum_form(x, y) -> float:
    """Product-moment correlation from raw product sums.

    r = (sum(xy) - n mx my) / (sqrt(sum(x^2) - n mx^2) * sqrt(sum(y^2) - n my^2))

    Algebraically identical to pearson(); kept as an independent computation
    route for cross-checks.
    """
    x = _as_vector(x, "x")
    y = _as_vector(y, "y")
    if x.size != y.size:
        raise InputFormatError("vectors must have equal length")
    n = x.size
    if n < 2:
        raise UndefinedStatisticError("correlation needs at least 2 observations")
    mx = x.mean()
    my = y.mean()
    sxx = float(x @ x) - n * mx * mx
    syy = float(y @ y) - n * my * my
    if sxx <= 0.0 or syy <= 0.0:
        raise UndefinedStatisticError("correlation of a constant vector is undefined")
    r = (float(x @ y) - n * mx * my) / math.sqrt(sxx * syy)
    return min(1.0, max(-1.0, r))


def point_biserial(column, totals) -> float:
    """Correlation of a 0/1 column with totals via the two-class-mean form.

    r = ((M1 - M0) / s_y) * sqrt(n0 * n1 / (n * (n - 1)))

    M1/M0 are the mean totals of the 1- and 0-scorers, n1/n0 the class
    sizes.  s_y is the sample (n - 1) standard deviation of the totals: the
    one convention under which this expression equals pearson(column,
    totals) exactly.
    """
    col = _as_vector(column, "column")
    y = _as_vector(totals, "totals")
    if col.size != y.size:
        raise InputFormatError("vectors must have equal length")
    if col.size and not np.isin(col, (0.0, 1.0)).all():
        raise InputFormatError("point-biserial needs a dichotomous 0/1 column")
    n = col.size
    if n < 2:
        raise UndefinedStatisticError("correlation needs at least 2 observations")
    ones = col == 1.0
    n1 = int(ones.sum())
    n0 = n - n1
    if n1 == 0 or n0 == 0:
        raise UndefinedStatisticError("column has a single class")
    dy = y - y.mean()
    syy = float(dy @ dy)
    if syy == 0.0:
        raise UndefinedStatisticError("totals are constant")
    s_y = math.sqrt(syy / (n - 1))
    r = ((y[ones].mean() - y[~ones].mean()) / s_y) * math.sqrt(n0 * n1 / (n * (n - 1.0)))
    return min(1.0, max(-1.0, r))


def correction_coefficient(column) -> float:
    """Rescaling factor K = sqrt(var_pop / (p (1 - p))), p the column mean.

    Exactly 1 on a 0/1 column.  Negative corrective entries push var_pop
    above p(1 - p), so K > 1 there.  Requires 0 < p < 1; prune the matrix
    first if a column fails that.
    """
    x = _as_vector(column, "column")
    if x.size == 0:
        raise UndefinedStatisticError("empty column")
    p = float(x.mean())
    if not 0.0 < p < 1.0:
        raise UndefinedStatisticError(
            f"column mean {p:g} outside (0, 1); coefficient undefined")
    if np.isin(x, (0.0, 1.0)).all():
        return 1.0
    var_pop = float(x @ x) / x.size - p * p
    return math.sqrt(var_pop / (p * (1.0 - p)))


def item_total_correlation(matrix: ScoredMatrix, j: int) -> float:
    """Pearson correlation of item j with the person total scores."""
    return pearson(matrix.column(j), matrix.values.sum(axis=1))


def item_rest_correlation(matrix: ScoredMatrix, j: int) -> float:
    """Correlation of item j with totals that exclude item j itself.

    The plain item-total correlation counts the item inside the total and is
    biased upward, the more so the fewer items there are; this one is not.
    """
    if matrix.n_items < 2:
        raise UndefinedStatisticError("item-rest correlation needs at least 2 items")
    col = matrix.column(j)
    return pearson(col, matrix.values.sum(axis=1) - col)


def corrected_item_total(matrix: ScoredMatrix, j: int) -> float:
    """K_j-rescaled item-total correlation.

    On a dichotomous (true/distorted) matrix K_j = 1 and this is the plain
    item-total correlation.
    """
    col = matrix.column(j)
    return correction_coefficient(col) * pearson(col, matrix.values.sum(axis=1))


def item_total_correlations(matrix: ScoredMatrix) -> np.ndarray:
    """Vector of item-total correlations; NaN where undefined."""
    X = matrix.values
    n, k = X.shape
    out = np.full(k, np.nan)
    if n < 2:
        return out
    y = X.sum(axis=1)
    dy = y - y.mean()
    syy = float(dy @ dy)
    if syy == 0.0:
        return out
    Xc = X - X.mean(axis=0)
    ssx = (Xc * Xc).sum(axis=0)
    defined = ssx > 0.0
    out[defined] = np.clip((Xc[:, defined].T @ dy) / np.sqrt(ssx[defined] * syy), -1.0, 1.0)
    return out


def correction_coefficients(matrix: ScoredMatrix) -> np.ndarray:
    """Vector of K_j factors; NaN where undefined."""
    k = matrix.n_items
    out = np.full(k, np.nan)
    for j in range(k):
        try:
            out[j] = correction_coefficient(matrix.column(j))
        except UndefinedStatisticError:
            pass
    return out


@dataclass(frozen=True)
class Intercorrelations:
    """Pairwise item correlations, raw and K-rescaled.

    flags entries: "ok", "out-of-range" (the rescaled value left [-1, 1]:
    reported as-is rather than clamped, since clamping would hide estimator
    variance), or "undefined".
    """

    item_ids: tuple
    raw: np.ndarray
    scaled: np.ndarray
    flags: np.ndarray


def intercorrelation_matrix(matrix: ScoredMatrix) -> Intercorrelations:
    """All pairwise item correlations with the K_s * K_t rescaling.

    The raw entry (s, t) is the plain Pearson correlation of the two item
    columns; the scaled entry multiplies it by K_s * K_t, which on corrected
    matrices undoes the variance inflation of both columns.  Diagonals are
    pinned to 1.
    """
    X = matrix.values
    n, k = X.shape
    raw = np.full((k, k), np.nan)
    scaled = np.full((k, k), np.nan)
    flags = np.full((k, k), "undefined", dtype=object)
    if n >= 2:
        Xc = X - X.mean(axis=0)
        ss = (Xc * Xc).sum(axis=0)
        defined = ss > 0.0
        if defined.any():
            cross = Xc.T @ Xc
            norm = np.sqrt(np.outer(ss, ss))
            pair = np.outer(defined, defined)
            raw[pair] = np.clip(cross[pair] / norm[pair], -1.0, 1.0)
    kv = correction_coefficients(matrix)
    kk = np.outer(kv, kv)
    scaled = raw * kk  # NaN K values propagate
    np.fill_diagonal(raw, 1.0)
    np.fill_diagonal(scaled, 1.0)
    ok = ~np.isnan(scaled)
    flags[ok] = "ok"
    flags[ok & (np.abs(scaled) > 1.0 + 1e-12)] = "out-of-range"
    return Intercorrelations(matrix.bank.item_ids, raw, scaled, flags)


@dataclass(frozen=True)
class ItemStats:
    """Per-item statistics row; None marks an undefined value (see notes)."""

    item_id: str
    n: int
    p: float
    var_pop: float
    var_sample: float
    k_j: Optional[float]
    r_raw: Optional[float]
    r_corrected: Optional[float]
    r_rest: Optional[float]
    valid: Optional[bool]
    notes: tuple = ()


def item_statistics(matrix: ScoredMatrix,
                    threshold: float = VALIDITY_THRESHOLD) -> list:
    """Full per-item statistics table.

    Punitive-scheme matrices are refused: the -1 penalty is meant for score
    comparison only, and feeding it to the variance-based correction would
    silently treat every item as two-option.
    """
    if matrix.scheme is Scheme.PUNITIVE:
        raise InputFormatError(
            "punitive scoring is for score comparison only; "
            "item statistics need an ignore- or corrected-scheme matrix")
    n, k = matrix.shape
    if n < 2:
        raise InputFormatError("item statistics need at least 2 persons")
    totals = matrix.values.sum(axis=1)
    rows = []
    for j in range(k):
        col = matrix.column(j)
        p = float(col.mean())
        var_pop = float(col @ col) / n - p * p
        var_sample = var_pop * n / (n - 1)
        notes = []
        k_j = r_raw = r_corrected = r_rest = None
        try:
            k_j = correction_coefficient(col)
        except UndefinedStatisticError as e:
            notes.append(f"K: {e}")
        try:
            r_raw = pearson(col, totals)
        except UndefinedStatisticError as e:
            notes.append(f"r_raw: {e}")
        if k_j is not None and r_raw is not None:
            r_corrected = k_j * r_raw
        try:
            if k < 2:
                raise UndefinedStatisticError("fewer than 2 items")
            r_rest = pearson(col, totals - col)
        except UndefinedStatisticError as e:
            notes.append(f"r_rest: {e}")
        valid = None if r_corrected is None else bool(r_corrected >= threshold)
        rows.append(ItemStats(matrix.bank.item_ids[j], n, p, var_pop, var_sample,
                              k_j, r_raw, r_corrected, r_rest, valid, tuple(notes)))
    return rows


def validity_flags(stats, threshold: float = VALIDITY_THRESHOLD) -> list:
    """True/False per item, or None where the corrected correlation is undefined."""
    return [None if s.r_corrected is None else bool(s.r_corrected >= threshold)
            for s in stats]
