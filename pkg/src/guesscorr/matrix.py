"""Response matrices, scoring schemes, score vectors, ordering and pruning.

A raw response grid records one of three outcomes per person and item:
correct, wrong, or omitted.  Scoring turns outcomes into numbers; the
fractional scheme writes -1/(m_j - 1) for a wrong answer on an item with m_j
answer options, so a blind guesser contributes zero to every row and column
sum in expectation.  Omissions score 0 under every scheme: only wrong
answers are treated as failed guesses.

Cell values are kept as float64 for statistics, but pruning decisions are
made on an exact integer rescaling of the matrix, so that e.g. a row summing
to 1 - 3 * (1/3) compares equal to zero instead of drifting to +-1e-16.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Optional

import numpy as np

from .errors import InputFormatError

# Raw outcome codes.
OMITTED = 0
CORRECT = 1
WRONG = 2

_OUTCOME_CODES = (OMITTED, CORRECT, WRONG)

# Construction-time tolerance for matching cell values against the value grid.
_GRID_ATOL = 1e-9


class Scheme(Enum):
    """Mapping from raw outcomes to cell values."""

    IGNORE = "ignore"        # correct 1, wrong 0, omitted 0
    PUNITIVE = "punitive"    # correct 1, wrong -1, omitted 0
    CORRECTED = "corrected"  # correct 1, wrong -1/(m_j - 1), omitted 0


class Kind(Enum):
    """What a scored matrix represents."""

    TRUE = "true"            # hypothetical no-guessing 0/1 matrix
    DISTORTED = "distorted"  # observed 0/1 matrix, guessed hits included
    CORRECTED = "corrected"  # wrong answers carry negative fractional weight


@dataclass(frozen=True)
class ItemBank:
    """Item identifiers paired with their answer-option counts m_j."""

    item_ids: tuple
    option_counts: tuple

    def __post_init__(self):
        ids = tuple(str(i) for i in self.item_ids)
        counts = tuple(int(m) for m in self.option_counts)
        if len(ids) != len(counts):
            raise InputFormatError(
                f"{len(ids)} item ids but {len(counts)} option counts")
        if len(set(ids)) != len(ids):
            raise InputFormatError("item ids must be unique")
        for item_id, m in zip(ids, counts):
            if m < 2:
                raise InputFormatError(
                    f"item {item_id!r}: need at least 2 answer options, got {m}")
        object.__setattr__(self, "item_ids", ids)
        object.__setattr__(self, "option_counts", counts)

    @classmethod
    def uniform(cls, k: int, options: int = 4, prefix: str = "q") -> "ItemBank":
        """Bank of k items that all share the same option count."""
        width = max(2, len(str(k)))
        ids = tuple(f"{prefix}{i + 1:0{width}d}" for i in range(k))
        return cls(ids, (options,) * k)

    def subset(self, indices) -> "ItemBank":
        return ItemBank(tuple(self.item_ids[int(i)] for i in indices),
                        tuple(self.option_counts[int(i)] for i in indices))

    def __len__(self) -> int:
        return len(self.item_ids)


@dataclass(frozen=True)
class ResponseMatrix:
    """Raw outcome grid: rows are persons, columns are items."""

    person_ids: tuple
    bank: ItemBank
    codes: np.ndarray  # int8, values in {OMITTED, CORRECT, WRONG}

    def __post_init__(self):
        persons = tuple(str(p) for p in self.person_ids)
        codes = np.array(self.codes, dtype=np.int8)
        if codes.ndim != 2 or codes.shape != (len(persons), len(self.bank)):
            raise InputFormatError(
                f"codes shape {codes.shape} does not match "
                f"({len(persons)} persons, {len(self.bank)} items)")
        if codes.size and not np.isin(codes, _OUTCOME_CODES).all():
            raise InputFormatError("outcome codes must be OMITTED, CORRECT or WRONG")
        codes.flags.writeable = False
        object.__setattr__(self, "person_ids", persons)
        object.__setattr__(self, "codes", codes)

    @property
    def shape(self):
        return self.codes.shape


def _column_value_grid(kind: Kind, scheme: Optional[Scheme], m: int):
    """Allowed cell values for one column."""
    if kind in (Kind.TRUE, Kind.DISTORTED):
        return (0.0, 1.0)
    if scheme is Scheme.PUNITIVE:
        return (0.0, 1.0, -1.0)
    return (0.0, 1.0, -1.0 / (m - 1))


@dataclass(frozen=True)
class ScoredMatrix:
    """Numeric matrix under a scoring scheme, tagged with what it represents.

    True and distorted matrices hold only 0/1; corrected matrices may also
    hold the column's negative corrective value.  Construction rejects
    anything off that grid.
    """

    person_ids: tuple
    bank: ItemBank
    values: np.ndarray
    kind: Kind
    scheme: Optional[Scheme] = None

    def __post_init__(self):
        persons = tuple(str(p) for p in self.person_ids)
        values = np.array(self.values, dtype=np.float64)
        if values.ndim != 2 or values.shape != (len(persons), len(self.bank)):
            raise InputFormatError(
                f"values shape {values.shape} does not match "
                f"({len(persons)} persons, {len(self.bank)} items)")
        if self.kind is Kind.CORRECTED and self.scheme not in (
                Scheme.PUNITIVE, Scheme.CORRECTED):
            raise InputFormatError(
                "corrected matrices must record a punitive or corrected scheme")
        for j, m in enumerate(self.bank.option_counts):
            grid = np.array(_column_value_grid(self.kind, self.scheme, m))
            col = values[:, j]
            dist = np.abs(col[:, None] - grid[None, :]).min(axis=1)
            bad = dist > _GRID_ATOL
            if bad.any():
                i = int(np.argmax(bad))
                raise InputFormatError(
                    f"row {persons[i]!r}, column {self.bank.item_ids[j]!r}: "
                    f"value {col[i]!r} is not a valid "
                    f"{self.kind.value}/{self.scheme.value if self.scheme else '-'} score")
        values.flags.writeable = False
        object.__setattr__(self, "person_ids", persons)
        object.__setattr__(self, "values", values)

    @property
    def n_persons(self) -> int:
        return self.values.shape[0]

    @property
    def n_items(self) -> int:
        return self.values.shape[1]

    @property
    def shape(self):
        return self.values.shape

    def column(self, j: int) -> np.ndarray:
        return self.values[:, j]


@dataclass(frozen=True)
class ScoreVector:
    """Signed row (person) and column (item) sums of a scored matrix."""

    person_ids: tuple
    person_scores: np.ndarray
    item_ids: tuple
    item_scores: np.ndarray


def score_matrix(responses: ResponseMatrix, scheme: Scheme) -> ScoredMatrix:
    """Score raw outcomes under one of the three schemes.

    ignore: correct 1, everything else 0 (what naive grading does); the
    result is tagged distorted because guessed hits are indistinguishable
    from known ones.  punitive: every wrong answer costs a full point.
    corrected: a wrong answer on an m_j-option item scores -1/(m_j - 1),
    which for m_j = 2 coincides with punitive.  Both penalty schemes yield
    kind=corrected with the scheme recorded.
    """
    codes = responses.codes
    values = np.zeros(codes.shape, dtype=np.float64)
    values[codes == CORRECT] = 1.0
    if scheme is Scheme.PUNITIVE:
        values[codes == WRONG] = -1.0
    elif scheme is Scheme.CORRECTED:
        wrong = codes == WRONG
        for j, m in enumerate(responses.bank.option_counts):
            values[wrong[:, j], j] = -1.0 / (m - 1)
    elif scheme is not Scheme.IGNORE:
        raise InputFormatError(f"unknown scoring scheme {scheme!r}")
    kind = Kind.DISTORTED if scheme is Scheme.IGNORE else Kind.CORRECTED
    return ScoredMatrix(responses.person_ids, responses.bank, values, kind, scheme)


def row_and_column_scores(matrix: ScoredMatrix) -> ScoreVector:
    """Row and column sums, signs included."""
    return ScoreVector(matrix.person_ids, matrix.values.sum(axis=1),
                       matrix.bank.item_ids, matrix.values.sum(axis=0))


@dataclass(frozen=True)
class OrderingRecord:
    """Original row/column indices in their new order."""

    row_order: tuple
    col_order: tuple


def double_order(matrix: ScoredMatrix):
    """Sort rows by descending person score and columns by descending item score.

    Ties keep their original relative order, so the result is deterministic.
    Returns the reordered matrix together with the permutations applied.
    """
    scores = row_and_column_scores(matrix)
    row_order = np.argsort(-scores.person_scores, kind="stable")
    col_order = np.argsort(-scores.item_scores, kind="stable")
    ordered = ScoredMatrix(
        tuple(matrix.person_ids[int(i)] for i in row_order),
        matrix.bank.subset(col_order),
        matrix.values[np.ix_(row_order, col_order)],
        matrix.kind, matrix.scheme)
    record = OrderingRecord(tuple(int(i) for i in row_order),
                            tuple(int(i) for i in col_order))
    return ordered, record


@dataclass(frozen=True)
class Removal:
    """One pruned row or column and why it went."""

    pass_no: int
    axis: str      # "row" | "column"
    index: int     # position in the original matrix
    label: str     # person or item id
    trigger: str   # "all-constant" | "negative-sum"


@dataclass(frozen=True)
class PruneReport:
    removals: tuple
    passes: int
    is_empty: bool


def _scaled_integers(matrix: ScoredMatrix):
    """Cell values times the lcm of all cell denominators, as exact integers.

    Grid values are ratios with denominator m_j - 1 (or 1), so after scaling
    every row/column sum is integer arithmetic and the sign tests in prune()
    are exact.
    """
    denoms = [1]
    if matrix.kind is Kind.CORRECTED and matrix.scheme is Scheme.CORRECTED:
        denoms.extend(m - 1 for m in matrix.bank.option_counts)
    scale = math.lcm(*denoms)
    exact = np.rint(matrix.values * scale)
    if exact.size and np.abs(matrix.values * scale - exact).max() > 1e-3:
        raise InputFormatError("matrix values are not on the scoring grid")
    return exact.astype(np.int64), scale


def needs_pruning(matrix: ScoredMatrix) -> bool:
    """True if prune() would remove at least one row or column."""
    scaled, scale = _scaled_integers(matrix)
    if scaled.size == 0:
        return False
    row_const = np.all(scaled == 0, axis=1) | np.all(scaled == scale, axis=1)
    col_const = np.all(scaled == 0, axis=0) | np.all(scaled == scale, axis=0)
    return bool(row_const.any() or col_const.any()
                or (scaled.sum(axis=1) < 0).any() or (scaled.sum(axis=0) < 0).any())


def prune(matrix: ScoredMatrix):
    """Drop degenerate rows and columns until none remain.

    Two triggers, applied to rows and columns alike:

    * all-constant: every entry 0 or every entry 1 (no information);
    * negative-sum: the signed total is below zero (persistently wrong
      persons, or items whose distractors out-pull the right answer).

    Each pass evaluates both triggers on a snapshot of the current matrix,
    removes everything triggered, and repeats, so removals caused by earlier
    removals land in later passes.  Zero-sum rows/columns are kept: only a
    strictly negative total triggers.  An empty result is a legitimate
    outcome reported via the returned PruneReport, not an error.
    """
    scaled, scale = _scaled_integers(matrix)
    rows = np.arange(matrix.n_persons)
    cols = np.arange(matrix.n_items)
    removals = []
    passes = 0
    while rows.size and cols.size:
        sub = scaled[np.ix_(rows, cols)]
        row_const = np.all(sub == 0, axis=1) | np.all(sub == scale, axis=1)
        col_const = np.all(sub == 0, axis=0) | np.all(sub == scale, axis=0)
        row_neg = sub.sum(axis=1) < 0
        col_neg = sub.sum(axis=0) < 0
        drop_rows = row_const | row_neg
        drop_cols = col_const | col_neg
        if not drop_rows.any() and not drop_cols.any():
            break
        passes += 1
        for pos in np.flatnonzero(drop_rows):
            orig = int(rows[pos])
            removals.append(Removal(
                passes, "row", orig, matrix.person_ids[orig],
                "all-constant" if row_const[pos] else "negative-sum"))
        for pos in np.flatnonzero(drop_cols):
            orig = int(cols[pos])
            removals.append(Removal(
                passes, "column", orig, matrix.bank.item_ids[orig],
                "all-constant" if col_const[pos] else "negative-sum"))
        rows = rows[~drop_rows]
        cols = cols[~drop_cols]
    pruned = ScoredMatrix(
        tuple(matrix.person_ids[int(i)] for i in rows),
        matrix.bank.subset(cols),
        matrix.values[np.ix_(rows, cols)],
        matrix.kind, matrix.scheme)
    return pruned, PruneReport(tuple(removals), passes, pruned.values.size == 0)
