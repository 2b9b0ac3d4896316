"""Logistic success-function models and joint maximum-likelihood fitting.

The general success function combines person and item sides symmetrically:

    P_ij = c_i c_j + (1 - c_i c_j) * [1 + exp(D_ij * (delta_j - theta_i))]^-1

where theta_i / delta_j are the person and item potentials, d_i / d_j their
selectivities from which the combined slope D_ij is built, and c_i / c_j the
guessing floor factors.  Pinning parameters recovers the familiar special
cases: both selectivities sqrt(2) and no floor gives the one-parameter
logistic; an infinite selectivity on one side hands the slope to the other
side (both two-parameter forms); c_i = 1 with d_i infinite gives the
guessing-floor three-parameter model.

The combined slope uses D_ij = d_i d_j / sqrt(d_i^2 + d_j^2) ("normalized").
A "literal" variant with sqrt(d_i^2 d_j^2) in the denominator is selectable
for comparison, but it collapses D to sign(d_i d_j) and is inconsistent with
every special case above, so it is never the default.

The log-likelihood sums x ln P + (1 - x) ln(1 - P) over all cells.  That
form extends beyond 0/1 data: assigning a corrective entry x = -1/(m-1) the
cell probability P^x (1-P)^(1-x) makes m - 1 corrective entries plus the one
guessed 1 they offset carry exactly the probability of m zeros, (1 - P)^m.
Corrected matrices therefore fit with the same machinery as dichotomous
ones, and without any guessing-floor parameters.

Fitting covers the guessing-free family only.  The five-parameter form's
joint likelihood is multimodal enough to produce spurious solutions, and the
three-parameter guessing-floor model has nothing to absorb on a corrected
matrix; both are evaluation-only here.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from scipy.special import expit

from .errors import PruningRequiredError, UnsupportedModelError
from .matrix import ScoredMatrix, needs_pruning

LOGIT_BOUND = 6.0
SQRT2 = math.sqrt(2.0)

_P_FLOOR = 1e-12  # keeps fitting likelihoods finite when expit saturates


class Model(Enum):
    RASCH = "rasch"
    TWOPL_ITEM = "2pl-item"
    TWOPL_PERSON = "2pl-person"
    THREEPL = "3pl"
    COMBINED_3PARAM = "3param"
    FIVE_PARAM = "5param"


FITTABLE_MODELS = (Model.RASCH, Model.TWOPL_ITEM, Model.TWOPL_PERSON,
                   Model.COMBINED_3PARAM)


class SlopeRule(Enum):
    NORMALIZED = "normalized"  # D = d_i d_j / sqrt(d_i^2 + d_j^2)
    LITERAL = "literal"        # D = d_i d_j / sqrt(d_i^2 d_j^2) = sign(d_i d_j)


def _pinned(value: float, size: int) -> np.ndarray:
    return np.full(size, value, dtype=np.float64)


@dataclass(frozen=True)
class IrtParams:
    """Person/item parameter arrays under a model tag.

    Models pin what they do not use: Rasch fixes all selectivities at
    sqrt(2) (combined slope 1) and all floors at 0; the three-parameter
    guessing-floor model pins c_i = 1 and d_i = +inf so the combined slope
    reduces to d_j.  Infinite selectivities are stored as float inf and
    handled analytically, never as a large finite stand-in.
    """

    model: Model
    theta: np.ndarray
    delta: np.ndarray
    d_person: np.ndarray
    d_item: np.ndarray
    c_person: np.ndarray
    c_item: np.ndarray

    def __post_init__(self):
        arrays = {}
        for name in ("theta", "delta", "d_person", "d_item", "c_person", "c_item"):
            a = np.array(getattr(self, name), dtype=np.float64)
            if a.ndim != 1:
                raise ValueError(f"{name} must be one-dimensional")
            a.flags.writeable = False
            arrays[name] = a
        n, k = arrays["theta"].size, arrays["delta"].size
        for name, size in (("d_person", n), ("c_person", n),
                           ("d_item", k), ("c_item", k)):
            if arrays[name].size != size:
                raise ValueError(f"{name} must have length {size}")
        for name in ("d_person", "d_item"):
            if (arrays[name] <= 0).any():
                raise ValueError(f"{name} must be positive")
        for name in ("c_person", "c_item"):
            if ((arrays[name] < 0) | (arrays[name] > 1)).any():
                raise ValueError(f"{name} must lie in [0, 1]")
        for name, a in arrays.items():
            object.__setattr__(self, name, a)

    @property
    def n_persons(self) -> int:
        return self.theta.size

    @property
    def n_items(self) -> int:
        return self.delta.size

    @classmethod
    def rasch(cls, theta, delta) -> "IrtParams":
        theta = np.asarray(theta, dtype=np.float64)
        delta = np.asarray(delta, dtype=np.float64)
        return cls(Model.RASCH, theta, delta,
                   _pinned(SQRT2, theta.size), _pinned(SQRT2, delta.size),
                   _pinned(0.0, theta.size), _pinned(0.0, delta.size))

    @classmethod
    def twopl_item(cls, theta, delta, d_item) -> "IrtParams":
        theta = np.asarray(theta, dtype=np.float64)
        delta = np.asarray(delta, dtype=np.float64)
        return cls(Model.TWOPL_ITEM, theta, delta,
                   _pinned(np.inf, theta.size), d_item,
                   _pinned(0.0, theta.size), _pinned(0.0, delta.size))

    @classmethod
    def twopl_person(cls, theta, delta, d_person) -> "IrtParams":
        theta = np.asarray(theta, dtype=np.float64)
        delta = np.asarray(delta, dtype=np.float64)
        return cls(Model.TWOPL_PERSON, theta, delta,
                   d_person, _pinned(np.inf, delta.size),
                   _pinned(0.0, theta.size), _pinned(0.0, delta.size))

    @classmethod
    def threepl(cls, theta, delta, d_item, c_item) -> "IrtParams":
        theta = np.asarray(theta, dtype=np.float64)
        delta = np.asarray(delta, dtype=np.float64)
        return cls(Model.THREEPL, theta, delta,
                   _pinned(np.inf, theta.size), d_item,
                   _pinned(1.0, theta.size), c_item)

    @classmethod
    def combined(cls, theta, delta, d_person, d_item) -> "IrtParams":
        theta = np.asarray(theta, dtype=np.float64)
        delta = np.asarray(delta, dtype=np.float64)
        return cls(Model.COMBINED_3PARAM, theta, delta, d_person, d_item,
                   _pinned(0.0, theta.size), _pinned(0.0, delta.size))

    @classmethod
    def five_param(cls, theta, delta, d_person, d_item, c_person, c_item) -> "IrtParams":
        return cls(Model.FIVE_PARAM, theta, delta, d_person, d_item,
                   c_person, c_item)


def combined_discrimination(d_person, d_item,
                            rule: SlopeRule = SlopeRule.NORMALIZED) -> np.ndarray:
    """Combined slope for person/item selectivity pairs (broadcasting).

    normalized: d_i d_j / sqrt(d_i^2 + d_j^2); an infinite selectivity on one
    side yields the other side's value in the limit.  literal: sign(d_i d_j).
    """
    di, dj = np.broadcast_arrays(np.asarray(d_person, dtype=np.float64),
                                 np.asarray(d_item, dtype=np.float64))
    if rule is SlopeRule.LITERAL:
        return np.where((di > 0) == (dj > 0), 1.0, -1.0)
    out = np.empty(di.shape, dtype=np.float64)
    i_inf = np.isinf(di)
    j_inf = np.isinf(dj)
    both = i_inf & j_inf
    fin = ~i_inf & ~j_inf
    out[both] = np.inf
    out[i_inf & ~j_inf] = dj[i_inf & ~j_inf]
    out[~i_inf & j_inf] = di[~i_inf & j_inf]
    out[fin] = di[fin] * dj[fin] / np.hypot(di[fin], dj[fin])
    return out


def _slope_grad_first(a, b) -> np.ndarray:
    """d/da of the normalized combined slope a*b / sqrt(a^2 + b^2).

    Finite pairs: b^3 / (a^2 + b^2)^(3/2).  Limits: 0 when a is infinite,
    1 when only b is.
    """
    a, b = np.broadcast_arrays(np.asarray(a, dtype=np.float64),
                               np.asarray(b, dtype=np.float64))
    out = np.empty(a.shape, dtype=np.float64)
    a_inf = np.isinf(a)
    b_inf = np.isinf(b) & ~a_inf
    fin = ~a_inf & ~np.isinf(b)
    out[a_inf] = 0.0
    out[b_inf] = 1.0
    h = np.hypot(a[fin], b[fin])
    out[fin] = (b[fin] / h) ** 3
    return out


def probability_matrix(params: IrtParams,
                       rule: SlopeRule = SlopeRule.NORMALIZED) -> np.ndarray:
    """Success probabilities for every person-item pair."""
    D = combined_discrimination(params.d_person[:, None], params.d_item[None, :], rule)
    diff = params.theta[:, None] - params.delta[None, :]
    with np.errstate(invalid="ignore"):
        z = D * diff
    if np.isinf(D).any():
        # infinite slope exactly at theta == delta: the limit is 1/2
        z = np.where(np.isnan(z), 0.0, z)
    base = expit(z)
    cc = params.c_person[:, None] * params.c_item[None, :]
    return cc + (1.0 - cc) * base


def success_probability(params: IrtParams, i: int, j: int,
                        rule: SlopeRule = SlopeRule.NORMALIZED) -> float:
    """P for one person-item pair under the general form."""
    D = float(combined_discrimination(params.d_person[i], params.d_item[j], rule))
    diff = float(params.theta[i] - params.delta[j])
    z = 0.0 if (math.isinf(D) and diff == 0.0) else D * diff
    base = float(expit(z))
    cc = float(params.c_person[i] * params.c_item[j])
    return cc + (1.0 - cc) * base


def rasch_probability(theta, delta):
    """One-parameter logistic: [1 + exp(delta - theta)]^-1."""
    return expit(np.asarray(theta, dtype=np.float64) - np.asarray(delta, dtype=np.float64))


def twopl_probability(theta, delta, d):
    """Two-parameter logistic: [1 + exp(d (delta - theta))]^-1."""
    return expit(np.asarray(d, dtype=np.float64)
                 * (np.asarray(theta, dtype=np.float64) - np.asarray(delta, dtype=np.float64)))


def threepl_probability(theta, delta, d, c):
    """Guessing-floor logistic: c + (1 - c) [1 + exp(d (delta - theta))]^-1."""
    c = np.asarray(c, dtype=np.float64)
    return c + (1.0 - c) * twopl_probability(theta, delta, d)


def cell_log_likelihood(x: float, p: float) -> float:
    """x ln p + (1 - x) ln(1 - p).

    Valid for 0/1 entries and for negative corrective entries alike: with
    x = -1/(m-1) this is the unique per-cell log-probability under which
    m - 1 corrective entries plus one guessed 1 weigh as much as m zeros.
    """
    if not 0.0 < p < 1.0:
        raise ValueError(f"probability must lie strictly inside (0, 1), got {p!r}")
    return x * math.log(p) + (1.0 - x) * math.log1p(-p)


def matrix_log_likelihood(matrix: ScoredMatrix, params: IrtParams,
                          rule: SlopeRule = SlopeRule.NORMALIZED) -> float:
    """Sum of cell log-likelihoods over the whole matrix."""
    P = probability_matrix(params, rule)
    if P.size and not ((P > 0.0) & (P < 1.0)).all():
        raise ValueError("success probabilities reached 0 or 1; "
                         "keep potentials within the logit clamp")
    X = matrix.values
    return float((X * np.log(P) + (1.0 - X) * np.log1p(-P)).sum())


_FREE_D = {
    Model.RASCH: (False, False),
    Model.TWOPL_ITEM: (False, True),
    Model.TWOPL_PERSON: (True, False),
    Model.COMBINED_3PARAM: (True, True),
}


def log_likelihood_gradient(matrix: ScoredMatrix, params: IrtParams,
                            rule: SlopeRule = SlopeRule.NORMALIZED) -> dict:
    """Analytic gradient of matrix_log_likelihood for the fittable models.

    Returns {"theta": ..., "delta": ...} plus "d_person"/"d_item" where the
    model leaves them free.
    """
    if params.model not in _FREE_D:
        raise UnsupportedModelError(
            f"gradient is defined for the guessing-free models, not {params.model.value}")
    P = probability_matrix(params, rule)
    if P.size and not ((P > 0.0) & (P < 1.0)).all():
        raise ValueError("success probabilities reached 0 or 1; "
                         "keep potentials within the logit clamp")
    R = matrix.values - P
    D = combined_discrimination(params.d_person[:, None], params.d_item[None, :], rule)
    diff = params.theta[:, None] - params.delta[None, :]
    grads = {"theta": (R * D).sum(axis=1), "delta": -(R * D).sum(axis=0)}
    free_person, free_item = _FREE_D[params.model]
    if rule is SlopeRule.NORMALIZED:
        if free_person:
            dD = _slope_grad_first(params.d_person[:, None], params.d_item[None, :])
            grads["d_person"] = (R * diff * dD).sum(axis=1)
        if free_item:
            dD = _slope_grad_first(params.d_item[None, :], params.d_person[:, None])
            grads["d_item"] = (R * diff * dD).sum(axis=0)
    else:
        # literal rule: D is piecewise constant in d, so d-gradients vanish
        if free_person:
            grads["d_person"] = np.zeros(params.n_persons)
        if free_item:
            grads["d_item"] = np.zeros(params.n_items)
    return grads


@dataclass(frozen=True)
class FitConfig:
    """Knobs for the alternating Newton fit."""

    max_outer_iterations: int = 200
    ll_tol: float = 1e-6       # stop when the outer-iteration gain drops below
    param_tol: float = 1e-4    # ... or the largest parameter move does
    logit_bound: float = LOGIT_BOUND
    d_min: float = 0.2
    d_max: float = 5.0
    max_halvings: int = 20

    def __post_init__(self):
        if self.max_outer_iterations < 1:
            raise ValueError("max_outer_iterations must be >= 1")
        if self.ll_tol <= 0 or self.param_tol <= 0:
            raise ValueError("tolerances must be positive")
        if self.logit_bound <= 0:
            raise ValueError("logit_bound must be positive")
        if not 0 < self.d_min < self.d_max:
            raise ValueError("need 0 < d_min < d_max")
        if self.max_halvings < 0:
            raise ValueError("max_halvings must be >= 0")


@dataclass
class FitDiagnostics:
    model: Model
    converged: bool
    iterations: int
    final_ll: float
    grad_norm: float
    ll_history: list = field(default_factory=list)
    n_clamped: int = 0
    stop_reason: str = ""


def _block_state(X, own, own_d, other, other_d, sign, rule):
    """Per-row log-likelihood and ingredients for one side's update.

    sign +1 treats `own` as person potentials (z = D (own - other)),
    sign -1 as item potentials on the transposed matrix (z = D (other - own)).
    Probabilities are floored away from 0/1 so the damping comparisons stay
    finite even at extreme candidate parameters.
    """
    D = combined_discrimination(own_d[:, None], other_d[None, :], rule)
    diff = own[:, None] - other[None, :]
    with np.errstate(invalid="ignore"):
        z = sign * D * diff
    if np.isinf(D).any():
        z = np.where(np.isnan(z), 0.0, z)
    P = np.clip(expit(z), _P_FLOOR, 1.0 - _P_FLOOR)
    row_ll = (X * np.log(P) + (1.0 - X) * np.log1p(-P)).sum(axis=1)
    return row_ll, P, D, diff


def _update_block(X, own, own_d, d_free, other, other_d, sign, cfg, rule):
    """One damped Newton step for every row-block (person or item side).

    Each block's step is halved until its own log-likelihood does not
    decrease (at most cfg.max_halvings times); blocks that never improve
    keep their old values.  Fisher-scoring curvature is used, which is
    positive definite, and candidates are clamped into the configured box
    before evaluation.
    """
    row_ll, P, D, diff = _block_state(X, own, own_d, other, other_d, sign, rule)
    W = P * (1.0 - P)
    R = X - P
    z_own = sign * D
    g1 = (R * z_own).sum(axis=1)
    h11 = (W * z_own * z_own).sum(axis=1)
    if d_free:
        dD = _slope_grad_first(own_d[:, None], other_d[None, :])
        z_d = sign * diff * dD
        g2 = (R * z_d).sum(axis=1)
        h22 = (W * z_d * z_d).sum(axis=1)
        h12 = (W * z_own * z_d).sum(axis=1)
        ridge = 1e-8 * (h11 + h22) + 1e-12
        a = h11 + ridge
        c = h22 + ridge
        det = a * c - h12 * h12
        step_own = (c * g1 - h12 * g2) / det
        step_d = (a * g2 - h12 * g1) / det
    else:
        step_own = g1 / np.maximum(h11, 1e-12)
        step_d = np.zeros_like(own_d)

    new_own = own.copy()
    new_d = own_d.copy()
    lam = np.ones(own.size)
    pending = np.arange(own.size)
    for _ in range(cfg.max_halvings + 1):
        if pending.size == 0:
            break
        cand = np.clip(own[pending] + lam[pending] * step_own[pending],
                       -cfg.logit_bound, cfg.logit_bound)
        if d_free:
            cand_d = np.clip(own_d[pending] + lam[pending] * step_d[pending],
                             cfg.d_min, cfg.d_max)
        else:
            cand_d = own_d[pending]
        cand_ll, _, _, _ = _block_state(X[pending], cand, cand_d,
                                        other, other_d, sign, rule)
        ok = cand_ll >= row_ll[pending] - 1e-12
        accepted = pending[ok]
        new_own[accepted] = cand[ok]
        if d_free:
            new_d[accepted] = cand_d[ok]
        pending = pending[~ok]
        lam[pending] *= 0.5
    return new_own, new_d


def _initial_values(X, model, cfg):
    n, k = X.shape
    row_p = np.clip(X.sum(axis=1) / k, 0.02, 0.98)
    col_p = np.clip(X.sum(axis=0) / n, 0.02, 0.98)
    theta = np.clip(np.log(row_p / (1.0 - row_p)), -cfg.logit_bound, cfg.logit_bound)
    delta = np.clip(-np.log(col_p / (1.0 - col_p)), -cfg.logit_bound, cfg.logit_bound)
    shift = theta.mean()
    theta = theta - shift
    delta = delta - shift
    free_person, free_item = _FREE_D[model]
    if model is Model.RASCH:
        d_person, d_item = _pinned(SQRT2, n), _pinned(SQRT2, k)
    elif model is Model.TWOPL_ITEM:
        d_person, d_item = _pinned(np.inf, n), np.ones(k)
    elif model is Model.TWOPL_PERSON:
        d_person, d_item = np.ones(n), _pinned(np.inf, k)
    else:
        d_person, d_item = _pinned(SQRT2, n), _pinned(SQRT2, k)
    return theta, delta, d_person, d_item, free_person, free_item


def _assemble_params(model, theta, delta, d_person, d_item) -> IrtParams:
    if model is Model.RASCH:
        return IrtParams.rasch(theta, delta)
    if model is Model.TWOPL_ITEM:
        return IrtParams.twopl_item(theta, delta, d_item)
    if model is Model.TWOPL_PERSON:
        return IrtParams.twopl_person(theta, delta, d_person)
    return IrtParams.combined(theta, delta, d_person, d_item)


def fit(matrix: ScoredMatrix, model: Model, config: FitConfig = FitConfig(),
        rule: SlopeRule = SlopeRule.NORMALIZED):
    """Joint maximum likelihood by alternating person/item Newton blocks.

    Within one outer iteration every person block is updated against frozen
    item parameters, then every item block against the fresh person
    parameters; each block update is a damped Newton step that cannot lower
    its own likelihood, so the outer log-likelihood sequence is
    non-decreasing.  After each outer iteration theta is centered to mean
    zero, with the same shift applied to delta (the likelihood is invariant
    under that translation, so nothing is lost).

    Returns (IrtParams, FitDiagnostics).  Non-convergence within the
    iteration budget is reported via the diagnostics, not raised.
    """
    if model in (Model.FIVE_PARAM, Model.THREEPL):
        detail = ("the five-parameter joint likelihood is multimodal and yields "
                  "spurious solutions" if model is Model.FIVE_PARAM else
                  "the guessing-floor model is evaluation-only; corrected "
                  "matrices need no floor")
        raise UnsupportedModelError(
            f"fitting {model.value} is disabled: {detail}")
    if model not in _FREE_D:
        raise UnsupportedModelError(f"unknown fit model {model!r}")
    if needs_pruning(matrix):
        raise PruningRequiredError(
            "matrix still contains all-constant or negative-sum rows/columns; "
            "run prune() (CLI: --prune) before fitting")
    X = matrix.values
    if X.size == 0:
        raise PruningRequiredError("cannot fit an empty matrix")
    cfg = config
    theta, delta, d_person, d_item, free_p, free_i = _initial_values(X, model, cfg)

    def total_ll(th, de, dp, di):
        row_ll, _, _, _ = _block_state(X, th, dp, de, di, +1, rule)
        return float(row_ll.sum())

    ll = total_ll(theta, delta, d_person, d_item)
    history = [ll]
    converged = False
    stop_reason = "max-iterations"
    iterations = 0
    for iterations in range(1, cfg.max_outer_iterations + 1):
        prev = (theta, delta, d_person, d_item)
        theta, d_person = _update_block(X, theta, d_person, free_p,
                                        delta, d_item, +1, cfg, rule)
        delta, d_item = _update_block(X.T, delta, d_item, free_i,
                                      theta, d_person, -1, cfg, rule)
        shift = theta.mean()
        theta = theta - shift
        delta = delta - shift
        new_ll = total_ll(theta, delta, d_person, d_item)
        history.append(new_ll)
        max_move = max(np.abs(theta - prev[0]).max(initial=0.0),
                       np.abs(delta - prev[1]).max(initial=0.0),
                       np.abs(d_person - prev[2]).max(initial=0.0) if free_p else 0.0,
                       np.abs(d_item - prev[3]).max(initial=0.0) if free_i else 0.0)
        gain = new_ll - ll
        ll = new_ll
        if gain < cfg.ll_tol:
            converged, stop_reason = True, "ll-tol"
            break
        if max_move < cfg.param_tol:
            converged, stop_reason = True, "param-tol"
            break

    params = _assemble_params(model, theta, delta, d_person, d_item)
    _, P, D, diff = _block_state(X, theta, d_person, delta, d_item, +1, rule)
    R = X - P
    pieces = [(R * D).sum(axis=1), -(R * D).sum(axis=0)]
    if free_p:
        dD = _slope_grad_first(d_person[:, None], d_item[None, :])
        pieces.append((R * diff * dD).sum(axis=1))
    if free_i:
        dD = _slope_grad_first(d_item[None, :], d_person[:, None])
        pieces.append((R * diff * dD).sum(axis=0))
    grad_norm = float(np.sqrt(sum(float(g @ g) for g in pieces)))
    eps = 1e-9
    n_clamped = int((np.abs(theta) >= cfg.logit_bound - eps).sum()
                    + (np.abs(delta) >= cfg.logit_bound - eps).sum())
    if free_p:
        n_clamped += int(((d_person <= cfg.d_min + eps)
                          | (d_person >= cfg.d_max - eps)).sum())
    if free_i:
        n_clamped += int(((d_item <= cfg.d_min + eps)
                          | (d_item >= cfg.d_max - eps)).sum())
    diagnostics = FitDiagnostics(model, converged, iterations, ll, grad_norm,
                                 history, n_clamped, stop_reason)
    return params, diagnostics
