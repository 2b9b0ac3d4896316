"""Monte-Carlo oracle: generate matched true / distorted / corrected matrices
and measure how well each estimator recovers the true-matrix value.

Mechanism: draw potentials, fill the hypothetical no-guessing 0/1 matrix cell
by cell from the success probability, then let every person guess on each
unknown cell with probability g, uniformly over the item's m_j options.  A
lucky guess (chance 1/m_j) becomes a 1 in both the distorted and corrected
matrices; an unlucky one stays 0 in the distorted matrix and -1/(m_j - 1) in
the corrected one; an unattempted cell stays 0 in both.  The per-cell chance
that a true 0 turns into a guessed 1 is therefore g/m_j, and the expected
corrected value of a true-0 cell is g * (1/m_j - (m_j-1)/m_j * 1/(m_j-1)) = 0,
which is the entire point of the corrective entries.

Randomness: numpy PCG64 generators throughout.  The run seed feeds a
SeedSequence whose first two children drive the potential draws and the
guessing draws; recovery experiments derive one 64-bit seed per replication
from the run seed, so replications are independent, reproducible streams.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import UndefinedStatisticError, UnsupportedModelError
from .irt import (FitConfig, IrtParams, LOGIT_BOUND, Model, fit,
                  probability_matrix)
from .matrix import (CORRECT, ItemBank, Kind, OMITTED, ResponseMatrix, Scheme,
                     ScoredMatrix, WRONG, prune, score_matrix)
from .reliability import cronbach_alpha, kr20, split_half
from .stats import (correction_coefficients, intercorrelation_matrix,
                    item_total_correlations)

_GENERATABLE = (Model.RASCH, Model.TWOPL_ITEM, Model.TWOPL_PERSON,
                Model.COMBINED_3PARAM)


@dataclass(frozen=True)
class Normal:
    """Normal distribution spec for parameter draws."""

    mean: float = 0.0
    sd: float = 1.0

    def __post_init__(self):
        if self.sd < 0:
            raise ValueError("sd must be non-negative")


@dataclass(frozen=True)
class SimConfig:
    n: int
    k: int
    options: object = 4            # scalar m or per-item tuple
    theta: Normal = Normal()
    delta: Normal = Normal()
    model: Model = Model.RASCH
    selectivity: Normal = Normal(1.0, 0.0)  # d draws for the non-Rasch models
    guess_rate: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.n < 1 or self.k < 1:
            raise ValueError("need n >= 1 and k >= 1")
        if not 0.0 <= self.guess_rate <= 1.0:
            raise ValueError("guess_rate must lie in [0, 1]")
        counts = self.option_counts()
        if any(m < 2 for m in counts):
            raise ValueError("every option count must be >= 2")
        if self.model not in _GENERATABLE:
            raise UnsupportedModelError(
                "generation covers the guessing-free models; guessing enters "
                "through injection, not through floor parameters")

    def option_counts(self) -> tuple:
        if isinstance(self.options, int):
            return (self.options,) * self.k
        counts = tuple(int(m) for m in self.options)
        if len(counts) != self.k:
            raise ValueError(f"got {len(counts)} option counts for k={self.k}")
        return counts


@dataclass(frozen=True)
class SimBundle:
    """One generated data set: parameters plus up to three matrix views."""

    config: SimConfig
    params: IrtParams
    true_matrix: ScoredMatrix
    responses: Optional[ResponseMatrix] = None
    distorted: Optional[ScoredMatrix] = None
    corrected: Optional[ScoredMatrix] = None
    guess_attempted: Optional[np.ndarray] = None
    guess_succeeded: Optional[np.ndarray] = None

    def guess_log(self) -> list:
        """(person index, item index, succeeded) for every attempted guess."""
        if self.guess_attempted is None:
            return []
        rows, cols = np.nonzero(self.guess_attempted)
        return [(int(i), int(j), bool(self.guess_succeeded[i, j]))
                for i, j in zip(rows, cols)]


def _streams(config: SimConfig):
    return np.random.SeedSequence(config.seed).spawn(2)


def generate_true_matrix(config: SimConfig) -> SimBundle:
    """Draw potentials and fill the no-guessing 0/1 matrix.

    Potentials are clamped to +-6 on the logit scale, matching the fitting
    clamp.  Deterministic given the seed: draw order is theta, delta,
    selectivities (model permitting), then the cell uniforms.
    """
    gen_ss, _ = _streams(config)
    rng = np.random.default_rng(gen_ss)
    theta = np.clip(rng.normal(config.theta.mean, config.theta.sd, config.n),
                    -LOGIT_BOUND, LOGIT_BOUND)
    delta = np.clip(rng.normal(config.delta.mean, config.delta.sd, config.k),
                    -LOGIT_BOUND, LOGIT_BOUND)
    sel = config.selectivity
    if config.model is Model.RASCH:
        params = IrtParams.rasch(theta, delta)
    elif config.model is Model.TWOPL_ITEM:
        d = np.clip(rng.normal(sel.mean, sel.sd, config.k), 0.2, 5.0)
        params = IrtParams.twopl_item(theta, delta, d)
    elif config.model is Model.TWOPL_PERSON:
        d = np.clip(rng.normal(sel.mean, sel.sd, config.n), 0.2, 5.0)
        params = IrtParams.twopl_person(theta, delta, d)
    else:
        dp = np.clip(rng.normal(sel.mean, sel.sd, config.n), 0.2, 5.0)
        di = np.clip(rng.normal(sel.mean, sel.sd, config.k), 0.2, 5.0)
        params = IrtParams.combined(theta, delta, dp, di)
    P = probability_matrix(params)
    values = (rng.random((config.n, config.k)) < P).astype(np.float64)
    bank = ItemBank(tuple(f"q{j + 1:03d}" for j in range(config.k)),
                    config.option_counts())
    person_ids = tuple(f"p{i + 1:05d}" for i in range(config.n))
    true = ScoredMatrix(person_ids, bank, values, Kind.TRUE, None)
    return SimBundle(config, params, true)


def inject_guessing(bundle: SimBundle, guess_rate: Optional[float] = None) -> SimBundle:
    """Derive the distorted and corrected matrices by injecting guesses.

    Every true-0 cell gets an independent attempt draw and a success draw
    from the bundle's guessing stream, so the result is deterministic given
    the bundle's seed, and two rates on the same bundle share the same luck.
    """
    g = bundle.config.guess_rate if guess_rate is None else guess_rate
    if not 0.0 <= g <= 1.0:
        raise ValueError("guess rate must lie in [0, 1]")
    _, guess_ss = _streams(bundle.config)
    rng = np.random.default_rng(guess_ss)
    true_vals = bundle.true_matrix.values
    shape = true_vals.shape
    attempt_draw = rng.random(shape)
    success_draw = rng.random(shape)
    zeros = true_vals == 0.0
    attempted = zeros & (attempt_draw < g)
    m = np.array(bundle.config.option_counts(), dtype=np.float64)
    succeeded = attempted & (success_draw < 1.0 / m[None, :])
    codes = np.where(true_vals == 1.0, CORRECT, OMITTED).astype(np.int8)
    codes[succeeded] = CORRECT
    codes[attempted & ~succeeded] = WRONG
    responses = ResponseMatrix(bundle.true_matrix.person_ids,
                               bundle.true_matrix.bank, codes)
    return dataclasses.replace(
        bundle,
        responses=responses,
        distorted=score_matrix(responses, Scheme.IGNORE),
        corrected=score_matrix(responses, Scheme.CORRECTED),
        guess_attempted=attempted,
        guess_succeeded=succeeded)


def generate_bundle(config: SimConfig) -> SimBundle:
    """generate_true_matrix followed by inject_guessing."""
    return inject_guessing(generate_true_matrix(config))


def expected_distorted_score(t_true: float, k: int, c: float) -> float:
    """Expected naive score after guessing: (1 - c) T + c k.

    c is the per-cell probability that an unknown answer becomes a lucky
    guess (g/m under uniform guessing on m options).
    """
    if not 0.0 <= c <= 1.0:
        raise ValueError("c must lie in [0, 1]")
    if not 0.0 <= t_true <= k:
        raise ValueError("true score must lie in [0, k]")
    return (1.0 - c) * t_true + c * k


def _offdiag_nanmean_absdiff(a: np.ndarray, b: np.ndarray) -> float:
    mask = ~np.eye(a.shape[0], dtype=bool)
    with np.errstate(invalid="ignore"):
        return float(np.nanmean(np.abs(a - b)[mask]))


def replication_metrics(bundle: SimBundle, fit_irt: bool = False,
                        fit_config: Optional[FitConfig] = None) -> dict:
    """Estimator values for one replication, keyed by estimator name.

    Score and classical statistics run on the full matrices (pruning would
    bias the population comparison); the optional Rasch fits run on pruned
    copies, as fitting requires.  NaN marks anything undefined in this
    replication.
    """
    if bundle.corrected is None:
        raise ValueError("bundle has no injected matrices; run inject_guessing")
    cfg = bundle.config
    true_v = bundle.true_matrix.values
    dist_v = bundle.distorted.values
    corr_v = bundle.corrected.values
    n, k = true_v.shape
    m = np.array(cfg.option_counts(), dtype=np.float64)

    t_scores = true_v.sum(axis=1)
    d_scores = dist_v.sum(axis=1)
    c_scores = corr_v.sum(axis=1)
    diff = c_scores - t_scores
    bias = float(diff.mean())
    bias_se = float(diff.std(ddof=1) / np.sqrt(n)) if n > 1 else np.nan

    c_nominal = cfg.guess_rate * float((1.0 / m).mean())
    gap = float(d_scores.mean() - t_scores.mean())
    gap_centered = (d_scores - t_scores) - c_nominal * (k - t_scores)
    gap_se = float(gap_centered.std(ddof=1) / np.sqrt(n)) if n > 1 else np.nan
    zeros = true_v == 0.0
    realized = (float(bundle.guess_succeeded.sum() / zeros.sum())
                if zeros.any() else np.nan)

    r_true = item_total_correlations(bundle.true_matrix)
    r_dist = item_total_correlations(bundle.distorted)
    r_corr = item_total_correlations(bundle.corrected)
    kv = correction_coefficients(bundle.corrected)
    scaled = kv * r_corr
    with np.errstate(invalid="ignore"):
        easy = true_v.mean(axis=0) > 0.5
        easy_change = (float(np.nanmean((r_dist - r_true)[easy]))
                       if easy.any() else np.nan)
        metrics = {
            "true_score_mean": float(t_scores.mean()),
            "distorted_score_mean": float(d_scores.mean()),
            "corrected_score_mean": float(c_scores.mean()),
            "corrected_score_bias": bias,
            "corrected_score_bias_se": bias_se,
            "distorted_gap": gap,
            "distorted_gap_analytic": c_nominal * (k - float(t_scores.mean())),
            "distorted_gap_se": gap_se,
            "guess_success_rate_nominal": c_nominal,
            "guess_success_rate_realized": realized,
            "item_r_true_mean": float(np.nanmean(r_true)),
            "item_r_abs_err_scaled_mean": float(np.nanmean(np.abs(scaled - r_true))),
            "item_r_bias_scaled_mean": float(np.nanmean(scaled - r_true)),
            "item_r_bias_raw_mean": float(np.nanmean(r_corr - r_true)),
            "easy_item_rpb_change_mean": easy_change,
            "k_factor_mean": float(np.nanmean(kv)),
        }

    ic_true = intercorrelation_matrix(bundle.true_matrix)
    ic_corr = intercorrelation_matrix(bundle.corrected)
    metrics["intercorr_mad_scaled"] = _offdiag_nanmean_absdiff(ic_corr.scaled, ic_true.raw)
    metrics["intercorr_mad_raw"] = _offdiag_nanmean_absdiff(ic_corr.raw, ic_true.raw)

    def _try(fn, *args):
        try:
            return fn(*args).value
        except UndefinedStatisticError:
            return np.nan

    metrics["kr20_true"] = _try(kr20, bundle.true_matrix)
    metrics["kr20_corrected"] = _try(kr20, bundle.corrected)
    metrics["kr20_abs_err"] = abs(metrics["kr20_corrected"] - metrics["kr20_true"])
    metrics["alpha_true"] = _try(cronbach_alpha, bundle.true_matrix)
    metrics["alpha_corrected"] = _try(cronbach_alpha, bundle.corrected)
    metrics["alpha_below_kr20"] = float(
        metrics["alpha_corrected"] < metrics["kr20_corrected"])
    metrics["split_r_full_true"] = _try(split_half, bundle.true_matrix)
    metrics["split_r_full_corrected"] = _try(split_half, bundle.corrected)
    metrics["split_full_abs_err"] = abs(
        metrics["split_r_full_corrected"] - metrics["split_r_full_true"])

    if fit_irt:
        metrics.update(_irt_metrics(bundle, fit_config or FitConfig()))
    return metrics


def _irt_metrics(bundle: SimBundle, fit_config: FitConfig) -> dict:
    out = {"fit_delta_rmse_true": np.nan, "fit_delta_gap_mean": np.nan,
           "fit_converged_true": np.nan, "fit_converged_corrected": np.nan,
           "fit_degenerate": 0.0}
    true_p, _ = prune(bundle.true_matrix)
    corr_p, _ = prune(bundle.corrected)
    if true_p.values.size == 0 or corr_p.values.size == 0:
        out["fit_degenerate"] = 1.0
        return out
    params_t, diag_t = fit(true_p, Model.RASCH, fit_config)
    params_c, diag_c = fit(corr_p, Model.RASCH, fit_config)
    out["fit_converged_true"] = float(diag_t.converged)
    out["fit_converged_corrected"] = float(diag_c.converged)

    id_to_pos = {iid: pos for pos, iid in enumerate(bundle.true_matrix.bank.item_ids)}
    kept_t = [id_to_pos[iid] for iid in true_p.bank.item_ids]
    gen_delta = bundle.params.delta[kept_t]
    out["fit_delta_rmse_true"] = float(
        np.sqrt(np.mean((params_t.delta - gen_delta) ** 2)))

    common = sorted(set(true_p.bank.item_ids) & set(corr_p.bank.item_ids))
    if common:
        pos_t = {iid: i for i, iid in enumerate(true_p.bank.item_ids)}
        pos_c = {iid: i for i, iid in enumerate(corr_p.bank.item_ids)}
        dt = np.array([params_t.delta[pos_t[iid]] for iid in common])
        dc = np.array([params_c.delta[pos_c[iid]] for iid in common])
        out["fit_delta_gap_mean"] = float(np.abs(dc - dt).mean())
    return out


@dataclass
class RecoveryReport:
    """Per-replication estimator rows plus aggregate summaries."""

    config: SimConfig
    replications: int
    rows: list
    degenerate: int = 0

    def estimators(self) -> list:
        names = []
        for row in self.rows:
            for key in row:
                if key not in names:
                    names.append(key)
        return names

    def summary(self) -> dict:
        """estimator -> (mean, sd, count of defined replications)."""
        out = {}
        for name in self.estimators():
            vals = np.array([row.get(name, np.nan) for row in self.rows])
            defined = vals[~np.isnan(vals)]
            if defined.size:
                sd = float(defined.std(ddof=1)) if defined.size > 1 else 0.0
                out[name] = (float(defined.mean()), sd, int(defined.size))
            else:
                out[name] = (np.nan, np.nan, 0)
        return out


def replication_seeds(seed: int, replications: int) -> list:
    """Per-replication 64-bit seeds derived from the run seed."""
    state = np.random.SeedSequence(seed).generate_state(replications, np.uint64)
    return [int(s) for s in state]


def run_recovery_experiment(config: SimConfig, replications: int,
                            fit_irt: bool = False,
                            fit_config: Optional[FitConfig] = None) -> RecoveryReport:
    """Generate `replications` bundles and collect every estimator's metrics.

    Identical config and replication count give an identical report.
    Replications whose pruned matrix is empty contribute NaN fit metrics and
    are counted in `degenerate` rather than aborting the run.
    """
    if replications < 1:
        raise ValueError("need at least one replication")
    rows = []
    degenerate = 0
    for rep_seed in replication_seeds(config.seed, replications):
        bundle = generate_bundle(dataclasses.replace(config, seed=rep_seed))
        row = replication_metrics(bundle, fit_irt=fit_irt, fit_config=fit_config)
        degenerate += int(row.get("fit_degenerate", 0.0) or 0)
        rows.append(row)
    return RecoveryReport(config, replications, rows, degenerate)
