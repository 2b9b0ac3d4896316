"""Command-line front end.

Commands: score, analyze, reliability, fit, simulate, report.  Every command
writes its outputs plus a '<command>_manifest.json' recording the arguments,
inputs, seed and tool version needed to rerun it exactly.

Exit codes: 0 success, 1 input/usage error, 2 numeric or undefined-result
error, 3 non-convergence (partial output is still written).
"""

from __future__ import annotations

import argparse
import dataclasses
import os
import sys

from . import __version__
from . import io as gio
from .errors import (GuesscorrError, InputFormatError, PruningRequiredError,
                     UndefinedStatisticError, UnsupportedModelError)
from .irt import FitConfig, Model, fit
from .matrix import Scheme, prune, row_and_column_scores, score_matrix
from .reliability import (Method, SplitScheme, cronbach_alpha, kr20,
                          split_half, test_retest)
from .simulate import (Normal, SimConfig, generate_bundle,
                       run_recovery_experiment)
from .stats import VALIDITY_THRESHOLD, intercorrelation_matrix, item_statistics

EXIT_OK = 0
EXIT_INPUT = 1
EXIT_NUMERIC = 2
EXIT_NONCONVERGED = 3

SEED_ENV_VAR = "GUESSCORR_SEED"

_FIT_MODELS = {
    "rasch": Model.RASCH,
    "2pl-item": Model.TWOPL_ITEM,
    "2pl-person": Model.TWOPL_PERSON,
    "3param": Model.COMBINED_3PARAM,
    "3pl": Model.THREEPL,
    "5param": Model.FIVE_PARAM,
}


class _UsageError(GuesscorrError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


def _out(outdir: str, name: str) -> str:
    os.makedirs(outdir, exist_ok=True)
    return os.path.join(outdir, name)


def _write_manifest(args, command: str, inputs: dict, outputs: list,
                    seed=None, config=None) -> None:
    path = _out(args.outdir, f"{command}_manifest.json")
    gio.write_manifest(path, command, args._argv, inputs,
                       [os.path.basename(o) for o in outputs],
                       seed, config or {}, __version__)


def _resolve_seed(flag_seed, config_seed=None) -> int:
    if flag_seed is not None:
        return int(flag_seed)
    if config_seed is not None:
        return int(config_seed)
    env = os.environ.get(SEED_ENV_VAR)
    if env is not None:
        try:
            return int(env)
        except ValueError as e:
            raise InputFormatError(f"{SEED_ENV_VAR} must be an integer, got {env!r}") from e
    return 0


def _cmd_score(args) -> int:
    bank = gio.read_item_bank(args.items)
    responses = gio.read_response_matrix(args.input, bank)
    scored = score_matrix(responses, Scheme(args.scheme))
    outputs = []
    config = {"scheme": args.scheme, "prune": bool(args.prune)}
    if args.prune:
        scored, report = prune(scored)
        path = _out(args.outdir, "removal_report.csv")
        gio.write_prune_report(report, path)
        outputs.append(path)
    scored_path = _out(args.outdir, "scored.csv")
    gio.write_scored_matrix(scored, scored_path)
    scores_path = _out(args.outdir, "scores.csv")
    gio.write_score_vectors(row_and_column_scores(scored), scores_path)
    outputs = [scored_path, scores_path] + outputs
    _write_manifest(args, "score", {"input": args.input, "items": args.items},
                    outputs, config=config)
    return EXIT_OK


def _cmd_analyze(args) -> int:
    matrix = gio.read_scored_matrix(args.input)
    stats = item_statistics(matrix, threshold=args.threshold)
    inter = intercorrelation_matrix(matrix)
    stats_path = _out(args.outdir, "itemstats.csv")
    gio.write_item_stats(stats, stats_path)
    inter_path = _out(args.outdir, "intercorr.csv")
    gio.write_intercorrelations(inter, inter_path)
    _write_manifest(args, "analyze", {"input": args.input},
                    [stats_path, inter_path], config={"threshold": args.threshold})
    return EXIT_OK


def _cmd_reliability(args) -> int:
    matrix = gio.read_scored_matrix(args.input)
    methods = [m.strip() for m in args.methods.split(",") if m.strip()]
    known = {m.value for m in Method}
    reports = []
    for name in methods:
        if name not in known:
            raise InputFormatError(f"unknown reliability method {name!r}; "
                                   f"choose from {sorted(known)}")
        try:
            if name == Method.KR20.value:
                reports.append(kr20(matrix))
            elif name == Method.CRONBACH_ALPHA.value:
                reports.append(cronbach_alpha(matrix))
            elif name == Method.SPLIT_HALF.value:
                reports.append(split_half(matrix, SplitScheme(args.split)))
            else:
                if not args.retest:
                    raise InputFormatError(
                        "test-retest needs --retest with the second scored matrix")
                other = gio.read_scored_matrix(args.retest)
                reports.append(test_retest(matrix.values.sum(axis=1),
                                           other.values.sum(axis=1)))
        except UndefinedStatisticError as e:
            reports.append((name, str(e)))
    path = _out(args.outdir, "reliability.txt")
    gio.write_reliability_reports(reports, path)
    _write_manifest(args, "reliability",
                    {"input": args.input, "retest": args.retest},
                    [path], config={"methods": args.methods, "split": args.split})
    return EXIT_OK


def _cmd_fit(args) -> int:
    model = _FIT_MODELS[args.model]
    matrix = gio.read_scored_matrix(args.input)
    cfg_values = gio.read_config_file(args.config) if args.config else {}
    cfg = FitConfig(
        max_outer_iterations=int(cfg_values.get("max_outer_iterations", 200)),
        ll_tol=float(cfg_values.get("ll_tol", 1e-6)),
        param_tol=float(cfg_values.get("param_tol", 1e-4)),
        logit_bound=float(cfg_values.get("logit_bound", 6.0)),
        d_min=float(cfg_values.get("d_min", 0.2)),
        d_max=float(cfg_values.get("d_max", 5.0)),
    )
    outputs = []
    if args.prune:
        matrix, report = prune(matrix)
        path = _out(args.outdir, "removal_report.csv")
        gio.write_prune_report(report, path)
        outputs.append(path)
    params, diag = fit(matrix, model, cfg)
    params_path = _out(args.outdir, "params.csv")
    gio.write_irt_params(params, matrix.person_ids, matrix.bank.item_ids, params_path)
    diag_path = _out(args.outdir, "diagnostics.txt")
    gio.write_fit_diagnostics(diag, diag_path)
    outputs = [params_path, diag_path] + outputs
    _write_manifest(args, "fit", {"input": args.input, "config": args.config},
                    outputs, config={"model": args.model, "prune": bool(args.prune),
                                     **cfg_values})
    if not diag.converged:
        print(f"fit did not converge within {cfg.max_outer_iterations} iterations; "
              f"partial results written", file=sys.stderr)
        return EXIT_NONCONVERGED
    return EXIT_OK


def _sim_config_from(args) -> SimConfig:
    values = gio.read_config_file(args.config) if args.config else {}
    if args.n is not None:
        values["n"] = args.n
    if args.k is not None:
        values["k"] = args.k
    if args.options is not None:
        values["m"] = args.options
    if args.guess_rate is not None:
        values["guess_rate"] = args.guess_rate
    seed = _resolve_seed(args.seed, values.get("seed"))
    options = values.get("m", 4)
    if isinstance(options, list):
        options = tuple(int(m) for m in options)
    model_text = str(values.get("model", "rasch"))
    try:
        model = Model(model_text)
    except ValueError as e:
        raise InputFormatError(f"unknown generation model {model_text!r}") from e
    try:
        return SimConfig(
            n=int(values.get("n", 100)),
            k=int(values.get("k", 20)),
            options=options,
            theta=Normal(float(values.get("theta_mean", 0.0)),
                         float(values.get("theta_sd", 1.0))),
            delta=Normal(float(values.get("delta_mean", 0.0)),
                         float(values.get("delta_sd", 1.0))),
            model=model,
            selectivity=Normal(float(values.get("selectivity_mean", 1.0)),
                               float(values.get("selectivity_sd", 0.0))),
            guess_rate=float(values.get("guess_rate", 0.0)),
            seed=seed,
        )
    except (ValueError, UnsupportedModelError) as e:
        raise InputFormatError(str(e)) from e


def _cmd_simulate(args) -> int:
    if args.replications < 1:
        raise _UsageError("--replications must be at least 1")
    config = _sim_config_from(args)
    bundle = generate_bundle(config)
    outputs = []
    for name, writer, data in (
            ("responses.csv", gio.write_response_matrix, bundle.responses),
            ("true_matrix.csv", gio.write_scored_matrix, bundle.true_matrix),
            ("distorted_matrix.csv", gio.write_scored_matrix, bundle.distorted),
            ("corrected_matrix.csv", gio.write_scored_matrix, bundle.corrected)):
        path = _out(args.outdir, name)
        writer(data, path)
        outputs.append(path)
    params_path = _out(args.outdir, "true_params.csv")
    gio.write_irt_params(bundle.params, bundle.true_matrix.person_ids,
                         bundle.true_matrix.bank.item_ids, params_path)
    outputs.append(params_path)
    report = run_recovery_experiment(config, args.replications, fit_irt=args.fit_irt)
    report_path = _out(args.outdir, "report.csv")
    gio.write_recovery_rows(report, report_path)
    summary_path = _out(args.outdir, "summary.csv")
    gio.write_recovery_summary(report, summary_path)
    outputs += [report_path, summary_path]
    _write_manifest(args, "simulate", {"config": args.config}, outputs,
                    seed=config.seed,
                    config={"n": config.n, "k": config.k,
                            "m": list(config.option_counts()),
                            "guess_rate": config.guess_rate,
                            "model": config.model.value,
                            "replications": args.replications,
                            "fit_irt": bool(args.fit_irt)})
    return EXIT_OK


def _cmd_report(args) -> int:
    sections = []
    for path in args.inputs:
        if not os.path.exists(path):
            raise InputFormatError(f"no such file: {path}")
        with open(path, encoding="utf-8") as fh:
            body = fh.read().rstrip("\n")
        sections.append(f"=== {os.path.basename(path)} ===\n{body}\n")
    path = _out(args.outdir, "summary.txt")
    gio.atomic_write_text(path, "\n".join(sections))
    _write_manifest(args, "report", {"inputs": list(args.inputs)}, [path])
    return EXIT_OK


def _build_parser() -> _Parser:
    parser = _Parser(prog="guesscorr",
                     description="Analyze multiple-choice test matrices "
                                 "corrected for guessing.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("score", help="score raw responses under a scheme")
    p.add_argument("input", help="response matrix CSV (cells 1/W/.)")
    p.add_argument("--items", required=True, help="item bank CSV (item_id,options)")
    p.add_argument("--scheme", choices=[s.value for s in Scheme], default="corrected")
    p.add_argument("--prune", action="store_true",
                   help="drop degenerate rows/columns and emit a removal report")
    p.add_argument("--outdir", default=".")
    p.set_defaults(func=_cmd_score)

    p = sub.add_parser("analyze", help="per-item statistics and intercorrelations")
    p.add_argument("input", help="scored matrix CSV with metadata header")
    p.add_argument("--threshold", type=float, default=VALIDITY_THRESHOLD,
                   help="validity cut on the corrected item-total correlation")
    p.add_argument("--outdir", default=".")
    p.set_defaults(func=_cmd_analyze)

    p = sub.add_parser("reliability", help="reliability coefficients")
    p.add_argument("input", help="scored matrix CSV")
    p.add_argument("--methods", default="split-half,kr20,alpha",
                   help="comma list of split-half,kr20,alpha,test-retest")
    p.add_argument("--split", choices=[s.value for s in SplitScheme],
                   default="odd-even")
    p.add_argument("--retest", default=None,
                   help="second scored matrix for test-retest")
    p.add_argument("--outdir", default=".")
    p.set_defaults(func=_cmd_reliability)

    p = sub.add_parser("fit", help="joint maximum-likelihood model fit")
    p.add_argument("input", help="scored matrix CSV")
    p.add_argument("--model", choices=sorted(_FIT_MODELS), default="rasch")
    p.add_argument("--config", default=None, help="fit config file (key = value)")
    p.add_argument("--prune", action="store_true",
                   help="prune the matrix before fitting")
    p.add_argument("--outdir", default=".")
    p.set_defaults(func=_cmd_fit)

    p = sub.add_parser("simulate", help="generate matrices and run recovery experiments")
    p.add_argument("--config", default=None, help="simulation config file (key = value)")
    p.add_argument("--replications", "-R", type=int, default=1)
    p.add_argument("--n", type=int, default=None)
    p.add_argument("--k", type=int, default=None)
    p.add_argument("--options", "-m", type=int, default=None, dest="options")
    p.add_argument("--guess-rate", type=float, default=None, dest="guess_rate")
    p.add_argument("--seed", type=int, default=None,
                   help=f"overrides config file and ${SEED_ENV_VAR}")
    p.add_argument("--fit-irt", action="store_true", dest="fit_irt",
                   help="also fit Rasch models per replication")
    p.add_argument("--outdir", default=".")
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("report", help="merge prior outputs into one summary")
    p.add_argument("inputs", nargs="+", help="output files to merge")
    p.add_argument("--outdir", default=".")
    p.set_defaults(func=_cmd_report)

    return parser


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        args._argv = argv
        return args.func(args)
    except (_UsageError, InputFormatError, PruningRequiredError,
            UnsupportedModelError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INPUT
    except (UndefinedStatisticError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    raise SystemExit(main())
