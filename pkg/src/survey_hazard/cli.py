"""Command-line front end: ``survey-hazard <subcommand> [options]``.

Exit status is 0 on success, 2 on invalid input and 3 when a numerical
routine fails. ``--config FILE`` supplies ``key = value`` defaults for any
option; flags given on the command line take precedence.
"""

from __future__ import annotations

import argparse
import logging
import sys
import zlib
from pathlib import Path

import numpy as np
import pandas as pd

from . import covariates as cov
from . import evaluation as ev
from . import glm
from . import gt_calibration as gt
from . import survival_core as sc
from . import synthetic
from .errors import ConvergenceError, ValidationError

log = logging.getLogger("survey_hazard")

EXIT_OK, EXIT_INVALID, EXIT_NUMERIC = 0, 2, 3


def derive_seed(seed: int, label: str) -> int:
    """Deterministic sub-seed for one pipeline stage."""
    ss = np.random.SeedSequence([int(seed), zlib.crc32(label.encode())])
    return int(ss.generate_state(1)[0])


# --- shared loading helpers -------------------------------------------------------


def _load_design(args, table: pd.DataFrame | None = None) -> sc.Design:
    table = sc.read_table_csv(args.period) if table is None else table
    if "events" not in table:
        table = sc.collapse_period_level(table)
    covariates = cov.read_covariates_csv(args.covariates) if args.covariates else None
    cols = None
    if covariates is not None and args.blocks:
        cols = cov.select_columns(covariates, cov.parse_blocks(args.blocks))
    return sc.build_design(table, covariates, cols)


def _split(args, design: sc.Design) -> tuple[list[str], list[str]]:
    starts = design.keys.groupby("cohort_id")["calendar_date"].min().to_dict()
    if args.cohorts:
        train = [c.strip() for c in args.cohorts.split(",") if c.strip()]
        unknown = set(train) - set(starts)
        if unknown:
            raise ValidationError(f"unknown cohorts {sorted(unknown)}")
        return train, [c for c in starts if c not in train]
    if args.n_train is None:
        return sorted(starts, key=starts.get), []
    n_test = args.n_test if args.n_test is not None else len(starts) - args.n_train
    return cov.split_train_test(starts, args.n_train, n_test)


def _rows(design: sc.Design, cohorts) -> sc.Design:
    mask = design.keys["cohort_id"].isin(list(cohorts)).to_numpy()
    if not mask.any():
        raise ValidationError("no rows for the selected cohorts")
    return design.subset(np.flatnonzero(mask))


def _fit_kwargs(args) -> dict:
    return dict(
        k=args.k_folds,
        seed=args.seed,
        n_lambda=args.lambda_count,
        min_ratio=args.lambda_min_ratio,
        threads=args.threads,
    )


def _fit(args, kind: str, train: sc.Design, cohorts, penalty=None) -> glm.FittedModel:
    log.info("fitting %s model on %d rows", kind, train.n_rows)
    return ev.fit_kind(
        kind,
        train,
        penalty=penalty or args.penalty,
        metadata={"cohorts": list(cohorts), "blocks": args.blocks},
        **_fit_kwargs(args),
    )


# --- subcommands ----------------------------------------------------------------------


def cmd_simulate(args):
    spec = synthetic.read_scenario(args.scenario) if args.scenario else synthetic.ScenarioSpec()
    if args.seed is not None:
        spec.seed = derive_seed(args.seed, "simulate")
    data = synthetic.generate_cases(spec)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    sc.write_cases_csv(data.cases, out / "cases.csv")
    cov.write_covariates_csv(data.covariates, out / "covariates.csv")
    sc.write_table_csv(data.true_hazards, out / "true_hazards.csv")
    synthetic.write_scenario(spec, out / "scenario.cfg")
    print(f"wrote {len(data.cases)} cases in {spec.n_cohorts} cohorts to {out}")


def cmd_ingest(args):
    if args.dates_from:
        dates = sc.read_table_csv(args.dates_from)["calendar_date"]
    elif args.start and args.end:
        dates = pd.date_range(args.start, args.end, freq="D")
    else:
        raise ValidationError("ingest needs --dates-from or --start/--end")
    weather = cov.read_weather_csv(args.weather) if args.weather else None
    trends = cov.read_trends_csv(args.trends) if args.trends else None
    holidays = cov.load_holidays(args.holidays) if args.holidays else None
    table = cov.build_covariate_table(dates, weather, trends, holidays, cov.parse_blocks(args.blocks))
    cov.write_covariates_csv(table, args.out)
    print(f"wrote {len(table)} dates x {table.shape[1]} covariates to {args.out}")


def cmd_expand(args):
    pp = sc.expand_person_period(sc.read_cases_csv(args.cases), args.clamp_early_responses)
    sc.write_table_csv(pp, args.out)
    print(f"wrote {len(pp)} person-period rows to {args.out}")


def cmd_collapse(args):
    if args.cases:
        pp = sc.expand_person_period(sc.read_cases_csv(args.cases), args.clamp_early_responses)
    elif args.input:
        pp = sc.read_table_csv(args.input)
    else:
        raise ValidationError("collapse needs --input or --cases")
    table = sc.collapse_period_level(pp)
    sc.write_table_csv(table, args.out)
    print(f"wrote {len(table)} period-level rows to {args.out}")


def cmd_fit(args):
    design = _load_design(args)
    train_ids, _ = _split(args, design)
    model = _fit(args, args.model, _rows(design, train_ids), train_ids)
    model.save(args.out)
    kept, zeros = glm.report_exp_std_estimates(model)
    print(f"{args.model} model: {len(kept)} retained, {len(zeros)} zero; lambda={model.penalty.lam:.6g}")


def cmd_predict(args):
    model = glm.load_model(args.model)
    design = _load_design(args)
    keys = design.keys.copy()
    keys["calendar_date"] = pd.DatetimeIndex(keys["calendar_date"]).strftime("%Y-%m-%d")
    keys["observed"] = design.observed_hazard()
    keys["predicted"] = sc.predict_hazards(model, design)
    keys.to_csv(args.out, index=False)
    print(f"wrote {len(keys)} predictions to {args.out}")


def _evaluate(args, out: Path):
    design = _load_design(args)
    train_ids, test_ids = _split(args, design)
    if not test_ids:
        raise ValidationError("evaluation needs held-out cohorts (--n-train/--n-test or --cohorts)")
    train, test = _rows(design, train_ids), _rows(design, test_ids)
    kinds = [k.strip() for k in args.models.split(",") if k.strip()]
    fits = {k: _fit(args, k, train, train_ids) for k in kinds}
    subs = {}
    if args.substitutions:
        full_design = _load_design_with(args, ("calendar", "month", "season"))
        sub_train, sub_test = _rows(full_design, train_ids), _rows(full_design, test_ids)
        for rep in [r.strip() for r in args.substitutions.split(",") if r.strip()]:
            subs[rep] = ev.fit_kind("full", ev.substitution_design(sub_train, rep), penalty=args.penalty,
                                    metadata={"cohorts": train_ids, "replacement": rep}, **_fit_kwargs(args))
        report = ev.compare_models(fits, test)
        for rep, model in subs.items():
            sub_design = ev.substitution_design(sub_test, rep)
            report.rmse[rep] = ev.rmse(sub_test.observed_hazard(), model.predict(sub_design))
    else:
        report = ev.compare_models(fits, test)
    out.mkdir(parents=True, exist_ok=True)
    report.metrics_frame().to_csv(out / "metrics.csv", index=False)
    report.curves.to_csv(out / "curves.csv", index=False)
    (out / "summary.txt").write_text(report.summary() + "\n", encoding="utf-8")
    models_dir = out / "models"
    models_dir.mkdir(exist_ok=True)
    for k, m in {**fits, **subs}.items():
        m.save(models_dir / f"{k}.txt")
    return report, fits, test


def _load_design_with(args, blocks):
    table = sc.read_table_csv(args.period)
    table = sc.collapse_period_level(table) if "events" not in table else table
    covariates = cov.read_covariates_csv(args.covariates)
    dates = table["calendar_date"].unique()
    cal = cov.derive_calendar(dates, cov.load_holidays(args.holidays) if args.holidays else cov.load_holidays(),
                              month=True, season=True)
    merged = covariates.join(cal[[c for c in cal.columns if c not in covariates.columns]], how="left")
    return sc.build_design(table, merged, cov.select_columns(merged, blocks))


def cmd_evaluate(args):
    report, _, _ = _evaluate(args, Path(args.out))
    print(report.summary())


def cmd_importance(args):
    model = glm.load_model(args.model)
    design = _load_design(args)
    if args.n_train is not None or args.cohorts:
        _, test_ids = _split(args, design)
        design = _rows(design, test_ids)
    imp = ev.permutation_importance(model, design, args.n_perm, derive_seed(args.seed, "importance"))
    imp.to_frame().to_csv(args.out, index=False)
    print(imp.to_frame().head(10).to_string(index=False))


def cmd_calibrate_gt(args):
    samples = gt.read_samples_csv(args.samples, args.window)
    series = gt.calibrate(samples, args.mode)
    gt.write_series_csv(series, args.out)
    print(f"wrote {len(series.value)} calibrated dates to {args.out}")


def cmd_report(args):
    out = Path(args.out)
    report, fits, test = _evaluate(args, out)
    main = fits.get("full") or next(iter(fits.values()))
    kept, zeros = glm.report_exp_std_estimates(main)
    coef = pd.DataFrame(
        [{"predictor": n, "exp_std_estimate": v, "retained": True} for n, v in kept.items()]
        + [{"predictor": n, "exp_std_estimate": 1.0, "retained": False} for n in zeros]
    )
    coef.to_csv(out / "coefficients.csv", index=False)
    imp = ev.permutation_importance(main, test, args.n_perm, derive_seed(args.seed, "importance"))
    imp.to_frame().to_csv(out / "importance.csv", index=False)
    with open(out / "summary.txt", "a", encoding="utf-8") as fh:
        fh.write("\nexponentiated standardized estimates (retained)\n")
        for n, v in sorted(kept.items(), key=lambda kv: kv[1]):
            fh.write(f"  {n:<24} {v:.3f}\n")
        fh.write("\npermutation importance (top 10)\n")
        for n in imp.ranking()[:10]:
            fh.write(f"  {n:<24} {imp.mean[n]:.4f}\n")
    print((out / "summary.txt").read_text(encoding="utf-8"))


# --- parser -------------------------------------------------------------------------------


def _add_common(p):
    p.add_argument("--config", help="key = value file with option defaults")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=int, default=None, help="worker cap (default: all cores)")
    p.add_argument("-v", "--verbose", action="store_true")


def _add_design(p):
    p.add_argument("--period", required=True, help="period-level (or person-period) CSV")
    p.add_argument("--covariates", help="date-indexed covariate CSV")
    p.add_argument("--blocks", help="covariate blocks to use (default: every column)")
    p.add_argument("--holidays")
    p.add_argument("--cohorts", help="comma-separated training cohorts")
    p.add_argument("--n-train", type=int)
    p.add_argument("--n-test", type=int)


def _add_fit(p):
    p.add_argument("--penalty", choices=["lasso", "adaptive", "ridge", "none"], default="adaptive")
    p.add_argument("--k-folds", type=int, default=10)
    p.add_argument("--lambda-count", type=int, default=100)
    p.add_argument("--lambda-min-ratio", type=float, default=1e-4)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="survey-hazard", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="generate a synthetic survey")
    _add_common(p)
    p.add_argument("--scenario", help="scenario key = value file")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_simulate, seed=None)

    p = sub.add_parser("ingest", help="build the covariate table")
    _add_common(p)
    p.add_argument("--dates-from", help="table whose calendar_date column lists the dates needed")
    p.add_argument("--start")
    p.add_argument("--end")
    p.add_argument("--weather")
    p.add_argument("--trends")
    p.add_argument("--holidays")
    p.add_argument("--blocks", default="calendar,weather,trends")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_ingest)

    for name, func, help_ in (("expand", cmd_expand, "cases to person-period rows"),
                              ("collapse", cmd_collapse, "person-period to period-level rows")):
        p = sub.add_parser(name, help=help_)
        _add_common(p)
        p.add_argument("--cases", required=name == "expand")
        if name == "collapse":
            p.add_argument("--input")
        p.add_argument("--clamp-early-responses", action="store_true")
        p.add_argument("--out", required=True)
        p.set_defaults(func=func)

    p = sub.add_parser("fit", help="fit one model")
    _add_common(p)
    _add_design(p)
    _add_fit(p)
    p.add_argument("--model", choices=ev.MODEL_KINDS, default="full")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("predict", help="predict daily hazards")
    _add_common(p)
    _add_design(p)
    p.add_argument("--model", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_predict)

    for name, func, help_ in (("evaluate", cmd_evaluate, "fit and score the model family"),
                              ("report", cmd_report, "metrics, coefficients, curves and importance")):
        p = sub.add_parser(name, help=help_)
        _add_common(p)
        _add_design(p)
        _add_fit(p)
        p.add_argument("--models", default="baseline,full,interaction")
        p.add_argument("--substitutions", default="", help="e.g. month,season")
        p.add_argument("--n-perm", type=int, default=20)
        p.add_argument("--out", required=True)
        p.set_defaults(func=func)

    p = sub.add_parser("importance", help="permutation variable importance")
    _add_common(p)
    _add_design(p)
    p.add_argument("--model", required=True)
    p.add_argument("--n-perm", type=int, default=20)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_importance)

    p = sub.add_parser("calibrate-gt", help="calibrate overlapping trend samples")
    _add_common(p)
    p.add_argument("--samples", required=True)
    p.add_argument("--window", type=int, default=gt.DEFAULT_WINDOW)
    p.add_argument("--mode", choices=["strict", "partial"], default="strict")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_calibrate_gt)
    return parser


def _prescan(argv: list[str]) -> tuple[str | None, str | None]:
    command = next((a for a in argv if not a.startswith("-")), None)
    config = None
    for i, a in enumerate(argv):
        if a == "--config" and i + 1 < len(argv):
            config = argv[i + 1]
        elif a.startswith("--config="):
            config = a.split("=", 1)[1]
    return command, config


def _apply_config(parser: argparse.ArgumentParser, argv: list[str]) -> argparse.Namespace:
    command, config = _prescan(argv)
    subparsers = next(a for a in parser._actions if isinstance(a, argparse._SubParsersAction))
    if config and command in subparsers.choices:
        subparser = subparsers.choices[command]
        actions = {a.dest: a for a in subparser._actions}
        defaults = {}
        for key, raw in cov.read_config(config).items():
            if key not in actions or key in ("config", "help"):
                raise ValidationError(f"{config}: unknown option {key!r} for {command}")
            action = actions[key]
            if isinstance(action, argparse._StoreTrueAction):
                defaults[key] = raw.lower() in ("1", "true", "yes")
            else:
                defaults[key] = action.type(raw) if action.type else raw
            action.required = False
        subparser.set_defaults(**defaults)
    return parser.parse_args(argv)


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = _apply_config(parser, argv)
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
        args.func(args)
    except (ValidationError, FileNotFoundError, pd.errors.ParserError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (ConvergenceError, FloatingPointError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
