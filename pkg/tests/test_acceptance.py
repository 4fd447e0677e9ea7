"""Acceptance criteria, one test per criterion.

Each test records a ``PASS``/``FAIL`` line that the conftest hook prints
in the terminal summary; run ``pytest tests/test_acceptance.py -v``.
"""

import math
import os
import statistics
import time
from datetime import date, timedelta
from pathlib import Path

import numpy as np
import pandas as pd
import pytest

from survey_hazard import covariates as cov
from survey_hazard.evaluation import (
    compare_models,
    cumulative_response_curve,
    fit_kind,
    permutation_importance,
    rmse,
    substitution_design,
)
from survey_hazard.glm import (
    PenaltySpec,
    fit_adaptive_lasso,
    fit_penalized,
    fit_unpenalized,
    kkt_residual,
    lambda_grid,
    lambda_max,
    penalized_objective,
    report_exp_std_estimates,
    standard_errors,
)
from survey_hazard.gt_calibration import DEFAULT_SAMPLES, DEFAULT_WINDOW, calibrate, provider_scales, sample_latent
from survey_hazard.survival_core import (
    Coefficients,
    Design,
    build_design,
    collapse_period_level,
    expand_person_period,
    negative_log_likelihood,
    read_table_csv,
)
from survey_hazard.synthetic import ScenarioSpec, generate_cases, oracle_penalized_fit

from conftest import random_cases

RESULTS = []


def record(name, ok, detail):
    RESULTS.append(f"{'PASS' if ok else 'FAIL'}  {name}: {detail}")
    assert ok, detail


def design_of(data):
    table = collapse_period_level(expand_person_period(data.cases))
    return build_design(table, data.covariates)


def split_rows(design, train_ids):
    mask = design.keys["cohort_id"].isin(train_ids).to_numpy()
    return design.subset(mask), design.subset(~mask)


def test_collapse_equivalence():
    start = time.perf_counter()
    worst_nll, worst_coef = 0.0, 0.0
    for seed in range(20):
        rng = np.random.default_rng(seed)
        cases = random_cases(rng, int(rng.integers(200, 1001)))
        pp = expand_person_period(cases)
        dates = pd.date_range(pp["calendar_date"].min(), pp["calendar_date"].max())
        covs = pd.DataFrame({"x": rng.normal(size=len(dates)), "z": rng.normal(size=len(dates))}, index=dates)
        expanded = build_design(pp, covs)
        collapsed = build_design(collapse_period_level(pp), covs)
        for _ in range(5):
            coefs = Coefficients(rng.normal(-2, 1), dict(zip(expanded.names, rng.normal(0, 0.3, len(expanded.names)))))
            a = negative_log_likelihood(coefs, expanded)
            b = negative_log_likelihood(coefs, collapsed)
            worst_nll = max(worst_nll, abs(a - b) / max(1.0, abs(a)))
        ea, eb = fit_unpenalized(expanded)
        ca, cb = fit_unpenalized(collapsed)
        worst_coef = max(worst_coef, abs(ea - ca), float(np.max(np.abs(eb - cb))))
    elapsed = time.perf_counter() - start
    ok = worst_nll <= 1e-8 and worst_coef <= 1e-8 and elapsed < 30
    record(
        "collapse equivalence",
        ok,
        f"20 tables, max rel NLL gap {worst_nll:.1e}, max coef gap {worst_coef:.1e} (tol 1e-8), {elapsed:.1f}s (< 30s)",
    )


def test_solver_oracle():
    worst_obj, worst_kkt, points = 0.0, 0.0, 0
    for i in range(20):
        rng = np.random.default_rng(500 + i)
        n, p = int(rng.integers(8, 51)), int(rng.integers(1, 4))
        X = rng.normal(size=(n, p))
        m = rng.integers(5, 60, n)
        y = rng.binomial(m, 1 / (1 + np.exp(-(-1.0 + X @ rng.normal(0, 0.7, p)))))
        d = Design(X, [f"v{j}" for j in range(p)], y, m)
        kind = ("lasso", "adaptive", "ridge")[i % 3]
        weights = rng.uniform(0.3, 3.0, p) if kind == "adaptive" else None
        pen = PenaltySpec(kind, weights=weights)
        lmax = lambda_max(d, weights) if kind != "ridge" else lambda_max(d)
        lams = np.r_[lambda_grid(lmax, 6, 1e-3), 0.0]
        path = fit_penalized(d, pen, lams)
        for k, lam in enumerate(lams):
            l1, l2 = pen.split(lam, p)
            best = oracle_penalized_fit(X, y, m, l1, l2)[2]
            ours = penalized_objective(d, path.intercepts[k], path.coefs[k], pen, lam)
            worst_obj = max(worst_obj, abs(ours - best))
            worst_kkt = max(worst_kkt, kkt_residual(d, path.intercepts[k], path.coefs[k], pen, lam))
            points += 1
    ok = worst_obj <= 1e-4 and worst_kkt < 1e-6
    record(
        "solver oracle",
        ok,
        f"{points} path points on 20 fixtures, max |objective - oracle| {worst_obj:.1e} (tol 1e-4), "
        f"max KKT {worst_kkt:.1e} (tol 1e-6)",
    )


RECOVERY_TRUTH = {
    "days": -0.12, "Reminder1": 0.3, "Reminder2": -0.2,
    "x01": 0.2, "x02": -0.15, "x03": 0.12, "x04": -0.1, "x05": 0.15,
}


@pytest.mark.slow
def test_parameter_recovery():
    start = time.perf_counter()
    true_kept, nulls_dropped, inside, total = [], [], 0, 0
    for seed in range(10):
        spec = ScenarioSpec(n_cohorts=20, cohort_size=1000, n_continuous=20, intercept=-2.5,
                            coefficients=RECOVERY_TRUTH, seed=seed)
        design = design_of(generate_cases(spec))
        model = fit_adaptive_lasso(design, seed=seed)
        kept = set(model.nonzero())
        true_kept.append(len({f"x{i:02d}" for i in range(1, 6)} & kept))
        nulls_dropped.append(len({f"x{i:02d}" for i in range(6, 21)} - kept))
        b0, beta = fit_unpenalized(design)
        se = standard_errors(design, b0, beta)
        est = np.r_[b0, beta]
        truth = np.r_[spec.intercept, [RECOVERY_TRUTH.get(n, 0.0) for n in design.names]]
        inside += int(np.sum(np.abs(est - truth) <= 2 * se))
        total += est.size
    elapsed = time.perf_counter() - start
    coverage = inside / total
    ok = (
        statistics.median(true_kept) == 5
        and min(true_kept) == 5
        and statistics.median(nulls_dropped) >= 10
        and coverage >= 0.90
        and elapsed < 300
    )
    record(
        "parameter recovery",
        ok,
        f"true retained per seed {true_kept}, nulls dropped {nulls_dropped} (median "
        f"{statistics.median(nulls_dropped)} >= 10), unpenalized +-2SE coverage {coverage:.3f} "
        f"over {total} estimates (>= 0.90), {elapsed:.0f}s (< 300s)",
    )


def test_calibration_recovery():
    rng = np.random.default_rng(2024)
    n_days = DEFAULT_SAMPLES + DEFAULT_WINDOW - 1
    t = np.arange(n_days)
    latent = 30 + 12 * np.sin(2 * np.pi * t / 365.25) + 4 * np.sin(2 * np.pi * t / 7) + rng.gamma(3, 2, n_days)
    start = date(2015, 5, 3)
    scales = provider_scales(latent, DEFAULT_WINDOW) * rng.uniform(0.6, 1.0, DEFAULT_SAMPLES)
    strict_days = slice(DEFAULT_WINDOW - 1, DEFAULT_SAMPLES)

    exact = calibrate(sample_latent(latent, start, DEFAULT_WINDOW, scales))
    ratio = exact.value / latent[strict_days]
    exact_err = float(np.max(np.abs(ratio / ratio[0] - 1)))
    rounded = calibrate(sample_latent(latent, start, DEFAULT_WINDOW, scales, rounding=True))
    corr = float(np.corrcoef(rounded.value, latent[strict_days])[0, 1])
    ok = exact_err <= 1e-10 and corr > 0.99 and exact.dates[0].date() == start + timedelta(DEFAULT_WINDOW - 1)
    record(
        "calibration recovery",
        ok,
        f"{DEFAULT_SAMPLES} samples x {DEFAULT_WINDOW} days: unrounded max relative deviation from scaled "
        f"latent {exact_err:.1e} (tol 1e-10), rounded correlation {corr:.5f} (> 0.99)",
    )


IMPORTANCE_TRUTH = {"days": -0.12, "Reminder1": 0.3, "Reminder2": -0.2, "x01": 0.2, "x02": -0.15, "x03": 0.12}


@pytest.mark.slow
def test_importance_sanity():
    first, noise_ratios, zero_ok = [], [], True
    train_ids = [f"C{k:02d}" for k in range(1, 10)]
    for seed in range(10):
        spec = ScenarioSpec(n_cohorts=12, cohort_size=1000, n_continuous=6, intercept=-2.5,
                            coefficients=IMPORTANCE_TRUTH, seed=seed)
        data = generate_cases(spec)
        # an independent white-noise column that never enters the true hazard
        noise_rng = np.random.default_rng([seed, 99])
        data.covariates["noise"] = noise_rng.standard_normal(len(data.covariates))
        train, test = split_rows(design_of(data), train_ids)

        model = fit_kind("full", train, seed=seed)
        rep = permutation_importance(model, test, n_perm=20, seed=seed)
        first.append(rep.ranking()[0])
        zeros = [n for n, b in model.coefficients.values.items() if b == 0.0]
        zero_ok &= all(rep.mean[n] == 1.0 for n in zeros)

        plain = fit_kind("full", train, penalty="none")
        assert plain.coefficients.values["noise"] != 0.0
        noise_ratios.append(permutation_importance(plain, test, n_perm=20, seed=seed).mean["noise"])
    hits = first.count("days")
    ok = zero_ok and all(0.95 <= r <= 1.05 for r in noise_ratios) and hits >= 8
    record(
        "importance sanity",
        ok,
        f"zero-coefficient importance == 1.0: {zero_ok}; retained noise ratios "
        f"{min(noise_ratios):.3f}..{max(noise_ratios):.3f} (in [0.95, 1.05]); strongest predictor first in "
        f"{hits}/10 seeds (>= 8)",
    )


FAMILY_TRUTH = {
    "days": -0.15, "Reminder1": 0.3, "Reminder2": -0.2,
    "Saturday": -0.4, "Sunday": -0.2, "holiday": -0.2,
    "x01": 0.25, "x02": -0.2,
    # effects that change with time since the letter
    "days:x03": 0.04, "Reminder2:x04": -0.4,
}


@pytest.mark.slow
def test_model_family_ordering():
    scores = {"baseline": [], "full": [], "interaction": []}
    train_ids = [f"C{k:02d}" for k in range(1, 13)]
    for seed in range(10):
        spec = ScenarioSpec(n_cohorts=16, cohort_size=500, n_continuous=6, calendar=True, intercept=-2.5,
                            coefficients=FAMILY_TRUTH, seed=seed)
        train, test = split_rows(design_of(generate_cases(spec)), train_ids)
        fits = {k: fit_kind(k, train, seed=seed) for k in scores}
        for k, v in compare_models(fits, test).rmse.items():
            scores[k].append(v)
    med = {k: statistics.median(v) for k, v in scores.items()}
    ok = med["interaction"] <= med["full"] <= med["baseline"]
    record(
        "model-family ordering",
        ok,
        "median test RMSE over 10 seeds: "
        + ", ".join(f"{k} {v:.5f}" for k, v in med.items())
        + " (interaction <= full <= baseline)",
    )


def test_cumulative_curve_identity():
    spec = ScenarioSpec(n_cohorts=3, cohort_size=5000, n_continuous=2, calendar=True, intercept=-2.8,
                        coefficients={"days": -0.1, "Reminder1": 0.4, "Saturday": -0.3, "x01": 0.3}, seed=31)
    data = generate_cases(spec)
    truth = data.true_hazards
    curve = cumulative_response_curve(truth, truth["hazard"].to_numpy())
    worst, n_points = 0.0, 0
    by_cohort = {}
    for case in data.cases:
        by_cohort.setdefault(case.cohort_id, []).append(case.response_date)
    for cohort, grp in curve.groupby("cohort_id"):
        responses = pd.to_datetime(pd.Series([d for d in by_cohort[cohort] if d is not None]))
        size = len(by_cohort[cohort])
        for d, p in zip(grp["calendar_date"], grp["cumulative"]):
            mc = (responses <= d).sum() / size
            se = math.sqrt(p * (1 - p) / size)
            worst = max(worst, abs(mc - p) / se)
            n_points += 1
    ok = worst <= 3.0
    record(
        "cumulative curve identity",
        ok,
        f"{n_points} cohort-days, {spec.cohort_size} persons per cohort: max |MC - 1-prod(1-h)| = {worst:.2f} SE (<= 3)",
    )


PUBLISHED = os.environ.get("SURVEY_HAZARD_PUBLISHED_DATA")
if not PUBLISHED:
    RESULTS.append("SKIP  published-data reproduction: optional offline tier, needs the external dataset")


@pytest.mark.skipif(
    not PUBLISHED,
    reason="optional offline tier: set SURVEY_HAZARD_PUBLISHED_DATA to a directory with period.csv and covariates.csv",
)
def test_published_data_reproduction():
    root = Path(PUBLISHED)
    table = read_table_csv(root / "period.csv")
    if "events" not in table:
        table = collapse_period_level(table)
    covariates = cov.read_covariates_csv(root / "covariates.csv")
    cal = cov.derive_calendar(covariates.index, cov.load_holidays(), month=True, season=True)
    covariates = covariates.join(cal[[c for c in cal.columns if c not in covariates.columns]])
    main_cols = cov.select_columns(covariates, ("calendar", "weather", "trends"))
    design = build_design(table, covariates, main_cols)
    starts = design.keys.groupby("cohort_id")["calendar_date"].min().to_dict()
    train_ids, test_ids = cov.split_train_test(starts, 18, 6)
    train, test = split_rows(design, train_ids)
    fits = {k: fit_kind(k, train) for k in ("baseline", "full", "interaction")}
    report = compare_models(fits, test)
    sub_design = build_design(table, covariates, cov.select_columns(covariates, ("calendar", "month", "season")))
    sub_train, sub_test = split_rows(sub_design, train_ids)
    for rep in ("month", "season"):
        model = fit_kind("full", substitution_design(sub_train, rep))
        report.rmse[rep] = rmse(sub_test.observed_hazard(), model.predict(substitution_design(sub_test, rep)))
    target = {"baseline": 0.005528, "full": 0.005274, "interaction": 0.004738, "month": 0.006553, "season": 0.005830}
    rmse_ok = all(abs(report.rmse[k] / v - 1) <= 0.10 for k, v in target.items())
    kept, _ = report_exp_std_estimates(fits["full"])
    est_target = {"days": 0.28, "Saturday": 0.66, "Sunday": 0.81, "holiday": 0.82}
    est_ok = all(abs(kept.get(k, 1.0) - v) <= 0.05 for k, v in est_target.items())
    record(
        "published-data reproduction",
        rmse_ok and est_ok,
        ", ".join(f"{k} {report.rmse[k]:.6f} vs {v}" for k, v in target.items())
        + "; "
        + ", ".join(f"{k} {kept.get(k, 1.0):.2f} vs {v}" for k, v in est_target.items()),
    )
