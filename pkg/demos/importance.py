#!/usr/bin/env python3
"""Permutation importance of the predictors of a fitted hazard model."""

from survey_hazard.evaluation import fit_kind, permutation_importance
from survey_hazard.survival_core import build_design, collapse_period_level, expand_person_period
from survey_hazard.synthetic import ScenarioSpec, generate_cases

spec = ScenarioSpec(
    n_cohorts=12,
    cohort_size=1000,
    n_continuous=6,
    intercept=-2.5,
    coefficients={"days": -0.12, "Reminder1": 0.3, "Reminder2": -0.2, "x01": 0.2, "x02": -0.15, "x03": 0.12},
    seed=5,
)
data = generate_cases(spec)
design = build_design(collapse_period_level(expand_person_period(data.cases)), data.covariates)
mask = design.keys["cohort_id"].isin([f"C{k:02d}" for k in range(1, 10)]).to_numpy()
model = fit_kind("full", design.subset(mask), seed=5)

#%% Shuffle one column at a time on the held-out cohorts
# The score is the RMSE after shuffling divided by the RMSE before. A
# predictor the lasso removed scores exactly 1.

report = permutation_importance(model, design.subset(~mask), n_perm=20, seed=5)
for name in report.ranking():
    bar = "#" * int(round(40 * (report.mean[name] - 1) / (report.mean[report.ranking()[0]] - 1 + 1e-12)))
    print(f"{name:<10} {report.mean[name]:7.4f} {bar}")
