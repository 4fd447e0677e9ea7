"""Model family, held-out scoring, response curves and variable importance."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import pandas as pd

from .covariates import select_columns
from .errors import ValidationError
from .glm import FittedModel, InteractionSpec, fit_model, weighted_moments
from .survival_core import BASELINE_PREDICTORS, Design, hazard_from_eta

MODEL_KINDS = ("baseline", "full", "interaction")


def model_predictors(kind: str, design_names: Sequence[str]) -> list[str]:
    """Raw design columns entering a model of the given kind.

    The baseline model uses only days and the phase dummies; the full and
    interaction models add every contextual column of the design.
    """
    if kind not in MODEL_KINDS:
        raise ValidationError(f"unknown model kind {kind!r}")
    base = [n for n in BASELINE_PREDICTORS if n in design_names]
    if kind == "baseline":
        return base
    return base + [n for n in design_names if n not in BASELINE_PREDICTORS]


def build_interactions(design: Design, bases: Sequence[str] = BASELINE_PREDICTORS) -> tuple[Design, InteractionSpec]:
    """Append products of each baseline column with each contextual column.

    Expects a standardized main-effect design. Products are re-standardized
    with at-risk weights and named ``"<base>:<contextual>"``; constant
    products are dropped.
    """
    base = [b for b in bases if b in design.names]
    contextual = [n for n in design.names if n not in BASELINE_PREDICTORS]
    pairs = [(b, c) for b in base for c in contextual]
    raw = InteractionSpec(pairs, np.zeros(len(pairs)), np.ones(len(pairs))).products(design)
    if pairs:
        mean, sd = weighted_moments(raw, design.at_risk)
    else:
        mean, sd = np.zeros(0), np.zeros(0)
    keep = sd > 1e-12 * np.maximum(1.0, np.abs(mean))
    spec = InteractionSpec(
        [p for p, k in zip(pairs, keep) if k],
        mean[keep],
        sd[keep],
        [f"{b}:{c}" for (b, c), k in zip(pairs, keep) if not k],
    )
    return spec.apply(design), spec


def fit_kind(kind: str, design: Design, **fit_kwargs) -> FittedModel:
    """Fit one member of the model family on a raw training design."""
    sub = design.select(model_predictors(kind, design.names))
    builder = build_interactions if kind == "interaction" else None
    meta = dict(fit_kwargs.pop("metadata", {}) or {})
    meta["model_kind"] = kind
    return fit_model(sub, interaction_builder=builder, metadata=meta, **fit_kwargs)


def substitution_design(design: Design, replacement: str) -> Design:
    """Swap weather and trend columns for month or season dummies.

    ``design`` must already carry the ``month_*`` / ``season_*`` columns.
    """
    if replacement not in ("month", "season"):
        raise ValidationError("replacement must be 'month' or 'season'")
    frame = pd.DataFrame(design.X, columns=design.names)
    keep = list(BASELINE_PREDICTORS) + select_columns(frame, ("calendar", replacement))
    if not any(n.startswith(replacement + "_") for n in keep):
        raise ValidationError(f"design has no {replacement} columns")
    return design.select([n for n in keep if n in design.names])


def rmse(observed, predicted) -> float:
    """Root mean squared difference between two equal-length sequences."""
    obs = np.asarray(observed, dtype=float)
    pred = np.asarray(predicted, dtype=float)
    if obs.shape != pred.shape:
        raise ValidationError(f"length mismatch: {obs.shape} vs {pred.shape}")
    if obs.size == 0:
        raise ValidationError("rmse of empty sequences")
    diff = obs - pred
    # scale first so tiny differences do not underflow to zero when squared
    big = np.max(np.abs(diff))
    if big == 0:
        return 0.0
    return float(big * np.sqrt(np.mean((diff / big) ** 2)))


def _curve_frame(keys: pd.DataFrame) -> pd.DataFrame:
    frame = keys[["cohort_id", "calendar_date", "phase", "days"]].copy()
    if frame.duplicated(["cohort_id", "calendar_date"]).any():
        raise ValidationError("curves need one row per cohort and calendar date")
    return frame


def cumulative_response_curve(keys: pd.DataFrame, hazards) -> pd.DataFrame:
    """Predicted cumulative response ``1 - prod_{s<=t}(1 - h_s)`` per cohort.

    Hazards are chained in calendar order across phases, so non-respondents
    carry over from one letter to the next. Returns the key columns with a
    ``cumulative`` column, sorted by cohort and date.
    """
    frame = _curve_frame(keys)
    frame["hazard"] = np.asarray(hazards, dtype=float)
    frame = frame.sort_values(["cohort_id", "calendar_date"], kind="stable")
    surv = frame.groupby("cohort_id", sort=False)["hazard"].transform(lambda h: np.cumprod(1.0 - h.to_numpy()))
    frame["cumulative"] = 1.0 - surv
    return frame.drop(columns="hazard").reset_index(drop=True)


def observed_cumulative_curve(design: Design) -> pd.DataFrame:
    """Cumulative events divided by cohort size (at-risk count on day one)."""
    if design.keys is None:
        raise ValidationError("design has no key columns")
    frame = _curve_frame(design.keys)
    frame["events"] = design.events
    frame["at_risk"] = design.at_risk
    frame = frame.sort_values(["cohort_id", "calendar_date"], kind="stable")
    grp = frame.groupby("cohort_id", sort=False)
    frame["cumulative"] = grp["events"].cumsum() / grp["at_risk"].transform("first")
    return frame.drop(columns=["events", "at_risk"]).reset_index(drop=True)


def curve_table(design: Design, predictions: dict[str, np.ndarray]) -> pd.DataFrame:
    """Observed and per-model predicted cumulative curves in one table.

    Columns: ``cohort,phase,day,observed,predicted_<kind>...``.
    """
    obs = observed_cumulative_curve(design)
    out = pd.DataFrame(
        {
            "cohort": obs["cohort_id"],
            "date": pd.DatetimeIndex(obs["calendar_date"]).strftime("%Y-%m-%d"),
            "phase": obs["phase"],
            "day": obs["days"].astype(int),
            "observed": obs["cumulative"],
        }
    )
    for kind, hz in predictions.items():
        out[f"predicted_{kind}"] = cumulative_response_curve(design.keys, hz)["cumulative"].to_numpy()
    return out


@dataclass
class ImportanceReport:
    """Mean RMSE ratio (permuted / original) per predictor.

    ``per_permutation[name]`` holds the individual ratios; predictors with
    a zero coefficient are reported with ratio exactly 1.
    """

    mean: dict[str, float]
    per_permutation: dict[str, np.ndarray]
    seed: int
    n_perm: int
    baseline_rmse: float

    def ranking(self) -> list[str]:
        return sorted(self.mean, key=lambda n: -self.mean[n])

    def to_frame(self) -> pd.DataFrame:
        rows = [{"predictor": n, "importance": self.mean[n]} for n in self.ranking()]
        return pd.DataFrame(rows)


def permutation_importance(model: FittedModel, design: Design, n_perm: int = 20, seed: int = 0) -> ImportanceReport:
    """Permutation importance on held-out period-level rows.

    Each retained predictor column of the prepared design is shuffled
    independently (outcome columns never move); the score is the ratio of
    the RMSE on daily hazards after shuffling to the original RMSE.
    """
    prepared = model.prepare(design)
    beta = model.coefficients.as_array(prepared.names)
    eta0 = model.coefficients.intercept + prepared.X @ beta
    observed = design.observed_hazard()
    base = rmse(observed, hazard_from_eta(eta0))
    rng = np.random.default_rng(seed)
    mean, per = {}, {}
    for j, name in enumerate(prepared.names):
        if beta[j] == 0.0:
            mean[name] = 1.0
            per[name] = np.ones(n_perm)
            continue
        col = prepared.X[:, j]
        ratios = np.empty(n_perm)
        for r in range(n_perm):
            eta = eta0 + (rng.permutation(col) - col) * beta[j]
            ratios[r] = rmse(observed, hazard_from_eta(eta)) / base
        mean[name] = float(ratios.mean())
        per[name] = ratios
    return ImportanceReport(mean, per, seed, n_perm, base)


@dataclass
class ComparisonReport:
    rmse: dict[str, float]
    improvement: dict[str, float]
    curves: pd.DataFrame
    predictions: dict[str, np.ndarray] = field(default_factory=dict)

    def metrics_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            [{"model": k, "rmse": v, "improvement_vs_previous": self.improvement.get(k, np.nan)} for k, v in self.rmse.items()]
        )

    def summary(self) -> str:
        lines = ["model            rmse       improvement"]
        for k, v in self.rmse.items():
            imp = self.improvement.get(k)
            lines.append(f"{k:<16} {v:.6f}   {'' if imp is None else f'{100 * imp:+.1f}%'}")
        return "\n".join(lines)


def compare_models(fits: dict[str, FittedModel], test: Design, substitutions: dict[str, FittedModel] | None = None):
    """Score fitted models on a held-out design.

    Improvements are relative RMSE reductions: full against baseline and
    interaction against full. Substitution models (e.g. month, season) are
    scored but not given improvements or curves.
    """
    observed = test.observed_hazard()
    preds = {k: m.predict(test) for k, m in fits.items()}
    scores = {k: rmse(observed, p) for k, p in preds.items()}
    improvement = {}
    for cur, prev in (("full", "baseline"), ("interaction", "full")):
        if cur in scores and prev in scores:
            improvement[cur] = 1.0 - scores[cur] / scores[prev]
    for name, model in (substitutions or {}).items():
        scores[name] = rmse(observed, model.predict(test))
    return ComparisonReport(scores, improvement, curve_table(test, preds), preds)
