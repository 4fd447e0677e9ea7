"""Discrete-time hazard model for daily survey response.

Case records are expanded to one row per person per observed day
(person-period format), then collapsed to event/at-risk counts per
cohort and calendar day (period-level format). Both representations give
the same logistic-hazard likelihood.
"""

from __future__ import annotations

import math
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass, field
from datetime import date

import numpy as np
import pandas as pd

from .errors import ValidationError

PHASES = ("Invitation", "Reminder1", "Reminder2")
BASELINE_PREDICTORS = ("days", "Reminder1", "Reminder2")

CASE_COLUMNS = (
    "case_id",
    "cohort_id",
    "invitation_date",
    "reminder1_date",
    "reminder2_date",
    "end_date",
    "response_date",
)
PERSON_PERIOD_COLUMNS = (
    "case_id",
    "cohort_id",
    "calendar_date",
    "s",
    "phase",
    "days",
    "event",
)
PERIOD_LEVEL_COLUMNS = ("cohort_id", "calendar_date", "days", "phase", "events", "at_risk")
KEY_COLUMNS = ("cohort_id", "calendar_date", "days", "phase")


@dataclass(frozen=True)
class SurveyCase:
    """One sampled person and their letter schedule.

    All dates are expected delivery dates. ``end_date`` is the inclusive
    censoring boundary of the web-mode fieldwork.
    """

    case_id: str
    cohort_id: str
    invitation_date: date
    end_date: date
    reminder1_date: date | None = None
    reminder2_date: date | None = None
    response_date: date | None = None

    def letter_dates(self) -> list[date]:
        return [d for d in (self.invitation_date, self.reminder1_date, self.reminder2_date) if d is not None]

    def validate(self, clamp_early_response: bool = False) -> SurveyCase:
        """Check the schedule invariants and return a (possibly repaired) case."""
        if self.reminder2_date is not None and self.reminder1_date is None:
            raise ValidationError(f"case {self.case_id}: reminder2_date without reminder1_date")
        letters = self.letter_dates()
        for earlier, later in zip(letters, letters[1:]):
            if later < earlier:
                raise ValidationError(f"case {self.case_id}: letter dates out of order")
        if letters[-1] > self.end_date:
            raise ValidationError(f"case {self.case_id}: letter after end_date")
        resp = self.response_date
        if resp is not None:
            if resp < self.invitation_date:
                if not clamp_early_response:
                    raise ValidationError(
                        f"case {self.case_id}: response_date {resp} before invitation_date "
                        f"{self.invitation_date}"
                    )
                return SurveyCase(
                    self.case_id,
                    self.cohort_id,
                    self.invitation_date,
                    self.end_date,
                    self.reminder1_date,
                    self.reminder2_date,
                    self.invitation_date,
                )
            if resp > self.end_date:
                raise ValidationError(f"case {self.case_id}: response_date after end_date")
        return self


@dataclass(frozen=True)
class Coefficients:
    """Intercept plus named slopes of the linear predictor."""

    intercept: float
    values: Mapping[str, float] = field(default_factory=dict)

    @property
    def names(self) -> list[str]:
        return list(self.values)

    def as_array(self, names: Sequence[str]) -> np.ndarray:
        """Slopes aligned to ``names``; names absent from the map get 0."""
        return np.array([self.values.get(n, 0.0) for n in names], dtype=float)


@dataclass
class Design:
    """Numeric design matrix with binomial outcome counts.

    ``keys`` carries the period identity columns (cohort, date, days,
    phase) row-aligned with ``X``; it is used for curves and joins only.
    """

    X: np.ndarray
    names: list[str]
    events: np.ndarray
    at_risk: np.ndarray
    keys: pd.DataFrame | None = None

    def __post_init__(self):
        self.X = np.asarray(self.X, dtype=float)
        if self.X.ndim != 2:
            raise ValidationError("design matrix must be two-dimensional")
        self.names = list(self.names)
        if len(set(self.names)) != len(self.names):
            raise ValidationError("predictor names must be unique")
        if self.X.shape[1] != len(self.names):
            raise ValidationError("number of names does not match design columns")
        self.events = np.asarray(self.events, dtype=float)
        self.at_risk = np.asarray(self.at_risk, dtype=float)
        n = self.X.shape[0]
        if self.events.shape != (n,) or self.at_risk.shape != (n,):
            raise ValidationError("outcome arrays must match the number of design rows")
        if np.any(self.events < 0) or np.any(self.events > self.at_risk):
            raise ValidationError("events must lie in [0, at_risk]")

    @property
    def n_rows(self) -> int:
        return self.X.shape[0]

    def column(self, name: str) -> np.ndarray:
        return self.X[:, self.names.index(name)]

    def select(self, names: Sequence[str]) -> Design:
        missing = [n for n in names if n not in self.names]
        if missing:
            raise ValidationError(f"design lacks predictors: {missing}")
        idx = [self.names.index(n) for n in names]
        return Design(self.X[:, idx], list(names), self.events, self.at_risk, self.keys)

    def subset(self, rows) -> Design:
        rows = np.asarray(rows)
        keys = None if self.keys is None else self.keys.iloc[rows].reset_index(drop=True)
        return Design(self.X[rows], self.names, self.events[rows], self.at_risk[rows], keys)

    def with_columns(self, X: np.ndarray, names: Sequence[str]) -> Design:
        return Design(X, list(names), self.events, self.at_risk, self.keys)

    def observed_hazard(self) -> np.ndarray:
        return self.events / self.at_risk


def _as_date(value) -> date | None:
    if value is None:
        return None
    if isinstance(value, float) and math.isnan(value):
        return None
    if isinstance(value, str):
        value = value.strip()
        if not value:
            return None
        return date.fromisoformat(value)
    if isinstance(value, pd.Timestamp):
        return value.date()
    if isinstance(value, date):
        return value
    raise ValidationError(f"not a date: {value!r}")


def expand_person_period(
    cases: Iterable[SurveyCase], clamp_early_response: bool = False
) -> pd.DataFrame:
    """Expand case records into the person-period table.

    Each case contributes one row per calendar day from its invitation
    date through ``min(response_date, end_date)``. The period index ``s``
    restarts at 1 on every letter delivery date, and the phase switches
    on that date, so a response on a reminder's delivery day belongs to
    the new phase.

    Parameters
    ----------
    cases : iterable of SurveyCase
    clamp_early_response : bool
        Move responses dated before the invitation to the invitation day
        instead of raising.

    Returns
    -------
    pandas.DataFrame
        Columns ``case_id, cohort_id, calendar_date, s, phase, days, event``.
    """
    seen: set[str] = set()
    ids, cohorts, starts, lengths, s_parts, phase_parts, event_parts = [], [], [], [], [], [], []
    for case in cases:
        case = case.validate(clamp_early_response)
        if case.case_id in seen:
            raise ValidationError(f"duplicate case_id {case.case_id!r}")
        seen.add(case.case_id)

        last = case.end_date if case.response_date is None else case.response_date
        n_days = (last - case.invitation_date).days + 1
        offsets = np.arange(n_days)
        letter_offsets = np.array([(d - case.invitation_date).days for d in case.letter_dates()])
        # phase index = letters delivered on or before the day, minus one
        phase_idx = np.searchsorted(letter_offsets, offsets, side="right") - 1
        event = np.zeros(n_days, dtype=np.int64)
        if case.response_date is not None:
            event[-1] = 1
        ids.append(case.case_id)
        cohorts.append(case.cohort_id)
        starts.append(np.datetime64(case.invitation_date, "D"))
        lengths.append(n_days)
        s_parts.append(offsets - letter_offsets[phase_idx] + 1)
        phase_parts.append(phase_idx)
        event_parts.append(event)
    if not ids:
        return _empty_person_period()
    lengths = np.asarray(lengths)
    first = np.repeat(np.asarray(starts), lengths)
    within = np.arange(lengths.sum()) - np.repeat(np.cumsum(lengths) - lengths, lengths)
    s = np.concatenate(s_parts).astype(np.int64)
    return pd.DataFrame(
        {
            "case_id": np.repeat(np.asarray(ids, dtype=object), lengths),
            "cohort_id": np.repeat(np.asarray(cohorts, dtype=object), lengths),
            "calendar_date": (first + within.astype("timedelta64[D]")).astype("datetime64[ns]"),
            "s": s,
            "phase": np.asarray(PHASES, dtype=object)[np.concatenate(phase_parts)],
            "days": s.astype(float),
            "event": np.concatenate(event_parts),
        }
    )


def _empty_person_period() -> pd.DataFrame:
    return pd.DataFrame(
        {
            "case_id": pd.Series(dtype=object),
            "cohort_id": pd.Series(dtype=object),
            "calendar_date": pd.Series(dtype="datetime64[ns]"),
            "s": pd.Series(dtype=np.int64),
            "phase": pd.Series(dtype=object),
            "days": pd.Series(dtype=float),
            "event": pd.Series(dtype=np.int64),
        }
    )


def collapse_period_level(pp: pd.DataFrame) -> pd.DataFrame:
    """Collapse a person-period table to event and at-risk counts.

    Rows are grouped on the full ``(cohort_id, calendar_date, days,
    phase)`` key. Contextual covariates are joined later by date, so they
    cannot split a group.
    """
    if len(pp) == 0:
        return pd.DataFrame(
            {
                "cohort_id": pd.Series(dtype=object),
                "calendar_date": pd.Series(dtype="datetime64[ns]"),
                "days": pd.Series(dtype=float),
                "phase": pd.Series(dtype=object),
                "events": pd.Series(dtype=np.int64),
                "at_risk": pd.Series(dtype=np.int64),
            }
        )
    out = (
        pp.groupby(list(KEY_COLUMNS), sort=True, observed=True)["event"]
        .agg(events="sum", at_risk="size")
        .reset_index()
    )
    out["events"] = out["events"].astype(np.int64)
    out["at_risk"] = out["at_risk"].astype(np.int64)
    return out.sort_values(["cohort_id", "calendar_date"], kind="stable").reset_index(drop=True)


def hazard_from_eta(eta):
    """Logistic hazard ``exp(eta) / (1 + exp(eta))`` without overflow."""
    eta = np.asarray(eta, dtype=float)
    out = np.empty_like(eta)
    pos = eta >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-eta[pos]))
    e = np.exp(eta[~pos])
    out[~pos] = e / (1.0 + e)
    return out if out.ndim else float(out)


def linear_predictor(coefs: Coefficients, row):
    """Evaluate ``intercept + sum_j coef_j * x_j``.

    ``row`` is either a mapping of predictor name to value (returns a
    float) or a :class:`Design` (returns one value per row).
    """
    if isinstance(row, Design):
        missing = [n for n in coefs.values if n not in row.names]
        if missing:
            raise ValidationError(f"design lacks predictors named in coefficients: {missing}")
        idx = [row.names.index(n) for n in coefs.values]
        beta = np.fromiter(coefs.values.values(), dtype=float, count=len(idx))
        return coefs.intercept + row.X[:, idx] @ beta
    missing = [n for n in coefs.values if n not in row]
    if missing:
        raise ValidationError(f"row lacks predictors named in coefficients: {missing}")
    return coefs.intercept + sum(b * float(row[n]) for n, b in coefs.values.items())


def softplus(eta: np.ndarray) -> np.ndarray:
    """``log(1 + exp(eta))`` evaluated stably."""
    return np.logaddexp(0.0, eta)


def binomial_nll(eta: np.ndarray, events: np.ndarray, at_risk: np.ndarray) -> float:
    """Binomial negative log-likelihood of logit-link counts.

    Uses ``-y log h - (m - y) log(1 - h) = m softplus(eta) - y eta``, which
    stays finite for saturated hazards.
    """
    return float(np.sum(at_risk * softplus(eta) - events * eta))


def negative_log_likelihood(coefs: Coefficients, design: Design) -> float:
    """Negative log-likelihood of a period-level (or person-period) design."""
    return binomial_nll(linear_predictor(coefs, design), design.events, design.at_risk)


def predict_hazards(model, rows: Design) -> np.ndarray:
    """Per-row hazards from a fitted model applied to raw design rows.

    The model's stored standardization (and interaction recipe) is
    applied before evaluating the linear predictor.
    """
    prepared = model.prepare(rows)
    return hazard_from_eta(linear_predictor(model.coefficients, prepared))


def baseline_block(table: pd.DataFrame) -> tuple[np.ndarray, list[str]]:
    """Days and the two reminder dummies (Invitation is the reference)."""
    phase = table["phase"].to_numpy()
    X = np.column_stack(
        [
            table["days"].to_numpy(dtype=float),
            (phase == "Reminder1").astype(float),
            (phase == "Reminder2").astype(float),
        ]
    )
    return X, list(BASELINE_PREDICTORS)


def build_design(
    table: pd.DataFrame,
    covariates: pd.DataFrame | None = None,
    columns: Sequence[str] | None = None,
) -> Design:
    """Join a period-level or person-period table to contextual covariates.

    Parameters
    ----------
    table : DataFrame
        Period-level table (``events``, ``at_risk``) or person-period table
        (``event``; each row then has ``at_risk`` 1).
    covariates : DataFrame, optional
        Date-indexed covariate table. Every calendar date in ``table`` must
        be present; gaps raise :class:`ValidationError` listing the dates.
    columns : sequence of str, optional
        Covariate columns to include; defaults to all of them.
    """
    X, names = baseline_block(table)
    if "events" in table:
        events = table["events"].to_numpy(dtype=float)
        at_risk = table["at_risk"].to_numpy(dtype=float)
    else:
        events = table["event"].to_numpy(dtype=float)
        at_risk = np.ones(len(table))
    if covariates is not None:
        cols = list(covariates.columns if columns is None else columns)
        dates = pd.DatetimeIndex(table["calendar_date"])
        idx = pd.DatetimeIndex(covariates.index)
        pos = idx.get_indexer(dates)
        if np.any(pos < 0):
            gaps = sorted({d.date().isoformat() for d in dates[pos < 0]})
            raise ValidationError(f"covariates missing for {len(gaps)} date(s): {', '.join(gaps[:10])}")
        ctx = covariates[cols].to_numpy(dtype=float)[pos]
        if np.isnan(ctx).any():
            bad = sorted({dates[i].date().isoformat() for i in np.where(np.isnan(ctx).any(axis=1))[0]})
            raise ValidationError(f"missing covariate values on: {', '.join(bad[:10])}")
        X = np.column_stack([X, ctx])
        names = names + cols
    keys = table[[c for c in KEY_COLUMNS if c in table]].reset_index(drop=True)
    return Design(X, names, events, at_risk, keys)


# --- CSV interfaces -------------------------------------------------------


def _required_date(rec, key):
    value = _as_date(rec[key])
    if value is None:
        raise ValidationError(f"{key} is required")
    return value


def read_cases_csv(path) -> list[SurveyCase]:
    """Read case records (``case_id,cohort_id,invitation_date,...``)."""
    df = pd.read_csv(path, dtype=str, keep_default_na=False)
    missing = [c for c in CASE_COLUMNS if c not in df.columns]
    if missing:
        raise ValidationError(f"{path}: missing columns {missing}")
    cases = []
    for lineno, rec in enumerate(df.to_dict("records"), start=2):
        try:
            cases.append(
                SurveyCase(
                    case_id=rec["case_id"],
                    cohort_id=rec["cohort_id"],
                    invitation_date=_required_date(rec, "invitation_date"),
                    end_date=_required_date(rec, "end_date"),
                    reminder1_date=_as_date(rec["reminder1_date"]),
                    reminder2_date=_as_date(rec["reminder2_date"]),
                    response_date=_as_date(rec["response_date"]),
                )
            )
            # schedule checks only; early responses are handled at expansion
            cases[-1].validate(clamp_early_response=True)
        except ValueError as exc:
            raise ValidationError(f"{path}:{lineno}: {exc}") from exc
    return cases


def write_cases_csv(cases: Iterable[SurveyCase], path) -> None:
    def fmt(d):
        return "" if d is None else d.isoformat()

    rows = [
        {
            "case_id": c.case_id,
            "cohort_id": c.cohort_id,
            "invitation_date": fmt(c.invitation_date),
            "reminder1_date": fmt(c.reminder1_date),
            "reminder2_date": fmt(c.reminder2_date),
            "end_date": fmt(c.end_date),
            "response_date": fmt(c.response_date),
        }
        for c in cases
    ]
    pd.DataFrame(rows, columns=list(CASE_COLUMNS)).to_csv(path, index=False)


def write_table_csv(table: pd.DataFrame, path) -> None:
    """Write a person-period or period-level table with ISO dates."""
    out = table.copy()
    out["calendar_date"] = pd.DatetimeIndex(out["calendar_date"]).strftime("%Y-%m-%d")
    out.to_csv(path, index=False)


def read_table_csv(path) -> pd.DataFrame:
    """Read a table written by :func:`write_table_csv`."""
    df = pd.read_csv(path, dtype={"case_id": str, "cohort_id": str, "phase": str}, float_precision="round_trip")
    if "calendar_date" not in df:
        raise ValidationError(f"{path}: missing calendar_date column")
    df["calendar_date"] = pd.to_datetime(df["calendar_date"], format="%Y-%m-%d")
    bad = sorted(set(df["phase"]) - set(PHASES))
    if bad:
        raise ValidationError(f"{path}: unknown phase values {bad}")
    df["days"] = df["days"].astype(float)
    return df

