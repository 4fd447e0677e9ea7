"""Synthetic fieldwork from a known hazard model, and brute-force oracles."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field, fields
from datetime import date, timedelta
from pathlib import Path

import numpy as np
import pandas as pd

from .covariates import derive_calendar, load_holidays, read_config
from .errors import ValidationError
from .survival_core import BASELINE_PREDICTORS, PHASES, SurveyCase


@dataclass
class ScenarioSpec:
    """Settings for one synthetic survey.

    ``coefficients`` act on the raw generated columns: ``days``, the
    reminder dummies, the calendar dummies and ``x01..xNN``. The
    continuous covariates are AR(1) series with zero mean and unit
    variance that share a common factor, so they are correlated with each
    other and roughly on a standardized scale. A name ``"a:b"`` is the
    product of columns ``a`` and ``b``.
    """

    n_cohorts: int = 6
    cohort_size: int = 1000
    phase_lengths: tuple[int, ...] = (7, 7, 21)
    intercept: float = -3.0
    coefficients: dict[str, float] = field(default_factory=dict)
    n_continuous: int = 0
    ar_phi: float = 0.8
    factor_loading: float = 0.5
    calendar: bool = False
    start_date: date = date(2016, 1, 4)
    cohort_spacing: int = 30
    seed: int = 0

    def __post_init__(self):
        self.phase_lengths = tuple(int(x) for x in self.phase_lengths)
        if not 1 <= len(self.phase_lengths) <= 3 or min(self.phase_lengths) < 1:
            raise ValidationError("need one to three phases, each at least one day long")
        if self.cohort_size < 1 or self.n_cohorts < 1:
            raise ValidationError("cohort_size and n_cohorts must be at least 1")
        if not 0 <= self.factor_loading < 1 or not -1 < self.ar_phi < 1:
            raise ValidationError("factor_loading must be in [0, 1) and ar_phi in (-1, 1)")

    @property
    def fieldwork_days(self) -> int:
        return sum(self.phase_lengths)

    def continuous_names(self) -> list[str]:
        return [f"x{i + 1:02d}" for i in range(self.n_continuous)]


def read_scenario(path) -> ScenarioSpec:
    """Scenario from a ``key = value`` file; ``coef.<name>`` sets a coefficient."""
    raw = read_config(path)
    kwargs, coefs = {}, {}
    types = {f.name: f.type for f in fields(ScenarioSpec)}
    for key, value in raw.items():
        if key.startswith("coef."):
            coefs[key[5:]] = float(value)
        elif key == "phase_lengths":
            kwargs[key] = tuple(int(v) for v in value.split(","))
        elif key == "start_date":
            kwargs[key] = date.fromisoformat(value)
        elif key == "calendar":
            kwargs[key] = value.lower() in ("1", "true", "yes")
        elif key in ("intercept", "ar_phi", "factor_loading"):
            kwargs[key] = float(value)
        elif key in types:
            kwargs[key] = int(value)
        else:
            raise ValidationError(f"{path}: unknown scenario key {key!r}")
    return ScenarioSpec(coefficients=coefs, **kwargs)


def write_scenario(spec: ScenarioSpec, path) -> None:
    lines = [
        f"n_cohorts = {spec.n_cohorts}",
        f"cohort_size = {spec.cohort_size}",
        f"phase_lengths = {','.join(map(str, spec.phase_lengths))}",
        f"intercept = {spec.intercept!r}",
        f"n_continuous = {spec.n_continuous}",
        f"ar_phi = {spec.ar_phi!r}",
        f"factor_loading = {spec.factor_loading!r}",
        f"calendar = {str(spec.calendar).lower()}",
        f"start_date = {spec.start_date.isoformat()}",
        f"cohort_spacing = {spec.cohort_spacing}",
        f"seed = {spec.seed}",
    ]
    lines += [f"coef.{k} = {v!r}" for k, v in spec.coefficients.items()]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def ar1_factor_series(n_days: int, n_series: int, phi: float, loading: float, rng) -> np.ndarray:
    """Unit-variance AR(1) series that share one AR(1) common factor."""

    def ar1(shape):
        eps = rng.standard_normal(shape)
        out = np.empty(shape)
        out[0] = eps[0]
        scale = math.sqrt(1 - phi * phi)
        for t in range(1, shape[0]):
            out[t] = phi * out[t - 1] + scale * eps[t]
        return out

    common = ar1((n_days, 1))
    idio = ar1((n_days, n_series))
    return math.sqrt(loading) * common + math.sqrt(1 - loading) * idio


@dataclass
class SyntheticData:
    cases: list[SurveyCase]
    covariates: pd.DataFrame
    true_hazards: pd.DataFrame
    spec: ScenarioSpec


def _cohort_schedule(spec: ScenarioSpec, k: int):
    start = spec.start_date + timedelta(days=k * spec.cohort_spacing)
    letters = [start]
    for length in spec.phase_lengths[:-1]:
        letters.append(letters[-1] + timedelta(days=length))
    end = start + timedelta(days=spec.fieldwork_days - 1)
    return start, letters, end


def generate_cases(spec: ScenarioSpec) -> SyntheticData:
    """Simulate responses day by day under the true hazard model.

    Every cohort gets its own child random stream, so the output does not
    depend on the order in which cohorts are generated.
    """
    root = np.random.SeedSequence(spec.seed)
    cov_seq, *cohort_seqs = root.spawn(spec.n_cohorts + 1)
    last_start, _, last_end = _cohort_schedule(spec, spec.n_cohorts - 1)
    all_dates = pd.date_range(spec.start_date, last_end, freq="D")

    cov = pd.DataFrame(index=all_dates)
    cov.index.name = "date"
    if spec.calendar:
        cov = derive_calendar(all_dates, load_holidays())
    if spec.n_continuous:
        series = ar1_factor_series(len(all_dates), spec.n_continuous, spec.ar_phi, spec.factor_loading,
                                   np.random.default_rng(cov_seq))
        for j, name in enumerate(spec.continuous_names()):
            cov[name] = series[:, j]

    known = set(BASELINE_PREDICTORS) | set(cov.columns)
    for name in spec.coefficients:
        for part in name.split(":"):
            if part not in known:
                raise ValidationError(f"coefficient {name!r} refers to unknown column {part!r}")

    cases, hazard_rows = [], []
    for k in range(spec.n_cohorts):
        start, letters, end = _cohort_schedule(spec, k)
        cohort_id = f"C{k + 1:02d}"
        dates = pd.date_range(start, end, freq="D")
        phase_idx = np.repeat(np.arange(len(spec.phase_lengths)), spec.phase_lengths)
        s = np.concatenate([np.arange(1, n + 1) for n in spec.phase_lengths]).astype(float)
        cols = {"days": s, "Reminder1": (phase_idx == 1).astype(float), "Reminder2": (phase_idx == 2).astype(float)}
        block = cov.loc[dates]
        for c in block.columns:
            cols[c] = block[c].to_numpy()
        eta = np.full(len(dates), spec.intercept)
        for name, b in spec.coefficients.items():
            eta += b * np.prod([cols[p] for p in name.split(":")], axis=0)
        h = 1.0 / (1.0 + np.exp(-eta))

        # first day whose cumulative response probability exceeds a uniform draw
        cdf = 1.0 - np.cumprod(1.0 - h)
        u = np.random.default_rng(cohort_seqs[k]).random(spec.cohort_size)
        day = np.searchsorted(cdf, u, side="right")
        r1 = letters[1] if len(letters) > 1 else None
        r2 = letters[2] if len(letters) > 2 else None
        for i in range(spec.cohort_size):
            resp = None if day[i] >= len(dates) else (start + timedelta(days=int(day[i])))
            cases.append(SurveyCase(f"{cohort_id}-{i + 1:05d}", cohort_id, start, end, r1, r2, resp))
        hazard_rows.append(
            pd.DataFrame(
                {
                    "cohort_id": cohort_id,
                    "calendar_date": dates,
                    "days": s,
                    "phase": np.asarray(PHASES, dtype=object)[phase_idx],
                    "hazard": h,
                }
            )
        )
    return SyntheticData(cases, cov, pd.concat(hazard_rows, ignore_index=True), spec)


def analytic_cumulative(hazards) -> np.ndarray:
    """``1 - prod(1 - h)`` up to each day."""
    return 1.0 - np.cumprod(1.0 - np.asarray(hazards, dtype=float))


# --- brute-force oracle -----------------------------------------------------------


def _oracle_objective(theta, X, y, m, l1, l2):
    """Penalized mean NLL for a batch of parameter vectors (rows of ``theta``)."""
    eta = theta[:, :1] + theta[:, 1:] @ X.T
    # log(1 + e^eta) written out with max-shift
    sp = np.maximum(eta, 0) + np.log(np.exp(-np.abs(eta)) + 1.0)
    nll = (m * sp - y * eta).sum(axis=1) / m.sum()
    b = theta[:, 1:]
    return nll + (np.abs(b) * l1).sum(axis=1) + (b * b * l2).sum(axis=1)


def oracle_penalized_fit(
    X,
    events,
    at_risk,
    l1,
    l2=None,
    start=None,
    points: int = 13,
    step: float = 1.0,
    shrink: float = 1 / 3,
    resolution: float = 1e-7,
):
    """Nested grid search for the penalized binomial objective.

    Evaluates a full ``points**(p+1)`` grid (intercept plus slopes) around
    the incumbent, then shrinks the step by ``shrink`` and recentres,
    until the step falls below ``resolution``. ``l1``/``l2`` are the
    per-slope multipliers (lambda times weight).

    Returns ``(intercept, slopes, objective)``.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(events, dtype=float)
    m = np.asarray(at_risk, dtype=float)
    n, p = X.shape
    if p > 3 or n > 50:
        raise ValidationError("oracle is limited to 3 predictors and 50 rows")
    l1 = np.broadcast_to(np.asarray(l1, dtype=float), (p,))
    l2 = np.zeros(p) if l2 is None else np.broadcast_to(np.asarray(l2, dtype=float), (p,))
    centre = np.zeros(p + 1) if start is None else np.asarray(start, dtype=float)
    offsets = np.arange(points) - points // 2
    grid_unit = np.array(list(itertools.product(offsets, repeat=p + 1)), dtype=float)
    best = _oracle_objective(centre[None, :], X, y, m, l1, l2)[0]
    h = step
    while h >= resolution:
        while True:
            cand = centre + h * grid_unit
            vals = _oracle_objective(cand, X, y, m, l1, l2)
            k = int(np.argmin(vals))
            if vals[k] < best - 1e-15:
                moved = not np.allclose(cand[k], centre)
                best, centre = vals[k], cand[k]
                # incumbent on the grid edge: search again at the same step
                if moved and np.any(np.abs(grid_unit[k]) == points // 2):
                    continue
            break
        # the L1 kink at zero is rarely on the grid; try it explicitly
        for j in range(1, p + 1):
            trial = centre.copy()
            trial[j] = 0.0
            val = _oracle_objective(trial[None, :], X, y, m, l1, l2)[0]
            if val < best:
                best, centre = val, trial
        h *= shrink
    return float(centre[0]), centre[1:].copy(), float(best)
