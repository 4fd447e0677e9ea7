"""Date-indexed contextual covariates: weather, calendar and trend indices."""

from __future__ import annotations

import logging
from datetime import date
from importlib import resources
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
import pandas as pd

from .errors import ValidationError

log = logging.getLogger(__name__)

# KNMI daily field names, in catalogue order, with units after conversion
WEATHER_MEASURES = {
    "TX": "temperature max (C)",
    "TN": "temperature min (C)",
    "TG": "temperature avg (C)",
    "SQ": "sunshine duration (h)",
    "SP": "sunshine percentage (%)",
    "RH": "precipitation volume (mm)",
    "RHX": "precipitation max hourly volume (mm)",
    "DR": "precipitation duration (h)",
    "FHX": "wind speed max hourly (m/s)",
    "FHN": "wind speed min hourly (m/s)",
    "FG": "wind speed avg (m/s)",
    "NG": "cloudiness (1-9)",
    "VVN": "visibility min (m)",
    "VVX": "visibility max (m)",
    "UX": "humidity max (%)",
    "UN": "humidity min (%)",
    "UG": "humidity avg (%)",
    "PX": "air pressure max (hPa)",
    "PN": "air pressure min (hPa)",
    "PG": "air pressure avg (hPa)",
}
# (min, avg, max); avg is None where only a range is recorded
_ORDERED = [("TN", "TG", "TX"), ("FHN", "FG", "FHX"), ("UN", "UG", "UX"), ("PN", "PG", "PX"), ("VVN", None, "VVX")]
_PERCENT = ("SP", "UX", "UN", "UG")

WEEKDAYS = ("Tuesday", "Wednesday", "Thursday", "Friday", "Saturday", "Sunday")
MONTHS = ("Feb", "Mar", "Apr", "May", "Jun", "Jul", "Aug", "Sep", "Oct", "Nov", "Dec")
SEASONS = ("spring", "summer", "autumn")
_SEASON_OF_MONTH = {12: "winter", 1: "winter", 2: "winter", 3: "spring", 4: "spring", 5: "spring",
                    6: "summer", 7: "summer", 8: "summer", 9: "autumn", 10: "autumn", 11: "autumn"}
BLOCKS = ("weather", "trends", "calendar", "month", "season", "other")
DEFAULT_BLOCKS = ("calendar", "weather", "trends")


# --- weather -------------------------------------------------------------------


def validate_weather(records: pd.DataFrame, source: str = "weather") -> None:
    """Check ordering and range invariants; NaN marks a missing measure."""
    missing = [c for c in ("station_id", "date", *WEATHER_MEASURES) if c not in records.columns]
    if missing:
        raise ValidationError(f"{source}: missing columns {missing}")
    dup = records.duplicated(["station_id", "date"])
    if dup.any():
        i = int(np.flatnonzero(dup.to_numpy())[0])
        raise ValidationError(f"{source}:{i + 2}: duplicate (station_id, date)")

    def fail(mask, what):
        bad = np.flatnonzero(np.asarray(mask))
        if bad.size:
            raise ValidationError(f"{source}:{bad[0] + 2}: {what}")

    for lo, mid, hi in _ORDERED:
        a, c = records[lo], records[hi]
        fail(a > c, f"{lo} exceeds {hi}")
        if mid is not None:
            b = records[mid]
            fail((a > b) | (b > c), f"{mid} outside [{lo}, {hi}]")
    for col in _PERCENT:
        fail((records[col] < 0) | (records[col] > 100), f"{col} outside [0, 100]")
    fail((records["NG"] < 1) | (records["NG"] > 9), "NG outside [1, 9]")


def average_weather_stations(records: pd.DataFrame) -> pd.DataFrame:
    """Unweighted per-date mean of each measure over reporting stations.

    A station with a missing (NaN) measure is left out of that measure's
    mean only. Dates are returned as a sorted ``DatetimeIndex``.
    """
    validate_weather(records)
    frame = records.assign(date=pd.to_datetime(records["date"]))
    out = frame.groupby("date", sort=True)[list(WEATHER_MEASURES)].mean()
    out.index = pd.DatetimeIndex(out.index, name="date")
    return out


def read_weather_csv(path) -> pd.DataFrame:
    df = pd.read_csv(path, dtype={"station_id": str}, float_precision="round_trip")
    validate_weather(df, str(path))
    return df


# --- calendar -------------------------------------------------------------------


def load_holidays(path=None) -> list[date]:
    """Read holiday dates (one ISO date per line, ``#`` comments).

    Without ``path`` the bundled Dutch list for 2016-2017 is used.
    """
    if path is None:
        text = resources.files("survey_hazard").joinpath("data/holidays_nl_2016_2017.txt").read_text()
        source = "holidays_nl_2016_2017.txt"
    else:
        text = Path(path).read_text(encoding="utf-8")
        source = str(path)
    out = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        try:
            out.append(date.fromisoformat(line))
        except ValueError as exc:
            raise ValidationError(f"{source}:{lineno}: {exc}") from exc
    return sorted(set(out))


def derive_calendar(dates, holidays: Iterable[date] = (), month: bool = False, season: bool = False) -> pd.DataFrame:
    """Day-of-week and holiday dummies, optionally month and season blocks.

    Monday, January and winter are reference levels and get no column.
    Seasons follow meteorological months (Dec-Feb winter).
    """
    idx = pd.DatetimeIndex(pd.to_datetime(dates)).normalize()
    out = pd.DataFrame(index=idx)
    out.index.name = "date"
    dow = idx.dayofweek.to_numpy()
    for k, name in enumerate(WEEKDAYS, start=1):
        out[name] = (dow == k).astype(float)
    hol = pd.DatetimeIndex(pd.to_datetime(list(holidays)))
    out["holiday"] = idx.isin(hol).astype(float)
    if month:
        mon = idx.month.to_numpy()
        for k, name in enumerate(MONTHS, start=2):
            out[f"month_{name}"] = (mon == k).astype(float)
    if season:
        seas = np.array([_SEASON_OF_MONTH[m] for m in idx.month])
        for name in SEASONS:
            out[f"season_{name}"] = (seas == name).astype(float)
    return out


# --- trends -----------------------------------------------------------------------


def read_trends_csv(path) -> pd.DataFrame:
    """Wide trend table ``date,<term>,...`` (one calibrated series per column)."""
    df = pd.read_csv(path, float_precision="round_trip")
    if "date" not in df:
        raise ValidationError(f"{path}: missing date column")
    df["date"] = pd.to_datetime(df["date"], format="%Y-%m-%d")
    if df["date"].duplicated().any():
        raise ValidationError(f"{path}: duplicate dates")
    out = df.set_index("date").sort_index().astype(float)
    return out.rename(columns=lambda c: c if c.startswith("gt_") else f"gt_{c}")


def combine_trend_series(series: dict[str, pd.Series]) -> pd.DataFrame:
    """Join calibrated series (term -> date-indexed values) into one wide table."""
    cols = {name if name.startswith("gt_") else f"gt_{name}": s for name, s in series.items()}
    return pd.DataFrame(cols).sort_index()


# --- assembly -----------------------------------------------------------------------


def build_covariate_table(
    dates,
    weather: pd.DataFrame | None = None,
    trends: pd.DataFrame | None = None,
    holidays: Iterable[date] | None = None,
    blocks: Sequence[str] = DEFAULT_BLOCKS,
) -> pd.DataFrame:
    """Assemble one covariate row per requested date.

    ``weather`` is either raw station records (with ``station_id``) or an
    already-averaged date-indexed table. Any requested date lacking a value
    in a selected block raises :class:`ValidationError` with a gap report.
    """
    unknown = set(blocks) - set(BLOCKS)
    if unknown:
        raise ValidationError(f"unknown covariate blocks {sorted(unknown)}")
    idx = pd.DatetimeIndex(pd.to_datetime(sorted(set(pd.to_datetime(dates))))).normalize()
    parts = []
    if "calendar" in blocks or "month" in blocks or "season" in blocks:
        cal = derive_calendar(idx, holidays if holidays is not None else load_holidays(),
                              month="month" in blocks, season="season" in blocks)
        if "calendar" not in blocks:
            cal = cal.drop(columns=[*WEEKDAYS, "holiday"])
        parts.append(cal)
    if "weather" in blocks:
        if weather is None:
            raise ValidationError("weather block selected but no weather data given")
        if "station_id" in weather.columns:
            weather = average_weather_stations(weather)
        parts.append(_aligned(weather, idx, "weather"))
    if "trends" in blocks:
        if trends is None:
            raise ValidationError("trends block selected but no trend data given")
        parts.append(_aligned(trends, idx, "trends"))
    if not parts:
        return pd.DataFrame(index=idx)
    out = pd.concat(parts, axis=1)
    out.index.name = "date"
    return out


def _aligned(table: pd.DataFrame, idx: pd.DatetimeIndex, label: str) -> pd.DataFrame:
    sub = table.reindex(idx)
    holes = sub.isna().any(axis=1)
    if holes.any():
        report = gap_report(idx[holes.to_numpy()])
        raise ValidationError(f"{label} covariates missing on {holes.sum()} date(s): {report}")
    return sub


def gap_report(dates: pd.DatetimeIndex) -> str:
    """Collapse missing dates into ``start..end`` runs."""
    dates = pd.DatetimeIndex(sorted(dates))
    runs, start, prev = [], None, None
    for d in dates:
        if start is None:
            start = prev = d
        elif (d - prev).days == 1:
            prev = d
        else:
            runs.append((start, prev))
            start = prev = d
    if start is not None:
        runs.append((start, prev))
    return ", ".join(a.strftime("%Y-%m-%d") if a == b else f"{a:%Y-%m-%d}..{b:%Y-%m-%d}" for a, b in runs)


def select_columns(covariates: pd.DataFrame, blocks: Sequence[str]) -> list[str]:
    """Covariate column names belonging to the given blocks.

    Columns matching no known naming scheme belong to block ``other``.
    """
    cols = []
    for c in covariates.columns:
        if c in WEEKDAYS or c == "holiday":
            block = "calendar"
        elif c.startswith("month_"):
            block = "month"
        elif c.startswith("season_"):
            block = "season"
        elif c in WEATHER_MEASURES:
            block = "weather"
        elif c.startswith("gt_"):
            block = "trends"
        else:
            block = "other"
        if block in blocks:
            cols.append(c)
    return cols


def write_covariates_csv(table: pd.DataFrame, path) -> None:
    out = table.copy()
    out.index = pd.DatetimeIndex(out.index).strftime("%Y-%m-%d")
    out.index.name = "date"
    out.to_csv(path)


def read_covariates_csv(path) -> pd.DataFrame:
    df = pd.read_csv(path, float_precision="round_trip")
    if "date" not in df:
        raise ValidationError(f"{path}: missing date column")
    df["date"] = pd.to_datetime(df["date"], format="%Y-%m-%d")
    return df.set_index("date").sort_index()


# --- cohorts -------------------------------------------------------------------------


def split_train_test(cohorts, n_train: int = 18, n_test: int = 6) -> tuple[list[str], list[str]]:
    """First ``n_train`` cohorts for training, the last ``n_test`` for testing.

    ``cohorts`` is a sequence of ``(cohort_id, invitation_date)`` pairs or a
    mapping cohort -> invitation date; ordering is by invitation date.
    """
    items = list(cohorts.items()) if isinstance(cohorts, dict) else list(cohorts)
    if len({c for c, _ in items}) != len(items):
        raise ValidationError("duplicate cohort ids")
    if n_train + n_test > len(items):
        raise ValidationError(f"split {n_train}/{n_test} needs {n_train + n_test} cohorts, got {len(items)}")
    ordered = [c for c, _ in sorted(items, key=lambda kv: kv[1])]
    return ordered[:n_train], ordered[len(ordered) - n_test :]


def cohort_starts(table: pd.DataFrame) -> dict[str, pd.Timestamp]:
    """First calendar date of each cohort in a period-level table."""
    return table.groupby("cohort_id")["calendar_date"].min().to_dict()


# --- config ---------------------------------------------------------------------------


def read_config(path) -> dict[str, str]:
    """Parse a plain ``key = value`` file (``#`` comments, blank lines ignored)."""
    out = {}
    for lineno, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValidationError(f"{path}:{lineno}: expected key = value")
        key, value = (p.strip() for p in line.split("=", 1))
        out[key.replace("-", "_")] = value
    return out


def parse_blocks(value: str | Sequence[str]) -> tuple[str, ...]:
    items = [b.strip() for b in value.replace("|", ",").split(",")] if isinstance(value, str) else list(value)
    items = [b for b in items if b]
    unknown = set(items) - set(BLOCKS)
    if unknown:
        raise ValidationError(f"unknown covariate blocks {sorted(unknown)}")
    return tuple(items)
