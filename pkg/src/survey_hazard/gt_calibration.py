"""Calibration of overlapping fixed-window search-index samples.

Every sample covers ``W`` consecutive days and is rescaled by the index
provider to 0..100 within its own window, so samples are on different
scales. Consecutive samples start one day apart and share ``W - 1``
days. Each sample is put on the scale of its predecessor by the ratio of
the overlap sums, the ratios are chained back to the first sample, and
the calibrated scores for each date are averaged.
"""

from __future__ import annotations

from dataclasses import dataclass
from datetime import date, timedelta
from typing import Sequence

import numpy as np
import pandas as pd

from .errors import ValidationError

DEFAULT_WINDOW = 244
DEFAULT_SAMPLES = 974


@dataclass
class GtSample:
    sample_index: int
    start_date: date
    scores: np.ndarray

    def __post_init__(self):
        self.scores = np.asarray(self.scores, dtype=float)
        if self.scores.ndim != 1 or self.scores.size < 2:
            raise ValidationError(f"sample {self.sample_index}: need at least two scores")
        if np.any(~np.isfinite(self.scores)) or np.any(self.scores < 0) or np.any(self.scores > 100):
            raise ValidationError(f"sample {self.sample_index}: scores must lie in [0, 100]")

    @property
    def window(self) -> int:
        return self.scores.size


@dataclass
class CalibrationChain:
    """Per-sample factors ``C`` (``C[0] = 1``) and cumulative weights ``w``."""

    factors: np.ndarray
    weights: np.ndarray


@dataclass
class CalibratedSeries:
    dates: pd.DatetimeIndex
    value: np.ndarray
    coverage: np.ndarray

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({"date": self.dates, "value": self.value, "coverage": self.coverage})


def validate_samples(samples: Sequence[GtSample], window: int | None = None) -> int:
    """Check equal windows, consecutive start dates and 1-based indices."""
    if not samples:
        raise ValidationError("no samples")
    window = samples[0].window if window is None else window
    for pos, smp in enumerate(samples):
        if smp.window != window:
            raise ValidationError(f"sample {smp.sample_index}: {smp.window} scores, expected {window}")
        if smp.sample_index != pos + 1:
            raise ValidationError(f"sample indices must run 1..S without gaps (got {smp.sample_index} at {pos + 1})")
        if pos and smp.start_date - samples[pos - 1].start_date != timedelta(days=1):
            raise ValidationError(f"sample {smp.sample_index} does not start one day after its predecessor")
    return window


def calibration_factor(prev: GtSample, cur: GtSample) -> float:
    """Ratio of ``prev``'s last ``W-1`` scores to ``cur``'s first ``W-1``.

    Both sums cover the same calendar days. An all-zero overlap in both
    samples gives 1.0; a zero denominator against a nonzero numerator
    cannot be calibrated and raises.
    """
    if prev.window != cur.window:
        raise ValidationError("samples have different window lengths")
    if cur.start_date - prev.start_date != timedelta(days=1):
        raise ValidationError("current sample must start one day after the previous one")
    num = prev.scores[1:].sum()
    den = cur.scores[:-1].sum()
    if den == 0:
        if num == 0:
            return 1.0
        raise ValidationError(
            f"sample {cur.sample_index}: zero overlap sum against nonzero predecessor; samples are incomparable"
        )
    return float(num / den)


def build_chain(samples: Sequence[GtSample]) -> CalibrationChain:
    validate_samples(samples)
    factors = np.ones(len(samples))
    for k in range(1, len(samples)):
        factors[k] = calibration_factor(samples[k - 1], samples[k])
    return CalibrationChain(factors, np.cumprod(factors))


def averaged_series(samples: Sequence[GtSample], chain: CalibrationChain, mode: str = "strict") -> CalibratedSeries:
    """Average the calibrated scores belonging to each date.

    Sample ``s`` (1-based) score ``i`` falls on date index ``n = s + i - 1``.
    In ``strict`` mode only dates covered by all ``W`` windows are emitted
    and the divisor is ``W``; ``partial`` mode emits every covered date and
    divides by its coverage count.
    """
    if mode not in ("strict", "partial"):
        raise ValidationError(f"unknown mode {mode!r}")
    window = validate_samples(samples)
    n_samples = len(samples)
    n_dates = n_samples + window - 1
    total = np.zeros(n_dates)
    coverage = np.zeros(n_dates, dtype=np.int64)
    for pos, smp in enumerate(samples):
        total[pos : pos + window] += smp.scores * chain.weights[pos]
        coverage[pos : pos + window] += 1
    dates = pd.date_range(samples[0].start_date, periods=n_dates, freq="D")
    if mode == "strict":
        keep = coverage == window
        return CalibratedSeries(dates[keep], total[keep] / window, coverage[keep])
    return CalibratedSeries(dates, total / coverage, coverage)


def calibrate(samples: Sequence[GtSample], mode: str = "strict") -> CalibratedSeries:
    return averaged_series(samples, build_chain(samples), mode)


# --- CSV interfaces -------------------------------------------------------


def read_samples_csv(path, window: int | None = None) -> list[GtSample]:
    """Read samples in long (``sample_index,start_date,day_offset,score``) or wide form.

    Wide form has ``sample_index,start_date`` followed by one column per
    day offset. ``day_offset`` is 0-based.
    """
    df = pd.read_csv(path, float_precision="round_trip")
    if {"sample_index", "start_date"} - set(df.columns):
        raise ValidationError(f"{path}: need sample_index and start_date columns")
    samples = []
    if {"day_offset", "score"} <= set(df.columns):
        for idx, grp in df.groupby("sample_index", sort=True):
            grp = grp.sort_values("day_offset")
            offsets = grp["day_offset"].to_numpy()
            if not np.array_equal(offsets, np.arange(len(grp))):
                raise ValidationError(f"{path}: sample {idx} day offsets are not 0..W-1")
            starts = grp["start_date"].unique()
            if len(starts) != 1:
                raise ValidationError(f"{path}: sample {idx} has several start dates")
            samples.append(GtSample(int(idx), date.fromisoformat(str(starts[0])), grp["score"].to_numpy()))
    else:
        score_cols = [c for c in df.columns if c not in ("sample_index", "start_date")]
        df = df.sort_values("sample_index")
        for rec in df.to_dict("records"):
            samples.append(
                GtSample(
                    int(rec["sample_index"]),
                    date.fromisoformat(str(rec["start_date"])),
                    np.array([rec[c] for c in score_cols], dtype=float),
                )
            )
    validate_samples(samples, window)
    return samples


def write_samples_csv(samples: Sequence[GtSample], path) -> None:
    """Write samples in long form."""
    rows = []
    for smp in samples:
        for off, score in enumerate(smp.scores):
            rows.append((smp.sample_index, smp.start_date.isoformat(), off, score))
    pd.DataFrame(rows, columns=["sample_index", "start_date", "day_offset", "score"]).to_csv(path, index=False)


def write_series_csv(series: CalibratedSeries, path) -> None:
    out = series.to_frame()
    out["date"] = out["date"].dt.strftime("%Y-%m-%d")
    out.to_csv(path, index=False)


def read_series_csv(path) -> pd.Series:
    df = pd.read_csv(path, parse_dates=["date"], float_precision="round_trip")
    return pd.Series(df["value"].to_numpy(dtype=float), index=pd.DatetimeIndex(df["date"]), name="value")


def sample_latent(latent, start: date, window: int, scales, rounding: bool = False) -> list[GtSample]:
    """Cut a latent daily series into scaled overlapping samples.

    Sample ``s`` (0-based here) holds ``scales[s] * latent[s:s + window]``,
    optionally rounded to integers like published index scores.
    """
    latent = np.asarray(latent, dtype=float)
    n_samples = latent.size - window + 1
    out = []
    for s in range(n_samples):
        # float rounding can push a rescaled maximum a hair above 100
        scores = np.minimum(latent[s : s + window] * scales[s], 100.0)
        if rounding:
            scores = np.round(scores)
        out.append(GtSample(s + 1, start + timedelta(days=s), scores))
    return out


def provider_scales(latent, window: int) -> np.ndarray:
    """Per-sample scales that map each window's maximum to 100."""
    latent = np.asarray(latent, dtype=float)
    maxima = np.lib.stride_tricks.sliding_window_view(latent, window).max(axis=1)
    return 100.0 / maxima
