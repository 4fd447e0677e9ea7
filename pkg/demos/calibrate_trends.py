#!/usr/bin/env python3
"""Put overlapping search-index samples back on one scale.

Each sample covers 244 days and is rescaled so that its own maximum is
100, so a value of 50 means different things in different samples.
Chaining overlap ratios undoes the per-sample scaling.
"""

from datetime import date

import numpy as np

from survey_hazard.gt_calibration import DEFAULT_SAMPLES, DEFAULT_WINDOW, build_chain, calibrate, provider_scales, sample_latent

#%% A latent daily interest series with yearly and weekly cycles

rng = np.random.default_rng(7)
n_days = DEFAULT_SAMPLES + DEFAULT_WINDOW - 1
t = np.arange(n_days)
latent = 30 + 12 * np.sin(2 * np.pi * t / 365.25) + 4 * np.sin(2 * np.pi * t / 7) + rng.gamma(3, 2, n_days)

#%% What the provider hands out: integer scores, each window scaled to 100

samples = sample_latent(latent, date(2015, 5, 3), DEFAULT_WINDOW, provider_scales(latent, DEFAULT_WINDOW), rounding=True)
print(f"{len(samples)} samples of {samples[0].window} days, first starting {samples[0].start_date}")
print("the same day in samples 1 and 200:", samples[0].scores[243], samples[199].scores[44])

#%% Chain and average
# Only dates covered by all 244 windows are kept, which leaves 2016-2017.

chain = build_chain(samples)
series = calibrate(samples)
print(f"weights range {chain.weights.min():.3f}..{chain.weights.max():.3f}")
print(f"{series.value.size} calibrated days, {series.dates[0].date()} to {series.dates[-1].date()}")
truth = latent[DEFAULT_WINDOW - 1 : DEFAULT_SAMPLES]
print(f"correlation with the latent series: {np.corrcoef(series.value, truth)[0, 1]:.5f}")
