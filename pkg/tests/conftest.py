from datetime import date

import numpy as np
import pytest

from survey_hazard.survival_core import SurveyCase, build_design, collapse_period_level, expand_person_period
from survey_hazard.synthetic import ScenarioSpec, generate_cases


def random_cases(rng, n_persons, n_cohorts=3, start=date(2016, 1, 4)):
    """Cases with random schedules and responses (some censored)."""
    from datetime import timedelta

    cases = []
    for i in range(n_persons):
        k = int(rng.integers(n_cohorts))
        inv = start + timedelta(days=30 * k)
        r1 = inv + timedelta(days=int(rng.integers(5, 9)))
        r2 = r1 + timedelta(days=int(rng.integers(5, 9)))
        end = r2 + timedelta(days=int(rng.integers(5, 15)))
        span = (end - inv).days
        resp = None if rng.random() < 0.4 else inv + timedelta(days=int(rng.integers(0, span + 1)))
        cases.append(SurveyCase(f"p{i}", f"C{k}", inv, end, r1, r2, resp))
    return cases


@pytest.fixture(scope="session")
def small_scenario():
    spec = ScenarioSpec(
        n_cohorts=8,
        cohort_size=400,
        n_continuous=4,
        calendar=True,
        intercept=-2.5,
        coefficients={"days": -0.15, "Reminder1": 0.3, "Reminder2": -0.2, "Saturday": -0.4, "x01": 0.3},
        seed=11,
    )
    data = generate_cases(spec)
    period = collapse_period_level(expand_person_period(data.cases))
    return data, period, build_design(period, data.covariates)


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in RESULTS:
            terminalreporter.write_line(line)
