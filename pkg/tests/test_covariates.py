from datetime import date

import numpy as np
import pandas as pd
import pytest
from hypothesis import given, settings, strategies as st

from survey_hazard.covariates import (
    BLOCKS,
    MONTHS,
    SEASONS,
    WEATHER_MEASURES,
    WEEKDAYS,
    average_weather_stations,
    build_covariate_table,
    combine_trend_series,
    derive_calendar,
    gap_report,
    load_holidays,
    parse_blocks,
    read_config,
    read_covariates_csv,
    read_trends_csv,
    read_weather_csv,
    select_columns,
    split_train_test,
    validate_weather,
    write_covariates_csv,
)
from survey_hazard.errors import ValidationError


def weather_records(rng, dates, n_stations):
    """Plausible station-day records that respect the ordering invariants."""
    rows = []
    for d in pd.to_datetime(dates):
        for s in range(n_stations):
            tg = rng.normal(10, 5)
            fg = rng.uniform(2, 8)
            ug = rng.uniform(50, 90)
            pg = rng.normal(1015, 8)
            rows.append(
                {
                    "station_id": f"{260 + s}",
                    "date": d.strftime("%Y-%m-%d"),
                    "TN": tg - 3, "TG": tg, "TX": tg + 4,
                    "SQ": rng.uniform(0, 10), "SP": rng.uniform(0, 100),
                    "RH": rng.exponential(2), "RHX": rng.exponential(1), "DR": rng.uniform(0, 5),
                    "FHN": fg - 1, "FG": fg, "FHX": fg + 3,
                    "NG": int(rng.integers(1, 10)),
                    "VVN": rng.uniform(100, 1000), "VVX": rng.uniform(2000, 8000),
                    "UN": ug - 10, "UG": ug, "UX": ug + 5,
                    "PN": pg - 3, "PG": pg, "PX": pg + 3,
                }
            )
    return pd.DataFrame(rows)


class TestWeather:
    def test_two_stations(self):
        rec = weather_records(np.random.default_rng(0), ["2016-03-01"], 2)
        rec.loc[:, "TG"] = [10.0, 12.0]
        rec.loc[:, "TN"], rec.loc[:, "TX"] = 0.0, 20.0
        assert average_weather_stations(rec)["TG"].iloc[0] == 11.0

    def test_single_station(self):
        rec = weather_records(np.random.default_rng(1), ["2016-03-01"], 1)
        out = average_weather_stations(rec)
        for col in WEATHER_MEASURES:
            assert out[col].iloc[0] == pytest.approx(rec[col].iloc[0])

    def test_missing_value_mask_oracle(self):
        rng = np.random.default_rng(2)
        rec = weather_records(rng, ["2016-03-01", "2016-03-02"], 47)
        rec.loc[5, "RH"] = np.nan
        out = average_weather_stations(rec)
        day = rec["date"] == "2016-03-01"
        values = rec.loc[day, "RH"].to_numpy()
        mask = ~np.isnan(values)
        assert mask.sum() == 46
        expected = sum(v for v, k in zip(values, mask) if k) / 46
        assert out["RH"].iloc[0] == pytest.approx(expected, rel=1e-14)

    def test_permutation_invariant(self):
        rng = np.random.default_rng(3)
        rec = weather_records(rng, pd.date_range("2016-01-01", periods=5), 6)
        shuffled = rec.sample(frac=1.0, random_state=4).reset_index(drop=True)
        pd.testing.assert_frame_equal(average_weather_stations(rec), average_weather_stations(shuffled), rtol=1e-13)

    @pytest.mark.parametrize(
        "col,value,what",
        [("TN", 50.0, "TN exceeds TX"), ("UG", 120.0, "UG"), ("NG", 0, "NG"), ("SP", -1.0, "SP")],
    )
    def test_invariant_violation_reports_line(self, col, value, what):
        rec = weather_records(np.random.default_rng(5), ["2016-03-01"], 3)
        rec.loc[1, col] = value
        with pytest.raises(ValidationError, match=rf"weather:3: .*{what.split()[0]}"):
            validate_weather(rec)

    def test_csv(self, tmp_path):
        rec = weather_records(np.random.default_rng(6), ["2016-03-01"], 2)
        rec.to_csv(tmp_path / "w.csv", index=False)
        back = read_weather_csv(tmp_path / "w.csv")
        np.testing.assert_allclose(back["TG"], rec["TG"])


class TestCalendar:
    def test_new_years_day_2017(self):
        out = derive_calendar([date(2017, 1, 1)], load_holidays())
        row = out.iloc[0]
        assert row["Sunday"] == 1 and row["holiday"] == 1
        assert row[list(WEEKDAYS)].sum() == 1

    def test_monday_is_reference(self):
        mondays = pd.date_range("2016-01-04", periods=30, freq="7D")
        out = derive_calendar(mondays)
        assert (out[list(WEEKDAYS)].to_numpy() == 0).all()
        assert "Monday" not in out.columns

    def test_dummy_exclusivity(self):
        dates = pd.date_range("2016-01-01", "2017-12-31")
        out = derive_calendar(dates)
        counts = out[list(WEEKDAYS)].sum(axis=1).to_numpy()
        np.testing.assert_array_equal(counts, (dates.dayofweek != 0).astype(float))

    def test_seasons(self):
        dates = pd.to_datetime([f"2016-{m:02d}-15" for m in range(1, 13)])
        out = derive_calendar(dates, month=True, season=True)
        expect = ["winter"] * 2 + ["spring"] * 3 + ["summer"] * 3 + ["autumn"] * 3 + ["winter"]
        for (_, row), season in zip(out.iterrows(), expect):
            flags = {s: row[f"season_{s}"] for s in SEASONS}
            assert sum(flags.values()) == (0 if season == "winter" else 1)
            if season != "winter":
                assert flags[season] == 1
        assert out[[f"month_{m}" for m in MONTHS]].sum(axis=1).tolist() == [0] + [1] * 11

    def test_bundled_holidays(self):
        hol = load_holidays()
        assert date(2016, 4, 27) in hol and date(2017, 4, 27) in hol
        assert date(2016, 3, 27) in hol and date(2017, 4, 16) in hol
        assert all(d.year in (2016, 2017) for d in hol)

    def test_custom_holiday_file(self, tmp_path):
        p = tmp_path / "h.txt"
        p.write_text("# list\n2016-06-01\n")
        assert load_holidays(p) == [date(2016, 6, 1)]
        p.write_text("2016-06-31\n")
        with pytest.raises(ValidationError, match=":1:"):
            load_holidays(p)


class TestAssembly:
    def setup_method(self):
        rng = np.random.default_rng(7)
        self.dates = pd.date_range("2016-02-01", periods=20)
        self.weather = average_weather_stations(weather_records(rng, self.dates, 3))
        self.trends = combine_trend_series(
            {f"term{i}": pd.Series(rng.uniform(0, 100, 20), index=self.dates) for i in range(10)}
        )

    def test_full_census(self):
        out = build_covariate_table(self.dates, self.weather, self.trends)
        # 6 weekdays + holiday + 20 weather + 10 trends
        assert out.shape == (20, 37)
        assert not out.isna().any().any()
        assert select_columns(out, ("weather",)) == list(WEATHER_MEASURES)
        assert len(select_columns(out, ("trends",))) == 10

    def test_missing_date_is_error(self):
        weather = self.weather.drop(self.dates[[3, 4, 9]])
        with pytest.raises(ValidationError, match="2016-02-04..2016-02-05, 2016-02-10"):
            build_covariate_table(self.dates, weather, self.trends)

    def test_month_only_block(self):
        out = build_covariate_table(self.dates, blocks=("month",))
        assert all(c.startswith("month_") for c in out.columns)

    def test_unknown_block(self):
        with pytest.raises(ValidationError):
            parse_blocks("weather,tides")
        assert parse_blocks("calendar, weather") == ("calendar", "weather")
        assert set(BLOCKS) >= set(parse_blocks(",".join(BLOCKS)))

    def test_csv_round_trip(self, tmp_path):
        out = build_covariate_table(self.dates, self.weather, self.trends)
        write_covariates_csv(out, tmp_path / "c.csv")
        back = read_covariates_csv(tmp_path / "c.csv")
        pd.testing.assert_frame_equal(back, out, check_freq=False, check_names=False)

    def test_trends_csv(self, tmp_path):
        p = tmp_path / "t.csv"
        p.write_text("date,weer,gt_regen\n2016-01-01,3,4\n2016-01-02,5,6\n")
        out = read_trends_csv(p)
        assert list(out.columns) == ["gt_weer", "gt_regen"]

    def test_gap_report(self):
        d = pd.to_datetime(["2016-01-01", "2016-01-02", "2016-01-05"])
        assert gap_report(d) == "2016-01-01..2016-01-02, 2016-01-05"


class TestSplit:
    def test_published_split(self):
        cohorts = [(f"C{k:02d}", date(2016, 1, 1) + pd.Timedelta(days=30 * k)) for k in range(24)]
        train, test = split_train_test(cohorts)
        assert len(train) == 18 and len(test) == 6
        assert train[0] == "C00" and test[0] == "C18"

    def test_small_split(self):
        cohorts = {"d": date(2016, 4, 1), "a": date(2016, 1, 1), "c": date(2016, 3, 1), "b": date(2016, 2, 1)}
        assert split_train_test(cohorts, 3, 1) == (["a", "b", "c"], ["d"])

    def test_too_few(self):
        with pytest.raises(ValidationError):
            split_train_test([("a", date(2016, 1, 1))], 1, 1)


@settings(max_examples=30, deadline=None)
@given(n=st.integers(2, 40), data=st.data())
def test_split_is_partition(n, data):
    n_train = data.draw(st.integers(1, n - 1))
    cohorts = [(f"c{k}", date(2016, 1, 1) + pd.Timedelta(days=k)) for k in range(n)]
    train, test = split_train_test(cohorts, n_train, n - n_train)
    assert set(train) | set(test) == {c for c, _ in cohorts}
    assert not set(train) & set(test)


def test_read_config(tmp_path):
    p = tmp_path / "cfg.txt"
    p.write_text("# comment\nk-folds = 5\nseed=3  # trailing\n\n")
    assert read_config(p) == {"k_folds": "5", "seed": "3"}
    p.write_text("nonsense\n")
    with pytest.raises(ValidationError, match=":1:"):
        read_config(p)
