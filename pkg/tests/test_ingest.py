import numpy as np
import pandas as pd
import pytest

from sbgp.crud import FitRecordService
from sbgp.data_source_manager import (
    BivariateSeries,
    DataSourceManager,
    empirical_quantile,
    exceedance_set,
    load_csv,
    meta_path,
    parse_month_day,
    read_meta,
    read_sample,
    season_filter,
    weekly_maxima,
    write_exceedances,
)
from sbgp.database import get_database
from sbgp.exceptions import DomainError, IngestionError


def write_csv(path, text):
    path.write_text(text)
    return path


def daily_series(days, values=None, start="2001-01-01"):
    dates = pd.date_range(start, periods=days, freq="D")
    if values is None:
        values = np.ones((days, 2))
    return BivariateSeries(dates, np.asarray(values, dtype=float), ["a", "b"])


class TestLoadCsv:
    def test_three_rows(self, tmp_path):
        path = write_csv(tmp_path / "d.csv", "date,a,b\n2001-01-01,1.5,2\n2001-01-02,0,3\n2001-01-03,4,5\n")
        series = load_csv(path, "date", ["a", "b"])
        assert len(series) == 3
        assert series.values.tolist() == [[1.5, 2.0], [0.0, 3.0], [4.0, 5.0]]
        assert series.site_labels == ["a", "b"]

    def test_column_order_follows_request(self, tmp_path):
        path = write_csv(tmp_path / "d.csv", "date,a,b\n2001-01-01,1,2\n")
        assert load_csv(path, "date", ["b", "a"]).values.tolist() == [[2.0, 1.0]]

    def test_missing_values_dropped(self, tmp_path):
        path = write_csv(tmp_path / "d.csv", "date,a,b\n2001-01-01,1,2\n2001-01-02,NA,3\n2001-01-03,4,\n")
        series = load_csv(path, "date", ["a", "b"])
        assert len(series) == 1
        assert series.dropped_rows == 2

    def test_bad_cell_reports_line(self, tmp_path):
        path = write_csv(tmp_path / "d.csv", "date,a,b\n2001-01-01,1,2\n2001-01-02,x7,3\n")
        with pytest.raises(IngestionError, match="line 3, column 'a'"):
            load_csv(path, "date", ["a", "b"])

    def test_bad_date(self, tmp_path):
        path = write_csv(tmp_path / "d.csv", "date,a,b\n2001-01-01,1,2\nyesterday,1,3\n")
        with pytest.raises(IngestionError, match="line 3"):
            load_csv(path, "date", ["a", "b"])

    def test_missing_column(self, tmp_path):
        path = write_csv(tmp_path / "d.csv", "date,a\n2001-01-01,1\n")
        with pytest.raises(IngestionError, match="missing column"):
            load_csv(path, "date", ["a", "b"])

    def test_unsorted_dates_are_sorted(self, tmp_path):
        path = write_csv(tmp_path / "d.csv", "date,a,b\n2001-01-03,3,3\n2001-01-01,1,1\n2001-01-02,2,2\n")
        series = load_csv(path, "date", ["a", "b"])
        assert series.values[:, 0].tolist() == [1.0, 2.0, 3.0]
        assert series.dates.is_monotonic_increasing
        assert series.resorted_rows > 0

    def test_duplicate_dates(self, tmp_path):
        path = write_csv(tmp_path / "d.csv", "date,a,b\n2001-01-01,1,2\n2001-01-01,3,4\n")
        with pytest.raises(IngestionError, match="duplicate"):
            load_csv(path, "date", ["a", "b"])


class TestWeeklyMaxima:
    def test_two_full_weeks(self):
        weekly = weekly_maxima(daily_series(14))
        assert len(weekly) == 2
        assert weekly.values.tolist() == [[1.0, 1.0], [1.0, 1.0]]
        assert weekly.dates[1] == pd.Timestamp("2001-01-08")

    def test_incomplete_block_dropped(self):
        assert len(weekly_maxima(daily_series(10))) == 1

    def test_block_with_missing_day_dropped(self):
        series = daily_series(14)
        series = series.subset(np.arange(14) != 3)
        assert len(weekly_maxima(series)) == 1

    def test_maximum_per_column(self):
        values = np.column_stack([np.arange(7.0), -np.arange(7.0)])
        assert weekly_maxima(daily_series(7, values)).values.tolist() == [[6.0, 0.0]]

    def test_short_series(self):
        assert len(weekly_maxima(daily_series(5))) == 0


class TestSeason:
    def test_inclusive_bounds(self):
        series = daily_series(365)
        summer = season_filter(series, "06-01", "08-31")
        assert len(summer) == 92
        assert summer.dates[0] == pd.Timestamp("2001-06-01")
        assert summer.dates[-1] == pd.Timestamp("2001-08-31")

    def test_wraps_around_new_year(self):
        series = daily_series(365)
        winter = season_filter(series, "12-01", "02-28")
        kept = set(winter.dates.strftime("%m-%d"))
        assert {"12-01", "12-31", "01-01", "02-28"} <= kept
        assert "11-30" not in kept and "03-01" not in kept
        assert len(winter) == 31 + 31 + 28

    def test_invalid_month_day(self):
        with pytest.raises(DomainError):
            parse_month_day("13-01")
        with pytest.raises(DomainError):
            parse_month_day("june")


class TestExceedances:
    def test_comonotone_keeps_upper_tail(self):
        x = np.arange(1.0, 101.0)
        es = exceedance_set(daily_series(100, np.column_stack([x, x])), 0.7)
        assert es.thresholds == (70.0, 70.0)
        assert es.rows.shape[0] == 30
        assert np.all(es.excesses.max(axis=1) > 0)

    def test_either_coordinate_exceeds(self):
        x = np.arange(1.0, 101.0)
        es = exceedance_set(daily_series(100, np.column_stack([x, x[::-1]])), 0.7)
        assert es.rows.shape[0] == 60

    def test_empirical_quantile(self):
        assert empirical_quantile(np.arange(1.0, 11.0), 0.7) == 7.0
        assert empirical_quantile(np.arange(1.0, 11.0), 0.75) == 8.0

    def test_constant_column(self):
        values = np.column_stack([np.arange(20.0), np.ones(20)])
        with pytest.raises(IngestionError, match="constant"):
            exceedance_set(daily_series(20, values), 0.7)

    def test_argument_checks(self):
        x = np.arange(1.0, 21.0)
        series = daily_series(20, np.column_stack([x, x]))
        with pytest.raises(DomainError):
            exceedance_set(series, 1.0)
        with pytest.raises(DomainError):
            exceedance_set(daily_series(9, np.column_stack([x[:9], x[:9]])), 0.7)

    def test_sidecar(self, tmp_path):
        x = np.arange(1.0, 101.0)
        es = exceedance_set(daily_series(100, np.column_stack([x, x])), 0.7)
        path, sidecar = write_exceedances(es, tmp_path / "exceed.csv")
        assert sidecar == meta_path(path) == tmp_path / "exceed.meta.json"
        meta = read_meta(path)
        assert meta["thresholds"] == [70.0, 70.0]
        assert meta["retained"] == 30
        assert meta["total_n"] == 100
        assert read_sample(path).tolist() == es.excesses.tolist()

    def test_no_sidecar(self, tmp_path):
        assert read_meta(tmp_path / "plain.csv") is None


class TestReadSample:
    def test_non_numeric_cell(self, tmp_path):
        path = write_csv(tmp_path / "s.csv", "y1,y2\n1,2\n3,abc\n")
        with pytest.raises(IngestionError, match="line 3, column 'y2'"):
            read_sample(path)

    def test_falls_back_to_first_columns(self, tmp_path):
        path = write_csv(tmp_path / "s.csv", "u,v,w\n1,2,3\n")
        assert read_sample(path).tolist() == [[1.0, 2.0]]


class TestDataSourceManager:
    def _sites(self, tmp_path):
        root = tmp_path / "sites"
        root.mkdir()
        dates = pd.date_range("2001-01-01", periods=40, freq="D").strftime("%Y-%m-%d")
        rng = np.random.default_rng(0)
        north = pd.DataFrame({"date": dates, "ref": rng.gamma(2.0, size=40), "b": rng.gamma(2.0, size=40)})
        south = pd.DataFrame({"date": dates[5:], "c": rng.gamma(2.0, size=35)})
        north.to_csv(root / "north.csv", index=False)
        south.to_csv(root / "south.csv", index=False)
        return root

    def test_load_directory_joins_on_dates(self, tmp_path):
        series = DataSourceManager().load_directory(self._sites(tmp_path))
        assert series.site_labels == ["ref", "b", "c"]
        assert len(series) == 35

    def test_progress_goes_to_the_log(self, tmp_path, capsys, caplog):
        with caplog.at_level("INFO", logger="sbgp.data_source_manager"):
            DataSourceManager().load_directory(self._sites(tmp_path))
        assert capsys.readouterr().out == ""
        assert "Loaded 3 sites over 35 common dates" in caplog.text

    def test_duplicate_site_label(self, tmp_path):
        root = self._sites(tmp_path)
        (root / "zz.csv").write_text("date,c\n2001-01-10,1\n")
        with pytest.raises(IngestionError, match="already loaded"):
            DataSourceManager().load_directory(root)

    def test_empty_directory(self, tmp_path):
        with pytest.raises(IngestionError):
            DataSourceManager().load_directory(tmp_path)

    def test_batch_fit_records(self, tmp_path):
        db_url = f"sqlite:///{tmp_path / 'history.db'}"
        manager = DataSourceManager(db_url, record=True)
        series = manager.load_directory(self._sites(tmp_path))

        def fit_fn(data):
            return {"family": "sbgp", "theta": {"m1": float(data[:, 0].mean()), "m2": float(data[:, 1].mean())}}

        frame = manager.batch_fit(series, "ref", 0.7, fit_fn, workers=2, source="sites")
        assert frame["site"].tolist() == ["b", "c"]
        assert list(frame.columns) == ["site", "m1", "m2"]

        session = get_database(db_url).get_session()
        try:
            records = FitRecordService.get_history(session)
            assert {r.site for r in records} == {"b", "c"}
            assert all(r.threshold_level == 0.7 for r in records)
        finally:
            session.close()

    def test_unknown_reference(self, tmp_path):
        manager = DataSourceManager()
        series = manager.load_directory(self._sites(tmp_path))
        with pytest.raises(DomainError):
            list(manager.pairs_against(series, "nowhere"))
