import pytest

from sbgp.crud import FitRecordService, TrainingRunService, fit_record_to_dict
from sbgp.database import Database, get_database


@pytest.fixture
def session(tmp_path):
    db = Database(f"sqlite:///{tmp_path / 'test.db'}")
    db.create_tables()
    session = db.get_session()
    yield session
    session.close()


class TestFitRecords:
    def test_create_and_get(self, session):
        params = {"family": "sbgp", "theta": {"eta": 0.8, "xi1": 0.1}}
        record = FitRecordService.create(session, family="sbgp", params=params, source="x.csv",
                                         threshold_level=0.95, n=120)
        assert record.id is not None
        fetched = FitRecordService.get_by_id(session, record.id)
        assert fetched.params["theta"]["eta"] == 0.8
        assert fetched.n == 120

    def test_missing_id(self, session):
        assert FitRecordService.get_by_id(session, 999) is None

    def test_history_is_newest_first(self, session):
        for family in ("sbgp", "bgp", "sbgp"):
            FitRecordService.create(session, family=family, params={"theta": {}})
        history = FitRecordService.get_history(session)
        assert [r.id for r in history] == sorted((r.id for r in history), reverse=True)
        assert len(FitRecordService.get_history(session, family="bgp")) == 1
        assert len(FitRecordService.get_history(session, limit=2)) == 2

    def test_to_dict_expands_theta(self, session):
        record = FitRecordService.create(session, family="sbgp", params={"theta": {"eta": 0.7}}, site="b")
        row = fit_record_to_dict(record)
        assert row["eta"] == 0.7
        assert row["site"] == "b"
        assert row["source"] == ""
        assert row["created_at"]


class TestTrainingRuns:
    def test_create_and_filter(self, session):
        run = TrainingRunService.create(session, family="sbgp", steps=10, loss_lambda=0.5,
                                        best_validation_risk=1.25, config={"lr": 1e-3})
        TrainingRunService.create(session, family="bgp", steps=5, loss_lambda=0.0)
        assert TrainingRunService.get_by_id(session, run.id).config == {"lr": 1e-3}
        history = TrainingRunService.get_history(session, family="sbgp")
        assert [r.loss_lambda for r in history] == [0.5]


def test_singleton_follows_url(tmp_path):
    first = get_database(f"sqlite:///{tmp_path / 'a.db'}")
    assert get_database(f"sqlite:///{tmp_path / 'a.db'}") is first
    second = get_database(f"sqlite:///{tmp_path / 'b.db'}")
    assert second is not first
    assert (tmp_path / "b.db").exists()
