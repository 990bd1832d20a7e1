import json
from pathlib import Path

import pandas as pd

from sbgp.workflow import create_workflow, run_pipeline

DATA = Path(__file__).resolve().parents[1] / "sbgp" / "data"


def test_graph_compiles():
    assert create_workflow() is not None


def test_pipeline_artifacts(tmp_path, weights_file):
    state = run_pipeline(
        csv_path=str(DATA / "rainfall_daily.csv"), columns=["a", "b"], weights_path=str(weights_file),
        out_dir=str(tmp_path / "out"), level=0.7, B=2, seed=5, levels=[0.5, 0.8], N_mc=1000,
    )
    artifacts = state["artifacts"]
    assert set(artifacts) == {"exceedances", "exceedances_meta", "fit", "bootstrap", "bootstrap_summary",
                              "chi_curve"}
    assert all(Path(p).exists() for p in artifacts.values())

    fitted = json.loads(Path(artifacts["fit"]).read_text())
    assert len(fitted["thresholds"]) == 2
    assert fitted["n"] == state["exceedances"].rows.shape[0]

    curves = pd.read_csv(artifacts["chi_curve"])
    assert list(curves.columns) == ["q", "empirical", "fitted", "lower", "upper"]
    assert (curves["lower"] <= curves["upper"]).all()
    assert len(pd.read_csv(artifacts["bootstrap"])) == 2


def test_pipeline_is_seeded(tmp_path, weights_file):
    kwargs = dict(csv_path=str(DATA / "rainfall_daily.csv"), columns=["a", "c"], weights_path=str(weights_file),
                  season="04-01:09-30", B=2, seed=9, levels=[0.6], N_mc=1000)
    first = run_pipeline(out_dir=str(tmp_path / "one"), **kwargs)
    second = run_pipeline(out_dir=str(tmp_path / "two"), **kwargs)
    assert Path(first["artifacts"]["chi_curve"]).read_text() == Path(second["artifacts"]["chi_curve"]).read_text()


def test_pipeline_logs_progress(tmp_path, weights_file, capsys, caplog):
    with caplog.at_level("INFO", logger="sbgp.workflow"):
        run_pipeline(csv_path=str(DATA / "rainfall_daily.csv"), columns=["a", "b"], weights_path=str(weights_file),
                     out_dir=str(tmp_path / "out"), B=2, seed=3, levels=[0.6], N_mc=1000)
    assert capsys.readouterr().out == ""
    assert "Starting sBGP pipeline (a vs b)" in caplog.text
    assert "Pipeline completed" in caplog.text
