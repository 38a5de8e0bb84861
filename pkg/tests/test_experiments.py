import numpy as np
import pytest

from riscsi.config import ExperimentConfig
from riscsi.experiments import (
    CSV_HEADER,
    ExperimentResult,
    ResultRow,
    model_dir,
    operating_points,
    sweep_ratio,
    sweep_snr,
    train_models,
)
from riscsi.nn import StateError

TINY = {
    "geometry": {"num_bs": 4, "num_ris": 8, "num_active": 2},
    "snr_db": [0.0, 10.0, 20.0],
    "ratio_sweep": {"ratios": [0.25, 0.5], "snr_db": [5.0, 15.0]},
    "samples": {"train": 64, "val": 32, "test": 400},
    "training": {"epochs": 1, "lr_breakpoints": [[0, 1.0e-3]]},
    "networks": {"de_hidden": [8], "irp_hidden": [8], "are_channels": 4, "are_hidden_layers": 1},
    "omp": {"sparsity": 2},
}


@pytest.fixture
def cfg(tmp_path):
    return ExperimentConfig.load(overrides=dict(TINY, output={"dir": str(tmp_path / "run")}))


def test_operating_points(cfg):
    assert operating_points(cfg, "snr") == [(0.0, 2, [0.0]), (10.0, 2, [10.0]), (20.0, 2, [20.0])]
    assert operating_points(cfg, "ratio") == [((5.0, 15.0), 2, [5.0, 15.0]), ((5.0, 15.0), 4, [5.0, 15.0])]
    sweep = dict(TINY["ratio_sweep"], train_snr="per-point")
    per_point = ExperimentConfig.load(overrides=dict(TINY, ratio_sweep=sweep))
    assert len(operating_points(per_point, "ratio")) == 4
    with pytest.raises(ValueError):
        operating_points(cfg, "time")


def test_ls_direct_sweep_oracle(cfg):
    result = sweep_snr(cfg, methods=["ls_direct"])
    for snr in (0.0, 10.0, 20.0):
        row = result.get("ls_direct", snr, 0.25)
        assert abs(row.nmse_mean / 10 ** (-snr / 10) - 1) < 0.05
        assert row.n_samples == 400 and row.nmse_stderr > 0


def test_zero_fill_floor_in_sweep(cfg):
    result = sweep_snr(cfg, methods=["ls"])
    assert all(r.nmse_mean >= 0.7 for r in result.rows)


def test_sweep_without_models_names_the_file(cfg):
    with pytest.raises(StateError, match="model.json"):
        sweep_snr(cfg, methods=["pipeline"])


def test_full_sweeps_after_training(cfg):
    models = train_models(cfg, "ratio")
    assert (model_dir(cfg, (5.0, 15.0), 4) / "irp.rckp").exists()
    result = sweep_ratio(cfg)
    methods = {r.method for r in result.rows}
    assert methods == {"ls_direct", "de_dnn", "ls", "ls_full", "omp", "pipeline"}
    assert sum(r.method == "ls_full" for r in result.rows) == 2
    assert {r.r for r in result.rows if r.method == "pipeline"} == {0.25, 0.5}
    for row in result.rows:
        assert row.nmse_mean >= 0
        assert row.wall_time_s == 0.0
        if row.method != "ls_full":
            assert row.r == row.extra["n1"] / 8
            assert row.extra["pilot_overhead"] == pytest.approx((row.extra["n1"] + 1) / 9)
    again = sweep_ratio(cfg, models)
    assert again.to_csv() == result.to_csv()


def test_csv_schema_and_order(tmp_path):
    rows = [ResultRow("omp", 10.0, 0.25, 0.5, 0.01, 100, 0), ResultRow("ls", 10.0, 0.25, 0.8, 0.01, 100, 0),
            ResultRow("ls", 0.0, 0.25, 0.9, 0.02, 100, 0)]
    result = ExperimentResult(rows)
    text = result.to_csv()
    lines = text.splitlines()
    assert lines[0] == ",".join(CSV_HEADER)
    assert [l.split(",")[:2] for l in lines[1:]] == [["ls", "0.0"], ["ls", "10.0"], ["omp", "10.0"]]
    assert ExperimentResult(rows[::-1]).to_csv() == text
    path = result.write(tmp_path / "out" / "r.csv")
    back = ExperimentResult.read_csv(path)
    assert back.sorted_rows() == result.sorted_rows()
    assert path.with_suffix(".json").exists()


def test_result_lookup():
    result = ExperimentResult([ResultRow("ls", 10.0, 0.25, 0.8, 0.01, 100, 0)])
    assert result.get("ls", 10, 0.25).nmse_mean == 0.8
    with pytest.raises(KeyError):
        result.get("ls", 5, 0.25)
