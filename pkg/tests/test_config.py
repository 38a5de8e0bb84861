from pathlib import Path

import pytest

from riscsi.config import METHODS, ExperimentConfig, profile_defaults
from riscsi.numerics import ParameterError

ROOT = Path(__file__).resolve().parents[1]


def test_shipped_configs_match_profiles():
    assert ExperimentConfig.load(ROOT / "configs" / "desk.yaml").raw == profile_defaults("desk")
    assert ExperimentConfig.load(ROOT / "configs" / "paper.yaml").raw == profile_defaults("paper")


def test_paper_profile_values():
    raw = profile_defaults("paper")
    assert raw["geometry"] == {"num_bs": 16, "num_ris": 128, "num_active": 32, "active_policy": "even"}
    assert raw["samples"] == {"train": 90000, "val": 10000, "test": 10000}
    assert raw["training"]["epochs"] == 300
    assert raw["training"]["lr_breakpoints"] == [[0, 1e-3], [200, 1e-4]]
    assert raw["training"]["batch_size"] == 128
    assert raw["channel"]["paths_ub"] == raw["channel"]["paths_ur"] == raw["channel"]["paths_rb"] == 3


def test_desk_profile_values():
    cfg = ExperimentConfig.load()
    assert cfg.scenario.num_bs == 8 and cfg.scenario.num_ris == 32
    assert cfg.raw["geometry"]["num_active"] == 8
    assert cfg.raw["samples"] == {"train": 9000, "val": 1000, "test": 1000}
    assert cfg.plan.epochs == 50
    assert tuple(cfg.raw["methods"]) == METHODS


def test_overrides_and_partial_file(tmp_path):
    path = tmp_path / "c.yaml"
    path.write_text("seed: 7\ngeometry: {num_active: 4}\n")
    cfg = ExperimentConfig.load(path, overrides={"output": {"dir": "x"}})
    assert cfg.seed == 7
    assert cfg.raw["geometry"]["num_ris"] == 32 and cfg.raw["geometry"]["num_active"] == 4
    assert str(cfg.output_dir) == "x"


def test_config_hash_ignores_output_only():
    a = ExperimentConfig.load()
    b = ExperimentConfig.load(overrides={"output": {"dir": "elsewhere"}})
    c = ExperimentConfig.load(overrides={"seed": 1})
    assert a.config_hash == b.config_hash != c.config_hash


@pytest.mark.parametrize("override", [
    {"geometry": {"num_active": 40}},
    {"geometry": {"num_active": 0}},
    {"snr_db": []},
    {"samples": {"test": 0}},
    {"methods": ["chan_net"]},
    {"ratio_sweep": {"ratios": [0.1]}},
    {"ratio_sweep": {"ratios": [1.5]}},
    {"nmse_average": "median"},
    {"unknown_key": 1},
    {"geometry": 3},
])
def test_invalid_configs(override):
    with pytest.raises(ParameterError):
        ExperimentConfig.load(overrides=override)


def test_missing_file():
    with pytest.raises(FileNotFoundError):
        ExperimentConfig.load("/nonexistent/config.yaml")


def test_n1_for_ratio_and_pipeline_config():
    cfg = ExperimentConfig.load()
    assert [cfg.n1_for_ratio(r) for r in (0.125, 0.25, 0.5, 1.0)] == [4, 8, 16, 32]
    pc = cfg.pipeline_config((5, 15), 16)
    assert pc.train_snr_db == (5.0, 15.0) and pc.active.n1 == 16


def test_dump_reloads(tmp_path):
    cfg = ExperimentConfig.load(profile="paper")
    path = tmp_path / "dump.yaml"
    path.write_text(cfg.dump())
    assert ExperimentConfig.load(path).raw == cfg.raw
