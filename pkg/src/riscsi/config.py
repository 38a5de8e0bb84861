"""
Experiment configuration.

Configs are YAML documents layered over a built-in profile (``desk`` or
``paper``); any key left out keeps the profile default. See
``configs/desk.yaml`` for the full schema with every default spelled out.
"""

from __future__ import annotations

import copy
import hashlib
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import yaml

from .channel import ChannelConfig
from .nn import AdamConfig
from .numerics import ParameterError
from .pipeline import PipelineConfig, Scenario, TrainingPlan

METHODS = ("ls_direct", "de_dnn", "ls", "ls_full", "omp", "pipeline")

_DESK = {
    "profile": "desk",
    "seed": 0,
    "geometry": {"num_bs": 8, "num_ris": 32, "num_active": 8, "active_policy": "even"},
    "channel": {"paths_ub": 3, "paths_ur": 3, "paths_rb": 3,
                "angle_low_deg": -90.0, "angle_high_deg": 90.0, "spacing_over_wavelength": 0.5},
    "noise_variance": 1.0,
    "snr_db": [0.0, 5.0, 10.0, 15.0, 20.0],
    "ratio_sweep": {"ratios": [0.125, 0.25, 0.5], "snr_db": [5.0, 15.0], "train_snr": "mixed"},
    "methods": list(METHODS),
    "samples": {"train": 9000, "val": 1000, "test": 1000},
    "training": {"epochs": 50, "lr_breakpoints": [[0, 1.0e-3], [45, 1.0e-4]], "batch_size": 128,
                 "beta1": 0.9, "beta2": 0.999, "epsilon": 1.0e-8, "bn_momentum": 0.9,
                 "bn_before_relu": True, "keep_best": True},
    "networks": {"de_hidden": [64, 128, 64], "irp_hidden": [128, 256, 256],
                 "are_channels": 64, "are_hidden_layers": 7},
    "omp": {"grid_factor": 2, "sparsity": 3},
    "nmse_average": "ensemble",
    "output": {"dir": "runs/desk", "timing": False},
}

_PAPER_OVERRIDES = {
    "profile": "paper",
    "geometry": {"num_bs": 16, "num_ris": 128, "num_active": 32},
    "samples": {"train": 90000, "val": 10000, "test": 10000},
    "training": {"epochs": 300, "lr_breakpoints": [[0, 1.0e-3], [200, 1.0e-4]]},
    "ratio_sweep": {"ratios": [0.125, 0.25, 0.375, 0.5], "train_snr": "per-point"},
    "output": {"dir": "runs/paper"},
}


def _merge(base: dict, override: dict, path="") -> dict:
    out = copy.deepcopy(base)
    for key, value in (override or {}).items():
        if key not in out:
            raise ParameterError(f"unknown config key {path + key!r}")
        if isinstance(out[key], dict):
            if not isinstance(value, dict):
                raise ParameterError(f"config key {path + key!r} must be a mapping")
            out[key] = _merge(out[key], value, path + key + ".")
        else:
            out[key] = copy.deepcopy(value)
    return out


def profile_defaults(profile: str = "desk") -> dict:
    if profile == "desk":
        return copy.deepcopy(_DESK)
    if profile == "paper":
        return _merge(_DESK, _PAPER_OVERRIDES)
    raise ParameterError(f"unknown profile {profile!r}")


@dataclass
class ExperimentConfig:
    """Validated view over a config mapping (``raw``)."""

    raw: dict

    def __post_init__(self):
        g, s = self.raw["geometry"], self.raw["samples"]
        if not 1 <= g["num_active"] <= g["num_ris"]:
            raise ParameterError("geometry.num_active must satisfy 1 <= N1 <= N")
        if not self.raw["snr_db"]:
            raise ParameterError("snr_db must list at least one SNR")
        if min(s.values()) < 1:
            raise ParameterError("sample counts must be >= 1")
        for r in self.raw["ratio_sweep"]["ratios"]:
            if not 0 < r <= 1:
                raise ParameterError(f"pilot ratio {r} outside (0, 1]")
            self.n1_for_ratio(r)
        unknown = set(self.raw["methods"]) - set(METHODS)
        if unknown:
            raise ParameterError(f"unknown methods {sorted(unknown)}; choose from {list(METHODS)}")
        if self.raw["ratio_sweep"]["train_snr"] not in ("mixed", "per-point"):
            raise ParameterError("ratio_sweep.train_snr must be 'mixed' or 'per-point'")
        if self.raw["nmse_average"] not in ("ensemble", "per-sample"):
            raise ParameterError("nmse_average must be 'ensemble' or 'per-sample'")

    @classmethod
    def load(cls, path=None, profile: str = "desk", overrides: dict | None = None) -> "ExperimentConfig":
        raw = profile_defaults(profile)
        if path is not None:
            path = Path(path)
            if not path.exists():
                raise FileNotFoundError(f"config file not found: {path}")
            doc = yaml.safe_load(path.read_text()) or {}
            doc_profile = doc.pop("profile", profile)
            raw = _merge(profile_defaults(doc_profile), doc)
        if overrides:
            raw = _merge(raw, overrides)
        return cls(raw)

    def dump(self) -> str:
        return yaml.safe_dump(self.raw, sort_keys=False)

    @property
    def seed(self) -> int:
        return int(self.raw["seed"])

    @property
    def output_dir(self) -> Path:
        return Path(self.raw["output"]["dir"])

    @property
    def config_hash(self) -> str:
        body = {k: v for k, v in self.raw.items() if k != "output"}
        blob = json.dumps(body, sort_keys=True, separators=(",", ":")).encode()
        return hashlib.sha256(blob).hexdigest()[:16]

    @property
    def scenario(self) -> Scenario:
        g, c = self.raw["geometry"], self.raw["channel"]
        channel = ChannelConfig(c["paths_ub"], c["paths_ur"], c["paths_rb"],
                                np.deg2rad(c["angle_low_deg"]), np.deg2rad(c["angle_high_deg"]),
                                c["spacing_over_wavelength"])
        return Scenario(g["num_bs"], g["num_ris"], channel, float(self.raw["noise_variance"]))

    @property
    def plan(self) -> TrainingPlan:
        t = self.raw["training"]
        adam = AdamConfig(t["lr_breakpoints"][0][1], t["beta1"], t["beta2"], t["epsilon"], t["batch_size"])
        return TrainingPlan(t["epochs"], tuple((int(e), float(lr)) for e, lr in t["lr_breakpoints"]),
                            adam, t["bn_momentum"], t["keep_best"])

    def n1_for_ratio(self, r: float) -> int:
        n = self.raw["geometry"]["num_ris"]
        n1 = int(round(r * n))
        if n1 < 1 or abs(n1 - r * n) > 1e-9:
            raise ParameterError(f"ratio {r} does not give an integer N1 for N = {n}")
        return n1

    def pipeline_config(self, train_snr_db, num_active: int | None = None) -> PipelineConfig:
        g, s, nets = self.raw["geometry"], self.raw["samples"], self.raw["networks"]
        snr = float(train_snr_db) if np.isscalar(train_snr_db) else tuple(float(v) for v in train_snr_db)
        return PipelineConfig(
            scenario=self.scenario,
            num_active=g["num_active"] if num_active is None else num_active,
            active_policy=g["active_policy"],
            train_snr_db=snr,
            n_train=s["train"], n_val=s["val"],
            plan=self.plan, seed=self.seed,
            bn_before_relu=self.raw["training"]["bn_before_relu"],
            are_channels=nets["are_channels"], are_hidden_layers=nets["are_hidden_layers"],
            de_hidden=tuple(nets["de_hidden"]), irp_hidden=tuple(nets["irp_hidden"]),
        )
