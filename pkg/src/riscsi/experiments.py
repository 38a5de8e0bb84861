"""
Monte-Carlo sweeps over SNR and pilot-overhead ratio, model training for
their operating points, and result persistence.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .baselines import ls_direct, ls_full, ls_zero_fill, omp_cascaded
from .config import ExperimentConfig
from .dataio import load_model, save_model
from .metrics import ensemble_nmse
from .nn import StateError
from .pilot import ActiveSet
from .pipeline import PipelineModel, draw_samples, infer, train_pipeline

log = logging.getLogger(__name__)

CSV_HEADER = ("method", "snr_db", "r", "nmse_mean", "nmse_stderr", "n_samples", "seed", "wall_time_s")
MODEL_METHODS = {"de_dnn", "pipeline"}


@dataclass(frozen=True)
class ResultRow:
    method: str
    snr_db: float
    r: float
    nmse_mean: float
    nmse_stderr: float
    n_samples: int
    seed: int
    wall_time_s: float = 0.0
    extra: dict = field(default_factory=dict, compare=False)

    def sort_key(self):
        return (self.method, self.r, self.snr_db)


@dataclass
class ExperimentResult:
    rows: list = field(default_factory=list)

    def sorted_rows(self) -> list:
        return sorted(self.rows, key=ResultRow.sort_key)

    def get(self, method: str, snr_db: float, r: float) -> ResultRow:
        for row in self.rows:
            if row.method == method and np.isclose(row.snr_db, snr_db) and np.isclose(row.r, r):
                return row
        raise KeyError((method, snr_db, r))

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(CSV_HEADER)
        for row in self.sorted_rows():
            writer.writerow([row.method, repr(float(row.snr_db)), repr(float(row.r)),
                             repr(float(row.nmse_mean)), repr(float(row.nmse_stderr)),
                             row.n_samples, row.seed, repr(float(row.wall_time_s))])
        return buf.getvalue()

    def to_json(self) -> str:
        rows = []
        for row in self.sorted_rows():
            d = asdict(row)
            d.update(d.pop("extra"))
            rows.append(d)
        return json.dumps(rows, indent=2) + "\n"

    def write(self, path) -> Path:
        """Write ``<path>`` as CSV and ``<path>.json`` as its JSON mirror (plus any extra columns)."""
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(self.to_csv())
        path.with_suffix(".json").write_text(self.to_json())
        return path

    @classmethod
    def read_csv(cls, path) -> "ExperimentResult":
        rows = []
        with open(path, newline="") as fh:
            for rec in csv.DictReader(fh):
                rows.append(ResultRow(rec["method"], float(rec["snr_db"]), float(rec["r"]),
                                      float(rec["nmse_mean"]), float(rec["nmse_stderr"]),
                                      int(rec["n_samples"]), int(rec["seed"]), float(rec["wall_time_s"])))
        return cls(rows)


# ----------------------------------------------------------------------------
# operating points and model storage
# ----------------------------------------------------------------------------

def snr_tag(train_snr) -> str:
    if np.isscalar(train_snr):
        return f"snr{float(train_snr):g}"
    return "mixed" + "_".join(f"{float(s):g}" for s in train_snr)


def model_dir(cfg: ExperimentConfig, train_snr, n1: int) -> Path:
    return cfg.output_dir / "models" / f"{snr_tag(train_snr)}_n1-{n1}"


def operating_points(cfg: ExperimentConfig, sweep: str):
    """``[(train_snr, n1, eval_snrs)]`` needed by a sweep."""
    if sweep == "snr":
        n1 = cfg.raw["geometry"]["num_active"]
        return [(float(s), n1, [float(s)]) for s in cfg.raw["snr_db"]]
    if sweep == "ratio":
        rs = cfg.raw["ratio_sweep"]
        snrs = [float(s) for s in rs["snr_db"]]
        points = []
        for r in rs["ratios"]:
            n1 = cfg.n1_for_ratio(r)
            if rs["train_snr"] == "mixed":
                points.append((tuple(snrs), n1, snrs))
            else:
                points.extend((s, n1, [s]) for s in snrs)
        return points
    raise ValueError(f"unknown sweep {sweep!r}")


def train_models(cfg: ExperimentConfig, sweep: str = "snr", save: bool = True) -> dict:
    """Train (and optionally save) one pipeline per operating point of ``sweep``."""
    models = {}
    for train_snr, n1, _ in operating_points(cfg, sweep):
        log.info("training pipeline: train SNR %s, N1 = %d", train_snr, n1)
        model = train_pipeline(cfg.pipeline_config(train_snr, n1), cfg.config_hash)
        if save:
            save_model(model, model_dir(cfg, train_snr, n1))
        models[(train_snr, n1)] = model
    return models


def load_models(cfg: ExperimentConfig, sweep: str) -> dict:
    models = {}
    for train_snr, n1, _ in operating_points(cfg, sweep):
        directory = model_dir(cfg, train_snr, n1)
        try:
            models[(train_snr, n1)] = load_model(directory)
        except FileNotFoundError as exc:
            raise StateError(f"missing trained model: {exc}; run `riscsi train` first") from exc
    return models


# ----------------------------------------------------------------------------
# evaluation
# ----------------------------------------------------------------------------

def evaluate_cell(cfg: ExperimentConfig, methods, snr_db: float, n1: int,
                  model: PipelineModel | None) -> list:
    """NMSE rows for every method at one (SNR, N1) point on the shared test set."""
    scen = cfg.scenario
    g = cfg.raw["geometry"]
    active = ActiveSet.from_policy(g["active_policy"], scen.num_ris, n1)
    n_test, seed = cfg.raw["samples"]["test"], cfg.seed
    mode = cfg.raw["nmse_average"]
    timing = cfg.raw["output"]["timing"]
    omp_cfg = cfg.raw["omp"]
    r = active.ratio

    t0 = time.perf_counter()
    truth, obs, _ = draw_samples(scen, active, range(n_test), snr_db, seed, "test")
    h_ls = ls_direct(obs).h_hat
    draw_time = time.perf_counter() - t0
    rows = []

    def add(method, target, estimate, matrix, started, ratio=r):
        mean, stderr = ensemble_nmse(target, estimate, matrix, mode)
        elapsed = (time.perf_counter() - started + draw_time) if timing else 0.0
        rows.append(ResultRow(method, float(snr_db), float(ratio), mean, stderr, n_test, seed, elapsed,
                              {"n1": active.n1, "pilot_overhead": (active.n1 + 1) / (active.num_elements + 1)}))

    if MODEL_METHODS & set(methods) and model is None:
        raise StateError(f"methods {sorted(MODEL_METHODS & set(methods))} need a trained model")
    for method in methods:
        t = time.perf_counter()
        if method == "ls_direct":
            add(method, truth.h_ub, h_ls, False, t)
        elif method == "de_dnn":
            add(method, truth.h_ub, infer(model, obs).h_ub_hat, False, t)
        elif method == "ls":
            add(method, truth.g, ls_zero_fill(obs, h_ls), True, t)
        elif method == "omp":
            est = omp_cascaded(obs, h_ls, omp_cfg["grid_factor"] * scen.num_ris, omp_cfg["sparsity"])
            add(method, truth.g, est, True, t)
        elif method == "pipeline":
            add(method, truth.g, infer(model, obs).g_hat, True, t)
        elif method == "ls_full":
            full = ActiveSet.evenly_spaced(scen.num_ris, scen.num_ris)
            truth_f, obs_f, _ = draw_samples(scen, full, range(n_test), snr_db, seed, "test")
            est = ls_full(obs_f, ls_direct(obs_f).h_hat)
            mean, stderr = ensemble_nmse(truth_f.g, est, True, mode)
            elapsed = (time.perf_counter() - t) if timing else 0.0
            rows.append(ResultRow(method, float(snr_db), 1.0, mean, stderr, n_test, seed, elapsed,
                                  {"n1": full.n1, "pilot_overhead": 1.0}))
        else:
            raise ValueError(f"unknown method {method!r}")
    return rows


def _sweep(cfg: ExperimentConfig, sweep: str, models: dict | None, methods) -> ExperimentResult:
    methods = list(cfg.raw["methods"] if methods is None else methods)
    need_models = bool(MODEL_METHODS & set(methods))
    if need_models and models is None:
        models = load_models(cfg, sweep)
    result = ExperimentResult()
    seen_full = set()
    for train_snr, n1, eval_snrs in operating_points(cfg, sweep):
        model = models.get((train_snr, n1)) if need_models else None
        if need_models and model is None:
            raise StateError(f"no trained model for train SNR {train_snr}, N1 = {n1}")
        for snr in eval_snrs:
            cell_methods = [m for m in methods if not (m == "ls_full" and snr in seen_full)]
            if "ls_full" in cell_methods:
                seen_full.add(snr)
            result.rows.extend(evaluate_cell(cfg, cell_methods, snr, n1, model))
    return result


def sweep_snr(cfg: ExperimentConfig, models: dict | None = None, methods=None) -> ExperimentResult:
    """NMSE versus SNR at the configured ``N1``; one pipeline per SNR."""
    return _sweep(cfg, "snr", models, methods)


def sweep_ratio(cfg: ExperimentConfig, models: dict | None = None, methods=None) -> ExperimentResult:
    """NMSE versus pilot ratio ``r = N1 / N`` at the ratio-sweep SNRs."""
    return _sweep(cfg, "ratio", models, methods)
