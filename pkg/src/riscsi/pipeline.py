"""
Three-stage CSI acquisition: dataset construction, sequential training,
online inference and complexity accounting.

Stage DE refines the LS direct-channel estimate, stage ARE denoises the LS
estimate of the active cascaded columns, and stage IRP predicts each BS
antenna's inactive cascaded entries from its active ones. Every stage is
trained on the live outputs of the stages before it.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field, replace

import numpy as np

from .baselines import ls_cascaded, ls_direct, scatter_columns
from .channel import ChannelConfig, ChannelRealization, draw_channels
from .nn import (
    AdamConfig,
    AdamState,
    Checkpoint,
    NetworkSpec,
    NumericError,
    StateError,
    adam_step,
    are_dnn_spec,
    backward,
    checkpoint_id,
    de_dnn_spec,
    forward,
    init_checkpoint,
    irp_dnn_spec,
    mse_loss,
    mse_loss_grad,
    step_schedule,
    update_bn_stats,
)
from .numerics import (
    ParameterError,
    Purpose,
    RngStream,
    ShapeError,
    mat_to_real,
    real_to_mat,
    real_to_vec,
    vec_to_real,
)
from .pilot import ActiveSet, PilotObservation, build_schedule, snr_to_power, transmit

log = logging.getLogger(__name__)

STAGES = ("DE", "ARE", "IRP")
SPLITS = {"train": 0, "val": 1, "test": 2}
NETWORK_NAMES = {"DE": "DE-DNN", "ARE": "ARE-DNN", "IRP": "IRP-DNN"}
_CHUNK = 2048


class TrainingError(RuntimeError):
    """Training diverged (non-finite loss or gradient)."""


@dataclass(frozen=True)
class Scenario:
    num_bs: int = 8
    num_ris: int = 32
    channel: ChannelConfig = ChannelConfig()
    noise_variance: float = 1.0


@dataclass
class StageDataset:
    stage: str
    inputs: np.ndarray
    labels: np.ndarray
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.stage not in STAGES:
            raise ParameterError(f"unknown stage {self.stage!r}")
        if len(self.inputs) != len(self.labels):
            raise ShapeError("inputs and labels must have the same number of samples")

    def __len__(self):
        return len(self.inputs)


@dataclass
class PipelineModel:
    active: ActiveSet
    de: Checkpoint | None = None
    are: Checkpoint | None = None
    irp: Checkpoint | None = None
    train_snr_db: float | tuple = 10.0
    config_hash: str = ""

    def require(self, *stages: str) -> None:
        missing = [s for s in stages if getattr(self, s.lower()) is None]
        if "IRP" in missing and self.active.n2 == 0:
            missing.remove("IRP")
        if missing:
            raise StateError(f"stage(s) {', '.join(missing)} not trained yet; train stages in order DE -> ARE -> IRP")

    def check_shapes(self, num_bs: int) -> None:
        n1, n2 = self.active.n1, self.active.n2
        expected = {"de": ((2 * num_bs,), (2 * num_bs,)),
                    "are": ((num_bs, n1, 2), (num_bs, n1, 2)),
                    "irp": ((2 * n1,), (2 * n2,))}
        for name, (shape_in, shape_out) in expected.items():
            ckpt = getattr(self, name)
            if ckpt is None:
                continue
            if ckpt.spec.input_shape != shape_in or ckpt.spec.output_shape != shape_out:
                raise ShapeError(f"{name} network maps {ckpt.spec.input_shape} -> {ckpt.spec.output_shape}, "
                                 f"expected {shape_in} -> {shape_out}")


@dataclass
class CsiEstimate:
    h_ub_hat: np.ndarray
    g_hat: np.ndarray
    h_ub_ls: np.ndarray
    g_a_ls: np.ndarray
    g_a_dnn: np.ndarray
    g_b_dnn: np.ndarray | None


@dataclass(frozen=True)
class TrainingPlan:
    """Epoch count, piecewise learning-rate plan and optimizer settings."""

    epochs: int = 50
    lr_breakpoints: tuple = ((0, 1e-3), (45, 1e-4))
    adam: AdamConfig = AdamConfig()
    bn_momentum: float = 0.9
    keep_best: bool = True


@dataclass
class EpochLog:
    epoch: int
    lr: float
    train_loss: float
    val_loss: float
    val_nmse: float
    seconds: float


# ----------------------------------------------------------------------------
# network application on complex data
# ----------------------------------------------------------------------------

def _apply(ckpt: Checkpoint, x_real: np.ndarray) -> np.ndarray:
    out = [forward(ckpt, x_real[i:i + _CHUNK], "infer")[0] for i in range(0, len(x_real), _CHUNK)]
    return np.concatenate(out) if out else np.zeros((0,) + ckpt.spec.output_shape, ckpt.dtype)


def apply_vector_net(ckpt: Checkpoint, x: np.ndarray) -> np.ndarray:
    """Run a dense network on complex vectors ``(B, n)`` packed as ``[re; im]``."""
    return real_to_vec(_apply(ckpt, vec_to_real(x, ckpt.dtype)))


def apply_matrix_net(ckpt: Checkpoint, x: np.ndarray) -> np.ndarray:
    """Run a convolutional network on complex matrices ``(B, M, N1)`` as two maps."""
    return real_to_mat(_apply(ckpt, mat_to_real(x, ckpt.dtype)))


def apply_row_net(ckpt: Checkpoint, g_a: np.ndarray) -> np.ndarray:
    """Predict inactive columns for every BS row of ``(B, M, N1)`` in one batch."""
    bsz, m, n1 = g_a.shape
    out = apply_vector_net(ckpt, g_a.reshape(bsz * m, n1))
    return out.reshape(bsz, m, -1)


# ----------------------------------------------------------------------------
# samples and datasets
# ----------------------------------------------------------------------------

def _snr_per_sample(snr_db, seed: int, indices, split: int) -> np.ndarray:
    if np.isscalar(snr_db):
        return np.full(len(indices), float(snr_db))
    choices = np.asarray(snr_db, dtype=float)
    base = RngStream(seed)
    return np.array([choices[base.derive(Purpose.SNR_SELECT, int(i), split).generator().integers(len(choices))]
                     for i in indices])


def draw_samples(scenario: Scenario, active: ActiveSet, indices, snr_db, seed: int,
                 split: str = "test"):
    """
    Realizations and pilot observations for the given sample indices.

    Sample i of a split always has the same channel and the same unit noise
    draw, whatever the SNR, so SNR sweeps use common random numbers.
    With a list of SNRs each sample picks one uniformly at random.
    """
    sub = SPLITS[split]
    indices = list(indices)
    truth = draw_channels(seed, indices, scenario.num_bs, scenario.num_ris, scenario.channel, sub)
    snr = _snr_per_sample(snr_db, seed, indices, sub)
    # a noise-free scenario (infinite SNR) keeps the powers of a unit-noise one
    power = snr_to_power(snr, scenario.noise_variance or 1.0)
    base = RngStream(seed)
    noise = [base.derive(Purpose.NOISE, i, sub) for i in indices]
    obs = transmit(truth, build_schedule(active), power, noise, scenario.noise_variance)
    return truth, obs, snr


def _row_choice(seed: int, indices, split: int, num_bs: int) -> np.ndarray:
    base = RngStream(seed)
    return np.array([base.derive(Purpose.ROW_SELECT, int(i), split).generator().integers(num_bs)
                     for i in indices], dtype=int)


def _upstream_ids(stage: str, upstream: PipelineModel, oracle_direct: bool) -> dict:
    needed = {"DE": (), "ARE": ("DE",), "IRP": ("DE", "ARE")}[stage]
    if oracle_direct:
        needed = tuple(s for s in needed if s != "DE")
    return {s: checkpoint_id(getattr(upstream, s.lower())) for s in needed}


def build_stage_dataset(stage: str, n_samples: int, snr_db, active: ActiveSet,
                        upstream: PipelineModel | None, rng: RngStream,
                        scenario: Scenario = Scenario(), split: str = "train",
                        oracle_direct: bool = False) -> StageDataset:
    """
    Input/label pairs for one stage.

    DE: ``<h_ls, h_UB>``. ARE: ``<G_A_ls, G_A>`` where ``G_A_ls`` strips the
    live DE output (or the true ``h_UB`` when ``oracle_direct``). IRP: one
    BS row ``m`` per sample, ``<row m of the live ARE output, row m of G_B>``.
    """
    if stage not in STAGES:
        raise ParameterError(f"unknown stage {stage!r}")
    upstream = upstream if upstream is not None else PipelineModel(active)
    if stage == "ARE" and not oracle_direct:
        upstream.require("DE")
    if stage == "IRP":
        upstream.require("ARE", *(() if oracle_direct else ("DE",)))
        if active.n2 == 0:
            raise ParameterError("no inactive elements: the prediction stage is empty")
    if upstream.active != active:
        raise ParameterError("upstream model was trained for a different active set")
    if n_samples < 1:
        raise ParameterError("n_samples must be >= 1")
    seed, sub = rng.seed, SPLITS[split]
    a_idx, b_idx = active.active, active.inactive
    inputs, labels, rows_all = [], [], []
    for start in range(0, n_samples, _CHUNK):
        idx = range(start, min(start + _CHUNK, n_samples))
        truth, obs, _ = draw_samples(scenario, active, idx, snr_db, seed, split)
        h_ls = ls_direct(obs).h_hat
        if stage == "DE":
            inputs.append(vec_to_real(h_ls))
            labels.append(vec_to_real(truth.h_ub))
            continue
        h_dir = truth.h_ub if oracle_direct else apply_vector_net(upstream.de, h_ls)
        g_a_ls = ls_cascaded(obs, h_dir).g_hat_active
        if stage == "ARE":
            inputs.append(mat_to_real(g_a_ls))
            labels.append(mat_to_real(truth.g[..., a_idx]))
            continue
        g_a_dnn = apply_matrix_net(upstream.are, g_a_ls)
        rows = _row_choice(seed, idx, sub, scenario.num_bs)
        pick = np.arange(len(rows))
        inputs.append(vec_to_real(g_a_dnn[pick, rows]))
        labels.append(vec_to_real(truth.g[pick, rows][:, b_idx]))
        rows_all.append(rows)
    provenance = {
        "stage": stage, "seed": seed, "split": split, "n_samples": n_samples,
        "snr_db": snr_db if np.isscalar(snr_db) else list(snr_db),
        "active": list(active.indices), "num_ris": active.num_elements,
        "num_bs": scenario.num_bs, "oracle_direct": oracle_direct,
        "upstream": _upstream_ids(stage, upstream, oracle_direct),
    }
    if stage == "IRP":
        provenance["rows"] = np.concatenate(rows_all).tolist()
    return StageDataset(stage, np.concatenate(inputs), np.concatenate(labels), provenance)


# ----------------------------------------------------------------------------
# training
# ----------------------------------------------------------------------------

def _evaluate(ckpt: Checkpoint, ds: StageDataset):
    pred = _apply(ckpt, ds.inputs).astype(np.float64)
    lab = ds.labels.astype(np.float64)
    err = np.sum((pred - lab) ** 2)
    return float(err / len(lab)), float(err / np.sum(lab ** 2))


def train_stage(train: StageDataset, val: StageDataset, spec: NetworkSpec,
                plan: TrainingPlan = TrainingPlan(), rng: RngStream = RngStream(0),
                init: Checkpoint | None = None):
    """
    Minimise the stage MSE with Adam over mini-batches.

    Returns ``(checkpoint, history)``. With ``plan.keep_best`` the checkpoint
    with the lowest validation loss is returned, otherwise the last one.
    """
    if NETWORK_NAMES[train.stage] != spec.name:
        raise ParameterError(f"{train.stage} dataset cannot train {spec.name}")
    if train.inputs.shape[1:] != spec.input_shape or train.labels.shape[1:] != spec.output_shape:
        raise ShapeError(f"dataset {train.inputs.shape[1:]} -> {train.labels.shape[1:]} does not fit "
                         f"{spec.name} {spec.input_shape} -> {spec.output_shape}")
    ckpt = init if init is not None else init_checkpoint(spec, rng.derive(Purpose.INIT, 0))
    ckpt = ckpt.copy()
    state = AdamState()
    lr_at = step_schedule(plan.lr_breakpoints)
    bsz = plan.adam.batch_size
    n = len(train)
    x_all = train.inputs.astype(ckpt.dtype)
    y_all = train.labels.astype(ckpt.dtype)
    best, best_loss = ckpt.copy(), np.inf
    history = []
    step = 0
    for epoch in range(plan.epochs):
        t0 = time.perf_counter()
        lr = lr_at(epoch)
        order = rng.derive(Purpose.SHUFFLE, epoch).generator().permutation(n)
        total, seen = 0.0, 0
        for start in range(0, n, bsz):
            batch = order[start:start + bsz]
            if len(batch) < 2 and n >= 2:
                continue  # batch-norm needs at least two samples
            x, y = x_all[batch], y_all[batch]
            try:
                pred, cache = forward(ckpt, x, "train")
                loss = mse_loss(pred, y)
                if not np.isfinite(loss):
                    raise NumericError("non-finite training loss")
                grads, _ = backward(ckpt, cache, mse_loss_grad(pred, y))
                step += 1
                adam_step(ckpt, grads, plan.adam, step, state, lr)
            except NumericError as exc:
                raise TrainingError(f"{spec.name} diverged at epoch {epoch}, step {step}: {exc}") from exc
            update_bn_stats(ckpt, cache, plan.bn_momentum)
            total += loss * len(batch)
            seen += len(batch)
        val_loss, val_nmse = _evaluate(ckpt, val)
        if not np.isfinite(val_loss):
            raise TrainingError(f"{spec.name}: non-finite validation loss at epoch {epoch}")
        entry = EpochLog(epoch, lr, total / max(seen, 1), val_loss, val_nmse, time.perf_counter() - t0)
        history.append(entry)
        log.info("%s epoch %d lr %.1e train %.5f val %.5f nmse %.5f (%.1fs)", spec.name, epoch, lr,
                 entry.train_loss, val_loss, val_nmse, entry.seconds)
        if val_loss < best_loss:
            best_loss, best = val_loss, ckpt.copy()
    return (best if plan.keep_best else ckpt), history


@dataclass(frozen=True)
class PipelineConfig:
    scenario: Scenario = Scenario()
    num_active: int = 8
    active_policy: str = "even"
    train_snr_db: float | tuple = 10.0
    n_train: int = 9000
    n_val: int = 1000
    plan: TrainingPlan = TrainingPlan()
    seed: int = 0
    bn_before_relu: bool = True
    are_channels: int = 64
    are_hidden_layers: int = 7
    de_hidden: tuple = (64, 128, 64)
    irp_hidden: tuple = (128, 256, 256)

    @property
    def active(self) -> ActiveSet:
        return ActiveSet.from_policy(self.active_policy, self.scenario.num_ris, self.num_active)

    def network_specs(self) -> dict:
        m, act = self.scenario.num_bs, self.active
        specs = {"DE": de_dnn_spec(m, self.de_hidden, self.bn_before_relu),
                 "ARE": are_dnn_spec(m, act.n1, self.are_channels, self.are_hidden_layers,
                                     bn_before_relu=self.bn_before_relu)}
        if act.n2:
            specs["IRP"] = irp_dnn_spec(act.n1, act.n2, self.irp_hidden, self.bn_before_relu)
        return specs


def train_pipeline(cfg: PipelineConfig, config_hash: str = "", histories: dict | None = None,
                   stages=STAGES, model: PipelineModel | None = None) -> PipelineModel:
    """
    Train DE, then ARE on live DE outputs, then IRP on live ARE outputs.

    ``stages`` restricts training to a subset; the upstream stages it needs
    must then already be present in ``model``.
    """
    active = cfg.active
    if model is None:
        model = PipelineModel(active, train_snr_db=cfg.train_snr_db, config_hash=config_hash)
    elif model.active != active:
        raise ParameterError("model was trained for a different active set")
    unknown = set(stages) - set(STAGES)
    if unknown:
        raise ParameterError(f"unknown stages {sorted(unknown)}")
    specs = cfg.network_specs()
    root = RngStream(cfg.seed)
    for k, stage in enumerate(STAGES):
        if stage not in specs or stage not in stages:
            continue
        kw = dict(snr_db=cfg.train_snr_db, active=active, upstream=model, rng=root, scenario=cfg.scenario)
        train = build_stage_dataset(stage, cfg.n_train, split="train", **kw)
        val = build_stage_dataset(stage, cfg.n_val, split="val", **kw)
        ckpt, hist = train_stage(train, val, specs[stage], cfg.plan, root.derive(Purpose.MISC, k))
        setattr(model, stage.lower(), ckpt)
        if histories is not None:
            histories[stage] = hist
    model.check_shapes(cfg.scenario.num_bs)
    return model


# ----------------------------------------------------------------------------
# inference and complexity
# ----------------------------------------------------------------------------

def infer(model: PipelineModel, obs: PilotObservation) -> CsiEstimate:
    """
    Online chain: LS direct -> DE -> strip direct -> LS active -> ARE ->
    IRP on every BS row -> reassemble the active/inactive columns.
    Accepts one observation or a batch.
    """
    model.require("DE", "ARE", "IRP")
    if obs.schedule.active != model.active:
        raise ParameterError("observation schedule does not match the model's active set")
    single = obs.y.ndim == 2
    if single:
        obs = replace(obs, y=obs.y[None], power=np.atleast_1d(obs.power))
    h_ls = ls_direct(obs).h_hat
    h_dnn = apply_vector_net(model.de, h_ls)
    g_a_ls = ls_cascaded(obs, h_dnn).g_hat_active
    g_a_dnn = apply_matrix_net(model.are, g_a_ls)
    g_b_dnn = apply_row_net(model.irp, g_a_dnn) if model.active.n2 else None
    g_hat = scatter_columns(g_a_dnn, g_b_dnn, model.active)
    est = CsiEstimate(h_dnn, g_hat, h_ls, g_a_ls, g_a_dnn, g_b_dnn)
    if single:
        est = CsiEstimate(*(None if v is None else v[0] for v in
                            (est.h_ub_hat, est.g_hat, est.h_ub_ls, est.g_a_ls, est.g_a_dnn, est.g_b_dnn)))
    return est


@dataclass(frozen=True)
class FlopReport:
    """Multiply-accumulate counts per stage for one channel estimate."""

    de: int
    are_ls: int
    are_conv: int
    irp_per_row: int
    num_bs: int

    @property
    def are(self) -> int:
        return self.are_ls + self.are_conv

    @property
    def irp(self) -> int:
        return self.num_bs * self.irp_per_row

    @property
    def total(self) -> int:
        return self.de + self.are + self.irp

    def as_dict(self) -> dict:
        return {"de": self.de, "are_ls": self.are_ls, "are_conv": self.are_conv, "are": self.are,
                "irp_per_row": self.irp_per_row, "irp": self.irp, "total": self.total}


def dense_macs(spec: NetworkSpec) -> int:
    return sum(l.in_size * l.out_size for l in spec.layers if l.kind == "dense")


def conv_macs_per_position(spec: NetworkSpec) -> int:
    return sum(l.kernel ** 2 * l.in_size * l.out_size for l in spec.layers if l.kind == "conv")


def flop_report(model_or_specs, num_bs: int | None = None) -> FlopReport:
    """
    DE: sum of consecutive layer-width products. ARE: ``M N1^2`` for the LS
    correlation plus ``M N1 sum K^2 F_in F_out`` over conv layers. IRP: ``M``
    times the per-row dense count.
    """
    if isinstance(model_or_specs, PipelineModel):
        specs = {s: getattr(model_or_specs, s.lower()) for s in STAGES}
        specs = {k: v.spec for k, v in specs.items() if v is not None}
    else:
        specs = dict(model_or_specs)
    are = specs["ARE"]
    m, n1 = are.input_shape[0], are.input_shape[1]
    if num_bs is not None and num_bs != m:
        raise ShapeError(f"ARE network is built for M={m}, not {num_bs}")
    return FlopReport(
        de=dense_macs(specs["DE"]),
        are_ls=m * n1 * n1,
        are_conv=m * n1 * conv_macs_per_position(are),
        irp_per_row=dense_macs(specs["IRP"]) if "IRP" in specs else 0,
        num_bs=m,
    )
