"""Quick oracle and property checks behind ``riscsi selftest``."""

from __future__ import annotations

import sys

import numpy as np

from .baselines import ls_cascaded, ls_direct
from .channel import ArrayGeometry, ChannelConfig, cascade, draw_channels, steering
from .metrics import ensemble_nmse, nmse_cascaded
from .nn import (
    Checkpoint,
    NetworkSpec,
    are_dnn_spec,
    de_dnn_spec,
    from_bytes,
    gradient_check,
    init_checkpoint,
    irp_dnn_spec,
    to_bytes,
)
from .numerics import RngStream
from .pilot import ActiveSet, build_schedule, dft_matrix, transmit
from .pipeline import PipelineModel, Scenario, draw_samples, flop_report, infer


def _steering_unit_norm():
    angles = np.random.default_rng(0).uniform(-np.pi / 2, np.pi / 2, 50)
    a = steering(ArrayGeometry(17), angles)
    return np.max(np.abs(np.linalg.norm(a, axis=-1) - 1)) < 1e-12


def _cascade_rows():
    ch = draw_channels(1, range(200), 4, 16, ChannelConfig())
    expected = np.stack([ch.h_rb[:, m, :] * ch.h_ur for m in range(4)], axis=1)
    return np.max(np.abs(ch.g - expected)) < 1e-12 and np.allclose(cascade(ch.h_rb, ch.h_ur), ch.g)


def _dft_orthogonal():
    phi = dft_matrix(8)
    return np.allclose(phi @ phi.conj().T, 8 * np.eye(8), atol=1e-12)


def _noise_free_ls():
    active = ActiveSet.evenly_spaced(16, 4)
    ch = draw_channels(2, range(20), 4, 16, ChannelConfig())
    obs = transmit(ch, build_schedule(active), 3.0, RngStream(0).generator(), noise_variance=0.0)
    h = ls_direct(obs).h_hat
    g_a = ls_cascaded(obs, h).g_hat_active
    return np.max(np.abs(h - ch.h_ub)) < 1e-10 and np.max(np.abs(g_a - ch.g[..., active.active])) < 1e-10


def _identity_pipeline():
    """Identity stubs for DE/ARE, and IRP empty since every element is active."""
    active = ActiveSet.evenly_spaced(8, 8)
    truth = draw_channels(3, range(10), 4, 8, ChannelConfig())
    obs = transmit(truth, build_schedule(active), 10.0, RngStream(0).generator(), noise_variance=0.0)
    ident = lambda name, shape: Checkpoint(NetworkSpec(name, shape, ()), [], np.float64)
    model = PipelineModel(active, ident("DE-DNN", (8,)), ident("ARE-DNN", (4, 8, 2)))
    est = infer(model, obs)
    return np.max(np.abs(est.g_hat - truth.g)) < 1e-10 and np.max(np.abs(est.h_ub_hat - truth.h_ub)) < 1e-10


def _ls_direct_oracle():
    active = ActiveSet.evenly_spaced(16, 4)
    scen = Scenario(4, 16)
    truth, obs, _ = draw_samples(scen, active, range(4000), 10.0, 5)
    mean, _ = ensemble_nmse(truth.h_ub, ls_direct(obs).h_hat, False)
    return abs(mean / 0.1 - 1) < 0.05


def _nmse_examples():
    x = np.random.default_rng(1).standard_normal((3, 4)) + 1j
    return (nmse_cascaded(x, x) == 0 and np.isclose(nmse_cascaded(x, 0 * x), 1)
            and np.isclose(nmse_cascaded(x, 2 * x), 1))


def _gradients():
    rng = np.random.default_rng(0)
    specs = [de_dnn_spec(3, (5, 6)), irp_dnn_spec(3, 2, (5, 4)), are_dnn_spec(2, 3, channels=3, hidden_layers=2)]
    for spec in specs:
        ckpt = init_checkpoint(spec, RngStream(0), np.float64)
        x = rng.standard_normal((4,) + spec.input_shape)
        if max(gradient_check(ckpt, x, rng, probes=6).values()) >= 1e-3:
            return False
    return True


def _checkpoint_roundtrip():
    ckpt = init_checkpoint(de_dnn_spec(4), RngStream(3))
    blob = to_bytes(ckpt)
    back = from_bytes(blob)
    return to_bytes(back) == blob and all(
        np.array_equal(a[k], b[k]) for a, b in zip(ckpt.params, back.params) for k in a)


def _flops_table_sizes():
    specs = {"DE": de_dnn_spec(16), "ARE": are_dnn_spec(16, 32), "IRP": irp_dnn_spec(32, 96)}
    return flop_report(specs).de == 20480


CHECKS = [
    ("steering vectors have unit norm", _steering_unit_norm),
    ("cascaded rows equal H_RB rows scaled by h_UR", _cascade_rows),
    ("DFT reflection pattern is orthogonal", _dft_orthogonal),
    ("noise-free LS recovers h_UB and G_A", _noise_free_ls),
    ("identity-stub pipeline reproduces ground truth", _identity_pipeline),
    ("LS direct NMSE matches noise-to-power ratio", _ls_direct_oracle),
    ("NMSE reference values", _nmse_examples),
    ("finite-difference gradients of all three networks", _gradients),
    ("checkpoint bytes round-trip", _checkpoint_roundtrip),
    ("DE-DNN MAC count at M=16", _flops_table_sizes),
]


def run_selftest(out=None) -> int:
    """Print one PASS/FAIL line per check; 0 when all pass."""
    out = out or sys.stdout
    failed = 0
    for name, check in CHECKS:
        try:
            ok = bool(check())
            detail = ""
        except Exception as exc:  # a crashing check is a failing check
            ok, detail = False, f" ({type(exc).__name__}: {exc})"
        failed += not ok
        print(f"{'PASS' if ok else 'FAIL'}  {name}{detail}", file=out)
    print(f"{len(CHECKS) - failed}/{len(CHECKS)} checks passed", file=out)
    return 0 if failed == 0 else 1
