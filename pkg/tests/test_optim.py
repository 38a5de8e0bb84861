import numpy as np
import pytest

from riscsi.nn import (
    AdamConfig,
    AdamState,
    Checkpoint,
    LayerSpec,
    NetworkSpec,
    NumericError,
    adam_step,
    step_schedule,
)


def _scalar_ckpt(w0=3.0):
    spec = NetworkSpec("q", (1,), (LayerSpec("dense", 1, 1),))
    return Checkpoint(spec, [{"W": np.array([[w0]]), "b": np.zeros(1)}], np.float64)


def _grads(ckpt, gw, gb=0.0):
    return [{"W": np.full_like(ckpt.params[0]["W"], gw), "b": np.full_like(ckpt.params[0]["b"], gb)}]


def test_zero_gradient_leaves_parameters():
    ckpt = _scalar_ckpt()
    adam_step(ckpt, _grads(ckpt, 0.0), AdamConfig(), 1, AdamState())
    assert ckpt.params[0]["W"][0, 0] == 3.0


def test_constant_gradient_step_bounded_by_lr():
    ckpt, state, cfg = _scalar_ckpt(), AdamState(), AdamConfig(lr=0.01)
    prev = ckpt.params[0]["W"][0, 0]
    for t in range(1, 200):
        adam_step(ckpt, _grads(ckpt, 0.37), cfg, t, state)
        w = ckpt.params[0]["W"][0, 0]
        assert abs(w - prev) <= cfg.lr * (1 + 1e-6)
        prev = w
    assert abs(prev - (3.0 - 199 * 0.01)) < 1e-6


def test_quadratic_loss_decreases():
    ckpt, state = _scalar_ckpt(2.0), AdamState()
    w = ckpt.params[0]["W"][0, 0]
    adam_step(ckpt, _grads(ckpt, 2 * w), AdamConfig(lr=0.1), 1, state)
    assert ckpt.params[0]["W"][0, 0] ** 2 < w ** 2


def test_non_finite_gradient_aborts():
    ckpt = _scalar_ckpt()
    with pytest.raises(NumericError, match="non-finite gradient"):
        adam_step(ckpt, _grads(ckpt, np.inf), AdamConfig(), 1, AdamState())
    assert ckpt.params[0]["W"][0, 0] == 3.0


def test_step_count_starts_at_one():
    ckpt = _scalar_ckpt()
    with pytest.raises(ValueError):
        adam_step(ckpt, _grads(ckpt, 1.0), AdamConfig(), 0, AdamState())


def test_lr_override():
    a, b = _scalar_ckpt(), _scalar_ckpt()
    adam_step(a, _grads(a, 1.0), AdamConfig(lr=1e-3), 1, AdamState(), lr=1e-1)
    adam_step(b, _grads(b, 1.0), AdamConfig(lr=1e-1), 1, AdamState())
    assert a.params[0]["W"][0, 0] == b.params[0]["W"][0, 0]


@pytest.mark.parametrize("kw", [dict(beta1=1.0), dict(beta2=0.0), dict(lr=0.0), dict(batch_size=0)])
def test_config_validation(kw):
    with pytest.raises(ValueError):
        AdamConfig(**kw)


def test_step_schedule():
    lr_at = step_schedule([(0, 1e-3), (200, 1e-4)])
    assert lr_at(0) == 1e-3 and lr_at(199) == 1e-3 and lr_at(200) == 1e-4 and lr_at(299) == 1e-4
    with pytest.raises(ValueError):
        step_schedule([(5, 1e-3)])
