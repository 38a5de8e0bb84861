import numpy as np
import pytest
from hypothesis import given, strategies as st

from riscsi.nn import (
    Checkpoint,
    LayerSpec,
    NetworkSpec,
    NumericError,
    StateError,
    are_dnn_spec,
    backward,
    de_dnn_spec,
    forward,
    gradient_check,
    init_checkpoint,
    irp_dnn_spec,
    mse_loss,
    mse_loss_grad,
    update_bn_stats,
)
from riscsi.nn import layers as L
from riscsi.numerics import RngStream, ShapeError


def _net(input_shape, *layers):
    return NetworkSpec("test", input_shape, tuple(layers))


def _probe(spec, batch, seed=0, probes=12):
    gen = np.random.default_rng(seed)
    ckpt = init_checkpoint(spec, RngStream(seed), np.float64)
    # move batch-norm affine parameters away from the trivial (1, 0) point
    for layer, p in zip(spec.layers, ckpt.params):
        if layer.kind == "batchnorm":
            p["gamma"][...] = gen.uniform(0.5, 1.5, p["gamma"].shape)
            p["beta"][...] = gen.normal(0, 0.3, p["beta"].shape)
        if "b" in p:
            p["b"][...] = gen.normal(0, 0.1, p["b"].shape)
    x = gen.standard_normal((batch,) + spec.input_shape)
    return gradient_check(ckpt, x, gen, probes=probes)


LAYER_CASES = {
    "dense": _net((5,), LayerSpec("dense", 5, 3)),
    "conv": _net((4, 3, 2), LayerSpec("conv", 2, 3, 3)),
    "conv-5x5": _net((4, 6, 3), LayerSpec("conv", 3, 2, 5)),
    "batchnorm-dense": _net((4,), LayerSpec("dense", 4, 4), LayerSpec("batchnorm", 4)),
    "batchnorm-conv": _net((3, 3, 2), LayerSpec("conv", 2, 3, 3), LayerSpec("batchnorm", 3)),
    "relu": _net((6,), LayerSpec("dense", 6, 5), LayerSpec("relu"), LayerSpec("dense", 5, 2)),
    "residual": _net((3, 4, 2), LayerSpec("conv", 2, 2, 3), LayerSpec("residual")),
}


@pytest.mark.parametrize("case", sorted(LAYER_CASES))
def test_layer_gradients(case):
    errors = _probe(LAYER_CASES[case], batch=6)
    assert max(errors.values()) < 1e-3, errors


@pytest.mark.parametrize("spec", [de_dnn_spec(8), irp_dnn_spec(8, 24), are_dnn_spec(8, 8),
                                  de_dnn_spec(4, bn_before_relu=False)],
                         ids=["DE-DNN", "IRP-DNN", "ARE-DNN", "DE-DNN-relu-first"])
def test_network_gradients(spec):
    errors = _probe(spec, batch=4, probes=8)
    assert max(errors.values()) < 1e-3, {k: v for k, v in errors.items() if v >= 1e-3}


def test_table_sizes():
    de = de_dnn_spec(16)
    assert [l.out_size for l in de.layers if l.kind == "dense"] == [64, 128, 64, 32]
    assert de.input_shape == (32,)
    irp = irp_dnn_spec(32, 96)
    assert [l.out_size for l in irp.layers if l.kind == "dense"] == [128, 256, 256, 192]
    are = are_dnn_spec(16, 32)
    convs = [l for l in are.layers if l.kind == "conv"]
    assert len(convs) == 8 and all(l.kernel == 3 for l in convs)
    assert [l.out_size for l in convs] == [64] * 7 + [2]
    assert are.layers[-1].kind == "residual" and are.output_shape == (16, 32, 2)
    assert sum(l.kind == "batchnorm" for l in are.layers) == 7
    assert [l.kind for l in are.layers[:3]] == ["conv", "batchnorm", "relu"]


def test_relu_example():
    assert np.array_equal(L.relu_forward(np.array([-1.0, 0.0, 2.0])), [0, 0, 2])


def test_identity_dense():
    spec = _net((3,), LayerSpec("dense", 3, 3))
    ckpt = Checkpoint(spec, [{"W": np.eye(3, dtype=np.float32), "b": np.zeros(3, np.float32)}])
    x = np.random.default_rng(0).standard_normal((4, 3)).astype(np.float32)
    assert np.array_equal(forward(ckpt, x)[0], x)


def test_are_with_zero_branch_is_identity():
    spec = are_dnn_spec(4, 3, channels=5, hidden_layers=2)
    ckpt = init_checkpoint(spec, RngStream(0))
    for p in ckpt.params:
        for k in ("W", "b"):
            if k in p:
                p[k][...] = 0
    x = np.random.default_rng(1).standard_normal((2, 4, 3, 2)).astype(np.float32)
    for mode in ("infer", "train"):
        assert np.array_equal(forward(ckpt, x, mode)[0], x)


@given(st.integers(1, 6), st.integers(1, 6), st.integers(1, 4))
def test_conv_preserves_spatial_dims(h, w, c):
    spec = are_dnn_spec(h, w, channels=c, hidden_layers=1)
    out, _ = forward(init_checkpoint(spec, RngStream(0)), np.zeros((2, h, w, 2), np.float32))
    assert out.shape == (2, h, w, 2)


def test_conv_matches_direct_loop():
    gen = np.random.default_rng(2)
    x = gen.standard_normal((2, 4, 5, 3))
    W = gen.standard_normal((3, 3, 3, 2))
    b = gen.standard_normal(2)
    y, _ = L.conv_forward(x, W, b)
    xp = np.pad(x, ((0, 0), (1, 1), (1, 1), (0, 0)))
    ref = np.zeros((2, 4, 5, 2))
    for i in range(4):
        for j in range(5):
            ref[:, i, j] = np.einsum("bhwc,hwco->bo", xp[:, i:i + 3, j:j + 3], W) + b
    assert np.allclose(y, ref, atol=1e-12)


def test_batchnorm_train_normalises():
    gen = np.random.default_rng(3)
    x = (5 * gen.standard_normal((128, 7)) + 3).astype(np.float32)
    y, _ = L.batchnorm_forward(x, np.ones(7, np.float32), np.zeros(7, np.float32), True)
    y = y.astype(np.float64)
    assert np.max(np.abs(y.mean(axis=0))) < 1e-5
    assert np.max(np.abs(y.var(axis=0) - 1)) < 1e-5


def test_batchnorm_infer_uses_running_stats():
    x = np.array([[1.0, 2.0], [3.0, 4.0]])
    y, _ = L.batchnorm_forward(x, np.ones(2), np.zeros(2), False, np.array([1.0, 2.0]), np.array([4.0, 4.0]))
    assert np.allclose(y, (x - [1, 2]) / np.sqrt(4 + L.BN_EPS))


def test_running_stats_update():
    spec = _net((3,), LayerSpec("batchnorm", 3))
    ckpt = init_checkpoint(spec, RngStream(0), np.float64)
    x = np.random.default_rng(4).standard_normal((10, 3))
    _, cache = forward(ckpt, x, "train")
    update_bn_stats(ckpt, cache, momentum=0.9)
    p = ckpt.params[0]
    assert np.allclose(p["running_mean"], 0.1 * x.mean(axis=0))
    assert np.allclose(p["running_var"], 0.9 + 0.1 * x.var(axis=0, ddof=1))


def test_forward_infer_is_pure():
    spec = de_dnn_spec(4)
    ckpt = init_checkpoint(spec, RngStream(1))
    x = np.random.default_rng(5).standard_normal((9, 8))
    a, cache = forward(ckpt, x)
    assert cache is None
    assert np.array_equal(a, forward(ckpt, x)[0])


def test_forward_errors():
    ckpt = init_checkpoint(de_dnn_spec(2), RngStream(0))
    with pytest.raises(ShapeError):
        forward(ckpt, np.zeros((2, 5)))
    with pytest.raises(ValueError):
        forward(ckpt, np.zeros((2, 4)), "eval")
    bad = np.zeros((2, 4))
    bad[0, 0] = np.nan
    with pytest.raises(NumericError):
        forward(ckpt, bad)
    with pytest.raises(StateError):
        backward(ckpt, None, np.zeros((2, 4)))


def test_spec_chain_validation():
    with pytest.raises(ShapeError):
        _net((3,), LayerSpec("dense", 4, 2))
    with pytest.raises(ShapeError):
        _net((3, 3, 2), LayerSpec("conv", 2, 2, 2))
    with pytest.raises(ShapeError):
        _net((3,), LayerSpec("dense", 3, 2), LayerSpec("residual"))
    with pytest.raises(ValueError):
        LayerSpec("pool")


def test_spec_dict_roundtrip():
    spec = are_dnn_spec(4, 3, channels=5, hidden_layers=2)
    assert NetworkSpec.from_dict(spec.to_dict()) == spec


def test_zero_output_gradient_gives_zero_grads():
    spec = de_dnn_spec(3)
    ckpt = init_checkpoint(spec, RngStream(2), np.float64)
    x = np.random.default_rng(6).standard_normal((5, 6))
    out, cache = forward(ckpt, x, "train")
    grads, _ = backward(ckpt, cache, np.zeros_like(out))
    assert all(np.all(g[k] == 0) for g in grads for k in g)


def test_single_dense_closed_form_gradient():
    spec = _net((3,), LayerSpec("dense", 3, 2))
    ckpt = init_checkpoint(spec, RngStream(3), np.float64)
    gen = np.random.default_rng(7)
    x, y = gen.standard_normal((1, 3)), gen.standard_normal((1, 2))
    pred, cache = forward(ckpt, x, "train")
    grads, _ = backward(ckpt, cache, mse_loss_grad(pred, y))
    assert np.allclose(grads[0]["W"], 2 * np.outer(x[0], pred[0] - y[0]))
    assert np.allclose(grads[0]["b"], 2 * (pred[0] - y[0]))


def test_mse_examples():
    gen = np.random.default_rng(8)
    a = gen.standard_normal((4, 6))
    assert mse_loss(a, a) == 0
    assert mse_loss(a + 1, a) == pytest.approx(6)
    b = gen.standard_normal((4, 6))
    naive = sum(sum((a[i, j] - b[i, j]) ** 2 for j in range(6)) for i in range(4)) / 4
    assert mse_loss(a, b) == pytest.approx(naive, abs=1e-6)
    with pytest.raises(ShapeError):
        mse_loss(a, b[:, :5])


def test_init_is_deterministic():
    a = init_checkpoint(irp_dnn_spec(3, 4), RngStream(9))
    b = init_checkpoint(irp_dnn_spec(3, 4), RngStream(9))
    assert all(np.array_equal(p[k], q[k]) for p, q in zip(a.params, b.params) for k in p)


def test_identity_network_with_no_layers():
    ckpt = Checkpoint(NetworkSpec("id", (2, 3), ()), [])
    x = np.ones((4, 2, 3), np.float32)
    assert np.array_equal(forward(ckpt, x)[0], x)
