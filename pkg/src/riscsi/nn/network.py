"""
Sequential network descriptions, parameter checkpoints, and whole-network
forward/backward passes.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass, field

import numpy as np

from ..numerics import ShapeError, _as_generator
from . import layers as L

KINDS = ("dense", "conv", "batchnorm", "relu", "residual")
TRAINABLE = {"dense": ("W", "b"), "conv": ("W", "b"), "batchnorm": ("gamma", "beta")}
BUFFERS = {"batchnorm": ("running_mean", "running_var")}


class NumericError(ArithmeticError):
    """Raised on non-finite activations, losses or gradients."""


class StateError(RuntimeError):
    """Raised when an operation is called without its prerequisites."""


@dataclass(frozen=True)
class LayerSpec:
    """
    One layer. ``dense``: ``in_size -> out_size`` units; ``conv``: ``in_size ->
    out_size`` channels with a ``kernel x kernel`` zero-padded window;
    ``batchnorm``: ``in_size`` features; ``relu`` and ``residual`` carry no
    sizes (``residual`` emits ``network_input - x``).
    """

    kind: str
    in_size: int = 0
    out_size: int = 0
    kernel: int = 0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown layer kind {self.kind!r}")

    def to_dict(self) -> dict:
        d = {"kind": self.kind}
        if self.kind in ("dense", "conv", "batchnorm"):
            d["in_size"] = self.in_size
        if self.kind in ("dense", "conv"):
            d["out_size"] = self.out_size
        if self.kind == "conv":
            d["kernel"] = self.kernel
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "LayerSpec":
        return cls(d["kind"], d.get("in_size", 0), d.get("out_size", 0), d.get("kernel", 0))


def _propagate(shape: tuple, layer: LayerSpec, input_shape: tuple) -> tuple:
    if layer.kind == "dense":
        if len(shape) != 1 or shape[0] != layer.in_size:
            raise ShapeError(f"dense expects ({layer.in_size},), got {shape}")
        return (layer.out_size,)
    if layer.kind == "conv":
        if len(shape) != 3 or shape[2] != layer.in_size:
            raise ShapeError(f"conv expects (H, W, {layer.in_size}), got {shape}")
        if layer.kernel < 1 or layer.kernel % 2 == 0:
            raise ShapeError("conv kernel must be a positive odd integer")
        return shape[:2] + (layer.out_size,)
    if layer.kind == "batchnorm":
        if shape[-1] != layer.in_size:
            raise ShapeError(f"batchnorm expects {layer.in_size} features, got {shape}")
        return shape
    if layer.kind == "residual":
        if shape != input_shape:
            raise ShapeError(f"residual branch output {shape} != network input {input_shape}")
        return shape
    return shape


@dataclass(frozen=True)
class NetworkSpec:
    name: str
    input_shape: tuple
    layers: tuple

    def __post_init__(self):
        object.__setattr__(self, "input_shape", tuple(int(s) for s in self.input_shape))
        object.__setattr__(self, "layers", tuple(self.layers))
        self.output_shape  # validates the chain

    @property
    def output_shape(self) -> tuple:
        shape = self.input_shape
        for layer in self.layers:
            shape = _propagate(shape, layer, self.input_shape)
        return shape

    def to_dict(self) -> dict:
        return {"name": self.name, "input_shape": list(self.input_shape),
                "layers": [l.to_dict() for l in self.layers]}

    @classmethod
    def from_dict(cls, d: dict) -> "NetworkSpec":
        return cls(d["name"], tuple(d["input_shape"]), tuple(LayerSpec.from_dict(l) for l in d["layers"]))


def _hidden_block(kind, n_in, n_out, bn_before_relu, kernel=0):
    main = LayerSpec(kind, n_in, n_out, kernel)
    bn = LayerSpec("batchnorm", n_out)
    relu = LayerSpec("relu")
    return [main, bn, relu] if bn_before_relu else [main, relu, bn]


def mlp_spec(name, sizes, bn_before_relu=True) -> NetworkSpec:
    layers = []
    for a, b in zip(sizes[:-2], sizes[1:-1]):
        layers += _hidden_block("dense", a, b, bn_before_relu)
    layers.append(LayerSpec("dense", sizes[-2], sizes[-1]))
    return NetworkSpec(name, (sizes[0],), tuple(layers))


def de_dnn_spec(m: int, hidden=(64, 128, 64), bn_before_relu=True) -> NetworkSpec:
    """Direct-channel refiner: 2M -> 64 -> 128 -> 64 -> 2M."""
    return mlp_spec("DE-DNN", (2 * m, *hidden, 2 * m), bn_before_relu)


def irp_dnn_spec(n1: int, n2: int, hidden=(128, 256, 256), bn_before_relu=True) -> NetworkSpec:
    """Inactive-column predictor acting on one BS-antenna row: 2N1 -> ... -> 2N2."""
    return mlp_spec("IRP-DNN", (2 * n1, *hidden, 2 * n2), bn_before_relu)


def are_dnn_spec(m: int, n1: int, channels: int = 64, hidden_layers: int = 7, kernel: int = 3,
                 bn_before_relu=True) -> NetworkSpec:
    """Residual denoiser over ``M x N1 x 2`` maps; the branch estimates the noise."""
    layers = []
    c_in = 2
    for _ in range(hidden_layers):
        layers += _hidden_block("conv", c_in, channels, bn_before_relu, kernel)
        c_in = channels
    layers.append(LayerSpec("conv", c_in, 2, kernel))
    layers.append(LayerSpec("residual"))
    return NetworkSpec("ARE-DNN", (m, n1, 2), tuple(layers))


@dataclass
class Checkpoint:
    """Parameters of one network; ``params[i]`` holds the arrays of layer i."""

    spec: NetworkSpec
    params: list = field(default_factory=list)
    dtype: np.dtype = np.dtype(np.float32)

    def __post_init__(self):
        if not self.params:
            self.params = [dict() for _ in self.spec.layers]
        if len(self.params) != len(self.spec.layers):
            raise ShapeError("one parameter dict per layer is required")
        self.dtype = np.dtype(self.dtype)

    def astype(self, dtype) -> "Checkpoint":
        return Checkpoint(self.spec, [{k: v.astype(dtype) for k, v in p.items()} for p in self.params], dtype)

    def copy(self) -> "Checkpoint":
        return Checkpoint(self.spec, copy.deepcopy(self.params), self.dtype)

    def trainable(self):
        """Yield ``(layer_index, name, array)`` in declaration order."""
        for i, layer in enumerate(self.spec.layers):
            for name in TRAINABLE.get(layer.kind, ()):
                yield i, name, self.params[i][name]

    def num_parameters(self) -> int:
        return sum(a.size for _, _, a in self.trainable())


def _feeds_relu(spec: NetworkSpec, i: int) -> bool:
    for nxt in spec.layers[i + 1:]:
        if nxt.kind == "relu":
            return True
        if nxt.kind != "batchnorm":
            return False
    return False


def init_checkpoint(spec: NetworkSpec, rng, dtype=np.float32) -> Checkpoint:
    """He-uniform weights before ReLU, Glorot-uniform otherwise; zero biases."""
    gen = _as_generator(rng)
    params = []
    for i, layer in enumerate(spec.layers):
        if layer.kind in ("dense", "conv"):
            k2 = layer.kernel ** 2 if layer.kind == "conv" else 1
            fan_in, fan_out = layer.in_size * k2, layer.out_size * k2
            limit = np.sqrt(6.0 / fan_in) if _feeds_relu(spec, i) else np.sqrt(6.0 / (fan_in + fan_out))
            shape = ((layer.in_size, layer.out_size) if layer.kind == "dense"
                     else (layer.kernel, layer.kernel, layer.in_size, layer.out_size))
            params.append({"W": gen.uniform(-limit, limit, shape).astype(dtype),
                           "b": np.zeros(layer.out_size, dtype)})
        elif layer.kind == "batchnorm":
            n = layer.in_size
            params.append({"gamma": np.ones(n, dtype), "beta": np.zeros(n, dtype),
                           "running_mean": np.zeros(n, dtype), "running_var": np.ones(n, dtype)})
        else:
            params.append({})
    return Checkpoint(spec, params, dtype)


@dataclass
class ForwardCache:
    inputs: list
    extras: list


def forward(ckpt: Checkpoint, x: np.ndarray, mode: str = "infer"):
    """
    Evaluate the network on a batch ``(B, *input_shape)``.

    Returns ``(output, cache)``; ``cache`` is ``None`` in ``"infer"`` mode.
    BatchNorm uses batch statistics in ``"train"`` mode and running
    statistics in ``"infer"`` mode.
    """
    if mode not in ("train", "infer"):
        raise ValueError(f"mode must be 'train' or 'infer', got {mode!r}")
    spec = ckpt.spec
    if tuple(x.shape[1:]) != spec.input_shape:
        raise ShapeError(f"{spec.name} expects input (B, {spec.input_shape}), got {x.shape}")
    train = mode == "train"
    x = np.asarray(x, dtype=ckpt.dtype)
    x0 = x
    inputs, extras = [], []
    for layer, p in zip(spec.layers, ckpt.params):
        inputs.append(x)
        extra = None
        if layer.kind == "dense":
            x = L.dense_forward(x, p["W"], p["b"])
        elif layer.kind == "conv":
            x, extra = L.conv_forward(x, p["W"], p["b"])
        elif layer.kind == "batchnorm":
            x, extra = L.batchnorm_forward(x, p["gamma"], p["beta"], train,
                                           p["running_mean"], p["running_var"])
        elif layer.kind == "relu":
            x = L.relu_forward(x)
        elif layer.kind == "residual":
            x = x0 - x
        extras.append(extra if train else None)
    if not np.all(np.isfinite(x)):
        raise NumericError(f"{spec.name}: non-finite activation in forward pass")
    if not train:
        return x, None
    return x, ForwardCache(inputs, extras)


def backward(ckpt: Checkpoint, cache: ForwardCache | None, grad_out: np.ndarray,
             need_input_grad: bool = False):
    """
    Reverse-mode pass. Returns ``(grads, grad_input)`` where ``grads`` mirrors
    ``ckpt.params`` (trainable entries only) and ``grad_input`` is ``None``
    unless requested.
    """
    if cache is None:
        raise StateError("backward needs the cache from forward(..., mode='train')")
    spec = ckpt.spec
    grads = [dict() for _ in spec.layers]
    g = np.asarray(grad_out, dtype=ckpt.dtype)
    g_input = np.zeros_like(cache.inputs[0]) if any(l.kind == "residual" for l in spec.layers) else None
    # residual: the shortcut's share of the input gradient accumulates in g_input
    for i in range(len(spec.layers) - 1, -1, -1):
        layer, p = spec.layers[i], ckpt.params[i]
        x_in, extra = cache.inputs[i], cache.extras[i]
        need_dx = i > 0 or need_input_grad
        if layer.kind == "dense":
            g, grads[i]["W"], grads[i]["b"] = L.dense_backward(x_in, p["W"], g, need_dx)
        elif layer.kind == "conv":
            g, grads[i]["W"], grads[i]["b"] = L.conv_backward(extra, p["W"], g, need_dx)
        elif layer.kind == "batchnorm":
            g, grads[i]["gamma"], grads[i]["beta"] = L.batchnorm_backward(extra, p["gamma"], g)
        elif layer.kind == "relu":
            g = L.relu_backward(x_in, g)
        elif layer.kind == "residual":
            g_input = g_input + g
            g = -g
        if g is None:
            break
    if not need_input_grad:
        return grads, None
    return grads, (g if g_input is None else g_input + g)


def update_bn_stats(ckpt: Checkpoint, cache: ForwardCache, momentum: float = 0.9) -> None:
    """Fold the batch statistics of a train-mode pass into the running averages."""
    for layer, p, extra in zip(ckpt.spec.layers, ckpt.params, cache.extras):
        if layer.kind != "batchnorm":
            continue
        _, _, mean, var, count = extra
        unbiased = var * count / max(count - 1, 1)
        p["running_mean"][...] = momentum * p["running_mean"] + (1 - momentum) * mean
        p["running_var"][...] = momentum * p["running_var"] + (1 - momentum) * unbiased


def mse_loss(pred: np.ndarray, target: np.ndarray) -> float:
    """Mean over the batch of the per-sample squared Euclidean error."""
    if pred.shape != target.shape:
        raise ShapeError(f"pred {pred.shape} and target {target.shape} differ")
    diff = pred.astype(np.float64) - target.astype(np.float64)
    return float(np.sum(diff * diff) / pred.shape[0])


def mse_loss_grad(pred: np.ndarray, target: np.ndarray) -> np.ndarray:
    if pred.shape != target.shape:
        raise ShapeError(f"pred {pred.shape} and target {target.shape} differ")
    return (2.0 / pred.shape[0]) * (pred - target.astype(pred.dtype))
