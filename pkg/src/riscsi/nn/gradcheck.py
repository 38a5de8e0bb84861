"""Central finite-difference check of the analytic gradients."""

from __future__ import annotations

import numpy as np

from .network import Checkpoint, backward, forward


def _rel_err(a: np.ndarray, b: np.ndarray, floor: float = 1e-4) -> float:
    # the floor keeps exactly-zero gradients (a bias feeding batch-norm)
    # from turning finite-difference round-off into a relative error of 1
    denom = max(np.linalg.norm(a) + np.linalg.norm(b), floor)
    return float(np.linalg.norm(a - b) / denom)


def gradient_check(ckpt: Checkpoint, x: np.ndarray, rng: np.random.Generator,
                   probes: int = 12, h: float = 1e-5) -> dict:
    """
    Compare ``backward`` against central differences of ``sum(out * R)``.

    Runs in float64 with batch-norm in train mode. For every trainable
    tensor and for the input, up to ``probes`` random coordinates are
    perturbed; the result maps
    ``"<layer>.<name>"`` (or ``"input"``) to the relative error
    ``||g_a - g_n|| / max(||g_a|| + ||g_n||, 1e-4)`` over those coordinates.
    """
    ckpt = ckpt.astype(np.float64)
    x = np.array(x, dtype=np.float64)
    out, cache = forward(ckpt, x, "train")
    proj = rng.standard_normal(out.shape)
    grads, dx = backward(ckpt, cache, proj, need_input_grad=True)

    def loss() -> float:
        return float(np.sum(forward(ckpt, x, "train")[0] * proj))

    def probe(arr: np.ndarray, analytic: np.ndarray) -> float:
        flat = arr.reshape(-1)
        idx = rng.choice(flat.size, size=min(probes, flat.size), replace=False)
        num = np.empty(len(idx))
        for k, i in enumerate(idx):
            keep = flat[i]
            flat[i] = keep + h
            up = loss()
            flat[i] = keep - h
            down = loss()
            flat[i] = keep
            num[k] = (up - down) / (2 * h)
        return _rel_err(analytic.reshape(-1)[idx], num)

    errors = {}
    for i, (p, g) in enumerate(zip(ckpt.params, grads)):
        for name, arr in p.items():
            if name in g:
                errors[f"{i}.{name}"] = probe(arr, g[name])
    errors["input"] = probe(x, dx)
    return errors
