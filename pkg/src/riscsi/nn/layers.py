"""
Forward and backward kernels for the five layer kinds.

Convolutions use NHWC layout with "same" zero padding and an im2col
lowering so every heavy operation is a single GEMM. BatchNorm statistics
are accumulated in float64 whatever the activation dtype.
"""

from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import as_strided

BN_EPS = 1e-5


def dense_forward(x, W, b):
    return x @ W + b


def dense_backward(x, W, dy, need_dx=True):
    dW = x.T @ dy
    db = dy.sum(axis=0)
    dx = dy @ W.T if need_dx else None
    return dx, dW, db


def im2col(x, k):
    """``(B, H, W, C)`` -> ``(B, H, W, k*k*C)`` patches in (kh, kw, C) order."""
    p = k // 2
    bsz, h, w, c = x.shape
    xp = np.zeros((bsz, h + 2 * p, w + 2 * p, c), dtype=x.dtype)
    xp[:, p:p + h, p:p + w, :] = x
    s = xp.strides
    view = as_strided(xp, (bsz, h, w, k, k, c), (s[0], s[1], s[2], s[1], s[2], s[3]), writeable=False)
    return np.ascontiguousarray(view).reshape(bsz, h, w, k * k * c)


def conv_forward(x, W, b):
    k, _, cin, cout = W.shape
    cols = im2col(x, k)
    y = cols.reshape(-1, k * k * cin) @ W.reshape(k * k * cin, cout) + b
    return y.reshape(x.shape[:3] + (cout,)), cols


def conv_backward(cols, W, dy, need_dx=True):
    """
    Gradients of a same-padded convolution. The input gradient is itself a
    same-padded convolution of ``dy`` with the spatially flipped,
    channel-transposed kernel.
    """
    k, _, cin, cout = W.shape
    flat_dy = dy.reshape(-1, cout)
    dW = (cols.reshape(-1, k * k * cin).T @ flat_dy).reshape(W.shape)
    db = flat_dy.sum(axis=0)
    dx = None
    if need_dx:
        w_flip = np.ascontiguousarray(W[::-1, ::-1].transpose(0, 1, 3, 2)).reshape(k * k * cout, cin)
        dx = (im2col(dy, k).reshape(-1, k * k * cout) @ w_flip).reshape(dy.shape[:3] + (cin,))
    return dx, dW, db


def _moments(x):
    flat = x.reshape(-1, x.shape[-1]).astype(np.float64)
    n = flat.shape[0]
    mean = np.ones(n) @ flat / n
    var = np.einsum("ij,ij->j", flat, flat) / n - mean * mean
    return mean, np.maximum(var, 0.0)


def batchnorm_forward(x, gamma, beta, train, running_mean=None, running_var=None):
    """
    Normalise over every axis but the last (features / channels).

    Returns ``(y, cache)``; in train mode ``cache`` carries the batch
    statistics needed by the backward pass and the running-stat update.
    """
    axes = tuple(range(x.ndim - 1))
    if train:
        mean, var = _moments(x)
    else:
        mean = running_mean.astype(np.float64)
        var = running_var.astype(np.float64)
    inv_std = 1.0 / np.sqrt(var + BN_EPS)
    xhat = ((x - mean) * inv_std).astype(x.dtype)
    y = xhat * gamma + beta
    count = int(np.prod([x.shape[a] for a in axes]))
    return y, (xhat, inv_std.astype(x.dtype), mean, var, count)


def batchnorm_backward(cache, gamma, dy):
    xhat, inv_std, _, _, count = cache
    axes = tuple(range(dy.ndim - 1))
    dgamma = (dy * xhat).sum(axis=axes)
    dbeta = dy.sum(axis=axes)
    dxhat = dy * gamma
    dx = inv_std / count * (
        count * dxhat - dxhat.sum(axis=axes) - xhat * (dxhat * xhat).sum(axis=axes)
    )
    return dx, dgamma, dbeta


def relu_forward(x):
    return np.maximum(x, 0)


def relu_backward(x, dy):
    return dy * (x > 0)
