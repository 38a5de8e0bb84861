"""Normalised mean-squared error, per realization and over an ensemble."""

from __future__ import annotations

import numpy as np

from .numerics import ShapeError


class DomainError(ValueError):
    """Raised when the NMSE normaliser is zero."""


def _sq(x, axes):
    return np.sum(np.abs(x) ** 2, axis=axes)


def _nmse(truth, est, axes):
    truth, est = np.asarray(truth), np.asarray(est)
    if truth.shape != est.shape:
        raise ShapeError(f"truth {truth.shape} and estimate {est.shape} differ")
    den = _sq(truth, axes)
    if np.any(den == 0):
        raise DomainError("NMSE is undefined for an all-zero true channel")
    return _sq(truth - est, axes) / den


def nmse_direct(truth: np.ndarray, est: np.ndarray):
    """``||h - h_est||^2 / ||h||^2`` over the last axis (batched inputs give an array)."""
    return _nmse(truth, est, -1)


def nmse_cascaded(truth: np.ndarray, est: np.ndarray):
    """Squared Frobenius error over the last two axes, normalised by ``||G||_F^2``."""
    return _nmse(truth, est, (-2, -1))


def ensemble_nmse(truth: np.ndarray, est: np.ndarray, matrix: bool, mode: str = "ensemble"):
    """
    Average NMSE over a batch and its standard error.

    ``mode="ensemble"`` returns ``sum ||e||^2 / sum ||x||^2`` (the error energy
    normalised by the mean channel energy, whose LS value is exactly
    ``sigma^2 / P``) with a delta-method standard error; ``mode="per-sample"``
    averages the per-realization ratios.
    """
    axes = (-2, -1) if matrix else -1
    truth, est = np.asarray(truth), np.asarray(est)
    if truth.shape != est.shape:
        raise ShapeError(f"truth {truth.shape} and estimate {est.shape} differ")
    err = _sq(truth - est, axes).ravel()
    energy = _sq(truth, axes).ravel()
    n = err.size
    if mode == "per-sample":
        if np.any(energy == 0):
            raise DomainError("NMSE is undefined for an all-zero true channel")
        r = err / energy
        return float(r.mean()), float(r.std(ddof=1) / np.sqrt(n)) if n > 1 else 0.0
    if mode != "ensemble":
        raise ValueError(f"unknown NMSE averaging mode {mode!r}")
    total = energy.sum()
    if total == 0:
        raise DomainError("NMSE is undefined for an all-zero true channel")
    ratio = err.sum() / total
    if n < 2:
        return float(ratio), 0.0
    resid = err - ratio * energy
    stderr = np.sqrt(resid.var(ddof=1) / n) / energy.mean()
    return float(ratio), float(stderr)
