"""
Complex linear-algebra helpers and reproducible random streams.

Complex matrices and vectors are plain ``numpy`` arrays of dtype
``complex128``; real tensors fed to the networks are ``float32`` arrays.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import IntEnum

import numpy as np


class ShapeError(ValueError):
    """Raised when array dimensions do not agree."""


class ParameterError(ValueError):
    """Raised for invalid numerical parameters."""


class Purpose(IntEnum):
    """High word of a stream id; keeps unrelated random draws independent."""

    CHANNEL = 1
    NOISE = 2
    ROW_SELECT = 3
    INIT = 4
    SHUFFLE = 5
    SNR_SELECT = 6
    MISC = 7


def stream_id(purpose: int, index: int = 0, sub: int = 0) -> int:
    """Pack ``(purpose, sub, index)`` into one 64-bit stream id."""
    if not (0 <= purpose < 256 and 0 <= sub < 2**16 and 0 <= index < 2**40):
        raise ParameterError(f"stream id fields out of range: {(purpose, sub, index)}")
    return (purpose << 56) | (sub << 40) | index


@dataclass(frozen=True)
class RngStream:
    """
    A counter-based random stream identified by ``(seed, stream)``.

    Identical pairs produce identical sequences; different ``stream`` values
    give statistically independent sequences (Philox keyed through a
    ``SeedSequence`` spawn key), so per-sample generation is order invariant.
    ``derive`` nests streams: the child's key is the parent's key extended
    by the new stream id.
    """

    seed: int
    stream: int = 0
    parent: tuple = ()

    def generator(self) -> np.random.Generator:
        ss = np.random.SeedSequence(self.seed, spawn_key=self.parent + (self.stream,))
        return np.random.Generator(np.random.Philox(ss))

    def derive(self, purpose: int, index: int = 0, sub: int = 0) -> "RngStream":
        return RngStream(self.seed, stream_id(purpose, index, sub), self.parent + (self.stream,))


def _as_generator(rng) -> np.random.Generator:
    if isinstance(rng, RngStream):
        return rng.generator()
    if isinstance(rng, np.random.Generator):
        return rng
    raise TypeError(f"expected RngStream or numpy Generator, got {type(rng).__name__}")


def cgauss(rng, n, variance: float = 1.0) -> np.ndarray:
    """
    Circularly-symmetric complex Gaussian samples CN(0, variance).

    Parameters
    ----------
    rng : RngStream or numpy.random.Generator
    n : int or tuple of int
        Output shape.
    variance : float
        Total variance; real and imaginary parts each get ``variance / 2``.
    """
    if not math.isfinite(variance) or variance < 0:
        raise ParameterError(f"variance must be finite and >= 0, got {variance}")
    gen = _as_generator(rng)
    shape = (n,) if np.isscalar(n) else tuple(n)
    z = gen.standard_normal(shape + (2,))
    return np.sqrt(variance / 2.0) * (z[..., 0] + 1j * z[..., 1])


def matmul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    if a.shape[-1] != b.shape[-2 if b.ndim > 1 else 0]:
        raise ShapeError(f"inner dimensions disagree: {a.shape} @ {b.shape}")
    return a @ b


def hermitian(a: np.ndarray) -> np.ndarray:
    return np.conj(np.swapaxes(a, -1, -2))


def frob_norm(a: np.ndarray) -> float:
    return float(np.sqrt(np.sum(np.abs(a) ** 2)))


def complex_to_real(x: np.ndarray, dtype=np.float32) -> np.ndarray:
    """
    Pack complex data into a real tensor.

    Vectors (last axis length n) become ``[re; im]`` of length 2n. Matrices
    ``(..., rows, cols)`` become ``(..., rows, cols, 2)`` feature maps with
    map 0 the real part and map 1 the imaginary part. A batch of vectors
    looks like a matrix, so pack it with :func:`vec_to_real` instead.
    """
    if x.ndim == 1:
        return vec_to_real(x, dtype)
    return mat_to_real(x, dtype)


def real_to_complex(t: np.ndarray) -> np.ndarray:
    """Inverse of :func:`complex_to_real` for a single vector or matrix."""
    if t.ndim == 1:
        return real_to_vec(t)
    if t.shape[-1] != 2:
        raise ShapeError(f"matrix packing needs a trailing axis of length 2, got {t.shape}")
    return real_to_mat(t)


def vec_to_real(x: np.ndarray, dtype=np.float32) -> np.ndarray:
    return np.concatenate([x.real, x.imag], axis=-1).astype(dtype)


def real_to_vec(t: np.ndarray) -> np.ndarray:
    if t.shape[-1] % 2:
        raise ShapeError(f"packed vector length must be even, got {t.shape[-1]}")
    n = t.shape[-1] // 2
    return t[..., :n].astype(np.float64) + 1j * t[..., n:].astype(np.float64)


def mat_to_real(x: np.ndarray, dtype=np.float32) -> np.ndarray:
    return np.stack([x.real, x.imag], axis=-1).astype(dtype)


def real_to_mat(t: np.ndarray) -> np.ndarray:
    return t[..., 0].astype(np.float64) + 1j * t[..., 1].astype(np.float64)
