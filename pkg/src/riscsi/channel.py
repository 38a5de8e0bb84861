"""
Saleh-Valenzuela geometric channels for the user-BS, user-RIS and RIS-BS
links, and the equivalent cascaded channel ``G = H_RB diag(h_UR)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .numerics import ParameterError, Purpose, RngStream, ShapeError, _as_generator, cgauss

ANGLE_LOW = -np.pi / 2
ANGLE_HIGH = np.pi / 2


@dataclass(frozen=True)
class ArrayGeometry:
    """Uniform linear array; ``spacing_over_wavelength`` is d / lambda."""

    num_elements: int
    spacing_over_wavelength: float = 0.5

    def __post_init__(self):
        if self.num_elements < 1:
            raise ParameterError("num_elements must be >= 1")
        if not self.spacing_over_wavelength > 0:
            raise ParameterError("spacing_over_wavelength must be > 0")


@dataclass(frozen=True)
class PathSet:
    gains: np.ndarray
    aoa: np.ndarray
    aod: np.ndarray

    def __post_init__(self):
        if not (self.gains.shape == self.aoa.shape == self.aod.shape):
            raise ParameterError("gains, aoa and aod must have equal shapes")

    @property
    def num_paths(self) -> int:
        return self.gains.shape[-1]


@dataclass(frozen=True)
class ChannelConfig:
    paths_ub: int = 3
    paths_ur: int = 3
    paths_rb: int = 3
    angle_low: float = ANGLE_LOW
    angle_high: float = ANGLE_HIGH
    spacing_over_wavelength: float = 0.5


@dataclass(frozen=True)
class ChannelRealization:
    """
    One draw of the three links.

    Arrays may carry a leading batch axis (see :func:`stack_realizations`);
    ``h_ub`` is ``(..., M)``, ``h_ur`` is ``(..., N)``, ``h_rb`` and ``g`` are
    ``(..., M, N)``.
    """

    h_ub: np.ndarray
    h_ur: np.ndarray
    h_rb: np.ndarray
    g: np.ndarray
    paths_ub: PathSet | None = None
    paths_ur: PathSet | None = None
    paths_rb: PathSet | None = None

    @property
    def num_bs(self) -> int:
        return self.h_rb.shape[-2]

    @property
    def num_ris(self) -> int:
        return self.h_rb.shape[-1]

    def scaled(self, a: complex) -> "ChannelRealization":
        return ChannelRealization(a * self.h_ub, a * self.h_ur, self.h_rb, a * self.g)

    def __len__(self):
        if self.g.ndim == 2:
            raise TypeError("unbatched realization has no length")
        return self.g.shape[0]

    def __getitem__(self, idx) -> "ChannelRealization":
        return ChannelRealization(self.h_ub[idx], self.h_ur[idx], self.h_rb[idx], self.g[idx])


def steering(geom: ArrayGeometry, angle) -> np.ndarray:
    """
    ULA response ``(1/sqrt(n)) exp(-j 2 pi (d/lambda) k sin(angle))``.

    A scalar angle gives a length-n vector; an array of angles gives one
    response per angle along a new trailing axis of length n.
    """
    angle = np.asarray(angle, dtype=float)
    if not np.all(np.isfinite(angle)):
        raise ParameterError("angle must be finite")
    k = np.arange(geom.num_elements)
    phase = -2j * np.pi * geom.spacing_over_wavelength * np.sin(angle)[..., None] * k
    return np.exp(phase) / np.sqrt(geom.num_elements)


def draw_paths(rng, num_paths: int, angle_low: float = ANGLE_LOW,
               angle_high: float = ANGLE_HIGH) -> PathSet:
    """Unit-power CN(0,1) gains with i.i.d. uniform AoA and AoD."""
    if num_paths < 1:
        raise ParameterError("num_paths must be >= 1")
    gen = _as_generator(rng)
    gains = cgauss(gen, num_paths, 1.0)
    aoa = gen.uniform(angle_low, angle_high, num_paths)
    aod = gen.uniform(angle_low, angle_high, num_paths)
    return PathSet(gains, aoa, aod)


def synthesize_hrb(paths: PathSet, bs: ArrayGeometry, ris: ArrayGeometry) -> np.ndarray:
    """``sqrt(MN/L) sum_l alpha_l a_B(theta_l) a_R(phi_l)^H`` of shape (M, N)."""
    if paths.gains.ndim != 1:
        raise ParameterError("synthesize_hrb takes a single (unbatched) PathSet")
    m, n, l = bs.num_elements, ris.num_elements, paths.num_paths
    a_b = steering(bs, paths.aoa)            # (L, M)
    a_r = steering(ris, paths.aod)           # (L, N)
    return np.sqrt(m * n / l) * np.einsum("l,lm,ln->mn", paths.gains, a_b, a_r.conj())


def _synthesize_vector(paths: PathSet, geom: ArrayGeometry) -> np.ndarray:
    n, l = geom.num_elements, paths.num_paths
    return np.sqrt(n / l) * (paths.gains @ steering(geom, paths.aoa))


def synthesize_hub(paths: PathSet, bs: ArrayGeometry) -> np.ndarray:
    """Direct user-BS channel; arrival angles are taken from ``paths.aoa``."""
    return _synthesize_vector(paths, bs)


def synthesize_hur(paths: PathSet, ris: ArrayGeometry) -> np.ndarray:
    """User-RIS channel; arrival angles at the RIS are taken from ``paths.aoa``."""
    return _synthesize_vector(paths, ris)


def cascade(h_rb: np.ndarray, h_ur: np.ndarray) -> np.ndarray:
    """``h_rb @ diag(h_ur)``: column n of ``h_rb`` scaled by ``h_ur[n]``."""
    if h_rb.shape[-1] != h_ur.shape[-1]:
        raise ShapeError(f"h_rb has {h_rb.shape[-1]} columns but h_ur has {h_ur.shape[-1]} entries")
    return h_rb * h_ur[..., None, :]


def draw_channel(rng, num_bs: int, num_ris: int,
                 config: ChannelConfig = ChannelConfig()) -> ChannelRealization:
    gen = _as_generator(rng)
    bs = ArrayGeometry(num_bs, config.spacing_over_wavelength)
    ris = ArrayGeometry(num_ris, config.spacing_over_wavelength)
    lo, hi = config.angle_low, config.angle_high
    p_ub = draw_paths(gen, config.paths_ub, lo, hi)
    p_ur = draw_paths(gen, config.paths_ur, lo, hi)
    p_rb = draw_paths(gen, config.paths_rb, lo, hi)
    h_ub = synthesize_hub(p_ub, bs)
    h_ur = synthesize_hur(p_ur, ris)
    h_rb = synthesize_hrb(p_rb, bs, ris)
    return ChannelRealization(h_ub, h_ur, h_rb, cascade(h_rb, h_ur), p_ub, p_ur, p_rb)


def stack_realizations(items) -> ChannelRealization:
    items = list(items)
    return ChannelRealization(
        np.stack([c.h_ub for c in items]),
        np.stack([c.h_ur for c in items]),
        np.stack([c.h_rb for c in items]),
        np.stack([c.g for c in items]),
    )


def draw_channels(seed: int, indices, num_bs: int, num_ris: int,
                  config: ChannelConfig = ChannelConfig(), sub: int = 0) -> ChannelRealization:
    """Batch of realizations, realization i drawn from its own stream."""
    base = RngStream(seed)
    return stack_realizations(
        draw_channel(base.derive(Purpose.CHANNEL, int(i), sub), num_bs, num_ris, config)
        for i in indices
    )
