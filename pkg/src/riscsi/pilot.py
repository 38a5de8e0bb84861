"""
Pilot transmission: RIS reflection schedules and noisy reception at the BS.

With pilots ``X = I`` the received block is::

    Y = sqrt(P) (h_UB 1^T + G Psi) + Z

where column 0 of ``Psi`` is all-off and the following ``N1`` columns apply
a DFT pattern on the active elements.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .channel import ChannelRealization
from .numerics import ParameterError, ShapeError, cgauss


@dataclass(frozen=True)
class ActiveSet:
    indices: tuple
    num_elements: int

    def __post_init__(self):
        idx = tuple(int(i) for i in self.indices)
        object.__setattr__(self, "indices", idx)
        if len(idx) < 1:
            raise ParameterError("at least one RIS element must be active")
        if list(idx) != sorted(set(idx)):
            raise ParameterError("active indices must be sorted and unique")
        if idx[0] < 0 or idx[-1] >= self.num_elements:
            raise ParameterError(f"active index out of range [0, {self.num_elements})")

    @property
    def n1(self) -> int:
        return len(self.indices)

    @property
    def n2(self) -> int:
        return self.num_elements - self.n1

    @property
    def active(self) -> np.ndarray:
        return np.asarray(self.indices, dtype=int)

    @property
    def inactive(self) -> np.ndarray:
        return np.setdiff1d(np.arange(self.num_elements), self.active)

    @property
    def ratio(self) -> float:
        return self.n1 / self.num_elements

    @classmethod
    def evenly_spaced(cls, n: int, n1: int) -> "ActiveSet":
        if not 1 <= n1 <= n:
            raise ParameterError(f"need 1 <= n1 <= n, got n1={n1}, n={n}")
        return cls(tuple(int(k * n // n1) for k in range(n1)), n)

    @classmethod
    def contiguous(cls, n: int, n1: int) -> "ActiveSet":
        if not 1 <= n1 <= n:
            raise ParameterError(f"need 1 <= n1 <= n, got n1={n1}, n={n}")
        return cls(tuple(range(n1)), n)

    @classmethod
    def from_policy(cls, policy: str, n: int, n1: int) -> "ActiveSet":
        policies = {"even": cls.evenly_spaced, "contiguous": cls.contiguous}
        if policy not in policies:
            raise ParameterError(f"unknown active-set policy {policy!r}; choose from {sorted(policies)}")
        return policies[policy](n, n1)


@dataclass(frozen=True)
class ReflectionSchedule:
    psi: np.ndarray
    active: ActiveSet

    @property
    def num_instants(self) -> int:
        return self.psi.shape[1]


@dataclass(frozen=True)
class PilotObservation:
    """Received pilots ``y`` of shape ``(..., M, N1 + 1)``."""

    y: np.ndarray
    power: float | np.ndarray
    noise_variance: float
    schedule: ReflectionSchedule
    truth: ChannelRealization | None = field(default=None, repr=False)

    @property
    def sqrt_power(self) -> np.ndarray:
        """``sqrt(P)`` shaped to broadcast against a batch of vectors."""
        return np.sqrt(np.asarray(self.power, dtype=float))[..., None]

    @property
    def y_direct(self) -> np.ndarray:
        return self.y[..., 0]

    @property
    def y_active(self) -> np.ndarray:
        return self.y[..., 1:]


def dft_matrix(n1: int) -> np.ndarray:
    if n1 < 1:
        raise ParameterError("n1 must be >= 1")
    k = np.arange(n1)
    return np.exp(-2j * np.pi * np.outer(k, k) / n1)


def build_schedule(active: ActiveSet, n: int | None = None) -> ReflectionSchedule:
    n = active.num_elements if n is None else n
    if n != active.num_elements:
        raise ParameterError(f"active set was built for {active.num_elements} elements, not {n}")
    psi = np.zeros((n, active.n1 + 1), dtype=complex)
    psi[active.active, 1:] = dft_matrix(active.n1)
    return ReflectionSchedule(psi, active)


def overhead_reduction(schedule: ReflectionSchedule) -> float:
    """Pilot instants used relative to full activation, ``(N1 + 1) / (N + 1)``."""
    return schedule.num_instants / (schedule.psi.shape[0] + 1)


def snr_to_power(snr_db: float, noise_variance: float = 1.0) -> float:
    return noise_variance * 10.0 ** (snr_db / 10.0)


def transmit(truth: ChannelRealization, schedule: ReflectionSchedule, power: float,
             rng=None, noise_variance: float = 1.0) -> PilotObservation:
    """
    Simulate one (or a batch of) pilot blocks.

    ``power`` is a scalar or one value per realization. ``rng`` may be a
    single stream/generator, or a sequence with one entry per realization
    for batched ``truth``.
    """
    power = np.asarray(power, dtype=float)
    if not np.all(power > 0):
        raise ParameterError("power must be > 0")
    if truth.g.shape[-1] != schedule.psi.shape[0]:
        raise ShapeError(f"G has {truth.g.shape[-1]} columns but schedule has {schedule.psi.shape[0]} rows")
    clean = np.sqrt(power)[..., None, None] * (truth.h_ub[..., :, None] + truth.g @ schedule.psi)
    if noise_variance == 0:
        noise = 0.0
    elif isinstance(rng, (list, tuple)):
        if len(rng) != clean.shape[0]:
            raise ShapeError("one noise stream per realization is required")
        noise = np.stack([cgauss(r, clean.shape[1:], noise_variance) for r in rng])
    else:
        if rng is None:
            raise ParameterError("a random stream is required when noise_variance > 0")
        noise = cgauss(rng, clean.shape, noise_variance)
    power = float(power) if power.ndim == 0 else power
    return PilotObservation(clean + noise, power, float(noise_variance), schedule, truth)
