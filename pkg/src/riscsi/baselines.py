"""
Closed-form estimators: LS for the direct and cascaded channels, and a
row-wise angular-dictionary OMP baseline for the full cascaded channel.

All estimators accept observations with a leading batch axis.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channel import ArrayGeometry, steering
from .numerics import ParameterError, ShapeError, hermitian
from .pilot import ActiveSet, PilotObservation, dft_matrix


@dataclass(frozen=True)
class LsDirectEstimate:
    h_hat: np.ndarray
    power: float


@dataclass(frozen=True)
class LsCascadedEstimate:
    g_hat_active: np.ndarray
    active: ActiveSet


def ls_direct(obs: PilotObservation) -> LsDirectEstimate:
    """``y_1 / sqrt(P)`` from the all-off instant."""
    return LsDirectEstimate(obs.y_direct / obs.sqrt_power, obs.power)


def ls_cascaded(obs: PilotObservation, h_ub_est: np.ndarray) -> LsCascadedEstimate:
    """
    LS estimate of the active columns ``G_A``.

    Strips the direct-channel estimate from the DFT instants and correlates
    with the DFT pattern: ``(Y_A / sqrt(P) - h 1^T) Phi^H / N1``.
    """
    active = obs.schedule.active
    n1 = active.n1
    y_a = obs.y_active
    if y_a.shape[-1] != n1:
        raise ShapeError(f"observation has {y_a.shape[-1]} DFT instants, active set has {n1}")
    if h_ub_est.shape[-1] != y_a.shape[-2]:
        raise ShapeError(f"direct estimate length {h_ub_est.shape[-1]} != M = {y_a.shape[-2]}")
    stripped = y_a / obs.sqrt_power[..., None] - h_ub_est[..., :, None]
    return LsCascadedEstimate(stripped @ hermitian(dft_matrix(n1)) / n1, active)


def scatter_columns(g_active: np.ndarray, g_inactive: np.ndarray | None, active: ActiveSet) -> np.ndarray:
    """
    Interleave active and inactive column blocks back into ``(..., M, N)``.

    ``g_inactive=None`` leaves the inactive columns at zero.
    """
    shape = g_active.shape[:-1] + (active.num_elements,)
    out = np.zeros(shape, dtype=np.result_type(g_active, complex))
    out[..., active.active] = g_active
    if g_inactive is not None:
        out[..., active.inactive] = g_inactive
    return out


def ls_full(obs_full: PilotObservation, h_ub_est: np.ndarray) -> np.ndarray:
    """LS estimate of all of ``G`` from a full-activation block."""
    if obs_full.schedule.active.n2 != 0:
        raise ParameterError("ls_full requires a full-activation schedule")
    est = ls_cascaded(obs_full, h_ub_est)
    return scatter_columns(est.g_hat_active, None, est.active)


def ls_zero_fill(obs: PilotObservation, h_ub_est: np.ndarray) -> np.ndarray:
    """LS on the active columns; inactive columns are left at zero."""
    est = ls_cascaded(obs, h_ub_est)
    return scatter_columns(est.g_hat_active, None, est.active)


def angular_dictionary(n: int, grid_size: int, spacing_over_wavelength: float = 0.5) -> np.ndarray:
    """
    ``(N, grid_size)`` steering dictionary on a uniform grid of sin(angle).

    The grid spans the full spatial-frequency circle so that the cascaded
    channel rows, whose phase progressions are differences of two steering
    phases, are also covered.
    """
    u = -1.0 + 2.0 * np.arange(grid_size) / grid_size
    return steering(ArrayGeometry(n, spacing_over_wavelength), np.arcsin(u)).T


@dataclass
class OmpResult:
    coefficients: np.ndarray
    support: list
    residual_norms: list


def omp(y: np.ndarray, A: np.ndarray, sparsity: int | None = None, tol: float | None = None) -> OmpResult:
    """
    Orthogonal matching pursuit for ``y ~ A x`` with ``x`` sparse.

    Stops after ``sparsity`` atoms, or earlier once the residual norm drops
    below ``tol``. ``residual_norms[0]`` is ``||y||``.
    """
    n_meas, n_atoms = A.shape
    if sparsity is None and tol is None:
        raise ParameterError("give sparsity, tol, or both")
    max_atoms = n_meas if sparsity is None else sparsity
    if max_atoms < 1:
        raise ParameterError("sparsity must be >= 1")
    if max_atoms > n_meas:
        raise ParameterError(f"sparsity {max_atoms} exceeds the {n_meas} available measurements")
    norms = np.linalg.norm(A, axis=0)
    norms[norms == 0] = 1.0
    residual = y.astype(complex)
    support: list = []
    history = [float(np.linalg.norm(residual))]
    coef = np.zeros(0, complex)
    for _ in range(max_atoms):
        if tol is not None and history[-1] <= tol:
            break
        corr = np.abs(A.conj().T @ residual) / norms
        corr[support] = -1.0
        support.append(int(np.argmax(corr)))
        sub = A[:, support]
        coef, *_ = np.linalg.lstsq(sub, y, rcond=None)
        residual = y - sub @ coef
        history.append(float(np.linalg.norm(residual)))
    x = np.zeros(n_atoms, complex)
    x[support] = coef
    return OmpResult(x, support, history)


def omp_cascaded(obs: PilotObservation, h_ub_est: np.ndarray, grid_size: int | None = None,
                 sparsity: int = 3, tol: float | None = None,
                 spacing_over_wavelength: float = 0.5) -> np.ndarray:
    """
    Row-wise OMP estimate of the full ``G`` from a partial-activation block.

    For BS antenna m the direct-stripped observation row equals
    ``g_{A,m} Phi`` plus noise; ``g_m`` is modelled as sparse on an angular
    dictionary, recovered through the sensing matrix ``Phi^T D_A`` and then
    reconstructed on all N columns.
    """
    active = obs.schedule.active
    n, n1 = active.num_elements, active.n1
    grid_size = 2 * n if grid_size is None else grid_size
    if grid_size < n:
        raise ParameterError(f"grid_size must be >= N = {n}")
    if sparsity < 1:
        raise ParameterError("sparsity must be >= 1")
    if sparsity > n1:
        raise ParameterError(f"sparsity {sparsity} exceeds the N1 = {n1} measurements per row")
    d = angular_dictionary(n, grid_size, spacing_over_wavelength)
    sensing = dft_matrix(n1).T @ d[active.active, :]
    rows = obs.y_active / obs.sqrt_power[..., None] - h_ub_est[..., :, None]
    flat = rows.reshape(-1, n1)
    out = np.empty((flat.shape[0], n), complex)
    for i, r in enumerate(flat):
        out[i] = d @ omp(r, sensing, sparsity, tol).coefficients
    return out.reshape(rows.shape[:-1] + (n,))
