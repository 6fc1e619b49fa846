"""Data-aided channel estimation from the eigenstructure of the received block.

The base station forms the sample covariance of the whole coherence block,
picks the eigenvectors whose expected eigenvalues belong to its own users and
estimates the channels projected onto that K-dimensional subspace.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .channel import CorrelationSet
from .config import SystemConfig


class SubspaceError(ValueError):
    pass


@dataclass
class SubspaceSelection:
    eigenvalues: np.ndarray     # (N_t,) ascending
    eigenvectors: np.ndarray    # (N_t, N_t), columns
    theta: np.ndarray           # (M,) ascending theoretical power levels
    user_indices: np.ndarray    # (K,) 1-based positions of own users in theta
    V_eq: np.ndarray            # (K, N_t), orthonormal rows


@dataclass
class ProjectedEstimate:
    Z0p: np.ndarray             # (K, tau)
    z_despread: np.ndarray      # (K, K), row k is the despread vector of user k
    h_eq: np.ndarray            # (K, K), row k is V_eq h_0k (nan if unknown)
    h_hat: np.ndarray           # (K, K), row k is the MMSE estimate


def sample_covariance(Y0: np.ndarray, T: int, N_t: int) -> np.ndarray:
    """``Y0 Y0^H / (T N_t)``."""
    if T < 1:
        raise ValueError("T must be >= 1")
    S = Y0 @ Y0.conj().T / (T * N_t)
    return 0.5 * (S + S.conj().T)


def eig_ascending(S: np.ndarray):
    """Eigenvalues in ascending order and the matching orthonormal eigenvectors."""
    if not np.all(np.isfinite(S)):
        raise np.linalg.LinAlgError("non-finite entries in covariance matrix")
    return np.linalg.eigh(S)


def theoretical_power_levels(cfg: SystemConfig, corr: CorrelationSet, m: int = 0):
    """Expected signal eigenvalues at base station ``m`` and the positions of
    the cell-``m`` users among them.

    The levels are ``P_l tr(R_lk^m)`` for the users of every cell and
    ``Pe * Lambda_i`` for the eavesdropper, sorted ascending. Ties keep
    insertion order (other cells, own cell, eavesdropper), so the own users
    always form a contiguous block when their levels coincide.

    Returns
    -------
    theta : ndarray, shape (M,)
    user_indices : ndarray of int, shape (K,)
        1-based positions of the cell-``m`` users in ``theta``.
    """
    if cfg.M > cfg.N_t:
        raise SubspaceError(f"M ≤ N_t violated (M={cfg.M}, N_t={cfg.N_t})")
    traces = corr.user_traces()[m]          # (L+1, K)
    others = [cfg.uplink_power(l) * traces[l] for l in range(cfg.L + 1) if l != m]
    own = cfg.uplink_power(m) * traces[m]
    eve = cfg.Pe * corr.Lambda_e[m]
    levels = np.concatenate(others + [own, eve])
    order = np.argsort(levels, kind="stable")
    own_start = len(levels) - len(eve) - len(own)
    rank = np.empty_like(order)
    rank[order] = np.arange(len(order))
    user_indices = np.sort(rank[own_start:own_start + cfg.K]) + 1
    return levels[order], user_indices


def select_subspace(eigenvalues: np.ndarray, eigenvectors: np.ndarray, theta: np.ndarray,
                    user_indices: Sequence[int], M: int) -> SubspaceSelection:
    """Rows of ``V_eq`` are the conjugated eigenvectors at positions
    ``N_t - M + i_k`` of the ascending spectrum."""
    N_t = eigenvectors.shape[0]
    pos = N_t - M + np.asarray(user_indices) - 1
    if np.any(pos < 0) or np.any(pos >= N_t):
        raise SubspaceError(f"eigenvector index out of range: {pos.tolist()}")
    V_eq = eigenvectors[:, pos].conj().T
    return SubspaceSelection(eigenvalues, eigenvectors, np.asarray(theta),
                             np.asarray(user_indices), V_eq)


def estimate_subspace(cfg: SystemConfig, corr: CorrelationSet, Y0: np.ndarray,
                      m: int = 0) -> SubspaceSelection:
    """Sample covariance, eigendecomposition and subspace selection at BS ``m``."""
    w, V = eig_ascending(sample_covariance(Y0, Y0.shape[1], cfg.N_t))
    theta, idx = theoretical_power_levels(cfg, corr, m)
    return select_subspace(w, V, theta, idx, cfg.M)


def project_and_despread(V_eq: np.ndarray, Y_p: np.ndarray, pilots: np.ndarray):
    """Project the pilot block onto the user subspace and correlate with each pilot.

    Returns ``Z0p`` (K x tau) and the despread vectors, one row per user.
    """
    Z0p = V_eq @ Y_p
    return Z0p, (Z0p @ pilots.conj()).T


def projected_covariances(V_eq: np.ndarray, R: np.ndarray) -> np.ndarray:
    """``V_eq R_k V_eq^H`` for a stack of correlation matrices ``R`` (K, N_t, N_t)."""
    return V_eq @ R @ V_eq.conj().T


def mmse_estimate(C: np.ndarray, z: np.ndarray, P0: float, tau: int, N0: float) -> np.ndarray:
    """MMSE estimate ``sqrt(P0) C (N0 I + tau P0 C)^{-1} z``.

    ``C`` is a (K, K, K) stack of projected covariances and ``z`` the (K, K)
    despread vectors, one per user.
    """
    K = C.shape[-1]
    A = N0 * np.eye(K) + tau * P0 * C
    try:
        x = np.linalg.solve(A, z[..., None])[..., 0]
    except np.linalg.LinAlgError as exc:
        raise SubspaceError("singular MMSE system (N0 = 0 with singular covariance)") from exc
    return np.sqrt(P0) * np.einsum("kij,kj->ki", C, x)


def normalized_mse(h_hat: np.ndarray, h_eq: np.ndarray) -> float:
    """Sum over users of ``||h_hat_k - h_eq_k||^2 / ||h_eq_k||^2``."""
    h_hat, h_eq = np.atleast_2d(h_hat), np.atleast_2d(h_eq)
    if h_hat.shape != h_eq.shape:
        raise ValueError("estimate and reference shapes differ")
    den = np.sum(np.abs(h_eq) ** 2, axis=-1)
    if np.any(den == 0):
        raise ZeroDivisionError("zero-norm reference channel")
    return float(np.sum(np.sum(np.abs(h_hat - h_eq) ** 2, axis=-1) / den))


def estimate_cell(cfg: SystemConfig, corr: CorrelationSet, Y0: np.ndarray, Y_p: np.ndarray,
                  pilots: np.ndarray, m: int = 0, h_true=None):
    """Full estimation chain at BS ``m``.

    ``h_true`` (K, N_t) are the true own-cell channels, used only to fill
    ``h_eq`` for diagnostics.
    """
    sel = estimate_subspace(cfg, corr, Y0, m)
    Z0p, z = project_and_despread(sel.V_eq, Y_p, pilots)
    C = projected_covariances(sel.V_eq, corr.R_user[m, m])
    h_hat = mmse_estimate(C, z, cfg.uplink_power(m), cfg.tau, cfg.N0)
    if h_true is None:
        h_eq = np.full_like(h_hat, np.nan)
    else:
        h_eq = h_true @ sel.V_eq.T
    return sel, ProjectedEstimate(Z0p, z, h_eq, h_hat)
