"""Spatial correlation matrices and channel draws.

Users and the eavesdropper see a half-wavelength ULA at every base station.
Correlated fading uses a truncated Laplacian power angle spectrum; the
eavesdropper's receive side uses the exponential model. i.i.d. fading uses
scaled identities.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Optional

import numpy as np
from scipy.linalg import toeplitz

from .config import SystemConfig

QUAD_NODES = 2048


class QuadratureError(RuntimeError):
    """The angular integral did not converge at the fixed quadrature order."""


class NotPSDError(ValueError):
    pass


def laplacian_pas(theta, mean_aoa: float, sigma: float):
    """Truncated Laplacian power angle spectrum.

    The normalizer is the one for truncation at ``mean_aoa +/- pi``.
    """
    if sigma <= 0:
        raise ValueError("sigma must be > 0")
    norm = 1.0 / (math.sqrt(2.0) * sigma * (1.0 - math.exp(-math.sqrt(2.0) * math.pi / sigma)))
    return norm * np.exp(-math.sqrt(2.0) * np.abs(np.asarray(theta) - mean_aoa) / sigma)


@lru_cache(maxsize=8)
def _gauss_legendre(n: int):
    return np.polynomial.legendre.leggauss(n)


def _half_nodes(half_width: float, n: int):
    """Nodes/weights of an n-point Gauss-Legendre rule on [0, half_width]."""
    x, w = _gauss_legendre(n)
    return 0.5 * half_width * (x + 1.0), 0.5 * half_width * w


def _lag_profile(n_ant: int, theta_b: float, mean_aoa: float, sigma: float, n: int):
    # composite rule: one Gauss-Legendre panel each side of the PAS cusp
    off, w = _half_nodes(theta_b, n // 2)
    offsets = np.concatenate([-off[::-1], off])
    weights = np.concatenate([w[::-1], w])
    theta = mean_aoa + offsets
    dens = weights * laplacian_pas(theta, mean_aoa, sigma)
    lags = np.arange(n_ant)
    phase = np.exp(1j * np.pi * np.outer(lags, np.sin(theta)))
    return phase @ dens


def ula_correlation(N_t: int, theta_b: float, mean_aoa: float, sigma: float,
                    trace_target: float, n_nodes: int = QUAD_NODES,
                    rtol: float = 1e-8) -> np.ndarray:
    """Correlation matrix of a half-wavelength ULA.

    ``R[m, n]`` is the power-angle-spectrum average of the steering phase
    ``exp(j*pi*(m-n)*sin(theta))`` over ``theta`` in
    ``[mean_aoa - theta_b, mean_aoa + theta_b]``, scaled so that
    ``trace(R) == trace_target``.
    """
    if N_t < 1:
        raise ValueError("N_t must be >= 1")
    if not (0 < theta_b <= math.pi):
        raise ValueError("theta_b must lie in (0, pi]")
    if trace_target <= 0:
        raise ValueError("trace_target must be > 0")
    r = _lag_profile(N_t, theta_b, mean_aoa, sigma, n_nodes)
    coarse = _lag_profile(N_t, theta_b, mean_aoa, sigma, n_nodes // 2)
    resid = np.max(np.abs(r - coarse)) / abs(r[0])
    if not np.isfinite(resid) or resid > rtol:
        raise QuadratureError(f"angular integral not converged (residual {resid:.3e})")
    R = toeplitz(r, r.conj())
    return R * (trace_target / (N_t * r[0].real))


def exp_correlation(N_e: int, phi: float) -> np.ndarray:
    """Exponential correlation model, entries ``phi**|i-j|``."""
    if not (0 <= phi < 1):
        raise ValueError(f"phi must lie in [0, 1), got {phi}")
    idx = np.arange(N_e)
    return (phi ** np.abs(idx[:, None] - idx[None, :])).astype(complex)


def sqrtm_psd(R: np.ndarray, tol: float = 1e-8) -> np.ndarray:
    """Hermitian square root with rounding-level negative eigenvalues clamped."""
    w, V = np.linalg.eigh(R)
    scale = max(np.max(np.abs(w)), np.finfo(float).tiny)
    if w[0] < -tol * scale:
        raise NotPSDError(f"matrix is not PSD (min eigenvalue {w[0]:.3e})")
    return (V * np.sqrt(np.clip(w, 0.0, None))) @ V.conj().T


def _sqrt_batch(R: np.ndarray) -> np.ndarray:
    flat = R.reshape((-1,) + R.shape[-2:])
    return np.stack([sqrtm_psd(m) for m in flat]).reshape(R.shape)


@dataclass
class CorrelationSet:
    """All second-order channel statistics of a scenario.

    ``R_user[p, l, k]`` is the correlation of the channel from user ``k`` of
    cell ``l`` to the base station of cell ``p``.
    """

    R_user: np.ndarray      # (L+1, L+1, K, N_t, N_t)
    R_eve_tx: np.ndarray    # (L+1, N_t, N_t)
    R_eve_rx: np.ndarray    # (L+1, N_e, N_e)
    mode: str = "correlated"
    mean_aoa: Optional[np.ndarray] = None
    phi: Optional[np.ndarray] = None
    _sqrt: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def L(self) -> int:
        return self.R_user.shape[0] - 1

    @property
    def K(self) -> int:
        return self.R_user.shape[2]

    @property
    def N_t(self) -> int:
        return self.R_user.shape[-1]

    @property
    def N_e(self) -> int:
        return self.R_eve_rx.shape[-1]

    @property
    def R_E(self) -> np.ndarray:
        tr = np.trace(self.R_eve_tx, axis1=-2, axis2=-1).real
        return tr[:, None, None] * self.R_eve_rx

    @property
    def Lambda_e(self) -> np.ndarray:
        """Ascending eigenvalues of ``R_E`` for every cell, shape (L+1, N_e)."""
        return np.linalg.eigvalsh(self.R_E)

    def user_traces(self) -> np.ndarray:
        return np.trace(self.R_user, axis1=-2, axis2=-1).real

    def sqrt_user(self) -> np.ndarray:
        if "user" not in self._sqrt:
            self._sqrt["user"] = _sqrt_batch(self.R_user)
        return self._sqrt["user"]

    def sqrt_eve(self):
        if "eve" not in self._sqrt:
            self._sqrt["eve"] = (_sqrt_batch(self.R_eve_tx), _sqrt_batch(self.R_eve_rx))
        return self._sqrt["eve"]

    def matrices(self):
        """Every stored correlation matrix, for invariant checks."""
        yield from self.R_user.reshape((-1,) + self.R_user.shape[-2:])
        yield from self.R_eve_tx
        yield from self.R_eve_rx

    # row-major complex pairs; JSON numbers are exact for float64 via repr
    def to_json(self) -> str:
        def pack(a):
            a = np.ascontiguousarray(a, dtype="<c16")
            return {"shape": list(a.shape), "data": a.view("<f8").ravel().tolist()}

        doc = {"mode": self.mode, "R_user": pack(self.R_user),
               "R_eve_tx": pack(self.R_eve_tx), "R_eve_rx": pack(self.R_eve_rx)}
        if self.mean_aoa is not None:
            doc["mean_aoa"] = np.asarray(self.mean_aoa).tolist()
        if self.phi is not None:
            doc["phi"] = np.asarray(self.phi).tolist()
        return json.dumps(doc)

    @classmethod
    def from_json(cls, text: str) -> "CorrelationSet":
        doc = json.loads(text)

        def unpack(d):
            flat = np.asarray(d["data"], dtype="<f8")
            return flat.view("<c16").reshape(d["shape"])

        return cls(unpack(doc["R_user"]), unpack(doc["R_eve_tx"]), unpack(doc["R_eve_rx"]),
                   mode=doc["mode"],
                   mean_aoa=None if "mean_aoa" not in doc else np.asarray(doc["mean_aoa"]),
                   phi=None if "phi" not in doc else np.asarray(doc["phi"]))


def build_correlation_set(cfg: SystemConfig, mode: Optional[str] = None,
                          seed=0) -> CorrelationSet:
    """Draw the scenario geometry and build every correlation matrix.

    Correlated mode draws an independent mean AoA in (-pi, pi] for each
    (base station, user) link and for each eavesdropper link, and a random
    ``phi`` in (0, 1) for each eavesdropper receive correlation. Traces are
    ``N_t`` on own-cell links and ``beta * N_t`` on cross-cell links; the
    eavesdropper counts as a cell-0 terminal.
    """
    mode = cfg.fading if mode is None else mode
    L1, K, N_t, N_e = cfg.L + 1, cfg.K, cfg.N_t, cfg.N_e
    own = np.eye(L1, dtype=bool)
    gain = np.where(own, 1.0, cfg.beta)        # gain[p, l]
    eve_gain = np.where(np.arange(L1) == 0, 1.0, cfg.beta)

    if mode == "iid":
        eye_t = np.eye(N_t, dtype=complex)
        R_user = gain[:, :, None, None, None] * np.broadcast_to(eye_t, (L1, L1, K, N_t, N_t))
        R_eve_tx = eve_gain[:, None, None] * eye_t
        R_eve_rx = np.broadcast_to(np.eye(N_e, dtype=complex), (L1, N_e, N_e)).copy()
        return CorrelationSet(np.ascontiguousarray(R_user), R_eve_tx, R_eve_rx, mode="iid")
    if mode != "correlated":
        raise ValueError(f"unknown fading mode {mode!r}")

    rng = np.random.default_rng(seed)
    # -U(-pi, pi] == U[-pi, pi)
    aoa_user = -rng.uniform(-np.pi, np.pi, size=(L1, L1, K))
    aoa_eve = -rng.uniform(-np.pi, np.pi, size=L1)
    phi = rng.uniform(0.0, 1.0, size=L1)
    while np.any(phi <= 0.0):
        phi = np.where(phi <= 0.0, rng.uniform(0.0, 1.0, size=L1), phi)

    R_user = np.empty((L1, L1, K, N_t, N_t), dtype=complex)
    for p in range(L1):
        for l in range(L1):
            for k in range(K):
                R_user[p, l, k] = ula_correlation(N_t, cfg.theta_b, aoa_user[p, l, k],
                                                  cfg.sigma, gain[p, l] * N_t)
    R_eve_tx = np.stack([ula_correlation(N_t, cfg.theta_b, aoa_eve[l], cfg.sigma,
                                         eve_gain[l] * N_t) for l in range(L1)])
    R_eve_rx = np.stack([exp_correlation(N_e, phi[l]) for l in range(L1)])
    return CorrelationSet(R_user, R_eve_tx, R_eve_rx, mode="correlated",
                          mean_aoa=np.concatenate([aoa_user.ravel(), aoa_eve]), phi=phi)


def crandn(rng: np.random.Generator, *shape) -> np.ndarray:
    """Standard circularly-symmetric complex Gaussian samples."""
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2.0)


@dataclass
class ChannelRealization:
    """One coherence block of channel draws.

    ``h_user[p, l, k]`` is the channel of user ``k`` in cell ``l`` seen at
    base station ``p``; ``H_eve[l]`` is the ``N_t x N_e`` eavesdropper channel
    at base station ``l``.
    """

    h_user: np.ndarray   # (L+1, L+1, K, N_t)
    H_eve: np.ndarray    # (L+1, N_t, N_e)

    @property
    def H0(self) -> np.ndarray:
        """Cell-0 user channels at BS 0 as columns, ``N_t x K``."""
        return self.h_user[0, 0].T

    @property
    def H_I(self) -> np.ndarray:
        """Interfering-cell user channels at BS 0 as columns, ``N_t x LK``."""
        return self.h_user[0, 1:].reshape(-1, self.h_user.shape[-1]).T


def sample_channels(corr: CorrelationSet, rng: np.random.Generator) -> ChannelRealization:
    L1, K, N_t, N_e = corr.L + 1, corr.K, corr.N_t, corr.N_e
    g = crandn(rng, L1, L1, K, N_t)
    h = np.einsum("plkij,plkj->plki", corr.sqrt_user(), g)
    tx, rx = corr.sqrt_eve()
    G = crandn(rng, L1, N_t, N_e)
    H_eve = tx @ G @ rx
    return ChannelRealization(h, H_eve)
