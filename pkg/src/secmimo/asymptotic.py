"""Closed-form large-array secrecy rates.

The general formula needs the correlation matrices only through a handful of
trace functionals, collected in :class:`TraceMoments`. They can be computed
from a dense :class:`~secmimo.channel.CorrelationSet` or written down directly
for scaled-identity correlations, which keeps large-``N_t`` evaluations cheap.

``literal_form=True`` selects an alternative form of the general formula that
multiplies by traces where the default divides, uses ``P0`` in every block
and drops the same-pilot leakage term. It does not reduce to the i.i.d.
closed form (its signal term grows like ``N_t**3``) and is kept only for
comparison. The README lists every difference.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .channel import CorrelationSet
from .config import SystemConfig


@dataclass
class TraceMoments:
    """Trace functionals of the user correlations.

    ``t1[l, p] = tr R_lp^l``, ``t2[l, p, t] = tr(R_lp^l R_lt^l)``,
    ``x2[l, k, p] = tr(R_lk^0 R_lp^l)`` and
    ``x3[l, p, k, m] = tr(R_lp^l R_lk^0 R_lm^l)``.
    """

    t1: np.ndarray
    t2: np.ndarray
    x2: np.ndarray
    x3: np.ndarray
    N_t: int

    @property
    def L(self) -> int:
        return self.t1.shape[0] - 1

    @property
    def K(self) -> int:
        return self.t1.shape[1]


def trace_moments(corr: CorrelationSet) -> TraceMoments:
    R = corr.R_user
    L1, K = corr.L + 1, corr.K
    own = np.stack([R[l, l] for l in range(L1)])     # R_lp^l, (L+1, K, N, N)
    at0 = R[0]                                        # R_lk^0, (L+1, K, N, N)
    t1 = np.trace(own, axis1=-2, axis2=-1).real
    # tr(AB) = sum(A * B^T)
    t2 = np.einsum("lpij,ltji->lpt", own, own).real
    x2 = np.einsum("lkij,lpji->lkp", at0, own).real
    x3 = np.empty((L1, K, K, K))
    for l in range(L1):
        for p in range(K):
            left = own[l, p] @ at0[l]                 # (K, N, N), R_lp^l R_lk^0
            x3[l, p] = np.einsum("kij,mji->km", left, own[l]).real
    return TraceMoments(t1, t2, x2, x3, corr.N_t)


def iid_trace_moments(beta: np.ndarray, N_t: int) -> TraceMoments:
    """Moments for ``R_lk^p = beta[p, l, k] * I``."""
    beta = np.asarray(beta, float)
    L1 = beta.shape[0]
    own = np.stack([beta[l, l] for l in range(L1)])   # (L+1, K)
    at0 = beta[0]                                      # (L+1, K)
    t1 = N_t * own
    t2 = N_t * own[:, :, None] * own[:, None, :]
    x2 = N_t * at0[:, :, None] * own[:, None, :]
    x3 = N_t * own[:, :, None, None] * at0[:, None, :, None] * own[:, None, None, :]
    return TraceMoments(t1, t2, x2, x3, N_t)


def iid_betas(cfg: SystemConfig) -> np.ndarray:
    """Large-scale gains ``beta[p, l, k]``: 1 on own-cell links, ``cfg.beta`` otherwise."""
    L1 = cfg.L + 1
    gain = np.where(np.eye(L1, dtype=bool), 1.0, cfg.beta)
    return np.repeat(gain[:, :, None], cfg.K, axis=2)


@dataclass
class AsymptoticTerms:
    """Power-independent terms of the general formula.

    Diagonal matrices are stored by their diagonals: ``A1[l, t, p]`` is entry
    ``p`` of block ``(l, t)``. ``b[t, k]`` and ``c[l, t, k]`` are the
    intra-cell and inter-cell interference terms seen by cell-0 user ``k``.
    """

    A1: np.ndarray
    A2: np.ndarray
    A3: np.ndarray
    A4: np.ndarray
    A5: np.ndarray
    a1: np.ndarray      # (L+1, K); (L+1, K, K) indexed [l, t, k] in the literal form
    a2: np.ndarray      # (K,)
    b: np.ndarray       # (K, K)
    c: np.ndarray       # (L+1, K, K), c[0] unused
    P_I: float
    literal_form: bool = False

    def _a1(self, l, t, k):
        return self.a1[l, t, k] if self.a1.ndim == 3 else self.a1[l, t]

    def gamma_bar(self, P: float, N0d: float = 1.0) -> np.ndarray:
        L1, K = self.A1.shape[0], self.A1.shape[1]
        out = np.empty(K)
        for k in range(K):
            intra = sum(self.b[t, k] / self._a1(0, t, k) for t in range(K) if t != k)
            inter = sum(self.c[l, t, k] / self._a1(l, t, k)
                        for l in range(1, L1) for t in range(K))
            out[k] = P * self.a2[k] / (self._a1(0, k, k) * (N0d + P * intra + P * inter))
        return out

    def secrecy_rate(self, P: float, N0d: float = 1.0) -> float:
        return float(np.sum(np.log2(1.0 + self.gamma_bar(P, N0d))))


def build_A_matrices(mom: TraceMoments, l: int, t: int, P_up: float, tau: int, N0: float,
                     literal_form: bool = False):
    """Diagonals of ``A1..A5`` for block ``(l, t)``."""
    if np.any(mom.t1 <= 0):
        raise ValueError("correlation traces must be positive")
    tr = mom.t1[l]
    A1 = mom.t2[l, :, t] / tr
    A2 = 1.0 / (N0 + tau * P_up * A1)
    A3 = A1 ** 2 * A2 ** 2
    if literal_form:
        A4 = A3 * tr
        A5 = A2 * A1 * mom.t1[0]
    else:
        A4 = A3 / tr
        A5 = A2 * A1 / tr
    return A1, A2, A3, A4, A5


def theorem2_terms(mom: TraceMoments, cfg: SystemConfig, literal_form: bool = False,
                   P_I: Optional[float] = None) -> AsymptoticTerms:
    """Evaluate every power-independent term of the general formula.

    ``P_I`` is the common uplink power of the interfering cells and defaults
    to ``cfg.P_l``.
    """
    L1, K = mom.L + 1, mom.K
    if (cfg.L + 1, cfg.K) != (L1, K):
        raise ValueError("config and trace moments disagree on L or K")
    P_I = cfg.P_l if P_I is None else P_I
    P0, tau, N0 = cfg.P0, cfg.tau, cfg.N0
    shape = (L1, K, K)
    A = [np.empty(shape) for _ in range(5)]
    for l in range(L1):
        P_up = P0 if (l == 0 or literal_form) else P_I
        for t in range(K):
            for i, d in enumerate(build_A_matrices(mom, l, t, P_up, tau, N0, literal_form)):
                A[i][l, t] = d
    A1, A2, A3, A4, A5 = A
    t1, t2, x2, x3 = mom.t1, mom.t2, mom.x2, mom.x3
    off = ~np.eye(K, dtype=bool)

    def a1_block(l, t, noise_tr):
        P_up = P0 if (l == 0 or literal_form) else P_I
        d4 = A4[l, t]
        data = np.sum(d4[off[t]] * t2[l, t, off[t]]) + d4[t] * t1[l, t] ** 2
        return P_up * tau * (P_up * tau * data + N0 * np.sum(d4 * noise_tr))

    if literal_form:
        # the literal noise sum uses tr(R_lk^l) with k the evaluated user
        a1 = np.array([[[a1_block(l, t, t1[l, k]) for k in range(K)] for t in range(K)]
                       for l in range(L1)])
    else:
        a1 = np.array([[a1_block(l, t, t1[l]) for t in range(K)] for l in range(L1)])

    a2 = np.empty(K)
    for k in range(K):
        d5, d4 = A5[0, k], A4[0, k]
        x = d5[k] * t1[0, k] ** 2 + np.sum(d5[off[k]] * t2[0, k, off[k]])
        y = d4[k] * t1[0, k] ** 2 + np.sum(d4[off[k]] * t2[0, k, off[k]])
        a2[k] = P0 ** 2 * tau ** 2 * x ** 2 + P0 * N0 * tau * y

    b = np.empty((K, K))
    for t in range(K):
        for k in range(K):
            d = A5[0, t, k]
            b[t, k] = ((P0 * tau * t1[0, k] * d) ** 2 * t2[0, k, t]
                       + P0 * tau * N0 * t1[0, k] ** 3 * d ** 2)

    c = np.zeros((L1, K, K))
    for l in range(1, L1):
        P_up = P0 if literal_form else P_I
        for t in range(K):
            d = A5[l, t]
            for k in range(K):
                cross = x3[l, :, k, :] * np.outer(d, d)
                noise = (np.sum(d ** 2 * x2[l, k] * t1[l])
                         + np.sum(cross[off]))
                c[l, t, k] = P_up * tau * N0 * noise
                if not literal_form:
                    c[l, t, k] += (P_up * tau * t1[l, t] * d[t]) ** 2 * x2[l, k, t]
    return AsymptoticTerms(A1, A2, A3, A4, A5, a1, a2, b, c, P_I, literal_form)


def theorem2_gamma(mom: TraceMoments, cfg: SystemConfig, k: Optional[int] = None,
                   literal_form: bool = False):
    """Large-array SINR of cell-0 user ``k`` (all users if None)."""
    g = theorem2_terms(mom, cfg, literal_form).gamma_bar(cfg.P, cfg.N0d)
    return g if k is None else g[k]


def theorem2_secrecy(mom: TraceMoments, cfg: SystemConfig, literal_form: bool = False) -> float:
    """``sum_k log2(1 + gamma_bar_k)``."""
    return theorem2_terms(mom, cfg, literal_form).secrecy_rate(cfg.P, cfg.N0d)


@dataclass
class IidAsymptoticTerms:
    a1: np.ndarray      # (K,)
    a2: np.ndarray      # (K, K) [k, t]
    a3: np.ndarray      # (L+1, K, K) [l, k, t], a3[0] unused
    gamma_bar: np.ndarray
    R_sec: float


def theorem3_terms(cfg: SystemConfig, beta: Optional[np.ndarray] = None,
                   literal_form: bool = False, P_I: Optional[float] = None) -> IidAsymptoticTerms:
    """Closed form for ``R_lk^p = beta[p, l, k] I``.

    With ``literal_form=True`` the inter-cell numerator uses ``beta[0, l, t]``;
    the default ``beta[l, l, t]`` is what the general formula reduces to.
    """
    beta = iid_betas(cfg) if beta is None else np.asarray(beta, float)
    P_I = cfg.P_l if P_I is None else P_I
    L1, K = cfg.L + 1, cfg.K
    N, P0, tau, N0 = cfg.N_t, cfg.P0, cfg.tau, cfg.N0
    b0 = beta[0, 0]
    s = N + K - 1
    a1 = (P0 * tau * (b0 * s) ** 2 + N0 * b0 * s) / (P0 * tau * b0 * s + K * N0)
    a2 = ((P0 * tau * N * b0[:, None] * b0[None, :] + N0 * N * b0[:, None])
          / (P0 * tau * b0[None, :] * s + K * N0))
    a3 = np.zeros((L1, K, K))
    for l in range(1, L1):
        bk0 = beta[0, l]                  # beta_lk^0
        bt_num = beta[0, l] if literal_form else beta[l, l]
        btl = beta[l, l]                  # beta_lt^l
        num = P_I * tau * N * bk0[:, None] * bt_num[None, :] + bk0[:, None] * N0 * (K + K * (K - 1) / N)
        a3[l] = num / (P_I * tau * btl[None, :] * s + K * N0)
    off = ~np.eye(K, dtype=bool)
    intra = np.where(off, a2, 0.0).sum(axis=1)
    inter = a3[1:].sum(axis=(0, 2))
    gamma = cfg.P * a1 / (cfg.N0d + cfg.P * intra + cfg.P * inter)
    return IidAsymptoticTerms(a1, a2, a3, gamma, float(np.sum(np.log2(1.0 + gamma))))


def theorem3_gamma(cfg: SystemConfig, beta: Optional[np.ndarray] = None, **kw) -> np.ndarray:
    return theorem3_terms(cfg, beta, **kw).gamma_bar


def theorem3_secrecy(cfg: SystemConfig, beta: Optional[np.ndarray] = None, **kw) -> float:
    return theorem3_terms(cfg, beta, **kw).R_sec


def corollary1_rate(cfg: SystemConfig, beta01: float = 1.0) -> float:
    """Single-cell single-user large-array rate ``log2(1 + P N_t beta / N0d)``.

    The vanishing correction term is dropped.
    """
    if cfg.L != 0 or cfg.K != 1:
        raise ValueError(f"requires L=0 and K=1 (got L={cfg.L}, K={cfg.K})")
    return float(np.log2(1.0 + cfg.P * cfg.N_t * beta01 / cfg.N0d))
