"""Uplink training/data frame under a pilot contamination attack."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .channel import ChannelRealization, crandn
from .config import SystemConfig


def make_pilots(K: int, tau: int) -> np.ndarray:
    """``tau x K`` orthogonal pilots: the first K columns of the unnormalized
    tau-point DFT matrix, so ``pilots^H pilots == tau * I``."""
    if K > tau:
        raise ValueError(f"K ≤ tau violated (K={K}, tau={tau})")
    n = np.arange(tau)
    return np.exp(-2j * np.pi * np.outer(n, np.arange(K)) / tau)


def make_attack(pilots: np.ndarray, N_e: int, T: int, rng: np.random.Generator):
    """Pilot attack and artificial noise of the eavesdropper.

    Every antenna of the eavesdropper sends the sum of all user pilots, so the
    ``N_e x tau`` attack matrix has identical rows. The artificial noise sent
    during uplink data is i.i.d. CN(0, 1), ``N_e x (T - tau)``.
    """
    tau = pilots.shape[0]
    attack_pilot = np.tile(pilots.sum(axis=1), (N_e, 1))
    attack_an = crandn(rng, N_e, T - tau)
    return attack_pilot, attack_an


@dataclass
class UplinkFrame:
    pilots: np.ndarray          # (tau, K)
    user_data: np.ndarray       # (L+1, K, T-tau)
    attack_pilot: np.ndarray    # (N_e, tau)
    attack_an: np.ndarray       # (N_e, T-tau)
    Y_p: np.ndarray             # (L+1, N_t, tau)
    Y_d: np.ndarray             # (L+1, N_t, T-tau)

    def Y0(self, m: int = 0) -> np.ndarray:
        """Full received block ``[Y_p Y_d]`` at base station ``m``."""
        return np.concatenate([self.Y_p[m], self.Y_d[m]], axis=1)


def assemble_received(cfg: SystemConfig, chan: ChannelRealization, pilots: np.ndarray,
                      user_data: np.ndarray, attack_pilot: np.ndarray,
                      attack_an: np.ndarray, rng: np.random.Generator,
                      Pe: Optional[float] = None, N0: Optional[float] = None) -> UplinkFrame:
    """Received pilot and data matrices at every base station.

    ``Pe`` and ``N0`` override the config values; zero is allowed here so
    that noiseless or attack-free frames can be built.
    """
    Pe = cfg.Pe if Pe is None else Pe
    N0 = cfg.N0 if N0 is None else N0
    L1, K = cfg.L + 1, cfg.K
    N_t, N_e, tau, T = cfg.N_t, cfg.N_e, cfg.tau, cfg.T
    if pilots.shape != (tau, K):
        raise ValueError(f"pilots must be {(tau, K)}, got {pilots.shape}")
    if user_data.shape != (L1, K, T - tau):
        raise ValueError(f"user_data must be {(L1, K, T - tau)}, got {user_data.shape}")
    if attack_pilot.shape != (N_e, tau) or attack_an.shape != (N_e, T - tau):
        raise ValueError("attack signals do not match (N_e, tau) / (N_e, T - tau)")
    if chan.h_user.shape != (L1, L1, K, N_t) or chan.H_eve.shape != (L1, N_t, N_e):
        raise ValueError("channel realization does not match the config")

    amp = np.sqrt([cfg.uplink_power(l) for l in range(L1)])
    X_p = np.tile(pilots.T, (L1, 1))             # ((L+1)K, tau), rows w_k^T
    X_d = user_data.reshape(L1 * K, T - tau)
    a_p = np.sqrt(Pe / (K * N_e))
    a_d = np.sqrt(Pe / N_e)
    noise_std = np.sqrt(N0)

    Y_p = np.empty((L1, N_t, tau), dtype=complex)
    Y_d = np.empty((L1, N_t, T - tau), dtype=complex)
    for m in range(L1):
        H = (chan.h_user[m] * amp[:, None, None]).reshape(L1 * K, N_t).T
        Y_p[m] = H @ X_p + a_p * (chan.H_eve[m] @ attack_pilot)
        Y_d[m] = H @ X_d + a_d * (chan.H_eve[m] @ attack_an)
        if N0 > 0:
            Y_p[m] += noise_std * crandn(rng, N_t, tau)
            Y_d[m] += noise_std * crandn(rng, N_t, T - tau)
    return UplinkFrame(pilots, user_data, attack_pilot, attack_an, Y_p, Y_d)


def build_frame(cfg: SystemConfig, chan: ChannelRealization, rng: np.random.Generator,
                **overrides) -> UplinkFrame:
    """Draw pilots, user data and attack signals, then assemble the frame."""
    pilots = make_pilots(cfg.K, cfg.tau)
    user_data = crandn(rng, cfg.L + 1, cfg.K, cfg.T - cfg.tau)
    attack_pilot, attack_an = make_attack(pilots, cfg.N_e, cfg.T, rng)
    return assemble_received(cfg, chan, pilots, user_data, attack_pilot, attack_an, rng,
                             **overrides)
