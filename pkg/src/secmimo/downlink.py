"""Downlink precoding, user SINR, eavesdropper capacity and Monte Carlo rates.

Every base station ``l`` beams to its users along the estimated projected
channels mapped back to antenna space. The eavesdropper decodes the stream of
cell-0 user ``k`` with an MMSE combiner across its ``N_e`` antennas while all
other streams of all cells act as interference.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .channel import ChannelRealization, CorrelationSet, sample_channels
from .config import SystemConfig
from .estimator import estimate_cell
from .uplink import build_frame

SCHEMES = ("proposed", "contaminated_mf")
MAX_RESAMPLES = 10


class DegenerateTrialError(ValueError):
    """A channel estimate has zero norm, so no beam direction exists."""


@dataclass
class PrecoderSet:
    t: np.ndarray   # (L+1, K, N_t), unit-norm beams, t[l, k] serves user k of cell l


def _normalize(v: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(v, axis=-1, keepdims=True)
    if np.any(~np.isfinite(norms)) or np.any(norms == 0):
        raise DegenerateTrialError("zero-norm channel estimate")
    return v / norms


def make_precoders(V_eqs: Sequence[np.ndarray], h_hats: Sequence[np.ndarray]) -> PrecoderSet:
    """``t_lk = V_eq^l^H h_hat_lk / ||h_hat_lk||`` for every cell.

    ``V_eqs[l]`` is K x N_t with orthonormal rows and ``h_hats[l]`` holds the
    K projected estimates of cell ``l`` as rows.
    """
    beams = [_normalize(h) @ V.conj() for V, h in zip(V_eqs, h_hats)]
    return PrecoderSet(np.stack(beams))


def contaminated_mf_beams(Y_p: np.ndarray, pilots: np.ndarray, P_up: float) -> np.ndarray:
    """Matched-filter beams from pilot-only least-squares estimates.

    ``h_k = Y_p conj(w_k) / (sqrt(P_up) tau)`` includes the attack, so the
    beams lean toward the eavesdropper. Returns K x N_t unit-norm rows.
    """
    tau = pilots.shape[0]
    h_ls = (Y_p @ pilots.conj()).T / (np.sqrt(P_up) * tau)
    return _normalize(h_ls)


def contaminated_mf_precoder(Y_p: np.ndarray, pilots: np.ndarray, cfg: SystemConfig) -> PrecoderSet:
    """Baseline precoder for cell 0 only; see :func:`contaminated_mf_beams`."""
    return PrecoderSet(contaminated_mf_beams(Y_p, pilots, cfg.P0)[None])


def link_gains(chan: ChannelRealization, precoders: PrecoderSet) -> np.ndarray:
    """Unit-power downlink gains ``|h_lk^0^H t_lt|^2`` indexed ``[l, t, k]``."""
    # h_user[0, l, k] is the channel of user (l, k) at BS 0
    inner = np.einsum("lki,lti->ltk", chan.h_user[0].conj(), precoders.t)
    return np.abs(inner) ** 2


def sinr_from_gains(gains: np.ndarray, P: float, N0d: float) -> np.ndarray:
    """SINR of every cell-0 user from unit-power gains ``[..., l, t, k]``."""
    own = gains[..., 0, :, :]
    signal = np.diagonal(own, axis1=-2, axis2=-1)
    intra = own.sum(axis=-2) - signal
    inter = gains[..., 1:, :, :].sum(axis=(-3, -2))
    return P * signal / (N0d + P * (intra + inter))


def user_sinr(chan: ChannelRealization, precoders: PrecoderSet, cfg: SystemConfig) -> np.ndarray:
    return sinr_from_gains(link_gains(chan, precoders), cfg.P, cfg.N0d)


def eve_vectors(chan: ChannelRealization, precoders: PrecoderSet) -> np.ndarray:
    """Effective eavesdropper channels ``H_e^l^H t_lk`` indexed ``[l, :, k]``."""
    return np.einsum("lie,lki->lek", chan.H_eve.conj(), precoders.t)


def eve_capacity_from_vectors(vecs: np.ndarray, P: float, N0d: float) -> np.ndarray:
    """Eavesdropper capacity for every cell-0 stream.

    ``vecs`` is (L+1, N_e, K). For stream ``k`` the interference covariance
    holds every other stream of cell 0 and all streams of the other cells.
    """
    N_e, K = vecs.shape[1], vecs.shape[2]
    own = vecs[0]
    total = P * (np.einsum("lek,lfk->ef", vecs, vecs.conj())) + N0d * np.eye(N_e)
    out = np.empty(K)
    for k in range(K):
        a = own[:, k]
        Q = total - P * np.outer(a, a.conj())
        q = np.real(a.conj() @ np.linalg.solve(Q, a))
        out[k] = np.log2(1.0 + P * max(q, 0.0))
    return out


def eve_capacity(chan: ChannelRealization, precoders: PrecoderSet, cfg: SystemConfig,
                 k: Optional[int] = None):
    """Capacity of the eavesdropper decoding cell-0 stream ``k`` (all if None)."""
    c = eve_capacity_from_vectors(eve_vectors(chan, precoders), cfg.P, cfg.N0d)
    return c if k is None else c[k]


def secrecy_sum_rate(R_user, C_eve) -> float:
    """``sum_k max(0, R_k - C_k)``."""
    R_user, C_eve = np.asarray(R_user, float), np.asarray(C_eve, float)
    if R_user.shape != C_eve.shape:
        raise ValueError("rate vectors differ in length")
    return float(np.sum(np.maximum(R_user - C_eve, 0.0)))


@dataclass
class SecrecyEvaluation:
    """Ergodic rates of one scenario at one downlink power.

    ``R_sec`` takes expectations first and clamps after; ``R_sec_clamped``
    averages the per-trial clamped sums and is kept for diagnostics.
    """

    gamma: np.ndarray               # (K,) trial-mean SINR
    R_user: np.ndarray              # (K,) trial-mean log2(1 + SINR)
    C_eve: np.ndarray               # (K,) trial-mean eavesdropper capacity
    R_sec: float
    R_sec_stderr: float
    R_sec_clamped: float
    trials: int
    gamma_trials: np.ndarray = field(repr=False)    # (n, K)
    c_eve_trials: np.ndarray = field(repr=False)    # (n, K)

    def records(self):
        """Per-trial rows ``(trial, k, gamma_k, rate_k, c_eve_k)``."""
        n, K = self.gamma_trials.shape
        for i in range(n):
            for k in range(K):
                g = self.gamma_trials[i, k]
                yield i, k, g, np.log2(1.0 + g), self.c_eve_trials[i, k]

    def write_records(self, fh) -> None:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["trial", "k", "gamma_k", "rate_k", "c_eve_k"])
        for i, k, g, r, c in self.records():
            w.writerow([i, k, repr(float(g)), repr(float(r)), repr(float(c))])

    def records_csv(self) -> str:
        buf = io.StringIO()
        self.write_records(buf)
        return buf.getvalue()


def _stderr(x: np.ndarray) -> float:
    return float(np.std(x, ddof=1) / np.sqrt(len(x))) if len(x) > 1 else 0.0


@dataclass
class LinkSamples:
    """Power-independent per-trial outputs of the link simulation.

    Downlink rates for any ``P`` follow from the stored unit-power gains, so
    an SNR sweep reuses the same fading and estimation draws.
    """

    scheme: str
    gains: np.ndarray       # (n, L+1, K, K) unit-power |h^H t|^2, [l, t, k]
    eve: np.ndarray         # (n, L+1, N_e, K) effective eavesdropper channels
    nmse: np.ndarray        # (n,) normalized MSE of the cell-0 estimate (nan for MF)
    eve_leakage: np.ndarray  # (n,) ||V_eq H_e^0||_F^2 / ||H_e^0||_F^2 (nan for MF)
    resampled: int = 0

    @property
    def trials(self) -> int:
        return self.gains.shape[0]

    def evaluate(self, P: float, N0d: float = 1.0) -> SecrecyEvaluation:
        gamma = sinr_from_gains(self.gains, P, N0d)
        rate = np.log2(1.0 + gamma)
        c_eve = np.stack([eve_capacity_from_vectors(v, P, N0d) for v in self.eve])
        R_user, C_eve = rate.mean(axis=0), c_eve.mean(axis=0)
        diff = rate - c_eve
        return SecrecyEvaluation(
            gamma=gamma.mean(axis=0), R_user=R_user, C_eve=C_eve,
            R_sec=secrecy_sum_rate(R_user, C_eve),
            R_sec_stderr=_stderr(diff.sum(axis=1)),
            R_sec_clamped=float(np.maximum(diff, 0.0).sum(axis=1).mean()),
            trials=self.trials, gamma_trials=gamma, c_eve_trials=c_eve)


def simulate_trial(cfg: SystemConfig, corr: CorrelationSet, scheme: str,
                   rng: np.random.Generator):
    """One coherence block: channels, uplink frames, estimation and beams.

    Returns ``(gains, eve_vectors, nmse, eve_leakage)``.
    """
    chan = sample_channels(corr, rng)
    frame = build_frame(cfg, chan, rng)
    nmse = leakage = np.nan
    if scheme == "proposed":
        V_eqs, h_hats = [], []
        for m in range(cfg.L + 1):
            sel, est = estimate_cell(cfg, corr, frame.Y0(m), frame.Y_p[m], frame.pilots, m,
                                     h_true=chan.h_user[m, m] if m == 0 else None)
            V_eqs.append(sel.V_eq)
            h_hats.append(est.h_hat)
            if m == 0:
                err = est.h_hat - est.h_eq
                nmse = float(np.sum(np.sum(np.abs(err) ** 2, axis=1)
                                    / np.sum(np.abs(est.h_eq) ** 2, axis=1)))
                He = chan.H_eve[0]
                leakage = float(np.linalg.norm(sel.V_eq @ He) ** 2 / np.linalg.norm(He) ** 2)
        pre = make_precoders(V_eqs, h_hats)
    elif scheme == "contaminated_mf":
        pre = PrecoderSet(np.stack([
            contaminated_mf_beams(frame.Y_p[m], frame.pilots, cfg.uplink_power(m))
            for m in range(cfg.L + 1)]))
    else:
        raise ValueError(f"unknown scheme {scheme!r}; expected one of {SCHEMES}")
    return link_gains(chan, pre), eve_vectors(chan, pre), nmse, leakage


def trial_rng(seed, trial: int, attempt: int = 0) -> np.random.Generator:
    """Independent stream per (seed, trial, attempt); ``seed`` may be a tuple."""
    key = [*np.atleast_1d(seed).tolist(), trial]
    if attempt:
        key.append(attempt)
    return np.random.default_rng(key)


def run_link_trials(cfg: SystemConfig, corr: CorrelationSet, scheme: str = "proposed",
                    trials: int = 50, seed=0) -> LinkSamples:
    """Run ``trials`` independent blocks; deterministic given ``seed``."""
    if trials < 1:
        raise ValueError("trials must be >= 1")
    if scheme not in SCHEMES:
        raise ValueError(f"unknown scheme {scheme!r}; expected one of {SCHEMES}")
    out = []
    resampled = 0
    for i in range(trials):
        for attempt in range(MAX_RESAMPLES + 1):
            try:
                out.append(simulate_trial(cfg, corr, scheme, trial_rng(seed, i, attempt)))
                break
            except DegenerateTrialError:
                resampled += 1
        else:
            raise DegenerateTrialError(f"trial {i} degenerate after {MAX_RESAMPLES} resamples")
    gains, eve, nmse, leak = zip(*out)
    return LinkSamples(scheme, np.stack(gains), np.stack(eve), np.array(nmse),
                       np.array(leak), resampled)


def run_montecarlo(cfg: SystemConfig, corr: CorrelationSet, scheme: str = "proposed",
                   trials: int = 50, seed=0):
    """Ergodic rates at ``cfg.P`` plus the reusable per-trial samples."""
    samples = run_link_trials(cfg, corr, scheme, trials, seed)
    return samples.evaluate(cfg.P, cfg.N0d), samples
