import io

import numpy as np
import pytest

from secmimo.channel import ChannelRealization, build_correlation_set, crandn, sample_channels
from secmimo.config import SystemConfig
from secmimo.downlink import (DegenerateTrialError, PrecoderSet, contaminated_mf_beams,
                              eve_capacity, eve_capacity_from_vectors, link_gains,
                              make_precoders, run_link_trials, run_montecarlo,
                              secrecy_sum_rate, sinr_from_gains, user_sinr)
from secmimo.estimator import estimate_cell
from secmimo.uplink import build_frame, make_pilots


def fake_channel(h_user, H_eve):
    """Wrap explicit arrays in a realization; only the fields used here matter."""
    return ChannelRealization(h_user=h_user, H_eve=H_eve)


class TestPrecoders:
    def test_unit_norm(self, rng, small_cfg):
        corr = build_correlation_set(small_cfg, seed=0)
        chan = sample_channels(corr, rng)
        frame = build_frame(small_cfg, chan, rng)
        V, h = [], []
        for m in range(small_cfg.L + 1):
            sel, est = estimate_cell(small_cfg, corr, frame.Y0(m), frame.Y_p[m], frame.pilots, m)
            V.append(sel.V_eq)
            h.append(est.h_hat)
        t = make_precoders(V, h).t
        assert t.shape == (small_cfg.L + 1, small_cfg.K, small_cfg.N_t)
        assert np.allclose(np.linalg.norm(t, axis=-1), 1.0)

    def test_noiseless_beam_aligns_with_channel(self, rng):
        cfg = SystemConfig(L=0, K=1, N_t=16, T=256, tau=4, P0=1.0, Pe=1e-3)
        corr = build_correlation_set(cfg, seed=2)
        chan = sample_channels(corr, rng)
        frame = build_frame(cfg, chan, rng, Pe=0.0, N0=1e-9)
        sel, est = estimate_cell(cfg, corr, frame.Y0(0), frame.Y_p[0], frame.pilots)
        t = make_precoders([sel.V_eq], [est.h_hat]).t[0, 0]
        h = chan.h_user[0, 0, 0]
        assert abs(np.vdot(h, t)) / np.linalg.norm(h) > 0.99

    def test_zero_estimate_rejected(self):
        with pytest.raises(DegenerateTrialError):
            make_precoders([np.eye(2, 4)], [np.zeros((2, 2))])

    def test_mf_aligns_without_attack(self, rng):
        W = make_pilots(2, 4)
        h = crandn(rng, 2, 8)
        Y = np.sqrt(2.0) * h.T @ W.T
        t = contaminated_mf_beams(Y, W, 2.0)
        for k in range(2):
            assert abs(np.vdot(h[k], t[k])) / np.linalg.norm(h[k]) == pytest.approx(1.0)

    def test_mf_leans_toward_eavesdropper_as_attack_grows(self):
        cfg = SystemConfig(L=0, K=2, N_e=1, N_t=32, T=128, tau=4, P0=1.0, Pe=1.0, fading="iid")
        corr = build_correlation_set(cfg)
        align = []
        for rho_db in (-10, 0, 10, 20):
            c = cfg.with_rho_db(rho_db)
            vals = []
            for s in range(30):
                rng = np.random.default_rng(s)
                chan = sample_channels(corr, rng)
                frame = build_frame(c, chan, rng)
                t = contaminated_mf_beams(frame.Y_p[0], frame.pilots, c.P0)
                he = chan.H_eve[0][:, 0]
                vals.append(np.mean(np.abs(t @ he.conj()) ** 2) / np.linalg.norm(he) ** 2)
            align.append(np.mean(vals))
        assert np.all(np.diff(align) > 0)


class TestSINR:
    def test_single_user_closed_form(self, rng):
        h = crandn(rng, 1, 1, 1, 6)
        t = h[0, 0] / np.linalg.norm(h[0, 0])
        chan = fake_channel(h, crandn(rng, 1, 6, 1))
        cfg = SystemConfig(L=0, K=1, N_t=6, T=16, tau=2, P0=1.0, Pe=1.0, P=3.0, N0d=0.5)
        g = user_sinr(chan, PrecoderSet(t[None]), cfg)
        assert g[0] == pytest.approx(3.0 * np.linalg.norm(h) ** 2 / 0.5)

    def test_interference_terms(self):
        gains = np.zeros((2, 2, 2))
        gains[0] = [[4.0, 1.0], [2.0, 8.0]]   # own cell, [t, k]
        gains[1] = [[0.5, 0.25], [0.5, 0.25]]
        g = sinr_from_gains(gains, 2.0, 1.0)
        assert g[0] == pytest.approx(8.0 / (1 + 2 * (2.0 + 1.0)))
        assert g[1] == pytest.approx(16.0 / (1 + 2 * (1.0 + 0.5)))

    def test_zero_power(self, rng):
        assert np.all(sinr_from_gains(np.abs(rng.normal(size=(2, 3, 3))), 0.0, 1.0) == 0)

    def test_phase_invariance(self, rng):
        h = crandn(rng, 2, 2, 3, 8)
        t = crandn(rng, 2, 3, 8)
        t /= np.linalg.norm(t, axis=-1, keepdims=True)
        chan = fake_channel(h, crandn(rng, 2, 8, 2))
        phase = np.exp(1j * rng.uniform(0, 2 * np.pi, size=(2, 3, 1)))
        assert np.allclose(link_gains(chan, PrecoderSet(t)), link_gains(chan, PrecoderSet(t * phase)))


class TestEveCapacity:
    def test_single_antenna_closed_form(self):
        vecs = np.array([[[1.0, 0.5]], [[0.2j, 0.1]]])   # (L+1=2, N_e=1, K=2)
        P, N0d = 2.0, 1.0
        c = eve_capacity_from_vectors(vecs, P, N0d)
        interf0 = P * (0.25 + 0.04 + 0.01)
        interf1 = P * (1.0 + 0.04 + 0.01)
        assert c[0] == pytest.approx(np.log2(1 + P * 1.0 / (N0d + interf0)))
        assert c[1] == pytest.approx(np.log2(1 + P * 0.25 / (N0d + interf1)))

    def test_orthogonal_beam_gives_nothing(self, rng):
        He = np.zeros((1, 4, 2), dtype=complex)
        He[0, 0, :] = crandn(rng, 2)
        t = np.zeros((1, 1, 4), dtype=complex)
        t[0, 0, 1] = 1.0
        chan = fake_channel(crandn(rng, 1, 1, 1, 4), He)
        cfg = SystemConfig(L=0, K=1, N_e=2, N_t=4, T=16, tau=2, P0=1.0, Pe=1.0, P=10.0)
        assert eve_capacity(chan, PrecoderSet(t), cfg, k=0) == pytest.approx(0.0, abs=1e-12)

    def test_multi_antenna_matches_mrc_without_interference(self, rng):
        a = crandn(rng, 3)
        vecs = a[None, :, None]
        c = eve_capacity_from_vectors(vecs, 4.0, 2.0)
        assert c[0] == pytest.approx(np.log2(1 + 4.0 * np.linalg.norm(a) ** 2 / 2.0))

    def test_nonnegative(self, rng):
        for _ in range(20):
            vecs = crandn(rng, 3, 2, 4)
            assert np.all(eve_capacity_from_vectors(vecs, 10.0, 1.0) >= 0)


class TestSecrecySum:
    def test_examples(self):
        assert secrecy_sum_rate([3.0, 1.0], [1.0, 2.0]) == pytest.approx(2.0)
        assert secrecy_sum_rate([1.0], [1.0]) == 0.0
        assert secrecy_sum_rate([0.5, 0.5], [0.0, 0.0]) == pytest.approx(1.0)

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            secrecy_sum_rate([1.0, 2.0], [1.0])

    def test_clamp_identity(self, rng):
        R, C = rng.uniform(0, 5, 10), rng.uniform(0, 5, 10)
        assert secrecy_sum_rate(R, C) == pytest.approx(np.sum(R - C) + np.sum(np.maximum(C - R, 0)))


class TestMonteCarlo:
    def test_deterministic(self, small_cfg):
        corr = build_correlation_set(small_cfg, seed=0)
        a, _ = run_montecarlo(small_cfg, corr, "proposed", trials=2, seed=5)
        b, _ = run_montecarlo(small_cfg, corr, "proposed", trials=2, seed=5)
        assert a.records_csv() == b.records_csv()
        c, _ = run_montecarlo(small_cfg, corr, "proposed", trials=2, seed=6)
        assert a.records_csv() != c.records_csv()

    def test_records_csv_layout(self, small_cfg):
        corr = build_correlation_set(small_cfg, seed=0)
        ev, samples = run_montecarlo(small_cfg, corr, "contaminated_mf", trials=3, seed=0)
        lines = ev.records_csv().strip().splitlines()
        assert lines[0] == "trial,k,gamma_k,rate_k,c_eve_k"
        assert len(lines) == 1 + 3 * small_cfg.K
        assert np.all(np.isnan(samples.nmse))
        assert ev.R_sec >= 0 and np.all(ev.C_eve >= 0)

    def test_sweep_reuses_draws(self, small_cfg):
        corr = build_correlation_set(small_cfg, seed=0)
        samples = run_link_trials(small_cfg, corr, "proposed", trials=4, seed=1)
        lo, hi = samples.evaluate(1.0), samples.evaluate(100.0)
        assert np.all(hi.gamma >= lo.gamma)
        assert np.isfinite(samples.nmse).all() and np.isfinite(samples.eve_leakage).all()

    def test_bad_arguments(self, small_cfg):
        corr = build_correlation_set(small_cfg, seed=0)
        with pytest.raises(ValueError):
            run_link_trials(small_cfg, corr, "zf", trials=1)
        with pytest.raises(ValueError):
            run_link_trials(small_cfg, corr, "proposed", trials=0)
