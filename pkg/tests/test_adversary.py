"""Input/attack policy distributions and attack-free run statistics."""

import math

import numpy as np
import pytest

from robust_sysid import streams
from robust_sysid.adversary import (
    AttackPolicy,
    InputPolicy,
    check_attack_probability,
    draw_input,
    max_attack_free_run,
)


def rng(seed=0, purpose=streams.INPUTS):
    return streams.substream(seed, purpose)


class TestDrawInput:
    def test_zero_policy(self):
        assert np.all(draw_input(InputPolicy(kind="zero"), rng(), 5) == 0.0)

    def test_gaussian_moments(self):
        pol = InputPolicy(kind="gaussian_iso", mean=0.0, variance=100.0)
        U = pol.draw(rng(1), 100000, 5)
        assert np.abs(U.mean(axis=0)).max() < 0.3
        assert np.abs(U.var(axis=0) - 100.0).max() < 2.0

    def test_uniform_box_mean(self):
        pol = InputPolicy(kind="uniform_box", lo=-8.0, hi=10.0)
        U = pol.draw(rng(2), 100000, 5)
        assert np.abs(U.mean(axis=0) - 1.0).max() < 0.1

    def test_rademacher_support(self):
        U = InputPolicy(kind="rademacher").draw(rng(3), 1000, 3)
        assert set(np.unique(U)) == {-1.0, 1.0}

    def test_lag1_independence(self):
        # sample autocorrelation of ||u_t|| at lag 1 within +-0.05 at T=10000
        pol = InputPolicy(kind="uniform_box", lo=-8.0, hi=10.0)
        U = pol.draw(rng(4), 10000, 5)
        nrm = np.linalg.norm(U, axis=1)
        z = nrm - nrm.mean()
        ac1 = float((z[1:] * z[:-1]).mean() / (z * z).mean())
        assert abs(ac1) < 0.05

    def test_sigma_u_proxies(self):
        assert InputPolicy(kind="gaussian_iso", variance=100.0).sigma_u == 10.0
        assert InputPolicy(kind="uniform_box", lo=-8.0, hi=10.0).sigma_u == 9.0
        assert InputPolicy(kind="rademacher").sigma_u == 1.0


class TestDrawDisturbance:
    def test_unflagged_steps_stay_zero(self):
        pol = AttackPolicy(p=0.3, kind="signed_mean_gaussian", mean_pos=300.0, mean_neg=1000.0, variance=25.0)
        flags = pol.draw_flags(rng(5, streams.ATTACK_FLAGS), 500)
        w_pos, w_neg = pol.draw_magnitudes(rng(5, streams.ATTACK_MAGNITUDES), flags, 4)
        assert np.all(w_pos[~flags] == 0.0) and np.all(w_neg[~flags] == 0.0)

    def test_signed_mean_gaussian_statistics(self):
        # positive-coordinate branch has mean ~ +300 within +-1 over ~1e5 draws
        pol = AttackPolicy(p=1.0, kind="signed_mean_gaussian", mean_pos=300.0, mean_neg=1000.0, variance=25.0)
        flags = np.ones(20000, dtype=bool)
        w_pos, w_neg = pol.draw_magnitudes(rng(6, streams.ATTACK_MAGNITUDES), flags, 5)
        assert abs(w_pos.mean() - 300.0) < 1.0
        assert np.all(w_pos > 0)
        assert abs(w_neg.mean() + 1000.0) < 1.0
        assert np.all(w_neg < 0)
        assert abs(w_pos.std() - 5.0) < 0.1

    def test_constant_sigma_exact(self):
        pol = AttackPolicy(p=0.5, kind="constant_sigma", value=7.25)
        flags = pol.draw_flags(rng(7, streams.ATTACK_FLAGS), 100)
        w_pos, w_neg = pol.draw_magnitudes(rng(7, streams.ATTACK_MAGNITUDES), flags, 3)
        assert np.all(w_pos[flags] == 7.25) and np.all(w_neg[flags] == 7.25)

    def test_attack_frequency_concentration(self):
        p, T = 1 / 11, 2000
        for seed in range(5):
            pol = AttackPolicy(p=p, kind="constant_sigma", value=1.0)
            flags = pol.draw_flags(rng(100 + seed, streams.ATTACK_FLAGS), T)
            assert abs(flags.mean() - p) <= 3 * math.sqrt(p * (1 - p) / T)


class TestAssumptionGuard:
    def test_enforced_raises(self):
        with pytest.raises(ValueError):
            check_attack_probability(0.45, 5, enforce=True)

    def test_warn_and_proceed(self):
        with pytest.warns(UserWarning):
            assert check_attack_probability(0.45, 5, enforce=False) is False

    def test_paper_choice_satisfies(self):
        # p = 1/(2 tau + 1) satisfies p < 1/(2 tau)
        assert check_attack_probability(1 / 11, 5, enforce=True) is True


def longest_run_cdf_below(T: int, p: float, run_len: int) -> float:
    """Exact P(longest zero-run < run_len) by transfer-matrix DP."""
    probs = np.zeros(run_len)
    probs[0] = 1.0
    q = 1 - p
    for _ in range(T):
        new = np.zeros(run_len)
        new[0] = probs.sum() * p
        new[1:] = probs[:-1] * q
        probs = new
    return float(probs.sum())


class TestMaxAttackFreeRun:
    def test_all_zeros(self):
        assert max_attack_free_run(np.zeros(10)) == 10

    def test_pattern(self):
        assert max_attack_free_run([0, 0, 1, 0, 0, 0, 1]) == 3

    def test_all_ones(self):
        assert max_attack_free_run([1, 1, 1]) == 0

    def test_matches_exact_distribution(self):
        # empirical CDF at several thresholds matches the DP oracle
        tau, T, p = 5, 500, 1 / 11
        n_seeds = 1000
        pol = AttackPolicy(p=p, kind="constant_sigma", value=1.0)
        runs = np.array([
            max_attack_free_run(pol.draw_flags(rng(seed, streams.ATTACK_FLAGS), T))
            for seed in range(n_seeds)
        ])
        for thresh in (30, 43, 60, 90):
            want = longest_run_cdf_below(T, p, thresh)
            got = float((runs < thresh).mean())
            se = math.sqrt(max(want * (1 - want), 1e-4) / n_seeds)
            assert abs(got - want) <= 4 * se + 1e-9

    def test_union_bound_threshold_holds(self):
        # threshold ln(T/delta)/(-ln(1-p)) from the union bound: the run is
        # below it with probability at least 1 - delta (checked exactly and
        # empirically)
        tau, T, delta, p = 5, 500, 0.1, 1 / 11
        thresh = math.log(T / delta) / (-math.log(1 - p))
        exact = longest_run_cdf_below(T, p, math.floor(thresh) + 1)
        assert exact >= 1 - delta
        pol = AttackPolicy(p=p, kind="constant_sigma", value=1.0)
        runs = np.array([
            max_attack_free_run(pol.draw_flags(rng(seed, streams.ATTACK_FLAGS), T))
            for seed in range(1000)
        ])
        assert (runs < thresh).mean() >= 1 - delta - 0.02


class TestSerialization:
    def test_attack_roundtrip(self):
        pol = AttackPolicy(p=0.2, kind="signed_mean_gaussian", mean_pos=1.0, mean_neg=2.0, variance=3.0)
        doc = pol.to_json_dict()
        assert doc == {"p": 0.2, "kind": "signed_mean_gaussian", "params": [1.0, 2.0, 3.0]}
        assert AttackPolicy.from_json_dict(doc) == pol

    def test_input_roundtrip(self):
        pol = InputPolicy(kind="uniform_box", lo=-8.0, hi=10.0)
        assert InputPolicy.from_json_dict(pol.to_json_dict()) == pol
