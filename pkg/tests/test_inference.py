"""Estimator and randomization-test checks against independent oracles.

The oracles here (full allocation enumeration, hand-built constrained
permutation sets) are written from scratch on purpose and never call the
code paths they check.
"""

from itertools import combinations
from math import comb

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bodydiscovery.inference import (
    baseline_decide,
    decide_body,
    diff_in_means,
    frt_p_value,
    oracle_true_effect,
    oracle_variance,
    run_tests,
    summarize_effects,
    EffectEstimate,
)
from bodydiscovery.model import ActionSequence


def enumerate_two_arm_allocations(t, n_1):
    """Oracle: every 0/1 assignment of t stages with n_1 ones."""
    for chosen in combinations(range(t), n_1):
        d = np.zeros(t, dtype=int)
        d[list(chosen)] = 1
        yield d


def observed_deltas(d, arm1, arm0):
    return np.where(d == 1, arm1, arm0)


def xi_hat_oracle(deltas, d, q):
    return deltas[d == q].mean() - deltas[d == 0].mean()


class TestDiffInMeans:
    def test_basic(self):
        assert diff_in_means(np.array([1.0, 0, 1, 0]), np.array([1, 0, 1, 0]), 1) == 1.0

    def test_constant_deltas_give_zero(self):
        actions = ActionSequence(np.array([0, 1, 2, 1, 0, 2]), 2)
        deltas = np.full(6, 3.7)
        for q in (1, 2):
            assert diff_in_means(deltas, actions, q) == pytest.approx(0.0, abs=1e-12)

    def test_linearity_in_scale(self):
        rng = np.random.default_rng(0)
        deltas = rng.normal(size=12)
        actions = ActionSequence(np.array([0, 1] * 6), 1)
        base = diff_in_means(deltas, actions, 1)
        assert diff_in_means(3.5 * deltas, actions, 1) == pytest.approx(3.5 * base)

    def test_missing_arm_rejected(self):
        with pytest.raises(ValueError):
            diff_in_means(np.zeros(3), np.array([1, 1, 1]), 1)


class TestOracles:
    def test_true_effect_identities(self):
        assert oracle_true_effect(np.ones(5), np.ones(5)) == 0.0
        assert oracle_true_effect(np.arange(5) + 2.0, np.arange(5) * 1.0) == pytest.approx(2.0)

    def test_unbiasedness_over_full_enumeration(self):
        # T=6, n_0=n_1=3: mean of the estimator over all 20 allocations
        # must equal the average treatment effect exactly.
        rng = np.random.default_rng(7)
        arm1 = rng.normal(1.5, 2.0, size=6)
        arm0 = rng.normal(0.0, 1.0, size=6)
        xi_true = oracle_true_effect(arm1, arm0)
        stats = [
            xi_hat_oracle(observed_deltas(d, arm1, arm0), d, 1)
            for d in enumerate_two_arm_allocations(6, 3)
        ]
        assert len(stats) == 20
        assert np.mean(stats) == pytest.approx(xi_true, abs=1e-12)

    def test_variance_matches_enumeration(self):
        rng = np.random.default_rng(11)
        arm1 = rng.normal(2.0, 1.5, size=6)
        arm0 = rng.normal(0.0, 0.7, size=6)
        stats = [
            xi_hat_oracle(observed_deltas(d, arm1, arm0), d, 1)
            for d in enumerate_two_arm_allocations(6, 3)
        ]
        empirical = np.mean((np.array(stats) - np.mean(stats)) ** 2)
        vc = oracle_variance(arm1, arm0, n_q=3, n_0=3)
        assert vc.var_xi == pytest.approx(empirical, abs=1e-10)

    def test_variance_components_identities(self):
        # Constant arms: everything vanishes.
        vc = oracle_variance(np.full(6, 2.0), np.full(6, 2.0), 3, 3)
        assert (vc.s_q_sq, vc.s_0_sq, vc.s_tau_q_sq, vc.var_xi) == (0, 0, 0, 0)
        # Constant additive effect: interaction term vanishes.
        rng = np.random.default_rng(3)
        arm0 = rng.normal(size=8)
        vc = oracle_variance(arm0 + 1.25, arm0, 4, 4)
        assert vc.s_tau_q_sq == pytest.approx(0.0, abs=1e-12)
        assert vc.var_xi == pytest.approx(vc.s_q_sq / 4 + vc.s_0_sq / 4, abs=1e-12)

    def test_variance_needs_two_stages(self):
        with pytest.raises(ValueError):
            oracle_variance(np.ones(1), np.ones(1), 1, 1)


def exact_p_oracle(deltas, actions, q):
    """Hand enumeration of the constrained permutation test."""
    deltas = np.asarray(deltas, dtype=float)
    actions = np.asarray(actions)
    positions = np.flatnonzero((actions == 0) | (actions == q))
    v = deltas[positions]
    n_q = int((actions == q).sum())
    obs = abs(
        v[actions[positions] == q].mean() - v[actions[positions] == 0].mean()
    )
    hits = 0
    total = 0
    for chosen in combinations(range(v.size), n_q):
        mask = np.zeros(v.size, dtype=bool)
        mask[list(chosen)] = True
        stat = abs(v[mask].mean() - v[~mask].mean())
        hits += stat >= obs * (1 - 1e-9)
        total += 1
    return hits / total


class TestFrtPValue:
    def test_exact_example_one_third(self):
        deltas = np.array([1.0, 1.0, 0.0, 0.0])
        actions = ActionSequence(np.array([1, 1, 0, 0]), 1)
        p = frt_p_value(deltas, actions, 1, 100, np.random.default_rng(0))
        assert p == pytest.approx(1 / 3)
        assert exact_p_oracle(deltas, actions.actions, 1) == pytest.approx(1 / 3)

    def test_constant_deltas_give_p_one(self):
        deltas = np.full(8, 2.5)
        actions = ActionSequence(np.array([0, 1] * 4), 1)
        assert frt_p_value(deltas, actions, 1, 50, np.random.default_rng(0)) == 1.0

    def test_exact_path_matches_oracle_on_random_data(self):
        rng = np.random.default_rng(21)
        for trial in range(10):
            actions = np.array([0] * 4 + [1] * 4 + [2] * 2)
            rng.shuffle(actions)
            seq = ActionSequence(actions, 2)
            deltas = rng.normal(size=10)
            p_lib = frt_p_value(deltas, seq, 1, 10, np.random.default_rng(trial))
            assert p_lib == pytest.approx(exact_p_oracle(deltas, actions, 1))

    def test_exact_p_at_least_one_over_permutations(self):
        rng = np.random.default_rng(5)
        deltas = rng.normal(size=8)
        seq = ActionSequence(np.array([0, 0, 0, 0, 1, 1, 1, 1]), 1)
        p = frt_p_value(deltas, seq, 1, 10, np.random.default_rng(0))
        assert p >= 1 / comb(8, 4)

    def test_monte_carlo_converges_to_exact(self):
        # |p_mc - p_exact| < 3*sqrt(p(1-p)/M) in at least 99% of trials.
        rng = np.random.default_rng(33)
        deltas = rng.normal(0, 1, size=16)
        deltas[:4] += 1.2
        actions = np.array([1] * 4 + [0] * 12)
        seq = ActionSequence(actions, 1)
        p_exact = frt_p_value(deltas, seq, 1, 10, np.random.default_rng(0))
        assert p_exact == pytest.approx(exact_p_oracle(deltas, actions, 1))
        m = 400
        bound = 3 * np.sqrt(p_exact * (1 - p_exact) / m)
        ok = 0
        trials = 200
        for i in range(trials):
            p_mc = frt_p_value(deltas, seq, 1, m, np.random.default_rng(1000 + i), exact_cap=1)
            ok += abs(p_mc - p_exact) < bound
        assert ok / trials >= 0.99

    def test_permutation_mean_is_zero_under_relabeling(self):
        # Mean of the statistic over all constrained permutations is 0.
        rng = np.random.default_rng(8)
        deltas = rng.normal(size=9)
        actions = np.array([0, 0, 0, 1, 1, 1, 2, 2, 2])
        positions = np.flatnonzero(actions <= 1)
        v = deltas[positions]
        stats = []
        for chosen in combinations(range(6), 3):
            mask = np.zeros(6, dtype=bool)
            mask[list(chosen)] = True
            stats.append(v[mask].mean() - v[~mask].mean())
        assert np.mean(stats) == pytest.approx(0.0, abs=1e-12)

    def test_p_invariant_to_other_action_relabeling(self):
        rng = np.random.default_rng(13)
        deltas = rng.normal(size=12)
        base = np.array([0, 1, 2, 3, 0, 1, 2, 3, 0, 1, 2, 3])
        swapped = base.copy()
        swapped[base == 2], swapped[base == 3] = 3, 2
        p1 = frt_p_value(deltas, ActionSequence(base, 3), 1, 500, np.random.default_rng(9))
        p2 = frt_p_value(deltas, ActionSequence(swapped, 3), 1, 500, np.random.default_rng(9))
        assert p1 == p2

    def test_null_calibration_quick(self):
        # Pure-noise deltas: P(p <= 0.05) should be close to 0.05.
        reps = 800
        hits = 0
        rng = np.random.default_rng(99)
        actions = np.array([0] * 6 + [1] * 6)
        for i in range(reps):
            perm = rng.permutation(actions)
            seq = ActionSequence(perm, 1)
            deltas = rng.normal(size=12)
            p = frt_p_value(deltas, seq, 1, 200, np.random.default_rng(i))
            hits += p <= 0.05
        assert hits / reps == pytest.approx(0.05, abs=0.02)


class TestDecideBody:
    def _estimates(self, n_tests, n_objects=5):
        return [
            EffectEstimate(i % n_objects, 0, 1 + (i // n_objects) % 2, float(i)) for i in range(n_tests)
        ]

    def test_all_p_one_flags_nothing(self):
        ests = self._estimates(10)
        report = decide_body(ests, [1.0] * 10, 0.05, "none", 5)
        assert report.body_objects == frozenset()

    def test_p_zero_flags_object_under_any_correction(self):
        ests = self._estimates(10)
        ps = [1.0] * 10
        ps[3] = 0.0
        for correction in ("none", "bonferroni"):
            report = decide_body(ests, ps, 0.05, correction, 5)
            assert report.body_objects == frozenset({ests[3].object_index})

    def test_threshold_arithmetic(self):
        # alpha=0.05, 100 tests, p=0.003: rejected uncorrected, not under
        # Bonferroni (0.003 > 0.0005).
        ests = self._estimates(100, n_objects=10)
        ps = [1.0] * 100
        ps[0] = 0.003
        plain = decide_body(ests, ps, 0.05, "none", 10)
        bonf = decide_body(ests, ps, 0.05, "bonferroni", 10)
        assert plain.records[0].rejected
        assert not bonf.records[0].rejected
        assert bonf.threshold == pytest.approx(0.0005)

    def test_bonferroni_rejections_subset_of_uncorrected(self):
        rng = np.random.default_rng(17)
        ests = self._estimates(60, n_objects=12)
        ps = rng.uniform(0, 0.2, size=60).tolist()
        plain = decide_body(ests, ps, 0.05, "none", 12)
        bonf = decide_body(ests, ps, 0.05, "bonferroni", 12)
        rejected_plain = {i for i, r in enumerate(plain.records) if r.rejected}
        rejected_bonf = {i for i, r in enumerate(bonf.records) if r.rejected}
        assert rejected_bonf <= rejected_plain
        assert bonf.body_objects <= plain.body_objects

    def test_empty_table_rejected(self):
        with pytest.raises(ValueError):
            decide_body([], [], 0.05, "none", 3)

    def test_report_json_roundtrip(self):
        ests = self._estimates(6, n_objects=3)
        report = decide_body(ests, [0.5, 0.01, 1.0, 0.2, 0.0, 0.9], 0.05, "none", 3)
        from bodydiscovery.inference import TestReport

        back = TestReport.from_json(report.to_json())
        assert back == report


class TestBaseline:
    def test_all_equal_estimates_flag_nothing(self):
        ests = [EffectEstimate(i, 0, 1, 2.0) for i in range(6)]
        with pytest.warns(UserWarning):
            report = baseline_decide(ests, 0.05, 6)
        assert report.body_objects == frozenset()

    def test_single_outlier_flagged(self):
        rng = np.random.default_rng(2)
        ests = [EffectEstimate(i, 0, 1, float(x)) for i, x in enumerate(rng.normal(0, 0.01, 20))]
        ests.append(EffectEstimate(20, 0, 1, 0.5))
        report = baseline_decide(ests, 0.05, 21)
        assert 20 in report.body_objects

    def test_pseudo_p_consistent_with_flags(self):
        rng = np.random.default_rng(4)
        ests = [EffectEstimate(i, 0, 1, float(x)) for i, x in enumerate(rng.normal(size=30))]
        report = baseline_decide(ests, 0.05, 30)
        for r in report.records:
            assert r.rejected == (r.p_value <= 0.05)


class TestRunTests:
    def test_order_independent_given_seed(self):
        rng = np.random.default_rng(0)
        deltas = rng.normal(size=(20, 3, 2))
        actions = ActionSequence(np.array([0, 1, 2, 3] * 5), 3)
        mask = np.ones((3, 2), dtype=bool)
        est1, p1 = run_tests(deltas, actions, mask, m_samples=100, seed=42)
        est2, p2 = run_tests(deltas, actions, mask, m_samples=100, seed=42)
        assert p1 == p2 and est1 == est2

    def test_masked_cells_skipped(self):
        rng = np.random.default_rng(0)
        deltas = rng.normal(size=(12, 2, 2))
        actions = ActionSequence(np.array([0, 1] * 6), 1)
        mask = np.array([[True, False], [True, True]])
        est, _ = run_tests(deltas, actions, mask, m_samples=10, seed=0)
        cells = {(e.object_index, e.feature_index) for e in est}
        assert cells == {(0, 0), (1, 0), (1, 1)}


def test_summarize_effects_empty_without_rejections():
    ests = [EffectEstimate(0, 0, 1, 1.0)]
    report = decide_body(ests, [0.8], 0.05, "none", 1)
    assert summarize_effects(report) == ()


@given(st.integers(0, 2**31 - 1))
@settings(max_examples=30, deadline=None)
def test_mc_p_value_within_unit_interval(seed):
    rng = np.random.default_rng(seed)
    deltas = rng.normal(size=14)
    actions = rng.permutation(np.array([0] * 5 + [1] * 5 + [2] * 4))
    seq = ActionSequence(actions, 2)
    p = frt_p_value(deltas, seq, 1, 50, np.random.default_rng(seed), exact_cap=1)
    assert 0.0 <= p <= 1.0
