"""Acceptance suite: every release criterion at its stated tolerance.

Each test prints one PASS/FAIL line (run with ``pytest -s`` to see them
all). Expected values marked as derived are computed by independent
in-test oracles (full enumerations, hand permutation sets), never by the
code paths under test.
"""

import time
from itertools import combinations

import numpy as np
import pytest

from bodydiscovery.design import enumerate_permutations, permute_for_test, randomize_allocation
from bodydiscovery.harness import (
    SweepSpec,
    default_task_config,
    run_round_methods,
    run_suite,
    run_sweep,
)
from bodydiscovery.inference import (
    decide_body,
    diff_in_means,
    frt_p_value,
    oracle_true_effect,
    oracle_variance,
    run_tests,
)
from bodydiscovery.model import ActionSequence, CellKind, WorldSnapshot, stage_delta
from bodydiscovery.scenario import EffectTable
from bodydiscovery.sim import NoiseConfig, step

MASTER_SEED = 0
QUIET = {
    "n1_intensity": 0.0,
    "n2_intensity": 0.0,
    "n3_failure_prob": 0.0,
    "n4_sensing_error": 0.0,
}


def check(criterion: str, passed: bool, detail: str) -> None:
    print(f"{criterion} {'PASS' if passed else 'FAIL'}: {detail}")
    assert passed, f"{criterion}: {detail}"


def science_table(seed=2024, t=6):
    rng = np.random.default_rng(seed)
    arm1 = rng.normal(1.0, 2.0, size=t)
    arm0 = rng.normal(0.0, 1.0, size=t)
    return arm1, arm0


def all_allocations(t, n_1):
    for chosen in combinations(range(t), n_1):
        d = np.zeros(t, dtype=int)
        d[list(chosen)] = 1
        yield d


def test_p1_unbiasedness_over_allocation_enumeration():
    arm1, arm0 = science_table()
    xi_true = oracle_true_effect(arm1, arm0)
    stats = []
    for d in all_allocations(6, 3):
        observed = np.where(d == 1, arm1, arm0)
        stats.append(diff_in_means(observed, ActionSequence(d, 1), 1))
    err = abs(np.mean(stats) - xi_true)
    check(
        "P1",
        len(stats) == 20 and err < 1e-12,
        f"mean estimator over {len(stats)} allocations vs true effect, |err|={err:.2e}",
    )


def test_p2_variance_formula_matches_enumeration():
    arm1, arm0 = science_table()
    stats = []
    for d in all_allocations(6, 3):
        observed = np.where(d == 1, arm1, arm0)
        stats.append(diff_in_means(observed, ActionSequence(d, 1), 1))
    empirical = float(np.mean((np.asarray(stats) - np.mean(stats)) ** 2))
    formula = oracle_variance(arm1, arm0, 3, 3).var_xi
    err = abs(empirical - formula)
    check("P2", err < 1e-10, f"enumeration variance {empirical:.6f} vs formula, |err|={err:.2e}")


def test_p3_exact_randomization_p_value():
    deltas = np.array([1.0, 1.0, 0.0, 0.0])
    actions = ActionSequence(np.array([1, 1, 0, 0]), 1)
    p = frt_p_value(deltas, actions, 1, 100, np.random.default_rng(0))
    check("P3", p == pytest.approx(1 / 3, abs=1e-15), f"exact enumeration p={p} (expected 1/3)")


def test_p4_null_calibration_and_familywise_error():
    # 5,000 rounds with drift noise only and no true effects; the small
    # design (counts 6/6/6) keeps every test on the exact-enumeration path.
    n_rounds = 5000
    n_objects, t = 4, 18
    counts = (6, 6, 6)
    n_signals = 2
    effects = EffectTable(((), ()))
    noise = NoiseConfig(n1_intensity=0.3)
    kinds = np.full((n_objects, 1), int(CellKind.LINEAR), dtype=np.int8)
    mask = np.ones((n_objects, 1), dtype=bool)
    n_tests = n_objects * n_signals
    alpha = 0.05
    uncorrected_hits = 0
    family_errors = 0
    from bodydiscovery.seeding import derive_seed

    for r in range(n_rounds):
        rng = np.random.default_rng(derive_seed(MASTER_SEED, "null-round", r))
        actions = randomize_allocation(t, counts, rng)
        world = WorldSnapshot(0, np.zeros((n_objects, 1)), mask, kinds)
        deltas = np.zeros((t, n_objects, 1))
        for stage in range(1, t + 1):
            nxt = step(world, int(actions.actions[stage - 1]), effects, noise, rng)
            deltas[stage - 1] = stage_delta(world, nxt).values
            world = nxt
        estimates, p_values = run_tests(deltas, actions, mask, m_samples=1000, seed=r)
        assert len(p_values) == n_tests
        uncorrected_hits += sum(p <= alpha for p in p_values)
        family_errors += any(p <= alpha / n_tests for p in p_values)
    rate = uncorrected_hits / (n_rounds * n_tests)
    fwer = family_errors / n_rounds
    check(
        "P4",
        0.04 <= rate <= 0.06 and fwer <= 0.06,
        f"uncorrected rejection rate {rate:.4f} in [0.04, 0.06]; "
        f"Bonferroni family-wise error {fwer:.4f} <= 0.06",
    )


def test_p5_constrained_permutation_example():
    d_obs = ActionSequence(np.array([0, 1, 2, 1]), 2)
    expected = {(0, 1, 2, 1), (1, 0, 2, 1), (1, 1, 2, 0)}
    enumerated = {tuple(s.actions.tolist()) for s in enumerate_permutations(d_obs, 1)}
    rng = np.random.default_rng(1)
    sampled = {tuple(permute_for_test(d_obs, 1, rng).actions.tolist()) for _ in range(200)}
    check(
        "P5",
        enumerated == expected and sampled == expected,
        f"constrained permutations = {sorted(enumerated)}",
    )


def test_p6_noise_free_discovery_all_tasks():
    tasks = [f"T{i}" for i in range(9)]
    started = time.perf_counter()
    result = run_suite(
        tasks,
        methods=["frt-bonferroni"],
        rounds=10,
        master_seed=MASTER_SEED,
        mc_samples=1000,
        overrides={"noise": QUIET},
    )
    elapsed = time.perf_counter() - started
    worst_recall = min(ms.recall for _, _, _, ms in result.rows)
    worst_spec = min(ms.specificity for _, _, _, ms in result.rows)
    by_task = {task: (ms.recall, ms.specificity) for task, _, _, ms in result.rows}
    check(
        "P6",
        worst_recall >= 0.95 and worst_spec >= 0.99 and elapsed <= 300,
        f"noise-free T0-T8 x10 rounds: min recall {worst_recall:.3f} >= 0.95, "
        f"min specificity {worst_spec:.3f} >= 0.99, runtime {elapsed:.0f}s <= 300s "
        f"(per task: {by_task})",
    )


def test_p7_parameter_trends_on_t8():
    base = default_task_config("T8", seed=0)

    spec_t = SweepSpec(base, "T", (50, 100, 200, 400), rounds=10, method="frt-bonferroni")
    accs = [ms.accuracy for _, _, ms in run_sweep(spec_t, MASTER_SEED, workers=4)]
    inversions = [max(0.0, a - b) for a, b in zip(accs, accs[1:])]
    t_ok = sum(1 for inv in inversions if inv > 0) <= 1 and max(inversions, default=0) <= 0.01

    spec_n4 = SweepSpec(base, "n4", (0.4, 0.8), rounds=10, method="frt-bonferroni")
    f1s = [ms.f1 for _, _, ms in run_sweep(spec_n4, MASTER_SEED, workers=4)]
    n4_drop = f1s[0] - f1s[1]

    spec_n2 = SweepSpec(base, "n2", (0.0, 0.5, 1.0), rounds=10, method="frt-bonferroni")
    f1s_n2 = [ms.f1 for _, _, ms in run_sweep(spec_n2, MASTER_SEED, workers=4)]
    n2_drop = max(f1s_n2) - min(f1s_n2)

    check(
        "P7",
        t_ok and n4_drop > 0.2 and n2_drop <= 0.05,
        f"T-sweep accuracy {['%.3f' % a for a in accs]} (inversions {['%.3f' % i for i in inversions]}); "
        f"F1 drop 0.4->0.8 sensing error = {n4_drop:.3f} > 0.2; "
        f"F1 spread over other-agent intensities = {n2_drop:.3f} <= 0.05",
    )


def test_p8_method_ordering_on_noisy_tasks():
    methods = ["frt-0.05", "frt-0.01", "frt-bonferroni", "baseline-0.05"]
    ordering_ok = True
    flags_ok = True
    details = []
    for task in ("T2", "T3", "T4"):
        spec = {m: [] for m in methods}
        flags = {m: [] for m in methods}
        for index in range(10):
            from bodydiscovery.seeding import derive_seed

            cfg = default_task_config(task, seed=derive_seed(MASTER_SEED, "p8", task, index))
            results = run_round_methods(cfg, methods, mc_samples=1000)
            for m in methods:
                spec[m].append(results[m].metric_set.specificity)
                flags[m].append(len(results[m].report.body_objects))
        s_bonf = np.mean(spec["frt-bonferroni"])
        s_01 = np.mean(spec["frt-0.01"])
        s_05 = np.mean(spec["frt-0.05"])
        ordering_ok &= s_bonf >= s_01 >= s_05
        base_flags = np.mean(flags["baseline-0.05"])
        frt_flags = np.mean(flags["frt-0.05"])
        flags_ok &= base_flags >= frt_flags
        details.append(
            f"{task}: spec {s_bonf:.3f}>={s_01:.3f}>={s_05:.3f}, "
            f"flags baseline {base_flags:.1f} >= frt {frt_flags:.1f}"
        )
    check("P8", ordering_ok and flags_ok, "; ".join(details))


def test_p9_mirror_tasks_with_default_noise():
    ok = True
    details = []
    for task in ("T9", "T10", "T11", "T12"):
        result = run_suite(
            [task],
            methods=["frt-bonferroni"],
            rounds=10,
            master_seed=MASTER_SEED,
            mc_samples=1000,
        )
        _, _, _, ms = result.rows[0]
        ok &= ms.recall >= 0.85 and ms.accuracy >= 0.85
        details.append(f"{task}: recall {ms.recall:.3f}, accuracy {ms.accuracy:.3f}")
    check("P9", ok, "; ".join(details) + " (floors 0.85, reflections count as body)")


def test_p10_suite_determinism_across_worker_counts():
    overrides = {
        "n_objects": 12,
        "n_signals": 2,
        "n_stages": 48,
    }
    outputs = []
    for workers in (1, 3):
        result = run_suite(
            ["T2", "T12"],
            methods=["frt-0.05", "frt-bonferroni", "baseline-0.05"],
            rounds=2,
            master_seed=MASTER_SEED,
            workers=workers,
            mc_samples=200,
            overrides=overrides,
        )
        outputs.append(result.to_csv())
    check(
        "P10",
        outputs[0] == outputs[1],
        f"suite CSV byte-identical for 1 vs 3 workers ({len(outputs[0])} bytes)",
    )
