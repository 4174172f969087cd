"""End-to-end rounds, suites, and parameter sweeps.

One round: generate a task world, draw the randomized action
allocation, step the world for T stages while recording sensed
snapshots, run every (object, feature, signal) test on the observed
deltas, decide the body set, and score it against the hidden truth. The
inference side only ever sees observed snapshots, the signal count, and
the allocation.

Suites and sweeps fan rounds out over a process pool; per-round seeds
are derived by hashing (master seed, task, round index), so output is
byte-identical for any worker count.
"""

from __future__ import annotations

import dataclasses
import json
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .design import ENUMERATION_CAP, randomize_allocation
from .evaluation import METRIC_NAMES, MetricSet, average_precision, confusion, mean_metrics, metrics
from .inference import TestReport, baseline_decide, decide_body, run_tests
from .model import ActionSequence, WorldSnapshot, stage_delta
from .scenario import Scenario, TaskConfig, generate_task, scenario_from_json, scenario_to_json
from .seeding import derive_seed
from .sim import NoiseConfig, sense, step

# method name -> (engine, alpha, correction)
METHODS: dict[str, tuple[str, float, str | None]] = {
    "frt-0.05": ("frt", 0.05, "none"),
    "frt-0.01": ("frt", 0.01, "none"),
    "frt-bonferroni": ("frt", 0.05, "bonferroni"),
    "baseline-0.05": ("baseline", 0.05, None),
    "baseline-0.01": ("baseline", 0.01, None),
}

SUITE_HEADER = "task,method,rounds,accuracy,recall,precision,specificity,f1,ap"
SWEEP_HEADER = "task,method,param,value,rounds,accuracy,recall,precision,specificity,f1,ap"

SWEEP_PARAMS = ("Q", "N", "T", "n1", "n2", "n3", "n4")


def load_defaults() -> dict:
    text = resources.files("bodydiscovery.data").joinpath("defaults.json").read_text()
    return json.loads(text)


def default_task_config(task: str, seed: int = 0, **overrides) -> TaskConfig:
    """The shipped per-task defaults, with optional field overrides."""
    payload = load_defaults()
    fields = dict(payload["defaults"])
    fields.update(payload["tasks"].get(task, {}))
    noise_fields = fields.pop("noise", {})
    noise_overrides = overrides.pop("noise", {})
    if isinstance(noise_overrides, NoiseConfig):
        noise = noise_overrides
    else:
        noise_fields.update(noise_overrides)
        noise = NoiseConfig(**noise_fields)
    fields.update(overrides)
    return TaskConfig(task=task, seed=seed, noise=noise, **fields)


def config_hash(cfg: TaskConfig) -> str:
    canon = json.dumps(cfg.to_json(), sort_keys=True, separators=(",", ":"))
    return derive_seed(canon).to_bytes(8, "little").hex()


@dataclass(frozen=True)
class RoundResult:
    task: str
    method: str
    seed: int
    config_hash: str
    report: TestReport
    metric_set: MetricSet
    elapsed: float
    trace_path: str | None = None

    def to_json(self) -> dict:
        return {
            "task": self.task,
            "method": self.method,
            "seed": self.seed,
            "config_hash": self.config_hash,
            "metrics": self.metric_set.as_dict(),
            "elapsed": self.elapsed,
            "trace_path": self.trace_path,
            "report": self.report.to_json(),
        }


@dataclass(frozen=True)
class SweepSpec:
    base: TaskConfig
    param: str
    values: tuple
    rounds: int = 10
    method: str = "frt-bonferroni"

    def __post_init__(self):
        if self.param not in SWEEP_PARAMS:
            raise ValueError(f"unknown sweep parameter {self.param!r}, expected {SWEEP_PARAMS}")
        values = tuple(self.values)
        if not values:
            raise ValueError("sweep needs at least one value")
        if any(b < a for a, b in zip(values, values[1:])):
            raise ValueError("sweep values must be monotone nondecreasing")
        if self.rounds < 1:
            raise ValueError("need at least one round per sweep point")
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}")
        object.__setattr__(self, "values", values)


def apply_sweep_param(cfg: TaskConfig, param: str, value) -> TaskConfig:
    if param == "Q":
        return dataclasses.replace(cfg, n_signals=int(value), action_counts=None)
    if param == "N":
        return dataclasses.replace(cfg, n_objects=int(value))
    if param == "T":
        return dataclasses.replace(cfg, n_stages=int(value), action_counts=None)
    noise_field = {
        "n1": "n1_intensity",
        "n2": "n2_intensity",
        "n3": "n3_failure_prob",
        "n4": "n4_sensing_error",
    }[param]
    noise = dataclasses.replace(cfg.noise, **{noise_field: float(value)})
    return dataclasses.replace(cfg, noise=noise)


def simulate_round(cfg: TaskConfig, trace_path=None) -> tuple[Scenario, ActionSequence, np.ndarray]:
    """Run the world forward and return observed per-stage deltas.

    Returns (scenario, actions, deltas) with deltas shaped (T, N, K),
    computed purely from sensed snapshots.
    """
    scenario = generate_task(cfg)
    actions = randomize_allocation(
        cfg.n_stages, cfg.counts, np.random.default_rng(derive_seed(cfg.seed, "alloc"))
    )
    rng_sim = np.random.default_rng(derive_seed(cfg.seed, "sim"))
    rng_sense = np.random.default_rng(derive_seed(cfg.seed, "sense"))
    noise = cfg.noise
    trace = None
    if trace_path is not None:
        trace = open(trace_path, "w")
        header = {
            "type": "scenario",
            "scenario": scenario_to_json(scenario),
            "actions": actions.actions.tolist(),
        }
        trace.write(json.dumps(header) + "\n")
    try:
        world = scenario.initial
        caps = scenario.layout.caps
        observed = sense(world, noise.n4_sensing_error, rng_sense, scenario.sensing_ref, caps)
        deltas = np.zeros((cfg.n_stages, scenario.n_objects, scenario.layout.n_columns))
        for t in range(1, cfg.n_stages + 1):
            q = int(actions.actions[t - 1])
            world = step(
                world,
                q,
                scenario.truth.effects,
                noise,
                rng_sim,
                other_agents=scenario.other_agents,
                effect_scale=scenario.effect_scale,
                level_caps=caps,
            )
            now = sense(world, noise.n4_sensing_error, rng_sense, scenario.sensing_ref, caps)
            deltas[t - 1] = stage_delta(observed, now).values
            if trace is not None:
                record = {
                    "type": "stage",
                    "t": t,
                    "action": q,
                    "true": world.to_json(),
                    "observed": now.to_json(),
                }
                trace.write(json.dumps(record) + "\n")
            observed = now
    finally:
        if trace is not None:
            trace.close()
    return scenario, actions, deltas


def _decide(method: str, estimates, p_values, n_objects, mc_samples, alpha=None) -> TestReport:
    engine, default_alpha, correction = METHODS[method]
    alpha = default_alpha if alpha is None else alpha
    if engine == "baseline":
        return baseline_decide(estimates, alpha=alpha, n_objects=n_objects)
    return decide_body(
        estimates, p_values, alpha=alpha, correction=correction,
        n_objects=n_objects, mc_samples=mc_samples,
    )


def evaluate_report(report: TestReport, scenario: Scenario) -> MetricSet:
    truth = set(scenario.truth.body_set)
    counts = confusion(set(report.body_objects), truth, scenario.n_objects)
    base = metrics(counts)
    ap = average_precision(report.min_p_scores(), truth)
    return dataclasses.replace(base, average_precision=ap)


def run_round_methods(
    cfg: TaskConfig,
    methods: Sequence[str],
    mc_samples: int = 1000,
    exact_cap: int = ENUMERATION_CAP,
    alpha: float | None = None,
    trace_path=None,
) -> dict[str, RoundResult]:
    """One simulated round analyzed under several methods at once.

    The simulation and the randomization tests run once; methods only
    differ in how the shared estimate/p-value table is thresholded.
    """
    unknown = [m for m in methods if m not in METHODS]
    if unknown:
        raise ValueError(f"unknown methods {unknown}; expected among {sorted(METHODS)}")
    started = time.perf_counter()
    scenario, actions, deltas = simulate_round(cfg, trace_path=trace_path)
    need_p = any(METHODS[m][0] == "frt" for m in methods)
    estimates, p_values = run_tests(
        deltas,
        actions,
        scenario.layout.mask,
        m_samples=mc_samples if need_p else 0,
        exact_cap=exact_cap,
        seed=derive_seed(cfg.seed, "tests"),
    )
    chash = config_hash(cfg)
    out = {}
    for method in methods:
        report = _decide(method, estimates, p_values, scenario.n_objects, mc_samples, alpha)
        out[method] = RoundResult(
            task=cfg.task,
            method=method,
            seed=cfg.seed,
            config_hash=chash,
            report=report,
            metric_set=evaluate_report(report, scenario),
            elapsed=time.perf_counter() - started,
            trace_path=str(trace_path) if trace_path else None,
        )
    return out


def run_round(
    cfg: TaskConfig,
    method: str = "frt-bonferroni",
    mc_samples: int = 1000,
    exact_cap: int = ENUMERATION_CAP,
    alpha: float | None = None,
    trace_path=None,
) -> RoundResult:
    """Execute one full round under a single method."""
    return run_round_methods(
        cfg, [method], mc_samples=mc_samples, exact_cap=exact_cap, alpha=alpha,
        trace_path=trace_path,
    )[method]


def _fmt(value: float | None) -> str:
    return "N/A" if value is None else f"{value:.6f}"


def _metric_row(ms: MetricSet) -> list[str]:
    return [_fmt(getattr(ms, name)) for name in METRIC_NAMES]


def _suite_job(args) -> tuple[tuple[str, int], dict[str, MetricSet]]:
    task, index, cfg, methods, mc_samples = args
    results = run_round_methods(cfg, methods, mc_samples=mc_samples)
    return (task, index), {m: r.metric_set for m, r in results.items()}


def _task_sort_key(task: str):
    return (len(task), task)


class SuiteResult:
    """Aggregated suite output: averaged rows plus exclusion counts."""

    def __init__(self, rows, exclusions, per_round):
        self.rows = rows  # list of (task, method, rounds, MetricSet)
        self.exclusions = exclusions  # (task, method) -> {metric: n excluded}
        self.per_round = per_round  # (task, method) -> [MetricSet per round]

    def to_csv(self) -> str:
        lines = [SUITE_HEADER]
        for task, method, rounds, ms in self.rows:
            lines.append(",".join([task, method, str(rounds)] + _metric_row(ms)))
        return "\n".join(lines) + "\n"

    def to_table(self) -> str:
        widths = (6, 16, 7)
        head = ["task".ljust(widths[0]), "method".ljust(widths[1]), "rounds".ljust(widths[2])]
        head += [name[:9].rjust(11) for name in METRIC_NAMES]
        lines = ["".join(head)]
        lines.append("-" * len(lines[0]))
        last_task = None
        for task, method, rounds, ms in self.rows:
            shown = task if task != last_task else ""
            last_task = task
            row = [shown.ljust(widths[0]), method.ljust(widths[1]), str(rounds).ljust(widths[2])]
            row += [_fmt(getattr(ms, name)).rjust(11) for name in METRIC_NAMES]
            lines.append("".join(row))
        notes = []
        for (task, method), excl in sorted(self.exclusions.items()):
            for metric, count in excl.items():
                if count:
                    notes.append(f"note: {task} {method} {metric}: {count} round(s) N/A, excluded")
        return "\n".join(lines + notes) + "\n"


def run_suite(
    tasks: Sequence[str],
    methods: Sequence[str] = tuple(METHODS),
    rounds: int = 10,
    master_seed: int = 0,
    workers: int = 1,
    mc_samples: int = 1000,
    overrides: Mapping | None = None,
) -> SuiteResult:
    """Average every (task, method) over seeded rounds, Table-style.

    Rows come out sorted canonically by task then requested method
    order, independent of execution order or worker count.
    """
    if rounds < 1:
        raise ValueError("need at least one round")
    methods = list(methods)
    overrides = dict(overrides or {})
    jobs = []
    for task in tasks:
        for index in range(rounds):
            seed = derive_seed(master_seed, "round", task, index)
            cfg = default_task_config(task, seed=seed, **overrides)
            jobs.append((task, index, cfg, methods, mc_samples))
    outcomes: dict[tuple[str, int], dict[str, MetricSet]] = {}
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for key, result in pool.map(_suite_job, jobs):
                outcomes[key] = result
    else:
        for job in jobs:
            key, result = _suite_job(job)
            outcomes[key] = result
    rows = []
    exclusions = {}
    per_round = {}
    for task in sorted(set(tasks), key=_task_sort_key):
        for method in methods:
            series = [outcomes[(task, i)][method] for i in range(rounds)]
            averaged, excluded = mean_metrics(series)
            rows.append((task, method, rounds, averaged))
            exclusions[(task, method)] = excluded
            per_round[(task, method)] = series
    return SuiteResult(rows, exclusions, per_round)


def _sweep_job(args) -> tuple[tuple[object, int], MetricSet]:
    value, index, cfg, method, mc_samples = args
    result = run_round_methods(cfg, [method], mc_samples=mc_samples)[method]
    return (value, index), result.metric_set


def run_sweep(
    spec: SweepSpec,
    master_seed: int = 0,
    workers: int = 1,
    mc_samples: int = 1000,
) -> list[tuple[object, int, MetricSet]]:
    """Average the spec's method over rounds at each swept value."""
    jobs = []
    for value in spec.values:
        for index in range(spec.rounds):
            seed = derive_seed(master_seed, "sweep", spec.param, value, index)
            cfg = dataclasses.replace(apply_sweep_param(spec.base, spec.param, value), seed=seed)
            jobs.append((value, index, cfg, spec.method, mc_samples))
    outcomes: dict[tuple[object, int], MetricSet] = {}
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for key, result in pool.map(_sweep_job, jobs):
                outcomes[key] = result
    else:
        for job in jobs:
            key, result = _sweep_job(job)
            outcomes[key] = result
    rows = []
    for value in spec.values:
        series = [outcomes[(value, i)] for i in range(spec.rounds)]
        averaged, _ = mean_metrics(series)
        rows.append((value, spec.rounds, averaged))
    return rows


def sweep_csv(spec: SweepSpec, rows) -> str:
    lines = [SWEEP_HEADER]
    for value, rounds, ms in rows:
        shown = str(value) if isinstance(value, int) else f"{value:g}"
        lines.append(
            ",".join(
                [spec.base.task, spec.method, spec.param, shown, str(rounds)] + _metric_row(ms)
            )
        )
    return "\n".join(lines) + "\n"


def replay_trace(
    path,
    method: str = "frt-bonferroni",
    mc_samples: int = 1000,
    exact_cap: int = ENUMERATION_CAP,
) -> RoundResult:
    """Recompute a round's analysis from its stage trace.

    Rebuilds the observed snapshot sequence, recomputes deltas, and
    reruns the tests with the round's own seeds, so the result matches
    the original run.
    """
    started = time.perf_counter()
    with open(path) as fh:
        header = json.loads(fh.readline())
        if header.get("type") != "scenario":
            raise ValueError(f"{path} does not start with a scenario record")
        scenario = scenario_from_json(header["scenario"])
        cfg = scenario.config
        actions = ActionSequence(np.array(header["actions"]), cfg.n_signals)
        snaps: list[WorldSnapshot | None] = [None] * (cfg.n_stages + 1)
        for line in fh:
            record = json.loads(line)
            if record.get("type") != "stage":
                continue
            snaps[record["t"]] = WorldSnapshot.from_json(record["observed"], scenario.layout.kinds)
    # Stage 0 observation is not logged; the trace stores stages 1..T and
    # the scenario's initial is re-sensed with the round's sense stream.
    rng_sense = np.random.default_rng(derive_seed(cfg.seed, "sense"))
    snaps[0] = sense(
        scenario.initial, cfg.noise.n4_sensing_error, rng_sense,
        scenario.sensing_ref, scenario.layout.caps,
    )
    missing = [t for t, s in enumerate(snaps) if s is None]
    if missing:
        raise ValueError(f"trace is missing stages {missing[:5]}")
    deltas = np.stack(
        [stage_delta(snaps[t - 1], snaps[t]).values for t in range(1, cfg.n_stages + 1)]
    )
    estimates, p_values = run_tests(
        deltas,
        actions,
        scenario.layout.mask,
        m_samples=mc_samples if METHODS[method][0] == "frt" else 0,
        exact_cap=exact_cap,
        seed=derive_seed(cfg.seed, "tests"),
    )
    report = _decide(method, estimates, p_values, scenario.n_objects, mc_samples)
    return RoundResult(
        task=cfg.task,
        method=method,
        seed=cfg.seed,
        config_hash=config_hash(cfg),
        report=report,
        metric_set=evaluate_report(report, scenario),
        elapsed=time.perf_counter() - started,
        trace_path=str(path),
    )
