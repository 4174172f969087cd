"""Command-line front end: round, suite, sweep, replay."""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from . import harness
from .harness import METHODS, SweepSpec, default_task_config
from .sim import NoiseConfig


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", type=Path, help="JSON config file; flags override its values")
    parser.add_argument("--seed", type=int, help="master seed (falls back to $BODYDISC_SEED, then 0)")
    parser.add_argument("--out", type=Path, default=Path("out"), help="output directory")
    parser.add_argument("--alpha", type=float, help="override the method's significance level")
    parser.add_argument("--mc-samples", type=int, default=1000, help="Monte Carlo draws per test")
    parser.add_argument("--objects", type=int, help="number of candidate objects")
    parser.add_argument("--signals", type=int, help="number of neural signals")
    parser.add_argument("--stages", type=int, help="number of action stages")
    parser.add_argument("--n1", type=float, help="environmental noise intensity")
    parser.add_argument("--n2", type=float, help="other-agent noise intensity")
    parser.add_argument("--n3", type=float, help="action failure probability")
    parser.add_argument("--n4", type=float, help="sensing error proportion")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bodydiscovery",
        description="Randomized-experiment body discovery simulator and analysis harness.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_round = sub.add_parser("round", help="run a single round")
    p_round.add_argument("--task", default="T8", help="task id T0..T12")
    p_round.add_argument("--method", default="frt-bonferroni", choices=sorted(METHODS))
    p_round.add_argument("--trace", action="store_true", help="write a per-stage JSONL trace")
    _add_common(p_round)

    p_suite = sub.add_parser("suite", help="run averaged rounds over tasks and methods")
    p_suite.add_argument("--tasks", default="T0-T8", help="e.g. T0-T8 or T2,T4,T9")
    p_suite.add_argument(
        "--methods", default=",".join(METHODS), help="comma-separated method names"
    )
    p_suite.add_argument("--rounds", type=int, default=10)
    p_suite.add_argument("--workers", type=int, default=1)
    _add_common(p_suite)

    p_sweep = sub.add_parser("sweep", help="sweep one parameter on one task")
    p_sweep.add_argument("--task", default="T8")
    p_sweep.add_argument("--param", choices=harness.SWEEP_PARAMS,
                         help="swept parameter (or 'param' in --config)")
    p_sweep.add_argument("--values", help="comma-separated values (or 'values' in --config)")
    p_sweep.add_argument("--rounds", type=int, default=10)
    p_sweep.add_argument("--method", default="frt-bonferroni", choices=sorted(METHODS))
    p_sweep.add_argument("--workers", type=int, default=1)
    _add_common(p_sweep)

    p_replay = sub.add_parser("replay", help="recompute a round from its trace")
    p_replay.add_argument("trace", type=Path)
    p_replay.add_argument("--method", default="frt-bonferroni", choices=sorted(METHODS))
    _add_common(p_replay)
    return parser


def resolve_seed(args) -> int:
    if args.seed is not None:
        return args.seed
    env = os.environ.get("BODYDISC_SEED")
    return int(env) if env else 0


def _file_config(args) -> dict:
    if not getattr(args, "config", None):
        return {}
    with open(args.config) as fh:
        return json.load(fh)


SWEEP_KEYS = ("param", "values", "rounds", "method")


def collect_overrides(args) -> dict:
    """World-config overrides: config file first, then flags on top."""
    overrides = dict(_file_config(args))
    overrides.pop("task", None)
    overrides.pop("seed", None)
    for key in SWEEP_KEYS:
        overrides.pop(key, None)
    for flag, field in (("objects", "n_objects"), ("signals", "n_signals"), ("stages", "n_stages")):
        value = getattr(args, flag, None)
        if value is not None:
            overrides[field] = value
    noise = dict(overrides.get("noise", {}))
    for flag, field in (
        ("n1", "n1_intensity"),
        ("n2", "n2_intensity"),
        ("n3", "n3_failure_prob"),
        ("n4", "n4_sensing_error"),
    ):
        value = getattr(args, flag, None)
        if value is not None:
            noise[field] = value
    if noise:
        overrides["noise"] = noise
    return overrides


def _parse_tasks(spec: str) -> list[str]:
    tasks: list[str] = []
    for part in spec.split(","):
        part = part.strip()
        if "-" in part[1:]:
            lo, hi = part.split("-")
            tasks.extend(f"T{i}" for i in range(int(lo[1:]), int(hi[1:]) + 1))
        elif part:
            tasks.append(part)
    return tasks


def _parse_values(spec: str) -> list:
    values = []
    for part in spec.split(","):
        part = part.strip()
        values.append(int(part) if part.lstrip("-").isdigit() else float(part))
    return values


def cmd_round(args) -> int:
    seed = resolve_seed(args)
    overrides = collect_overrides(args)
    args.out.mkdir(parents=True, exist_ok=True)
    cfg = default_task_config(args.task, seed=seed, **overrides)
    trace_path = args.out / "trace.jsonl" if args.trace else None
    result = harness.run_round(
        cfg, args.method, mc_samples=args.mc_samples, alpha=args.alpha, trace_path=trace_path
    )
    out_path = args.out / "round.json"
    out_path.write_text(json.dumps(result.to_json(), indent=2) + "\n")
    from .inference import write_effects_csv

    write_effects_csv(result.report, args.out / "effects.csv")
    ms = result.metric_set
    print(f"task={cfg.task} method={args.method} seed={seed}")
    print(f"predicted body: {sorted(result.report.body_objects)}")
    for name, value in ms.as_dict().items():
        print(f"  {name}: {'N/A' if value is None else f'{value:.4f}'}")
    print(f"wrote {out_path}")
    return 0


def cmd_suite(args) -> int:
    seed = resolve_seed(args)
    overrides = collect_overrides(args)
    tasks = _parse_tasks(args.tasks)
    methods = [m.strip() for m in args.methods.split(",") if m.strip()]
    result = harness.run_suite(
        tasks,
        methods=methods,
        rounds=args.rounds,
        master_seed=seed,
        workers=args.workers,
        mc_samples=args.mc_samples,
        overrides=overrides,
    )
    args.out.mkdir(parents=True, exist_ok=True)
    csv_path = args.out / "suite.csv"
    csv_path.write_text(result.to_csv())
    print(result.to_table())
    print(f"wrote {csv_path}")
    return 0


def cmd_sweep(args) -> int:
    seed = resolve_seed(args)
    overrides = collect_overrides(args)
    file_cfg = _file_config(args)
    param = args.param or file_cfg.get("param")
    raw_values = args.values or file_cfg.get("values")
    if not param or not raw_values:
        raise SystemExit("sweep needs --param and --values (flags or config file)")
    if isinstance(raw_values, str):
        values = tuple(_parse_values(raw_values))
    else:
        values = tuple(raw_values)
    base = default_task_config(args.task, seed=0, **overrides)
    spec = SweepSpec(
        base=base,
        param=param,
        values=values,
        rounds=args.rounds,
        method=args.method,
    )
    rows = harness.run_sweep(spec, master_seed=seed, workers=args.workers, mc_samples=args.mc_samples)
    args.out.mkdir(parents=True, exist_ok=True)
    csv_path = args.out / "sweep.csv"
    csv_path.write_text(harness.sweep_csv(spec, rows))
    print(f"wrote {csv_path}")
    return 0


def cmd_replay(args) -> int:
    result = harness.replay_trace(args.trace, method=args.method, mc_samples=args.mc_samples)
    args.out.mkdir(parents=True, exist_ok=True)
    out_path = args.out / "replay.json"
    out_path.write_text(json.dumps(result.to_json(), indent=2) + "\n")
    print(f"predicted body: {sorted(result.report.body_objects)}")
    print(f"wrote {out_path}")
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    commands = {"round": cmd_round, "suite": cmd_suite, "sweep": cmd_sweep, "replay": cmd_replay}
    return commands[args.command](args)


if __name__ == "__main__":
    sys.exit(main())
