"""Body discovery: who does this signal move?

A seedable multi-object simulator plus a randomization-inference engine
that identifies which objects an agent's control signals actually move,
and summarizes each signal's per-firing effect.
"""

from .design import (
    balanced_counts,
    enumerate_permutations,
    permute_for_test,
    randomize_allocation,
)
from .estimators import BaselineDetector, BodyDiscoverer
from .evaluation import MetricSet, average_precision, confusion, mean_metrics, metrics
from .harness import (
    METHODS,
    RoundResult,
    SweepSpec,
    default_task_config,
    replay_trace,
    run_round,
    run_suite,
    run_sweep,
)
from .inference import (
    EffectEstimate,
    TestRecord,
    TestReport,
    VarianceComponents,
    baseline_decide,
    decide_body,
    diff_in_means,
    frt_p_value,
    oracle_true_effect,
    oracle_variance,
    summarize_effects,
)
from .model import (
    ActionSequence,
    CellKind,
    FeatureKind,
    GroundTruth,
    StageDelta,
    WorldSnapshot,
    accumulate,
    stage_delta,
)
from .scenario import (
    EffectTable,
    MirrorPlane,
    Scenario,
    TaskConfig,
    apply_mirror,
    generate_task,
    sample_effects,
)
from .sim import NoiseConfig, inject_environment, inject_other_agents, sense, step

__version__ = "0.1.0"

__all__ = [
    "ActionSequence",
    "BaselineDetector",
    "BodyDiscoverer",
    "CellKind",
    "EffectEstimate",
    "EffectTable",
    "FeatureKind",
    "GroundTruth",
    "METHODS",
    "MetricSet",
    "MirrorPlane",
    "NoiseConfig",
    "RoundResult",
    "Scenario",
    "StageDelta",
    "SweepSpec",
    "TaskConfig",
    "TestRecord",
    "TestReport",
    "VarianceComponents",
    "WorldSnapshot",
    "accumulate",
    "apply_mirror",
    "average_precision",
    "balanced_counts",
    "baseline_decide",
    "confusion",
    "decide_body",
    "default_task_config",
    "diff_in_means",
    "enumerate_permutations",
    "frt_p_value",
    "generate_task",
    "inject_environment",
    "inject_other_agents",
    "mean_metrics",
    "metrics",
    "oracle_true_effect",
    "oracle_variance",
    "permute_for_test",
    "randomize_allocation",
    "replay_trace",
    "run_round",
    "run_suite",
    "run_sweep",
    "sample_effects",
    "sense",
    "stage_delta",
    "step",
    "summarize_effects",
]
