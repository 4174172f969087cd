"""Score predicted body sets against the ground truth.

Undefined ratios (0/0) are carried as explicit None rather than zero, so
tables can render them as N/A and round averages can skip them.
"""

from __future__ import annotations

from dataclasses import dataclass, fields
from typing import Mapping, Sequence

METRIC_NAMES = ("accuracy", "recall", "precision", "specificity", "f1", "average_precision")


@dataclass(frozen=True)
class MetricSet:
    accuracy: float | None = None
    recall: float | None = None
    precision: float | None = None
    specificity: float | None = None
    f1: float | None = None
    average_precision: float | None = None

    def as_dict(self) -> dict[str, float | None]:
        return {f.name: getattr(self, f.name) for f in fields(self)}


def confusion(predicted: set[int], truth: set[int], n_objects: int) -> tuple[int, int, int, int]:
    """(TP, FP, FN, TN) counts over object ids 0..n_objects-1."""
    predicted = set(predicted)
    truth = set(truth)
    for name, ids in (("predicted", predicted), ("truth", truth)):
        bad = [i for i in ids if not 0 <= i < n_objects]
        if bad:
            raise ValueError(f"{name} ids {bad} outside 0..{n_objects - 1}")
    tp = len(predicted & truth)
    fp = len(predicted - truth)
    fn = len(truth - predicted)
    tn = n_objects - tp - fp - fn
    return tp, fp, fn, tn


def _ratio(num: float, den: float) -> float | None:
    return None if den == 0 else num / den


def metrics(counts: tuple[int, int, int, int]) -> MetricSet:
    """Standard confusion-count metrics; 0/0 comes out as None."""
    tp, fp, fn, tn = counts
    if min(counts) < 0:
        raise ValueError(f"negative confusion counts {counts}")
    total = tp + fp + fn + tn
    precision = _ratio(tp, tp + fp)
    recall = _ratio(tp, tp + fn)
    if precision is None or recall is None or precision + recall == 0:
        f1 = None
    else:
        f1 = 2 * precision * recall / (precision + recall)
    return MetricSet(
        accuracy=_ratio(tp + tn, total),
        recall=recall,
        precision=precision,
        specificity=_ratio(tn, tn + fp),
        f1=f1,
        average_precision=None,
    )


def average_precision(scores: Mapping[int, float], truth: set[int]) -> float | None:
    """Area under precision-recall for the ranking by ascending score.

    Scores are per-object evidence (smaller = stronger, e.g. the
    object's best p-value); ties break by object id. None when the truth
    set is empty.
    """
    truth = set(truth)
    if not truth:
        return None
    missing = truth - set(scores)
    if missing:
        raise ValueError(f"no score for truth objects {sorted(missing)}")
    ranking = sorted(scores, key=lambda obj: (scores[obj], obj))
    hits = 0
    precision_sum = 0.0
    for rank, obj in enumerate(ranking, start=1):
        if obj in truth:
            hits += 1
            precision_sum += hits / rank
    return precision_sum / len(truth)


def mean_metrics(rounds: Sequence[MetricSet]) -> tuple[MetricSet, dict[str, int]]:
    """Arithmetic per-metric average, skipping None rounds per metric.

    Returns the averaged set and, per metric, how many rounds were
    excluded as undefined.
    """
    if not rounds:
        raise ValueError("no rounds to average")
    averaged: dict[str, float | None] = {}
    excluded: dict[str, int] = {}
    for name in METRIC_NAMES:
        values = [getattr(m, name) for m in rounds]
        defined = [v for v in values if v is not None]
        excluded[name] = len(values) - len(defined)
        averaged[name] = sum(defined) / len(defined) if defined else None
    return MetricSet(**averaged), excluded
