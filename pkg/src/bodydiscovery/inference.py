"""Effect estimation, randomization testing, and body decisions.

The estimand for signal q on cell (n, k) is the difference between the
mean per-stage change on stages where q fired and the mean change on
control stages. Significance comes from a randomization test that
reshuffles only the 0/q labels of the observed allocation, so p-values
are exact under the sharp null of no effect at any stage. Bonferroni
correction divides alpha by the number of tests in the round.
"""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass
from functools import lru_cache
from itertools import combinations, islice
from statistics import NormalDist
from typing import Iterable, Sequence

import numpy as np

from .design import ENUMERATION_CAP
from .model import ActionSequence
from .seeding import derive_seed

CORRECTIONS = ("none", "bonferroni")

# Cached exact-enumeration index tables are capped by total index count.
_CACHE_MAX_ENTRIES = 8_000_000
_CHUNK_ROWS = 200_000


@dataclass(frozen=True)
class EffectEstimate:
    """Per-firing effect of one signal on one object feature cell."""

    object_index: int
    feature_index: int
    signal: int
    xi_hat: float


@dataclass(frozen=True)
class TestRecord:
    object_index: int
    feature_index: int
    signal: int
    xi_hat: float
    p_value: float
    rejected: bool


@dataclass(frozen=True)
class VarianceComponents:
    """Finite-population variance pieces of the difference estimator."""

    s_q_sq: float
    s_0_sq: float
    s_tau_q_sq: float
    var_xi: float


@dataclass(frozen=True)
class TestReport:
    """All per-(object, feature, signal) outcomes plus object verdicts."""

    records: tuple[TestRecord, ...]
    n_objects: int
    alpha: float
    correction: str
    threshold: float
    mc_samples: int
    body_objects: frozenset[int]

    def __post_init__(self):
        object.__setattr__(self, "records", tuple(self.records))
        object.__setattr__(self, "body_objects", frozenset(self.body_objects))

    def is_body(self, object_index: int) -> bool:
        return object_index in self.body_objects

    def min_p_scores(self) -> dict[int, float]:
        """Per-object evidence score: smallest p over its tests (1.0 if none)."""
        scores = {n: 1.0 for n in range(self.n_objects)}
        for r in self.records:
            if r.p_value < scores[r.object_index]:
                scores[r.object_index] = r.p_value
        return scores

    def to_json(self) -> dict:
        return {
            "n_objects": self.n_objects,
            "alpha": self.alpha,
            "correction": self.correction,
            "threshold": self.threshold,
            "mc_samples": self.mc_samples,
            "body_objects": sorted(self.body_objects),
            "records": [
                {
                    "object": r.object_index,
                    "feature": r.feature_index,
                    "signal": r.signal,
                    "xi_hat": r.xi_hat,
                    "p_value": r.p_value,
                    "rejected": r.rejected,
                }
                for r in self.records
            ],
        }

    @classmethod
    def from_json(cls, payload: dict) -> "TestReport":
        records = tuple(
            TestRecord(
                r["object"], r["feature"], r["signal"], r["xi_hat"], r["p_value"], r["rejected"]
            )
            for r in payload["records"]
        )
        return cls(
            records=records,
            n_objects=payload["n_objects"],
            alpha=payload["alpha"],
            correction=payload["correction"],
            threshold=payload["threshold"],
            mc_samples=payload["mc_samples"],
            body_objects=frozenset(payload["body_objects"]),
        )


def _split_values(deltas: np.ndarray, actions: np.ndarray, q: int):
    if q < 1:
        raise ValueError(f"signal index must be >= 1, got {q}")
    deltas = np.asarray(deltas, dtype=np.float64)
    if deltas.shape != actions.shape:
        raise ValueError(
            f"deltas length {deltas.shape} does not match {actions.shape} stages"
        )
    signal = actions == q
    control = actions == 0
    if not signal.any():
        raise ValueError(f"action {q} absent from sequence")
    if not control.any():
        raise ValueError("control action 0 absent from sequence")
    return deltas, signal, control


def diff_in_means(deltas: np.ndarray, actions: ActionSequence | np.ndarray, q: int) -> float:
    """Mean change on q-stages minus mean change on control stages."""
    acts = actions.actions if isinstance(actions, ActionSequence) else np.asarray(actions)
    deltas, signal, control = _split_values(deltas, acts, q)
    return float(deltas[signal].mean() - deltas[control].mean())


def oracle_true_effect(
    delta_under_signal: np.ndarray, delta_under_control: np.ndarray
) -> float:
    """Average per-stage treatment effect from a full potential-outcome table.

    Only computable in simulation/tests, where both arms are known for
    every stage.
    """
    a = np.asarray(delta_under_signal, dtype=np.float64)
    b = np.asarray(delta_under_control, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError("potential outcome arms have different lengths")
    return float(np.mean(a - b))


def oracle_variance(
    delta_under_signal: np.ndarray,
    delta_under_control: np.ndarray,
    n_q: int,
    n_0: int,
) -> VarianceComponents:
    """Exact randomization variance of the difference estimator.

    Needs the full potential-outcome table, so this is a test-time
    oracle only: the treatment-effect spread term cannot be identified
    from observed data.
    """
    a = np.asarray(delta_under_signal, dtype=np.float64)
    b = np.asarray(delta_under_control, dtype=np.float64)
    t = a.size
    if t != b.size:
        raise ValueError("potential outcome arms have different lengths")
    if t < 2:
        raise ValueError("variance oracle needs at least two stages")
    s_q = float(np.sum((a - a.mean()) ** 2) / (t - 1))
    s_0 = float(np.sum((b - b.mean()) ** 2) / (t - 1))
    tau = (a - a.mean()) - (b - b.mean())
    s_tau = float(np.sum(tau**2) / (t - 1))
    var = s_q / n_q + s_0 / n_0 - s_tau / (n_q + n_0)
    return VarianceComponents(s_q, s_0, s_tau, var)


@lru_cache(maxsize=32)
def _subset_indices(length: int, k: int) -> np.ndarray:
    return np.array(list(combinations(range(length), k)), dtype=np.intp)


def _exact_statistic_sums(v: np.ndarray, n_q: int) -> Iterable[np.ndarray]:
    """Subset sums of v over all n_q-subsets, yielded in chunks."""
    total = math.comb(v.size, n_q)
    if total * n_q <= _CACHE_MAX_ENTRIES:
        yield v[_subset_indices(v.size, n_q)].sum(axis=1)
        return
    it = combinations(range(v.size), n_q)
    while True:
        chunk = list(islice(it, _CHUNK_ROWS))
        if not chunk:
            return
        yield v[np.array(chunk, dtype=np.intp)].sum(axis=1)


def frt_p_value(
    deltas: np.ndarray,
    d_obs: ActionSequence,
    q: int,
    m_samples: int,
    rng: np.random.Generator,
    exact_cap: int = ENUMERATION_CAP,
) -> float:
    """Randomization-test p-value for signal q on one delta series.

    Tests the sharp null that q changes nothing at any stage, using
    |difference in means| as the statistic. When the constrained
    permutation set has at most ``exact_cap`` elements the p-value is
    computed by full enumeration (so it is exact and at least
    1/#permutations); otherwise it is the Monte Carlo fraction
    #{|stat_m| >= |stat_obs|} / m_samples over m_samples uniform draws,
    where p = 0 is possible.
    """
    if m_samples < 1:
        raise ValueError("need at least one Monte Carlo sample")
    deltas, signal, control = _split_values(deltas, np.asarray(d_obs.actions), q)
    pool = signal | control
    v = deltas[pool]
    labels = signal[pool]
    n_q = int(labels.sum())
    n_0 = int(v.size - n_q)
    # All-tied series: every permuted statistic equals the observed one.
    if v.max() == v.min():
        return 1.0
    scale = 1.0 / n_q + 1.0 / n_0
    offset = v.sum() / n_0
    obs = abs(v[labels].sum() * scale - offset)
    # Mathematically tied statistics (e.g. complement arrangements) must
    # count as ties despite summation-order rounding; the sliver of
    # near-ties this admits only nudges p upward (conservative).
    threshold = obs * (1.0 - 1e-9)
    total = math.comb(v.size, n_q)
    if total <= exact_cap:
        hits = 0
        for sums in _exact_statistic_sums(v, n_q):
            hits += int(np.count_nonzero(np.abs(sums * scale - offset) >= threshold))
        return hits / total
    keys = rng.random((m_samples, v.size))
    idx = np.argpartition(keys, n_q - 1, axis=1)[:, :n_q]
    sums = np.take_along_axis(np.broadcast_to(v, (m_samples, v.size)), idx, axis=1).sum(axis=1)
    hits = int(np.count_nonzero(np.abs(sums * scale - offset) >= threshold))
    return hits / m_samples


def run_tests(
    deltas: np.ndarray,
    actions: ActionSequence,
    mask: np.ndarray,
    m_samples: int = 1000,
    exact_cap: int = ENUMERATION_CAP,
    seed: int = 0,
) -> tuple[list[EffectEstimate], list[float]]:
    """Run every (object, feature, signal) test on a (T, N, K) delta stack.

    Each test draws from its own stream seeded by hashing
    (seed, object, feature, signal), so results do not depend on
    execution order or worker count. With m_samples=0 only the effect
    estimates are computed and every p-value is reported as 1.
    """
    t, n_objects, n_cols = deltas.shape
    if actions.n_stages != t:
        raise ValueError(f"{t} deltas vs {actions.n_stages} actions")
    estimates: list[EffectEstimate] = []
    p_values: list[float] = []
    for n in range(n_objects):
        for k in range(n_cols):
            if not mask[n, k]:
                continue
            series = deltas[:, n, k]
            for q in range(1, actions.n_signals + 1):
                xi = diff_in_means(series, actions, q)
                if m_samples == 0:
                    p = 1.0
                else:
                    rng = np.random.default_rng(derive_seed(seed, "test", n, k, q))
                    p = frt_p_value(series, actions, q, m_samples, rng, exact_cap)
                estimates.append(EffectEstimate(n, k, q, xi))
                p_values.append(p)
    return estimates, p_values


def decide_body(
    estimates: Sequence[EffectEstimate],
    p_values: Sequence[float],
    alpha: float,
    correction: str,
    n_objects: int,
    mc_samples: int = 1000,
) -> TestReport:
    """Threshold the p-value table and aggregate per-object verdicts.

    The effective threshold is alpha as-is, or alpha divided by the
    number of tests under "bonferroni". An object is flagged as body as
    soon as any of its (feature, signal) tests rejects.
    """
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must be in (0, 1), got {alpha}")
    if correction not in CORRECTIONS:
        raise ValueError(f"unknown correction {correction!r}, expected one of {CORRECTIONS}")
    if len(estimates) == 0:
        raise ValueError("empty test table")
    if len(estimates) != len(p_values):
        raise ValueError("estimates and p-values are misaligned")
    threshold = alpha / len(estimates) if correction == "bonferroni" else alpha
    records = []
    body = set()
    for est, p in zip(estimates, p_values):
        rejected = p <= threshold
        if rejected:
            body.add(est.object_index)
        records.append(
            TestRecord(est.object_index, est.feature_index, est.signal, est.xi_hat, p, rejected)
        )
    return TestReport(
        records=tuple(records),
        n_objects=n_objects,
        alpha=alpha,
        correction=correction,
        threshold=threshold,
        mc_samples=mc_samples,
        body_objects=frozenset(body),
    )


def baseline_decide(
    estimates: Sequence[EffectEstimate],
    alpha: float,
    n_objects: int,
) -> TestReport:
    """Normal-quantile band baseline over the pooled effect estimates.

    Flags every estimate outside mean +/- z_{1-alpha/2} * variance of
    the pooled estimate set (the band uses the variance itself as the
    scale). Reported p-values are the matching two-sided normal tail
    probabilities of the variance-scaled deviation, so ranking and
    thresholding agree with the flag rule.
    """
    if len(estimates) < 2:
        raise ValueError("baseline needs at least two estimates")
    xs = np.array([e.xi_hat for e in estimates], dtype=np.float64)
    center = float(xs.mean())
    spread = float(xs.var(ddof=1))
    dist = NormalDist()
    records = []
    body = set()
    if spread == 0.0:
        warnings.warn("pooled estimate variance is zero; baseline flags nothing")
        for est in estimates:
            records.append(
                TestRecord(est.object_index, est.feature_index, est.signal, est.xi_hat, 1.0, False)
            )
    else:
        z = dist.inv_cdf(1.0 - alpha / 2.0)
        band = z * spread
        for est in estimates:
            dev = abs(est.xi_hat - center)
            p = 2.0 * (1.0 - dist.cdf(dev / spread))
            rejected = dev >= band
            if rejected:
                body.add(est.object_index)
            records.append(
                TestRecord(est.object_index, est.feature_index, est.signal, est.xi_hat, p, rejected)
            )
    return TestReport(
        records=tuple(records),
        n_objects=n_objects,
        alpha=alpha,
        correction="baseline",
        threshold=alpha,
        mc_samples=0,
        body_objects=frozenset(body),
    )


def summarize_effects(report: TestReport) -> tuple[TestRecord, ...]:
    """Per-firing effect summaries for every rejected test."""
    return tuple(r for r in report.records if r.rejected)


def write_effects_csv(report: TestReport, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["object", "feature", "signal", "xi_hat", "p_value", "rejected"])
        for r in report.records:
            writer.writerow(
                [
                    r.object_index,
                    r.feature_index,
                    r.signal,
                    f"{r.xi_hat:.9g}",
                    f"{r.p_value:.9g}",
                    str(r.rejected).lower(),
                ]
            )
