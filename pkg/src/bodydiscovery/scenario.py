"""Task-world generation: objects, hidden effects, noise targets, mirrors.

Thirteen task ids are supported. T0-T8 combine the four feature
categories (pose counters, joint angles, 2D dogs, 3D drones, binary
lights); T9-T12 repeat T1-T4 with a mirror plane that duplicates every
object on the facing side as a reflection. Generation is a pure
function of the TaskConfig, including its seed.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .model import CellKind, FeatureKind, GroundTruth, WorldSnapshot, wrap_angle
from .sim import NoiseConfig

TASKS = tuple(f"T{i}" for i in range(13))

# Mirror tasks reuse the single-feature worlds of T1-T4.
MIRROR_SOURCE = {"T9": "T1", "T10": "T2", "T11": "T3", "T12": "T4"}

_TASK_PROFILES = {
    "T0": ("pose",),
    "T1": ("joint",),
    "T2": ("dog",),
    "T3": ("drone",),
    "T4": ("light",),
    "T5": ("dog", "drone"),
    "T6": ("dog", "light"),
    "T7": ("drone", "light"),
    "T8": ("dog", "drone", "light"),
}

_PROFILE_KIND = {
    "pose": FeatureKind.DISCRETE_STATE,
    "joint": FeatureKind.ROTATION,
    "dog": FeatureKind.POSITION_2D,
    "drone": FeatureKind.POSITION_3D,
    "light": FeatureKind.DISCRETE_STATE,
}


@dataclass(frozen=True)
class ObjectFeature:
    """One feature of one object, flattened onto snapshot columns.

    ``levels`` is None for unbounded counters and 2 for binary lights;
    continuous kinds ignore it.
    """

    kind: FeatureKind
    columns: tuple[int, ...]
    levels: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "columns", tuple(int(c) for c in self.columns))
        if len(self.columns) != self.kind.width:
            raise ValueError(f"{self.kind} spans {self.kind.width} columns, got {self.columns}")

    @property
    def cell_kind(self) -> CellKind:
        if self.kind is FeatureKind.ROTATION:
            return CellKind.ANGLE
        if self.kind in (FeatureKind.POSITION_2D, FeatureKind.POSITION_3D):
            return CellKind.LINEAR
        return CellKind.COUNTER

    @property
    def is_bounded(self) -> bool:
        return self.kind is FeatureKind.DISCRETE_STATE and self.levels is not None


@dataclass(frozen=True)
class FeatureLayout:
    """Per-object feature lists plus the derived cell grids.

    ``caps`` holds the top level of bounded counter cells (0 means
    unbounded); the simulator clamps level changes against it.
    """

    features: tuple[tuple[ObjectFeature, ...], ...]
    n_columns: int

    def __post_init__(self):
        object.__setattr__(self, "features", tuple(tuple(f) for f in self.features))
        mask = np.zeros((self.n_objects, self.n_columns), dtype=bool)
        kinds = np.zeros((self.n_objects, self.n_columns), dtype=np.int8)
        caps = np.zeros((self.n_objects, self.n_columns), dtype=np.int16)
        for n, feats in enumerate(self.features):
            for f in feats:
                for c in f.columns:
                    if c >= self.n_columns:
                        raise ValueError(f"column {c} outside layout width {self.n_columns}")
                    if mask[n, c]:
                        raise ValueError(f"object {n} assigns column {c} twice")
                    mask[n, c] = True
                    kinds[n, c] = int(f.cell_kind)
                    if f.is_bounded:
                        caps[n, c] = f.levels - 1
        mask.setflags(write=False)
        kinds.setflags(write=False)
        caps.setflags(write=False)
        object.__setattr__(self, "mask", mask)
        object.__setattr__(self, "kinds", kinds)
        object.__setattr__(self, "caps", caps)

    @property
    def n_objects(self) -> int:
        return len(self.features)


@dataclass(frozen=True)
class Effect:
    """What one signal does to one object feature, per firing."""

    object_index: int
    feature_index: int
    columns: tuple[int, ...]
    components: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "columns", tuple(int(c) for c in self.columns))
        object.__setattr__(self, "components", tuple(float(c) for c in self.components))
        if len(self.columns) != len(self.components):
            raise ValueError("effect columns and components are misaligned")
        if not any(c != 0.0 for c in self.components):
            raise ValueError("effect magnitude must be nonzero")


@dataclass(frozen=True)
class EffectTable:
    """Per-signal effect entries; fixed for the whole round."""

    signals: tuple[tuple[Effect, ...], ...]

    def __post_init__(self):
        object.__setattr__(self, "signals", tuple(tuple(s) for s in self.signals))

    @property
    def n_signals(self) -> int:
        return len(self.signals)

    def for_signal(self, q: int) -> tuple[Effect, ...]:
        if not 1 <= q <= self.n_signals:
            raise ValueError(f"signal {q} outside 1..{self.n_signals}")
        return self.signals[q - 1]


@dataclass(frozen=True)
class MirrorPlane:
    """A vertical mirror: a point on the plane and a unit horizontal normal.

    Objects on the side the normal points toward face the mirror and get
    reflected; objects behind it stay untouched.
    """

    point: tuple[float, float]
    normal: tuple[float, float]

    def __post_init__(self):
        point = tuple(float(v) for v in self.point)
        normal = np.asarray(self.normal, dtype=np.float64)
        norm = float(np.linalg.norm(normal))
        if norm == 0.0:
            raise ValueError("mirror normal must be nonzero")
        normal = normal / norm
        object.__setattr__(self, "point", point)
        object.__setattr__(self, "normal", (float(normal[0]), float(normal[1])))

    def signed_side(self, xy: Sequence[float]) -> float:
        p = np.asarray(self.point)
        u = np.asarray(self.normal)
        return float(np.dot(np.asarray(xy, dtype=np.float64) - p, u))

    def reflect_point(self, xy: Sequence[float]) -> np.ndarray:
        u = np.asarray(self.normal)
        return np.asarray(xy, dtype=np.float64) - 2.0 * self.signed_side(xy) * u

    def reflect_direction(self, v: Sequence[float]) -> np.ndarray:
        u = np.asarray(self.normal)
        v = np.asarray(v, dtype=np.float64)
        return v - 2.0 * float(np.dot(v, u)) * u

    def reflect_angle(self, theta: float) -> float:
        d = self.reflect_direction([np.cos(theta), np.sin(theta)])
        return float(wrap_angle(np.arctan2(d[1], d[0])))


@dataclass(frozen=True)
class OtherAgentSet:
    """Non-body objects driven by other agents, plus their periodic cycle.

    ``cycle`` has shape (n_agents, 4, n_columns): the unit-scale delta
    each agent applies at stage phase t mod 4 in periodic mode.
    """

    object_ids: tuple[int, ...]
    cycle: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "object_ids", tuple(int(i) for i in self.object_ids))
        cycle = np.array(self.cycle, dtype=np.float64, copy=True)
        if cycle.shape[:2] != (len(self.object_ids), 4):
            raise ValueError("cycle must be (n_agents, 4, n_columns)")
        cycle.setflags(write=False)
        object.__setattr__(self, "cycle", cycle)

    @classmethod
    def empty(cls, n_columns: int) -> "OtherAgentSet":
        return cls((), np.zeros((0, 4, n_columns)))


@dataclass(frozen=True)
class TaskConfig:
    """Everything needed to rebuild one round's world, including the seed."""

    task: str = "T8"
    n_objects: int = 50
    n_signals: int = 5
    n_stages: int = 200
    action_counts: tuple[int, ...] | None = None
    noise: NoiseConfig = field(default_factory=NoiseConfig)
    effect_low: float = 0.5
    effect_high: float = 2.0
    arena: float = 5.0
    n_body: int | None = None
    pose_levels: int = 8
    light_levels: int = 6
    other_agent_fraction: float = 0.2
    max_pairs_per_signal: int = 3
    seed: int = 0

    def __post_init__(self):
        if self.task not in TASKS:
            raise ValueError(f"unknown task {self.task!r}")
        if self.n_signals < 1:
            raise ValueError("need at least one signal")
        if self.n_objects < self.body_count or self.body_count < 1:
            raise ValueError(
                f"need n_objects >= body objects >= 1, got {self.n_objects} and {self.body_count}"
            )
        counts = self.counts
        if len(counts) != self.n_signals + 1 or any(c < 1 for c in counts):
            raise ValueError(f"invalid action counts {counts}")
        if sum(counts) != self.n_stages:
            raise ValueError(f"action counts {counts} do not sum to {self.n_stages}")
        if not 0.0 < self.effect_low <= self.effect_high:
            raise ValueError("effect magnitude range must satisfy 0 < low <= high")
        if self.arena <= 0.0:
            raise ValueError("arena size must be positive")
        if self.pose_levels < 2:
            raise ValueError("pose vocabulary needs at least two levels")
        if self.light_levels < 2:
            raise ValueError("lights need at least two levels")
        if not 0.0 <= self.other_agent_fraction <= 1.0:
            raise ValueError("other-agent fraction must be in [0, 1]")
        if self.max_pairs_per_signal < 1:
            raise ValueError("signals need at least one effect pair")
        if self.action_counts is not None:
            object.__setattr__(self, "action_counts", tuple(int(c) for c in self.action_counts))

    @property
    def counts(self) -> tuple[int, ...]:
        if self.action_counts is not None:
            return tuple(self.action_counts)
        from .design import balanced_counts

        return balanced_counts(self.n_stages, self.n_signals)

    @property
    def body_count(self) -> int:
        if self.n_body is not None:
            return self.n_body
        return max(1, self.n_objects // 5)

    @property
    def effect_scale(self) -> float:
        return 0.5 * (self.effect_low + self.effect_high)

    def to_json(self) -> dict:
        return {
            "task": self.task,
            "n_objects": self.n_objects,
            "n_signals": self.n_signals,
            "n_stages": self.n_stages,
            "action_counts": list(self.action_counts) if self.action_counts else None,
            "noise": {
                "n1_intensity": self.noise.n1_intensity,
                "n2_intensity": self.noise.n2_intensity,
                "n2_pattern": self.noise.n2_pattern,
                "n3_failure_prob": self.noise.n3_failure_prob,
                "n4_sensing_error": self.noise.n4_sensing_error,
            },
            "effect_low": self.effect_low,
            "effect_high": self.effect_high,
            "arena": self.arena,
            "n_body": self.n_body,
            "pose_levels": self.pose_levels,
            "light_levels": self.light_levels,
            "other_agent_fraction": self.other_agent_fraction,
            "max_pairs_per_signal": self.max_pairs_per_signal,
            "seed": self.seed,
        }

    @classmethod
    def from_json(cls, payload: dict) -> "TaskConfig":
        payload = dict(payload)
        noise = payload.pop("noise", {})
        counts = payload.pop("action_counts", None)
        return cls(
            action_counts=tuple(counts) if counts else None,
            noise=NoiseConfig(**noise),
            **payload,
        )


@dataclass(frozen=True)
class Scenario:
    """A fully generated round world; the truth field stays harness-side."""

    config: TaskConfig
    layout: FeatureLayout
    initial: WorldSnapshot
    truth: GroundTruth
    other_agents: OtherAgentSet
    mirror: MirrorPlane | None
    scene_positions: np.ndarray
    sensing_ref: np.ndarray
    reflection_of: tuple[int, ...]

    def __post_init__(self):
        pos = np.array(self.scene_positions, dtype=np.float64, copy=True)
        ref = np.array(self.sensing_ref, dtype=np.float64, copy=True)
        pos.setflags(write=False)
        ref.setflags(write=False)
        object.__setattr__(self, "scene_positions", pos)
        object.__setattr__(self, "sensing_ref", ref)
        object.__setattr__(self, "reflection_of", tuple(int(i) for i in self.reflection_of))

    @property
    def n_objects(self) -> int:
        return self.layout.n_objects

    @property
    def effect_scale(self) -> float:
        return self.config.effect_scale


def _profile_feature(profile: str, cfg: TaskConfig) -> ObjectFeature:
    kind = _PROFILE_KIND[profile]
    levels = cfg.light_levels if profile == "light" else None
    return ObjectFeature(kind, tuple(range(kind.width)), levels)


def _sample_initial(profile: str, cfg: TaskConfig, rng: np.random.Generator) -> np.ndarray:
    if profile == "pose":
        return np.array([rng.integers(0, cfg.pose_levels)], dtype=np.float64)
    if profile == "joint":
        return rng.uniform(0.0, 2.0 * np.pi, size=1)
    if profile == "dog":
        return rng.uniform(0.0, cfg.arena, size=2)
    if profile == "drone":
        return rng.uniform(0.0, cfg.arena, size=3)
    if profile == "light":
        return np.array([rng.integers(0, cfg.light_levels)], dtype=np.float64)
    raise ValueError(f"unknown profile {profile!r}")


_SENSING_REF_BY_KIND = {
    CellKind.ANGLE: np.pi,
    CellKind.LINEAR: None,  # 0.6 * arena, filled per config
    CellKind.COUNTER: 1.0,
}


def _sensing_ref(layout: FeatureLayout, arena: float) -> np.ndarray:
    """Per-cell sensing scale: the error proportion multiplies this."""
    ref = np.zeros((layout.n_objects, layout.n_columns))
    for kind in CellKind:
        scale = _SENSING_REF_BY_KIND[kind]
        if scale is None:
            scale = 0.6 * arena
        ref[layout.kinds == int(kind)] = scale
    ref[~layout.mask] = 0.0
    return ref


def _effect_components(
    feature: ObjectFeature, cfg: TaskConfig, rng: np.random.Generator, force_sign: float | None = None
) -> tuple[float, ...]:
    kind = feature.cell_kind
    if kind is CellKind.LINEAR:
        mags = rng.uniform(cfg.effect_low, cfg.effect_high, size=len(feature.columns))
        signs = rng.integers(0, 2, size=len(feature.columns)) * 2 - 1
        return tuple(float(m * s) for m, s in zip(mags, signs))
    if kind is CellKind.ANGLE:
        mag = rng.uniform(cfg.effect_low, cfg.effect_high)
        sign = force_sign if force_sign is not None else float(rng.integers(0, 2) * 2 - 1)
        return (float(mag * sign),)
    if not feature.is_bounded:
        step = max(1, int(round(rng.uniform(cfg.effect_low, cfg.effect_high))))
        return (float(step),)
    # Bounded light: a per-firing one-level switch up or down.
    sign = force_sign if force_sign is not None else float(rng.integers(0, 2) * 2 - 1)
    return (sign,)


def sample_effects(
    cfg: TaskConfig,
    body_objects: Sequence[int],
    layout: FeatureLayout,
    rng: np.random.Generator,
) -> EffectTable:
    """Randomly wire signals to body-object features.

    Guarantees both directions of coverage: every signal controls at
    least one (object, feature) pair and every body object is controlled
    by at least one signal, with up to ``max_pairs_per_signal`` pairs per
    signal. Bounded lights additionally get opposite-direction switches
    on other signals whenever possible, so a controlled light keeps
    changing level instead of saturating against a clamp.
    """
    body = [int(b) for b in body_objects]
    if not body:
        raise ValueError("cannot sample effects for an empty body set")
    q_range = range(1, cfg.n_signals + 1)
    entries: dict[int, list[Effect]] = {q: [] for q in q_range}
    used: set[tuple[int, int, int]] = set()

    def add(q: int, obj: int, feat_idx: int, force_sign: float | None = None) -> None:
        feature = layout.features[obj][feat_idx]
        components = _effect_components(feature, cfg, rng, force_sign)
        entries[q].append(Effect(obj, feat_idx, feature.columns, components))
        used.add((q, obj, feat_idx))

    def pick_feature(obj: int) -> int:
        return int(rng.integers(0, len(layout.features[obj])))

    for obj in body:
        add(int(rng.integers(1, cfg.n_signals + 1)), obj, pick_feature(obj))
    for q in q_range:
        if not entries[q]:
            obj = int(body[rng.integers(0, len(body))])
            add(q, obj, pick_feature(obj))
    for q in q_range:
        target = int(rng.integers(1, cfg.max_pairs_per_signal + 1))
        attempts = 0
        while len(entries[q]) < target and attempts < 20:
            attempts += 1
            obj = int(body[rng.integers(0, len(body))])
            feat_idx = pick_feature(obj)
            if (q, obj, feat_idx) not in used:
                add(q, obj, feat_idx)

    if cfg.n_signals >= 2:
        _pair_light_switches(cfg, layout, entries, used, rng, add)

    return EffectTable(tuple(tuple(entries[q]) for q in q_range))


def _pair_light_switches(cfg, layout, entries, used, rng, add) -> None:
    """Give one-directional light switches opposite partner signals.

    Up to two partners per cell: a switch only transitions a light in
    the opposite state, so without partners a controlled light would
    saturate after one firing; a second partner raises how often the
    light is re-armed between firings.
    """
    by_cell: dict[tuple[int, int], list[tuple[int, int]]] = {}
    for q, effs in entries.items():
        for i, e in enumerate(effs):
            feature = layout.features[e.object_index][e.feature_index]
            if feature.is_bounded:
                by_cell.setdefault((e.object_index, e.feature_index), []).append((q, i))
    for (obj, feat_idx), holders in sorted(by_cell.items()):
        signs = {entries[q][i].components[0] for q, i in holders}
        if len(signs) > 1:
            continue
        sign = signs.pop()
        holder_qs = {q for q, _ in holders}
        candidates = [q for q in entries if q not in holder_qs]
        if candidates:
            n_partners = min(2, len(candidates))
            chosen = rng.choice(len(candidates), size=n_partners, replace=False)
            for idx in sorted(int(c) for c in chosen):
                add(candidates[idx], obj, feat_idx, force_sign=-sign)
        elif len(holders) > 1:
            q_flip, i_flip = holders[-1]
            old = entries[q_flip][i_flip]
            entries[q_flip][i_flip] = Effect(
                old.object_index, old.feature_index, old.columns, (-sign,)
            )


def sample_mirror_plane(cfg: TaskConfig, rng: np.random.Generator) -> MirrorPlane:
    """Place a mirror at a random interior point with a random heading."""
    point = rng.uniform(0.3 * cfg.arena, 0.7 * cfg.arena, size=2)
    angle = rng.uniform(0.0, 2.0 * np.pi)
    return MirrorPlane(tuple(point), (float(np.cos(angle)), float(np.sin(angle))))


def generate_task(cfg: TaskConfig) -> Scenario:
    """Build one task world deterministically from its config.

    Returns the full scenario: initial snapshot, layout, hidden ground
    truth, other-agent designations, sensing scales, and (for T9-T12)
    the applied mirror.
    """
    rng = np.random.default_rng(cfg.seed)
    base_task = MIRROR_SOURCE.get(cfg.task, cfg.task)
    profiles = _TASK_PROFILES[base_task]

    chosen = [profiles[int(rng.integers(0, len(profiles)))] for _ in range(cfg.n_objects)]
    features = [(_profile_feature(p, cfg),) for p in chosen]
    n_columns = max(f[0].kind.width for f in features)
    layout = FeatureLayout(tuple(features), n_columns)

    values = np.zeros((cfg.n_objects, n_columns))
    scene = np.zeros((cfg.n_objects, 2))
    for n, profile in enumerate(chosen):
        init = _sample_initial(profile, cfg, rng)
        values[n, : init.size] = init
        if profile in ("dog", "drone"):
            scene[n] = values[n, :2]
        else:
            scene[n] = rng.uniform(0.0, cfg.arena, size=2)
    initial = WorldSnapshot(0, values, layout.mask, layout.kinds)

    body = np.sort(rng.choice(cfg.n_objects, size=cfg.body_count, replace=False))
    effects = sample_effects(cfg, body.tolist(), layout, rng)

    non_body = [n for n in range(cfg.n_objects) if n not in set(body.tolist())]
    n_agents = int(round(cfg.other_agent_fraction * len(non_body)))
    agent_ids = sorted(
        int(i) for i in rng.choice(non_body, size=n_agents, replace=False)
    ) if n_agents else []
    cycle = np.zeros((len(agent_ids), 4, n_columns))
    if agent_ids:
        half = rng.integers(0, 2, size=(len(agent_ids), 2, n_columns)) * 2.0 - 1.0
        cycle[:, 0] = half[:, 0]
        cycle[:, 1] = half[:, 1]
        cycle[:, 2] = -half[:, 0]
        cycle[:, 3] = -half[:, 1]
    agents = OtherAgentSet(tuple(agent_ids), cycle)

    truth = GroundTruth(frozenset(int(b) for b in body), effects)
    scenario = Scenario(
        config=cfg,
        layout=layout,
        initial=initial,
        truth=truth,
        other_agents=agents,
        mirror=None,
        scene_positions=scene,
        sensing_ref=_sensing_ref(layout, cfg.arena),
        reflection_of=(-1,) * cfg.n_objects,
    )
    if cfg.task in MIRROR_SOURCE:
        scenario = apply_mirror(scenario, plane=None, rng=rng)
    return scenario


def apply_mirror(
    scenario: Scenario,
    plane: MirrorPlane | None = None,
    rng: np.random.Generator | None = None,
) -> Scenario:
    """Duplicate every mirror-facing object as a reflection.

    Reflections of body objects join the body set and receive mirrored
    copies of their source's effect entries (displacements reflected
    across the plane, rotations negated, discrete switches unchanged).
    Objects behind the mirror stay as they were. When ``plane`` is None a
    random one is drawn from ``rng``.
    """
    cfg = scenario.config
    if plane is None:
        if rng is None:
            raise ValueError("need an rng to sample a mirror plane")
        plane = sample_mirror_plane(cfg, rng)
    point = np.asarray(plane.point)
    if not ((0.0 <= point) & (point <= cfg.arena)).all():
        raise ValueError(f"mirror point {plane.point} lies outside the arena")

    n_src = scenario.n_objects
    facing = [n for n in range(n_src) if plane.signed_side(scenario.scene_positions[n]) >= 0.0]
    reflection_id = {src: n_src + i for i, src in enumerate(facing)}

    features = list(scenario.layout.features)
    values = [np.array(scenario.initial.values[n]) for n in range(n_src)]
    scene = [np.array(scenario.scene_positions[n]) for n in range(n_src)]
    reflection_of = list(scenario.reflection_of)

    for src in facing:
        feats = scenario.layout.features[src]
        features.append(feats)
        row = np.array(scenario.initial.values[src])
        feature = feats[0]
        if feature.kind is FeatureKind.POSITION_2D:
            row[list(feature.columns)] = plane.reflect_point(row[list(feature.columns)])
        elif feature.kind is FeatureKind.POSITION_3D:
            cols = list(feature.columns)
            row[cols[:2]] = plane.reflect_point(row[cols[:2]])
        elif feature.kind is FeatureKind.ROTATION:
            col = feature.columns[0]
            row[col] = plane.reflect_angle(row[col])
        values.append(row)
        scene.append(plane.reflect_point(scenario.scene_positions[src]))
        reflection_of.append(src)

    layout = FeatureLayout(tuple(features), scenario.layout.n_columns)
    initial = WorldSnapshot(0, np.stack(values), layout.mask, layout.kinds)

    signals = []
    for q in range(1, scenario.truth.effects.n_signals + 1):
        expanded = list(scenario.truth.effects.for_signal(q))
        for e in scenario.truth.effects.for_signal(q):
            twin = reflection_id.get(e.object_index)
            if twin is None:
                continue
            feature = scenario.layout.features[e.object_index][e.feature_index]
            comp = np.asarray(e.components)
            if feature.kind is FeatureKind.POSITION_2D:
                comp = plane.reflect_direction(comp)
            elif feature.kind is FeatureKind.POSITION_3D:
                comp = np.concatenate([plane.reflect_direction(comp[:2]), comp[2:]])
            elif feature.kind is FeatureKind.ROTATION:
                comp = -comp
            expanded.append(Effect(twin, e.feature_index, e.columns, tuple(comp)))
        signals.append(tuple(expanded))
    effects = EffectTable(tuple(signals))

    body = set(scenario.truth.body_set)
    body.update(reflection_id[b] for b in scenario.truth.body_set if b in reflection_id)
    truth = GroundTruth(frozenset(body), effects)

    agent_ids = list(scenario.other_agents.object_ids)
    cycle_rows = [scenario.other_agents.cycle[i] for i in range(len(agent_ids))]
    for i, src in enumerate(scenario.other_agents.object_ids):
        twin = reflection_id.get(src)
        if twin is None:
            continue
        feats = scenario.layout.features[src]
        row = np.array(scenario.other_agents.cycle[i])
        feature = feats[0]
        if feature.kind is FeatureKind.POSITION_2D:
            cols = list(feature.columns)
            row[:, cols] = np.array([plane.reflect_direction(r) for r in row[:, cols]])
        elif feature.kind is FeatureKind.POSITION_3D:
            cols = list(feature.columns[:2])
            row[:, cols] = np.array([plane.reflect_direction(r) for r in row[:, cols]])
        elif feature.kind is FeatureKind.ROTATION:
            row = -row
        agent_ids.append(twin)
        cycle_rows.append(row)
    cycle = np.stack(cycle_rows) if agent_ids else np.zeros((0, 4, layout.n_columns))
    agents = OtherAgentSet(tuple(agent_ids), cycle)

    return Scenario(
        config=cfg,
        layout=layout,
        initial=initial,
        truth=truth,
        other_agents=agents,
        mirror=plane,
        scene_positions=np.stack(scene),
        sensing_ref=_sensing_ref(layout, cfg.arena),
        reflection_of=tuple(reflection_of),
    )


def scenario_to_json(scenario: Scenario) -> dict:
    """Serialize a scenario for replay and cross-run fixtures."""
    return {
        "config": scenario.config.to_json(),
        "layout": [
            [
                {"kind": f.kind.value, "columns": list(f.columns), "levels": f.levels}
                for f in feats
            ]
            for feats in scenario.layout.features
        ],
        "n_columns": scenario.layout.n_columns,
        "initial": scenario.initial.to_json(),
        "body": sorted(scenario.truth.body_set),
        "effects": [
            [
                {
                    "object": e.object_index,
                    "feature": e.feature_index,
                    "columns": list(e.columns),
                    "components": list(e.components),
                }
                for e in scenario.truth.effects.for_signal(q)
            ]
            for q in range(1, scenario.truth.effects.n_signals + 1)
        ],
        "other_agents": {
            "object_ids": list(scenario.other_agents.object_ids),
            "cycle": scenario.other_agents.cycle.tolist(),
        },
        "mirror": None
        if scenario.mirror is None
        else {"point": list(scenario.mirror.point), "normal": list(scenario.mirror.normal)},
        "scene_positions": scenario.scene_positions.tolist(),
        "reflection_of": list(scenario.reflection_of),
    }


def scenario_from_json(payload: dict) -> Scenario:
    cfg = TaskConfig.from_json(payload["config"])
    features = tuple(
        tuple(
            ObjectFeature(FeatureKind(f["kind"]), tuple(f["columns"]), f["levels"])
            for f in feats
        )
        for feats in payload["layout"]
    )
    layout = FeatureLayout(features, payload["n_columns"])
    initial = WorldSnapshot.from_json(payload["initial"], layout.kinds)
    effects = EffectTable(
        tuple(
            tuple(
                Effect(e["object"], e["feature"], tuple(e["columns"]), tuple(e["components"]))
                for e in per_signal
            )
            for per_signal in payload["effects"]
        )
    )
    truth = GroundTruth(frozenset(payload["body"]), effects)
    agents = OtherAgentSet(
        tuple(payload["other_agents"]["object_ids"]),
        np.array(payload["other_agents"]["cycle"]).reshape(-1, 4, layout.n_columns),
    )
    mirror = payload["mirror"]
    return Scenario(
        config=cfg,
        layout=layout,
        initial=initial,
        truth=truth,
        other_agents=agents,
        mirror=None if mirror is None else MirrorPlane(tuple(mirror["point"]), tuple(mirror["normal"])),
        scene_positions=np.array(payload["scene_positions"]),
        sensing_ref=_sensing_ref(layout, cfg.arena),
        reflection_of=tuple(payload["reflection_of"]),
    )


def dump_scenario(scenario: Scenario, path) -> None:
    with open(path, "w") as fh:
        json.dump(scenario_to_json(scenario), fh)


def load_scenario(path) -> Scenario:
    with open(path) as fh:
        return scenario_from_json(json.load(fh))
