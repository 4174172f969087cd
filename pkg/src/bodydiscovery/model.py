"""World-state types and the per-stage delta algebra.

A world holds N objects, each carrying up to K scalar feature cells.
Multi-axis features (2D/3D positions) are flattened into one cell per
axis so that everything downstream (estimation, testing) operates on
scalars. Each cell carries a behavioural kind that fixes how values are
differenced and accumulated:

* angles wrap at 2*pi and difference via the shortest signed arc,
* linear cells (position axes) difference plainly,
* counter cells are nonnegative integer levels (optionally capped,
  e.g. lights clamp between off and fully on).
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import TYPE_CHECKING, Iterable, Sequence

import numpy as np

if TYPE_CHECKING:  # pragma: no cover
    from .scenario import EffectTable

TWO_PI = 2.0 * np.pi


class StructuralError(ValueError):
    """Raised when snapshots/deltas disagree on shape, stage, or layout."""


class FeatureKind(enum.Enum):
    """The four object-level feature categories."""

    ROTATION = "rotation"
    POSITION_2D = "position2d"
    POSITION_3D = "position3d"
    DISCRETE_STATE = "discrete"

    @property
    def width(self) -> int:
        return {"rotation": 1, "position2d": 2, "position3d": 3, "discrete": 1}[self.value]


class CellKind(enum.IntEnum):
    """Per-cell behaviour code stored in snapshot kind grids.

    COUNTER cells are integer levels, bounded below at 0 and optionally
    above by a per-cell cap that lives in the feature layout.
    """

    ANGLE = 0
    LINEAR = 1
    COUNTER = 2


def _frozen_array(values, dtype) -> np.ndarray:
    arr = np.array(values, dtype=dtype, copy=True)
    arr.setflags(write=False)
    return arr


def wrap_angle(values: np.ndarray) -> np.ndarray:
    """Normalize angles into [0, 2*pi)."""
    return np.mod(values, TWO_PI)


def shortest_angle_diff(a, b):
    """Signed shortest arc from a to b, in (-pi, pi]."""
    d = np.mod(np.asarray(b) - np.asarray(a) + np.pi, TWO_PI) - np.pi
    return np.where(d == -np.pi, np.pi, d)


@dataclass(frozen=True, eq=False)
class WorldSnapshot:
    """All objects' feature values at one stage.

    ``values`` and ``mask`` are (N, K); ``mask`` is True where object n
    actually has cell k. ``kinds`` holds CellKind codes (entries under a
    False mask are ignored). Angle cells are stored normalized to
    [0, 2*pi). Instances are immutable and safe to share across threads.
    """

    stage_index: int
    values: np.ndarray
    mask: np.ndarray
    kinds: np.ndarray

    def __post_init__(self):
        values = np.array(self.values, dtype=np.float64, copy=True)
        mask = _frozen_array(self.mask, bool)
        kinds = _frozen_array(self.kinds, np.int8)
        if values.ndim != 2 or values.shape != mask.shape or values.shape != kinds.shape:
            raise StructuralError(
                f"values/mask/kinds shapes disagree: {values.shape}, {mask.shape}, {kinds.shape}"
            )
        if self.stage_index < 0:
            raise StructuralError(f"stage_index must be >= 0, got {self.stage_index}")
        angle = mask & (kinds == CellKind.ANGLE)
        values[angle] = wrap_angle(values[angle])
        values[~mask] = 0.0
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "mask", mask)
        object.__setattr__(self, "kinds", kinds)

    @property
    def n_objects(self) -> int:
        return self.values.shape[0]

    @property
    def n_columns(self) -> int:
        return self.values.shape[1]

    def replace_values(self, values: np.ndarray, stage_index: int | None = None) -> "WorldSnapshot":
        stage = self.stage_index if stage_index is None else stage_index
        return WorldSnapshot(stage, values, self.mask, self.kinds)

    def to_json(self) -> dict:
        values = [
            [self.values[n, k] if self.mask[n, k] else None for k in range(self.n_columns)]
            for n in range(self.n_objects)
        ]
        return {"stage": self.stage_index, "values": values, "mask": self.mask.tolist()}

    @classmethod
    def from_json(cls, payload: dict, kinds: np.ndarray) -> "WorldSnapshot":
        mask = np.array(payload["mask"], dtype=bool)
        values = np.array(
            [[v if v is not None else 0.0 for v in row] for row in payload["values"]],
            dtype=np.float64,
        )
        return cls(payload["stage"], values, mask, kinds)


@dataclass(frozen=True, eq=False)
class StageDelta:
    """Componentwise change from stage t-1 to stage t (t >= 1)."""

    stage_index: int
    values: np.ndarray
    mask: np.ndarray

    def __post_init__(self):
        values = _frozen_array(self.values, np.float64)
        mask = _frozen_array(self.mask, bool)
        if values.shape != mask.shape or values.ndim != 2:
            raise StructuralError("delta values/mask shapes disagree")
        if self.stage_index < 1:
            raise StructuralError(f"delta stage_index must be >= 1, got {self.stage_index}")
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "mask", mask)

    def to_json(self) -> dict:
        n, k = self.values.shape
        values = [
            [self.values[i, j] if self.mask[i, j] else None for j in range(k)] for i in range(n)
        ]
        return {"stage": self.stage_index, "values": values, "mask": self.mask.tolist()}

    @classmethod
    def from_json(cls, payload: dict) -> "StageDelta":
        mask = np.array(payload["mask"], dtype=bool)
        values = np.array(
            [[v if v is not None else 0.0 for v in row] for row in payload["values"]],
            dtype=np.float64,
        )
        return cls(payload["stage"], values, mask)


@dataclass(frozen=True, eq=False)
class ActionSequence:
    """Length-T vector of per-stage actions in {0..Q}; 0 emits nothing.

    Every action class must occur at least once.
    """

    actions: np.ndarray
    n_signals: int

    def __post_init__(self):
        actions = _frozen_array(self.actions, np.int64)
        if actions.ndim != 1 or actions.size == 0:
            raise ValueError("actions must be a nonempty 1-D vector")
        if self.n_signals < 0:
            raise ValueError("signal count cannot be negative")
        if actions.min() < 0 or actions.max() > self.n_signals:
            raise ValueError(
                f"actions must lie in 0..{self.n_signals}, got range "
                f"[{actions.min()}, {actions.max()}]"
            )
        counts = np.bincount(actions, minlength=self.n_signals + 1)
        if (counts == 0).any():
            missing = [int(q) for q in np.flatnonzero(counts == 0)]
            raise ValueError(f"every action must appear at least once; missing {missing}")
        object.__setattr__(self, "actions", actions)

    @property
    def n_stages(self) -> int:
        return int(self.actions.size)

    @property
    def counts(self) -> tuple[int, ...]:
        return tuple(int(c) for c in np.bincount(self.actions, minlength=self.n_signals + 1))

    def count_of(self, q: int) -> int:
        return int(np.count_nonzero(self.actions == q))


@dataclass(frozen=True)
class GroundTruth:
    """The hidden answer for one round: which objects the signals control.

    ``body_set`` is exactly the set of objects referenced by ``effects``;
    it is never exposed to the inference side.
    """

    body_set: frozenset[int]
    effects: "EffectTable"

    def __post_init__(self):
        object.__setattr__(self, "body_set", frozenset(self.body_set))
        referenced = {e.object_index for entries in self.effects.signals for e in entries}
        if not referenced <= self.body_set:
            raise ValueError("effects reference objects outside the body set")


def stage_delta(prev: WorldSnapshot, next: WorldSnapshot) -> StageDelta:
    """Componentwise change between two consecutive snapshots.

    Angle cells difference via the shortest signed arc; all other kinds
    difference plainly (counter/binary deltas come out as signed
    integers stored in floats).
    """
    if next.stage_index != prev.stage_index + 1:
        raise StructuralError(
            f"snapshots not consecutive: {prev.stage_index} -> {next.stage_index}"
        )
    if prev.values.shape != next.values.shape:
        raise StructuralError("snapshot shapes disagree")
    if not np.array_equal(prev.mask, next.mask) or not np.array_equal(prev.kinds, next.kinds):
        raise StructuralError("snapshot layouts (mask/kinds) disagree")
    delta = next.values - prev.values
    angle = prev.mask & (prev.kinds == CellKind.ANGLE)
    delta = np.where(angle, shortest_angle_diff(prev.values, next.values), delta)
    delta[~prev.mask] = 0.0
    return StageDelta(next.stage_index, delta, prev.mask)


def accumulate(deltas: Sequence[StageDelta] | Iterable[StageDelta], s0: WorldSnapshot) -> WorldSnapshot:
    """Apply consecutive deltas to s0; inverse of stage_delta.

    Angle cells re-wrap into [0, 2*pi) after each addition.
    """
    values = np.array(s0.values, copy=True)
    stage = s0.stage_index
    angle = s0.mask & (s0.kinds == CellKind.ANGLE)
    for d in deltas:
        if d.stage_index != stage + 1:
            raise StructuralError(f"delta stages not consecutive: {stage} -> {d.stage_index}")
        if d.values.shape != values.shape:
            raise StructuralError("delta shape disagrees with snapshot")
        values += d.values
        values[angle] = wrap_angle(values[angle])
        stage = d.stage_index
    return WorldSnapshot(stage, values, s0.mask, s0.kinds)


def stack_deltas(deltas: Sequence[StageDelta]) -> np.ndarray:
    """Stack StageDeltas into a (T, N, K) array ordered by stage."""
    if not deltas:
        raise ValueError("no deltas to stack")
    ordered = sorted(deltas, key=lambda d: d.stage_index)
    return np.stack([d.values for d in ordered], axis=0)
