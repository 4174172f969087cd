"""Advance the world one stage per action, with four noise channels.

Channel semantics (intensities for drift and other-agent noise are
ratios against the configured mean per-firing effect magnitude):

* environmental drift: zero-mean uniform perturbation of every
  continuous cell, random level flips on discrete cells,
* other agents: the same kind of perturbation restricted to a fixed set
  of designated non-body objects, either random or on a deterministic
  period-4 cycle,
* action failure: with the given probability a whole firing does
  nothing that stage,
* sensing flaw: the observer reads a corrupted copy of the world; the
  true state is untouched.

Discrete (counter) cells clamp to [0, cap] where the per-cell cap comes
from the feature layout (0 = unbounded). A switch-on on a fully-on
light, like a switch-off on a dark one, leaves the level unchanged.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import TYPE_CHECKING

import numpy as np

from .model import CellKind, WorldSnapshot

if TYPE_CHECKING:  # pragma: no cover
    from .scenario import EffectTable, OtherAgentSet

N2_PATTERNS = ("random", "periodic")

# Discrete cells flip with probability DISCRETE_FLIP_RATE * intensity
# (capped at 1). A level flip is a whole effect-sized jump, so the
# coefficient keeps the discrete noise-to-effect ratio in the same
# regime as the continuous channel at equal intensity.
DISCRETE_FLIP_RATE = 0.2


@dataclass(frozen=True)
class NoiseConfig:
    n1_intensity: float = 0.0
    n2_intensity: float = 0.0
    n2_pattern: str = "random"
    n3_failure_prob: float = 0.0
    n4_sensing_error: float = 0.0

    def __post_init__(self):
        if self.n1_intensity < 0 or self.n2_intensity < 0 or self.n4_sensing_error < 0:
            raise ValueError("noise intensities must be nonnegative")
        if not 0.0 <= self.n3_failure_prob <= 1.0:
            raise ValueError("action failure probability must lie in [0, 1]")
        if self.n2_pattern not in N2_PATTERNS:
            raise ValueError(f"unknown other-agent pattern {self.n2_pattern!r}")


def _continuous_cells(world: WorldSnapshot) -> np.ndarray:
    return world.mask & ((world.kinds == CellKind.ANGLE) | (world.kinds == CellKind.LINEAR))


def _discrete_cells(world: WorldSnapshot) -> np.ndarray:
    return world.mask & (world.kinds == CellKind.COUNTER)


def _caps_grid(world: WorldSnapshot, level_caps: np.ndarray | None) -> np.ndarray:
    if level_caps is None:
        return np.zeros(world.values.shape, dtype=np.int16)
    return np.asarray(level_caps)


def _clamp_level(value: float, cap: int) -> float:
    value = max(value, 0.0)
    if cap > 0:
        value = min(value, float(cap))
    return value


def _apply_effect_entries(values, kinds, caps, entries) -> None:
    for e in entries:
        for col, comp in zip(e.columns, e.components):
            v = values[e.object_index, col] + comp
            if kinds[e.object_index, col] == CellKind.COUNTER:
                v = _clamp_level(v, int(caps[e.object_index, col]))
            values[e.object_index, col] = v


def step(
    world: WorldSnapshot,
    action: int,
    effects: "EffectTable",
    noise: NoiseConfig,
    rng: np.random.Generator,
    other_agents: "OtherAgentSet | None" = None,
    effect_scale: float = 1.0,
    level_caps: np.ndarray | None = None,
) -> WorldSnapshot:
    """Produce the next stage under one action.

    Fires the signal's effect entries (unless the whole action fails),
    then applies drift and other-agent perturbations. With all noise off
    the produced delta depends on the action alone.
    """
    if not 0 <= action <= effects.n_signals:
        raise ValueError(f"action {action} outside 0..{effects.n_signals}")
    caps = _caps_grid(world, level_caps)
    values = np.array(world.values, copy=True)
    if action >= 1:
        fired = rng.random() >= noise.n3_failure_prob
        if fired:
            _apply_effect_entries(values, world.kinds, caps, effects.for_signal(action))
    out = WorldSnapshot(world.stage_index + 1, values, world.mask, world.kinds)
    out = inject_environment(out, noise.n1_intensity, rng, effect_scale=effect_scale,
                             level_caps=level_caps)
    out = inject_other_agents(
        out, noise.n2_intensity, noise.n2_pattern, rng, other_agents,
        effect_scale=effect_scale, level_caps=level_caps,
    )
    return out


def _flip_levels(values, cells, caps, hit, rng) -> None:
    """Random one-level jumps that bounce off the clamps."""
    if not hit.any():
        return
    current = values[cells]
    cell_caps = caps[cells].astype(np.float64)
    steps = rng.integers(0, 2, size=current.size) * 2.0 - 1.0
    steps = np.where(current <= 0.0, 1.0, steps)
    bounded = cell_caps > 0
    steps = np.where(bounded & (current >= cell_caps), -1.0, steps)
    moved = current + np.where(hit, steps, 0.0)
    moved = np.maximum(moved, 0.0)
    moved = np.where(bounded, np.minimum(moved, cell_caps), moved)
    values[cells] = moved


def _perturb_cells(
    values: np.ndarray,
    world: WorldSnapshot,
    cells: np.ndarray,
    caps: np.ndarray,
    intensity: float,
    rng: np.random.Generator,
    effect_scale: float,
) -> None:
    cont = cells & _continuous_cells(world)
    n_cont = int(np.count_nonzero(cont))
    if n_cont:
        # Uniform on +/-2*intensity*scale has mean |drift| = intensity*scale.
        bound = 2.0 * intensity * effect_scale
        values[cont] += rng.uniform(-bound, bound, size=n_cont)
    disc = cells & _discrete_cells(world)
    n_disc = int(np.count_nonzero(disc))
    if n_disc:
        hit = rng.random(n_disc) < min(1.0, DISCRETE_FLIP_RATE * intensity)
        _flip_levels(values, disc, caps, hit, rng)


def inject_environment(
    world: WorldSnapshot,
    intensity: float,
    rng: np.random.Generator,
    effect_scale: float = 1.0,
    level_caps: np.ndarray | None = None,
) -> WorldSnapshot:
    """Environmental drift on every object (wind, ambient flicker)."""
    if intensity == 0.0:
        return world
    caps = _caps_grid(world, level_caps)
    values = np.array(world.values, copy=True)
    _perturb_cells(values, world, world.mask, caps, intensity, rng, effect_scale)
    return world.replace_values(values)


def inject_other_agents(
    world: WorldSnapshot,
    intensity: float,
    pattern: str,
    rng: np.random.Generator,
    agents: "OtherAgentSet | None",
    effect_scale: float = 1.0,
    level_caps: np.ndarray | None = None,
) -> WorldSnapshot:
    """Perturb the designated other-agent objects only.

    Random mode mirrors environmental drift on those objects; periodic
    mode replays each agent's fixed period-4 delta cycle scaled by
    intensity (continuous cells), with discrete cells stepping forth and
    back on the same cycle.
    """
    if intensity == 0.0 or agents is None or not agents.object_ids:
        return world
    if pattern not in N2_PATTERNS:
        raise ValueError(f"unknown other-agent pattern {pattern!r}")
    caps = _caps_grid(world, level_caps)
    values = np.array(world.values, copy=True)
    ids = list(agents.object_ids)
    if pattern == "random":
        cells = np.zeros_like(world.mask)
        cells[ids] = world.mask[ids]
        _perturb_cells(values, world, cells, caps, intensity, rng, effect_scale)
    else:
        phase = world.stage_index % 4
        cont = _continuous_cells(world)
        for i, obj in enumerate(ids):
            row = cont[obj]
            values[obj, row] += intensity * effect_scale * agents.cycle[i, phase, row]
            disc = world.mask[obj] & ~row
            if phase in (0, 2) and disc.any():
                sign = 1.0 if phase == 0 else -1.0
                for col in np.flatnonzero(disc):
                    values[obj, col] = _clamp_level(
                        values[obj, col] + sign, int(caps[obj, col])
                    )
    return world.replace_values(values)


def sense(
    world: WorldSnapshot,
    n4_sensing_error: float,
    rng: np.random.Generator,
    reference: np.ndarray | None = None,
    level_caps: np.ndarray | None = None,
) -> WorldSnapshot:
    """Observed copy of the world with per-cell read corruption.

    Continuous cells are offset by a uniform error proportional to the
    per-cell sensing reference scale; discrete cells are misread by one
    level with probability equal to the error proportion. Corruption is
    freshly resampled on every call and never touches the true world.
    """
    if n4_sensing_error < 0:
        raise ValueError("sensing error must be nonnegative")
    if n4_sensing_error == 0.0:
        return world
    if reference is None:
        reference = np.ones_like(world.values)
    caps = _caps_grid(world, level_caps)
    values = np.array(world.values, copy=True)
    cont = _continuous_cells(world)
    n_cont = int(np.count_nonzero(cont))
    if n_cont:
        values[cont] += n4_sensing_error * reference[cont] * rng.uniform(-1.0, 1.0, size=n_cont)
    disc = _discrete_cells(world)
    n_disc = int(np.count_nonzero(disc))
    if n_disc:
        misread = rng.random(n_disc) < min(1.0, n4_sensing_error)
        _flip_levels(values, disc, caps, misread, rng)
    return world.replace_values(values)
