"""Randomized experiment allocation and constrained permutation generation.

All functions are pure given an injected numpy Generator, so callers can
hand independent streams to parallel workers and keep runs reproducible.
"""

from __future__ import annotations

import math
from itertools import combinations
from typing import Sequence

import numpy as np

from .model import ActionSequence

ENUMERATION_CAP = 1_000_000


class EnumerationCapExceeded(ValueError):
    """The constrained permutation set is too large to enumerate."""


def balanced_counts(n_stages: int, n_signals: int) -> tuple[int, ...]:
    """Equal per-action counts, remainder assigned to the control arm."""
    if n_signals < 1:
        raise ValueError("need at least one signal")
    base = n_stages // (n_signals + 1)
    if base < 1:
        raise ValueError(f"{n_stages} stages cannot cover {n_signals + 1} action classes")
    counts = [base] * (n_signals + 1)
    counts[0] += n_stages - base * (n_signals + 1)
    return tuple(counts)


def randomize_allocation(
    n_stages: int, counts: Sequence[int], rng: np.random.Generator
) -> ActionSequence:
    """Uniform draw over all action sequences with the given multiset.

    Each sequence with n_q copies of action q has probability
    prod(n_q!) / T!.
    """
    counts = [int(c) for c in counts]
    if any(c < 1 for c in counts):
        raise ValueError(f"every action needs at least one stage, got counts {counts}")
    if sum(counts) != n_stages:
        raise ValueError(f"counts {counts} do not sum to {n_stages} stages")
    pool = np.repeat(np.arange(len(counts), dtype=np.int64), counts)
    rng.shuffle(pool)
    return ActionSequence(pool, n_signals=len(counts) - 1)


def _test_positions(actions: np.ndarray, q: int) -> np.ndarray:
    if q < 1:
        raise ValueError(f"signal index must be >= 1, got {q}")
    positions = np.flatnonzero((actions == 0) | (actions == q))
    if not (actions == q).any():
        raise ValueError(f"action {q} absent from sequence")
    if not (actions == 0).any():
        raise ValueError("control action 0 absent from sequence")
    return positions


def permute_for_test(
    d_obs: ActionSequence, q: int, rng: np.random.Generator
) -> ActionSequence:
    """Reshuffle the 0/q entries of d_obs among their own positions.

    Positions carrying any other action are fixed. The 0/q entries are
    rearranged by a Fisher-Yates shuffle, so every arrangement of the
    0/q multiset is equally likely.
    """
    actions = np.array(d_obs.actions, copy=True)
    positions = _test_positions(actions, q)
    actions[positions] = rng.permutation(actions[positions])
    return ActionSequence(actions, d_obs.n_signals)


def count_permutations(d_obs: ActionSequence, q: int) -> int:
    """Number of distinct constrained permutations for testing signal q."""
    n_q = d_obs.count_of(q)
    n_0 = d_obs.count_of(0)
    return math.comb(n_q + n_0, n_q)


def enumerate_permutations(
    d_obs: ActionSequence, q: int, cap: int = ENUMERATION_CAP
) -> list[ActionSequence]:
    """All distinct constrained permutations, without duplicates.

    Raises EnumerationCapExceeded when there are more than ``cap`` of
    them; the caller should fall back to Monte Carlo sampling.
    """
    actions = np.asarray(d_obs.actions)
    positions = _test_positions(actions, q)
    n_q = d_obs.count_of(q)
    total = count_permutations(d_obs, q)
    if total > cap:
        raise EnumerationCapExceeded(
            f"{total} constrained permutations exceed the cap of {cap}"
        )
    out = []
    for chosen in combinations(range(positions.size), n_q):
        arranged = np.array(actions, copy=True)
        arranged[positions] = 0
        arranged[positions[list(chosen)]] = q
        out.append(ActionSequence(arranged, d_obs.n_signals))
    return out
