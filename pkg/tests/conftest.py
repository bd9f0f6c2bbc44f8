"""Shared generators for randomized checks over small object universes."""

from __future__ import annotations

import random

import pytest

from got import DELETED, MODIFIED, NEW, Diff, ObjectDelta, ObjectState, State

N_TYPES = 3
N_PKEYS = 5
N_DIMS = 4
TYPE_NAMES = [f"T{i}" for i in range(N_TYPES)]
DIM_NAMES = [f"d{i}" for i in range(N_DIMS)]


def full_dims(rng: random.Random, pkey: int) -> dict:
    dims = {"k": pkey}
    for d in DIM_NAMES:
        dims[d] = rng.randint(0, 9)
    return dims


def random_state(rng: random.Random, density: float = 0.5) -> State:
    objects = []
    for t in TYPE_NAMES:
        for p in range(N_PKEYS):
            if rng.random() < density:
                objects.append(ObjectState(t, p, full_dims(rng, p)))
    return State(objects)


def random_diff(rng: random.Random, state: State, p_touch: float = 0.4) -> Diff:
    """A diff valid against ``state`` under strict application."""
    entries = {}
    for t in TYPE_NAMES:
        for p in range(N_PKEYS):
            if rng.random() > p_touch:
                continue
            key = (t, p)
            if state.contains(t, p):
                if rng.random() < 0.7:
                    changed = {}
                    for _ in range(rng.randint(1, 2)):
                        changed[rng.choice(DIM_NAMES)] = rng.randint(0, 9)
                    entries[key] = ObjectDelta(MODIFIED, changed)
                else:
                    entries[key] = ObjectDelta(DELETED)
            elif rng.random() < 0.6:
                entries[key] = ObjectDelta(NEW, full_dims(rng, p))
    return Diff(entries)


@pytest.fixture
def rng() -> random.Random:
    return random.Random(0xC0FFEE)
