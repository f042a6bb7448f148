"""Seeded random generators shared across the package.

Every stochastic routine takes an integer seed (or an already-built generator)
and turns it into a counter-based Philox generator, so results are identical
across platforms and so parallel trials can derive independent streams from a
single root seed without coordination.
"""

from __future__ import annotations

import numpy as np

SeedLike = "int | np.random.SeedSequence | np.random.Generator"


def make_rng(seed) -> np.random.Generator:
    """Return a Philox-backed Generator for an int seed or SeedSequence.

    An existing Generator is passed through unchanged so callers can thread
    one generator across several steps of a pipeline.
    """
    if isinstance(seed, np.random.Generator):
        return seed
    if not isinstance(seed, np.random.SeedSequence):
        seed = np.random.SeedSequence(seed)
    return np.random.Generator(np.random.Philox(seed))


def trial_rng(seed: int, trial: int) -> np.random.Generator:
    """Generator for one trial of a multi-trial run.

    Derived through a spawn key, so trial streams are independent and a pool
    of workers can draw them in any order while keeping every trial's output
    a pure function of (seed, trial).
    """
    return np.random.Generator(
        np.random.Philox(np.random.SeedSequence(seed, spawn_key=(trial,)))
    )
