"""Shared helpers for the test suite."""

from __future__ import annotations

import itertools

import numpy as np

import walkfactor as wf


def random_meta(rng, r: int) -> np.ndarray:
    """Random dense row-stochastic r-by-r matrix with entries bounded away from 0."""
    meta = rng.uniform(0.2, 1.0, size=(r, r))
    return meta / meta.sum(axis=1, keepdims=True)


def random_blocks(rng, m: int, r: int) -> tuple:
    """Random partition of 0..m-1 into r nonempty blocks."""
    while True:
        labels = rng.integers(r, size=m)
        if len(np.unique(labels)) == r:
            break
    return tuple(np.nonzero(labels == c)[0] for c in range(r))


def random_lumpable(rng, m: int, r: int) -> tuple:
    """Random exactly lumpable instance: (spec, transition matrix)."""
    spec = wf.LumpableSpec(r, random_blocks(rng, m, r), random_meta(rng, r))
    p = wf.make_lumpable_chain(spec, rng)
    return spec, p


def labels_of_blocks(blocks, m: int) -> np.ndarray:
    labels = np.full(m, -1, dtype=np.int64)
    for c, block in enumerate(blocks):
        labels[np.asarray(block)] = c
    return labels


def brute_force_agreement(a: np.ndarray, b: np.ndarray, r: int) -> float:
    """Agreement maximized over all label permutations, for small r."""
    best = 0
    for perm in itertools.permutations(range(r)):
        relabeled = np.array([perm[c] for c in b])
        best = max(best, int((a == relabeled).sum()))
    return best / a.shape[0]


def random_orthonormal(rng, n: int, r: int) -> np.ndarray:
    q, rr = np.linalg.qr(rng.standard_normal((n, r)))
    return q * np.sign(np.diag(rr))[None, :]
