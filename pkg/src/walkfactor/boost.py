"""Confidence boosting for the streaming factorizer.

A single run converges in expectation but individual runs take excursions, so
the plain estimate only lands near the target subspace with constant
probability. Boosting runs the factorizer on k disjoint contiguous segments
of the block-sample stream, maps each estimate to its orthogonal projector,
takes the geometric median of the projectors, and returns the run whose
projector is closest to that median. Around half the runs land near the
target, the median then lands near it too, and the selected run inherits the
guarantee with probability 1 - delta for k on the order of log(1/delta).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .factorize import FactorizerState, embedding, init_state, run
from .rng import make_rng, trial_rng


@dataclass(frozen=True)
class BoostReport:
    """Bookkeeping from a boosted run: which trial won and by how much."""

    k: int
    segment_length: int
    chosen: int
    distances: np.ndarray
    state: FactorizerState


def geometric_median(points: np.ndarray, tol: float = 1e-9,
                     max_iter: int = 10**4) -> np.ndarray:
    """Geometric median of row vectors by damped Weiszfeld iteration.

    Starts at the mean and handles iterates that land exactly on a data point
    (where the plain Weiszfeld weights blow up) by the standard on-point
    correction: the point's pull is compared against the combined pull of the
    rest, and iteration stops when the point itself is the median.
    """
    points = np.asarray(points, dtype=float)
    if points.ndim != 2 or points.shape[0] == 0:
        raise ValueError("need a nonempty 2-d array of points")
    x = points.mean(axis=0)
    step = np.inf
    for _ in range(max_iter):
        dists = np.linalg.norm(points - x[None, :], axis=1)
        on = dists < 1e-12
        if on.any():
            off = ~on
            if not off.any():
                return x
            pull = ((points[off] - x[None, :]) / dists[off, None]).sum(axis=0)
            pull_norm = float(np.linalg.norm(pull))
            n_on = float(on.sum())
            if pull_norm <= n_on:
                return x
            inv = 1.0 / dists[off]
            plain = (points[off] * inv[:, None]).sum(axis=0) / inv.sum()
            gamma = min(1.0, n_on / pull_norm)
            x_new = (1.0 - gamma) * plain + gamma * x
        else:
            inv = 1.0 / dists
            x_new = (points * inv[:, None]).sum(axis=0) / inv.sum()
        step = float(np.linalg.norm(x_new - x))
        x = x_new
        if step <= tol * max(1.0, float(np.linalg.norm(x))):
            return x
    raise RuntimeError(
        f"geometric median did not converge in {max_iter} iterations; "
        f"last step had size {step:.3e}"
    )


def select_estimate(points: np.ndarray, median: np.ndarray) -> int:
    """Index of the point closest to the median; ties go to the lowest index."""
    points = np.asarray(points, dtype=float)
    dists = np.linalg.norm(points - np.asarray(median, float)[None, :], axis=1)
    return int(dists.argmin())


def boost_count(delta: float) -> int:
    """Number of segments needed for failure probability delta: ceil(24 ln(1/delta))."""
    if not (0.0 < delta < 1.0):
        raise ValueError(f"delta must lie in (0, 1), got {delta}")
    return max(math.ceil(24.0 * math.log(1.0 / delta)), 1)


def boosted_factorize(
    pairs: np.ndarray,
    m: int,
    r: int,
    eta,
    k: int,
    seed,
    reorth_period: int | None = None,
) -> tuple:
    """Run the factorizer on k contiguous segments and keep the central run.

    pairs is an (n, 2) array of block samples; each segment gets n // k of
    them in order, and a trailing remainder is dropped. Estimates are compared
    through their projectors w w^T in Frobenius distance; the returned
    embedding comes from the run closest to the geometric median of the
    projectors. With k = 1 this is exactly a single run with the given seed.
    """
    pairs = np.asarray(pairs, dtype=np.int64)
    if k < 1:
        raise ValueError(f"segment count k={k} must be at least 1")
    n = pairs.shape[0]
    seg = n // k
    if seg < 1:
        raise ValueError(
            f"stream too short to boost: k={k} segments need at least {k} "
            f"block samples, got {n}"
        )
    states: list = []
    flats = np.empty((k, (2 * m) * (2 * m)))
    for t in range(k):
        rng = make_rng(seed) if k == 1 else trial_rng(seed, t)
        state = init_state(m, r, rng, eta)
        final, _ = run(pairs[t * seg : (t + 1) * seg], state,
                       reorth_period=reorth_period)
        states.append(final)
        w = final.w
        flats[t] = (w @ w.T).ravel()
    median = geometric_median(flats)
    chosen = select_estimate(flats, median)
    distances = np.linalg.norm(flats - median[None, :], axis=1)
    report = BoostReport(k=k, segment_length=seg, chosen=chosen,
                         distances=distances, state=states[chosen])
    return embedding(states[chosen]), report
