"""Markov chains: validation, stationary analysis, conductance, and simulation.

This module owns the chain-side objects the rest of the package builds on:

* ``TransitionMatrix`` / ``StationaryDistribution`` with their defining
  invariants (row-stochasticity, positivity, stationarity residual),
* the merging conductance and the block length derived from it, which set the
  down-sampling rate of the streaming factorizer,
* random-walk simulation with a counter-based seeded generator,
* a generator for exactly lumpable chains (block-level transitions follow a
  given meta chain exactly), and
* ``fixture_pex``, a 12-state, 3-block worked example used throughout the
  tests and the CLI.

States are 0-based integers everywhere in this API; the 1-based convention of
the text file formats is handled at the storage boundary.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components

from .rng import make_rng

ROW_SUM_TOL = 1e-12
STATIONARY_RESIDUAL_TOL = 1e-10


@dataclass(frozen=True)
class TransitionMatrix:
    """Row-stochastic m-by-m transition matrix."""

    p: np.ndarray

    def __post_init__(self):
        p = np.ascontiguousarray(np.asarray(self.p, dtype=float))
        if p.ndim != 2 or p.shape[0] != p.shape[1]:
            raise ValueError(f"transition matrix must be square, got shape {p.shape}")
        if p.shape[0] < 1:
            raise ValueError("transition matrix must have at least one state")
        if p.min() < 0.0 or p.max() > 1.0:
            raise ValueError("transition probabilities must lie in [0, 1]")
        rows = p.sum(axis=1)
        worst = np.abs(rows - 1.0).max()
        if worst > ROW_SUM_TOL:
            bad = int(np.abs(rows - 1.0).argmax())
            raise ValueError(
                f"row {bad} sums to {rows[bad]!r}, off by {worst:.3e} (tol {ROW_SUM_TOL})"
            )
        object.__setattr__(self, "p", p)

    @property
    def m(self) -> int:
        return self.p.shape[0]


@dataclass(frozen=True)
class StationaryDistribution:
    """Strictly positive probability vector mu with mu^T P = mu^T."""

    mu: np.ndarray

    def __post_init__(self):
        mu = np.ascontiguousarray(np.asarray(self.mu, dtype=float))
        if mu.ndim != 1 or mu.size < 1:
            raise ValueError("stationary distribution must be a nonempty vector")
        if mu.min() <= 0.0:
            raise ValueError("stationary distribution entries must be strictly positive")
        if abs(mu.sum() - 1.0) > ROW_SUM_TOL:
            raise ValueError(f"stationary distribution sums to {mu.sum()!r}, not 1")
        object.__setattr__(self, "mu", mu)

    @property
    def m(self) -> int:
        return self.mu.shape[0]


@dataclass(frozen=True)
class ChainStats:
    """Mixing summary: conductance, stationary extremes, and block length."""

    phi: float
    mu_max: float
    mu_min: float
    tau: int

    def __post_init__(self):
        if not (0.0 < self.phi <= 1.0):
            raise ValueError(f"phi must lie in (0, 1], got {self.phi}")
        if not (self.mu_max >= self.mu_min > 0.0):
            raise ValueError("need mu_max >= mu_min > 0")
        if self.tau < 2:
            raise ValueError(f"block length must be at least 2, got {self.tau}")


@dataclass(frozen=True)
class LumpableSpec:
    """Blueprint for an exactly lumpable chain: r blocks driven by a meta chain."""

    r: int
    blocks: tuple
    meta_p: np.ndarray

    def __post_init__(self):
        blocks = tuple(np.asarray(b, dtype=np.int64) for b in self.blocks)
        meta = np.ascontiguousarray(np.asarray(self.meta_p, dtype=float))
        if self.r != len(blocks):
            raise ValueError(f"r={self.r} but {len(blocks)} blocks given")
        if meta.shape != (self.r, self.r):
            raise ValueError(f"meta matrix shape {meta.shape} does not match r={self.r}")
        if meta.min() < 0.0 or np.abs(meta.sum(axis=1) - 1.0).max() > ROW_SUM_TOL:
            raise ValueError("meta matrix must be row-stochastic")
        flat = np.concatenate([b for b in blocks]) if blocks else np.array([], dtype=np.int64)
        m = flat.size
        if m == 0 or not np.array_equal(np.sort(flat), np.arange(m)):
            raise ValueError("blocks must partition the state set 0..m-1 without overlap")
        object.__setattr__(self, "blocks", blocks)
        object.__setattr__(self, "meta_p", meta)

    @property
    def m(self) -> int:
        return sum(b.size for b in self.blocks)


def _as_mu(mu) -> np.ndarray:
    if isinstance(mu, StationaryDistribution):
        return mu.mu
    return np.asarray(mu, dtype=float)


def assert_irreducible(p: TransitionMatrix) -> None:
    """Raise if the support graph of p is not strongly connected."""
    support = sp.csr_matrix(p.p > 0.0)
    n_comp, labels = connected_components(support, directed=True, connection="strong")
    if n_comp > 1:
        other = int(np.nonzero(labels != labels[0])[0][0])
        raise ValueError(
            f"chain is not irreducible: states 0 and {other} are not mutually reachable"
        )


def stationary_distribution(
    p: TransitionMatrix, tol: float = 1e-13, max_iter: int = 10**6
) -> StationaryDistribution:
    """Stationary distribution of an irreducible chain by power iteration.

    Iterates x <- x (P + I)/2, which preserves the stationary vector exactly
    and converges even for periodic chains. The result is checked against the
    original P at the stationarity residual tolerance.
    """
    assert_irreducible(p)
    m = p.m
    half = 0.5 * (p.p + np.eye(m))
    x = np.full(m, 1.0 / m)
    for _ in range(max_iter):
        x_next = x @ half
        x_next /= x_next.sum()
        if np.abs(x_next - x).sum() <= tol:
            x = x_next
            break
        x = x_next
    else:
        raise RuntimeError(f"power iteration did not converge within {max_iter} iterations")
    residual = np.abs(x @ p.p - x).max()
    if residual > STATIONARY_RESIDUAL_TOL:
        raise RuntimeError(f"stationarity residual {residual:.3e} above tolerance")
    return StationaryDistribution(x)


def detailed_balance_residual(p: TransitionMatrix, mu) -> float:
    """Max over state pairs of |mu_i p_ij - mu_j p_ji|; zero iff reversible."""
    mu = _as_mu(mu)
    flow = mu[:, None] * p.p
    return float(np.abs(flow - flow.T).max())


def merging_conductance(p: TransitionMatrix, mu) -> float:
    """Bottleneck constant of the forward-backward two-step chain.

    The edge weight between states j and l is sum_i mu_j p_ji * mu_l p_li / mu_i
    (mass that two walkers started from j and l meet in one step). The returned
    value is the minimum, over splits with mu(Omega) >= 1/2 (ties admitted), of
    the cross mass divided by mu(Omega): the normalization side is the heavier
    one, which is the convention that reproduces the published worked-example
    value. The minimization is exhaustive over all 2^m splits, so m is capped.
    """
    mu = _as_mu(mu)
    m = p.m
    if m > 24:
        raise ValueError(
            f"exhaustive conductance search is capped at m=24 states (got m={m}); "
            "supply phi explicitly for larger chains"
        )
    if m < 2:
        raise ValueError("conductance needs at least 2 states: no nonempty split exists")
    q = mu[:, None] * p.p
    s = (q / mu[None, :]) @ q.T
    best = np.inf
    all_masks = np.arange(1, 2**m - 1, dtype=np.int64)
    chunk = 1 << 14
    shifts = np.arange(m, dtype=np.int64)
    for start in range(0, all_masks.size, chunk):
        masks = all_masks[start : start + chunk]
        bits = ((masks[:, None] >> shifts[None, :]) & 1).astype(float)
        w = bits @ mu
        heavy = w >= 0.5 - 1e-12
        if not heavy.any():
            continue
        bits = bits[heavy]
        w = w[heavy]
        cross = ((bits @ s) * (1.0 - bits)).sum(axis=1)
        low = float((cross / w).min())
        if low < best:
            best = low
    return best


def block_length(phi: float, mu_max: float, mu_min: float, eta: float) -> int:
    """Down-sampling block length: ceil((2/phi^2) log(sqrt(mu_max/mu_min)/eta)), at least 2."""
    if not (0.0 < phi <= 1.0):
        raise ValueError(f"phi must lie in (0, 1], got {phi}")
    if not (0.0 < eta < 1.0):
        raise ValueError(f"eta must lie in (0, 1), got {eta}")
    if not (mu_max >= mu_min > 0.0):
        raise ValueError("need mu_max >= mu_min > 0")
    tau = math.ceil((2.0 / phi**2) * math.log(math.sqrt(mu_max / mu_min) / eta))
    return max(tau, 2)


def chain_stats(p: TransitionMatrix, mu, eta: float) -> ChainStats:
    """Bundle conductance, stationary extremes, and the implied block length."""
    mu = _as_mu(mu)
    phi = merging_conductance(p, mu)
    mu_max = float(mu.max())
    mu_min = float(mu.min())
    return ChainStats(phi, mu_max, mu_min, block_length(phi, mu_max, mu_min, eta))


def simulate_walk(p: TransitionMatrix, s0: int, n: int, seed) -> np.ndarray:
    """Simulate n steps of the chain from s0; returns the n visited states.

    The start state itself is not included in the output. Deterministic for a
    fixed (p, s0, n, seed).
    """
    if not (0 <= s0 < p.m):
        raise ValueError(f"start state {s0} outside 0..{p.m - 1}")
    if n < 0:
        raise ValueError("step count must be nonnegative")
    assert_irreducible(p)
    rng = make_rng(seed)
    cum = np.cumsum(p.p, axis=1)
    u = rng.random(n)
    out = np.empty(n, dtype=np.int64)
    s = s0
    last = p.m - 1
    for t in range(n):
        s = int(np.searchsorted(cum[s], u[t], side="right"))
        if s > last:
            s = last
        out[t] = s
    return out


def stationary_start(p: TransitionMatrix, mu, seed) -> int:
    """Draw a start state from the stationary distribution."""
    rng = make_rng(seed)
    return int(rng.choice(p.m, p=_as_mu(mu)))


def make_lumpable_chain(spec: LumpableSpec, seed) -> TransitionMatrix:
    """Random chain that is exactly lumpable to spec.meta_p on spec.blocks.

    Every destination state gets one positive uniform(0.5, 1.5) weight, shared
    by all source rows and normalized within its block, so each row's mass
    into block j is exactly meta_p[i, j]. Sharing weights per column (rather
    than drawing per row) keeps the scaled transition matrix exactly rank r,
    which makes the top-r representation rows exactly constant per block.
    """
    rng = make_rng(seed)
    m = spec.m
    weights = rng.uniform(0.5, 1.5, size=m)
    out = np.zeros((m, m))
    for j, block_j in enumerate(spec.blocks):
        if block_j.size == 0:
            if spec.meta_p[:, j].max() > 0.0:
                raise ValueError(
                    f"meta matrix sends mass into block {j}, which contains no states"
                )
            continue
        col = weights[block_j] / weights[block_j].sum()
        for i, block_i in enumerate(spec.blocks):
            if block_i.size:
                out[np.ix_(block_i, block_j)] = spec.meta_p[i, j] * col[None, :]
    return TransitionMatrix(out)


# 12-state worked example ("pex"): three 4-state blocks whose block-level
# transitions follow the meta matrix below. Entries are integer numerators
# over 10000; each row's cross-block mass is split evenly over the 4 states
# of the destination block and its own-block mass over the 3 other states of
# its own block (diagonal 0), with remainders pushed onto the highest state
# index so every row sums to exactly 10000.
_PEX_NUMERATORS = (
    (0, 1344, 463, 808, 463, 1344, 463, 808, 808, 1345, 809, 1345),
    (1615, 0, 1615, 680, 1615, 273, 1616, 680, 680, 273, 680, 273),
    (463, 1344, 0, 808, 463, 1344, 463, 808, 808, 1345, 809, 1345),
    (1470, 1030, 1470, 0, 1470, 1030, 1470, 0, 0, 1030, 0, 1030),
    (463, 1344, 463, 808, 0, 1344, 463, 808, 808, 1345, 809, 1345),
    (1615, 273, 1615, 680, 1615, 0, 1616, 680, 680, 273, 680, 273),
    (463, 1344, 463, 808, 463, 1344, 0, 808, 808, 1345, 809, 1345),
    (1470, 1030, 1470, 0, 1470, 1030, 1470, 0, 0, 1030, 0, 1030),
    (1470, 1030, 1470, 0, 1470, 1030, 1470, 0, 0, 1030, 0, 1030),
    (1615, 273, 1615, 680, 1615, 273, 1616, 680, 680, 0, 680, 273),
    (1470, 1030, 1470, 0, 1470, 1030, 1470, 0, 0, 1030, 0, 1030),
    (1615, 273, 1615, 680, 1615, 273, 1616, 680, 680, 273, 680, 0),
)

_PEX_MU = (
    0.105, 0.0874, 0.105, 0.0577, 0.105, 0.0874,
    0.105, 0.0577, 0.0577, 0.0874, 0.0577, 0.0874,
)

_PEX_META = (
    (0.0, 0.5880, 0.4120),
    (0.3233, 0.1389, 0.5378),
    (0.2720, 0.6461, 0.0819),
)

_PEX_PHI = 0.06

# Meta-state membership (0-based): block 0 holds the low-mass states, block 1
# the high-mass states, block 2 the middle ones, matching the meta matrix rows.
PEX_BLOCKS = (
    np.array([3, 7, 8, 10]),
    np.array([0, 2, 4, 6]),
    np.array([1, 5, 9, 11]),
)


def fixture_pex():
    """The built-in 12-state example chain.

    Returns (transition matrix, published stationary values, meta matrix, phi).
    The stationary values and phi are the rounded published constants for this
    chain, returned as given: the mu vector sums to 1.0004, so callers who
    need a validated StationaryDistribution should run stationary_distribution
    on the transition matrix (the exact vector is within 1e-4 of the rounded
    one).
    """
    p = TransitionMatrix(np.array(_PEX_NUMERATORS, dtype=float) / 10000.0)
    mu = np.array(_PEX_MU)
    meta = np.array(_PEX_META)
    return p, mu, meta, _PEX_PHI
