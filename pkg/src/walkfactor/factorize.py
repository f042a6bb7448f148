"""Streaming factorization of a transition stream by a Hebbian subspace update.

The factorizer never sees the chain's matrix. It watches a single walk,
down-samples it into nearly independent block samples (the last transition of
each length-tau block), lifts each sample into a symmetric two-state dilation,
and applies a generalized Hebbian update to an orthonormal iterate
w of shape (2m, r). The row blocks of w converge to the top left and right
singular subspaces of the scaled transition matrix diag(mu) P, up to the
1/sqrt(2) stacking factor.

Each update touches two rows of w plus two rank-one corrections, so a step
costs O(m r) time regardless of the stream length.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .rng import make_rng

ORTHONORMAL_TOL = 1e-8


@dataclass(frozen=True)
class BlockSample:
    """One down-sampled transition: source state i, destination state j."""

    i: int
    j: int

    def __post_init__(self):
        if self.i < 0 or self.j < 0:
            raise ValueError(f"states must be nonnegative, got ({self.i}, {self.j})")


@dataclass(frozen=True)
class EtaSchedule:
    """Step size eta_k = eta0 / (1 + k / k0); k0 = None means a fixed step."""

    eta0: float
    k0: float | None = None

    def __post_init__(self):
        if not (0.0 < self.eta0 < 1.0):
            raise ValueError(f"eta0 must lie in (0, 1), got {self.eta0}")
        if self.k0 is not None and self.k0 <= 0.0:
            raise ValueError(f"k0 must be positive, got {self.k0}")

    def at(self, k: int) -> float:
        if self.k0 is None:
            return self.eta0
        return self.eta0 / (1.0 + k / self.k0)


@dataclass
class Diagnostics:
    """Running bound ingredients for the orthogonality drift of the iterate."""

    max_g2: float = 0.0

    def drift_bound(self, k: int, eta0: float) -> float:
        return k * eta0**2 * self.max_g2


@dataclass
class FactorizerState:
    """Iterate w of shape (2m, r), update count k, and the step schedule."""

    w: np.ndarray
    k: int
    schedule: EtaSchedule
    diagnostics: Diagnostics | None = None

    @property
    def m(self) -> int:
        return self.w.shape[0] // 2

    @property
    def r(self) -> int:
        return self.w.shape[1]


@dataclass(frozen=True)
class Embedding:
    """Left and right spectral embeddings recovered from a factorizer state."""

    u_hat: np.ndarray
    v_hat: np.ndarray

    @property
    def m(self) -> int:
        return self.u_hat.shape[0]

    @property
    def r(self) -> int:
        return self.u_hat.shape[1]


@dataclass(frozen=True)
class AngleTrace:
    """Squared sine distance to a reference basis, recorded during a run."""

    times: np.ndarray
    values: np.ndarray
    r: int

    def __post_init__(self):
        times = np.asarray(self.times, dtype=np.int64)
        values = np.asarray(self.values, dtype=float)
        if times.shape != values.shape or times.ndim != 1:
            raise ValueError("times and values must be 1-d arrays of equal length")
        if values.size and (values.min() < 0.0 or values.max() > self.r):
            raise ValueError(f"trace values must lie in [0, {self.r}]")
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "values", values)


def _orthonormalize(w: np.ndarray) -> np.ndarray:
    q, r = np.linalg.qr(w)
    signs = np.sign(np.diag(r))
    signs[signs == 0] = 1.0
    return q * signs[None, :]


def init_state(m: int, r: int, seed, eta) -> FactorizerState:
    """Fresh state with a uniformly random orthonormal iterate.

    eta may be a float (fixed step) or an EtaSchedule.
    """
    if m < 1:
        raise ValueError(f"need at least one state, got m={m}")
    if not (1 <= r <= m):
        raise ValueError(f"rank r={r} must lie in 1..m={m}")
    if not isinstance(eta, EtaSchedule):
        eta = EtaSchedule(float(eta))
    rng = make_rng(seed)
    w = _orthonormalize(rng.standard_normal((2 * m, r)))
    return FactorizerState(w=w, k=0, schedule=eta)


def downsample(stream: np.ndarray, tau: int) -> np.ndarray:
    """Final transitions of consecutive length-tau blocks, as an (n, 2) array.

    Block k (1-based) covers stream positions (k-1)*tau .. k*tau - 1 and
    contributes the pair (stream[k*tau - 2], stream[k*tau - 1]). A trailing
    partial block contributes nothing; a stream shorter than tau yields zero
    samples, which is not an error.
    """
    if tau < 2:
        raise ValueError(f"block length must be at least 2, got {tau}")
    stream = np.asarray(stream, dtype=np.int64)
    n_blocks = stream.size // tau
    if n_blocks == 0:
        return np.empty((0, 2), dtype=np.int64)
    ends = np.arange(1, n_blocks + 1, dtype=np.int64) * tau
    return np.stack([stream[ends - 2], stream[ends - 1]], axis=1)


def _apply_step(w: np.ndarray, i: int, mj: int, eta: float) -> None:
    """One in-place Hebbian update for the dilation of the sample (i, j).

    With A = e_i e_mj^T + e_mj e_i^T, this computes
    w + eta * (A w - w (w^T A w)) touching only two rows and two rank-one
    terms.
    """
    wi = w[i].copy()
    wj = w[mj].copy()
    a = w @ wi
    b = w @ wj
    w[i] += eta * wj
    w[mj] += eta * wi
    w -= eta * (np.outer(a, wj) + np.outer(b, wi))


def _sample_ij(sample) -> tuple:
    if isinstance(sample, BlockSample):
        return sample.i, sample.j
    i, j = sample
    return int(i), int(j)


def gha_step(state: FactorizerState, sample, eta: float | None = None) -> FactorizerState:
    """Apply one update for a single block sample; returns a new state.

    The default step size comes from the state's schedule at the current
    update count. The arithmetic is identical, operation for operation, to the
    inner loop of run, so stepping a state sample by sample reproduces a run
    bit for bit.
    """
    i, j = _sample_ij(sample)
    m = state.m
    if not (0 <= i < m and 0 <= j < m):
        raise ValueError(f"sample ({i}, {j}) outside state range 0..{m - 1}")
    if eta is None:
        eta = state.schedule.at(state.k)
    w = state.w.copy()
    _apply_step(w, i, m + j, eta)
    return FactorizerState(w=w, k=state.k + 1, schedule=state.schedule,
                           diagnostics=state.diagnostics)


def sin_theta(a: np.ndarray, b: np.ndarray) -> float:
    """Total squared sine of the principal angles between two column spans.

    Both inputs must have orthonormal columns; the result lies in
    [0, min(rank_a, rank_b)], with 0 for identical spans.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    for name, x in (("first", a), ("second", b)):
        dev = np.linalg.norm(x.T @ x - np.eye(x.shape[1]))
        if dev > ORTHONORMAL_TOL:
            raise ValueError(
                f"{name} basis is not orthonormal: ||x^T x - I||_F = {dev:.3e} "
                f"exceeds {ORTHONORMAL_TOL}"
            )
    cos = np.clip(np.linalg.svd(a.T @ b, compute_uv=False), 0.0, 1.0)
    r = min(a.shape[1], b.shape[1])
    return float(r - (cos**2).sum())


def _gradient_norm2(w: np.ndarray, i: int, mj: int,
                    a: np.ndarray, b: np.ndarray) -> float:
    wi2 = float(a[i])
    wj2 = float(b[mj])
    wij = float(a[mj])
    norm_aw2 = wi2 + wj2
    inner = wi2 * wj2 + wij * wij
    corr2 = (float(a @ a) * wj2 + 2.0 * float(a @ b) * wij + float(b @ b) * wi2)
    return max(norm_aw2 - 4.0 * inner + corr2, 0.0)


def run(
    pairs: np.ndarray,
    state: FactorizerState,
    reference: np.ndarray | None = None,
    trace_stride: int | None = None,
    reorth_period: int | None = None,
    diagnostics: bool = False,
) -> tuple:
    """Consume block samples in order; returns (final state, trace or None).

    pairs is an (n, 2) integer array of block samples, as produced by
    downsample. When a reference basis and a trace stride are given, the
    squared sine distance between the iterate's span and the reference span is
    recorded every trace_stride updates and after the final one (the iterate
    is orthonormalized on a copy before each measurement). reorth_period
    re-orthonormalizes the iterate in place every so many updates.
    diagnostics tracks the largest squared gradient norm and checks the
    orthogonality drift bound k * eta0^2 * max ||G||_F^2 at every trace point.
    """
    pairs = np.asarray(pairs, dtype=np.int64)
    if pairs.ndim != 2 or pairs.shape[1] != 2:
        raise ValueError(f"pairs must have shape (n, 2), got {pairs.shape}")
    m = state.m
    if pairs.size and (pairs.min() < 0 or pairs.max() >= m):
        raise ValueError(f"pairs contain states outside 0..{m - 1}")
    if trace_stride is not None and trace_stride < 1:
        raise ValueError("trace stride must be positive")
    if reorth_period is not None and reorth_period < 1:
        raise ValueError("reorthonormalization period must be positive")

    w = state.w.copy()
    k = state.k
    schedule = state.schedule
    diag = state.diagnostics
    if diagnostics and diag is None:
        diag = Diagnostics()
    tracing = reference is not None and trace_stride is not None
    times: list = []
    values: list = []

    def record() -> None:
        val = sin_theta(_orthonormalize(w), reference)
        times.append(k)
        values.append(val)
        if diag is not None:
            drift = float(np.linalg.norm(w.T @ w - np.eye(w.shape[1])))
            bound = diag.drift_bound(k, schedule.eta0)
            if drift > bound + 1e-12:
                raise RuntimeError(
                    f"orthogonality drift {drift:.3e} exceeds bound {bound:.3e} "
                    f"after {k} updates"
                )

    for i, j in pairs:
        eta = schedule.at(k)
        mj = m + int(j)
        i = int(i)
        if diag is not None:
            a = w @ w[i]
            b = w @ w[mj]
            g2 = _gradient_norm2(w, i, mj, a, b)
            if g2 > diag.max_g2:
                diag.max_g2 = g2
        _apply_step(w, i, mj, eta)
        k += 1
        if reorth_period is not None and (k - state.k) % reorth_period == 0:
            w = _orthonormalize(w)
        if tracing and (k - state.k) % trace_stride == 0:
            record()

    if tracing and (not times or times[-1] != k):
        record()

    final = FactorizerState(w=w, k=k, schedule=schedule, diagnostics=diag)
    trace = AngleTrace(np.array(times, dtype=np.int64),
                       np.array(values), state.r) if tracing else None
    return final, trace


def embedding(state: FactorizerState) -> Embedding:
    """Split the iterate into left and right embeddings, scaled by sqrt(2)."""
    scaled = np.sqrt(2.0) * state.w
    m = state.m
    return Embedding(u_hat=scaled[:m], v_hat=scaled[m:])


def orthogonality_drift(state: FactorizerState) -> float:
    """Frobenius distance of w^T w from the identity."""
    return float(np.linalg.norm(state.w.T @ state.w - np.eye(state.r)))


def factorize_stream(
    stream: np.ndarray,
    m: int,
    r: int,
    eta,
    tau: int,
    seed,
    **run_options,
) -> tuple:
    """Down-sample a raw walk and run the factorizer on it end to end."""
    pairs = downsample(stream, tau)
    state = init_state(m, r, seed, eta)
    return run(pairs, state, **run_options)


def convergence_rate_fit(trace: AngleTrace) -> tuple:
    """Fit an exponential decay rate and plateau to an angle trace.

    The plateau is the geometric mean of the last quarter of the trace. The
    decay phase is the initial run of points whose excess over the plateau
    stays above half the plateau; the rate is the least-squares slope of
    log(value - plateau) over that run. Returns (rate, plateau) with rate
    positive for a decaying trace. Raises if the trace never leaves its
    plateau, starts below four times the plateau, or the decay phase has
    fewer than 10 points.
    """
    vals = np.asarray(trace.values, dtype=float)
    times = np.asarray(trace.times, dtype=float)
    if vals.size < 8:
        raise ValueError(f"trace has only {vals.size} points; need at least 8")
    if vals.min() <= 0.0:
        raise ValueError("trace values must be positive to fit a decay rate")
    tail = vals[3 * vals.size // 4 :]
    plateau = float(np.exp(np.log(tail).mean()))
    excess = vals - plateau
    above = excess > 0.5 * plateau
    stop = int(np.argmin(above)) if not above.all() else vals.size
    if stop < 10 or vals[0] < 4.0 * plateau:
        raise ValueError("no decay phase detected")
    coeffs = np.polyfit(times[:stop], np.log(excess[:stop]), 1)
    return float(-coeffs[0]), plateau
