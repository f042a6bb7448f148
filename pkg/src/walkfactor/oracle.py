"""Batch reference factorization used to cross-check the streaming path.

Everything here assumes the whole transition stream (or the exact chain) is
available up front: count a scaled transition matrix, take its exact SVD, and
expose the quantities the streaming factorizer is supposed to approach. The
functions are deliberately small wrappers over dense linear algebra so that
tests can treat them as ground truth.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

DEGENERATE_GAP_TOL = 1e-12


@dataclass(frozen=True)
class SpectralFactorization:
    """Rank-r truncated SVD of a scaled transition matrix, plus its spectral gap."""

    u: np.ndarray
    sigma: np.ndarray
    v: np.ndarray
    gap: float

    @property
    def r(self) -> int:
        return self.u.shape[1]


def empirical_dp(stream: np.ndarray, m: int) -> np.ndarray:
    """Scaled transition matrix estimated from a walk: pair counts over n - 1.

    Entry (i, j) is the fraction of consecutive positions t with s_t = i and
    s_{t+1} = j; with a stationary start this estimates diag(mu) P.
    """
    stream = np.asarray(stream, dtype=np.int64)
    if stream.ndim != 1 or stream.size < 2:
        raise ValueError("need a stream of at least 2 states to count a transition")
    if stream.min() < 0 or stream.max() >= m:
        raise ValueError(f"stream contains states outside 0..{m - 1}")
    flat = stream[:-1] * m + stream[1:]
    counts = np.bincount(flat, minlength=m * m).reshape(m, m)
    return counts / float(stream.size - 1)


def batch_factorize(dp: np.ndarray, r: int) -> SpectralFactorization:
    """Exact rank-r SVD of dp, warning when the retained gap is degenerate."""
    dp = np.asarray(dp, dtype=float)
    if dp.ndim != 2 or dp.shape[0] != dp.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {dp.shape}")
    m = dp.shape[0]
    if not (1 <= r <= m):
        raise ValueError(f"rank r={r} outside 1..{m}")
    u, s, vt = np.linalg.svd(dp)
    tail = s[r] if r < m else 0.0
    gap = float(s[r - 1] - tail)
    if gap < DEGENERATE_GAP_TOL:
        warnings.warn(
            f"singular value gap sigma_{r} - sigma_{r + 1} = {gap:.3e} is degenerate; "
            "the rank-r factors are not uniquely determined",
            RuntimeWarning,
            stacklevel=2,
        )
    return SpectralFactorization(u[:, :r].copy(), s[:r].copy(), vt[:r].T.copy(), gap)


def dilation(z: np.ndarray) -> np.ndarray:
    """Symmetric dilation [[0, z], [z^T, 0]] of a square matrix."""
    z = np.asarray(z, dtype=float)
    m = z.shape[0]
    out = np.zeros((2 * m, 2 * m))
    out[:m, m:] = z
    out[m:, :m] = z.T
    return out


def dilation_eigenbasis(dp: np.ndarray, r: int) -> np.ndarray:
    """Top-r eigenbasis of the dilation of dp, as stacked [u; v] / sqrt(2).

    The top-r eigenvectors of [[0, dp], [dp^T, 0]] are exactly the stacked
    singular vector pairs, so this is the target the streaming factorizer
    converges to.
    """
    f = batch_factorize(dp, r)
    return np.vstack([f.u, f.v]) / np.sqrt(2.0)


def objective(w: np.ndarray, a: np.ndarray) -> float:
    """Rayleigh objective tr(w^T a w) maximized by the top eigenbasis of a."""
    return float(np.trace(w.T @ (a @ w)))


def kkt_residual(w: np.ndarray, a: np.ndarray) -> tuple:
    """First-order residuals at w for maximizing tr(w^T a w) over orthonormal w.

    Returns (stationarity, feasibility): the Frobenius norms of
    a w - w (w^T a w) and of w^T w - I. Both vanish exactly at any full set of
    eigenvectors of a.
    """
    aw = a @ w
    stationarity = float(np.linalg.norm(aw - w @ (w.T @ aw)))
    feasibility = float(np.linalg.norm(w.T @ w - np.eye(w.shape[1])))
    return stationarity, feasibility


def lumpability_residual(p: np.ndarray, blocks) -> float:
    """How far p is from being exactly lumpable on the given blocks.

    For each source block and destination block, the row mass sent into the
    destination block must be the same for every source row; the residual is
    the largest spread (max minus min) over all block pairs. Exactly lumpable
    chains give 0 up to rounding.
    """
    p = np.asarray(p, dtype=float)
    blocks = [np.asarray(b, dtype=np.int64) for b in blocks]
    worst = 0.0
    for src in blocks:
        if src.size == 0:
            continue
        for dst in blocks:
            if dst.size == 0:
                continue
            sums = p[np.ix_(src, dst)].sum(axis=1)
            spread = float(sums.max() - sums.min())
            if spread > worst:
                worst = spread
    return worst
