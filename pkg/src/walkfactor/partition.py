"""Block recovery: turn a spectral embedding into a partition of the states.

The right embedding rows, rescaled by the visit frequencies, are nearly
constant within each block of a lumpable chain, so clustering those rows
recovers the blocks. Clustering is a small hand-rolled Lloyd iteration with
greedy farthest-point seeding; agreement between partitions is scored as the
best label matching over permutations.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment

from .factorize import Embedding
from .rng import make_rng


@dataclass(frozen=True)
class EmpiricalDistribution:
    """Visit frequencies of a walk over m states."""

    mu_hat: np.ndarray
    n_samples: int

    def __post_init__(self):
        mu = np.ascontiguousarray(np.asarray(self.mu_hat, dtype=float))
        if mu.ndim != 1 or mu.min() < 0.0 or abs(mu.sum() - 1.0) > 1e-12:
            raise ValueError("visit frequencies must be nonnegative and sum to 1")
        object.__setattr__(self, "mu_hat", mu)


@dataclass(frozen=True)
class RepresentationMatrix:
    """Embedding rows rescaled by inverse visit frequency, one row per state."""

    rows: np.ndarray

    def __post_init__(self):
        rows = np.ascontiguousarray(np.asarray(self.rows, dtype=float))
        if rows.ndim != 2:
            raise ValueError("representation must be a 2-d array")
        if not np.isfinite(rows).all():
            raise ValueError("representation contains non-finite entries")
        object.__setattr__(self, "rows", rows)

    @property
    def m(self) -> int:
        return self.rows.shape[0]


@dataclass(frozen=True)
class Partition:
    """Cluster labels in 0..r-1 for each of the m states."""

    labels: np.ndarray
    r: int

    def __post_init__(self):
        labels = np.ascontiguousarray(np.asarray(self.labels, dtype=np.int64))
        if labels.ndim != 1:
            raise ValueError("labels must be a vector")
        if labels.size and (labels.min() < 0 or labels.max() >= self.r):
            raise ValueError(f"labels must lie in 0..{self.r - 1}")
        object.__setattr__(self, "labels", labels)

    def blocks(self) -> list:
        return [np.nonzero(self.labels == c)[0] for c in range(self.r)]


@dataclass(frozen=True)
class KMeansFit:
    centers: np.ndarray
    labels: np.ndarray
    inertia: float
    history: np.ndarray


@dataclass(frozen=True)
class MarginCheck:
    """Outcome of the cluster-separation test backing exact recovery."""

    ok: bool
    margin: float
    threshold: float


def empirical_stationary(stream: np.ndarray, m: int) -> EmpiricalDistribution:
    """Visit frequencies of the stream; every state must appear at least once."""
    stream = np.asarray(stream, dtype=np.int64)
    if stream.ndim != 1 or stream.size == 0:
        raise ValueError("need a nonempty stream")
    if stream.min() < 0 or stream.max() >= m:
        raise ValueError(f"stream contains states outside 0..{m - 1}")
    counts = np.bincount(stream, minlength=m)
    if (counts == 0).any():
        missing = np.nonzero(counts == 0)[0]
        raise ValueError(
            f"states never visited: {missing.tolist()}; "
            "a longer walk is needed before the representation is defined"
        )
    return EmpiricalDistribution(counts / float(stream.size), int(stream.size))


def representation(emb: Embedding, mu) -> RepresentationMatrix:
    """Rescale the right embedding rows by inverse visit frequency.

    For an exactly lumpable chain factored exactly, the resulting rows are
    constant on each block, which is what makes k-means recovery exact.
    """
    mu_hat = mu.mu_hat if isinstance(mu, EmpiricalDistribution) else np.asarray(mu, float)
    if mu_hat.shape[0] != emb.m:
        raise ValueError(f"frequency vector has {mu_hat.shape[0]} entries, embedding {emb.m}")
    if mu_hat.min() <= 0.0:
        bad = np.nonzero(mu_hat <= 0.0)[0]
        raise ValueError(f"nonpositive visit frequencies at states {bad.tolist()}")
    return RepresentationMatrix(emb.v_hat / mu_hat[:, None])


def _distances2(points: np.ndarray, centers: np.ndarray) -> np.ndarray:
    diff = points[:, None, :] - centers[None, :, :]
    return (diff * diff).sum(axis=2)


def assign(points: np.ndarray, centers: np.ndarray) -> np.ndarray:
    """Nearest-center labels; ties go to the lowest center index."""
    return _distances2(np.asarray(points, float), np.asarray(centers, float)).argmin(axis=1)


def _seed_centers(points: np.ndarray, r: int, rng) -> np.ndarray:
    n = points.shape[0]
    centers = np.empty((r, points.shape[1]))
    centers[0] = points[int(rng.integers(n))]
    d2 = ((points - centers[0]) ** 2).sum(axis=1)
    for c in range(1, r):
        centers[c] = points[int(d2.argmax())]
        d2 = np.minimum(d2, ((points - centers[c]) ** 2).sum(axis=1))
    return centers


def kmeans(
    points: np.ndarray,
    r: int,
    seed,
    restarts: int = 10,
    max_iter: int = 300,
    tol: float = 1e-10,
) -> KMeansFit:
    """Lloyd's iteration with greedy farthest-point seeding and restarts.

    The within-cluster objective never increases across Lloyd iterations. An
    emptied cluster is reseeded at the point farthest from its nearest center;
    after 3 reseeds in one restart that restart is abandoned (an error is
    raised only if every restart ends that way).
    """
    points = np.asarray(points, dtype=float)
    if points.ndim != 2:
        raise ValueError("points must be a 2-d array")
    n = points.shape[0]
    if not (1 <= r <= n):
        raise ValueError(f"cluster count r={r} must lie in 1..{n}")
    rng = make_rng(seed)
    best: KMeansFit | None = None
    for _ in range(max(restarts, 1)):
        fit = _lloyd_once(points, r, rng, max_iter, tol)
        if fit is None:
            continue
        if best is None or fit.inertia < best.inertia:
            best = fit
    if best is None:
        raise RuntimeError(
            f"k-means failed: every restart kept producing empty clusters "
            f"(n={n}, r={r})"
        )
    return best


def _lloyd_once(points: np.ndarray, r: int, rng, max_iter: int, tol: float):
    centers = _seed_centers(points, r, rng)
    reseeds = 0
    inertia = np.inf
    history: list = []
    for _ in range(max_iter):
        d2 = _distances2(points, centers)
        labels = d2.argmin(axis=1)
        empty = [c for c in range(r) if not (labels == c).any()]
        if empty:
            reseeds += len(empty)
            if reseeds > 3:
                return None
            nearest = d2.min(axis=1)
            for c in empty:
                far = int(nearest.argmax())
                centers[c] = points[far]
                nearest[far] = 0.0
            continue
        new_inertia = float(d2[np.arange(points.shape[0]), labels].sum())
        history.append(new_inertia)
        for c in range(r):
            centers[c] = points[labels == c].mean(axis=0)
        if inertia - new_inertia < tol:
            inertia = new_inertia
            break
        inertia = new_inertia
    final_labels = assign(points, centers)
    d2 = _distances2(points, centers)
    inertia = float(d2[np.arange(points.shape[0]), final_labels].sum())
    history.append(inertia)
    return KMeansFit(centers=centers, labels=final_labels, inertia=inertia,
                     history=np.array(history))


def partition_states(rep: RepresentationMatrix, r: int, seed,
                     restarts: int = 10) -> Partition:
    """Cluster representation rows into r blocks."""
    fit = kmeans(rep.rows, r, seed, restarts=restarts)
    return Partition(fit.labels, r)


def recovery_margin_check(rep: RepresentationMatrix, part: Partition,
                          eps: float, mu_min: float) -> MarginCheck:
    """Test whether cross-block rows are separated enough for exact recovery.

    Under a subspace perturbation of size eps (squared sine distance) and
    visit frequencies bounded below by mu_min, each representation row moves
    by at most d with d^2 <= 96 eps / mu_min^2. Recovery by nearest-row
    clustering is then guaranteed when the squared distance between any two
    rows in different blocks exceeds twice that bound, which is the threshold
    used here. The margin is the smallest cross-block squared row distance.
    """
    if eps < 0.0 or mu_min <= 0.0:
        raise ValueError("need eps >= 0 and mu_min > 0")
    rows = rep.rows
    labels = part.labels
    if labels.shape[0] != rows.shape[0]:
        raise ValueError("partition and representation disagree on the state count")
    margin = np.inf
    for c in range(part.r):
        inside = rows[labels == c]
        outside = rows[labels != c]
        if inside.size == 0 or outside.size == 0:
            continue
        margin = min(margin, float(_distances2(inside, outside).min()))
    threshold = 2.0 * 96.0 * eps / mu_min**2
    return MarginCheck(ok=bool(margin > threshold), margin=margin, threshold=threshold)


def partition_agreement(a: Partition, b: Partition) -> float:
    """Largest fraction of states on which the two partitions agree,
    maximized over relabelings of the second partition."""
    if a.labels.shape[0] != b.labels.shape[0]:
        raise ValueError("partitions cover different numbers of states")
    n = a.labels.shape[0]
    if n == 0:
        raise ValueError("partitions are empty")
    k = max(a.r, b.r)
    confusion = np.zeros((k, k), dtype=np.int64)
    np.add.at(confusion, (a.labels, b.labels), 1)
    rows, cols = linear_sum_assignment(-confusion)
    return float(confusion[rows, cols].sum()) / float(n)
