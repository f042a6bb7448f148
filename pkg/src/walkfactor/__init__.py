"""Streaming factorization and partition of Markov chains from a single walk.

The package watches one random walk of an unknown chain, down-samples it into
nearly independent transitions, and runs a Hebbian streaming update whose
iterate converges to the top singular subspaces of the scaled transition
matrix. Rescaled embedding rows cluster into the chain's lumpable blocks, and
a geometric-median selection over disjoint stream segments turns the
constant-probability guarantee of a single run into a high-probability one.
"""

from __future__ import annotations

from .boost import (
    BoostReport,
    boost_count,
    boosted_factorize,
    geometric_median,
    select_estimate,
)
from .chains import (
    PEX_BLOCKS,
    ChainStats,
    LumpableSpec,
    StationaryDistribution,
    TransitionMatrix,
    block_length,
    chain_stats,
    detailed_balance_residual,
    fixture_pex,
    make_lumpable_chain,
    merging_conductance,
    simulate_walk,
    stationary_distribution,
    stationary_start,
)
from .factorize import (
    AngleTrace,
    BlockSample,
    Embedding,
    EtaSchedule,
    FactorizerState,
    convergence_rate_fit,
    downsample,
    embedding,
    factorize_stream,
    gha_step,
    init_state,
    orthogonality_drift,
    run,
    sin_theta,
)
from .ingest import GridSpec, IngestResult, TripRecord, build_stream, grid_index, load_trips
from .oracle import (
    SpectralFactorization,
    batch_factorize,
    dilation,
    dilation_eigenbasis,
    empirical_dp,
    kkt_residual,
    lumpability_residual,
    objective,
)
from .partition import (
    EmpiricalDistribution,
    KMeansFit,
    MarginCheck,
    Partition,
    RepresentationMatrix,
    assign,
    empirical_stationary,
    kmeans,
    partition_agreement,
    partition_states,
    recovery_margin_check,
    representation,
)
from .rng import make_rng, trial_rng

__version__ = "0.1.0"

__all__ = [
    "AngleTrace",
    "BlockSample",
    "BoostReport",
    "ChainStats",
    "Embedding",
    "EmpiricalDistribution",
    "EtaSchedule",
    "FactorizerState",
    "GridSpec",
    "IngestResult",
    "KMeansFit",
    "LumpableSpec",
    "PEX_BLOCKS",
    "MarginCheck",
    "Partition",
    "RepresentationMatrix",
    "SpectralFactorization",
    "StationaryDistribution",
    "TransitionMatrix",
    "TripRecord",
    "assign",
    "batch_factorize",
    "block_length",
    "boost_count",
    "boosted_factorize",
    "build_stream",
    "chain_stats",
    "convergence_rate_fit",
    "detailed_balance_residual",
    "dilation",
    "dilation_eigenbasis",
    "downsample",
    "embedding",
    "empirical_dp",
    "empirical_stationary",
    "factorize_stream",
    "fixture_pex",
    "geometric_median",
    "gha_step",
    "grid_index",
    "init_state",
    "kkt_residual",
    "kmeans",
    "load_trips",
    "lumpability_residual",
    "make_lumpable_chain",
    "make_rng",
    "merging_conductance",
    "objective",
    "orthogonality_drift",
    "partition_agreement",
    "partition_states",
    "recovery_margin_check",
    "representation",
    "run",
    "select_estimate",
    "simulate_walk",
    "sin_theta",
    "stationary_distribution",
    "stationary_start",
    "trial_rng",
    "__version__",
]
