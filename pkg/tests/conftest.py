"""Session-wide fixtures: the worked example chain and its exact factorization."""

from __future__ import annotations

import numpy as np
import pytest

import walkfactor as wf


@pytest.fixture(scope="session")
def pex():
    """(transition matrix, published mu, meta matrix, published phi)."""
    return wf.fixture_pex()


@pytest.fixture(scope="session")
def pex_exact(pex):
    """(p, exact stationary, exact dp, rank-3 dilation reference basis)."""
    p, _, _, _ = pex
    mu = wf.stationary_distribution(p)
    dp = np.diag(mu.mu) @ p.p
    ref = wf.dilation_eigenbasis(dp, 3)
    return p, mu, dp, ref
