"""Batch reference path: empirical counting, exact SVD, dilation, residuals."""

from __future__ import annotations

import numpy as np
import pytest
from util import random_lumpable, random_orthonormal

import walkfactor as wf


def test_empirical_dp_small_example():
    stream = np.array([0, 1, 0, 1, 0])
    got = wf.empirical_dp(stream, 2)
    np.testing.assert_array_equal(got, [[0.0, 0.5], [0.5, 0.0]])


def test_empirical_dp_counts_every_consecutive_pair():
    stream = np.array([0, 0, 1, 2, 2])
    got = wf.empirical_dp(stream, 3)
    expected = np.array([
        [0.25, 0.25, 0.0],
        [0.0, 0.0, 0.25],
        [0.0, 0.0, 0.25],
    ])
    np.testing.assert_array_equal(got, expected)
    assert got.sum() == pytest.approx(1.0)


def test_empirical_dp_validation():
    with pytest.raises(ValueError, match="at least 2"):
        wf.empirical_dp(np.array([3]), 5)
    with pytest.raises(ValueError, match="outside"):
        wf.empirical_dp(np.array([0, 5]), 3)


def test_empirical_dp_converges_to_exact_dp(pex_exact):
    p, _, dp, _ = pex_exact
    walk = wf.simulate_walk(p, 0, 200000, 17)
    est = wf.empirical_dp(walk, p.m)
    assert np.abs(est - dp).max() <= 2e-3


def test_batch_factorize_recovers_a_planted_svd():
    rng = np.random.default_rng(3)
    u = random_orthonormal(rng, 8, 2)
    v = random_orthonormal(rng, 8, 2)
    sigma = np.array([0.9, 0.4])
    a = u @ np.diag(sigma) @ v.T
    fact = wf.batch_factorize(a, 2)
    np.testing.assert_allclose(fact.sigma, sigma, atol=1e-12)
    assert wf.sin_theta(fact.u, u) <= 1e-12
    assert wf.sin_theta(fact.v, v) <= 1e-12
    assert fact.gap == pytest.approx(0.4, abs=1e-12)


def test_batch_factorize_factors_are_orthonormal(pex_exact):
    _, _, dp, _ = pex_exact
    fact = wf.batch_factorize(dp, 3)
    np.testing.assert_allclose(fact.u.T @ fact.u, np.eye(3), atol=1e-12)
    np.testing.assert_allclose(fact.v.T @ fact.v, np.eye(3), atol=1e-12)
    assert np.all(np.diff(fact.sigma) <= 1e-15)
    assert fact.gap > 0.01


def test_batch_factorize_warns_on_degenerate_gap():
    with pytest.warns(RuntimeWarning, match="degenerate"):
        wf.batch_factorize(np.eye(4), 2)
    with pytest.warns(RuntimeWarning, match="degenerate"):
        wf.batch_factorize(np.zeros((3, 3)), 1)


def test_batch_factorize_validates_rank():
    with pytest.raises(ValueError, match="rank"):
        wf.batch_factorize(np.eye(3), 4)


def test_dilation_layout():
    z = np.arange(4.0).reshape(2, 2)
    ea = wf.dilation(z)
    assert ea.shape == (4, 4)
    np.testing.assert_array_equal(ea, ea.T)
    np.testing.assert_array_equal(ea[:2, 2:], z)
    np.testing.assert_array_equal(ea[:2, :2], 0.0)


def test_dilation_spectrum_is_plus_minus_singular_values():
    rng = np.random.default_rng(4)
    for _ in range(5):
        z = rng.standard_normal((5, 5))
        sigma = np.linalg.svd(z, compute_uv=False)
        eigs = np.sort(np.linalg.eigvalsh(wf.dilation(z)))
        expected = np.sort(np.concatenate([-sigma, sigma]))
        np.testing.assert_allclose(eigs, expected, atol=1e-10)


def test_dilation_eigenbasis_matches_eigendecomposition(pex_exact):
    _, _, dp, ref = pex_exact
    ea = wf.dilation(dp)
    evals, evecs = np.linalg.eigh(ea)
    top = evecs[:, np.argsort(evals)[::-1][:3]]
    assert wf.sin_theta(ref, top) <= 1e-8
    np.testing.assert_allclose(ref.T @ ref, np.eye(3), atol=1e-12)


def test_reversible_chain_has_symmetric_dp_and_aligned_factors():
    # symmetric transition matrix: uniform stationary, dp symmetric
    raw = np.array([
        [0.4, 0.3, 0.2, 0.1],
        [0.3, 0.4, 0.1, 0.2],
        [0.2, 0.1, 0.4, 0.3],
        [0.1, 0.2, 0.3, 0.4],
    ])
    p = wf.TransitionMatrix(raw)
    mu = wf.stationary_distribution(p)
    dp = np.diag(mu.mu) @ p.p
    assert np.abs(dp - dp.T).max() <= 1e-10
    fact = wf.batch_factorize(dp, 2)
    assert wf.sin_theta(fact.u, fact.v) <= 1e-6


def test_objective_maximized_by_reference(pex_exact):
    _, _, dp, ref = pex_exact
    ea = wf.dilation(dp)
    fact = wf.batch_factorize(dp, 3)
    best = wf.objective(ref, ea)
    assert best == pytest.approx(fact.sigma.sum(), abs=1e-12)
    rng = np.random.default_rng(5)
    for _ in range(10):
        w = random_orthonormal(rng, ea.shape[0], 3)
        assert wf.objective(w, ea) <= best + 1e-12


def test_kkt_residual_vanishes_at_reference(pex_exact):
    _, _, dp, ref = pex_exact
    ea = wf.dilation(dp)
    stat, feas = wf.kkt_residual(ref, ea)
    assert stat <= 1e-12
    assert feas <= 1e-12


def test_kkt_residual_detects_non_stationary_points(pex_exact):
    _, _, dp, _ = pex_exact
    ea = wf.dilation(dp)
    rng = np.random.default_rng(6)
    w = random_orthonormal(rng, ea.shape[0], 3)
    stat, feas = wf.kkt_residual(w, ea)
    assert feas <= 1e-12
    assert stat > 1e-3


def test_kkt_feasibility_measures_orthonormality_defect():
    w = np.array([[2.0, 0.0], [0.0, 1.0], [0.0, 0.0]])
    _, feas = wf.kkt_residual(w, np.eye(3))
    assert feas == pytest.approx(3.0, abs=1e-12)


def test_lumpability_residual_zero_on_generated_chains():
    rng = np.random.default_rng(7)
    spec, p = random_lumpable(rng, m=9, r=3)
    assert wf.lumpability_residual(p.p, spec.blocks) <= 1e-12


def test_lumpability_residual_detects_wrong_blocks():
    rng = np.random.default_rng(8)
    spec, p = random_lumpable(rng, m=9, r=3)
    wrong = (np.arange(0, 3), np.arange(3, 6), np.arange(6, 9))
    same = all(np.array_equal(a, b) for a, b in zip(spec.blocks, wrong))
    if not same:
        assert wf.lumpability_residual(p.p, wrong) > 1e-3


def test_lumpability_residual_flags_cross_block_perturbation():
    rng = np.random.default_rng(9)
    spec, p = random_lumpable(rng, m=8, r=2)
    inside = np.asarray(spec.blocks[0])
    outside = np.asarray(spec.blocks[1])
    q = p.p.copy()
    q[inside[0], inside[0]] += 0.01
    q[inside[0], outside[0]] -= 0.01
    assert wf.lumpability_residual(q, spec.blocks) >= 0.01 - 1e-12
