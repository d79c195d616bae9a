import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

import reference_data as ref
from lucp.cp import (
    AlsConfig,
    CPDecomposition,
    cp_als,
    cp_als_orthogonal,
    cp_canonicalize,
    cp_loss,
    cp_reconstruct,
    estimate_rank,
    kruskal_check,
    rank_one,
)
from lucp.tensor import outer_product

seeds = st.integers(0, 2**32 - 1)


def random_cp(rng, shape, rank):
    factors = [rng.standard_normal((n, rank)) for n in shape]
    return CPDecomposition(np.ones(rank), factors, shape)


def summand(cp, r):
    return cp.weights[r] * outer_product([f[:, r] for f in cp.factors])


def test_config_validation():
    for bad in [dict(max_iters=0), dict(restarts=0), dict(rel_tol=0.0), dict(init="other")]:
        with pytest.raises(ValueError):
            AlsConfig(**bad)


def test_decomposition_shape_check():
    with pytest.raises(ValueError):
        CPDecomposition(np.ones(2), [np.zeros((3, 2)), np.zeros((4, 1))])
    z = CPDecomposition.zero((2, 3))
    assert z.rank == 0 and np.all(cp_reconstruct(z) == 0)


@given(seeds, st.integers(1, 4))
def test_reconstruct_is_sum_of_outer_products(seed, rank):
    cp = random_cp(np.random.default_rng(seed), (2, 3, 4), rank)
    want = sum(summand(cp, r) for r in range(rank))
    np.testing.assert_allclose(cp_reconstruct(cp), want, atol=1e-12)


def test_loss_is_squared_distance(rng):
    cp = random_cp(rng, (3, 3), 2)
    t = rng.standard_normal((3, 3))
    assert cp_loss(cp, t) == pytest.approx(np.sum((t - cp_reconstruct(cp)) ** 2), rel=1e-14)
    with pytest.raises(ValueError):
        cp_loss(cp, np.zeros((3, 4)))


@given(seeds)
def test_canonicalize_preserves_tensor_and_is_idempotent(seed):
    rng = np.random.default_rng(seed)
    cp = CPDecomposition(rng.standard_normal(3), [rng.standard_normal((n, 3)) for n in (2, 3, 4)])
    c = cp_canonicalize(cp)
    np.testing.assert_allclose(cp_reconstruct(c), cp_reconstruct(cp), atol=1e-12)
    assert np.all(c.weights >= 0) and np.all(np.diff(c.weights) <= 1e-12)
    for f in c.factors:
        np.testing.assert_allclose(np.linalg.norm(f, axis=0), 1, atol=1e-12)
    c2 = cp_canonicalize(c)
    np.testing.assert_allclose(c2.weights, c.weights, atol=1e-14)
    for a, b in zip(c2.factors, c.factors):
        np.testing.assert_allclose(a, b, atol=1e-14)


def test_canonicalize_removes_permutation_and_sign(rng):
    cp = random_cp(rng, (3, 3, 3), 3)
    perm = [2, 0, 1]
    flipped = [f[:, perm].copy() for f in cp.factors]
    flipped[0][:, 1] *= -1
    flipped[1][:, 1] *= -1
    other = CPDecomposition(cp.weights[perm], flipped)
    a, b = cp_canonicalize(cp), cp_canonicalize(other)
    np.testing.assert_allclose(a.weights, b.weights, atol=1e-12)
    for fa, fb in zip(a.factors, b.factors):
        np.testing.assert_allclose(fa, fb, atol=1e-12)


def test_rank_one_helper():
    cp = rank_one([[1.0, 0.0], [0.0, 2.0]], weight=3.0)
    np.testing.assert_allclose(cp_reconstruct(cp), [[0, 6], [0, 0]])


def test_als_recovers_exact_rank_three(rng):
    cp = random_cp(rng, (4, 4, 4), 3)
    t = cp_reconstruct(cp)
    fit = cp_als(t, 3)
    assert fit.loss / np.sum(t * t) < 1e-12
    assert fit.converged


def test_als_loss_history_monotone(rng):
    t = rng.standard_normal((4, 4, 4))
    fit = cp_als(t, 2, AlsConfig(restarts=3))
    h = np.array(fit.history)
    assert np.all(np.diff(h) <= 1e-12)
    assert fit.loss == pytest.approx(h[-1], rel=1e-10)


def test_als_is_deterministic(rng):
    t = rng.standard_normal((3, 4, 2))
    a = cp_als(t, 2, AlsConfig(seed=5))
    b = cp_als(t, 2, AlsConfig(seed=5))
    assert a.loss == b.loss and a.iterations == b.iterations
    for fa, fb in zip(a.cp.factors, b.cp.factors):
        np.testing.assert_array_equal(fa, fb)


def test_als_rank_one_of_matrix_is_leading_singular_pair(rng):
    m = rng.standard_normal((4, 3))
    s = np.linalg.svd(m, compute_uv=False)
    fit = cp_als(m, 1)
    assert fit.loss == pytest.approx(np.sum(s[1:] ** 2), rel=1e-8)


def test_als_zero_tensor():
    fit = cp_als(np.zeros((2, 3, 2)), 2)
    assert fit.loss == 0.0
    assert np.all(fit.cp.weights == 0)


def test_als_rejects_bad_rank():
    with pytest.raises(ValueError):
        cp_als(np.ones((2, 2)), 0)
    with pytest.raises(ValueError):
        cp_als_orthogonal(np.ones((2, 3)), 3)


def test_random_gaussian_init_also_fits(rng):
    t = cp_reconstruct(random_cp(rng, (3, 3, 3), 2))
    fit = cp_als(t, 2, AlsConfig(init="random-gaussian"))
    assert fit.loss / np.sum(t * t) < 1e-10


def test_target_loss_stops_early(rng):
    t = cp_reconstruct(random_cp(rng, (4, 4, 4), 2))
    fit = cp_als(t, 2, target_loss=1e-3 * np.sum(t * t))
    assert fit.loss <= 1e-3 * np.sum(t * t)


@given(seeds, st.integers(1, 3))
def test_orthogonal_factors_have_orthonormal_columns(seed, rank):
    t = np.random.default_rng(seed).standard_normal((3, 4, 3))
    fit = cp_als_orthogonal(t, rank, AlsConfig(restarts=3, max_iters=100))
    for f in fit.cp.factors:
        np.testing.assert_allclose(f.T @ f, np.eye(rank), atol=1e-10)
    hs = [outer_product([f[:, r] for f in fit.cp.factors]) for r in range(rank)]
    gram = np.array([[np.sum(a * b) for b in hs] for a in hs])
    np.testing.assert_allclose(gram, np.eye(rank), atol=1e-8)


def test_orthogonal_fit_of_orthogonal_tensor(rng):
    qs = [np.linalg.qr(rng.standard_normal((4, 4)))[0][:, :2] for _ in range(3)]
    t = cp_reconstruct(CPDecomposition(np.array([3.0, 1.0]), qs))
    fit = cp_als_orthogonal(t, 2)
    assert fit.loss < 1e-20
    np.testing.assert_allclose(fit.cp.weights, [3.0, 1.0], atol=1e-10)


def test_orthogonal_loss_history_monotone(rng):
    t = rng.standard_normal((4, 4, 4))
    h = np.array(cp_als_orthogonal(t, 3, AlsConfig(restarts=2)).history)
    assert np.all(np.diff(h) <= 1e-12)


def test_estimate_rank_matrix_uses_svd():
    r, fit = estimate_rank(ref.WERNER_X)
    assert r == 9
    assert fit.loss < 1e-20


def test_estimate_rank_small_cases(rng):
    assert estimate_rank(np.zeros((2, 2)))[0] == 0
    assert estimate_rank(np.array([0.0, 1.0, 2.0]))[0] == 1
    assert estimate_rank(np.array([1e-14, 0.0]))[0] == 0
    t = cp_reconstruct(random_cp(rng, (3, 3, 3), 2))
    r, fit = estimate_rank(t)
    assert r == 2 and fit.loss / np.sum(t * t) < 1e-16


def test_estimate_rank_synthetic_rank_three(rng):
    t = cp_reconstruct(random_cp(rng, (4, 4, 4), 3))
    r, fit = estimate_rank(t)
    assert r == 3
    assert np.sqrt(fit.loss / np.sum(t * t)) < 1e-8


def test_estimate_rank_rejects_bad_threshold():
    with pytest.raises(ValueError):
        estimate_rank(np.ones((2, 2)), loss_threshold=0.0)


def test_kruskal_check():
    eye = np.eye(3)
    assert kruskal_check(CPDecomposition(np.ones(3), [eye, eye, eye]))
    # repeated columns in two modes break the bound
    rep = np.array([[1.0, 1.0, 0.0], [0.0, 0.0, 1.0], [0.0, 0.0, 0.0]])
    assert not kruskal_check(CPDecomposition(np.ones(3), [rep, rep, eye]))
    assert kruskal_check(CPDecomposition.zero((2, 2)))
