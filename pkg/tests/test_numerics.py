import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fiddle_ate.numerics import (
    SeededRng,
    axpy,
    derive_seed,
    gram_topk,
    matmul,
    sample_normal,
    sample_uniform,
    sym_eig_topk,
    tmatmul,
)


def _align(a, b):
    """Flip columns of ``a`` to match the sign of ``b``."""
    s = np.sign(np.sum(a * b, axis=0))
    s[s == 0] = 1
    return a * s


def test_diagonal_eigenpairs():
    e = sym_eig_topk(np.diag([4.0, 1.0]), 2)
    assert np.allclose(e.values, [4.0, 1.0])
    assert np.allclose(np.abs(e.vectors), np.eye(2))


def test_all_ones_rank_one():
    e = sym_eig_topk(np.ones((2, 2)), 1)
    assert e.values[0] == pytest.approx(2.0, abs=1e-12)
    assert np.allclose(e.vectors[:, 0], [2 ** -0.5, 2 ** -0.5])


def test_random_symmetric_residual_and_reconstruction():
    rng = np.random.default_rng(3)
    A = rng.normal(size=(8, 8))
    S = A + A.T
    e = sym_eig_topk(S, 8)
    norm = np.linalg.norm(S)
    for lam, v in zip(e.values, e.vectors.T):
        assert np.linalg.norm(S @ v - lam * v) <= 1e-10 * norm
    assert np.linalg.norm(S - e.vectors @ np.diag(e.values) @ e.vectors.T) <= 1e-8 * norm
    assert np.all(np.diff(e.values) <= 0)
    assert np.allclose(e.vectors.T @ e.vectors, np.eye(8), atol=1e-8)


def test_sign_convention_largest_entry_nonnegative():
    rng = np.random.default_rng(4)
    A = rng.normal(size=(6, 6))
    e = sym_eig_topk(A @ A.T, 4)
    for v in e.vectors.T:
        assert v[np.argmax(np.abs(v))] > 0


def test_near_zero_negative_eigenvalues_clamped():
    v = np.array([1.0, 1.0]) / np.sqrt(2)
    S = np.outer(v, v) * 3.0
    e = sym_eig_topk(S, 2)
    assert e.values[1] >= 0.0


@pytest.mark.parametrize("bad", [
    np.array([[1.0, 2.0], [0.0, 1.0]]),
    np.array([[np.nan, 0.0], [0.0, 1.0]]),
    np.array([[np.inf, 0.0], [0.0, 1.0]]),
])
def test_sym_eig_rejects_bad_input(bad):
    with pytest.raises(ValueError):
        sym_eig_topk(bad, 1)


def test_gram_single_row():
    e = gram_topk(np.array([[2.0, 0.0]]), 1)
    assert e.values[0] == pytest.approx(4.0)
    assert np.allclose(e.vectors[:, 0], [1.0, 0.0])


def test_gram_zero_matrix_flags_degenerate():
    e = gram_topk(np.zeros((3, 5)), 2)
    assert np.all(e.values == 0.0)
    assert e.degenerate
    assert not np.any(e.vectors)


def test_gram_topk_rank_bound():
    with pytest.raises(ValueError):
        gram_topk(np.ones((3, 5)), 4)


@settings(max_examples=40, deadline=None)
@given(m=st.integers(2, 20), p=st.integers(2, 20), seed=st.integers(0, 2 ** 31))
def test_gram_matches_dense_covariance(m, p, seed):
    X = np.random.default_rng(seed).normal(size=(m, p))
    k = min(m, p)
    g = gram_topk(X, k)
    d = sym_eig_topk(X.T @ X / m, k)
    # dense oracle from LAPACK, independent of the Jacobi path
    ref = np.sort(np.linalg.eigvalsh(X.T @ X / m))[::-1][:k]
    assert np.allclose(g.values, ref, atol=1e-8 * max(1.0, ref[0]))
    assert np.allclose(d.values, ref, atol=1e-8 * max(1.0, ref[0]))
    gaps = np.abs(np.diff(ref))
    if gaps.size == 0 or gaps.min() > 1e-6 * ref[0]:
        assert np.allclose(_align(g.vectors, d.vectors), d.vectors, atol=1e-6)


def test_rng_determinism_and_split():
    a = SeededRng(42).uniform(-1, 1, (5, 3))
    b = SeededRng(42).uniform(-1, 1, (5, 3))
    assert np.array_equal(a, b)
    seeds = {derive_seed(42, i) for i in range(1000)}
    assert len(seeds) == 1000
    assert derive_seed(42, 1) != derive_seed(43, 1)


def test_uniform_moments():
    x = SeededRng(0).uniform(-1.0, 1.0, 10 ** 6)
    assert -0.005 <= x.mean() <= 0.005
    assert 0.330 <= x.var() <= 0.337
    assert x.min() >= -1.0 and x.max() < 1.0


def test_scalar_samplers():
    rng = SeededRng(1)
    assert sample_normal(rng, 0.0, 0.0) == 0.0
    u = sample_uniform(rng, 2.0, 3.0)
    assert 2.0 <= u < 3.0
    with pytest.raises(ValueError):
        sample_uniform(rng, 1.0, 1.0)
    with pytest.raises(ValueError):
        sample_normal(rng, 0.0, -1.0)


def test_dense_kernels():
    A = np.arange(9.0).reshape(3, 3)
    assert np.array_equal(matmul(np.eye(3), A), A)
    assert np.array_equal(tmatmul(A, np.eye(3)), A.T)
    assert np.array_equal(axpy(2.0, A, A), 3 * A)
