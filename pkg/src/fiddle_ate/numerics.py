"""Dense symmetric eigensolvers and seeded random streams.

Everything downstream (factor extraction, network training, the synthetic
benchmark) draws randomness through :class:`SeededRng` and obtains spectral
decompositions through :func:`sym_eig_topk` / :func:`gram_topk`.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

_MASK64 = (1 << 64) - 1
CLAMP_TOL = 1e-10


def _splitmix64(z: int) -> int:
    z = (z + 0x9E3779B97F4A7C15) & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


def derive_seed(base: int, index: int) -> int:
    """Child seed for stream ``index`` of ``base``.

    ``mix(base, i) = splitmix64(splitmix64(base) ^ splitmix64(i + 1))``; the
    result is a 64-bit integer and distinct indices give distinct seeds with
    overwhelming probability.
    """
    return _splitmix64(_splitmix64(int(base) & _MASK64) ^ _splitmix64((int(index) + 1) & _MASK64))


class SeededRng:
    """Single-owner random stream backed by the counter-based Philox generator."""

    def __init__(self, seed: int):
        self.seed = int(seed) & _MASK64
        self.gen = np.random.Generator(np.random.Philox(self.seed))

    def child(self, index: int) -> "SeededRng":
        return SeededRng(derive_seed(self.seed, index))

    def uniform(self, a: float, b: float, size=None):
        if not a < b:
            raise ValueError(f"uniform range requires a < b, got [{a}, {b})")
        return self.gen.uniform(a, b, size)

    def normal(self, mean: float, sd: float, size=None):
        if sd < 0:
            raise ValueError(f"normal sd must be nonnegative, got {sd}")
        if sd == 0:
            return float(mean) if size is None else np.full(size, float(mean))
        return self.gen.normal(mean, sd, size)

    def permutation(self, n: int) -> np.ndarray:
        return self.gen.permutation(n)

    def choice(self, n: int, size: int) -> np.ndarray:
        return self.gen.choice(n, size=size, replace=False)

    def bernoulli(self, prob: np.ndarray) -> np.ndarray:
        return (self.gen.random(np.shape(prob)) < prob).astype(np.int64)


def sample_uniform(rng: SeededRng, a: float, b: float) -> float:
    return float(rng.uniform(a, b))


def sample_normal(rng: SeededRng, mean: float, sd: float) -> float:
    return float(rng.normal(mean, sd))


def matmul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return np.asarray(a, dtype=float) @ np.asarray(b, dtype=float)


def tmatmul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """``a.T @ b`` without materialising the transpose copy."""
    return np.asarray(a, dtype=float).T @ np.asarray(b, dtype=float)


def axpy(alpha: float, x: np.ndarray, y: np.ndarray) -> np.ndarray:
    return alpha * np.asarray(x, dtype=float) + np.asarray(y, dtype=float)


@dataclass(frozen=True)
class EigenPairs:
    """Leading eigenpairs, values descending, vectors as columns.

    ``degenerate`` is set when some requested pair lies in the null space and
    no meaningful eigenvector exists; those columns are returned as zeros.
    """

    values: np.ndarray
    vectors: np.ndarray
    degenerate: bool = False


def _fix_signs(vectors: np.ndarray) -> np.ndarray:
    if vectors.size == 0:
        return vectors
    idx = np.argmax(np.abs(vectors), axis=0)
    signs = np.sign(vectors[idx, np.arange(vectors.shape[1])])
    signs[signs == 0] = 1.0
    return vectors * signs


def jacobi_eigh(S: np.ndarray, tol: float = 1e-14, max_sweeps: int = 60):
    """All eigenpairs of a symmetric matrix by the cyclic Jacobi method.

    Returns ``(values, vectors)`` unsorted. Each rotation zeroes one
    off-diagonal pair; sweeps repeat until the off-diagonal Frobenius mass is
    below ``tol * ||S||_F``.
    """
    A = np.array(S, dtype=float, copy=True)
    k = A.shape[0]
    V = np.eye(k)
    scale = np.linalg.norm(A)
    if k < 2 or scale == 0.0:
        return np.diag(A).copy(), V
    negligible = 1e-18 * scale
    for _ in range(max_sweeps):
        off = np.linalg.norm(A - np.diag(np.diag(A)))
        if off <= tol * scale:
            break
        for p in range(k - 1):
            for q in range(p + 1, k):
                apq = A[p, q]
                if abs(apq) <= negligible:
                    A[p, q] = A[q, p] = 0.0
                    continue
                theta = (A[q, q] - A[p, p]) / (2.0 * apq)
                if abs(theta) > 1e100:
                    t = 0.5 / theta
                elif theta == 0.0:
                    t = 1.0
                else:
                    t = np.sign(theta) / (abs(theta) + np.sqrt(theta * theta + 1.0))
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c
                ap = A[:, p].copy()
                aq = A[:, q].copy()
                A[:, p] = c * ap - s * aq
                A[:, q] = s * ap + c * aq
                rp = A[p, :].copy()
                rq = A[q, :].copy()
                A[p, :] = c * rp - s * rq
                A[q, :] = s * rp + c * rq
                A[p, q] = A[q, p] = 0.0
                vp = V[:, p].copy()
                V[:, p] = c * vp - s * V[:, q]
                V[:, q] = s * vp + c * V[:, q]
    else:
        raise RuntimeError("Jacobi eigensolver did not converge")
    return np.diag(A).copy(), V


def sym_eig_topk(S: np.ndarray, topk: int) -> EigenPairs:
    S = np.asarray(S, dtype=float)
    if S.ndim != 2 or S.shape[0] != S.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {S.shape}")
    if not np.all(np.isfinite(S)):
        raise ValueError("matrix has non-finite entries")
    k = S.shape[0]
    if not 0 <= topk <= k:
        raise ValueError(f"topk={topk} outside [0, {k}]")
    norm = np.linalg.norm(S)
    if np.linalg.norm(S - S.T) > 1e-10 * max(norm, 1e-300):
        raise ValueError("matrix is not symmetric")
    values, vectors = jacobi_eigh(0.5 * (S + S.T))
    order = np.argsort(-values, kind="stable")[:topk]
    values = values[order]
    values = np.where((values < 0) & (values >= -CLAMP_TOL * max(norm, 1.0)), 0.0, values)
    return EigenPairs(values, _fix_signs(vectors[:, order]))


def gram_topk(X: np.ndarray, topk: int) -> EigenPairs:
    """Leading eigenpairs of ``X.T @ X / m`` through the ``m x m`` Gram matrix.

    The nonzero spectrum of ``X.T X / m`` and ``X X.T / m`` coincide, and a Gram
    eigenvector ``w`` maps to ``X.T w / ||X.T w||``.
    """
    X = np.asarray(X, dtype=float)
    m, p = X.shape
    if not 0 <= topk <= min(m, p):
        raise ValueError(f"topk={topk} exceeds rank bound min(m, p)={min(m, p)}")
    G = X @ X.T / m
    pairs = sym_eig_topk(0.5 * (G + G.T), topk)
    values = pairs.values
    V = X.T @ pairs.vectors
    norms = np.linalg.norm(V, axis=0)
    lead = values[0] if topk else 0.0
    null = (values <= 1e-12 * lead) | (norms == 0.0)
    values = np.where(null, 0.0, values)
    V[:, null] = 0.0
    V[:, ~null] /= norms[~null]
    return EigenPairs(values, _fix_signs(V), degenerate=bool(null.any()))
