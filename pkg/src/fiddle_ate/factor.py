"""Diversified projection from a held-out pretraining subsample.

The projection ``W`` (p x rbar) has columns ``sqrt(lambda_j) * v_j`` built from
the leading eigenpairs of the uncentered second-moment matrix of the
pretraining rows. Factor scores for the estimation rows are ``W.T x / p``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import Dataset
from .numerics import SeededRng, gram_topk, sym_eig_topk


@dataclass(frozen=True)
class SplitDataset:
    pretrain: np.ndarray
    estimation: Dataset
    pretrain_idx: np.ndarray
    estimation_idx: np.ndarray

    @property
    def m(self) -> int:
        return self.pretrain.shape[0]


@dataclass(frozen=True)
class DpMatrix:
    W: np.ndarray
    eigvals: np.ndarray

    @property
    def p(self) -> int:
        return self.W.shape[0]

    @property
    def rbar(self) -> int:
        return self.W.shape[1]


@dataclass(frozen=True)
class DpDiagnostics:
    H: np.ndarray
    nu_min: float
    nu_max: float
    w_max_abs: float


def split_pretrain(dataset: Dataset, m: int, rng: SeededRng) -> SplitDataset:
    """Hold out ``m`` uniformly chosen rows; only their covariates are kept."""
    n = dataset.n
    if not 1 <= m < n:
        raise ValueError(f"pretraining size m={m} must satisfy 1 <= m < n={n}")
    held = np.sort(rng.choice(n, m))
    mask = np.ones(n, dtype=bool)
    mask[held] = False
    rest = np.flatnonzero(mask)
    return SplitDataset(dataset.X[held].copy(), dataset.subset(rest), held, rest)


def build_dp_matrix(pretrain: np.ndarray, rbar: int) -> DpMatrix:
    X = np.asarray(pretrain, dtype=float)
    m, p = X.shape
    if rbar > m:
        raise ValueError(f"rbar={rbar} exceeds the pretraining size m={m}")
    if rbar > p:
        raise ValueError(f"rbar={rbar} exceeds the covariate dimension p={p}")
    if not np.any(X):
        raise ValueError("pretraining covariates are all zero")
    if p > m:
        pairs = gram_topk(X, rbar)
    else:
        pairs = sym_eig_topk(X.T @ X / m, rbar)
    W = pairs.vectors * np.sqrt(pairs.values)
    return DpMatrix(W, pairs.values)


def extract_factors(dp: DpMatrix, X: np.ndarray) -> np.ndarray:
    """Rows of the returned ``n x rbar`` array are ``W.T x_i / p``."""
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[1] != dp.p:
        raise ValueError(f"covariates have {X.shape[-1]} columns, projection expects {dp.p}")
    return X @ dp.W / dp.p


def dp_diagnostics(dp: DpMatrix, B_true: np.ndarray) -> DpDiagnostics:
    B = np.asarray(B_true, dtype=float)
    if B.ndim != 2 or B.shape[0] != dp.p:
        raise ValueError(f"loadings have {B.shape[0]} rows, projection has p={dp.p}")
    H = dp.W.T @ B / dp.p
    r = H.shape[1]
    ev = sym_eig_topk(H.T @ H, r).values
    sv = np.sqrt(np.clip(ev, 0.0, None))
    # rbar < r leaves H.T H rank deficient
    nu_min = 0.0 if dp.rbar < r else float(sv[-1])
    return DpDiagnostics(H, nu_min, float(sv[0]) if r else 0.0, float(np.abs(dp.W).max()))
