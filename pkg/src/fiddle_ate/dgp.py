"""Synthetic factor-model benchmark with full oracle access.

Covariates follow ``x = B f + u`` with ``b_ij ~ U(-sqrt3, sqrt3)`` and
``f_k, u_j ~ U(-1, 1)``, four factors. Treatment, baseline response and
treatment effect are fixed nonlinear functions of ``f`` and the first five
idiosyncratic coordinates; the population ATE is 5.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy.special import expit

from .data import Dataset
from .numerics import SeededRng

TRUE_ATE = 5.0
ACTIVE_IDIOSYNCRATIC = (0, 1, 2, 3, 4)


@dataclass(frozen=True)
class DgpSpec:
    n: int
    p: int
    r: int = 4
    noise_sd: float = 0.5
    seed: int = 0

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("n must be >= 1")
        if self.r != 4:
            raise ValueError("the benchmark response surfaces use exactly r = 4 factors")
        if self.p < 5:
            # the surfaces read u_1..u_5
            raise ValueError("p must be >= 5")


def sigmoid(x):
    return expit(x)


def trun(z):
    return 0.8 * z + 0.1


def propensity(f: np.ndarray, u: np.ndarray) -> np.ndarray:
    return trun(sigmoid(np.sin(f[:, 0]) + np.tan(f[:, 1]) + f[:, 2] + f[:, 3] + u[:, :5].sum(axis=1)))


def baseline(f: np.ndarray, u: np.ndarray) -> np.ndarray:
    return (10.0 + f[:, 0] + f[:, 1] * f[:, 2] + np.sin(f[:, 3])
            + np.log(5.0 + u[:, 0] + u[:, 1] * u[:, 2]) + np.tan(u[:, 3]) + u[:, 4])


def effect(f: np.ndarray, u: np.ndarray) -> np.ndarray:
    return (5.0 + f[:, 0] + f[:, 1] + np.sin(f[:, 2]) + np.tan(f[:, 3])
            + u[:, 0] + u[:, 1] + np.sin(u[:, 2] + u[:, 3]) + np.tan(u[:, 4]))


@dataclass
class SyntheticDataset:
    X: np.ndarray
    T: np.ndarray
    y: np.ndarray
    f_true: np.ndarray
    u_true: np.ndarray
    B_true: np.ndarray
    mu_star: np.ndarray
    tau_star: np.ndarray
    pi_star: np.ndarray

    @property
    def mu0_star(self) -> np.ndarray:
        return self.mu_star

    @property
    def mu1_star(self) -> np.ndarray:
        return self.mu_star + self.tau_star

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def p(self) -> int:
        return self.X.shape[1]

    def to_dataset(self, oracle: bool = True) -> Dataset:
        if not oracle:
            return Dataset(self.y, self.T, self.X)
        return Dataset(self.y, self.T, self.X, self.pi_star, self.mu0_star, self.mu1_star)


def generate(spec: DgpSpec, rng: Optional[SeededRng] = None, noiseless: bool = False) -> SyntheticDataset:
    """Draw one replication. Loadings are redrawn on every call."""
    rng = rng if rng is not None else SeededRng(spec.seed)
    s3 = np.sqrt(3.0)
    B = rng.uniform(-s3, s3, (spec.p, spec.r))
    f = rng.uniform(-1.0, 1.0, (spec.n, spec.r))
    u = rng.uniform(-1.0, 1.0, (spec.n, spec.p))
    # tan is only evaluated on (-1, 1)
    assert np.abs(f).max() < np.pi / 2 and np.abs(u[:, :5]).max() < np.pi / 2
    X = f @ B.T + u
    pi = propensity(f, u)
    mu = baseline(f, u)
    tau = effect(f, u)
    T = rng.bernoulli(pi)
    eps = np.zeros(spec.n) if noiseless else rng.normal(0.0, spec.noise_sd, spec.n)
    y = mu + T * tau + eps
    return SyntheticDataset(X, T, y, f, u, B, mu, tau, pi)


def _draw_fu(rng: SeededRng, draws: int):
    f = rng.uniform(-1.0, 1.0, (draws, 4))
    u = rng.uniform(-1.0, 1.0, (draws, 5))
    return f, u


def true_ate_mc(spec: DgpSpec, draws: int, tau_fn: Optional[Callable] = None,
                rng: Optional[SeededRng] = None) -> float:
    """Monte Carlo mean of the treatment-effect surface.

    Only the factors and the five active idiosyncratic coordinates enter the
    surfaces, so ``p`` does not affect the cost. ``tau_fn(f, u)`` overrides
    the effect surface.
    """
    if draws < 1:
        raise ValueError("draws must be >= 1")
    rng = rng if rng is not None else SeededRng(spec.seed)
    f, u = _draw_fu(rng, draws)
    tau = (tau_fn or effect)(f, u)
    return float(np.mean(tau))


def efficiency_bound_mc(spec: DgpSpec, draws: int, tau_fn: Optional[Callable] = None,
                        pi_fn: Optional[Callable] = None, rng: Optional[SeededRng] = None,
                        return_se: bool = False):
    """Monte Carlo semiparametric variance bound for this design.

    Averages ``(tau - ATE)^2 + s^2/pi + s^2/(1 - pi)`` with ``s^2`` the noise
    variance and ``ATE`` the population value 5.
    """
    if draws < 1:
        raise ValueError("draws must be >= 1")
    rng = rng if rng is not None else SeededRng(spec.seed)
    f, u = _draw_fu(rng, draws)
    tau = (tau_fn or effect)(f, u)
    pi = (pi_fn or propensity)(f, u)
    s2 = spec.noise_sd ** 2
    terms = (tau - TRUE_ATE) ** 2 + s2 / pi + s2 / (1.0 - pi)
    sigma2 = float(np.mean(terms))
    if return_se:
        return sigma2, float(np.std(terms, ddof=1) / np.sqrt(draws)) if draws > 1 else 0.0
    return sigma2
