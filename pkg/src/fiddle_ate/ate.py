"""AIPW combination of nuisance fits, plug-in inference, and baselines."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import factor, fastnn
from .config import MU0_STREAM, MU1_STREAM, PI_STREAM, SPLIT_STREAM, PipelineConfig
from .data import Dataset
from .numerics import SeededRng, derive_seed

Z95 = 1.96


@dataclass
class NuisanceEstimates:
    mu0_hat: np.ndarray
    mu1_hat: np.ndarray
    pi_hat: np.ndarray
    models: dict = field(default_factory=dict)
    reports: dict = field(default_factory=dict)


@dataclass
class AteResult:
    method: str
    estimate: float
    sigma2_hat: float
    ci_lo: float
    ci_hi: float
    n_used: int
    seed: Optional[int] = None
    config_digest: Optional[str] = None
    meta: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "method": self.method,
            "estimate": self.estimate,
            "sigma2": self.sigma2_hat,
            "ci": [self.ci_lo, self.ci_hi],
            "n": self.n_used,
            "seed": self.seed,
            "config_digest": self.config_digest,
            "meta": self.meta,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2)


def truncate_propensity(pi_raw, n: int) -> np.ndarray:
    """Clamp to ``[1/log n, 1 - 1/log n]`` (natural log)."""
    if n < 2 or 1.0 / math.log(n) >= 0.5:
        raise ValueError(f"n={n} too small: need 1/log(n) < 1/2")
    a = 1.0 / math.log(n)
    return np.clip(np.asarray(pi_raw, dtype=float), a, 1.0 - a)


def _check(y, T, mu0, mu1, pi):
    arrs = [np.asarray(v, dtype=float) for v in (y, T, mu0, mu1, pi)]
    n = arrs[0].shape
    if any(a.shape != n for a in arrs) or len(n) != 1:
        raise ValueError("y, T and nuisance vectors must be 1-D and of equal length")
    if n[0] == 0:
        raise ValueError("no observations")
    if not np.all((arrs[1] == 0) | (arrs[1] == 1)):
        raise ValueError("T must be binary")
    if not np.all((arrs[4] > 0) & (arrs[4] < 1)):
        raise ValueError("propensities must lie strictly inside (0, 1)")
    return arrs


def aipw_terms(y, T, mu0_hat, mu1_hat, pi_hat) -> np.ndarray:
    """Per-observation doubly robust summands; their mean is the estimate."""
    y, T, mu0, mu1, pi = _check(y, T, mu0_hat, mu1_hat, pi_hat)
    return T * y / pi - (1 - T) * y / (1 - pi) - (T - pi) * (mu1 / pi + mu0 / (1 - pi))


def aipw(y, T, mu0_hat, mu1_hat, pi_hat) -> float:
    return float(np.mean(aipw_terms(y, T, mu0_hat, mu1_hat, pi_hat)))


def plugin_variance(y, T, mu0_hat, mu1_hat, pi_hat, estimate: float) -> float:
    """Second moment of the centred summands, the influence-function variance."""
    psi = aipw_terms(y, T, mu0_hat, mu1_hat, pi_hat) - estimate
    return float(np.mean(psi * psi))


def _result(method, terms, meta=None, seed=None, digest=None) -> AteResult:
    n = terms.size
    est = float(np.mean(terms))
    psi = terms - est
    s2 = float(np.mean(psi * psi))
    half = Z95 * math.sqrt(s2 / n)
    return AteResult(method, est, s2, est - half, est + half, n, seed, digest, meta or {})


def oracle_ipw(y, T, pi_star) -> AteResult:
    zeros = np.zeros_like(np.asarray(y, dtype=float))
    return _result("oracle_ipw", aipw_terms(y, T, zeros, zeros, pi_star))


def oracle_aipw(y, T, mu0_star, mu1_star, pi_star) -> AteResult:
    return _result("oracle_aipw", aipw_terms(y, T, mu0_star, mu1_star, pi_star))


def fit_nuisances(dataset: Dataset, config: PipelineConfig):
    """Fit the two outcome networks and the propensity network.

    Returns ``(nuisances, estimation_dataset, meta)``. With ``config.low_dim``
    the pretraining split and factor extraction are skipped and the networks
    read the raw covariates.
    """
    meta: dict = {}
    if config.low_dim:
        est = dataset
        F = None
    else:
        split = factor.split_pretrain(dataset, config.m_pretrain,
                                      SeededRng(derive_seed(config.seed, SPLIT_STREAM)))
        est = split.estimation
        if config.method == "vanilla_nn":
            F = None
        else:
            dp = factor.build_dp_matrix(split.pretrain, config.rbar)
            F = factor.extract_factors(dp, est.X)
            meta["dp_eigvals"] = dp.eigvals.tolist()
        meta["m_pretrain"] = split.m
    n, p = est.n, est.p
    if est.n0 == 0 or est.n1 == 0:
        raise ValueError(f"degenerate treatment assignment after split: n0={est.n0}, n1={est.n1}")

    models, reports, preds = {}, {}, {}
    for t, stream in ((0, MU0_STREAM), (1, MU1_STREAM)):
        cfg = config.network_config(stream, n, p)
        arm = np.flatnonzero(est.T == t)
        model, report = fastnn.train_outcome(est.subset(arm), None if F is None else F[arm], cfg)
        models[f"mu{t}"], reports[f"mu{t}"] = model, report
        preds[t] = fastnn.predict(model, F, est.X)
    cfg = config.network_config(PI_STREAM, n, p)
    model, report = fastnn.train_propensity(est, F, cfg)
    models["pi"], reports["pi"] = model, report
    pi_raw = fastnn.predict(model, F, est.X)
    pi_hat = truncate_propensity(pi_raw, n)

    meta.update(
        penalty=cfg.penalty,
        mode=cfg.mode,
        trunc_levels={k: r.trunc_level for k, r in reports.items()},
        trunc_level_source={k: r.trunc_level_source for k, r in reports.items()},
        final_train_mse={k: r.loss_per_epoch[-1] if r.loss_per_epoch else None
                         for k, r in reports.items()},
        pi_clipped_fraction=float(np.mean(pi_hat != pi_raw)),
    )
    return NuisanceEstimates(preds[0], preds[1], pi_hat, models, reports), est, meta


def fit_fiddle(dataset: Dataset, config: PipelineConfig, return_nuisances: bool = False):
    """Run the configured estimator on one dataset.

    ``config.method`` selects FIDDLE, the Vanilla-NN variant, or one of the
    oracle baselines (which need the oracle columns on ``dataset``).
    """
    digest = config.digest()
    if config.method in ("oracle_ipw", "oracle_aipw"):
        if dataset.pi_star is None:
            raise ValueError(f"{config.method} needs a pi_star column")
        if config.method == "oracle_ipw":
            res = oracle_ipw(dataset.y, dataset.T, dataset.pi_star)
        else:
            if dataset.mu0_star is None or dataset.mu1_star is None:
                raise ValueError("oracle_aipw needs mu0_star and mu1_star columns")
            res = oracle_aipw(dataset.y, dataset.T, dataset.mu0_star, dataset.mu1_star,
                              dataset.pi_star)
        res.seed, res.config_digest = config.seed, digest
        return (res, None) if return_nuisances else res

    nuis, est, meta = fit_nuisances(dataset, config)
    terms = aipw_terms(est.y, est.T, nuis.mu0_hat, nuis.mu1_hat, nuis.pi_hat)
    res = _result(config.method, terms, meta, config.seed, digest)
    return (res, nuis) if return_nuisances else res
