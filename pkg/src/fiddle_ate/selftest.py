"""Fast invariant checks runnable from the command line."""
from __future__ import annotations

import time
from typing import Callable, List, Tuple

import numpy as np

from . import ate, fastnn
from .dgp import DgpSpec, generate, sigmoid, trun
from .numerics import SeededRng, gram_topk, sym_eig_topk


def _formulas():
    assert fastnn.clipped_l1(0.0, 0.005) == 0.0
    assert fastnn.clipped_l1(0.01, 0.005) == 1.0
    assert abs(fastnn.clipped_l1(0.001, 0.005) - 0.2) < 1e-12
    assert fastnn.clipped_l1_subgrad(0.0, 0.005) == 0.0
    assert abs(fastnn.clipped_l1_subgrad(0.001, 0.005) - 200.0) < 1e-9
    assert np.array_equal(fastnn.truncate(np.array([-2.0, 0.5, 2.0]), 1.0), [-1.0, 0.5, 1.0])
    assert sigmoid(0.0) == 0.5 and abs(sigmoid(np.log(3.0)) - 0.75) < 1e-12
    assert abs(trun(0.0) - 0.1) < 1e-12 and abs(trun(1.0) - 0.9) < 1e-12


def _eigen():
    rng = np.random.default_rng(0)
    A = rng.normal(size=(8, 8))
    S = A + A.T
    e = sym_eig_topk(S, 8)
    rec = e.vectors @ np.diag(e.values) @ e.vectors.T
    assert np.linalg.norm(S - rec) <= 1e-8 * np.linalg.norm(S)


def _gram():
    rng = np.random.default_rng(1)
    for _ in range(10):
        m, p = rng.integers(2, 21, size=2)
        X = rng.normal(size=(m, p))
        k = int(min(m, p))
        a = gram_topk(X, k)
        b = sym_eig_topk(X.T @ X / m, k)
        assert np.allclose(a.values, b.values, atol=1e-8 * max(1.0, b.values[0]))


def _gradient():
    rng = SeededRng(7)
    cfg = fastnn.FastNnConfig(depth=2, width=6, theta_init=0.3)
    model = fastnn.init_model(5, 2, cfg, 50.0, rng)
    F, X, y = rng.normal(0, 1, (4, 2)), rng.normal(0, 1, (4, 5)), rng.normal(0, 1, 4)
    g = fastnn.grad(model, F, X, y, 0.0, 0.005).arrays()
    h = 1e-5
    for a, ga in zip(model.params(), g):
        for idx in list(np.ndindex(a.shape))[:5]:
            old = a[idx]
            a[idx] = old + h
            up = fastnn.loss(model, F, X, y, 0.0, 0.005)
            a[idx] = old - h
            dn = fastnn.loss(model, F, X, y, 0.0, 0.005)
            a[idx] = old
            fd = (up - dn) / (2 * h)
            assert abs(fd - ga[idx]) <= 1e-4 * max(1.0, abs(fd)), (fd, ga[idx])


def _doubly_robust():
    syn = generate(DgpSpec(n=400, p=20, seed=3), noiseless=True)
    rng = np.random.default_rng(4)
    for _ in range(5):
        pi = rng.uniform(0.01, 0.99, syn.n)
        est = ate.aipw(syn.y, syn.T, syn.mu0_star, syn.mu1_star, pi)
        target = float(np.mean(syn.tau_star))
        assert abs(est - target) <= 1e-10 * abs(target), (est, target)


CHECKS: List[Tuple[str, Callable]] = [
    ("formula_identities", _formulas),
    ("eigen_reconstruction", _eigen),
    ("gram_equivalence", _gram),
    ("gradient_finite_difference", _gradient),
    ("doubly_robust_identity", _doubly_robust),
]


def run_selftest(stream=None):
    """Run every check; returns ``(all_passed, [(name, ok, seconds, message)])``."""
    report = []
    for name, fn in CHECKS:
        t0 = time.perf_counter()
        try:
            fn()
            ok, msg = True, ""
        except Exception as exc:  # any failure is reported, not raised
            ok, msg = False, f"{type(exc).__name__}: {exc}"
        dt = time.perf_counter() - t0
        report.append((name, ok, dt, msg))
        if stream is not None:
            status = "PASS" if ok else "FAIL"
            print(f"{status} {name} ({dt:.3f}s){' ' + msg if msg else ''}", file=stream)
    return all(r[1] for r in report), report
