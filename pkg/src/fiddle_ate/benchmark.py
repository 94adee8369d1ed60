"""Monte Carlo replication harness over the synthetic benchmark.

Every replication ``k`` uses ``derive_seed(base_seed, k)``; the dataset and the
estimator get separate child streams of that seed, so different methods at
the same ``(n, p, k)`` see the same draw (paired comparison) and results do
not depend on worker scheduling.

RMSE is ``sqrt(mean(e^2))`` over replication errors ``e = estimate - 5``; the
reported SE is the delta-method value ``sd(e^2) / (2 * rmse * sqrt(reps))``.
"""
from __future__ import annotations

import csv
import json
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, replace
from typing import Iterable, List, Sequence, Tuple

import numpy as np

from .ate import fit_fiddle
from .config import PipelineConfig
from .dgp import TRUE_ATE, DgpSpec, generate
from .numerics import SeededRng, derive_seed

DATA_STREAM, ESTIMATOR_STREAM = 0, 1
ROW_FIELDS = ("method", "n", "p", "rmse", "se", "reps", "wallclock")


@dataclass
class BenchmarkRow:
    method: str
    n: int
    p: int
    rmse: float
    se: float
    reps: int
    wallclock: float


def rmse_se(errors: Sequence[float]) -> Tuple[float, float]:
    e2 = np.square(np.asarray(errors, dtype=float))
    rmse = math.sqrt(float(e2.mean()))
    if e2.size < 2 or rmse == 0.0:
        return rmse, 0.0
    return rmse, float(e2.std(ddof=1) / (2.0 * rmse * math.sqrt(e2.size)))


def replication(config: PipelineConfig, n: int, p: int, rep: int, base_seed: int,
                noiseless: bool = False):
    """Run one replication and return ``(estimate, AteResult, seconds)``."""
    rep_seed = derive_seed(base_seed, rep)
    spec = DgpSpec(n=n, p=p, seed=derive_seed(rep_seed, DATA_STREAM))
    data = generate(spec, SeededRng(spec.seed), noiseless=noiseless).to_dataset()
    cfg = replace(config, seed=derive_seed(rep_seed, ESTIMATOR_STREAM))
    t0 = time.perf_counter()
    res = fit_fiddle(data, cfg)
    res.meta["loadings"] = "redrawn per replication"
    return res.estimate, res, time.perf_counter() - t0


def _task(args):
    config, n, p, rep, base_seed, noiseless = args
    est, _, secs = replication(config, n, p, rep, base_seed, noiseless)
    return config.method, n, p, rep, est, secs


def thread_cap() -> int:
    try:
        return max(1, int(os.environ.get("FIDDLE_THREADS", "1")))
    except ValueError:
        return 1


def run_benchmark(config: PipelineConfig, grid: Iterable[Tuple[int, int]], methods: Sequence[str],
                  reps: int, base_seed: int = 0, rep_offset: int = 0, noiseless: bool = False,
                  workers: int = None, return_errors: bool = False):
    """Replicate every ``(n, p, method)`` cell ``reps`` times.

    Replication indices run over ``[rep_offset, rep_offset + reps)`` so disjoint
    seed ranges can be pooled afterwards. ``workers`` defaults to the
    ``FIDDLE_THREADS`` environment variable.
    """
    if reps < 1:
        raise ValueError("reps must be >= 1")
    grid = [tuple(g) for g in grid]
    tasks = [(replace(config, method=m), n, p, rep_offset + k, base_seed, noiseless)
             for (n, p) in grid for m in methods for k in range(reps)]
    workers = workers or thread_cap()
    if workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_task, tasks))
    else:
        results = [_task(t) for t in tasks]

    cells = {}
    for method, n, p, rep, est, secs in results:
        cells.setdefault((n, p, method), []).append((rep, est, secs))
    rows, errors = [], {}
    for (n, p) in grid:
        for m in methods:
            runs = sorted(cells[(n, p, m)])
            errs = [est - TRUE_ATE for _, est, _ in runs]
            rmse, se = rmse_se(errs)
            rows.append(BenchmarkRow(m, n, p, rmse, se, reps, sum(s for _, _, s in runs)))
            errors[(n, p, m)] = errs
    return (rows, errors) if return_errors else rows


def write_rows(rows: List[BenchmarkRow], stem) -> None:
    """Write ``<stem>.csv`` and ``<stem>.json``."""
    with open(f"{stem}.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.DictWriter(fh, fieldnames=ROW_FIELDS)
        w.writeheader()
        for r in rows:
            w.writerow(asdict(r))
    with open(f"{stem}.json", "w", encoding="utf-8") as fh:
        json.dump([asdict(r) for r in rows], fh, indent=2)


def format_table(rows: List[BenchmarkRow]) -> str:
    lines = [f"{'method':<12} {'n':>6} {'p':>6} {'rmse':>9} {'se':>9} {'reps':>5} {'secs':>8}"]
    for r in rows:
        lines.append(f"{r.method:<12} {r.n:>6} {r.p:>6} {r.rmse:>9.4f} {r.se:>9.4f} "
                     f"{r.reps:>5} {r.wallclock:>8.1f}")
    return "\n".join(lines)
