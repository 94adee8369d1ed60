"""Observational dataset container and the CSV exchange format.

CSV layout: header ``y,T,x1,...,xp`` optionally followed by the oracle
columns ``pi_star,mu0_star,mu1_star``. Cells are written with 17
significant digits so that a write/read cycle is lossless.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

ORACLE_COLUMNS = ("pi_star", "mu0_star", "mu1_star")


class DataError(ValueError):
    """Malformed input data; the message names the offending row/column."""


@dataclass
class Dataset:
    y: np.ndarray
    T: np.ndarray
    X: np.ndarray
    pi_star: Optional[np.ndarray] = None
    mu0_star: Optional[np.ndarray] = None
    mu1_star: Optional[np.ndarray] = None

    def __post_init__(self):
        self.y = np.asarray(self.y, dtype=float)
        self.T = np.asarray(self.T, dtype=np.int64)
        self.X = np.asarray(self.X, dtype=float)
        if self.X.ndim != 2:
            raise DataError(f"X must be 2-D, got shape {self.X.shape}")
        n = self.X.shape[0]
        if self.y.shape != (n,) or self.T.shape != (n,):
            raise DataError("y, T and X must have the same number of rows")
        if not np.all((self.T == 0) | (self.T == 1)):
            raise DataError("T must be binary")
        for name in ORACLE_COLUMNS:
            v = getattr(self, name)
            if v is not None:
                v = np.asarray(v, dtype=float)
                if v.shape != (n,):
                    raise DataError(f"{name} must have length {n}")
                setattr(self, name, v)

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def p(self) -> int:
        return self.X.shape[1]

    @property
    def n1(self) -> int:
        return int(self.T.sum())

    @property
    def n0(self) -> int:
        return self.n - self.n1

    def subset(self, idx: np.ndarray) -> "Dataset":
        def take(v):
            return None if v is None else v[idx]

        return Dataset(self.y[idx], self.T[idx], self.X[idx],
                       take(self.pi_star), take(self.mu0_star), take(self.mu1_star))


def _fmt(v: float) -> str:
    return format(float(v), ".17g")


def write_csv(dataset: Dataset, path) -> None:
    oracle = [c for c in ORACLE_COLUMNS if getattr(dataset, c) is not None]
    header = ["y", "T"] + [f"x{j + 1}" for j in range(dataset.p)] + oracle
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for i in range(dataset.n):
            row = [_fmt(dataset.y[i]), str(int(dataset.T[i]))]
            row += [_fmt(v) for v in dataset.X[i]]
            row += [_fmt(getattr(dataset, c)[i]) for c in oracle]
            w.writerow(row)


def load_csv(path) -> Dataset:
    path = Path(path)
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise DataError(f"{path}: empty file, expected header y,T,x1,...,xp")
    header = [h.strip() for h in rows[0]]
    if header[:2] != ["y", "T"]:
        raise DataError(f"{path}: header must start with 'y,T', got {','.join(header[:2])!r}")
    xcols = [j for j, h in enumerate(header) if h.startswith("x") and h[1:].isdigit()]
    oracle = {h: j for j, h in enumerate(header) if h in ORACLE_COLUMNS}
    known = set(xcols) | set(oracle.values()) | {0, 1}
    unknown = [header[j] for j in range(len(header)) if j not in known]
    if unknown:
        raise DataError(f"{path}: unrecognised columns {unknown}")
    if not xcols:
        raise DataError(f"{path}: no covariate columns x1..xp")
    expected = [f"x{k + 1}" for k in range(len(xcols))]
    if [header[j] for j in xcols] != expected:
        raise DataError(f"{path}: covariate columns must be x1..x{len(xcols)} in order")

    body = rows[1:]
    if not body:
        raise DataError(f"{path}: no data rows")
    values = np.empty((len(body), len(header)))
    for i, row in enumerate(body, start=2):
        if len(row) != len(header):
            raise DataError(f"{path}: row {i} has {len(row)} cells, expected {len(header)}")
        for j, cell in enumerate(row):
            try:
                v = float(cell)
            except ValueError:
                raise DataError(f"{path}: row {i}, column {header[j]!r}: cannot parse {cell!r}") from None
            if not math.isfinite(v):
                raise DataError(f"{path}: row {i}, column {header[j]!r}: non-finite value {cell!r}")
            values[i - 2, j] = v
    T = values[:, 1]
    bad = np.flatnonzero((T != 0) & (T != 1))
    if bad.size:
        i = int(bad[0])
        raise DataError(f"{path}: row {i + 2}, column 'T': treatment must be 0 or 1, got {body[i][1]!r}")
    kw = {name: values[:, j] for name, j in oracle.items()}
    return Dataset(values[:, 0], T.astype(np.int64), values[:, xcols], **kw)
