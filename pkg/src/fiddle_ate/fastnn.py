"""Factor-augmented sparse-throughput ReLU networks (FAST-NN).

The network reads the concatenation of the factor scores and a truncated
sparse projection of the raw covariates,

    pred = Tr_M( g([f, Tr_M(Theta.T x)]) ),

where ``g`` is a depth-``L`` width-``N`` ReLU MLP and ``Theta`` (p x N) carries a
clipped-L1 penalty that drives unused covariate rows to zero. In ``raw`` mode
the network is a plain MLP on ``x`` with no ``Theta`` (and optionally an L2
weight penalty, which is the Vanilla-NN baseline).

Gradients are computed by hand; see :func:`grad`.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from typing import List, Optional

import numpy as np

from .numerics import SeededRng, derive_seed

FACTOR_AUGMENTED = "factor_augmented"
RAW = "raw"
MODEL_FORMAT_VERSION = 1


@dataclass
class FastNnConfig:
    depth: int = 4
    width: int = 400
    rbar: int = 10
    trunc_level: Optional[float] = None  # None: 1.2 * max|y| for outcomes, 1 for propensity
    clip_tau: float = 0.005
    penalty: float = 0.0
    l2: float = 0.0
    learning_rate: float = 1e-3
    epochs: int = 100
    batch_size: int = 64
    seed: int = 0
    mode: str = FACTOR_AUGMENTED
    theta_init: float = 0.0
    straight_through: bool = False

    def __post_init__(self):
        if self.depth < 1 or self.width < 1:
            raise ValueError("depth and width must be >= 1")
        if self.clip_tau <= 0:
            raise ValueError("clip_tau must be > 0")
        if self.penalty < 0 or self.l2 < 0:
            raise ValueError("penalty weights must be >= 0")
        if self.trunc_level is not None and self.trunc_level <= 0:
            raise ValueError("trunc_level must be > 0")
        if self.batch_size < 1 or self.epochs < 0 or self.learning_rate < 0:
            raise ValueError("invalid optimisation settings")
        if self.mode not in (FACTOR_AUGMENTED, RAW):
            raise ValueError(f"unknown mode {self.mode!r}")


@dataclass
class FastNnModel:
    """Weights are stored ``(out, in)``; ``theta`` is ``None`` in raw mode."""

    weights: List[np.ndarray]
    biases: List[np.ndarray]
    trunc_level: float
    theta: Optional[np.ndarray] = None

    @property
    def mode(self) -> str:
        return RAW if self.theta is None else FACTOR_AUGMENTED

    @property
    def depth(self) -> int:
        return len(self.weights) - 1

    def params(self) -> List[np.ndarray]:
        head = [] if self.theta is None else [self.theta]
        return head + list(self.weights) + list(self.biases)

    def copy(self) -> "FastNnModel":
        return FastNnModel([w.copy() for w in self.weights], [b.copy() for b in self.biases],
                           self.trunc_level, None if self.theta is None else self.theta.copy())

    def max_abs_weight(self) -> float:
        return max(float(np.abs(a).max()) for a in self.params() if a.size)


@dataclass
class Gradient:
    weights: List[np.ndarray]
    biases: List[np.ndarray]
    theta: Optional[np.ndarray] = None

    def arrays(self) -> List[np.ndarray]:
        head = [] if self.theta is None else [self.theta]
        return head + list(self.weights) + list(self.biases)


@dataclass
class TrainReport:
    loss_per_epoch: List[float] = field(default_factory=list)
    penalty_final: float = 0.0
    steps: int = 0
    trunc_level: float = 0.0
    trunc_level_source: str = "config"


# ---------------------------------------------------------------------------
# scalar pieces

def clipped_l1(x, tau: float):
    """``min(|x| / tau, 1)``, elementwise."""
    if tau <= 0:
        raise ValueError("tau must be > 0")
    return np.minimum(np.abs(x) / tau, 1.0)


def clipped_l1_subgrad(x, tau: float):
    """``sign(x)/tau`` on ``0 < |x| < tau``, zero elsewhere (including 0)."""
    if tau <= 0:
        raise ValueError("tau must be > 0")
    x = np.asarray(x, dtype=float)
    g = (1.0 / tau) * np.sign(x) * (np.abs(x) < tau)
    return g if g.ndim else float(g)


def truncate(v, M: float):
    if M <= 0:
        raise ValueError("truncation level must be > 0")
    return np.clip(v, -M, M)


# ---------------------------------------------------------------------------
# construction

def init_model(p: int, rbar: int, config: FastNnConfig, trunc_level: float,
               rng: SeededRng) -> FastNnModel:
    """Fan-in scaled uniform weights ``U(-sqrt(6/fan_in), sqrt(6/fan_in))``, zero biases.

    ``Theta`` is drawn from ``U(-theta_init, theta_init)``; the default 0 starts
    every entry inside the clipped-L1 region so that a covariate enters only
    once its data gradient outweighs the penalty.
    """
    N, L = config.width, config.depth

    def uniform(rows, cols, fan_in):
        a = math.sqrt(6.0 / fan_in)
        return rng.uniform(-a, a, (rows, cols))

    if config.mode == FACTOR_AUGMENTED:
        theta = (rng.uniform(-config.theta_init, config.theta_init, (p, N))
                 if config.theta_init > 0 else np.zeros((p, N)))
        d_in = rbar + N
    else:
        theta = None
        d_in = p
    weights = [uniform(N, d_in, d_in)]
    weights += [uniform(N, N, N) for _ in range(L - 1)]
    weights.append(uniform(1, N, N))
    biases = [np.zeros(N) for _ in range(L)] + [np.zeros(1)]
    return FastNnModel(weights, biases, float(trunc_level), theta)


# ---------------------------------------------------------------------------
# forward / loss / gradient

def _network_input(model: FastNnModel, F, X):
    X = np.asarray(X, dtype=float)
    if model.theta is None:
        return X, None
    F = np.asarray(F, dtype=float)
    if X.shape[1] != model.theta.shape[0]:
        raise ValueError(f"x has {X.shape[1]} columns, Theta expects {model.theta.shape[0]}")
    if F.shape[0] != X.shape[0]:
        raise ValueError("factor scores and covariates have different row counts")
    z = X @ model.theta
    h0 = np.concatenate([F, np.clip(z, -model.trunc_level, model.trunc_level)], axis=1)
    return h0, z


def _forward(model: FastNnModel, F, X):
    h, z = _network_input(model, F, X)
    if h.shape[1] != model.weights[0].shape[1]:
        raise ValueError(f"network input has {h.shape[1]} features, first layer expects "
                         f"{model.weights[0].shape[1]}")
    acts = [h]
    for W, b in zip(model.weights[:-1], model.biases[:-1]):
        h = np.maximum(h @ W.T + b, 0.0)
        acts.append(h)
    out = (h @ model.weights[-1].T + model.biases[-1])[:, 0]
    return out, acts, z


def predict(model: FastNnModel, F, X) -> np.ndarray:
    """Batched predictions for rows of ``F`` (factor scores) and ``X``."""
    out, _, _ = _forward(model, F, X)
    return np.clip(out, -model.trunc_level, model.trunc_level)


def forward(model: FastNnModel, f, x) -> float:
    F = None if f is None else np.atleast_2d(np.asarray(f, dtype=float))
    if F is not None and F.size == 0:
        F = F.reshape(1, 0)
    return float(predict(model, F, np.atleast_2d(np.asarray(x, dtype=float)))[0])


def penalty_value(model: FastNnModel, lam: float, tau: float, l2: float = 0.0) -> float:
    total = 0.0
    if model.theta is not None and lam:
        total += lam * float(np.sum(clipped_l1(model.theta, tau)))
    if l2:
        total += l2 * sum(float(np.sum(W * W)) for W in model.weights)
    return total


def loss(model: FastNnModel, F, X, y, lam: float, tau: float, l2: float = 0.0) -> float:
    """Mean squared residual over the batch plus the un-averaged penalties."""
    y = np.asarray(y, dtype=float)
    if y.size == 0:
        raise ValueError("empty batch")
    pred = predict(model, F, X)
    return float(np.mean((pred - y) ** 2)) + penalty_value(model, lam, tau, l2)


def grad(model: FastNnModel, F, X, y, lam: float, tau: float, l2: float = 0.0) -> Gradient:
    """Gradient of :func:`loss`.

    ReLU kinks and the outer/inner truncation boundaries use the interior
    branch at ties (ReLU: 0 at a == 0; truncation: pass-through at |z| == M).
    The clipped-L1 term contributes :func:`clipped_l1_subgrad`.
    """
    return _grad_sse(model, F, X, y, lam, tau, l2)[0]


def _grad_sse(model, F, X, y, lam, tau, l2, straight_through=False):
    y = np.asarray(y, dtype=float)
    n = y.size
    if n == 0:
        raise ValueError("empty batch")
    M = model.trunc_level
    out, acts, z = _forward(model, F, X)
    resid = np.clip(out, -M, M) - y
    g = (2.0 / n) * resid if straight_through else (2.0 / n) * resid * (np.abs(out) <= M)

    gw: List[np.ndarray] = [None] * len(model.weights)
    gb: List[np.ndarray] = [None] * len(model.biases)
    gw[-1] = g[None, :] @ acts[-1]
    gb[-1] = np.array([g.sum()])
    gh = np.outer(g, model.weights[-1][0])
    for layer in range(len(model.weights) - 2, -1, -1):
        ga = gh * (acts[layer + 1] > 0)
        gw[layer] = ga.T @ acts[layer]
        gb[layer] = ga.sum(axis=0)
        if layer > 0 or model.theta is not None:
            gh = ga @ model.weights[layer]
    if l2:
        for k, W in enumerate(model.weights):
            gw[k] = gw[k] + 2.0 * l2 * W

    gtheta = None
    if model.theta is not None:
        r = gh.shape[1] - model.theta.shape[1]
        gs = gh[:, r:] * (np.abs(z) <= M)
        gtheta = np.asarray(X, dtype=float).T @ gs
        if lam:
            gtheta += lam * clipped_l1_subgrad(model.theta, tau)
    return Gradient(gw, gb, gtheta), float(resid @ resid)


# ---------------------------------------------------------------------------
# optimiser

@dataclass
class AdamState:
    m: List[np.ndarray]
    v: List[np.ndarray]
    t: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def zeros_like(cls, params: List[np.ndarray]) -> "AdamState":
        return cls([np.zeros_like(a) for a in params], [np.zeros_like(a) for a in params])


def adam_step(state: AdamState, params: List[np.ndarray], grads: List[np.ndarray],
              lr: float) -> List[np.ndarray]:
    """One bias-corrected Adam update, applied to ``params`` in place."""
    state.t += 1
    b1, b2 = state.beta1, state.beta2
    c1 = 1.0 - b1 ** state.t
    c2 = 1.0 - b2 ** state.t
    step = lr / c1
    for a, g, m, v in zip(params, grads, state.m, state.v):
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * (g * g)
        a -= step * m / (np.sqrt(v / c2) + state.eps)
    return params


# ---------------------------------------------------------------------------
# training

def _fit(F, X, y, config: FastNnConfig, trunc_level: float) -> tuple:
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    n, p = X.shape
    rbar = 0 if F is None else F.shape[1]
    init_rng = SeededRng(derive_seed(config.seed, 0))
    shuffle_rng = SeededRng(derive_seed(config.seed, 1))
    model = _flatten(init_model(p, rbar, config, trunc_level, init_rng))
    flat = model.flat
    state = AdamState.zeros_like([flat])
    report = TrainReport(trunc_level=trunc_level)
    bs = config.batch_size
    for _ in range(config.epochs):
        order = shuffle_rng.permutation(n)
        sq, seen = 0.0, 0
        for start in range(0, n, bs):
            idx = order[start:start + bs]
            Fb = None if F is None else F[idx]
            g, sse = _grad_sse(model, Fb, X[idx], y[idx], config.penalty, config.clip_tau, config.l2,
                                config.straight_through)
            adam_step(state, [flat], [np.concatenate([a.ravel() for a in g.arrays()])],
                      config.learning_rate)
            report.steps += 1
            sq += sse
            seen += idx.size
        # running mean over the epoch, each batch scored before its update
        report.loss_per_epoch.append(sq / seen)
    report.penalty_final = (float(np.sum(clipped_l1(model.theta, config.clip_tau)))
                            if model.theta is not None else 0.0)
    return model.copy(), report


def _flatten(model: FastNnModel) -> FastNnModel:
    """Copy of ``model`` whose arrays are views into one contiguous buffer ``model.flat``."""
    arrays = model.params()
    flat = np.concatenate([a.ravel() for a in arrays])
    views, pos = [], 0
    for a in arrays:
        views.append(flat[pos:pos + a.size].reshape(a.shape))
        pos += a.size
    k = 0 if model.theta is None else 1
    L = len(model.weights)
    out = FastNnModel(views[k:k + L], views[k + L:], model.trunc_level, views[0] if k else None)
    out.flat = flat
    return out


def _inputs(scores, X, config: FastNnConfig):
    if config.mode == RAW:
        return None
    if scores is None:
        raise ValueError("factor-augmented mode needs factor scores")
    F = np.asarray(scores, dtype=float)
    if F.ndim != 2 or F.shape[0] != np.shape(X)[0]:
        raise ValueError("factor scores must be an n x rbar array aligned with X")
    return F


def train_outcome(subset, scores, config: FastNnConfig):
    """Fit one outcome regression on rows sharing a treatment arm.

    ``subset`` is a :class:`~fiddle_ate.data.Dataset` already restricted to
    ``T == t`` and ``scores`` the matching factor-score rows.
    """
    if subset.n == 0:
        raise ValueError("no observations in this treatment arm; assignment is degenerate")
    if config.trunc_level is None:
        M, source = max(1.2 * float(np.abs(subset.y).max()), 1.0), "data:1.2*max|y|"
    else:
        M, source = float(config.trunc_level), "config"
    model, report = _fit(_inputs(scores, subset.X, config), subset.X, subset.y, config, M)
    report.trunc_level_source = source
    return model, report


def train_propensity(dataset, scores, config: FastNnConfig):
    """Squared-loss regression of ``T`` on the covariates; output is unconstrained."""
    if dataset.n1 == 0 or dataset.n0 == 0:
        raise ValueError("propensity fit needs both treated and control observations")
    if config.trunc_level is None:
        M, source = 1.0, "default:1"
    else:
        M, source = float(config.trunc_level), "config"
    model, report = _fit(_inputs(scores, dataset.X, config), dataset.X,
                         dataset.T.astype(float), config, M)
    report.trunc_level_source = source
    return model, report


def selected_variables(model: FastNnModel, threshold: float) -> np.ndarray:
    """Covariate indices whose ``Theta`` row has an entry above ``threshold`` in magnitude."""
    if model.theta is None:
        raise ValueError("raw-mode networks have no selection matrix")
    return np.flatnonzero(np.abs(model.theta).max(axis=1) > threshold)


# ---------------------------------------------------------------------------
# serialisation

def model_to_dict(model: FastNnModel) -> dict:
    def enc(a):
        return {"shape": list(a.shape), "data": a.ravel().tolist()}

    return {
        "format": "fastnn",
        "version": MODEL_FORMAT_VERSION,
        "mode": model.mode,
        "trunc_level": model.trunc_level,
        "theta": None if model.theta is None else enc(model.theta),
        "weights": [enc(w) for w in model.weights],
        "biases": [enc(b) for b in model.biases],
    }


def model_from_dict(blob: dict) -> FastNnModel:
    if blob.get("format") != "fastnn" or blob.get("version") != MODEL_FORMAT_VERSION:
        raise ValueError("unsupported model blob")

    def dec(d):
        return np.asarray(d["data"], dtype=float).reshape(d["shape"])

    theta = None if blob["theta"] is None else dec(blob["theta"])
    return FastNnModel([dec(w) for w in blob["weights"]], [dec(b) for b in blob["biases"]],
                       float(blob["trunc_level"]), theta)


def save_model(model: FastNnModel, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(model_to_dict(model), fh)


def load_model(path) -> FastNnModel:
    with open(path, encoding="utf-8") as fh:
        return model_from_dict(json.load(fh))


def config_dict(config: FastNnConfig) -> dict:
    return asdict(config)
