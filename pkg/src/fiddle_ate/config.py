"""Pipeline configuration, presets and reproducibility digests."""
from __future__ import annotations

import hashlib
import json
import math
from dataclasses import asdict, dataclass, field, fields, replace
from typing import List, Optional, Tuple

from .fastnn import FACTOR_AUGMENTED, RAW, FastNnConfig
from .numerics import derive_seed

METHODS = ("fiddle", "vanilla_nn", "oracle_ipw", "oracle_aipw")

# network slots inside one pipeline run; each gets its own seed stream
SPLIT_STREAM, MU0_STREAM, MU1_STREAM, PI_STREAM = 0, 1, 2, 3


@dataclass
class PipelineConfig:
    method: str = "fiddle"
    m_pretrain: int = 50
    rbar: int = 10
    depth: int = 4
    width: int = 400
    learning_rate: float = 1e-3
    epochs: int = 100
    batch_size: int = 64
    clip_tau: float = 0.005
    penalty: Optional[float] = None  # None: penalty_coef * log(p) / n
    penalty_coef: float = 1.3
    vanilla_l2: float = 1.0
    trunc_level: Optional[float] = None
    low_dim: bool = False
    seed: int = 0
    reps: int = 1
    grid: List[Tuple[int, int]] = field(default_factory=list)
    preset: Optional[str] = None

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}; choose from {', '.join(METHODS)}")
        if self.reps < 1:
            raise ValueError("reps must be >= 1")
        self.grid = [tuple(int(v) for v in g) for g in self.grid]

    def penalty_for(self, n: int, p: int) -> float:
        if self.penalty is not None:
            return float(self.penalty)
        return self.penalty_coef * math.log(p) / n

    def network_config(self, stream: int, n: int, p: int) -> FastNnConfig:
        raw = self.method == "vanilla_nn" or self.low_dim
        return FastNnConfig(
            depth=self.depth,
            width=self.width,
            rbar=self.rbar,
            trunc_level=self.trunc_level,
            clip_tau=self.clip_tau,
            penalty=0.0 if raw else self.penalty_for(n, p),
            l2=self.vanilla_l2 if self.method == "vanilla_nn" else 0.0,
            learning_rate=self.learning_rate,
            epochs=self.epochs,
            batch_size=self.batch_size,
            seed=derive_seed(self.seed, stream),
            mode=RAW if raw else FACTOR_AUGMENTED,
        )

    def to_dict(self) -> dict:
        d = asdict(self)
        d["grid"] = [list(g) for g in self.grid]
        return d

    def digest(self) -> str:
        """Hash of every field except the seed, so reruns can be matched exactly."""
        d = self.to_dict()
        d.pop("seed")
        d.pop("reps")
        d.pop("grid")
        blob = json.dumps(d, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]


PRESETS = {
    # full-size settings
    "paper": dict(width=400, epochs=100, reps=100, depth=4, batch_size=64, m_pretrain=50, rbar=10),
    # narrower and shorter so a 20-rep benchmark fits a laptop budget
    "desk": dict(width=128, epochs=60, reps=20, depth=4, batch_size=64, m_pretrain=50, rbar=10),
}


def preset(name: str, **overrides) -> PipelineConfig:
    if name not in PRESETS:
        raise ValueError(f"unknown preset {name!r}; choose from {', '.join(PRESETS)}")
    return PipelineConfig(**{**PRESETS[name], "preset": name, **overrides})


def from_dict(d: dict) -> PipelineConfig:
    known = {f.name for f in fields(PipelineConfig)}
    unknown = set(d) - known
    if unknown:
        raise ValueError(f"unknown config keys: {sorted(unknown)}")
    base = preset(d["preset"]) if d.get("preset") else PipelineConfig()
    return replace(base, **d)
