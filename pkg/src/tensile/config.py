"""Experiment configuration and named random streams.

Field names follow the usual symbols for the simulation parameters so that
config files and command-line flags read the same way.
"""

from __future__ import annotations

import dataclasses
import json
import zlib
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .graphs import EUCLIDEAN, HYPERBOLIC


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    # seed graph and test grid
    N_train: int = 50
    rho_train: float = 5.0
    N_test: tuple = (27, 64, 125, 216)
    rho_test: tuple = (2.0, 3.0, 4.0, 5.0)
    delta_test: tuple = (1.0, 2.0, 3.0, 4.0)
    alpha: float = 0.6
    R: float = 1000.0
    space: str = EUCLIDEAN
    # network and training
    Omega: int = 4
    K: int = 2
    N_e: tuple | None = None
    epsilon: float = 0.05
    phi: int | str | None = 3  # "all" (or null) trains on every node
    gamma: float = 1.0
    IterNum_S: int = 5000
    IterNum_RL: int = 1000
    EpiNum: int = 20
    lr: float = 1e-3
    C: float = 1.0
    # sampling knobs
    pairs: int = 64
    seed_candidates: int = 1
    model_candidates: int = 1  # >1: train on that many seed graphs, keep the best on its own graph
    rl_sources: int = 3
    rl_destinations: int = 32
    stretch_mode: str = "oracle"
    fixed_factor: float = 1.5
    # bookkeeping
    seed: int = 0
    graphs_per_cell: int = 20
    out: str = "runs"
    overrides: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if self.phi == "all":
            self.phi = None
        self.validate()

    @property
    def hidden(self) -> list[int]:
        return list(self.N_e) if self.N_e is not None else [50 * self.Omega, self.Omega][: self.K]

    @property
    def widths(self) -> list[int]:
        return [self.Omega, *self.hidden, 1]

    @property
    def schema(self) -> str:
        return {2: "dist", 4: "dist+ns"}[self.Omega]

    def validate(self):
        if self.Omega not in (2, 4):
            raise ConfigError(f"Omega must be 2 or 4, got {self.Omega}")
        if len(self.hidden) != self.K:
            raise ConfigError(f"N_e has {len(self.hidden)} layers but K={self.K}")
        if self.space not in (EUCLIDEAN, HYPERBOLIC):
            raise ConfigError(f"unknown space {self.space!r}")
        if self.phi is not None and self.phi < 1:
            raise ConfigError("phi must be >= 1 or null for all nodes")
        if self.stretch_mode not in ("oracle", "fixed"):
            raise ConfigError(f"unknown stretch_mode {self.stretch_mode!r}")
        for name in ("N_train", "pairs", "graphs_per_cell", "EpiNum", "seed_candidates", "model_candidates", "rl_sources", "rl_destinations"):
            if getattr(self, name) < 0 or (name != "graphs_per_cell" and getattr(self, name) == 0):
                raise ConfigError(f"{name} must be positive")
        if self.IterNum_S < 0 or self.IterNum_RL < 0:
            raise ConfigError("iteration counts must be >= 0")
        if not (self.epsilon >= 0 and self.R > 0 and self.alpha > 0):
            raise ConfigError("epsilon >= 0, R > 0 and alpha > 0 required")

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d.pop("overrides")
        return {k: list(v) if isinstance(v, tuple) else v for k, v in d.items()}

    @classmethod
    def keys(cls) -> list[str]:
        return [f.name for f in dataclasses.fields(cls) if f.name != "overrides"]

    @classmethod
    def from_dict(cls, doc: dict, overrides: dict | None = None) -> "ExperimentConfig":
        unknown = set(doc) - set(cls.keys())
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        merged = dict(doc)
        over = {k: v for k, v in (overrides or {}).items() if v is not None}
        merged.update(over)
        kinds = {f.name: f.default for f in dataclasses.fields(cls)}
        for k, v in merged.items():
            if isinstance(kinds.get(k), tuple) or k == "N_e":
                merged[k] = tuple(v) if v is not None else None
        try:
            cfg = cls(**merged)
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc
        cfg.overrides = over
        return cfg

    @classmethod
    def load(cls, path, overrides=None) -> "ExperimentConfig":
        try:
            doc = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        return cls.from_dict(doc, overrides)


class SeedStreams:
    """Independent generators derived from one master seed, keyed by name."""

    def __init__(self, master: int):
        self.master = int(master)

    def seed(self, name: str) -> int:
        ss = np.random.SeedSequence([self.master, zlib.crc32(name.encode())])
        return int(ss.generate_state(1)[0])

    def rng(self, name: str) -> np.random.Generator:
        return np.random.default_rng(self.seed(name))
