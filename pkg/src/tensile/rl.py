"""Episodic Q-learning on a single seed graph.

Each episode rolls the current network out greedily from every source to the
destination, labels every action available at the visited nodes with a
one-step bootstrapped target, and refits the network to those labels.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .graphs import SpaceGraph
from .oracle import apsp, rewards
from .qnet import Adam, QNetwork, TrainingDivergence, fit
from .ranking import DIST_NS, SampleSet, pair_features, select_schema, state_features

ORACLE_ZETA = "oracle"
FIXED_FACTOR = "fixed"


@dataclass
class RlConfig:
    episodes: int = 20
    iterations: int = 1000
    sources: tuple | None = None
    destination: int | None = None
    gamma: float = 1.0
    C: float = 1.0
    epsilon: float = 0.05
    stretch_mode: str = ORACLE_ZETA
    fixed_factor: float = 1.5
    n_sources: int = 3
    n_destinations: int = 1
    lr: float = 1e-3
    schema: str = DIST_NS

    def __post_init__(self):
        if self.episodes < 1:
            raise ValueError("need at least one episode")
        if self.sources is not None:
            if not self.sources:
                raise ValueError("source set is empty")
            if self.destination in self.sources:
                raise ValueError("destination cannot be a source")
        if self.stretch_mode not in (ORACLE_ZETA, FIXED_FACTOR):
            raise ValueError(f"unknown stretch mode {self.stretch_mode!r}")


def _scores(net, g: SpaceGraph, fs: np.ndarray, v: int, us: np.ndarray) -> np.ndarray:
    return net.predict(select_schema(pair_features(fs, v, us), net.schema))


def rollout_path(net, g: SpaceGraph, O: int, D: int) -> list[int]:
    """Greedy walk under ``net``, never revisiting a node; may stop short of ``D``."""
    if O == D:
        raise ValueError("origin equals destination")
    fs = state_features(g, O, D)
    path, seen, v = [O], {O}, O
    while v != D:
        nb = np.array([u for u in g.neighbors[v] if u not in seen], dtype=int)
        if nb.size == 0:
            break
        s = _scores(net, g, fs, v, nb)
        v = int(nb[np.argmax(s)])  # neighbors ascend by id, so ties go to the lowest
        path.append(v)
        seen.add(v)
    return path


def choose_sources(g: SpaceGraph, D: int, k: int, dsp: np.ndarray) -> tuple:
    """``k`` reachable sources, far from ``D`` and spread apart (farthest-point order)."""
    cand = [w for w in range(g.n) if w != D and np.isfinite(dsp[w, D])]
    if not cand:
        raise ValueError(f"no node reaches destination {D}")
    chosen = [max(cand, key=lambda w: (g.dist[w, D], -w))]
    while len(chosen) < min(k, len(cand)):
        rest = [w for w in cand if w not in chosen]
        chosen.append(max(rest, key=lambda w: (min(g.dist[w, c] for c in chosen + [D]), -w)))
    return tuple(chosen)


def _bootstrap(net, g, fs, nb, D):
    """``max_a' Q(u, a')`` for every ``u`` in ``nb``; zero at ``D`` and at isolated nodes.

    Rewards are never positive, so the estimate is capped at zero.
    """
    boot = np.zeros(nb.size)
    live = [i for i, u in enumerate(nb) if u != D and g.degree(u) > 0]
    if not live:
        return boot
    nbrs = [np.asarray(g.neighbors[nb[i]], dtype=int) for i in live]
    rows = np.concatenate([pair_features(fs, int(nb[i]), a) for i, a in zip(live, nbrs)])
    q = net.predict(select_schema(rows, net.schema))
    starts = np.cumsum([0] + [a.size for a in nbrs[:-1]])
    boot[live] = np.minimum(np.maximum.reduceat(q, starts), 0.0)
    return boot


def choose_destinations(g: SpaceGraph, k: int, dsp: np.ndarray) -> list[int]:
    """``k`` destinations spread over the graph, starting from an end of its longest reachable pair."""
    finite = np.where(np.isfinite(dsp), g.dist, -1.0)
    first = int(np.unravel_index(np.argmax(finite), finite.shape)[1])
    chosen = [first]
    while len(chosen) < min(k, g.n):
        spread = g.dist[:, chosen].min(axis=1)
        spread[chosen] = -1.0
        chosen.append(int(np.argmax(spread)))
    return chosen


def _reward_terms(g, D, dsp, O, cfg):
    """Per-node remaining-distance estimates and the allowed factor for (O, D)."""
    if cfg.stretch_mode == ORACLE_ZETA:
        remaining = dsp[:, D]
        zeta = dsp[O, D] / g.dist[O, D]
    else:
        remaining = g.dist[:, D]
        zeta = cfg.fixed_factor
    return remaining, zeta * (1.0 + cfg.epsilon)


def collect_episode_samples(net, g: SpaceGraph, paths, D: int, cfg: RlConfig, dsp: np.ndarray | None = None) -> SampleSet:
    """Label every action at every visited node with ``r + gamma * max Q(next)``.

    Rewards and targets are in units of the graph radius.  Moving into ``D``
    ends the episode, so that target is the reward alone.
    """
    if dsp is None and cfg.stretch_mode == ORACLE_ZETA:
        dsp = apsp(g)
    R = g.radius
    X, Y, prov = [], [], []
    for path in paths:
        O = path[0]
        fs = state_features(g, O, D)
        remaining, bound = _reward_terms(g, D, dsp, O, cfg)
        for v in path:
            if v == D:
                continue
            nb = np.asarray(g.neighbors[v], dtype=int)
            if nb.size == 0:
                continue
            r = rewards(g.dist[v, nb], remaining[nb], remaining[v], bound, cfg.C) / R
            boot = _bootstrap(net, g, fs, nb, D)
            X.append(select_schema(pair_features(fs, v, nb), cfg.schema))
            Y.append(r + cfg.gamma * boot)
            prov.extend((g.seed, v, int(u), O, D) for u in nb)
    if not X:
        return SampleSet(cfg.schema, np.empty((0, 4 if cfg.schema == DIST_NS else 2)), np.empty(0))
    return SampleSet(cfg.schema, np.concatenate(X), np.concatenate(Y), prov)


@dataclass
class EpisodeRecord:
    episode: int
    mean_td_error: float
    success_rate: float
    mean_path_stretch: float
    samples: int


def _path_length(g, path):
    return float(sum(g.dist[a, b] for a, b in zip(path[:-1], path[1:])))


def train_rl(g: SpaceGraph, cfg: RlConfig | None = None, seed=None, net: QNetwork | None = None):
    """Run the episodic loop; returns ``(net, [EpisodeRecord, ...])``."""
    cfg = cfg or RlConfig()
    dsp = apsp(g)
    if cfg.destination is not None:
        tasks = [(cfg.destination, cfg.sources or choose_sources(g, cfg.destination, cfg.n_sources, dsp))]
    else:
        tasks = [(D, choose_sources(g, D, cfg.n_sources, dsp)) for D in choose_destinations(g, cfg.n_destinations, dsp)]
    net = net.copy() if net is not None else QNetwork.for_schema(cfg.schema, seed=seed, norm=g.radius)
    opt = Adam(lr=cfg.lr)
    history = []
    for ep in range(cfg.episodes):
        parts, ok, stretch = [], 0, []
        for D, sources in tasks:
            paths = [rollout_path(net, g, O, D) for O in sources]
            done = [p for p in paths if p[-1] == D]
            ok += len(done)
            stretch += [_path_length(g, p) / dsp[p[0], D] for p in done]
            parts.append(collect_episode_samples(net, g, paths, D, cfg, dsp))
        data = SampleSet.concat(parts)
        n_paths = sum(len(S) for _, S in tasks)
        td = float(np.mean(np.abs(data.Y - net.predict(data.X)))) if len(data) else 0.0
        if ep == 0 and len(data) and cfg.iterations and hasattr(net, "biases"):
            # start at the target level so the narrow ReLU layer is not driven dead to shift the output
            net.biases[-1] += float(np.mean(data.Y - net.predict(data.X)))
        if len(data) and cfg.iterations:
            try:
                fit(net, data.X, data.Y, cfg.iterations, opt)
            except TrainingDivergence as exc:
                raise TrainingDivergence(ep, "episode") from exc
        history.append(EpisodeRecord(ep, td, ok / n_paths, float(np.mean(stretch)) if stretch else float("nan"),
                                     len(data)))
    net.provenance.update({"mode": "rl", "stretch_mode": cfg.stretch_mode,
                           "tasks": [{"destination": int(D), "sources": [int(o) for o in S]} for D, S in tasks]})
    return net, history


def write_episode_metrics(history, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["episode", "mean_td_error", "rollout_success_rate", "mean_path_stretch", "samples"])
        for h in history:
            w.writerow([h.episode, h.mean_td_error, h.success_rate, h.mean_path_stretch, h.samples])
