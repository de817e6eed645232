"""End-to-end experiment steps driven by an :class:`ExperimentConfig`.

Every random choice draws from a named stream of the master seed, so any
step can be re-run on its own and give the same result.
"""

from __future__ import annotations

import logging

from .config import ExperimentConfig, SeedStreams
from .evaluation import apnsp_accuracy
from .graphs import EUCLIDEAN, HYPERBOLIC, SpaceGraph, generate_euclidean, generate_hyperbolic
from .oracle import apsp
from .policies import GreedyForwarding, NeuralQ, SrNodeStretch, TwoLinearAction
from .qnet import QNetwork, TrainConfig, train_supervised
from .ranking import DIST, M1, M2, SampleSet, choose_pair, select_seed_graph, subsample
from .rl import RlConfig, train_rl

log = logging.getLogger(__name__)


def make_cell_graph(cfg: ExperimentConfig, space: str, n: int, density: float, seed: int) -> SpaceGraph:
    if space == EUCLIDEAN:
        return generate_euclidean(n, density, cfg.R, seed)
    if space == HYPERBOLIC:
        return generate_hyperbolic(n, density, cfg.alpha, seed=seed)
    raise ValueError(f"unknown space {space!r}")


def cell_seeds(cfg: ExperimentConfig, space: str, n: int, density: float, count: int | None = None) -> list[int]:
    streams = SeedStreams(cfg.seed)
    count = cfg.graphs_per_cell if count is None else count
    return [streams.seed(f"graph/{space}/{n}/{float(density)}/{i}") for i in range(count)]


def cell_graphs(cfg: ExperimentConfig, space: str, n: int, density: float, count: int | None = None):
    return [make_cell_graph(cfg, space, n, density, s) for s in cell_seeds(cfg, space, n, density, count)]


def default_cells(cfg: ExperimentConfig) -> list[tuple[str, int, float]]:
    dens = cfg.delta_test if cfg.space == HYPERBOLIC else cfg.rho_test
    return [(cfg.space, n, float(d)) for n in cfg.N_test for d in dens]


def metric_for(schema: str):
    return M1 if schema == DIST else M2


def seed_graph(cfg: ExperimentConfig, schema: str | None = None) -> SpaceGraph:
    """The training graph, in ``cfg.space``; with several candidates, the one whose SIM_G is highest.

    In hyperbolic space ``rho_train`` is read as the target mean degree.
    """
    streams = SeedStreams(cfg.seed)
    seeds = [streams.seed(f"seed-graph/{i}") for i in range(cfg.seed_candidates)]
    graphs = [make_cell_graph(cfg, cfg.space, cfg.N_train, cfg.rho_train, s) for s in seeds]
    if len(graphs) == 1:
        return graphs[0]
    return select_seed_graph(graphs, metric_for(schema or cfg.schema), 1, cfg.epsilon, cfg.C)[0][1]


def supervised_samples(cfg: ExperimentConfig, g: SpaceGraph, schema: str, phi=None, pairs: int | None = None,
                       rng=None, dsp=None) -> SampleSet:
    """Oracle-labelled samples from ``pairs`` far-apart (O, D) pairs of ``g``."""
    phi = cfg.phi if phi is None else (None if phi == "all" else phi)
    pairs = cfg.pairs if pairs is None else pairs
    rng = rng if rng is not None else SeedStreams(cfg.seed).rng("pairs")
    dsp = apsp(g) if dsp is None else dsp
    metric = metric_for(schema)
    sets = [subsample(g, *choose_pair(g, rng, dsp), phi, metric, schema=schema, dsp=dsp, epsilon=cfg.epsilon, C=cfg.C)
            for _ in range(pairs)]
    return SampleSet.concat(sets)


def train_supervised_model(cfg: ExperimentConfig, schema: str | None = None, phi=None, g: SpaceGraph | None = None):
    """Returns ``(net, loss_trace, samples)``.

    With ``cfg.model_candidates > 1`` (and no ``g``) one model is trained per
    candidate seed graph and the one most accurate on its own graph is kept.
    """
    schema = schema or cfg.schema
    if g is None and cfg.model_candidates > 1:
        return select_supervised_model(cfg, schema, phi)
    streams = SeedStreams(cfg.seed)
    g = g or seed_graph(cfg, schema)
    samples = supervised_samples(cfg, g, schema, phi)
    omega = 2 if schema == DIST else 4
    widths = [omega, *(cfg.hidden if cfg.Omega == omega else [50 * omega, omega]), 1]
    net = QNetwork(widths, seed=streams.seed(f"init/{schema}"), schema=schema, norm=cfg.R)
    net, trace = train_supervised(net, samples, TrainConfig(cfg.IterNum_S, cfg.lr))
    net.provenance.update({"mode": "supervised", "seed_graph": g.seed, "phi": phi or cfg.phi, "pairs": cfg.pairs,
                           "samples": len(samples)})
    return net, trace, samples


def select_supervised_model(cfg: ExperimentConfig, schema: str, phi=None):
    """Train on each ``seed-graph/i`` stream graph; keep the model with the best training-graph accuracy."""
    streams = SeedStreams(cfg.seed)
    best = None
    for i in range(cfg.model_candidates):
        g = make_cell_graph(cfg, cfg.space, cfg.N_train, cfg.rho_train, streams.seed(f"seed-graph/{i}"))
        net, trace, samples = train_supervised_model(cfg, schema, phi, g)
        own = apnsp_accuracy(NeuralQ(net), g, cfg.epsilon).accuracy
        log.info("candidate %d seed graph %d: own accuracy %.4f", i, g.seed, own)
        if best is None or own > best[0]:
            best = (own, net, trace, samples)
    own, net, trace, samples = best
    net.provenance["own_accuracy"] = own
    return net, trace, samples


def rl_config(cfg: ExperimentConfig) -> RlConfig:
    return RlConfig(episodes=cfg.EpiNum, iterations=cfg.IterNum_RL, gamma=cfg.gamma, C=cfg.C, epsilon=cfg.epsilon,
                    stretch_mode=cfg.stretch_mode, fixed_factor=cfg.fixed_factor, n_sources=cfg.rl_sources,
                    n_destinations=cfg.rl_destinations, lr=cfg.lr, schema=cfg.schema)


def train_rl_model(cfg: ExperimentConfig, g: SpaceGraph | None = None):
    """Returns ``(net, episode_history)``."""
    streams = SeedStreams(cfg.seed)
    g = g or seed_graph(cfg)
    net = QNetwork(cfg.widths, seed=streams.seed(f"init/rl/{cfg.schema}"), schema=cfg.schema, norm=cfg.R)
    net, hist = train_rl(g, rl_config(cfg), net=net)
    net.provenance["seed_graph"] = g.seed
    return net, hist


def baseline_policies():
    return {"GF": GreedyForwarding(), "SR-NS": SrNodeStretch(), "TwoLinear": TwoLinearAction()}


def evaluate_cells(cfg: ExperimentConfig, policies, cells=None, count=None, fallback=None):
    """Every policy on every graph of every cell; returns a flat list of reports."""
    reports = []
    for space, n, dens in cells or default_cells(cfg):
        for g in cell_graphs(cfg, space, n, dens, count):
            dsp = apsp(g)
            for p in policies:
                reports.append(apnsp_accuracy(p, g, cfg.epsilon, dsp=dsp, fallback=fallback))
            log.info("evaluated %s n=%d density=%s seed=%d", space, n, dens, g.seed)
    return reports


def as_policy(obj, name=None):
    if isinstance(obj, QNetwork):
        return NeuralQ(obj, name or obj.provenance.get("name", "GT"))
    return obj
