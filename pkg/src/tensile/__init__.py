"""Learned local forwarding for all-pairs near-shortest paths on random geometric graphs."""

from .config import ConfigError, ExperimentConfig, SeedStreams
from .evaluation import EvalReport, apnsp_accuracy
from .graphs import (
    EUCLIDEAN,
    HYPERBOLIC,
    SpaceGraph,
    generate_euclidean,
    generate_hyperbolic,
    load_graph,
    metric_distance,
    save_graph,
)
from .oracle import PairContext, apsp, floyd_warshall, optimal_q, pair_context, reward
from .policies import (
    PUBLISHED_TWO_LINEAR,
    GreedyForwarding,
    NeuralQ,
    OracleShortest,
    SrNodeStretch,
    TwoLinearAction,
    TwoLinearParams,
    choose_forwarder,
    dynamics_run,
    local_view,
    route,
)
from .qnet import QNetwork, TrainConfig, gradient_check, train_supervised
from .ranking import M1, M2, SampleSet, dcg, ranking_similarity, sim_graph, sim_points, sim_v, subsample
from .rl import RlConfig, collect_episode_samples, rollout_path, train_rl
from .symbolic import build_two_plane_net, fit_two_plane, surface_export

__version__ = "0.1.0"
