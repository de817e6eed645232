"""
Learning the same policy without an oracle in the loop
======================================================

Episodic Q-learning: roll the current network out greedily, label every
action seen on the way with a one-step bootstrapped target, refit, repeat.
"""

from tensile import ExperimentConfig, GreedyForwarding, NeuralQ
from tensile.evaluation import summarize
from tensile.pipeline import evaluate_cells, train_rl_model

cfg = ExperimentConfig(EpiNum=6, IterNum_RL=300, rl_destinations=4)
net, history = train_rl_model(cfg)
for h in history:
    print(f"episode {h.episode}: TD error {h.mean_td_error:.4f}, rollouts delivered {h.success_rate:.2f}")

cells = [("euclidean", 64, 5.0)]
for (pol, _, n, dens), acc in summarize(evaluate_cells(cfg, [GreedyForwarding(), NeuralQ(net, "GT-RL")], cells, 5)).items():
    print(f"{pol:>6}  accuracy {acc:.3f}")
