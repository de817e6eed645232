"""
Train on one graph, route on many
=================================

A network is fitted to oracle Q values sampled on a single seed graph, then
used as a purely local forwarding rule on unseen graphs of other sizes and
densities.  Accuracy is the share of (O, D) pairs delivered on a
near-shortest path.
"""

from tensile import ExperimentConfig, GreedyForwarding, NeuralQ, TwoLinearAction
from tensile.evaluation import summarize
from tensile.pipeline import evaluate_cells, train_supervised_model

# fewer iterations than the default keep this demo under a minute
cfg = ExperimentConfig(IterNum_S=1500, pairs=32)
net, trace, samples = train_supervised_model(cfg)
print(f"{len(samples)} samples, loss {trace[0]:.4f} -> {trace[-1]:.6f}")

policies = [GreedyForwarding(), TwoLinearAction(), NeuralQ(net, "GT-S")]
cells = [("euclidean", 27, 4.0), ("euclidean", 64, 2.0)]
for (pol, space, n, dens), acc in summarize(evaluate_cells(cfg, policies, cells, count=5)).items():
    print(f"{pol:>10}  n={n:<3} rho={dens:g}  accuracy {acc:.3f}")
