"""
How well does a local metric rank neighbors?
============================================

A local metric scores each neighbor from distances and node stretch only.
Its ranking is compared to the optimal ranking with a discounted cumulative
gain ratio: 1 means identical order.
"""

import numpy as np

from tensile import M1, M2, generate_euclidean, ranking_similarity, sim_graph, sim_points

# a small worked example: five items, relevance (L - i + 1)^2 for the ideal order
print("similarity:", round(ranking_similarity([4, 1, 3, 2, 5], [1, 2, 4, 5, 6], tau=3), 3))

# distance-to-destination (m1) and a mix of distance and node stretch (m2)
graphs = [generate_euclidean(50, 5.0, seed=s) for s in range(5)]
for name, metric in (("m1", M1), ("m2", M2)):
    sims = [sim_graph(g, metric) for g in graphs]
    pts = np.concatenate([sim_points(g, metric) for g in graphs])
    print(f"{name}: mean graph similarity {np.mean(sims):.4f}, points >= 0.9: {np.mean(pts >= 0.9):.4f}")
