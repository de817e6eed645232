"""
Shortest paths and the optimal action values
============================================

With every shortest-path distance known, the optimal value of forwarding from
v to neighbor u is the immediate (penalised) reward plus the best remaining
path cost from u.  Steps that stay inside the allowed stretch carry no
penalty, so there Q*(v, u) = -(d(v, u) + d_sp(u, D)).
"""

import numpy as np

from tensile import SpaceGraph, apsp, optimal_q, pair_context

# a four-node path with unit spacing: O=0 ... D=3
g = SpaceGraph("euclidean", 1.2, np.array([[0.0, 0.0], [1.0, 0.0], [2.0, 0.0], [3.0, 0.0]]))
ctx = pair_context(g, 0, 3, epsilon=0.05)
table = optimal_q(g, ctx)
print("Q*(0,1) =", table.q(0, 1), " Q*(2,3) =", table.q(2, 3))

# on a random graph, the best neighbor under Q* always lies on a shortest path
from tensile import generate_euclidean

g = generate_euclidean(40, 4.0, seed=2)
d = apsp(g)
O, D = 0, int(np.nanargmax(np.where(np.isfinite(d[0]), d[0], np.nan)))
table = optimal_q(g, pair_context(g, O, D, dsp=d), dsp=d)
print(f"pair ({O}, {D}): d_sp = {d[O, D]:.1f}, stretch zeta = {table.ctx.zeta:.3f}")
for v in g.neighbors[O]:
    print(f"  Q*({O},{v}) = {table.qstar[O, v]:9.1f}")
