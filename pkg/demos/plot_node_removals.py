"""
Routing while nodes disappear
=============================

Each forwarding decision reads only the current holder's live neighbor list,
so removals mid-route need no repair step.  When greedy forwarding strands,
a depth-first search inside the stretch ellipse finishes the delivery.
"""

import numpy as np

from tensile import GreedyForwarding, apsp, dynamics_run, generate_euclidean, pair_context, route

g = generate_euclidean(64, 5.0, seed=11)
d = apsp(g)
rng = np.random.default_rng(0)
O, D = 0, int(np.argmax(np.where(np.isfinite(d[0]), d[0], -1)))
ctx = pair_context(g, O, D, dsp=d)
plan = route(GreedyForwarding(), g, ctx)
print("planned path:", plan.path)

# drop the planned next hop plus a few random nodes just before hop 1
victims = [plan.path[2]] + rng.choice(g.n, 5, replace=False).tolist()
res = dynamics_run(GreedyForwarding(), g, ctx, {1: victims})
print("delivered:", res.delivered, "path:", res.path)
for event in res.log:
    print("  ", event)
