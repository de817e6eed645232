"""
A learned surface as two linear actions
=======================================

The score surface of a trained network over (d_v, ns_v, d_u, ns_u) is close
to two planes joined at a guard.  fit_two_plane recovers the guard and both
planes from probes; here it is checked on a network built to equal a known
guarded command.
"""

import numpy as np

from tensile import PUBLISHED_TWO_LINEAR, TwoLinearAction
from tensile.symbolic import build_two_plane_net, fit_two_plane, surface_grid

net = build_two_plane_net(PUBLISHED_TWO_LINEAR)
params = fit_two_plane(net)
print("guard  ", np.round(params.guard, 4))
print("branch1", np.round(params.branch1, 4))
print("branch2", np.round(params.branch2, 4))

# one slice of the surface at d_v = 4, ns_v = 1.2: each branch decreases in d_u
ns_u, d_u, Z = surface_grid(TwoLinearAction(), d_v=4.0, ns_v=1.2)
print("z at ns_u=1.2 for d_u = 3.0, 3.5, 4.0, 4.5:",
      np.round(np.interp([3.0, 3.5, 4.0, 4.5], d_u, Z[np.argmin(abs(ns_u - 1.2))]), 4))
