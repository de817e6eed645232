"""
Seeded graphs in the plane and in the hyperbolic disk
=====================================================

Nodes scattered uniformly in a square connect when they lie within the radio
radius R.  Hyperbolic graphs place nodes in a disk with a power-law radial
density and calibrate the connection radius to hit a target mean degree.
"""

import numpy as np

from tensile import generate_euclidean, generate_hyperbolic

# the square side is chosen so that n * R^2 / side^2 equals the density rho
g = generate_euclidean(50, 5.0, R=1000.0, seed=3)
print(f"side {g.side:.1f}, mean degree {g.mean_degree():.2f}, isolated {sum(g.degree(v) == 0 for v in range(g.n))}")

# the same seed always gives the same graph
assert generate_euclidean(50, 5.0, R=1000.0, seed=3) == g

# hyperbolic graphs: coordinates are (r, theta); the radius is found by root finding
h = generate_hyperbolic(64, 3.0, alpha=0.6, seed=1)
print(f"disk radius {h.disk_radius:.3f}, connection radius {h.radius:.3f}, mean degree {h.mean_degree():.3f}")

# degrees are heavy-tailed in the hyperbolic model
deg = np.array([h.degree(v) for v in range(h.n)])
print("hyperbolic degree quantiles (50/90/100%):", np.percentile(deg, [50, 90, 100]))
