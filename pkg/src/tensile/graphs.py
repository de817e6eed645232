"""Random geometric graphs in the Euclidean and hyperbolic planes.

Nodes are dropped uniformly at random (Euclidean square, or the hyperbolic
disk with the usual quasi-uniform radial density) and joined whenever their
metric distance is at most the communication radius.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

EUCLIDEAN = "euclidean"
HYPERBOLIC = "hyperbolic"

GRAPH_FORMAT = "tensile-graph/1"


class ParameterError(ValueError):
    """Invalid generation parameter."""


class CalibrationError(RuntimeError):
    """The requested mean degree cannot be bracketed."""


def euclidean_side(n: int, rho: float, R: float) -> float:
    """Side length of the square holding ``n`` nodes at ``rho`` nodes per R^2."""
    return math.sqrt(n * R * R / rho)


def pairwise_euclidean(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    d = a[:, None, :] - b[None, :, :]
    return np.hypot(d[..., 0], d[..., 1])


def pairwise_hyperbolic(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Hyperbolic distance (curvature -1) between polar points ``(r, theta)``.

    Uses the half-angle form of the law of cosines, which stays accurate for
    nearby points far from the origin.
    """
    r1 = a[:, None, 0]
    r2 = b[None, :, 0]
    dtheta = np.abs(a[:, None, 1] - b[None, :, 1]) % (2 * np.pi)
    dtheta = np.minimum(dtheta, 2 * np.pi - dtheta)
    x = 2.0 * np.sinh((r1 - r2) / 2.0) ** 2 + 2.0 * np.sinh(r1) * np.sinh(r2) * np.sin(dtheta / 2.0) ** 2
    return np.log1p(x + np.sqrt(x) * np.sqrt(x + 2.0))


def _pairwise(space: str, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    if space == EUCLIDEAN:
        return pairwise_euclidean(a, b)
    return pairwise_hyperbolic(a, b)


def _adjacency(dist: np.ndarray, radius: float) -> tuple[np.ndarray, ...]:
    n = dist.shape[0]
    close = dist <= radius
    np.fill_diagonal(close, False)
    out = []
    for v in range(n):
        nb = np.flatnonzero(close[v])
        nb.setflags(write=False)
        out.append(nb)
    return tuple(out)


@dataclass(frozen=True, eq=False)
class SpaceGraph:
    """Immutable geometric graph.

    ``coords`` holds ``(x, y)`` rows for Euclidean graphs and ``(r, theta)``
    rows for hyperbolic ones.  ``radius`` is the connection radius and also
    the unit used to normalise distance features.
    """

    space: str
    radius: float
    coords: np.ndarray
    seed: int | None = None
    rho: float | None = None
    delta: float | None = None
    alpha: float | None = None
    disk_radius: float | None = None
    side: float | None = None
    dist: np.ndarray = field(init=False, repr=False)
    neighbors: tuple = field(init=False, repr=False)

    def __post_init__(self):
        coords = np.array(self.coords, dtype=float)
        if coords.ndim != 2 or coords.shape[1] != 2 or coords.shape[0] < 2:
            raise ParameterError("need at least two 2-D node coordinates")
        coords.setflags(write=False)
        dist = _pairwise(self.space, coords, coords)
        np.fill_diagonal(dist, 0.0)
        dist.setflags(write=False)
        object.__setattr__(self, "coords", coords)
        object.__setattr__(self, "dist", dist)
        object.__setattr__(self, "neighbors", _adjacency(dist, self.radius))

    @property
    def n(self) -> int:
        return self.coords.shape[0]

    def degree(self, v: int | None = None):
        if v is None:
            return np.array([len(nb) for nb in self.neighbors])
        return len(self.neighbors[v])

    def mean_degree(self) -> float:
        return float(self.degree().mean())

    def edges(self):
        for v, nb in enumerate(self.neighbors):
            for u in nb:
                if v < u:
                    yield v, int(u)

    def padded_neighbors(self) -> np.ndarray:
        """``(n, max_degree)`` neighbor table padded with -1, ids ascending per row."""
        width = max(1, int(self.degree().max()))
        table = np.full((self.n, width), -1, dtype=int)
        for v, nb in enumerate(self.neighbors):
            table[v, : len(nb)] = nb
        return table

    def metric(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        """Pairwise metric distances between coordinate arrays."""
        return _pairwise(self.space, np.atleast_2d(a), np.atleast_2d(b))

    def __eq__(self, other):
        if not isinstance(other, SpaceGraph):
            return NotImplemented
        return (
            self.space == other.space
            and self.radius == other.radius
            and self.seed == other.seed
            and self.rho == other.rho
            and self.delta == other.delta
            and self.alpha == other.alpha
            and self.disk_radius == other.disk_radius
            and self.side == other.side
            and np.array_equal(self.coords, other.coords)
        )

    __hash__ = None


def metric_distance(g: SpaceGraph, v: int, u: int) -> float:
    if not (0 <= v < g.n and 0 <= u < g.n):
        raise IndexError(f"node id out of range for graph of {g.n} nodes")
    return float(g.dist[v, u])


def generate_euclidean(n: int, rho: float, R: float = 1000.0, seed: int | None = None) -> SpaceGraph:
    if n < 2:
        raise ParameterError(f"n must be >= 2, got {n}")
    if not (rho > 0 and R > 0):
        raise ParameterError(f"rho and R must be positive, got rho={rho}, R={R}")
    side = euclidean_side(n, rho, R)
    rng = np.random.default_rng(seed)
    xy = rng.uniform(0.0, side, size=(n, 2))
    return SpaceGraph(EUCLIDEAN, float(R), xy, seed=seed, rho=float(rho), side=side)


def hyperbolic_radius_quantile(q, alpha: float, R: float):
    """Inverse CDF of p(r) = alpha sinh(alpha r) / (cosh(alpha R) - 1) on [0, R]."""
    q = np.asarray(q, dtype=float)
    # cosh(x) - 1 == expm1(x) * -expm1(-x) / 2, accurate for small alpha R
    x = alpha * R
    r = np.arccosh(1.0 + q * np.expm1(x) * -np.expm1(-x) / 2.0) / alpha
    return np.minimum(r, R)


def _polar(quantiles, thetas, alpha, R):
    return np.column_stack([hyperbolic_radius_quantile(quantiles, alpha, R), thetas])


def _mean_degree(space, coords, radius):
    d = _pairwise(space, coords, coords)
    np.fill_diagonal(d, np.inf)
    return float((d <= radius).sum() / coords.shape[0])


def generate_hyperbolic(
    n: int,
    delta: float,
    alpha: float = 0.6,
    R: float | None = None,
    seed: int | None = None,
    tol: float = 1e-9,
) -> SpaceGraph:
    """Random hyperbolic graph with mean degree close to ``delta``.

    With ``R`` omitted, the disk radius (which doubles as connection radius)
    is found by bisection on the realised mean degree, keeping the random
    quantiles fixed so the sample moves continuously with ``R``.  With ``R``
    given, the nodes are drawn once and the connection radius is bisected in
    ``[0, 2R]``.
    """
    if n < 2:
        raise ParameterError(f"n must be >= 2, got {n}")
    if not (alpha > 0 and delta > 0):
        raise ParameterError(f"alpha and delta must be positive, got alpha={alpha}, delta={delta}")
    if R is not None and R <= 0:
        raise ParameterError(f"R must be positive, got {R}")
    rng = np.random.default_rng(seed)
    qs = rng.uniform(0.0, 1.0, size=n)
    thetas = rng.uniform(0.0, 2 * np.pi, size=n)

    if R is not None:
        coords = _polar(qs, thetas, alpha, R)
        lo, hi = 0.0, 2.0 * R
        deg = lambda c: _mean_degree(HYPERBOLIC, coords, c)  # noqa: E731
        decreasing = False
    else:
        lo, hi = 1e-3, 200.0
        deg = lambda c: _mean_degree(HYPERBOLIC, _polar(qs, thetas, alpha, c), c)  # noqa: E731
        decreasing = True

    d_lo, d_hi = deg(lo), deg(hi)
    low_deg, high_deg = (d_hi, d_lo) if decreasing else (d_lo, d_hi)
    if not (low_deg <= delta <= high_deg):
        raise CalibrationError(
            f"mean degree {delta} outside achievable range [{low_deg:.3f}, {high_deg:.3f}] for n={n}"
        )
    while hi - lo > tol * max(1.0, hi):
        mid = 0.5 * (lo + hi)
        above = deg(mid) > delta
        if above == decreasing:
            lo = mid
        else:
            hi = mid
    # pick whichever bracket end realises a degree closer to the target
    c = min((lo, hi), key=lambda x: abs(deg(x) - delta))
    if R is None:
        return SpaceGraph(HYPERBOLIC, c, _polar(qs, thetas, alpha, c), seed=seed, delta=float(delta),
                          alpha=float(alpha), disk_radius=c)
    return SpaceGraph(HYPERBOLIC, c, coords, seed=seed, delta=float(delta), alpha=float(alpha),
                      disk_radius=float(R))


def graph_to_dict(g: SpaceGraph) -> dict:
    return {
        "format": GRAPH_FORMAT,
        "space": g.space,
        "R": g.radius,
        "alpha": g.alpha,
        "disk_radius": g.disk_radius,
        "rho": g.rho,
        "delta": g.delta,
        "side": g.side,
        "seed": g.seed,
        "n": g.n,
        "nodes": [{"id": i, "coords": [float(a), float(b)]} for i, (a, b) in enumerate(g.coords)],
    }


def graph_from_dict(doc: dict) -> SpaceGraph:
    if doc.get("format") != GRAPH_FORMAT:
        raise ValueError(f"not a graph document: format={doc.get('format')!r}")
    nodes = sorted(doc["nodes"], key=lambda rec: rec["id"])
    if [rec["id"] for rec in nodes] != list(range(doc["n"])):
        raise ValueError("node ids must be 0..n-1")
    coords = np.array([rec["coords"] for rec in nodes], dtype=float)
    return SpaceGraph(
        doc["space"], doc["R"], coords, seed=doc.get("seed"), rho=doc.get("rho"),
        delta=doc.get("delta"), alpha=doc.get("alpha"), disk_radius=doc.get("disk_radius"),
        side=doc.get("side"),
    )


def save_graph(g: SpaceGraph, path) -> None:
    Path(path).write_text(json.dumps(graph_to_dict(g), indent=1) + "\n")


def load_graph(path) -> SpaceGraph:
    return graph_from_dict(json.loads(Path(path).read_text()))
