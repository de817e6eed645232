"""Exact shortest paths, path stretch, the near-shortest reward and optimal Q.

With discount 1 and every step costing at least its own length, the value of
a node under the optimal policy is minus its shortest-path distance to the
destination (the shortest path itself never triggers the penalty).  Hence

    Q*(v, u) = r(v, u) - d_sp(u, D)

which is ``-(d_e(v, u) + d_sp(u, D))`` on penalty-free edges.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import dijkstra

from .graphs import SpaceGraph


class NoPathError(ValueError):
    pass


class DegeneratePairError(ValueError):
    pass


class TerminalStateError(ValueError):
    pass


def edge_weights(g: SpaceGraph) -> csr_matrix:
    rows, cols = [], []
    for v, nb in enumerate(g.neighbors):
        rows.extend([v] * len(nb))
        cols.extend(nb.tolist())
    rows = np.asarray(rows, dtype=int)
    cols = np.asarray(cols, dtype=int)
    return csr_matrix((g.dist[rows, cols], (rows, cols)), shape=(g.n, g.n))


def apsp(g: SpaceGraph) -> np.ndarray:
    """All-pairs shortest path lengths (per-source Dijkstra); ``inf`` if unreachable."""
    d = dijkstra(edge_weights(g), directed=False)
    # enforce exact symmetry, the two directions may differ in the last ulp
    d = np.minimum(d, d.T)
    np.fill_diagonal(d, 0.0)
    return d


def floyd_warshall(g: SpaceGraph) -> np.ndarray:
    """Dense O(n^3) all-pairs shortest paths, kept as an independent cross-check."""
    n = g.n
    d = np.full((n, n), np.inf)
    for v, nb in enumerate(g.neighbors):
        d[v, nb] = g.dist[v, nb]
    np.fill_diagonal(d, 0.0)
    for k in range(n):
        d = np.minimum(d, d[:, k : k + 1] + d[k : k + 1, :])
    return d


@dataclass(frozen=True)
class PairContext:
    O: int
    D: int
    d_e: float
    d_sp: float
    zeta: float
    epsilon: float = 0.05

    @property
    def bound(self) -> float:
        """Allowed path-length factor zeta(O, D) * (1 + epsilon)."""
        return self.zeta * (1.0 + self.epsilon)


def pair_context(g: SpaceGraph, O: int, D: int, epsilon: float = 0.05, dsp: np.ndarray | None = None) -> PairContext:
    if O == D:
        raise DegeneratePairError(f"origin equals destination ({O})")
    if dsp is None:
        dsp = apsp(g)
    d_sp = float(dsp[O, D])
    if not np.isfinite(d_sp):
        raise NoPathError(f"no path from {O} to {D}")
    d_e = float(g.dist[O, D])
    if d_e == 0.0:
        raise DegeneratePairError(f"nodes {O} and {D} coincide")
    return PairContext(O, D, d_e, d_sp, d_sp / d_e, epsilon)


def rewards(step: np.ndarray, dsp_next: np.ndarray, dsp_here: np.ndarray, bound: float, C: float) -> np.ndarray:
    """Vectorised reward for moves of length ``step``.

    ``dsp_next``/``dsp_here`` are remaining shortest-path lengths to the
    destination after and before the move.
    """
    detour = step + dsp_next
    with np.errstate(invalid="ignore"):
        excess = detour - dsp_here * bound
    penalty = np.where(excess > 0, excess, 0.0)
    return -step - C * penalty


def reward(g: SpaceGraph, ctx: PairContext, v: int, u: int, dsp: np.ndarray, C: float = 1.0) -> float:
    if v == ctx.D:
        raise TerminalStateError("no actions are taken at the destination")
    if u not in g.neighbors[v]:
        raise ValueError(f"{u} is not a neighbor of {v}")
    D = ctx.D
    return float(rewards(np.float64(g.dist[v, u]), dsp[u, D], dsp[v, D], ctx.bound, C))


@dataclass(frozen=True, eq=False)
class OracleTable:
    """Optimal Q-values for one (O, D) context.

    ``qstar`` is dense ``(n, n)``: NaN off the edge set, ``-inf`` where the
    destination cannot be reached.  Row ``D`` is all NaN (terminal).
    """

    ctx: PairContext
    dist_to_D: np.ndarray
    qstar: np.ndarray
    C: float

    @property
    def D(self) -> int:
        return self.ctx.D

    def q(self, v: int, u: int) -> float:
        val = self.qstar[v, u]
        if np.isnan(val):
            raise KeyError(f"({v}, {u}) is not an action")
        return float(val)

    def penalty_free(self, g: SpaceGraph) -> np.ndarray:
        """Boolean ``(n, n)`` mask of edges whose reward carries no penalty."""
        with np.errstate(invalid="ignore"):
            ok = g.dist + self.dist_to_D[None, :] <= self.dist_to_D[:, None] * self.ctx.bound
        return ok & np.isfinite(self.qstar)

    def rows(self, g: SpaceGraph):
        for v in range(g.n):
            if v == self.D:
                continue
            for u in g.neighbors[v]:
                yield self.D, v, int(u), float(self.dist_to_D[v]), float(self.qstar[v, u])


def q_matrix(g: SpaceGraph, dsp_to_D: np.ndarray, D: int, bound: float, C: float) -> np.ndarray:
    n = g.n
    q = np.full((n, n), np.nan)
    for v, nb in enumerate(g.neighbors):
        if v == D or len(nb) == 0:
            continue
        step = g.dist[v, nb]
        r = rewards(step, dsp_to_D[nb], dsp_to_D[v], bound, C)
        q[v, nb] = r - dsp_to_D[nb]
    return q


def optimal_q(g: SpaceGraph, ctx: PairContext, C: float = 1.0, dsp: np.ndarray | None = None) -> OracleTable:
    if dsp is None:
        dsp = apsp(g)
    to_D = np.array(dsp[:, ctx.D], dtype=float)
    to_D.setflags(write=False)
    q = q_matrix(g, to_D, ctx.D, ctx.bound, C)
    q.setflags(write=False)
    return OracleTable(ctx, to_D, q, C)


def dump_oracle(tables, g: SpaceGraph, path) -> None:
    rows = [
        {"D": D, "v": v, "u": u, "d_sp": dv, "qstar": q}
        for t in tables
        for D, v, u, dv, q in t.rows(g)
    ]
    Path(path).write_text(json.dumps(rows, indent=0) + "\n")
