"""Local forwarding policies and packet routing.

Every local policy scores candidate neighbors from the 4-wide feature rows
``(d(v,D)/R, ns(O,D,v), d(u,D)/R, ns(O,D,u))`` and nothing else, so a
forwarding decision at ``v`` can only depend on the coordinates of ``v``, its
current neighbors, the origin and the destination.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .graphs import SpaceGraph, _pairwise
from .oracle import PairContext
from .qnet import QNetwork
from .ranking import select_schema

log = logging.getLogger(__name__)


class Policy:
    name = "policy"
    local = True

    def score(self, X4: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def __repr__(self):
        return f"{type(self).__name__}({self.name!r})"


class GreedyForwarding(Policy):
    """Forward to the neighbor closest to the destination."""

    name = "GF"

    def score(self, X4):
        return -X4[..., 2]


class SrNodeStretch(Policy):
    """Forward to the neighbor of least node stretch, ``ns(O,D,u) + 0.64`` minimised."""

    name = "SR-NS"
    offset = 0.64

    def score(self, X4):
        return -(X4[..., 3] + self.offset)


class NeuralQ(Policy):
    def __init__(self, net: QNetwork, name: str = "GT"):
        self.net = net
        self.name = name

    def score(self, X4):
        return self.net.predict(select_schema(X4, self.net.schema))


@dataclass(frozen=True)
class TwoLinearParams:
    """Guarded command with two linear actions.

    Action 1 applies when ``d_u < g1*d_v + g2*ns_u + g0``; it scores
    ``a1*d_v + a2*ns_u + a3*d_u + a0``.  Otherwise ``b1*d_v + b2*d_u + b0``.
    """

    guard: tuple = (1.02, 0.57, -0.69)
    branch1: tuple = (-0.01, -0.02, -0.01, -0.06)
    branch2: tuple = (0.03, -0.04, -0.15)
    single_plane: bool = False
    residual: float | None = None

    def to_dict(self):
        return {"guard": list(self.guard), "branch1": list(self.branch1), "branch2": list(self.branch2),
                "single_plane": self.single_plane, "residual": self.residual}

    @classmethod
    def from_dict(cls, doc):
        return cls(tuple(doc["guard"]), tuple(doc["branch1"]), tuple(doc["branch2"]),
                   doc.get("single_plane", False), doc.get("residual"))


PUBLISHED_TWO_LINEAR = TwoLinearParams()


class TwoLinearAction(Policy):
    name = "TwoLinear"

    def __init__(self, params: TwoLinearParams = PUBLISHED_TWO_LINEAR):
        self.params = params

    def predict(self, X4):
        X4 = np.asarray(X4, dtype=float)
        d_v, ns_u, d_u = X4[..., 0], X4[..., 3], X4[..., 2]
        g1, g2, g0 = self.params.guard
        a1, a2, a3, a0 = self.params.branch1
        b1, b2, b0 = self.params.branch2
        z1 = a1 * d_v + a2 * ns_u + a3 * d_u + a0
        if self.params.single_plane:
            return z1
        z2 = b1 * d_v + b2 * d_u + b0
        return np.where(d_u < g1 * d_v + g2 * ns_u + g0, z1, z2)

    def guard_holds(self, X4):
        X4 = np.asarray(X4, dtype=float)
        g1, g2, g0 = self.params.guard
        return X4[..., 2] < g1 * X4[..., 0] + g2 * X4[..., 3] + g0

    score = predict


class OracleShortest(Policy):
    """Next hop along a true shortest path; needs global distances, not local."""

    name = "Oracle"
    local = False

    def __init__(self, dsp: np.ndarray):
        self.dsp = dsp

    def edge_scores(self, step, u, D):
        return -(step + self.dsp[u, D])


@dataclass(frozen=True)
class LocalView:
    """What node ``v`` can observe: its own, its neighbors', O's and D's coordinates."""

    space: str
    radius: float
    v: int
    v_xy: np.ndarray
    neighbor_ids: np.ndarray
    neighbor_xy: np.ndarray
    O_xy: np.ndarray
    D_xy: np.ndarray

    def features(self) -> np.ndarray:
        pts = np.vstack([self.v_xy[None], self.neighbor_xy])
        to_D = _pairwise(self.space, pts, self.D_xy[None])[:, 0]
        to_O = _pairwise(self.space, pts, self.O_xy[None])[:, 0]
        d_od = _pairwise(self.space, self.O_xy[None], self.D_xy[None])[0, 0]
        fs = np.column_stack([to_D / self.radius, (to_O + to_D) / d_od])
        return np.concatenate([np.broadcast_to(fs[0], (len(self.neighbor_ids), 2)), fs[1:]], axis=1)

    def steps(self) -> np.ndarray:
        return _pairwise(self.space, self.v_xy[None], self.neighbor_xy)[0]


def local_view(g: SpaceGraph, O: int, D: int, v: int, neighbors=None) -> LocalView:
    nb = np.asarray(g.neighbors[v] if neighbors is None else sorted(neighbors), dtype=int)
    return LocalView(g.space, g.radius, v, g.coords[v], nb, g.coords[nb].reshape(-1, 2), g.coords[O], g.coords[D])


def choose_forwarder(policy: Policy, view: LocalView, visited=(), D: int | None = None):
    """Best unvisited neighbor under ``policy``; ``None`` at a dead end.  Ties go to the lowest id."""
    ids = view.neighbor_ids
    if len(ids) == 0:
        return None
    if policy.local:
        s = np.asarray(policy.score(view.features()), dtype=float)
    else:
        s = policy.edge_scores(view.steps(), ids, D)
    s = np.where(np.isin(ids, list(visited)), -np.inf, s)
    if not np.any(s > -np.inf):
        # every neighbor visited, or all scores -inf; pick only among unvisited
        free = ~np.isin(ids, list(visited))
        return int(ids[free][0]) if free.any() else None
    best = np.flatnonzero(s == s.max())
    return int(ids[best].min())


@dataclass
class RouteResult:
    path: list
    delivered: bool
    d_p: float  # every traversed edge, backtracking included
    d_p_path: float  # greedy prefix plus the final DFS branch only
    used_fallback: bool = False

    @property
    def hops(self):
        return len(self.path) - 1


def _ellipse_nodes(g: SpaceGraph, ctx: PairContext, bound: float):
    d_od = g.dist[ctx.O, ctx.D]
    ns = (g.dist[ctx.O] + g.dist[:, ctx.D]) / d_od
    return set(np.flatnonzero(ns <= bound).tolist())


def dfs_in_ellipse(policy, g: SpaceGraph, ctx: PairContext, start: int, allowed: set, adjacency=None):
    """Depth-first search from ``start`` to ``ctx.D`` restricted to ``allowed``.

    Children are tried best-first under ``policy``.  Returns
    ``(walk, found_path)`` where ``walk`` lists every move including
    backtracks, or ``(walk, None)`` when the region holds no path.
    """
    D = ctx.D
    allowed = set(allowed) | {start, D}
    nbrs = adjacency if adjacency is not None else [set(nb.tolist()) for nb in g.neighbors]
    seen = {start}
    stack = [start]
    walk = [start]
    order_cache = {}
    while stack:
        v = stack[-1]
        if v == D:
            return walk, list(stack)
        if v not in order_cache:
            cand = sorted(u for u in nbrs[v] if u in allowed)
            if cand:
                view = local_view(g, ctx.O, D, v, cand)
                if policy.local:
                    s = policy.score(view.features())
                else:
                    s = policy.edge_scores(view.steps(), view.neighbor_ids, D)
                cand = [c for _, c in sorted(zip(-np.asarray(s, dtype=float), cand))]
            order_cache[v] = iter(cand)
        nxt = next((u for u in order_cache[v] if u not in seen), None)
        if nxt is None:
            stack.pop()
            if stack:
                walk.append(stack[-1])
            continue
        seen.add(nxt)
        stack.append(nxt)
        walk.append(nxt)
    return walk, None


def _length(g, nodes):
    return float(sum(g.dist[a, b] for a, b in zip(nodes[:-1], nodes[1:])))


def route(policy: Policy, g: SpaceGraph, ctx: PairContext, fallback: str | None = None,
          bound: float | None = None) -> RouteResult:
    """Forward a packet from ``ctx.O`` until it reaches ``ctx.D`` or strands.

    ``fallback="dfs"`` searches the ellipse ``ns <= bound`` (default
    ``zeta * (1 + epsilon)``) from the stranded node.
    """
    O, D = ctx.O, ctx.D
    path = [O]
    visited = {O}
    v = O
    while v != D:
        u = choose_forwarder(policy, local_view(g, O, D, v), visited, D)
        if u is None:
            break
        path.append(u)
        visited.add(u)
        v = u
    if v == D:
        L = _length(g, path)
        return RouteResult(path, True, L, L)
    if fallback != "dfs":
        return RouteResult(path, False, np.inf, np.inf)
    bound = ctx.bound if bound is None else bound
    walk, found = dfs_in_ellipse(policy, g, ctx, v, _ellipse_nodes(g, ctx, bound))
    if found is None:
        return RouteResult(path + walk[1:], False, np.inf, np.inf, True)
    return RouteResult(path + walk[1:], True, _length(g, path + walk[1:]), _length(g, path + found[1:]), True)


# -- batched evaluation ------------------------------------------------------


def route_all(policy: Policy, g: SpaceGraph, D: int, origins: np.ndarray):
    """Route packets from every origin to ``D`` at once (no fallback).

    Returns ``(delivered, length, hops, stuck_at)`` arrays aligned with
    ``origins``; identical decisions to :func:`route`.
    """
    origins = np.asarray(origins, dtype=int)
    P = g.padded_neighbors()
    valid_slot = P >= 0
    Pc = np.where(valid_slot, P, 0)
    k = len(origins)
    to_D = g.dist[:, D]
    d_od = g.dist[origins, D]
    ns = (g.dist[origins, :] + to_D[None, :]) / d_od[:, None]  # (k, n)
    fD = to_D / g.radius
    cur = origins.copy()
    visited = np.zeros((k, g.n), dtype=bool)
    visited[np.arange(k), origins] = True
    length = np.zeros(k)
    hops = np.zeros(k, dtype=int)
    active = cur != D
    delivered = ~active
    for _ in range(g.n):
        idx = np.flatnonzero(active)
        if idx.size == 0:
            break
        c = cur[idx]
        cand = Pc[c]  # (a, w)
        ok = valid_slot[c] & ~visited[idx[:, None], cand]
        X = np.stack(
            [
                np.broadcast_to(fD[c][:, None], cand.shape),
                np.broadcast_to(ns[idx, c][:, None], cand.shape),
                fD[cand],
                ns[idx[:, None], cand],
            ],
            axis=-1,
        )
        if policy.local:
            s = np.full(cand.shape, -np.inf)
            s[ok] = policy.score(X[ok])
        else:
            s = np.where(ok, policy.edge_scores(g.dist[c[:, None], cand], cand, D), -np.inf)
        has = ok.any(axis=1)
        # argmax takes the first maximal slot, slots are ordered by id
        s_for_max = np.where(ok, s, -np.inf)
        all_ninf = has & ~np.any(s_for_max > -np.inf, axis=1)
        pick = np.argmax(s_for_max, axis=1)
        pick[all_ninf] = np.argmax(ok[all_ninf], axis=1)
        stuck = idx[~has]
        active[stuck] = False
        mv = idx[has]
        nxt = cand[has, pick[has]]
        length[mv] += g.dist[cur[mv], nxt]
        hops[mv] += 1
        cur[mv] = nxt
        visited[mv, nxt] = True
        arrived = mv[nxt == D]
        delivered[arrived] = True
        active[arrived] = False
    return delivered, np.where(delivered, length, np.inf), hops, np.where(delivered, -1, cur)


# -- topology dynamics ---------------------------------------------------------


@dataclass
class DynamicsResult:
    delivered: bool
    path: list
    d_p: float
    log: list = field(default_factory=list)
    reason: str | None = None
    used_fallback: bool = False


def _connected(adj, a, b, alive):
    seen, stack = {a}, [a]
    while stack:
        v = stack.pop()
        if v == b:
            return True
        for u in adj[v]:
            if u not in seen and alive[u]:
                seen.add(u)
                stack.append(u)
    return False


def dynamics_run(policy: Policy, g: SpaceGraph, ctx: PairContext, schedule=None, fallback: str | None = "dfs",
                 bound: float | None = None) -> DynamicsResult:
    """Route while nodes disappear.

    ``schedule`` maps a hop index to node ids removed just before that hop is
    decided.  Each decision re-reads the holder's current neighbor list; no
    other state carries over except the packet's visited set.
    """
    schedule = schedule or {}
    O, D = ctx.O, ctx.D
    adj = [set(nb.tolist()) for nb in g.neighbors]
    alive = np.ones(g.n, dtype=bool)
    events = []
    path, visited, v = [O], {O}, O
    hop = 0

    def apply(h, holder):
        for w in schedule.get(h, ()):
            if w in (holder, D) or not alive[w]:
                events.append(("skip-removal", h, w))
                continue
            alive[w] = False
            for x in adj[w]:
                adj[x].discard(w)
            adj[w] = set()
            events.append(("removed", h, w))

    while v != D:
        apply(hop, v)
        nb = adj[v]
        u = choose_forwarder(policy, local_view(g, O, D, v, nb), visited, D)
        if u is None:
            break
        if hop in schedule:
            events.append(("forward", hop, v, u))
        path.append(u)
        visited.add(u)
        v = u
        hop += 1
    for h in sorted(k for k in schedule if k > hop):
        apply(h, v)
    if v == D:
        return DynamicsResult(True, path, _length(g, path), events)
    if not _connected(adj, v, D, alive):
        return DynamicsResult(False, path, np.inf, events, "disconnected")
    if fallback != "dfs":
        return DynamicsResult(False, path, np.inf, events, "dead-end")
    bound = ctx.bound if bound is None else bound
    allowed = {w for w in _ellipse_nodes(g, ctx, bound) if alive[w]}
    walk, found = dfs_in_ellipse(policy, g, ctx, v, allowed, adjacency=adj)
    events.append(("fallback", hop, v))
    full = path + walk[1:]
    if found is None:
        return DynamicsResult(False, full, np.inf, events, "no path inside ellipse", True)
    return DynamicsResult(True, full, _length(g, full), events, None, True)
