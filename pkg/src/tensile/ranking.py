"""Local features, linear ranking metrics and DCG ranking similarity.

A neighbor ranking is scored against the ranking induced by the optimal
Q-values: the ideal list (best Q first) gets graded relevance ``(L - i + 1)**2``
at 1-indexed position ``i``; the metric's list is scored with the relevance
each neighbor earned in the ideal list, and the similarity is the DCG ratio.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .graphs import SpaceGraph, generate_euclidean, generate_hyperbolic, EUCLIDEAN
from .oracle import DegeneratePairError, PairContext, OracleTable, apsp, pair_context, optimal_q, rewards

log = logging.getLogger(__name__)

DIST = "dist"
DIST_NS = "dist+ns"
SCHEMA_COLUMNS = {DIST: [0, 2], DIST_NS: [0, 1, 2, 3]}


def width(schema: str) -> int:
    return len(SCHEMA_COLUMNS[schema])


def node_stretch(g: SpaceGraph, O: int, D: int, w: int) -> float:
    d_od = g.dist[O, D]
    if O == D or d_od == 0.0:
        raise DegeneratePairError("node stretch needs distinct, non-coincident O and D")
    return float((g.dist[O, w] + g.dist[w, D]) / d_od)


def state_features(g: SpaceGraph, O: int, D: int) -> np.ndarray:
    """``(n, 2)`` rows ``(d(w, D) / R, ns(O, D, w))`` for every node ``w``."""
    d_od = g.dist[O, D]
    if O == D or d_od == 0.0:
        raise DegeneratePairError("node stretch needs distinct, non-coincident O and D")
    to_D = g.dist[:, D]
    return np.column_stack([to_D / g.radius, (g.dist[O, :] + to_D) / d_od])


def pair_features(fs: np.ndarray, v, u) -> np.ndarray:
    """Full 4-wide rows ``(d_v, ns_v, d_u, ns_u)``; ``v`` broadcasts against ``u``."""
    v = np.broadcast_to(np.asarray(v), np.shape(u))
    return np.concatenate([fs[v], fs[u]], axis=-1)


def select_schema(X4: np.ndarray, schema: str) -> np.ndarray:
    return X4[..., SCHEMA_COLUMNS[schema]]


@dataclass(frozen=True)
class RankingMetric:
    """Linear score over ``(d_v, ns_v, d_u, ns_u)``; higher ranks first."""

    weights: tuple
    name: str = "custom"
    bias: float = 0.0

    def score(self, X4: np.ndarray) -> np.ndarray:
        with np.errstate(invalid="ignore"):  # padded rows may hold inf
            return np.asarray(X4, dtype=float) @ np.asarray(self.weights, dtype=float) + self.bias


M1 = RankingMetric((0.0, 0.0, -1.0, 0.0), "m1")
M2 = RankingMetric((0.0, 0.0, -0.875, -0.277), "m2")


def dcg(rel: Sequence[float], tau: int | None = None) -> float:
    rel = np.asarray(rel, dtype=float)
    if tau is None:
        tau = len(rel)
    if not 1 <= tau <= len(rel):
        raise ValueError(f"tau={tau} out of range 1..{len(rel)}")
    return float(np.sum(rel[:tau] / np.log2(np.arange(2, tau + 2))))


def graded_relevance(L: int) -> np.ndarray:
    return (L - np.arange(L)) ** 2.0


def ranking_similarity(ideal: Sequence, estimated: Sequence, tau: int | None = None) -> float:
    """DCG of ``estimated`` (relevance looked up in ``ideal``) over DCG of ``ideal``."""
    rel_a = graded_relevance(len(ideal))
    lookup = {item: rel_a[i] for i, item in enumerate(ideal)}
    rel_b = [lookup.get(item, 0.0) for item in estimated]
    if tau is None:
        tau = len(ideal)
    return dcg(rel_b, tau) / dcg(rel_a, tau)


def _order(keys, ids):
    # descending key, ties by ascending id
    return [ids[i] for i in sorted(range(len(ids)), key=lambda i: (-keys[i], ids[i]))]


def sim_v(g: SpaceGraph, ctx: PairContext, v: int, metric: RankingMetric, oracle: OracleTable) -> float:
    """Ranking similarity at ``v``; NaN when undefined (no reachable neighbor)."""
    if v == ctx.D:
        raise ValueError("similarity is undefined at the destination")
    nb = [int(u) for u in g.neighbors[v]]
    if not nb:
        raise ValueError(f"node {v} has no neighbors")
    q = oracle.qstar[v, nb]
    if not np.any(np.isfinite(q)):
        return float("nan")
    fs = state_features(g, ctx.O, ctx.D)
    scores = metric.score(pair_features(fs, v, np.asarray(nb)))
    ideal = _order(q, nb)
    estimated = _order(scores, nb)
    return ranking_similarity(ideal, estimated)


def _batch_similarity(Q: np.ndarray, S: np.ndarray, valid: np.ndarray) -> np.ndarray:
    """Row-wise DCG similarity for padded ``(..., w)`` Q and metric tables."""
    L = valid.sum(axis=-1)
    keyA = np.where(valid, -Q, np.inf)
    keyB = np.where(valid, -S, np.inf)
    orderA = np.argsort(keyA, axis=-1, kind="stable")
    orderB = np.argsort(keyB, axis=-1, kind="stable")
    posA = np.empty_like(orderA)
    np.put_along_axis(posA, orderA, np.broadcast_to(np.arange(Q.shape[-1]), Q.shape), axis=-1)
    rel_slot = np.where(valid, np.maximum(L[..., None] - posA, 0) ** 2.0, 0.0)
    disc = 1.0 / np.log2(np.arange(2, Q.shape[-1] + 2))
    relA_sorted = np.maximum(L[..., None] - np.arange(Q.shape[-1]), 0) ** 2.0
    dcg_a = (relA_sorted * disc).sum(axis=-1)
    dcg_b = (np.take_along_axis(rel_slot, orderB, axis=-1) * disc).sum(axis=-1)
    with np.errstate(invalid="ignore", divide="ignore"):
        return dcg_b / dcg_a


def sim_points(
    g: SpaceGraph,
    metric: RankingMetric,
    epsilon: float = 0.05,
    C: float = 1.0,
    dsp: np.ndarray | None = None,
    per_origin: bool | None = None,
    max_points: int = 1_000_000,
    rng: np.random.Generator | None = None,
) -> np.ndarray:
    """Per-point similarities (undefined points dropped).

    ``per_origin=False`` evaluates every ``(v, D)`` with the packet
    originating at ``v``; ``per_origin=True`` evaluates every ``(O, D, v)``.
    The default is ``False`` for metrics that ignore node stretch.  When the
    triple count would exceed ``max_points`` a random subset of ``(O, D)``
    pairs is evaluated instead.
    """
    if dsp is None:
        dsp = apsp(g)
    if per_origin is None:
        per_origin = bool(metric.weights[1] or metric.weights[3])
    n = g.n
    P = g.padded_neighbors()
    valid = P >= 0
    Pc = np.where(valid, P, 0)
    step = g.dist[np.arange(n)[:, None], Pc]
    out = []

    pairs = None
    if per_origin and n ** 3 > max_points:
        rng = rng or np.random.default_rng(0)
        k = max(1, max_points // n)
        flat = rng.choice(n * n, size=min(k, n * n), replace=False)
        pairs = {}
        for O, D in zip(*np.divmod(flat, n)):
            pairs.setdefault(int(D), []).append(int(O))

    for D in range(n):
        to_D = dsp[:, D]
        if per_origin:
            origins = np.array(pairs.get(D, []) if pairs is not None else range(n), dtype=int)
            origins = origins[(origins != D) & np.isfinite(to_D[origins]) & (g.dist[origins, D] > 0)]
            if origins.size == 0:
                continue
            zeta = to_D[origins] / g.dist[origins, D]
            bound = zeta * (1 + epsilon)  # (k,)
            r = rewards(step[None], to_D[Pc][None], to_D[:, None][None], bound[:, None, None], C)
            Q = r - to_D[Pc][None]
            e_D = g.dist[:, D]
            d_u = (e_D / g.radius)[Pc]
            ns = (g.dist[origins, :] + e_D[None, :]) / g.dist[origins, D][:, None]  # (k, n)
            X = np.stack(
                [
                    np.broadcast_to((e_D / g.radius)[None, :, None], Q.shape),
                    np.broadcast_to(ns[:, :, None], Q.shape),
                    np.broadcast_to(d_u[None], Q.shape),
                    ns[:, Pc],
                ],
                axis=-1,
            )
            S = metric.score(X)
            sims = _batch_similarity(Q, S, np.broadcast_to(valid, Q.shape))
            keep = np.ones(sims.shape, dtype=bool)
            keep[:, D] = False
            keep &= np.isfinite(to_D)[None, :] & (valid.sum(axis=1) > 0)[None, :]
            out.append(sims[keep])
        else:
            with np.errstate(invalid="ignore", divide="ignore"):
                zeta = to_D / g.dist[:, D]
            bound = zeta * (1 + epsilon)
            r = rewards(step, to_D[Pc], to_D[:, None], bound[:, None], C)
            Q = r - to_D[Pc]
            e_D = g.dist[:, D]
            d_v = e_D / g.radius
            with np.errstate(invalid="ignore", divide="ignore"):
                ns_u = (step + e_D[Pc]) / e_D[:, None]
            X = np.stack(
                [np.broadcast_to(d_v[:, None], Q.shape), np.ones(Q.shape), d_v[Pc], ns_u], axis=-1
            )
            S = metric.score(X)
            sims = _batch_similarity(Q, S, valid)
            keep = np.isfinite(to_D) & (valid.sum(axis=1) > 0) & (g.dist[:, D] > 0)
            keep[D] = False
            out.append(sims[keep])
    return np.concatenate(out) if out else np.array([])


def sim_graph(g: SpaceGraph, metric: RankingMetric, epsilon: float = 0.05, C: float = 1.0, **kw) -> float:
    pts = sim_points(g, metric, epsilon, C, **kw)
    pts = pts[np.isfinite(pts)]
    if pts.size == 0:
        raise ValueError("graph has no point with defined similarity")
    return float(pts.mean())


@dataclass
class MonotonicityResult:
    ok: bool
    direction: str | None  # "increasing", "decreasing", "constant" or None
    witness: tuple | None = None

    def __bool__(self):
        return self.ok


def check_pointwise_monotonicity(metric: RankingMetric, vectors, atol: float = 1e-12) -> MonotonicityResult:
    """Does ``metric`` order every pointwise-comparable pair consistently?

    Pairs ``a <= b`` (componentwise) must all satisfy ``m(a) <= m(b)``, or all
    satisfy ``m(a) >= m(b)``.  On failure the witness holds one pair of each
    kind.
    """
    V = np.asarray(vectors, dtype=float)
    if V.ndim != 2 or len(V) == 0:
        raise ValueError("need a non-empty list of feature vectors")
    s = metric.score(V)
    le = np.all(V[:, None, :] <= V[None, :, :], axis=-1)
    np.fill_diagonal(le, False)
    diff = s[None, :] - s[:, None]  # m(b) - m(a) for a = row, b = col
    up = le & (diff > atol)
    down = le & (diff < -atol)
    if up.any() and down.any():
        a1, b1 = np.argwhere(up)[0]
        a2, b2 = np.argwhere(down)[0]
        return MonotonicityResult(False, None, ((V[a1], V[b1]), (V[a2], V[b2])))
    direction = "increasing" if up.any() else "decreasing" if down.any() else "constant"
    return MonotonicityResult(True, direction)


def make_graph(n, density, seed, R=1000.0, space=EUCLIDEAN, alpha=0.6):
    if space == EUCLIDEAN:
        return generate_euclidean(n, density, R, seed)
    return generate_hyperbolic(n, density, alpha, seed=seed)


def select_seed_graph(candidates, metric: RankingMetric, k: int | None = None, epsilon: float = 0.05,
                      C: float = 1.0, R: float = 1000.0, space: str = EUCLIDEAN, alpha: float = 0.6):
    """Score candidate graphs by mean ranking similarity, best first.

    ``candidates`` are ``SpaceGraph`` objects or ``(n, density, seed)``
    tuples.  Returns ``[(sim_G, graph), ...]``.
    """
    if not candidates:
        raise ValueError("no candidate graphs")
    scored = []
    for i, c in enumerate(candidates):
        g = c if isinstance(c, SpaceGraph) else make_graph(*c, R=R, space=space, alpha=alpha)
        scored.append((sim_graph(g, metric, epsilon, C), i, g))
    scored.sort(key=lambda t: (-t[0], t[1]))
    return [(s, g) for s, _, g in scored[:k]]


@dataclass
class SampleSet:
    schema: str
    X: np.ndarray
    Y: np.ndarray
    provenance: list = field(default_factory=list)  # (graph_seed, v, u, O, D)
    short: bool = False  # fewer eligible nodes than requested

    def __post_init__(self):
        self.X = np.asarray(self.X, dtype=float).reshape(-1, width(self.schema))
        self.Y = np.asarray(self.Y, dtype=float).reshape(-1)
        if len(self.X) != len(self.Y):
            raise ValueError("X and Y lengths differ")

    def __len__(self):
        return len(self.Y)

    def to_dict(self) -> dict:
        return {
            "format": "tensile-samples/1",
            "schema": self.schema,
            "short": self.short,
            "records": [
                {"x": x.tolist(), "y": float(y), "provenance": list(p) if p is not None else None}
                for x, y, p in zip(self.X, self.Y, self.provenance or [None] * len(self))
            ],
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "SampleSet":
        recs = doc["records"]
        prov = [tuple(r["provenance"]) if r["provenance"] is not None else None for r in recs]
        return cls(doc["schema"], [r["x"] for r in recs], [r["y"] for r in recs],
                   prov if any(p is not None for p in prov) else [], doc.get("short", False))

    def save(self, path):
        Path(path).write_text(json.dumps(self.to_dict()) + "\n")

    @classmethod
    def load(cls, path):
        return cls.from_dict(json.loads(Path(path).read_text()))

    @classmethod
    def concat(cls, sets):
        sets = list(sets)
        return cls(sets[0].schema, np.concatenate([s.X for s in sets]), np.concatenate([s.Y for s in sets]),
                   [p for s in sets for p in s.provenance], any(s.short for s in sets))


def choose_pair(g: SpaceGraph, rng: np.random.Generator, dsp: np.ndarray, candidates: int = 32):
    """Among ``candidates`` random reachable ordered pairs, the one farthest apart."""
    best, seen = None, 0
    for _ in range(candidates * 20):
        O, D = (int(x) for x in rng.choice(g.n, size=2, replace=False))
        if not np.isfinite(dsp[O, D]) or g.dist[O, D] == 0:
            continue
        if best is None or g.dist[O, D] > g.dist[best]:
            best = (O, D)
        seen += 1
        if seen == candidates:
            break
    if best is None:
        raise ValueError("graph has no reachable pair")
    return best


def node_similarities(g: SpaceGraph, ctx: PairContext, metric: RankingMetric, oracle: OracleTable) -> dict:
    out = {}
    for v in range(g.n):
        if v == ctx.D or g.degree(v) == 0:
            continue
        s = sim_v(g, ctx, v, metric, oracle)
        if np.isfinite(s):
            out[v] = s
    return out


def subsample(
    g: SpaceGraph,
    O: int,
    D: int,
    phi: int | None,
    metric: RankingMetric,
    oracle: OracleTable | None = None,
    schema: str = DIST_NS,
    dsp: np.ndarray | None = None,
    epsilon: float = 0.05,
    C: float = 1.0,
    exclude: set | None = None,
) -> SampleSet:
    """Training samples from the ``phi`` best-ranked nodes (all nodes if ``phi`` is None).

    Nodes are ranked by similarity, then degree (descending), then id.
    """
    if phi is not None and phi < 1:
        raise ValueError("phi must be >= 1")
    if oracle is None:
        if dsp is None:
            dsp = apsp(g)
        oracle = optimal_q(g, pair_context(g, O, D, epsilon, dsp), C, dsp)
    ctx = oracle.ctx
    sims = node_similarities(g, ctx, metric, oracle)
    eligible = [v for v in sims if not exclude or v not in exclude]
    eligible.sort(key=lambda v: (-sims[v], -g.degree(v), v))
    short = phi is not None and len(eligible) < phi
    if short:
        log.warning("only %d eligible nodes for phi=%d", len(eligible), phi)
    chosen = eligible if phi is None else eligible[:phi]

    fs = state_features(g, O, D)
    X, Y, prov = [], [], []
    for v in chosen:
        for u in g.neighbors[v]:
            q = oracle.qstar[v, u]
            if not np.isfinite(q):
                continue
            X.append(select_schema(pair_features(fs, v, int(u)), schema))
            Y.append(q / g.radius)
            prov.append((g.seed, v, int(u), O, D))
    return SampleSet(schema, np.array(X), np.array(Y), prov, short)
