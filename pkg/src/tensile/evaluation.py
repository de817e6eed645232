"""All-pairs near-shortest-path accuracy of a forwarding policy on a graph."""

from __future__ import annotations

import csv
import time
from dataclasses import dataclass, field

import numpy as np

from .graphs import SpaceGraph
from .oracle import apsp, pair_context
from .policies import Policy, route, route_all

REPORT_FIELDS = [
    "space", "n", "density", "seed", "policy", "accuracy", "accuracy_delivered_only", "accuracy_all_pairs",
    "counted_pairs", "delivered_pairs", "total_pairs", "epsilon", "fallback",
]
TIMING_FIELDS = ["space", "n", "density", "seed", "policy", "seconds"]
PAIR_FIELDS = ["O", "D", "d_p", "d_sp", "zeta", "eta", "delivered", "hops"]


@dataclass
class EvalReport:
    """Accuracy of one policy on one graph.

    ``accuracy`` counts every ordered pair with O != D and a finite shortest
    path; undelivered packets score 0.  ``accuracy_delivered_only`` drops
    undelivered pairs from the denominator instead, and
    ``accuracy_all_pairs`` divides by ``n**2``.
    """

    policy: str
    graph: dict
    epsilon: float
    accuracy: float
    accuracy_delivered_only: float
    accuracy_all_pairs: float
    counted_pairs: int
    delivered_pairs: int
    pairs: np.ndarray = field(repr=False, default=None)  # structured per-pair records
    fallback: str | None = None
    seconds: float = 0.0

    def row(self) -> dict:
        return {
            "space": self.graph.get("space"), "n": self.graph.get("n"), "density": self.graph.get("density"),
            "seed": self.graph.get("seed"), "policy": self.policy, "accuracy": self.accuracy,
            "accuracy_delivered_only": self.accuracy_delivered_only, "accuracy_all_pairs": self.accuracy_all_pairs,
            "counted_pairs": self.counted_pairs, "delivered_pairs": self.delivered_pairs,
            "total_pairs": self.graph.get("n", 0) ** 2, "epsilon": self.epsilon, "fallback": self.fallback or "none",
            "seconds": round(self.seconds, 3),
        }

    def pair_rows(self):
        for rec in self.pairs:
            yield dict(zip(PAIR_FIELDS, rec.tolist()))


_PAIR_DTYPE = [("O", int), ("D", int), ("d_p", float), ("d_sp", float), ("zeta", float), ("eta", int),
               ("delivered", bool), ("hops", int)]


def graph_meta(g: SpaceGraph) -> dict:
    return {"space": g.space, "n": g.n, "density": g.rho if g.rho is not None else g.delta, "seed": g.seed}


def near_shortest(d_p, d_sp, zeta, epsilon):
    """Path-quality indicator: ``d_p / d_sp <= zeta * (1 + epsilon)``."""
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.isfinite(d_p) & (d_p / d_sp <= zeta * (1.0 + epsilon) * (1 + 1e-12))


def apnsp_accuracy(policy: Policy, g: SpaceGraph, epsilon: float = 0.05, pair_filter=None,
                   dsp: np.ndarray | None = None, fallback: str | None = None) -> EvalReport:
    """Route every counted ordered pair and score near-shortest deliveries.

    ``pair_filter(O, D) -> bool`` optionally restricts the pairs.  With
    ``fallback="dfs"`` stranded packets are finished by the ellipse search.
    """
    t0 = time.perf_counter()
    if dsp is None:
        dsp = apsp(g)
    n = g.n
    recs = []
    for D in range(n):
        origins = np.array([O for O in range(n) if O != D and np.isfinite(dsp[O, D]) and g.dist[O, D] > 0
                            and (pair_filter is None or pair_filter(O, D))], dtype=int)
        if origins.size == 0:
            continue
        delivered, length, hops, stuck = route_all(policy, g, D, origins)
        if fallback == "dfs":
            for i in np.flatnonzero(~delivered):
                res = route(policy, g, pair_context(g, int(origins[i]), D, epsilon, dsp), fallback="dfs")
                delivered[i], length[i], hops[i] = res.delivered, res.d_p, res.hops
        d_sp = dsp[origins, D]
        zeta = d_sp / g.dist[origins, D]
        eta = near_shortest(length, d_sp, zeta, epsilon)
        for O, L, s, z, e, dl, h in zip(origins, length, d_sp, zeta, eta, delivered, hops):
            recs.append((O, D, L, s, z, int(e), bool(dl), h))
    pairs = np.array(recs, dtype=_PAIR_DTYPE)
    counted = len(pairs)
    n_del = int(pairs["delivered"].sum()) if counted else 0
    hits = int(pairs["eta"].sum()) if counted else 0
    return EvalReport(
        policy=policy.name, graph=graph_meta(g), epsilon=epsilon,
        accuracy=hits / counted if counted else 0.0,
        accuracy_delivered_only=hits / n_del if n_del else 0.0,
        accuracy_all_pairs=hits / n ** 2,
        counted_pairs=counted, delivered_pairs=n_del, pairs=pairs, fallback=fallback,
        seconds=time.perf_counter() - t0,
    )


def write_reports(reports, path, fields=REPORT_FIELDS) -> None:
    """One row per report.  Wall-clock time is left out by default so reruns are byte-identical."""
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=fields, extrasaction="ignore")
        w.writeheader()
        for r in reports:
            w.writerow(r.row())


def write_pair_details(report: EvalReport, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=PAIR_FIELDS)
        w.writeheader()
        w.writerows(report.pair_rows())


def summarize(reports) -> dict:
    """Mean accuracy per ``(policy, space, n, density)`` cell."""
    cells = {}
    for r in reports:
        key = (r.policy, r.graph["space"], r.graph["n"], r.graph["density"])
        cells.setdefault(key, []).append(r.accuracy)
    return {k: float(np.mean(v)) for k, v in sorted(cells.items(), key=lambda kv: tuple(map(str, kv[0])))}
