"""Shared fixtures and independent reference computations.

The reference helpers here deliberately avoid the package's own distance,
shortest-path and reward code so that tests compare two separate derivations.
"""

import itertools
import math

import numpy as np
import pytest

from tensile.graphs import EUCLIDEAN, SpaceGraph, generate_euclidean


def make_graph(xy, R):
    return SpaceGraph(EUCLIDEAN, float(R), np.asarray(xy, dtype=float))


def ref_edges(xy, R):
    """Adjacency dict from raw coordinates with math.dist."""
    n = len(xy)
    return {v: {u: math.dist(xy[v], xy[u]) for u in range(n) if u != v and math.dist(xy[v], xy[u]) <= R}
            for v in range(n)}


def ref_shortest_paths(xy, R):
    """Plain triple-loop Floyd-Warshall over python floats."""
    n = len(xy)
    adj = ref_edges(xy, R)
    d = [[0.0 if i == j else adj[i].get(j, math.inf) for j in range(n)] for i in range(n)]
    for k in range(n):
        for i in range(n):
            dik = d[i][k]
            if dik == math.inf:
                continue
            for j in range(n):
                if dik + d[k][j] < d[i][j]:
                    d[i][j] = dik + d[k][j]
    return np.array(d)


def ref_reward(adj, sp, D, bound, C, a, b):
    step = adj[a][b]
    excess = step + sp[b][D] - sp[a][D] * bound
    return -step - C * max(0.0, excess)


def ref_best_continuation(adj, sp, D, bound, C, start):
    """Max summed reward over all simple paths from ``start`` to ``D`` (exhaustive)."""
    if start == D:
        return 0.0
    best = -math.inf
    stack = [(start, (start,), 0.0)]
    while stack:
        v, path, total = stack.pop()
        for u in adj[v]:
            if u in path:
                continue
            t = total + ref_reward(adj, sp, D, bound, C, v, u)
            if u == D:
                best = max(best, t)
            else:
                stack.append((u, path + (u,), t))
    return best


def ref_qstar(xy, R, O, D, epsilon=0.05, C=1.0):
    """Exhaustive optimal Q over every edge for one (O, D) pair."""
    adj = ref_edges(xy, R)
    sp = ref_shortest_paths(xy, R)
    bound = sp[O][D] / math.dist(xy[O], xy[D]) * (1 + epsilon)
    q = {}
    for v in adj:
        if v == D:
            continue
        for u in adj[v]:
            q[v, u] = ref_reward(adj, sp, D, bound, C, v, u) + ref_best_continuation(adj, sp, D, bound, C, u)
    return q


def ref_dcg(rel):
    return sum(r / math.log2(i + 2) for i, r in enumerate(rel))


@pytest.fixture
def line_graph():
    # O - a - b - D along a line, spacing 1, radius 1.2
    return make_graph([(0, 0), (1, 0), (2, 0), (3, 0)], 1.2)


@pytest.fixture
def void_graph():
    """Greedy stalls at node 1; a detour 0-2-3-4-5-6 exists."""
    xy = [(0, 0), (1.4, -0.3), (-0.2, 1.3), (0.9, 2.2), (2.3, 2.4), (3.5, 1.8), (4.0, 0.5)]
    return make_graph(xy, 1.5)


@pytest.fixture
def ladder_graph():
    """Two parallel rails between node 0 and node 7."""
    xy = [(0, 0), (1, 0.3), (1, -0.4), (2, 0.3), (2, -0.4), (3, 0.3), (3, -0.4), (4, 0)]
    return make_graph(xy, 1.3)


@pytest.fixture(scope="session")
def seed_graph():
    return generate_euclidean(50, 5, 1000.0, seed=3)


def small_graphs(count, n_max, seed=0, rho=4):
    rng = np.random.default_rng(seed)
    for i in range(count):
        n = int(rng.integers(6, n_max + 1))
        yield generate_euclidean(n, rho, 1000.0, seed=int(rng.integers(2**31)))


def pairs_of(n):
    return [(O, D) for O, D in itertools.permutations(range(n), 2)]


# acceptance criteria report one line each; printed at the end of the run
ACCEPTANCE = {}


def record_criterion(number, ok, detail, seconds):
    ACCEPTANCE[number] = f"criterion {number:>2}: {'PASS' if ok else 'FAIL'}  {detail}  [{seconds:.1f} s]"
    print(ACCEPTANCE[number])


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[k])
