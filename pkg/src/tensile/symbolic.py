"""Two-plane approximation of a learned scoring surface, and grid export.

A scorer is anything with ``predict(X)`` over 4-wide rows
``(d_v, ns_v, d_u, ns_u)`` with distances in units of the radius; a
:class:`~tensile.qnet.QNetwork` with the ``dist+ns`` schema qualifies, and so
does :class:`~tensile.policies.TwoLinearAction`.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .policies import TwoLinearAction, TwoLinearParams
from .qnet import QNetwork, SchemaError


@dataclass(frozen=True)
class ProbeGrid:
    """Probe points; ``d_u`` is laid out as ``d_v + offset``."""

    d_v: tuple = tuple(np.linspace(1.5, 6.0, 10))
    ns_v: tuple = (1.0, 1.2, 1.4)
    ns_u: tuple = tuple(np.linspace(1.0, 1.8, 9))
    offsets: tuple = tuple(np.linspace(-1.0, 1.0, 81))

    def lines(self) -> np.ndarray:
        """``(n_lines, n_offsets, 4)`` array of feature rows, one line per ``(d_v, ns_v, ns_u)``."""
        dv, nv, nu = np.meshgrid(self.d_v, self.ns_v, self.ns_u, indexing="ij")
        dv, nv, nu = dv.ravel(), nv.ravel(), nu.ravel()
        off = np.asarray(self.offsets)
        X = np.empty((dv.size, off.size, 4))
        X[..., 0] = dv[:, None]
        X[..., 1] = nv[:, None]
        X[..., 2] = dv[:, None] + off[None, :]
        X[..., 3] = nu[:, None]
        return X


def _scorer_check(scorer):
    if isinstance(scorer, QNetwork) and scorer.omega != 4:
        raise SchemaError(f"two-plane fit needs the 4-feature schema, model has {scorer.omega}")
    return scorer


def _lstsq(A, y):
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    return coef


def _floats(c):
    return tuple(float(x) for x in c)


def _design1(X):
    return np.column_stack([X[:, 0], X[:, 3], X[:, 2], np.ones(len(X))])


def _design2(X):
    return np.column_stack([X[:, 0], X[:, 2], np.ones(len(X))])


def fit_two_plane(scorer, grid: ProbeGrid | None = None, refine_steps: int = 40, kink_tol: float = 1e-9):
    """Fit a guarded two-plane command to ``scorer``.

    Along every line of increasing ``d_u`` the largest second difference marks
    the transition.  Points clear of it are split by side and each side gets a
    least-squares plane; the boundary is then refined by bisection between
    the planes and the guard plane is fitted to the refined crossings.  With no
    detectable transition a single plane is returned with ``single_plane`` set.
    """
    _scorer_check(scorer)
    grid = grid or ProbeGrid()
    L = grid.lines()
    n_lines, m, _ = L.shape
    Z = np.asarray(scorer.predict(L.reshape(-1, 4)), dtype=float).reshape(n_lines, m)
    if not np.all(np.isfinite(Z)):
        raise ValueError("scorer produced non-finite values on the probe grid")
    second = np.abs(np.diff(Z, 2, axis=1))
    scale = max(1.0, float(np.abs(Z).max()))
    k = np.argmax(second, axis=1) + 1
    has_kink = second.max(axis=1) > kink_tol * scale
    flat = L.reshape(-1, 4)

    if not has_kink.any():
        c = _lstsq(_design1(flat), Z.ravel())
        res = float(np.abs(_design1(flat) @ c - Z.ravel()).max())
        return TwoLinearParams(guard=(0.0, 0.0, 0.0), branch1=_floats(c), branch2=(0.0, 0.0, 0.0),
                               single_plane=True, residual=res)

    idx = np.arange(m)[None, :]
    clear = np.abs(idx - k[:, None]) > 1
    side1 = has_kink[:, None] & clear & (idx < k[:, None])
    side2 = has_kink[:, None] & clear & (idx > k[:, None])
    if side1.sum() < 4 or side2.sum() < 3:
        raise ValueError("transition too close to the grid edge to fit both planes")
    c1 = _lstsq(_design1(L[side1]), Z[side1])
    c2 = _lstsq(_design2(L[side2]), Z[side2])

    # bisect each kinked line between its neighbouring grid points
    rows = np.flatnonzero(has_kink)
    lo = L[rows, k[rows] - 1].copy()
    hi = L[rows, k[rows] + 1].copy()
    for _ in range(refine_steps):
        mid = (lo + hi) / 2
        z = scorer.predict(mid)
        near1 = np.abs(z - _design1(mid) @ c1) <= np.abs(z - _design2(mid) @ c2)
        lo[near1] = mid[near1]
        hi[~near1] = mid[~near1]
    cross = (lo + hi) / 2
    g = _lstsq(np.column_stack([cross[:, 0], cross[:, 3], np.ones(len(cross))]), cross[:, 2])

    params = TwoLinearParams(guard=_floats(g), branch1=_floats(c1), branch2=_floats(c2))
    approx = TwoLinearAction(params).predict(flat)
    guard_gap = np.abs(flat[:, 2] - (g[0] * flat[:, 0] + g[1] * flat[:, 3] + g[2]))
    step = float(np.min(np.diff(grid.offsets)))
    keep = guard_gap > step
    res = float(np.abs(approx - Z.ravel())[keep].max()) if keep.any() else 0.0
    return TwoLinearParams(guard=params.guard, branch1=params.branch1, branch2=params.branch2,
                           single_plane=False, residual=res)


def build_two_plane_net(params: TwoLinearParams, box=((0.0, 8.0), (0.5, 3.0), (0.0, 8.0), (0.5, 3.0)),
                        ramp: float = 1e-7, hidden: int = 200) -> QNetwork:
    """A ReLU network equal to the guarded command on ``box`` outside a ``ramp``-wide band at the guard.

    The first hidden layer passes the inputs through as ``relu(x), relu(-x)``
    pairs and forms a clamped ramp ``h`` of the guard slack; the second layer
    forms ``relu(+-(z1 - z2) - M(1 - h))`` and ``relu(+-z2)``, which sum to
    ``z2 + h * (z1 - z2)``.
    """
    g1, g2, g0 = params.guard
    a1, a2, a3, a0 = params.branch1
    b1, b2, b0 = params.branch2
    lo = np.array([b[0] for b in box])
    hi = np.array([b[1] for b in box])
    # z1 - z2 and the guard slack as affine maps over (d_v, ns_v, d_u, ns_u)
    diff_w = np.array([a1 - b1, 0.0, a3 - b2, a2])
    diff_b = a0 - b0
    z2_w = np.array([b1, 0.0, b2, 0.0])
    slack_w = np.array([g1, 0.0, -1.0, g2])
    corners = np.array(np.meshgrid(*[[l, h] for l, h in zip(lo, hi)], indexing="ij")).reshape(4, -1).T
    M = float(np.abs(corners @ diff_w + diff_b).max()) + 1.0

    net = QNetwork([4, hidden, 4, 1], seed=0, schema="dist+ns")
    W1 = np.zeros((4, hidden))
    c1 = np.zeros(hidden)
    for i in range(4):
        W1[i, 2 * i] = 1.0
        W1[i, 2 * i + 1] = -1.0
    W1[:, 8] = slack_w / ramp
    c1[8] = g0 / ramp
    W1[:, 9] = slack_w / ramp
    c1[9] = g0 / ramp - 1.0
    # layer-1 readouts: x = P @ h1, ramp = h1[8] - h1[9]
    P = np.zeros((hidden, 4))
    for i in range(4):
        P[2 * i, i] = 1.0
        P[2 * i + 1, i] = -1.0
    r = np.zeros(hidden)
    r[8], r[9] = 1.0, -1.0
    W2 = np.zeros((hidden, 4))
    c2 = np.zeros(4)
    W2[:, 0] = P @ diff_w + M * r
    c2[0] = diff_b - M
    W2[:, 1] = -P @ diff_w + M * r
    c2[1] = -diff_b - M
    W2[:, 2] = P @ z2_w
    c2[2] = b0
    W2[:, 3] = -P @ z2_w
    c2[3] = -b0
    net.weights = [W1, W2, np.array([[1.0], [-1.0], [1.0], [-1.0]])]
    net.biases = [c1, c2, np.zeros(1)]
    net.provenance = {"mode": "two-plane", "params": params.to_dict()}
    return net


def surface_grid(scorer, d_v: float = 4.0, ns_v: float = 1.2, ns_u=None, d_u=None):
    """Scores on an ``ns_u`` x ``d_u`` grid with ``d_v`` and ``ns_v`` held fixed."""
    _scorer_check(scorer)
    ns_u = np.linspace(1.0, 2.0, 21) if ns_u is None else np.asarray(ns_u, dtype=float)
    d_u = np.linspace(d_v - 1.0, d_v + 1.0, 41) if d_u is None else np.asarray(d_u, dtype=float)
    NU, DU = np.meshgrid(ns_u, d_u, indexing="ij")
    X = np.stack([np.full(NU.shape, d_v), np.full(NU.shape, ns_v), DU, NU], axis=-1)
    return ns_u, d_u, np.asarray(scorer.predict(X.reshape(-1, 4))).reshape(NU.shape)


def surface_export(scorer, path, d_v: float = 4.0, ns_v: float = 1.2, ns_u=None, d_u=None) -> np.ndarray:
    """Write the surface grid as long-form CSV ``d_v, ns_v, ns_u, d_u, z``; returns the grid."""
    ns_u, d_u, Z = surface_grid(scorer, d_v, ns_v, ns_u, d_u)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["d_v", "ns_v", "ns_u", "d_u", "z"])
        for i, a in enumerate(ns_u):
            for j, b in enumerate(d_u):
                w.writerow([d_v, ns_v, repr(float(a)), repr(float(b)), repr(float(Z[i, j]))])
    return Z
