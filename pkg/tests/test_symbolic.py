import csv

import numpy as np
import pytest

from tensile.policies import PUBLISHED_TWO_LINEAR, TwoLinearAction, TwoLinearParams
from tensile.qnet import QNetwork, SchemaError
from tensile.ranking import DIST
from tensile.symbolic import ProbeGrid, build_two_plane_net, fit_two_plane, surface_export, surface_grid


class Affine:
    def __init__(self, w, b):
        self.w, self.b = np.asarray(w, dtype=float), b

    def predict(self, X):
        return np.asarray(X) @ self.w + self.b


def test_probe_grid_layout():
    L = ProbeGrid().lines()
    assert L.shape == (270, 81, 4)
    assert np.allclose(L[:, :, 2] - L[:, :, 0], np.linspace(-1, 1, 81)[None])


def test_built_net_equals_guarded_command():
    net = build_two_plane_net(PUBLISHED_TWO_LINEAR)
    rng = np.random.default_rng(0)
    X = np.column_stack([rng.uniform(0, 8, 5000), rng.uniform(0.5, 3, 5000),
                         rng.uniform(0, 8, 5000), rng.uniform(0.5, 3, 5000)])
    pol = TwoLinearAction()
    slack = 1.02 * X[:, 0] + 0.57 * X[:, 3] - 0.69 - X[:, 2]
    away = np.abs(slack) > 1e-6
    assert np.abs(net.predict(X[away]) - pol.predict(X[away])).max() < 1e-7


def test_round_trip_recovers_published_coefficients():
    p = fit_two_plane(build_two_plane_net(PUBLISHED_TWO_LINEAR))
    assert not p.single_plane
    for got, want in [(p.guard, PUBLISHED_TWO_LINEAR.guard), (p.branch1, PUBLISHED_TWO_LINEAR.branch1),
                      (p.branch2, PUBLISHED_TWO_LINEAR.branch2)]:
        assert np.allclose(got, want, atol=0.01)
    assert p.residual < 1e-6


def test_round_trip_other_params():
    q = TwoLinearParams(guard=(0.9, 0.3, -0.2), branch1=(-0.05, 0.1, -0.2, 0.3), branch2=(0.02, -0.5, 0.1))
    p = fit_two_plane(TwoLinearAction(q))
    assert np.allclose(p.guard, q.guard, atol=0.01)
    assert np.allclose(p.branch1, q.branch1, atol=0.01)
    assert np.allclose(p.branch2, q.branch2, atol=0.01)


def test_affine_scorer_is_single_plane():
    p = fit_two_plane(Affine([0.1, 0.0, -0.3, -0.2], 0.5))
    assert p.single_plane
    assert np.allclose(p.branch1, (0.1, -0.2, -0.3, 0.5), atol=1e-9)
    assert p.residual < 1e-9


def test_distance_only_net_is_rejected():
    with pytest.raises(SchemaError):
        fit_two_plane(QNetwork.for_schema(DIST, seed=0))
    with pytest.raises(SchemaError):
        surface_grid(QNetwork.for_schema(DIST, seed=0))


def test_constant_scorer_gives_constant_grid(tmp_path):
    Z = surface_export(Affine([0, 0, 0, 0], -0.25), tmp_path / "s.csv")
    assert np.all(Z == -0.25)
    rows = list(csv.DictReader(open(tmp_path / "s.csv")))
    assert len(rows) == 21 * 41
    assert set(rows[0]) == {"d_v", "ns_v", "ns_u", "d_u", "z"}


def test_published_surface_slice_is_two_decreasing_planes():
    ns_u, d_u, Z = surface_grid(TwoLinearAction(), d_v=4.0, ns_v=1.2)
    pol = TwoLinearAction()
    for i, nu in enumerate(ns_u):
        X = np.column_stack([np.full_like(d_u, 4.0), np.full_like(d_u, 1.2), d_u, np.full_like(d_u, nu)])
        g = pol.guard_holds(X)
        assert g.any() and (~g).any()
        for branch in (g, ~g):
            assert np.all(np.diff(Z[i][branch]) < 0)


def test_trained_net_grid_is_finite():
    net = QNetwork.for_schema("dist+ns", seed=2)
    _, _, Z = surface_grid(net)
    assert np.all(np.isfinite(Z))
