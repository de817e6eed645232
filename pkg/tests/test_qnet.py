import numpy as np
import pytest

from tensile.qnet import (
    Adam,
    QNetwork,
    SchemaError,
    TrainConfig,
    TrainingDivergence,
    default_widths,
    fit,
    gradient_check,
    gradient_norms,
    train_supervised,
)
from tensile.ranking import DIST, DIST_NS, SampleSet


def test_default_architecture():
    assert default_widths(4) == [4, 200, 4, 1]
    assert default_widths(2) == [2, 100, 2, 1]
    net = QNetwork.for_schema(DIST_NS, seed=0)
    assert net.schema == DIST_NS and net.omega == 4
    assert net.n_params() == 4 * 200 + 200 + 200 * 4 + 4 + 4 + 1


def test_forward_by_hand():
    net = QNetwork([2, 2, 1], seed=0)
    net.weights = [np.array([[1.0, -1.0], [2.0, 0.5]]), np.array([[3.0], [-2.0]])]
    net.biases = [np.array([0.0, -1.0]), np.array([0.5])]
    # hidden pre-activation: (1 + 4, -1 + 1 - 1) = (5, -1) -> relu (5, 0)
    assert net.forward([1.0, 2.0]) == pytest.approx(15.5)
    assert net.predict(np.zeros((3, 2))) == pytest.approx([0.5, 0.5, 0.5])
    assert net.predict(np.zeros((2, 5, 2))).shape == (2, 5)


def test_backprop_matches_finite_differences():
    rng = np.random.default_rng(0)
    net = QNetwork([4, 12, 4, 1], seed=1)
    X, Y = rng.normal(size=(16, 4)), rng.normal(size=16)
    _, grads = net.loss_and_grads(X, Y)
    h = 1e-6
    for p, g in zip(net.params, grads):
        flat, gflat = p.reshape(-1), g.reshape(-1)
        for i in range(0, flat.size, 3):
            old = flat[i]
            flat[i] = old + h
            up = net.loss(X, Y)
            flat[i] = old - h
            down = net.loss(X, Y)
            flat[i] = old
            assert (up - down) / (2 * h) == pytest.approx(gflat[i], rel=1e-4, abs=1e-8)
    assert gradient_check(net, X[:4], Y[:4]) < 1e-4
    a, n = gradient_norms(net, X[:4], Y[:4])
    assert a == pytest.approx(n, rel=1e-4)


def test_schema_mismatch():
    net = QNetwork.for_schema(DIST, seed=0)
    with pytest.raises(SchemaError):
        net.predict(np.zeros((1, 4)))
    with pytest.raises(SchemaError):
        train_supervised(net, SampleSet(DIST_NS, np.zeros((2, 4)), np.zeros(2)))
    with pytest.raises(ValueError):
        QNetwork([4, 3, 2])


def test_save_load_round_trip(tmp_path):
    net = QNetwork.for_schema(DIST_NS, seed=3, provenance={"note": "x"})
    net.save(tmp_path / "m.json")
    back = QNetwork.load(tmp_path / "m.json")
    assert back == net and back.provenance == {"note": "x"}
    X = np.random.default_rng(0).uniform(0, 3, (10, 4))
    assert np.array_equal(back.predict(X), net.predict(X))


def test_same_seed_same_init():
    assert QNetwork.for_schema(DIST_NS, seed=5) == QNetwork.for_schema(DIST_NS, seed=5)
    assert QNetwork.for_schema(DIST_NS, seed=5) != QNetwork.for_schema(DIST_NS, seed=6)


def test_adam_first_step_is_lr_sign():
    p = [np.array([1.0, -2.0])]
    opt = Adam(lr=0.1)
    opt.step(p, [np.array([3.0, -0.5])])
    assert p[0] == pytest.approx([0.9, -1.9], abs=1e-6)


def test_training_reduces_loss():
    rng = np.random.default_rng(1)
    X = rng.uniform(0, 3, (200, 4))
    Y = -X[:, 2] - 0.3 * X[:, 3]
    net, trace = train_supervised(QNetwork.for_schema(DIST_NS, seed=0), SampleSet(DIST_NS, X, Y),
                                  TrainConfig(iterations=800))
    assert trace[-1] < 0.05 * trace[0]
    assert len(trace) == 801


def test_train_does_not_mutate_input():
    net = QNetwork.for_schema(DIST, seed=0)
    before = net.copy()
    train_supervised(net, SampleSet(DIST, [[1.0, 2.0]], [0.5]), TrainConfig(iterations=5))
    assert net == before


def test_divergence_raises():
    net = QNetwork([2, 3, 1], seed=0)
    with pytest.raises(TrainingDivergence) as err:
        fit(net, np.array([[1e200, 1e200]]), np.array([0.0]), 3, Adam())
    assert err.value.step == 0
    with pytest.raises(ValueError):
        TrainConfig(iterations=-1)
