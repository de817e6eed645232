"""Feedforward Q-network in plain numpy: forward, backprop, Adam.

The default architecture is ``Omega -> 50*Omega -> Omega -> 1`` with ReLU on
the hidden layers and a linear output.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .ranking import DIST, DIST_NS, SampleSet, width

MODEL_FORMAT = "tensile-qnet/1"


class SchemaError(ValueError):
    pass


class TrainingDivergence(RuntimeError):
    def __init__(self, step, where="step"):
        super().__init__(f"loss became non-finite at {where} {step}")
        self.step = step


def default_widths(omega: int) -> list[int]:
    return [omega, 50 * omega, omega, 1]


class QNetwork:
    """Dense ReLU network mapping feature rows to scalar Q estimates."""

    def __init__(self, widths, seed=None, schema=None, norm=1000.0, provenance=None, activation="relu"):
        widths = [int(w) for w in widths]
        if len(widths) < 2 or widths[-1] != 1:
            raise ValueError(f"bad layer widths {widths}")
        if activation != "relu":
            raise ValueError(f"unsupported activation {activation!r}")
        self.widths = widths
        self.schema = schema or {2: DIST, 4: DIST_NS}.get(widths[0])
        self.norm = float(norm)
        self.seed = seed
        self.activation = activation
        self.provenance = dict(provenance or {})
        rng = np.random.default_rng(seed)
        self.weights, self.biases = [], []
        for fan_in, fan_out in zip(widths[:-1], widths[1:]):
            bound = 1.0 / np.sqrt(fan_in)
            self.weights.append(rng.uniform(-bound, bound, size=(fan_in, fan_out)))
            self.biases.append(rng.uniform(-bound, bound, size=fan_out))

    @classmethod
    def for_schema(cls, schema: str, seed=None, **kw) -> "QNetwork":
        return cls(default_widths(width(schema)), seed=seed, schema=schema, **kw)

    @property
    def omega(self) -> int:
        return self.widths[0]

    @property
    def params(self) -> list[np.ndarray]:
        return [p for pair in zip(self.weights, self.biases) for p in pair]

    def n_params(self) -> int:
        return sum(p.size for p in self.params)

    def copy(self) -> "QNetwork":
        new = object.__new__(QNetwork)
        new.__dict__.update(self.__dict__)
        new.weights = [w.copy() for w in self.weights]
        new.biases = [b.copy() for b in self.biases]
        new.provenance = dict(self.provenance)
        return new

    def _check(self, X):
        X = np.asarray(X, dtype=float)
        if X.shape[-1] != self.omega:
            raise SchemaError(f"expected {self.omega} features, got {X.shape[-1]}")
        return X

    def predict(self, X) -> np.ndarray:
        X = self._check(X)
        shape = X.shape[:-1]
        h = X.reshape(-1, self.omega)
        last = len(self.weights) - 1
        for i, (W, b) in enumerate(zip(self.weights, self.biases)):
            h = h @ W + b
            if i < last:
                h = np.maximum(h, 0.0)
        return h.reshape(shape)

    def forward(self, x) -> float:
        x = np.asarray(x, dtype=float)
        if x.ndim != 1:
            raise SchemaError("forward takes a single feature vector")
        return float(self.predict(x[None])[0])

    def loss_and_grads(self, X, Y):
        """Mean squared error and its gradient for every parameter."""
        X = self._check(X)
        Y = np.asarray(Y, dtype=float).reshape(-1)
        acts = [X]
        pre = []
        h = X
        last = len(self.weights) - 1
        for i, (W, b) in enumerate(zip(self.weights, self.biases)):
            z = h @ W + b
            pre.append(z)
            h = np.maximum(z, 0.0) if i < last else z
            acts.append(h)
        err = h[:, 0] - Y
        loss = float(np.mean(err ** 2))
        delta = (2.0 / len(Y)) * err[:, None]
        gW, gb = [None] * len(self.weights), [None] * len(self.weights)
        for i in range(last, -1, -1):
            gW[i] = acts[i].T @ delta
            gb[i] = delta.sum(axis=0)
            if i > 0:
                delta = (delta @ self.weights[i].T) * (pre[i - 1] > 0)
        return loss, [g for pair in zip(gW, gb) for g in pair]

    def loss(self, X, Y) -> float:
        err = self.predict(X) - np.asarray(Y, dtype=float).reshape(-1)
        return float(np.mean(err ** 2))

    def to_dict(self) -> dict:
        return {
            "format": MODEL_FORMAT,
            "schema": self.schema,
            "omega": self.omega,
            "widths": self.widths,
            "activation": self.activation,
            "norm": self.norm,
            "seed": self.seed,
            "weights": [w.ravel().tolist() for w in self.weights],
            "biases": [b.tolist() for b in self.biases],
            "provenance": self.provenance,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "QNetwork":
        if doc.get("format") != MODEL_FORMAT:
            raise ValueError(f"not a model document: format={doc.get('format')!r}")
        net = cls(doc["widths"], seed=doc.get("seed"), schema=doc["schema"], norm=doc["norm"],
                  provenance=doc.get("provenance"), activation=doc.get("activation", "relu"))
        w = doc["widths"]
        net.weights = [np.array(flat, dtype=float).reshape(a, b) for flat, a, b in zip(doc["weights"], w[:-1], w[1:])]
        net.biases = [np.array(b, dtype=float) for b in doc["biases"]]
        return net

    def save(self, path):
        Path(path).write_text(json.dumps(self.to_dict()) + "\n")

    @classmethod
    def load(cls, path) -> "QNetwork":
        return cls.from_dict(json.loads(Path(path).read_text()))

    def __eq__(self, other):
        if not isinstance(other, QNetwork):
            return NotImplemented
        return (self.widths == other.widths and self.schema == other.schema and self.norm == other.norm
                and all(np.array_equal(a, b) for a, b in zip(self.params, other.params)))

    __hash__ = None


@dataclass
class Adam:
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    t: int = 0
    m: list = field(default_factory=list)
    v: list = field(default_factory=list)

    def step(self, params, grads):
        if not self.m:
            self.m = [np.zeros_like(p) for p in params]
            self.v = [np.zeros_like(p) for p in params]
        self.t += 1
        c1 = 1 - self.beta1 ** self.t
        c2 = 1 - self.beta2 ** self.t
        for p, g, m, v in zip(params, grads, self.m, self.v):
            m *= self.beta1
            m += (1 - self.beta1) * g
            v *= self.beta2
            v += (1 - self.beta2) * g * g
            p -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)


@dataclass
class TrainConfig:
    iterations: int = 5000
    lr: float = 1e-3
    seed: int | None = None

    def __post_init__(self):
        if self.iterations < 0:
            raise ValueError("iterations must be >= 0")


def fit(net: QNetwork, X, Y, iterations: int, optimizer: Adam, where: str = "step", offset: int = 0) -> list[float]:
    """Full-batch gradient steps in place; returns the loss before each step."""
    trace = []
    params = net.params
    for it in range(iterations):
        with np.errstate(over="ignore", invalid="ignore"):  # checked just below
            loss, grads = net.loss_and_grads(X, Y)
        if not np.isfinite(loss) or not all(np.all(np.isfinite(g)) for g in grads):
            raise TrainingDivergence(offset + it, where)
        trace.append(loss)
        optimizer.step(params, grads)
    return trace


def train_supervised(net: QNetwork, samples: SampleSet, cfg: TrainConfig | None = None):
    """Fit ``net`` (a copy) to the sample targets; returns ``(net, loss_trace)``.

    The trace holds the loss before every step plus the final loss.
    """
    cfg = cfg or TrainConfig()
    if len(samples) < 1:
        raise ValueError("need at least one sample")
    if samples.X.shape[1] != net.omega:
        raise SchemaError(f"samples have {samples.X.shape[1]} features, network expects {net.omega}")
    net = net.copy()
    opt = Adam(lr=cfg.lr)
    trace = fit(net, samples.X, samples.Y, cfg.iterations, opt)
    final = net.loss(samples.X, samples.Y)
    if not np.isfinite(final):
        raise TrainingDivergence(cfg.iterations)
    trace.append(final)
    return net, trace


def gradient_check(net: QNetwork, X, Y, h: float = 1e-5) -> float:
    """Max relative gap between backprop and central differences of the MSE."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    Y = np.atleast_1d(np.asarray(Y, dtype=float))
    _, grads = net.loss_and_grads(X, Y)
    worst = 0.0
    for p, g in zip(net.params, grads):
        it = np.nditer(p, flags=["multi_index"])
        for _ in it:
            idx = it.multi_index
            old = p[idx]
            p[idx] = old + h
            up = net.loss(X, Y)
            p[idx] = old - h
            down = net.loss(X, Y)
            p[idx] = old
            num = (up - down) / (2 * h)
            scale = max(abs(num), abs(g[idx]), 1e-6)
            worst = max(worst, abs(num - g[idx]) / scale)
    return worst


def gradient_norms(net: QNetwork, X, Y, h: float = 1e-5):
    """``(max |analytic|, max |numeric|)`` over all parameters."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    Y = np.atleast_1d(np.asarray(Y, dtype=float))
    _, grads = net.loss_and_grads(X, Y)
    num_max = 0.0
    for p in net.params:
        flat = p.reshape(-1)
        for i in range(flat.size):
            old = flat[i]
            flat[i] = old + h
            up = net.loss(X, Y)
            flat[i] = old - h
            down = net.loss(X, Y)
            flat[i] = old
            num_max = max(num_max, abs(up - down) / (2 * h))
    return max(float(np.abs(g).max()) for g in grads), num_max
