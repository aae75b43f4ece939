"""One-hidden-layer perceptron regressor trained by full-batch backprop.

Sigmoid hidden units, linear output, squared-error loss on standardized
inputs and targets, gradient descent with momentum.
"""
from __future__ import annotations

import zlib
from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from . import kernels
from .errors import DataError, DivergedLoss
from .learners import Regressor


@dataclass(frozen=True)
class TrainConfig:
    hidden: int = 8
    epochs: int = 500
    learning_rate: float = 0.01
    momentum: float = 0.9
    seed: int = 0

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise DataError("learning rate must be positive")
        if self.epochs < 1:
            raise DataError("epochs must be >= 1")
        if self.hidden < 1:
            raise DataError("hidden width must be >= 1")
        if not 0 <= self.momentum < 1:
            raise DataError("momentum must be in [0, 1)")


@dataclass
class MlpParams:
    W1: np.ndarray  # (n_inputs, hidden)
    b1: np.ndarray  # (hidden,)
    w2: np.ndarray  # (hidden,)
    b2: float

    def copy(self):
        return MlpParams(self.W1.copy(), self.b1.copy(), self.w2.copy(), float(self.b2))

    def flat(self):
        return np.concatenate([self.W1.ravel(), self.b1, self.w2, [self.b2]])

    @classmethod
    def from_flat(cls, v, n_inputs, hidden):
        v = np.asarray(v, dtype=np.float64)
        a = n_inputs * hidden
        return cls(v[:a].reshape(n_inputs, hidden).copy(), v[a:a + hidden].copy(),
                   v[a + hidden:a + 2 * hidden].copy(), float(v[-1]))


def init_params(n_inputs, hidden, seed, input_keys=None) -> MlpParams:
    """Uniform(-0.5, 0.5) weights.

    Each input's row of ``W1`` comes from its own stream keyed by
    ``input_keys`` (feature names, default column positions), so permuting
    named inputs permutes the rows instead of redrawing them.
    """
    keys = list(input_keys) if input_keys is not None else [str(j) for j in range(n_inputs)]
    W1 = np.empty((n_inputs, hidden))
    for j, key in enumerate(keys):
        rng = np.random.default_rng([seed, 1, zlib.crc32(str(key).encode())])
        W1[j] = rng.uniform(-0.5, 0.5, hidden)
    rng = np.random.default_rng([seed, 2])
    b1 = rng.uniform(-0.5, 0.5, hidden)
    w2 = rng.uniform(-0.5, 0.5, hidden)
    b2 = float(rng.uniform(-0.5, 0.5))
    return MlpParams(W1, b1, w2, b2)


def forward(p: MlpParams, X):
    h = expit(X @ p.W1 + p.b1)
    return h, h @ p.w2 + p.b2


def loss(p: MlpParams, X, y) -> float:
    """Mean squared error of the network on ``(X, y)``."""
    _, out = forward(p, X)
    r = out - y
    return float(np.mean(r * r))


def _loss_and_gradient(p: MlpParams, X, y):
    g = MlpParams(np.empty_like(p.W1), np.empty_like(p.b1), np.empty_like(p.w2), 0.0)
    cur, g.b2 = kernels.mlp_loss_grad(X, y, p.W1, p.b1, p.w2, float(p.b2), g.W1, g.b1, g.w2)
    return cur, g


def gradient(p: MlpParams, X, y) -> MlpParams:
    """Backpropagated gradient of :func:`loss`, shaped like the parameters."""
    X = np.ascontiguousarray(X, dtype=np.float64)
    y = np.ascontiguousarray(y, dtype=np.float64)
    return _loss_and_gradient(p, X, y)[1]


def train(X, y, cfg: TrainConfig, input_keys=None, history=None) -> MlpParams:
    """Momentum gradient descent on already-standardized data.

    ``history``, if a list, receives the loss before each update.
    """
    X = np.ascontiguousarray(X, dtype=np.float64)
    y = np.ascontiguousarray(y, dtype=np.float64)
    p = init_params(X.shape[1], cfg.hidden, cfg.seed, input_keys)
    v = MlpParams(np.zeros_like(p.W1), np.zeros_like(p.b1), np.zeros_like(p.w2), 0.0)
    lr, mu = cfg.learning_rate, cfg.momentum
    for epoch in range(cfg.epochs):
        cur, g = _loss_and_gradient(p, X, y)
        if not np.isfinite(cur):
            raise DivergedLoss(epoch, cur)
        if history is not None:
            history.append(cur)
        v.W1 = mu * v.W1 - lr * g.W1
        v.b1 = mu * v.b1 - lr * g.b1
        v.w2 = mu * v.w2 - lr * g.w2
        v.b2 = mu * v.b2 - lr * g.b2
        p.W1 = p.W1 + v.W1
        p.b1 = p.b1 + v.b1
        p.w2 = p.w2 + v.w2
        p.b2 = p.b2 + v.b2
    final = loss(p, X, y)
    if not np.isfinite(final):
        raise DivergedLoss(cfg.epochs, final)
    return p


class MLPRegressor(Regressor):
    name = "mlp"

    def __init__(self, config: TrainConfig = TrainConfig()):
        super().__init__()
        self.config = config

    def _fit(self, X, y):
        if X.shape[0] < 2:
            raise DataError("MLP needs at least 2 records")
        y_sd = np.std(y)
        if y_sd == 0:
            raise DataError("MLP needs a non-constant target")
        self.x_mean_ = X.mean(axis=0)
        sd = X.std(axis=0)
        self.x_scale_ = np.where(sd > 0, sd, 1.0)
        self.y_mean_ = float(np.mean(y))
        self.y_scale_ = float(y_sd)
        Z = (X - self.x_mean_) / self.x_scale_
        t = (y - self.y_mean_) / self.y_scale_
        self.params_ = train(Z, t, self.config, input_keys=self.feature_names)

    def _predict(self, X):
        Z = (X - self.x_mean_) / self.x_scale_
        _, out = forward(self.params_, Z)
        return out * self.y_scale_ + self.y_mean_

    def describe(self):
        c = self.config
        return f"hidden={c.hidden}, epochs={c.epochs}, lr={c.learning_rate}, momentum={c.momentum}"
