from __future__ import annotations

from typing import Dict

import numpy as np

from src.core.errors import ConfigError
from src.model.danrl import ModelParams


class SGD:
    def __init__(self, learning_rate: float):
        self.learning_rate = learning_rate

    def step(self, params: ModelParams, grads: ModelParams) -> None:
        g = grads.arrays()
        for name, p in params.arrays().items():
            p -= self.learning_rate * g[name]


class Momentum:
    """SGD with heavy-ball momentum."""

    def __init__(self, learning_rate: float, momentum: float = 0.9):
        self.learning_rate = learning_rate
        self.momentum = momentum
        self.velocity: Dict[str, np.ndarray] = {}

    def step(self, params: ModelParams, grads: ModelParams) -> None:
        g = grads.arrays()
        for name, p in params.arrays().items():
            v = self.velocity.setdefault(name, np.zeros_like(p))
            v *= self.momentum
            v -= self.learning_rate * g[name]
            p += v


class Adam:
    """Adam with bias correction; state is kept per parameter name."""

    def __init__(self, learning_rate: float, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.learning_rate = learning_rate
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m: Dict[str, np.ndarray] = {}
        self.v: Dict[str, np.ndarray] = {}

    def step(self, params: ModelParams, grads: ModelParams) -> None:
        self.t += 1
        g = grads.arrays()
        lr_t = self.learning_rate * np.sqrt(1.0 - self.beta2 ** self.t) / (1.0 - self.beta1 ** self.t)
        for name, p in params.arrays().items():
            m = self.m.setdefault(name, np.zeros_like(p))
            v = self.v.setdefault(name, np.zeros_like(p))
            m *= self.beta1
            m += (1.0 - self.beta1) * g[name]
            v *= self.beta2
            v += (1.0 - self.beta2) * g[name] ** 2
            p -= lr_t * m / (np.sqrt(v) + self.eps)


def make_optimizer(name: str, learning_rate: float, momentum: float = 0.9):
    if name == "sgd":
        return SGD(learning_rate)
    if name == "momentum":
        return Momentum(learning_rate, momentum)
    if name == "adam":
        return Adam(learning_rate)
    raise ConfigError(f"unknown optimizer {name!r}")
