"""Parameter optimizers: plain SGD and bias-corrected Adam.

A trainer owns its own moment state keyed by parameter name, so two
trainers updating a shared parameter (multi-task training) keep independent
moments.  ``lr`` is a plain mutable attribute; the decay policy rewrites it
between steps.  Every step ends by zeroing the gradients it consumed.
"""

from __future__ import annotations

from typing import Iterable

import numpy as np

from .tensor import Parameter


class SgdTrainer:
    def __init__(self, lr: float = 0.1):
        self.lr = float(lr)

    def step(self, params: Iterable[Parameter]) -> None:
        for p in params:
            p.value -= self.lr * p.grad
            p.grad[...] = 0.0


class AdamTrainer:
    def __init__(self, lr: float = 0.001, beta_1: float = 0.9,
                 beta_2: float = 0.999, eps: float = 1e-8):
        self.lr = float(lr)
        self.beta_1 = float(beta_1)
        self.beta_2 = float(beta_2)
        self.eps = float(eps)
        self.t = 0
        self._moments: dict[str, tuple[np.ndarray, np.ndarray]] = {}

    def step(self, params: Iterable[Parameter]) -> None:
        self.t += 1
        b1, b2 = self.beta_1, self.beta_2
        for p in params:
            m, v = self._moments.get(p.name, (np.zeros_like(p.value), np.zeros_like(p.value)))
            m = b1 * m + (1.0 - b1) * p.grad
            v = b2 * v + (1.0 - b2) * p.grad ** 2
            self._moments[p.name] = (m, v)
            m_hat = m / (1.0 - b1 ** self.t)
            v_hat = v / (1.0 - b2 ** self.t)
            p.value -= self.lr * m_hat / (np.sqrt(v_hat) + self.eps)
            p.grad[...] = 0.0
