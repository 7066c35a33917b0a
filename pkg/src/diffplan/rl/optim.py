"""First-order optimisers operating on lists of numpy parameter arrays in place."""
from __future__ import annotations

from typing import List, Sequence

import numpy as np


class Adam:
    def __init__(self, params: Sequence[np.ndarray], lr: float = 1e-4, betas=(0.9, 0.999), eps: float = 1e-8):
        self.lr, self.betas, self.eps = lr, betas, eps
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]
        self.t = 0

    def step(self, params: List[np.ndarray], grads: Sequence[np.ndarray]) -> None:
        self.t += 1
        b1, b2 = self.betas
        c1, c2 = 1 - b1 ** self.t, 1 - b2 ** self.t
        for p, g, m, v in zip(params, grads, self.m, self.v):
            m *= b1
            m += (1 - b1) * g
            v *= b2
            v += (1 - b2) * g * g
            p -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)


class RMSprop:
    def __init__(self, params: Sequence[np.ndarray], lr: float = 1e-4, alpha: float = 0.99, eps: float = 1e-8):
        self.lr, self.alpha, self.eps = lr, alpha, eps
        self.sq = [np.zeros_like(p) for p in params]

    def step(self, params: List[np.ndarray], grads: Sequence[np.ndarray]) -> None:
        for p, g, s in zip(params, grads, self.sq):
            s *= self.alpha
            s += (1 - self.alpha) * g * g
            p -= self.lr * g / (np.sqrt(s) + self.eps)
