"""Small policy/value MLP with hand-written backpropagation."""
from __future__ import annotations

from typing import List, Sequence

import numpy as np


def orthogonal(rng: np.random.Generator, shape, gain: float = 1.0) -> np.ndarray:
    rows, cols = shape
    a = rng.normal(size=(max(rows, cols), min(rows, cols)))
    q, r = np.linalg.qr(a)
    q = q * np.sign(np.diag(r))
    if rows < cols:
        q = q.T
    return gain * q[:rows, :cols]


def log_softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=-1, keepdims=True)
    return z - np.log(np.exp(z).sum(axis=-1, keepdims=True))


class PolicyValueNet:
    """Shared two-layer tanh trunk with a softmax action head and a scalar value head."""

    PARAM_NAMES = ("W1", "b1", "W2", "b2", "Wp", "bp", "Wv", "bv")

    def __init__(self, obs_dim: int = 15, n_actions: int = 5, hidden: int = 64, seed=0):
        rng = seed if isinstance(seed, np.random.Generator) else np.random.Generator(np.random.PCG64(seed))
        self.obs_dim, self.n_actions, self.hidden = obs_dim, n_actions, hidden
        self.params: List[np.ndarray] = [
            orthogonal(rng, (obs_dim, hidden), np.sqrt(2)), np.zeros(hidden),
            orthogonal(rng, (hidden, hidden), np.sqrt(2)), np.zeros(hidden),
            orthogonal(rng, (hidden, n_actions), 0.01), np.zeros(n_actions),
            orthogonal(rng, (hidden, 1), 1.0), np.zeros(1),
        ]

    # -- flat parameter view
    @property
    def shapes(self):
        return [p.shape for p in self.params]

    def get_flat(self) -> np.ndarray:
        return np.concatenate([p.ravel() for p in self.params])

    def set_flat(self, flat: np.ndarray) -> None:
        flat = np.asarray(flat, dtype=float)
        offset = 0
        for i, p in enumerate(self.params):
            n = p.size
            self.params[i] = flat[offset:offset + n].reshape(p.shape).copy()
            offset += n
        if offset != flat.size:
            raise ValueError("flat parameter vector has the wrong length")

    def copy(self) -> "PolicyValueNet":
        other = PolicyValueNet.__new__(PolicyValueNet)
        other.obs_dim, other.n_actions, other.hidden = self.obs_dim, self.n_actions, self.hidden
        other.params = [p.copy() for p in self.params]
        return other

    # -- forward / backward
    def forward(self, obs: np.ndarray):
        W1, b1, W2, b2, Wp, bp, Wv, bv = self.params
        h1 = np.tanh(obs @ W1 + b1)
        h2 = np.tanh(h1 @ W2 + b2)
        logits = h2 @ Wp + bp
        value = (h2 @ Wv + bv)[:, 0]
        return logits, value, (obs, h1, h2)

    def act_probs(self, obs: np.ndarray):
        logits, value, _ = self.forward(obs)
        return np.exp(log_softmax(logits)), value

    def backward(self, cache, dlogits: np.ndarray, dvalue: np.ndarray) -> List[np.ndarray]:
        obs, h1, h2 = cache
        W1, b1, W2, b2, Wp, bp, Wv, bv = self.params
        dv = dvalue[:, None]
        gWp, gbp = h2.T @ dlogits, dlogits.sum(0)
        gWv, gbv = h2.T @ dv, dv.sum(0)
        dh2 = (dlogits @ Wp.T + dv @ Wv.T) * (1 - h2 ** 2)
        gW2, gb2 = h1.T @ dh2, dh2.sum(0)
        dh1 = (dh2 @ W2.T) * (1 - h1 ** 2)
        gW1, gb1 = obs.T @ dh1, dh1.sum(0)
        return [gW1, gb1, gW2, gb2, gWp, gbp, gWv, gbv]


def clip_grad_norm(grads: Sequence[np.ndarray], max_norm: float):
    norm = float(np.sqrt(sum(float((g * g).sum()) for g in grads)))
    if norm > max_norm:
        scale = max_norm / (norm + 1e-12)
        grads = [g * scale for g in grads]
    return list(grads), norm
