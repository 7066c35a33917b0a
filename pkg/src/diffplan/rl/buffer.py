"""Rollout storage and generalized advantage estimation."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np


@dataclass
class RolloutBuffer:
    """Time-major arrays of shape ``(frames_per_proc, workers)``; ``obs`` adds a feature axis."""

    obs: np.ndarray
    actions: np.ndarray
    log_probs: np.ndarray
    values: np.ndarray
    rewards: np.ndarray
    dones: np.ndarray
    last_values: np.ndarray
    advantages: Optional[np.ndarray] = None
    returns: Optional[np.ndarray] = None
    episode_returns: List[float] = field(default_factory=list)
    reward_breakdown: np.ndarray = field(default_factory=lambda: np.zeros(4))

    def __len__(self) -> int:
        return self.rewards.size

    def flat(self):
        """Flattened ``(obs, actions, log_probs, values, advantages, returns)``."""
        n = len(self)
        return (self.obs.reshape(n, -1), self.actions.reshape(n), self.log_probs.reshape(n),
                self.values.reshape(n), self.advantages.reshape(n), self.returns.reshape(n))


def gae(rewards: np.ndarray, values: np.ndarray, dones: np.ndarray, last_values: np.ndarray,
        discount: float = 0.99, lam: float = 0.95):
    """Advantages and returns for ``(T, workers)`` arrays.

    ``dones[t]`` marks that the transition at ``t`` ended an episode, so
    nothing is bootstrapped across it. ``last_values`` bootstraps the final step.
    """
    rewards = np.asarray(rewards, dtype=float)
    values = np.asarray(values, dtype=float)
    T = rewards.shape[0]
    adv = np.zeros_like(rewards)
    running = np.zeros_like(rewards[0])
    next_values = np.asarray(last_values, dtype=float)
    for t in range(T - 1, -1, -1):
        alive = 1.0 - np.asarray(dones[t], dtype=float)
        delta = rewards[t] + discount * next_values * alive - values[t]
        running = delta + discount * lam * alive * running
        adv[t] = running
        next_values = values[t]
    return adv, adv + values


def normalize(adv: np.ndarray) -> np.ndarray:
    std = adv.std()
    return (adv - adv.mean()) / (std if std > 1e-8 else 1.0)


def compute_gae(buffer: RolloutBuffer, discount: float = 0.99, lam: float = 0.95, normalize_adv: bool = True):
    adv, ret = gae(buffer.rewards, buffer.values, buffer.dones, buffer.last_values, discount, lam)
    buffer.returns = ret
    buffer.advantages = normalize(adv) if normalize_adv else adv
    return buffer.advantages, buffer.returns
