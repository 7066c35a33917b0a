"""Clipped-surrogate and vanilla actor-critic losses with analytic gradients."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, List, Tuple

import numpy as np

from .network import PolicyValueNet, clip_grad_norm, log_softmax


@dataclass(frozen=True)
class TrainerConfig:
    epochs: int = 4
    batch_size: int = 256
    frames_per_proc: int = 128
    discount: float = 0.99
    lr: float = 1e-4
    gae_lambda: float = 0.95
    entropy_coef: float = 0.01
    value_loss_coef: float = 0.5
    max_grad_norm: float = 0.5
    clip_eps: float = 0.2
    optim_eps: float = 1e-8
    optim_alpha: float = 0.99
    workers: int = 4
    total_frames: int = 300_000
    seed: int = 0

    def __post_init__(self):
        for name in ("epochs", "batch_size", "frames_per_proc", "workers", "total_frames"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")
        for name in ("discount", "lr", "gae_lambda", "max_grad_norm", "optim_eps"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if not 0 < self.clip_eps:
            raise ValueError("clip_eps must be positive")


def policy_loss_and_grad(net: PolicyValueNet, obs, actions, old_log_probs, advantages, returns,
                         config: TrainerConfig, clip: bool = True) -> Tuple[float, Dict[str, float], List[np.ndarray]]:
    """Total loss ``policy - entropy_coef * entropy + value_coef * value`` and parameter gradients.

    With ``clip`` the policy term is the clipped surrogate on importance ratios;
    without it the plain ``-mean(log_prob * advantage)`` policy-gradient loss.
    """
    n = len(actions)
    logits, values, cache = net.forward(obs)
    logp = log_softmax(logits)
    p = np.exp(logp)
    idx = np.arange(n)
    logp_a = logp[idx, actions]
    entropy_i = -(p * logp).sum(axis=1)
    if clip:
        ratio = np.exp(logp_a - old_log_probs)
        surr1 = ratio * advantages
        surr2 = np.clip(ratio, 1 - config.clip_eps, 1 + config.clip_eps) * advantages
        policy_loss = -np.minimum(surr1, surr2).mean()
        dlogp_a = -np.where(surr1 <= surr2, advantages, 0.0) * ratio / n
    else:
        policy_loss = -(logp_a * advantages).mean()
        dlogp_a = -advantages / n
    value_loss = ((values - returns) ** 2).mean()
    entropy = entropy_i.mean()
    loss = policy_loss - config.entropy_coef * entropy + config.value_loss_coef * value_loss
    stats = {"policy_loss": float(policy_loss), "value_loss": float(value_loss), "entropy": float(entropy)}
    if not np.isfinite(loss):
        raise FloatingPointError(f"non-finite loss: {stats}")
    onehot = np.zeros_like(p)
    onehot[idx, actions] = 1.0
    dlogits = dlogp_a[:, None] * (onehot - p)
    dlogits += config.entropy_coef / n * p * (logp + entropy_i[:, None])
    dvalues = config.value_loss_coef * 2.0 * (values - returns) / n
    grads = net.backward(cache, dlogits, dvalues)
    return float(loss), stats, grads


def ppo_update(net: PolicyValueNet, buffer, config: TrainerConfig, optimizer, rng: np.random.Generator):
    """``epochs`` passes of shuffled minibatches; returns mean loss statistics."""
    obs, actions, logp, _, adv, ret = buffer.flat()
    n = len(actions)
    totals = {"policy_loss": 0.0, "value_loss": 0.0, "entropy": 0.0, "grad_norm": 0.0}
    count = 0
    for _ in range(config.epochs):
        order = rng.permutation(n)
        for start in range(0, n, config.batch_size):
            mb = order[start:start + config.batch_size]
            _, stats, grads = policy_loss_and_grad(net, obs[mb], actions[mb], logp[mb], adv[mb], ret[mb], config)
            grads, norm = clip_grad_norm(grads, config.max_grad_norm)
            optimizer.step(net.params, grads)
            for k, v in stats.items():
                totals[k] += v
            totals["grad_norm"] += norm
            count += 1
    return {k: v / count for k, v in totals.items()}


def a2c_update(net: PolicyValueNet, buffer, config: TrainerConfig, optimizer, rng=None):
    """One gradient step on the whole buffer with the unclipped policy-gradient loss."""
    obs, actions, logp, _, adv, ret = buffer.flat()
    _, stats, grads = policy_loss_and_grad(net, obs, actions, logp, adv, ret, config, clip=False)
    grads, norm = clip_grad_norm(grads, config.max_grad_norm)
    optimizer.step(net.params, grads)
    stats["grad_norm"] = norm
    return stats
