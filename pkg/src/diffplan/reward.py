"""Reward models built on plans: sequential subgoal bonuses and a dense plan-likelihood term."""
from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .planner import Plan, PlanLibrary
from .state import SymbolicState

PROB_FLOOR = 1e-12


@dataclass(frozen=True)
class RewardConfig:
    bonus: float = 1.0           # scale of the subgoal bonus
    omega: float = 1.0 / 20.0    # scale of the dense term
    shift: float = 0.01          # constant subtracted from the dense term
    total_steps: int = 640

    def __post_init__(self):
        if not self.bonus > 0:
            raise ValueError("bonus must be positive")
        if self.total_steps < 1:
            raise ValueError("total_steps must be at least 1")


class RewardTracker:
    """Follows one plan through an episode. ``pointer`` is the 1-based index of the next expected move."""

    def __init__(self, plan: Plan):
        self.plan = plan
        self.reset()

    def reset(self) -> None:
        self.pointer = 1
        self.num_steps = 0

    @property
    def finished(self) -> bool:
        return self.pointer > len(self.plan)

    def expected_state(self) -> Optional[str]:
        return None if self.finished else self.plan.moves[self.pointer - 1].post_state


def static_reasoner_reward(tracker: RewardTracker, observed: SymbolicState, config: RewardConfig):
    """Bonus for reaching the next planned post-state, decaying with elapsed steps.

    ``tracker.num_steps`` must already count the step that produced ``observed``.
    Returns ``(reward, tracker)``; the tracker is advanced in place.
    """
    if not tracker.finished and observed.progress == tracker.expected_state():
        tracker.pointer += 1
        return max(config.bonus - tracker.num_steps / config.total_steps, 0.0), tracker
    return 0.0, tracker


def shaped_reward(env_reward: float, reasoner_reward: float) -> float:
    return env_reward + reasoner_reward


def adaptive_reward(plan_probabilities: Sequence[float]) -> float:
    """``log(sum(p))`` over plan probabilities, computed as a shifted log-sum-exp of ``log p``."""
    p = np.maximum(np.asarray(plan_probabilities, dtype=float), PROB_FLOOR)
    if p.size == 0:
        raise ValueError("no plan probabilities")
    logs = np.log(p)
    m = logs.max()
    return float(m + math.log(np.exp(logs - m).sum()))


def combined_adaptive_reward(env_reward: float, reasoner_reward: float, adaptive: float,
                             config: RewardConfig) -> float:
    """Dense term ``omega * adaptive - shift`` plus environment and (possibly zero) subgoal reward."""
    return config.omega * adaptive - config.shift + env_reward + reasoner_reward


class RewardModel:
    """Uniform shaping interface used by the trainers.

    ``kind`` is ``"none"``, ``"static"`` or ``"adaptive"``. ``shape`` returns the
    shaped reward and a breakdown ``(env, reasoner, adaptive_term, total)``.
    """

    def __init__(self, kind: str = "none", library: Optional[PlanLibrary] = None,
                 config: RewardConfig = RewardConfig(), warn_positive: bool = True):
        if kind not in ("none", "static", "adaptive"):
            raise ValueError(f"unknown reward model {kind!r}")
        if kind != "none" and library is None:
            raise ValueError(f"{kind} reward model needs a plan library")
        self.kind, self.library, self.config = kind, library, config
        self.warn_positive = warn_positive
        self.tracker: Optional[RewardTracker] = None
        self.plan: Optional[Plan] = None

    @property
    def needs_distances(self) -> bool:
        return self.kind == "adaptive"

    def begin_episode(self, state: SymbolicState) -> None:
        if self.kind == "none":
            return
        if self.plan is None or self.plan.start != state.progress:
            self.plan = self.library.best(state)
        self.tracker = RewardTracker(self.plan)

    def shape(self, env_reward: float, state: SymbolicState):
        if self.kind == "none":
            return env_reward, (env_reward, 0.0, 0.0, env_reward)
        self.tracker.num_steps += 1
        bonus, _ = static_reasoner_reward(self.tracker, state, self.config)
        if self.kind == "static":
            total = shaped_reward(env_reward, bonus)
            return total, (env_reward, bonus, 0.0, total)
        probs = [p.probability for p in self.library.scored(state)] or [1.0]
        dense = self.config.omega * adaptive_reward(probs) - self.config.shift
        if dense >= 0 and self.warn_positive:
            warnings.warn(f"dense plan reward is non-negative ({dense:.4g}) in state {state}", RuntimeWarning)
        total = combined_adaptive_reward(env_reward, bonus, adaptive_reward(probs), self.config)
        return total, (env_reward, bonus, dense, total)


def write_breakdown(path, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["env_reward", "reasoner_reward", "adaptive_term", "shaped_total"])
        for r in rows:
            w.writerow([f"{x:.9g}" for x in r])
