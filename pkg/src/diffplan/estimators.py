"""Estimator-style wrappers around rule-weight learning and policy training."""
from __future__ import annotations

import dataclasses

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .doorkey import ACTIONS, OBS_DIM, EnvConfig
from .infer import InferConfig, bce_loss, infer, train_rule_weights
from .validation import check_observations, check_targets, check_tasks


class RuleWeightLearner(BaseEstimator):
    """Learns rule-selection weights so that each task's target atom is derived.

    ``X`` is a sequence of :class:`~diffplan.infer.TrainTask`; an optional ``y``
    overrides the tasks' target probabilities.
    """

    def __init__(self, n_slots=6, gamma=0.01, lr=0.1, n_steps=1000, init_std=0.1, random_state=0,
                 softor="anchored"):
        self.n_slots = n_slots
        self.gamma = gamma
        self.lr = lr
        self.n_steps = n_steps
        self.init_std = init_std
        self.random_state = random_state
        self.softor = softor

    def _config(self, T=1):
        return InferConfig(gamma=self.gamma, T=T, M=self.n_slots, softor=self.softor)

    def fit(self, X, y=None):
        tasks = check_tasks(X)
        if y is not None:
            y = check_targets(y, len(tasks))
            tasks = [dataclasses.replace(t, target=float(v)) for t, v in zip(tasks, y)]
        res = train_rule_weights(tasks, None, self._config(), lr=self.lr, steps=self.n_steps,
                                 seed=self.random_state, init_std=self.init_std)
        self.W_ = res.W
        self.loss_curve_ = res.mean_loss
        self.task_losses_ = res.loss_trace
        self.n_tasks_ = len(tasks)
        return self

    def predict_proba(self, X) -> np.ndarray:
        check_is_fitted(self, "W_")
        tasks = check_tasks(X)
        return np.array([infer(t.v0, t.encoding, self.W_, self._config(t.T))[t.target_index] for t in tasks])

    def predict(self, X) -> np.ndarray:
        return (self.predict_proba(X) >= 0.5).astype(int)

    def score(self, X, y=None) -> float:
        """Negative mean binary cross-entropy (higher is better)."""
        tasks = check_tasks(X)
        y = np.array([t.target for t in tasks]) if y is None else check_targets(y, len(tasks))
        p = self.predict_proba(tasks)
        return -float(np.mean([bce_loss(t, q) for t, q in zip(y, p)]))


class PolicyAgent(BaseEstimator):
    """Trains a policy on the DoorKey world. ``fit`` takes an EnvConfig (or uses the default)."""

    def __init__(self, algo="ppo", reward_model="none", total_frames=300_000, lr=1e-4, workers=4,
                 random_state=0):
        self.algo = algo
        self.reward_model = reward_model
        self.total_frames = total_frames
        self.lr = lr
        self.workers = workers
        self.random_state = random_state

    def fit(self, X=None, y=None):
        from .experiments import variant_library
        from .rl import TrainerConfig, train
        env_config = X if isinstance(X, EnvConfig) else EnvConfig()
        config = TrainerConfig(lr=self.lr, workers=self.workers, total_frames=self.total_frames,
                               seed=self.random_state)
        library = variant_library(env_config.task_variant) if self.reward_model != "none" else None
        res = train(config, env_config, self.algo, self.reward_model, library)
        self.net_ = res.net
        self.curve_ = res.records
        self.env_config_ = env_config
        return self

    def predict_proba(self, X) -> np.ndarray:
        check_is_fitted(self, "net_")
        probs, _ = self.net_.act_probs(check_observations(X, OBS_DIM))
        return probs

    def predict(self, X) -> np.ndarray:
        return self.predict_proba(X).argmax(axis=1)

    def score(self, X=None, y=None, episodes: int = 50) -> float:
        """Success fraction on ``X`` (an EnvConfig; defaults to the training config)."""
        from .rl import evaluate
        check_is_fitted(self, "net_")
        env_config = X if isinstance(X, EnvConfig) else self.env_config_
        return evaluate(self.net_, env_config, episodes, self.random_state)[0] / 100.0

    @property
    def action_names(self):
        return ACTIONS
