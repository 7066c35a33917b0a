"""Input checks shared by the estimator wrappers."""
from __future__ import annotations

from typing import Sequence

import numpy as np
from sklearn.utils import check_array

from .infer import TrainTask


def check_tasks(X) -> Sequence[TrainTask]:
    tasks = [X] if isinstance(X, TrainTask) else list(X)
    if not tasks:
        raise ValueError("expected at least one TrainTask")
    bad = [type(t).__name__ for t in tasks if not isinstance(t, TrainTask)]
    if bad:
        raise TypeError(f"expected TrainTask items, got {bad[:3]}")
    return tasks


def check_targets(y, n: int) -> np.ndarray:
    y = np.asarray(y, dtype=float).reshape(-1)
    if len(y) != n:
        raise ValueError(f"got {len(y)} targets for {n} tasks")
    if np.any((y < 0) | (y > 1)) or not np.all(np.isfinite(y)):
        raise ValueError("targets must be probabilities in [0, 1]")
    return y


def check_observations(X, n_features: int) -> np.ndarray:
    X = check_array(X, dtype=float, ensure_2d=False)
    X = np.atleast_2d(X)
    if X.shape[1] != n_features:
        raise ValueError(f"expected {n_features} features, got {X.shape[1]}")
    return X
