"""Symbolic view of an environment state shared by planning and reward code."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import FrozenSet, Mapping

UNREACHABLE = math.inf


@dataclass(frozen=True)
class SymbolicState:
    """The current progress atom, extra ground facts and per-action distances (cells)."""

    progress: str
    facts: FrozenSet[str] = frozenset()
    distances: Mapping[str, float] = field(default_factory=dict)

    def distance_key(self) -> tuple:
        return tuple(sorted(self.distances.items()))
