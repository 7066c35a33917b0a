"""Task set-ups shared by the command line and the reproduction tests."""
from __future__ import annotations

from functools import lru_cache
from typing import List, Optional, Sequence

import numpy as np

from .doorkey import DoorKeyEnv, run_primitive
from .infer import InferConfig, TrainTask
from .logic.grounding import TRUE, enumerate_ground_atoms
from .planner import PlanLibrary, clauses_to_moves
from .programs import SEARCH_TASKS, load_builtin_program, search_program
from .tensorize import encode_program, prune_encoding

# task variant -> (rule program, goal progress atom)
VARIANT_TASKS = {
    "reach_goal": ("doorkey", "reach_goal"),
    "key_retrieval": ("doorkey", "get_red_key"),
    "red_door_reaching": ("doorkey_safe", "go_through_door"),
    "safe_goal_reaching": ("doorkey_safe", "reach_goal"),
}

SEARCH_SLOTS = 6
SEARCH_STEPS = 3


@lru_cache(maxsize=None)
def variant_library(variant: str = "reach_goal") -> PlanLibrary:
    program, goal = VARIANT_TASKS[variant]
    return PlanLibrary(clauses_to_moves(load_builtin_program(program)), goal)


class PlanExecutor:
    """Chooses the best plan at reset and runs the matching scripted primitives."""

    def __init__(self, library: PlanLibrary):
        self.library = library
        self.last_plan = None

    def run_episode(self, env: DoorKeyEnv, seed: int) -> bool:
        env.reset(seed)
        plan = self.library.best(env.symbolic_state(True))
        self.last_plan = plan
        for move in plan.moves:
            run_primitive(env, move.action)
            if env.done:
                break
        return env.success


def valuation_from_facts(table, facts) -> np.ndarray:
    v = np.zeros(len(table))
    v[TRUE] = 1.0
    for f in facts:
        v[table.index(f)] = 1.0
    return v


@lru_cache(maxsize=None)
def search_encoding(task: str, cap: int = 10 ** 6):
    """``(program, table, full encoding)`` of a graph search task; cached because grounding is slow."""
    program = search_program(task)
    table = enumerate_ground_atoms(program)
    return program, table, encode_program(program, table, cap=cap)


def search_train_task(task: str, T: int = SEARCH_STEPS, cap: int = 10 ** 6) -> TrainTask:
    """Training task for a graph search problem with its own (pruned) encoding."""
    program, table, enc = search_encoding(task, cap)
    v0 = valuation_from_facts(table, program.facts)
    _, start, goal = SEARCH_TASKS[task]
    target = table.index(program.atom("plan", start, goal))
    return TrainTask(v0, target, 1.0, T, prune_encoding(enc, v0, T), task)


def loop_train_task(T: int = 3) -> TrainTask:
    """Reach ``reach_goal`` in the self-looping door program with every action available."""
    program = load_builtin_program("door_loop")
    table = enumerate_ground_atoms(program)
    enc = encode_program(program, table)
    facts = [program.atom(n) for n in ("initial", "go_through_red_door", "go_through_blue_door", "go_to_goal")]
    return TrainTask(valuation_from_facts(table, facts), table.index(program.atom("reach_goal")), 1.0, T, enc,
                     "door_loop")
