"""STRIPS-style planning over two-body clauses.

Every clause ``post :- pre, action.`` becomes a move ``(action, pre, post)``.
Plans are chains of moves; they can be listed exhaustively or scored by
running differentiable inference over a recursive planner program whose
stack argument records the chosen actions.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from .infer import InferConfig, infer
from .logic.grounding import TRUE, GroundAtomTable, enumerate_ground_atoms
from .logic.parser import parse_atom, parse_program
from .logic.program import LogicProgram, ProgramError
from .logic.terms import Atom
from .state import UNREACHABLE, SymbolicState
from .tensorize import ProgramEncoding, encode_program

ONE_HOT_GAP = 30.0


@dataclass(frozen=True, order=True)
class MoveAtom:
    action: str
    pre_state: str
    post_state: str

    def __str__(self) -> str:
        return f"move({self.action}, {self.pre_state}, {self.post_state})"


@dataclass(frozen=True)
class Plan:
    moves: Tuple[MoveAtom, ...]
    probability: Optional[float] = None
    start: Optional[str] = None

    def __post_init__(self):
        object.__setattr__(self, "moves", tuple(self.moves))
        for a, b in zip(self.moves, self.moves[1:]):
            if a.post_state != b.pre_state:
                raise ValueError(f"broken chain: {a} then {b}")
        if self.moves and self.start is None:
            object.__setattr__(self, "start", self.moves[0].pre_state)

    def __len__(self) -> int:
        return len(self.moves)

    @property
    def actions(self) -> Tuple[str, ...]:
        return tuple(m.action for m in self.moves)

    @property
    def goal(self) -> Optional[str]:
        return self.moves[-1].post_state if self.moves else self.start

    def states(self) -> List[str]:
        return [self.start] + [m.post_state for m in self.moves]

    def with_probability(self, p: float) -> "Plan":
        return Plan(self.moves, float(p), self.start)

    def dump(self) -> str:
        lines = [str(m) for m in self.moves]
        lines.append(f"probability={self.probability:.9g}" if self.probability is not None else "probability=nan")
        return "\n".join(lines)


def clauses_to_moves(program: LogicProgram) -> List[MoveAtom]:
    """Rewrite each ``post :- pre, action.`` clause as a move."""
    moves = []
    for clause in program.clauses:
        if len(clause.body) != 2:
            raise ProgramError(f"clause {clause} must have exactly two body atoms (state, action)")
        moves.append(MoveAtom(str(clause.body[1]), str(clause.body[0]), str(clause.head)))
    return moves


def enumerate_plans(moves: Sequence[MoveAtom], init: str, goal: str, max_len: int = 6,
                    loop_guard: bool = True) -> List[Plan]:
    """All move chains from ``init`` to ``goal`` of length <= ``max_len``.

    A chain stops at its first arrival at ``goal``. With ``loop_guard`` no state
    repeats inside a chain. Ordered shortest first, then by action sequence.
    """
    if max_len < 1:
        raise ValueError("max_len must be at least 1")
    if init == goal:
        return [Plan((), start=init)]
    by_pre: Dict[str, List[MoveAtom]] = {}
    for m in sorted(set(moves)):
        by_pre.setdefault(m.pre_state, []).append(m)
    found: List[Tuple[MoveAtom, ...]] = []

    def extend(chain: Tuple[MoveAtom, ...], visited: frozenset, state: str):
        if len(chain) == max_len:
            return
        for m in by_pre.get(state, ()):
            if loop_guard and m.post_state in visited:
                continue
            nxt = chain + (m,)
            if m.post_state == goal:
                found.append(nxt)
            else:
                extend(nxt, visited | {m.post_state}, m.post_state)

    extend((), frozenset([init]), init)
    found.sort(key=lambda c: (len(c), tuple(m.action for m in c), c))
    return [Plan(c, start=init) for c in found]


def naive_dfs_search(moves: Sequence[MoveAtom], init: str, goal: str, budget: int = 100):
    """Depth-first tree search without cycle checking, trying actions alphabetically.

    The goal test runs when a state is expanded. Returns ``(reached, expansions)``;
    ``expansions > budget`` means the search was cut off.
    """
    by_pre: Dict[str, List[MoveAtom]] = {}
    for m in sorted(set(moves), key=lambda m: (m.action, m.post_state)):
        by_pre.setdefault(m.pre_state, []).append(m)
    stack = [init]
    expansions = 0
    while stack:
        state = stack.pop()
        expansions += 1
        if state == goal:
            return True, expansions
        if expansions > budget:
            return False, expansions
        stack.extend(m.post_state for m in reversed(by_pre.get(state, [])))
    return False, expansions


def select_best_plan(plans: Sequence[Plan]) -> Plan:
    """Highest probability; ties go to the shorter plan, then the alphabetically first actions."""
    if not plans:
        raise ValueError("no plans to select from")
    return min(plans, key=lambda p: (-(p.probability if p.probability is not None else -math.inf),
                                     len(p), p.actions))


def action_valuation(distance: float) -> float:
    """Valuation of a subtask action from the agent's distance to it (cells)."""
    if distance is None or not math.isfinite(distance):
        return 0.5
    if distance < 0:
        raise ValueError("distance must be non-negative")
    return 0.5 + 1.0 / (distance + 2.0)


# ---------------------------------------------------------------- differentiable scoring

PLANNER_RULES = """
plan(Start,New,Goal,s(Act,Old_stack)) :- move(Act,Old,New), condition_met(Old,Current), change_state(Current,New), plan(Start,Current,Goal,Old_stack).
plan_final(Start,Goal,Stack) :- plan(Start,Current,Goal,Stack), equal(Current,Goal).
"""


def planner_program_text(moves: Sequence[MoveAtom], max_len: int) -> str:
    states, actions = [], []
    for m in moves:
        for s in (m.pre_state, m.post_state):
            if s not in states:
                states.append(s)
        if m.action not in actions:
            actions.append(m.action)
    return "\n".join([
        f"option max_depth {max(1, max_len)}",
        f"const state {{{', '.join(states)}}}",
        f"const action {{{', '.join(actions)}}}",
        "const stack {nil}",
        "func s/2 [action, stack] stack",
        "pred move/3 [action, state, state]",
        "pred plan/4 [state, state, state, stack]",
        "pred plan_final/3 [state, state, stack]",
        PLANNER_RULES,
    ])


def one_hot_weights(C: int, selected: Sequence[int], gap: float = ONE_HOT_GAP) -> np.ndarray:
    """One slot per selected clause, each a near one-hot softmax row."""
    W = np.zeros((len(selected), C))
    for m, i in enumerate(selected):
        W[m, i] = gap
    return W


class DifferentiablePlanner:
    """Scores plans with forward-chaining inference over the compiled planner program."""

    def __init__(self, moves: Sequence[MoveAtom], max_len: int = 3, config: Optional[InferConfig] = None,
                 cap: int = 10 ** 6):
        self.moves = list(dict.fromkeys(moves))
        if not self.moves:
            raise ValueError("planner needs at least one move")
        self.max_len = max_len
        self.program = parse_program(planner_program_text(self.moves, max_len))
        self.table: GroundAtomTable = enumerate_ground_atoms(self.program)
        self.encoding: ProgramEncoding = encode_program(self.program, self.table, cap=cap)
        self.W = one_hot_weights(self.encoding.C, range(self.encoding.C))
        self.config = config or InferConfig(M=self.encoding.C)
        self._move_index = {m: self.table.index(self.program.atom("move", m.action, m.pre_state, m.post_state))
                            for m in self.moves}
        self._move_rows = np.array(sorted(self.table.indices_of("move")))
        self._cache: Dict[tuple, float] = {}

    def stack_atom(self, plan: Plan, goal: str) -> Atom:
        stack = "nil"
        for a in plan.actions:
            stack = f"s({a},{stack})"
        text = f"plan({plan.start},{plan.goal},{goal},{stack})"
        return parse_atom(text, self.program)

    def seed_index(self, start: str, goal: str) -> int:
        return self.table.index(self.program.atom("plan", start, start, goal, "nil"))

    def initial_valuation(self, action_values: Mapping[str, float], start: str, goal: str) -> np.ndarray:
        v = np.zeros(len(self.table))
        v[TRUE] = 1.0
        for m, j in self._move_index.items():
            v[j] = action_values.get(m.action, 0.0)
        v[self.seed_index(start, goal)] = 1.0
        return v

    def score(self, plans: Sequence[Plan], action_values: Mapping[str, float]) -> List[Plan]:
        out = []
        for plan in plans:
            key = (plan.moves, plan.start, tuple(action_values.get(m.action, 0.0) for m in plan.moves))
            p = self._cache.get(key)
            if p is None:
                if len(plan) > self.max_len:
                    raise ValueError(f"plan longer than the planner depth {self.max_len}")
                v0 = self.initial_valuation(action_values, plan.start, plan.goal)
                p = score_plans([plan], v0, self.encoding, self.W, self.config, self)[0].probability
                self._cache[key] = p
            out.append(plan.with_probability(p))
        return out


def score_plans(plans: Sequence[Plan], v0: np.ndarray, encoding: ProgramEncoding, W: np.ndarray,
                config: InferConfig, planner: DifferentiablePlanner) -> List[Plan]:
    """Probability of each plan: its stack atom after ``len(plan)`` inference steps.

    Move atoms outside the plan are zeroed so each plan is judged only on its
    own action evidence.
    """
    out = []
    for plan in plans:
        if not plan.moves:
            out.append(plan.with_probability(1.0))
            continue
        v = np.array(v0, dtype=float)
        keep = {planner._move_index[m] for m in plan.moves}
        for j in planner._move_rows:
            if j not in keep:
                v[j] = 0.0
        target = encoding.table.index(planner.stack_atom(plan, plan.goal))
        vT = infer(v, encoding, W, config, T=len(plan))
        out.append(plan.with_probability(float(vT[target])))
    return out


def adaptive_initial_valuation(state: SymbolicState, table: GroundAtomTable,
                               actions: Optional[Iterable[str]] = None) -> np.ndarray:
    """Valuation over a clause program's table: actions scored by distance, true states 1, rest 0."""
    names = {a.name: i for i, a in enumerate(table) if a.predicate.arity == 0 and i > TRUE}
    actions = set(state.distances) if actions is None else set(actions)
    unknown = [a for a in state.distances if a not in names]
    if unknown:
        raise KeyError(f"unknown action atoms {unknown}")
    v = np.zeros(len(table))
    v[TRUE] = 1.0
    for a in actions:
        v[names[a]] = action_valuation(state.distances.get(a, UNREACHABLE))
    for fact in {state.progress, *state.facts}:
        if fact in names and fact not in actions:
            v[names[fact]] = 1.0
    return v


@dataclass
class PlanLibrary:
    """Candidate plans from every progress state to a goal, with cached scoring."""

    moves: Sequence[MoveAtom]
    goal: str
    max_len: int = 6
    config: Optional[InferConfig] = None
    plans: Dict[str, List[Plan]] = field(init=False)

    def __post_init__(self):
        states = {m.pre_state for m in self.moves} | {m.post_state for m in self.moves}
        self.plans = {s: enumerate_plans(self.moves, s, self.goal, self.max_len) for s in sorted(states)}
        longest = max([len(p) for ps in self.plans.values() for p in ps] + [1])
        used = sorted({m for ps in self.plans.values() for p in ps for m in p.moves})
        self.planner = DifferentiablePlanner(used or list(self.moves), longest, self.config)

    def candidates(self, progress: str) -> List[Plan]:
        return self.plans.get(progress, [])

    def scored(self, state: SymbolicState) -> List[Plan]:
        values = {a: action_valuation(d) for a, d in state.distances.items()}
        return self.planner.score(self.candidates(state.progress), values)

    def best(self, state: SymbolicState) -> Plan:
        return select_best_plan(self.scored(state))
