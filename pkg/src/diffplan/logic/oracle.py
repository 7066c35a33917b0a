"""Discrete forward chaining: the reference semantics for differentiable inference."""
from __future__ import annotations

from typing import Iterable, List, Set

from .builtins import BuiltinContext
from .grounding import term_universe
from .program import LogicProgram, is_builtin
from .solve import AtomIndex, iter_substitutions
from .terms import Atom, term_depth


def immediate_consequences(program: LogicProgram, facts: Iterable[Atom],
                           max_depth: int | None = None) -> Set[Atom]:
    """One application of every clause: heads whose bodies hold in ``facts``."""
    depth_cap = program.max_depth if max_depth is None else max_depth
    universe = term_universe(program, depth_cap)
    ctx = BuiltinContext.from_program(program)
    index = AtomIndex(facts)
    derived: Set[Atom] = set()
    for clause in program.clauses:
        dtypes = program.variable_dtypes(clause)
        domains = {v: universe[dt] for v, dt in dtypes.items()}
        body = [a for a in clause.body if not is_builtin(a)]
        builtins = [a for a in clause.body if is_builtin(a)]
        for binding in iter_substitutions(body, builtins, index, ctx, domains, clause.variables()):
            head = clause.head.substitute(binding)
            if all(term_depth(t) <= depth_cap for t in head.terms):
                derived.add(head)
    return derived


def forward_chain_oracle(program: LogicProgram, facts: Iterable[Atom], max_steps: int,
                         max_depth: int | None = None) -> Set[Atom]:
    """Least fixed point of the immediate-consequence operator, cut at ``max_steps``.

    Derived atoms whose terms nest deeper than ``max_depth`` are dropped so
    the result lives in the same atom space as the ground atom table.
    """
    current = set(facts)
    for _ in range(max_steps):
        new = current | immediate_consequences(program, current, max_depth)
        if new == current:
            break
        current = new
    return current


def saturation_depth(program: LogicProgram, facts: Iterable[Atom], limit: int = 100,
                     max_depth: int | None = None) -> int:
    """Number of applications after which the oracle stops growing."""
    current = set(facts)
    for step in range(limit):
        new = current | immediate_consequences(program, current, max_depth)
        if new == current:
            return step
        current = new
    return limit


def entailment_trace(program: LogicProgram, facts: Iterable[Atom], max_steps: int,
                     max_depth: int | None = None) -> List[Set[Atom]]:
    """The entailed set after 0, 1, ..., max_steps applications."""
    trace = [set(facts)]
    for _ in range(max_steps):
        trace.append(trace[-1] | immediate_consequences(program, trace[-1], max_depth))
    return trace
