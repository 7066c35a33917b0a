"""Compile-time built-in predicates.

Built-ins are decided while grounding, never differentiably. Each solver
receives the clause arguments after substitution and either returns
``None`` (not enough arguments bound yet) or an iterable of binding
extensions under which the built-in holds.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Dict, Iterable, Iterator, List, Mapping, Optional, Sequence, Tuple

from .program import BUILTIN_SIGNATURES, LogicProgram
from .terms import Atom, Compound, Constant, Term, Variable, is_ground_term, substitute_term

Binding = Dict[Variable, Term]


def match(pattern: Term, ground: Term, binding: Binding) -> Optional[Binding]:
    """One-way unification of ``pattern`` against a ground term."""
    if isinstance(pattern, Variable):
        bound = binding.get(pattern)
        if bound is None:
            out = dict(binding)
            out[pattern] = ground
            return out
        return binding if bound == ground else None
    if isinstance(pattern, Constant):
        return binding if pattern == ground else None
    if not isinstance(ground, Compound) or ground.functor != pattern.functor \
            or len(ground.args) != len(pattern.args):
        return None
    for p, g in zip(pattern.args, ground.args):
        binding = match(p, g, binding)
        if binding is None:
            return None
    return binding


@dataclass
class BuiltinContext:
    """Program-derived data the built-ins consult.

    ``successors`` maps a node name to its successor names in lexicographic
    order, read from the facts of the successor predicate (``edge`` by
    default). Lists are cons cells ``cons(Head, Tail)`` ending in ``nil``.
    """

    successors: Dict[str, Tuple[str, ...]] = field(default_factory=dict)
    cons: str = "k"
    nil: str = "nil"

    @classmethod
    def from_program(cls, program: LogicProgram) -> "BuiltinContext":
        succ_pred = program.options.get("successor", "edge")
        succ: Dict[str, List[str]] = {}
        for fact in program.facts:
            if fact.name == succ_pred and len(fact.terms) == 2:
                succ.setdefault(str(fact.terms[0]), []).append(str(fact.terms[1]))
        return cls(
            successors={k: tuple(sorted(set(v))) for k, v in succ.items()},
            cons=program.options.get("list_functor", "k"),
            nil=program.options.get("list_nil", "nil"),
        )

    def to_list(self, items: Sequence[Term]) -> Term:
        out: Term = Constant(self.nil)
        for item in reversed(items):
            out = Compound(self.cons, (item, out))
        return out

    def from_list(self, term: Term) -> Optional[List[Term]]:
        items = []
        while isinstance(term, Compound) and term.functor == self.cons and len(term.args) == 2:
            items.append(term.args[0])
            term = term.args[1]
        if term != Constant(self.nil):
            return None
        return items

    def successor_list(self, node: Term) -> Term:
        return self.to_list([Constant(n) for n in self.successors.get(str(node), ())])


def _same(args, binding, ctx):
    x, y = args
    if is_ground_term(x):
        out = match(y, x, binding)
    elif is_ground_term(y):
        out = match(x, y, binding)
    else:
        return None
    return [] if out is None else [out]


def _change_state(args, binding, ctx):
    cur, new = args
    if not (is_ground_term(cur) and is_ground_term(new)):
        return None
    return [binding] if cur != new else []


def _findall(args, binding, ctx: BuiltinContext):
    node, out = args
    if not is_ground_term(node):
        return None
    b = match(out, ctx.successor_list(node), binding)
    return [] if b is None else [b]


def _append(args, binding, ctx: BuiltinContext):
    x, y, z = args
    if is_ground_term(x) and is_ground_term(y):
        xs, ys = ctx.from_list(x), ctx.from_list(y)
        if xs is None or ys is None:
            return []
        b = match(z, ctx.to_list(xs + ys), binding)
        return [] if b is None else [b]
    if is_ground_term(z):
        zs = ctx.from_list(z)
        if zs is None:
            return []
        results = []
        for cut in range(len(zs) + 1):
            b = match(x, ctx.to_list(zs[:cut]), binding)
            if b is not None:
                b = match(y, ctx.to_list(zs[cut:]), b)
            if b is not None:
                results.append(b)
        return results
    return None


def _equalbfs(args, binding, ctx: BuiltinContext):
    head, rest, goal = args
    if not all(is_ground_term(a) for a in args):
        return None
    items = ctx.from_list(rest)
    if items is None:
        return []
    # the goal is at the front, queued, or produced by expanding the front node
    generated = set(ctx.successors.get(str(head), ()))
    hit = goal == head or goal in items or str(goal) in generated
    return [binding] if hit else []


BUILTINS: Dict[str, Callable] = {
    "equal": _same,
    "condition_met": _same,
    "change_state": _change_state,
    "findall": _findall,
    "append": _append,
    "equalbfs": _equalbfs,
}


class UnknownBuiltinError(KeyError):
    pass


def solve_builtin(atom: Atom, binding: Binding, ctx: BuiltinContext):
    """Extend ``binding`` so that ``atom`` holds; ``None`` if not yet decidable."""
    try:
        fn = BUILTINS[atom.name]
    except KeyError:
        raise UnknownBuiltinError(f"{atom.name} is not a registered built-in") from None
    args = tuple(substitute_term(t, binding) for t in atom.terms)
    return fn(args, binding, ctx)


def evaluate_builtin(atom: Atom, substitution: Mapping[Variable, Term],
                     ctx: BuiltinContext | None = None) -> bool:
    """Decide a built-in under a substitution that grounds all its arguments."""
    ctx = ctx or BuiltinContext()
    if atom.name not in BUILTINS:
        raise UnknownBuiltinError(f"{atom.name} is not a registered built-in")
    grounded = atom.substitute(substitution)
    if not grounded.is_ground():
        raise ValueError(f"{grounded} is not ground under the substitution")
    result = solve_builtin(grounded, {}, ctx)
    return bool(result)


assert set(BUILTINS) == set(BUILTIN_SIGNATURES)
