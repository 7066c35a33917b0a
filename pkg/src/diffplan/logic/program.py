"""Typed logic programs and their static checks."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Optional, Tuple

from .terms import Atom, Clause, Compound, Constant, Functor, Predicate, Term, Variable


class ProgramError(ValueError):
    """A well-formed program that violates declarations (types, arity, names)."""


# Compile-time predicates with their arities and same-dtype argument groups.
# The groups let variables that appear only inside built-ins inherit a dtype.
BUILTIN_SIGNATURES: Dict[str, Tuple[int, Tuple[Tuple[int, ...], ...]]] = {
    "equal": (2, ((0, 1),)),
    "condition_met": (2, ((0, 1),)),
    "change_state": (2, ((0, 1),)),
    "equalbfs": (3, ((0, 2),)),
    "findall": (2, ()),
    "append": (3, ((0, 1, 2),)),
}


def is_builtin(atom_or_name) -> bool:
    name = atom_or_name if isinstance(atom_or_name, str) else atom_or_name.name
    return name in BUILTIN_SIGNATURES


@dataclass
class LogicProgram:
    predicates: Dict[str, Predicate] = field(default_factory=dict)
    constants: Dict[str, Tuple[str, ...]] = field(default_factory=dict)
    functors: Dict[str, Functor] = field(default_factory=dict)
    clauses: List[Clause] = field(default_factory=list)
    facts: List[Atom] = field(default_factory=list)
    options: Dict[str, str] = field(default_factory=dict)

    def __eq__(self, other):
        if not isinstance(other, LogicProgram):
            return NotImplemented
        return (list(self.predicates.items()) == list(other.predicates.items())
                and list(self.constants.items()) == list(other.constants.items())
                and list(self.functors.items()) == list(other.functors.items())
                and self.clauses == other.clauses
                and self.facts == other.facts
                and self.options == other.options)

    @property
    def max_depth(self) -> int:
        return int(self.options.get("max_depth", 2))

    def predicate(self, name: str) -> Predicate:
        try:
            return self.predicates[name]
        except KeyError:
            raise ProgramError(f"undeclared predicate {name!r}") from None

    def dtype_of_constant(self, name: str) -> Optional[str]:
        for dtype, names in self.constants.items():
            if name in names:
                return dtype
        return None

    def atom(self, name: str, *args: str) -> Atom:
        """Build a ground atom from constant names, e.g. ``atom('edge', 'a', 'b')``."""
        return Atom(self.predicate(name), tuple(Constant(a) for a in args))

    def variable_dtypes(self, clause: Clause) -> Dict[Variable, str]:
        return _clause_dtypes(self, clause)

    def validate(self) -> "LogicProgram":
        names = set()
        for p in self.predicates.values():
            if p.name in names:
                raise ProgramError(f"predicate {p.name} declared twice")
            if is_builtin(p.name):
                raise ProgramError(f"{p.name} is a built-in and cannot be declared")
            names.add(p.name)
            for dt in p.arg_dtypes:
                self._check_dtype(dt, f"predicate {p}")
        for f in self.functors.values():
            for dt in (*f.arg_dtypes, f.dtype):
                self._check_dtype(dt, f"functor {f.name}/{f.arity}")
        for fact in self.facts:
            if is_builtin(fact):
                raise ProgramError(f"built-in {fact.name} cannot be asserted as a fact")
            if not fact.is_ground():
                raise ProgramError(f"fact {fact} is not ground")
            _check_atom_types(self, fact, {})
        for clause in self.clauses:
            if is_builtin(clause.head):
                raise ProgramError(f"built-in {clause.head.name} cannot head a clause")
            _clause_dtypes(self, clause)
        return self

    def _check_dtype(self, dtype: str, where: str) -> None:
        if dtype not in self.constants and not any(f.dtype == dtype for f in self.functors.values()):
            raise ProgramError(f"{where} uses unknown dtype {dtype!r}")


def _term_dtype(program: LogicProgram, term: Term, expected: Optional[str],
                env: Dict[Variable, str]) -> Optional[str]:
    if isinstance(term, Variable):
        if expected is not None:
            have = env.get(term)
            if have is not None and have != expected:
                raise ProgramError(
                    f"variable {term} used with dtypes {have!r} and {expected!r}")
            env[term] = expected
        return env.get(term)
    if isinstance(term, Constant):
        if expected is None:
            dt = program.dtype_of_constant(term.name)
            if dt is None:
                raise ProgramError(f"undeclared constant {term.name!r}")
            return dt
        if term.name not in program.constants.get(expected, ()):
            raise ProgramError(f"constant {term.name!r} is not declared in dtype {expected!r}")
        return expected
    functor = program.functors.get(term.functor)
    if functor is None:
        raise ProgramError(f"undeclared function symbol {term.functor!r}")
    if functor.arity != len(term.args):
        raise ProgramError(f"{term.functor}/{functor.arity} applied to {len(term.args)} arguments")
    if expected is not None and functor.dtype != expected:
        raise ProgramError(f"term {term} has dtype {functor.dtype!r}, expected {expected!r}")
    for arg, dt in zip(term.args, functor.arg_dtypes):
        _term_dtype(program, arg, dt, env)
    return functor.dtype


def _check_atom_types(program: LogicProgram, atom: Atom, env: Dict[Variable, str]) -> None:
    pred = program.predicates.get(atom.name)
    if pred is None:
        raise ProgramError(f"undeclared predicate {atom.name!r}")
    if pred.arity != len(atom.terms):
        raise ProgramError(f"arity mismatch: {pred} used with {len(atom.terms)} arguments")
    for t, dt in zip(atom.terms, pred.arg_dtypes):
        _term_dtype(program, t, dt, env)


def _clause_dtypes(program: LogicProgram, clause: Clause) -> Dict[Variable, str]:
    env: Dict[Variable, str] = {}
    builtins = []
    for atom in (clause.head, *clause.body):
        if is_builtin(atom):
            arity, _ = BUILTIN_SIGNATURES[atom.name]
            if arity != len(atom.terms):
                raise ProgramError(f"built-in {atom.name}/{arity} used with {len(atom.terms)} arguments")
            builtins.append(atom)
        else:
            _check_atom_types(program, atom, env)
    # propagate dtypes through built-in argument groups until nothing changes
    changed = True
    while changed:
        changed = False
        for atom in builtins:
            for group in BUILTIN_SIGNATURES[atom.name][1]:
                known = {_term_dtype(program, atom.terms[i], None, env) for i in group} - {None}
                if len(known) > 1:
                    raise ProgramError(f"{atom} mixes dtypes {sorted(known)}")
                if known:
                    dt = known.pop()
                    for i in group:
                        t = atom.terms[i]
                        if isinstance(t, Variable) and t not in env:
                            env[t] = dt
                            changed = True
    for atom in builtins:
        for t in atom.terms:
            _term_dtype(program, t, None, env)
    for v in clause.variables():
        if v not in env:
            raise ProgramError(f"cannot resolve the dtype of variable {v} in clause {clause}")
    return env


def classify_clause_atoms(program: LogicProgram) -> Tuple[List[str], List[str]]:
    """Split predicates of two-body-atom clauses into (state, action) names.

    Heads are states; the second body atom of each clause is an action.
    """
    states, actions = [], []
    for c in program.clauses:
        if c.head.name not in states:
            states.append(c.head.name)
        if len(c.body) == 2 and c.body[1].name not in actions:
            actions.append(c.body[1].name)
    return states, actions
