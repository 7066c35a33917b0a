"""First-order terms, atoms and clauses.

All objects are immutable and hashable so they can key dictionaries and
be shared freely between threads.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator, Mapping, Tuple, Union


@dataclass(frozen=True, slots=True)
class Constant:
    name: str

    def __str__(self) -> str:
        return self.name


@dataclass(frozen=True, slots=True)
class Variable:
    name: str

    def __str__(self) -> str:
        return self.name


@dataclass(frozen=True, slots=True)
class Compound:
    functor: str
    args: Tuple["Term", ...]

    def __post_init__(self):
        if not self.args:
            raise ValueError(f"compound term {self.functor} needs at least one argument")

    def __str__(self) -> str:
        return f"{self.functor}({', '.join(map(str, self.args))})"


Term = Union[Constant, Variable, Compound]


def term_depth(term: Term) -> int:
    if isinstance(term, Compound):
        return 1 + max(term_depth(a) for a in term.args)
    return 0


def term_variables(term: Term) -> Iterator[Variable]:
    if isinstance(term, Variable):
        yield term
    elif isinstance(term, Compound):
        for a in term.args:
            yield from term_variables(a)


def is_ground_term(term: Term) -> bool:
    if isinstance(term, Variable):
        return False
    if isinstance(term, Compound):
        return all(is_ground_term(a) for a in term.args)
    return True


def substitute_term(term: Term, binding: Mapping[Variable, Term]) -> Term:
    if isinstance(term, Variable):
        return binding.get(term, term)
    if isinstance(term, Compound):
        return Compound(term.functor, tuple(substitute_term(a, binding) for a in term.args))
    return term


@dataclass(frozen=True, slots=True)
class Predicate:
    name: str
    arity: int
    arg_dtypes: Tuple[str, ...] = ()

    def __post_init__(self):
        if self.arity != len(self.arg_dtypes):
            raise ValueError(
                f"predicate {self.name}/{self.arity} declares {len(self.arg_dtypes)} dtypes")

    def __str__(self) -> str:
        return f"{self.name}/{self.arity}"


@dataclass(frozen=True, slots=True)
class Functor:
    """A function symbol ``name/arity`` mapping ``arg_dtypes`` to ``dtype``."""

    name: str
    arity: int
    arg_dtypes: Tuple[str, ...]
    dtype: str

    def __post_init__(self):
        if self.arity < 1 or self.arity != len(self.arg_dtypes):
            raise ValueError(f"bad functor declaration {self.name}/{self.arity}")


@dataclass(frozen=True, slots=True)
class Atom:
    predicate: Predicate
    terms: Tuple[Term, ...] = ()

    def __post_init__(self):
        if len(self.terms) != self.predicate.arity:
            raise ValueError(
                f"{self.predicate} applied to {len(self.terms)} arguments")

    @property
    def name(self) -> str:
        return self.predicate.name

    def is_ground(self) -> bool:
        return all(is_ground_term(t) for t in self.terms)

    def variables(self) -> Iterator[Variable]:
        for t in self.terms:
            yield from term_variables(t)

    def substitute(self, binding: Mapping[Variable, Term]) -> "Atom":
        return Atom(self.predicate, tuple(substitute_term(t, binding) for t in self.terms))

    def __str__(self) -> str:
        if not self.terms:
            return self.predicate.name
        return f"{self.predicate.name}({', '.join(map(str, self.terms))})"


# An atom with no variables; kept as an alias for readability in signatures.
GroundAtom = Atom

FALSE_ATOM = Atom(Predicate("_false", 0))
TRUE_ATOM = Atom(Predicate("_true", 0))


@dataclass(frozen=True)
class Clause:
    head: Atom
    body: Tuple[Atom, ...] = ()

    def variables(self) -> Tuple[Variable, ...]:
        """Variables in order of first appearance (head first)."""
        seen: dict = {}
        for atom in (self.head, *self.body):
            for v in atom.variables():
                seen.setdefault(v, None)
        return tuple(seen)

    def is_fact(self) -> bool:
        return not self.body

    def __str__(self) -> str:
        if not self.body:
            return f"{self.head}."
        return f"{self.head} :- {', '.join(map(str, self.body))}."
