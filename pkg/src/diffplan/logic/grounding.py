"""Enumeration of dtype-consistent ground terms and ground atoms."""
from __future__ import annotations

import itertools
import math
from typing import Dict, Iterable, Iterator, List, Sequence, Tuple

from .program import LogicProgram
from .terms import FALSE_ATOM, TRUE_ATOM, Atom, Compound, Constant, Term

DEFAULT_ATOM_CAP = 100_000

FALSE = 0
TRUE = 1


class GroundingLimitError(RuntimeError):
    """Raised when a grounding would exceed its configured size cap."""


def term_universe(program: LogicProgram, max_depth: int | None = None,
                  cap: int = DEFAULT_ATOM_CAP) -> Dict[str, Tuple[Term, ...]]:
    """All ground terms per dtype with function nesting up to ``max_depth``.

    Within a dtype, constants come first in lexicographic order, then
    compound terms by increasing depth, functor declaration order and the
    order of their arguments' universes.
    """
    depth_cap = program.max_depth if max_depth is None else max_depth
    dtypes = list(program.constants)
    for f in program.functors.values():
        if f.dtype not in dtypes:
            dtypes.append(f.dtype)
    # layers[d][dtype] holds the terms of exactly depth d
    layers: List[Dict[str, List[Term]]] = [
        {dt: [Constant(c) for c in sorted(program.constants.get(dt, ()))] for dt in dtypes}]
    for depth in range(1, depth_cap + 1):
        layer: Dict[str, List[Term]] = {dt: [] for dt in dtypes}
        upto = {dt: [t for lay in layers for t in lay[dt]] for dt in dtypes}
        for f in program.functors.values():
            pools = [upto[dt] for dt in f.arg_dtypes]
            for args in itertools.product(*pools):
                # exactly this depth: at least one argument from the previous layer
                if max(_depth_of(a) for a in args) == depth - 1:
                    layer[f.dtype].append(Compound(f.name, args))
                    if len(layer[f.dtype]) > cap:
                        raise GroundingLimitError(
                            f"dtype {f.dtype} exceeds {cap} terms at depth {depth}")
        layers.append(layer)
    return {dt: tuple(t for lay in layers for t in lay[dt]) for dt in dtypes}


def _depth_of(term: Term) -> int:
    if isinstance(term, Compound):
        return 1 + max(_depth_of(a) for a in term.args)
    return 0


class GroundAtomTable:
    """Bijection between ground atoms and indices; 0 is false, 1 is true."""

    def __init__(self, atoms: Sequence[Atom]):
        self._atoms: Tuple[Atom, ...] = (FALSE_ATOM, TRUE_ATOM, *atoms)
        self._index = {a: i for i, a in enumerate(self._atoms)}
        if len(self._index) != len(self._atoms):
            raise ValueError("duplicate ground atoms")
        self._ranges: Dict[str, Tuple[int, int]] = {}
        for i, a in enumerate(self._atoms[2:], start=2):
            lo, hi = self._ranges.get(a.name, (i, i))
            self._ranges[a.name] = (min(lo, i), max(hi, i + 1))

    def __len__(self) -> int:
        return len(self._atoms)

    def __getitem__(self, i: int) -> Atom:
        return self._atoms[i]

    def __iter__(self) -> Iterator[Atom]:
        return iter(self._atoms)

    def __contains__(self, atom: Atom) -> bool:
        return atom in self._index

    def __eq__(self, other):
        return isinstance(other, GroundAtomTable) and self._atoms == other._atoms

    @property
    def atoms(self) -> Tuple[Atom, ...]:
        return self._atoms

    def index(self, atom: Atom) -> int:
        try:
            return self._index[atom]
        except KeyError:
            raise KeyError(f"{atom} is not in the ground atom table") from None

    def get(self, atom: Atom, default=None):
        return self._index.get(atom, default)

    def lookup(self, index: int) -> Atom:
        return self._atoms[index]

    def atoms_of(self, predicate: str) -> Tuple[Atom, ...]:
        lo, hi = self._ranges.get(predicate, (0, 0))
        return self._atoms[lo:hi]

    def indices_of(self, predicate: str) -> range:
        return range(*self._ranges.get(predicate, (0, 0)))


def enumerate_ground_atoms(program: LogicProgram, cap: int = DEFAULT_ATOM_CAP,
                           max_depth: int | None = None) -> GroundAtomTable:
    """Every dtype-consistent grounding of every declared predicate.

    Predicates appear in declaration order; within a predicate, argument
    tuples follow the lexicographic order of their dtype universes.
    """
    universe = term_universe(program, max_depth, cap)
    total = 2
    for p in program.predicates.values():
        total += math.prod(len(universe.get(dt, ())) for dt in p.arg_dtypes)
    if total > cap:
        raise GroundingLimitError(f"{total} ground atoms exceed the cap of {cap}")
    atoms: List[Atom] = []
    for p in program.predicates.values():
        for args in itertools.product(*(universe.get(dt, ()) for dt in p.arg_dtypes)):
            atoms.append(Atom(p, args))
    return GroundAtomTable(atoms)
