"""Backtracking enumeration of clause substitutions.

Shared by the tensor compiler (candidates come from the ground atom table)
and the discrete oracle (candidates come from the current fact set).
"""
from __future__ import annotations

from collections import defaultdict
from typing import Callable, Dict, Iterable, Iterator, List, Mapping, Optional, Sequence, Tuple

from .builtins import Binding, BuiltinContext, match, solve_builtin
from .terms import Atom, Term, Variable, is_ground_term


class AtomIndex:
    """Ground atoms grouped by predicate and by (argument position, value)."""

    def __init__(self, atoms: Iterable[Atom] = ()):
        self._by_pred: Dict[str, List[Atom]] = defaultdict(list)
        self._by_arg: Dict[Tuple[str, int, Term], List[Atom]] = defaultdict(list)
        self._members = set()
        for a in atoms:
            self.add(a)

    def add(self, atom: Atom) -> bool:
        if atom in self._members:
            return False
        self._members.add(atom)
        self._by_pred[atom.name].append(atom)
        for pos, t in enumerate(atom.terms):
            self._by_arg[(atom.name, pos, t)].append(atom)
        return True

    def __contains__(self, atom: Atom) -> bool:
        return atom in self._members

    def __len__(self) -> int:
        return len(self._members)

    def candidates(self, pattern: Atom) -> Sequence[Atom]:
        best: Sequence[Atom] = self._by_pred.get(pattern.name, ())
        for pos, t in enumerate(pattern.terms):
            if is_ground_term(t):
                bucket = self._by_arg.get((pattern.name, pos, t), ())
                if len(bucket) < len(best):
                    best = bucket
        return best


def _unbound(atom: Atom, binding: Binding) -> List[Variable]:
    return [v for v in atom.variables() if v not in binding]


def iter_substitutions(
    atoms: Sequence[Atom],
    builtins: Sequence[Atom],
    index: AtomIndex,
    ctx: BuiltinContext,
    domains: Mapping[Variable, Sequence[Term]],
    variables: Sequence[Variable],
    binding: Optional[Binding] = None,
) -> Iterator[Binding]:
    """Yield every binding of ``variables`` that puts each atom in ``index``
    and satisfies each built-in.

    Built-ins run as soon as they are decidable; atoms are matched in the
    given order; variables left unbound fall back to their dtype domain.
    """
    binding = {} if binding is None else binding
    yield from _search(list(atoms), list(builtins), index, ctx, domains, variables, binding)


def _search(atoms, builtins, index, ctx, domains, variables, binding):
    for i, b in enumerate(builtins):
        result = solve_builtin(b, binding, ctx)
        if result is not None:
            rest = builtins[:i] + builtins[i + 1:]
            for ext in result:
                yield from _search(atoms, rest, index, ctx, domains, variables, ext)
            return
    if atoms:
        # a fully bound atom is a cheap membership test; do those first
        for i, a in enumerate(atoms):
            if not _unbound(a, binding):
                if a.substitute(binding) in index:
                    yield from _search(atoms[:i] + atoms[i + 1:], builtins, index, ctx,
                                       domains, variables, binding)
                return
        atom, rest = atoms[0], atoms[1:]
        pattern = atom.substitute(binding)
        for cand in index.candidates(pattern):
            ext = binding
            for p, g in zip(atom.terms, cand.terms):
                ext = match(p, g, ext)
                if ext is None:
                    break
            if ext is not None:
                yield from _search(rest, builtins, index, ctx, domains, variables, ext)
        return
    pending = [v for v in variables if v not in binding]
    if builtins:
        waiting = [v for b in builtins for v in b.variables() if v not in binding]
        if not waiting:
            raise RuntimeError(f"built-ins {builtins} cannot be decided")
        pending = [waiting[0]]
    if pending:
        var = pending[0]
        for value in domains[var]:
            ext = dict(binding)
            ext[var] = value
            yield from _search(atoms, builtins, index, ctx, domains, variables, ext)
        return
    yield binding
