"""Compile clauses into index tensors over the ground atom table.

A clause encoding is stored row-wise: one row per valid grounding, holding
the head index and the indices of its (non built-in) body atoms padded with
the true atom. ``index_tensor`` materialises the dense ``G x S x L`` view on
demand; the row form is what inference consumes because the dense form of
realistic programs is overwhelmingly padding.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence

import numpy as np

from .logic.builtins import BUILTINS, BuiltinContext, evaluate_builtin  # noqa: F401  (re-export)
from .logic.grounding import FALSE, TRUE, GroundAtomTable, GroundingLimitError, term_universe
from .logic.program import LogicProgram, is_builtin
from .logic.solve import AtomIndex, iter_substitutions
from .logic.terms import Atom, Clause, Term, Variable

DEFAULT_SUBSTITUTION_CAP = 10_000

Substitution = Dict[Variable, Term]


def _table_index(table: GroundAtomTable) -> AtomIndex:
    cached = getattr(table, "_atom_index", None)
    if cached is None:
        cached = AtomIndex(table.atoms[2:])
        table._atom_index = cached
    return cached


def enumerate_substitutions(clause: Clause, table: GroundAtomTable, program: LogicProgram,
                            cap: int = DEFAULT_SUBSTITUTION_CAP,
                            ctx: Optional[BuiltinContext] = None) -> List[Substitution]:
    """All dtype-consistent bindings whose head and body atoms lie in ``table``
    and under which every built-in holds."""
    ctx = ctx or BuiltinContext.from_program(program)
    universe = term_universe(program)
    domains = {v: universe[dt] for v, dt in program.variable_dtypes(clause).items()}
    body = [a for a in clause.body if not is_builtin(a)]
    builtins = [a for a in clause.body if is_builtin(a)]
    out: List[Substitution] = []
    for binding in iter_substitutions([*body, clause.head], builtins, _table_index(table), ctx,
                                      domains, clause.variables()):
        out.append(binding)
        if len(out) > cap:
            raise GroundingLimitError(f"clause {clause} has more than {cap} substitutions")
    return out


@dataclass
class ClauseEncoding:
    clause_id: int
    clause: Clause
    heads: np.ndarray          # (R,) head index of each grounding, sorted
    body: np.ndarray           # (R, L) body atom indices, padded with TRUE
    G: int
    S: int
    L: int

    @property
    def n_rows(self) -> int:
        return len(self.heads)

    @property
    def substitution_counts(self) -> np.ndarray:
        return np.bincount(self.heads, minlength=self.G)

    @property
    def valid_mask(self) -> np.ndarray:
        """``(G, S)`` mask of the (head, substitution) pairs that are real groundings."""
        counts = self.substitution_counts
        return np.arange(self.S)[None, :] < counts[:, None]

    @property
    def index_tensor(self) -> np.ndarray:
        dense = np.full((self.G, self.S, self.L), TRUE, dtype=np.int64)
        dense[:, :, 0] = FALSE
        slot = _slot_numbers(self.heads)
        dense[self.heads, slot, :] = self.body
        return dense


def _slot_numbers(heads: np.ndarray) -> np.ndarray:
    """Position of each row within its head's group (heads sorted)."""
    if len(heads) == 0:
        return heads.copy()
    starts = np.r_[0, np.flatnonzero(np.diff(heads)) + 1]
    first = np.repeat(starts, np.diff(np.r_[starts, len(heads)]))
    return np.arange(len(heads)) - first


def _rows(clause: Clause, subs: Sequence[Substitution], table: GroundAtomTable):
    body_atoms = [a for a in clause.body if not is_builtin(a)]
    heads, bodies = [], []
    for sub in subs:
        head = clause.head.substitute(sub)
        j = table.get(head)
        if j is None:
            raise KeyError(f"head grounding {head} is not in the ground atom table")
        heads.append(j)
        bodies.append([table.index(a.substitute(sub)) for a in body_atoms])
    return heads, bodies, len(body_atoms)


def encode_clause(clause: Clause, table: GroundAtomTable, program: LogicProgram,
                  S: Optional[int] = None, L: Optional[int] = None, clause_id: int = 0,
                  cap: int = DEFAULT_SUBSTITUTION_CAP,
                  subs: Optional[Sequence[Substitution]] = None) -> ClauseEncoding:
    if subs is None:
        subs = enumerate_substitutions(clause, table, program, cap)
    heads, bodies, n_body = _rows(clause, subs, table)
    width = max(1, n_body)
    L = width if L is None else L
    if L < width:
        raise ValueError(f"L={L} is smaller than the body length {width} of {clause}")
    body = np.full((len(heads), L), TRUE, dtype=np.int64)
    if n_body:
        body[:, :n_body] = np.asarray(bodies, dtype=np.int64).reshape(len(heads), n_body)
    heads_arr = np.asarray(heads, dtype=np.int64)
    order = np.argsort(heads_arr, kind="stable")
    heads_arr, body = heads_arr[order], body[order]
    needed = int(np.bincount(heads_arr).max()) if len(heads_arr) else 1
    S = needed if S is None else S
    if S < needed:
        raise ValueError(f"S={S} is smaller than the {needed} substitutions of {clause}")
    return ClauseEncoding(clause_id, clause, heads_arr, body, len(table), S, L)


@dataclass
class ProgramEncoding:
    """Padded encodings of all clauses plus the flattened arrays inference uses."""

    table: GroundAtomTable
    clauses: List[ClauseEncoding]
    G: int
    S: int
    L: int
    rows_body: np.ndarray = field(init=False, repr=False)
    rows_seg: np.ndarray = field(init=False, repr=False)
    seg_starts: np.ndarray = field(init=False, repr=False)
    seg_clause: np.ndarray = field(init=False, repr=False)
    seg_hpos: np.ndarray = field(init=False, repr=False)
    seg_head_index: np.ndarray = field(init=False, repr=False)
    heads: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        bodies, clause_ids, head_ids = [], [], []
        for ce in self.clauses:
            bodies.append(ce.body)
            clause_ids.append(np.full(ce.n_rows, ce.clause_id, dtype=np.int64))
            head_ids.append(ce.heads)
        if bodies:
            body = np.concatenate(bodies) if bodies else np.zeros((0, self.L), np.int64)
            cid = np.concatenate(clause_ids)
            hid = np.concatenate(head_ids)
        else:
            body = np.zeros((0, self.L), np.int64)
            cid = hid = np.zeros(0, np.int64)
        # rows are already grouped by clause then head; segments are (clause, head) runs
        key_change = np.r_[True, (np.diff(cid) != 0) | (np.diff(hid) != 0)] if len(cid) else np.zeros(0, bool)
        self.seg_starts = np.flatnonzero(key_change)
        self.rows_seg = np.cumsum(key_change) - 1
        self.rows_body = body
        self.seg_clause = cid[self.seg_starts]
        self.seg_head_index = hid[self.seg_starts]
        self.heads, self.seg_hpos = np.unique(self.seg_head_index, return_inverse=True)
        self.seg_hpos = self.seg_hpos.reshape(-1)

    @property
    def C(self) -> int:
        return len(self.clauses)

    @property
    def n_rows(self) -> int:
        return len(self.rows_body)

    def index_tensors(self) -> np.ndarray:
        """Dense ``C x G x S x L`` stack (small programs only)."""
        return np.stack([ce.index_tensor for ce in self.clauses]) if self.clauses else \
            np.zeros((0, self.G, self.S, self.L), np.int64)

    def dump_csv(self, path) -> None:
        """Write ``clause_id, j, k, l, atom_index`` for every real grounding slot."""
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["clause_id", "j", "k", "l", "atom_index"])
            for ce in self.clauses:
                slots = _slot_numbers(ce.heads)
                for r in range(ce.n_rows):
                    for l in range(ce.L):
                        w.writerow([ce.clause_id, int(ce.heads[r]), int(slots[r]), l, int(ce.body[r, l])])


def encode_program(program: LogicProgram, table: GroundAtomTable,
                   cap: int = DEFAULT_SUBSTITUTION_CAP,
                   clauses: Optional[Sequence[Clause]] = None) -> ProgramEncoding:
    """Encode every clause (or the given subset) with shared ``S`` and ``L``."""
    clauses = list(program.clauses if clauses is None else clauses)
    ctx = BuiltinContext.from_program(program)
    subs = [enumerate_substitutions(c, table, program, cap, ctx) for c in clauses]
    L = max([1] + [sum(1 for a in c.body if not is_builtin(a)) for c in clauses])
    raw = [encode_clause(c, table, program, None, L, i, cap, s) for i, (c, s) in enumerate(zip(clauses, subs))]
    S = max([1] + [ce.S for ce in raw])
    for ce in raw:
        ce.S = S
    return ProgramEncoding(table, raw, len(table), S, L)


def reachable_support(encoding: ProgramEncoding, v0, T: int) -> np.ndarray:
    """Atoms that can hold a positive value within ``T`` steps from ``v0`` under any weights."""
    alive = np.asarray(v0) > 0
    alive[TRUE] = True
    body, heads = encoding.rows_body, np.repeat(encoding.seg_head_index, np.diff(
        np.r_[encoding.seg_starts, encoding.n_rows]))
    for _ in range(T):
        rows = alive[body].all(axis=1)
        grown = alive.copy()
        grown[heads[rows]] = True
        if (grown == alive).all():
            break
        alive = grown
    return alive


def prune_encoding(encoding: ProgramEncoding, v0, T: int) -> ProgramEncoding:
    """Drop groundings that cannot fire within ``T`` steps from ``v0``.

    Exact for zero-neutral disjunction: a dropped row has a body product of 0
    for every weight matrix, so it changes neither values nor gradients.
    """
    alive = reachable_support(encoding, v0, T)
    kept = []
    for ce in encoding.clauses:
        rows = alive[ce.body].all(axis=1)
        kept.append(ClauseEncoding(ce.clause_id, ce.clause, ce.heads[rows], ce.body[rows],
                                   ce.G, ce.S, ce.L))
    return ProgramEncoding(encoding.table, kept, encoding.G, encoding.S, encoding.L)
