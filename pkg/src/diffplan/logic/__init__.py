from .builtins import BuiltinContext, evaluate_builtin
from .grounding import (DEFAULT_ATOM_CAP, FALSE, TRUE, GroundAtomTable, GroundingLimitError,
                        enumerate_ground_atoms, term_universe)
from .oracle import entailment_trace, forward_chain_oracle, immediate_consequences, saturation_depth
from .parser import ParseError, format_program, load_program, parse_atom, parse_program
from .program import LogicProgram, ProgramError, classify_clause_atoms, is_builtin
from .terms import (FALSE_ATOM, TRUE_ATOM, Atom, Clause, Compound, Constant, Functor, GroundAtom,
                    Predicate, Term, Variable)

__all__ = [
    "Atom", "BuiltinContext", "Clause", "Compound", "Constant", "DEFAULT_ATOM_CAP", "FALSE",
    "FALSE_ATOM", "Functor", "GroundAtom", "GroundAtomTable", "GroundingLimitError",
    "LogicProgram", "ParseError", "Predicate", "ProgramError", "TRUE", "TRUE_ATOM", "Term",
    "Variable", "classify_clause_atoms", "entailment_trace", "enumerate_ground_atoms",
    "evaluate_builtin", "format_program", "forward_chain_oracle", "immediate_consequences",
    "is_builtin", "load_program", "parse_atom", "parse_program", "saturation_depth", "term_universe",
]
