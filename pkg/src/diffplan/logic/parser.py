"""Reader and printer for the clause file format.

Declarations are line oriented::

    pred edge/2 [node, node]
    const node {a, b, c}
    func k/2 [node, frontier] frontier
    option max_depth 3

Everything else is a sequence of ``.``-terminated facts and clauses in
Prolog syntax; ``%`` starts a comment that runs to the end of the line.
"""
from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Dict, List, Tuple

from .program import LogicProgram, ProgramError, is_builtin
from .terms import Atom, Clause, Compound, Constant, Functor, Predicate, Term, Variable


class ParseError(ValueError):
    def __init__(self, message: str, line: int, col: int):
        super().__init__(f"line {line}, column {col}: {message}")
        self.line = line
        self.col = col


@dataclass
class _Token:
    kind: str
    text: str
    line: int
    col: int


_TOKEN_RE = re.compile(r"""
    (?P<ws>[ \t\r]+)
  | (?P<comment>%[^\n]*)
  | (?P<nl>\n)
  | (?P<neck>:-)
  | (?P<var>[A-Z_][A-Za-z0-9_]*)
  | (?P<ident>[a-z][A-Za-z0-9_]*)
  | (?P<int>[0-9]+)
  | (?P<punct>[(),./\[\]{}])
""", re.VERBOSE)

_DECL_KEYWORDS = ("pred", "const", "func", "option")


def _tokenize(text: str) -> List[_Token]:
    tokens, pos, line, line_start = [], 0, 1, 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise ParseError(f"unexpected character {text[pos]!r}", line, pos - line_start + 1)
        kind = m.lastgroup
        if kind == "nl":
            tokens.append(_Token("nl", "\n", line, pos - line_start + 1))
            line += 1
            line_start = m.end()
        elif kind not in ("ws", "comment"):
            tokens.append(_Token(kind, m.group(), line, pos - line_start + 1))
        pos = m.end()
    tokens.append(_Token("eof", "", line, pos - line_start + 1))
    return tokens


class _Parser:
    def __init__(self, text: str):
        self.toks = _tokenize(text)
        self.i = 0
        self.program = LogicProgram()

    # -- token helpers
    def peek(self, skip_nl=True) -> _Token:
        j = self.i
        while skip_nl and self.toks[j].kind == "nl":
            j += 1
        return self.toks[j]

    def next(self, skip_nl=True) -> _Token:
        while skip_nl and self.toks[self.i].kind == "nl":
            self.i += 1
        tok = self.toks[self.i]
        if tok.kind != "eof":
            self.i += 1
        return tok

    def expect(self, text: str, skip_nl=True) -> _Token:
        tok = self.next(skip_nl)
        if tok.text != text:
            raise ParseError(f"expected {text!r}, found {tok.text or 'end of input'!r}", tok.line, tok.col)
        return tok

    def expect_kind(self, kind: str, what: str, skip_nl=True) -> _Token:
        tok = self.next(skip_nl)
        if tok.kind != kind:
            raise ParseError(f"expected {what}, found {tok.text or 'end of input'!r}", tok.line, tok.col)
        return tok

    def error_at(self, tok: _Token, message: str):
        raise ParseError(message, tok.line, tok.col)

    # -- grammar
    def parse(self) -> LogicProgram:
        while self.peek().kind != "eof":
            tok = self.peek()
            nxt = self.toks[self._index_after_nl() + 1]
            if tok.kind == "ident" and tok.text in _DECL_KEYWORDS and nxt.kind in ("ident", "var"):
                self.declaration()
            else:
                self.statement()
        return self.program

    def _index_after_nl(self) -> int:
        j = self.i
        while self.toks[j].kind == "nl":
            j += 1
        return j

    def _end_declaration(self):
        tok = self.toks[self.i]
        if tok.text == ".":
            self.i += 1
            tok = self.toks[self.i]
        if tok.kind not in ("nl", "eof"):
            self.error_at(tok, "declarations end at the end of the line")

    def _dtype_list(self) -> Tuple[str, ...]:
        self.expect("[", skip_nl=False)
        names: List[str] = []
        if self.peek(False).text != "]":
            names.append(self.expect_kind("ident", "dtype name", False).text)
            while self.peek(False).text == ",":
                self.next(False)
                names.append(self.expect_kind("ident", "dtype name", False).text)
        self.expect("]", skip_nl=False)
        return tuple(names)

    def declaration(self):
        kw = self.next()
        p = self.program
        if kw.text == "pred":
            name = self.expect_kind("ident", "predicate name", False)
            self.expect("/", skip_nl=False)
            arity = int(self.expect_kind("int", "arity", False).text)
            dtypes: Tuple[str, ...] = ()
            if self.peek(False).text == "[":
                dtypes = self._dtype_list()
            if len(dtypes) != arity:
                self.error_at(name, f"predicate {name.text}/{arity} lists {len(dtypes)} dtypes")
            if name.text in p.predicates:
                self.error_at(name, f"predicate {name.text} declared twice")
            if is_builtin(name.text):
                self.error_at(name, f"{name.text} is a built-in predicate")
            p.predicates[name.text] = Predicate(name.text, arity, dtypes)
        elif kw.text == "const":
            dtype = self.expect_kind("ident", "dtype name", False).text
            self.expect("{", skip_nl=False)
            names: List[str] = []
            if self.peek(False).text != "}":
                names.append(self._constant_name())
                while self.peek(False).text == ",":
                    self.next(False)
                    names.append(self._constant_name())
            self.expect("}", skip_nl=False)
            existing = list(p.constants.get(dtype, ()))
            for n in names:
                if n not in existing:
                    existing.append(n)
            p.constants[dtype] = tuple(existing)
        elif kw.text == "func":
            name = self.expect_kind("ident", "function symbol", False)
            self.expect("/", skip_nl=False)
            arity = int(self.expect_kind("int", "arity", False).text)
            dtypes = self._dtype_list()
            result = self.expect_kind("ident", "result dtype", False).text
            if len(dtypes) != arity or arity < 1:
                self.error_at(name, f"function {name.text}/{arity} lists {len(dtypes)} dtypes")
            p.functors[name.text] = Functor(name.text, arity, dtypes, result)
        else:  # option
            key = self.expect_kind("ident", "option name", False).text
            tok = self.next(False)
            if tok.kind not in ("ident", "int"):
                self.error_at(tok, "expected option value")
            p.options[key] = tok.text
        self._end_declaration()

    def _constant_name(self) -> str:
        tok = self.next(False)
        if tok.kind not in ("ident", "int"):
            self.error_at(tok, "expected a constant name")
        return tok.text

    def statement(self):
        start = self.peek()
        head = self.atom()
        body: List[Atom] = []
        tok = self.next()
        if tok.kind == "neck":
            body.append(self.atom())
            tok = self.next()
            while tok.text == ",":
                body.append(self.atom())
                tok = self.next()
        if tok.text != ".":
            self.error_at(tok, f"expected '.' or ',', found {tok.text or 'end of input'!r}")
        try:
            if not body and head.is_ground():
                self.program.facts.append(head)
            else:
                self.program.clauses.append(Clause(head, tuple(body)))
        except ProgramError as e:
            raise ParseError(str(e), start.line, start.col) from None

    def atom(self) -> Atom:
        tok = self.expect_kind("ident", "a predicate name")
        args: Tuple[Term, ...] = ()
        if self.peek(False).text == "(":
            args = self._args()
        if is_builtin(tok.text):
            pred = Predicate(tok.text, len(args), ("any",) * len(args))
        else:
            pred = self.program.predicates.get(tok.text)
            if pred is None:
                self.error_at(tok, f"undeclared predicate {tok.text!r}")
            if pred.arity != len(args):
                self.error_at(tok, f"arity mismatch: {pred} used with {len(args)} arguments")
        return Atom(pred, args)

    def _args(self) -> Tuple[Term, ...]:
        self.expect("(")
        args = [self.term()]
        while self.peek().text == ",":
            self.next()
            args.append(self.term())
        self.expect(")")
        return tuple(args)

    def term(self) -> Term:
        tok = self.next()
        if tok.kind == "var":
            return Variable(tok.text)
        if tok.kind in ("ident", "int"):
            if self.peek(False).text == "(":
                return Compound(tok.text, self._args())
            return Constant(tok.text)
        self.error_at(tok, f"expected a term, found {tok.text or 'end of input'!r}")


def parse_program(text: str) -> LogicProgram:
    """Parse and validate a program; raises ParseError or ProgramError."""
    program = _Parser(text).parse()
    try:
        return program.validate()
    except ProgramError:
        raise


def load_program(path) -> LogicProgram:
    with open(path, encoding="utf-8") as fh:
        return parse_program(fh.read())


def format_program(program: LogicProgram) -> str:
    lines = [f"option {k} {v}" for k, v in program.options.items()]
    for dtype, names in program.constants.items():
        lines.append(f"const {dtype} {{{', '.join(names)}}}")
    for f in program.functors.values():
        lines.append(f"func {f.name}/{f.arity} [{', '.join(f.arg_dtypes)}] {f.dtype}")
    for p in program.predicates.values():
        lines.append(f"pred {p.name}/{p.arity} [{', '.join(p.arg_dtypes)}]")
    lines.extend(f"{a}." for a in program.facts)
    lines.extend(str(c) for c in program.clauses)
    return "\n".join(lines) + "\n"


def parse_atom(text: str, program: LogicProgram) -> Atom:
    """Parse a single atom such as ``plan(a, h)`` against ``program``'s declarations."""
    parser = _Parser(text)
    parser.program = program
    atom = parser.atom()
    tail = parser.peek()
    if tail.text == ".":
        parser.next()
        tail = parser.peek()
    if tail.kind != "eof":
        parser.error_at(tail, f"unexpected {tail.text!r} after atom")
    return atom
