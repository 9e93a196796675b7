"""Parser for the probabilistic logic dialect.

Grammar (whitespace insignificant, ``%`` comments to end of line):

    program  := (clause | query)*
    query    := '?-' atom '.'
    clause   := [label '::'] atom [':-' body] '.'
    body     := literal (',' literal)*
    literal  := ['\\+'] atom
    label    := number | name | name '(' term ')' | 'nn' '(' name, terms ')'
    atom     := (name | '>') ['(' term (',' term)* ')']
    term     := primary (('+' | '-') primary)*
    primary  := VAR | INT | FLOAT | name ['(' term (',' term)* ')']

Variables start with an uppercase letter or underscore; ``\\+`` is
negation as failure; probabilistic clauses are written
``Prob :: Head :- Body.`` and neural facts ``nn(name, Args) :: Head.``.
"""

from __future__ import annotations

import re

from .terms import (
    Clause,
    Const,
    Label,
    Literal,
    NeuralLabel,
    ProbLabel,
    Program,
    Struct,
    Term,
    Var,
    variables,
)


class ParseError(ValueError):
    def __init__(self, message: str, line: int, col: int):
        super().__init__(f"{message} (line {line}, column {col})")
        self.line = line
        self.col = col


_TOKEN_RE = re.compile(
    r"""
    (?P<WS>\s+)
  | (?P<COMMENT>%[^\n]*)
  | (?P<QUERY>\?-)
  | (?P<ARROW>:-)
  | (?P<DCOLON>::)
  | (?P<NAF>\\\+)
  | (?P<FLOAT>\d+\.\d+)
  | (?P<INT>\d+)
  | (?P<IDENT>[a-z][A-Za-z0-9_]*)
  | (?P<VAR>[A-Z_][A-Za-z0-9_]*)
  | (?P<PUNCT>[().,+\->])
""",
    re.VERBOSE,
)


class _Token:
    __slots__ = ("kind", "text", "line", "col")

    def __init__(self, kind: str, text: str, line: int, col: int):
        self.kind = kind
        self.text = text
        self.line = line
        self.col = col

    def __repr__(self) -> str:
        return f"{self.kind}:{self.text!r}"


def _tokenize(text: str) -> "list[_Token]":
    tokens = []
    line, col = 1, 1
    pos = 0
    while pos < len(text):
        match = _TOKEN_RE.match(text, pos)
        if match is None:
            raise ParseError(f"unexpected character {text[pos]!r}", line, col)
        kind = match.lastgroup
        chunk = match.group()
        if kind not in ("WS", "COMMENT"):
            tok_kind = chunk if kind == "PUNCT" else kind
            tokens.append(_Token(tok_kind, chunk, line, col))
        newlines = chunk.count("\n")
        if newlines:
            line += newlines
            col = len(chunk) - chunk.rfind("\n")
        else:
            col += len(chunk)
        pos = match.end()
    tokens.append(_Token("EOF", "", line, col))
    return tokens


class _Parser:
    def __init__(self, text: str):
        self.tokens = _tokenize(text)
        self.pos = 0

    # -- token stream helpers ------------------------------------------------

    def peek(self) -> _Token:
        return self.tokens[self.pos]

    def next(self) -> _Token:
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def expect(self, kind: str) -> _Token:
        tok = self.next()
        if tok.kind != kind:
            raise ParseError(f"expected {kind!r}, found {tok.text!r}", tok.line, tok.col)
        return tok

    def error(self, message: str) -> ParseError:
        tok = self.peek()
        return ParseError(message, tok.line, tok.col)

    # -- grammar -------------------------------------------------------------

    def parse_program(self, source: str) -> Program:
        clauses = []
        queries = []
        while self.peek().kind != "EOF":
            if self.peek().kind == "QUERY":
                self.next()
                atom = self.parse_atom()
                self.expect(".")
                queries.append(atom)
            else:
                clauses.append(self.parse_clause())
        return Program(tuple(clauses), tuple(queries), source=source)

    def parse_clause(self) -> Clause:
        start = self.peek()
        label: Label = None

        mark = self.pos
        term = self.parse_term()
        if self.peek().kind == "DCOLON":
            self.next()
            label = self.classify_label(term, start)
        else:
            self.pos = mark
        head = self.parse_atom()

        body: "tuple[Literal, ...]" = ()
        if self.peek().kind == "ARROW":
            self.next()
            body = self.parse_body()
        self.expect(".")
        clause = Clause(head, body, label, start.line, start.col)
        self.check_label_variables(clause, start)
        return clause

    def classify_label(self, term: Term, at: _Token) -> Label:
        if isinstance(term, Const) and isinstance(term.value, (int, float)):
            prob = float(term.value)
            if not 0.0 <= prob <= 1.0:
                raise ParseError(f"probability {prob} outside [0, 1]", at.line, at.col)
            return ProbLabel(value=prob)
        if isinstance(term, Struct) and term.functor == "nn":
            if len(term.args) < 2 or not isinstance(term.args[0], Const):
                raise ParseError("nn label needs a network name and arguments", at.line, at.col)
            return NeuralLabel(str(term.args[0].value), term.args[1:])
        if isinstance(term, Const) and isinstance(term.value, str):
            return ProbLabel(param=term.value)
        if isinstance(term, Struct) and len(term.args) == 1:
            return ProbLabel(param=term.functor, index=term.args[0])
        raise ParseError("malformed probability label", at.line, at.col)

    def check_label_variables(self, clause: Clause, at: _Token) -> None:
        label = clause.label
        if label is None:
            return
        if isinstance(label, ProbLabel):
            label_vars = set() if label.index is None else {v.name for v in variables(label.index)}
        else:
            label_vars = {v.name for arg in label.args for v in variables(arg)}
        scope = {v.name for v in variables(clause.head)}
        for lit in clause.body:
            scope |= {v.name for v in variables(lit.atom)}
        unbound = label_vars - scope
        if unbound:
            raise ParseError(
                f"label variable {sorted(unbound)[0]} not bound by head or body",
                at.line,
                at.col,
            )

    def parse_body(self) -> "tuple[Literal, ...]":
        literals = [self.parse_literal()]
        while self.peek().kind == ",":
            self.next()
            literals.append(self.parse_literal())
        return tuple(literals)

    def parse_literal(self) -> Literal:
        if self.peek().kind == "NAF":
            self.next()
            return Literal(self.parse_atom(), negated=True)
        return Literal(self.parse_atom())

    def parse_atom(self) -> Struct:
        tok = self.peek()
        if tok.kind not in ("IDENT", ">"):
            raise self.error(f"expected an atom, found {tok.text!r}")
        self.next()
        args: "tuple[Term, ...]" = ()
        if self.peek().kind == "(":
            self.next()
            args = self.parse_term_list()
            self.expect(")")
        return Struct(tok.text, args)

    def parse_term_list(self) -> "tuple[Term, ...]":
        terms = [self.parse_term()]
        while self.peek().kind == ",":
            self.next()
            terms.append(self.parse_term())
        return tuple(terms)

    def parse_term(self) -> Term:
        term = self.parse_primary()
        while self.peek().kind in ("+", "-"):
            op = self.next()
            rhs = self.parse_primary()
            term = Struct(op.kind, (term, rhs))
        return term

    def parse_primary(self) -> Term:
        tok = self.next()
        if tok.kind == "VAR":
            return Var(tok.text)
        if tok.kind == "INT":
            return Const(int(tok.text))
        if tok.kind == "FLOAT":
            return Const(float(tok.text))
        if tok.kind == "IDENT":
            if self.peek().kind == "(":
                self.next()
                args = self.parse_term_list()
                self.expect(")")
                return Struct(tok.text, args)
            return Const(tok.text)
        raise ParseError(f"expected a term, found {tok.text!r}", tok.line, tok.col)


def parse(text: str) -> Program:
    """Parse program text into a Program; raises ParseError with position."""
    return _Parser(text).parse_program(text)
