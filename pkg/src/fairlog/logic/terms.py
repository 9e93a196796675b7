"""Term and clause representation for the probabilistic logic dialect.

Terms follow the usual Prolog structure: variables (uppercase or `_`
initial), constants (lowercase symbols or integers/floats), and compound
terms ``f(t1,...,tk)``. Atoms are represented as Struct, possibly with an
empty argument tuple (``raining`` is ``Struct("raining", ())``).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator, Optional, Union


@dataclass(frozen=True)
class Var:
    name: str

    def __repr__(self) -> str:
        return self.name


@dataclass(frozen=True)
class Const:
    value: Union[str, int, float]

    def __repr__(self) -> str:
        return str(self.value)


@dataclass(frozen=True)
class Struct:
    functor: str
    args: "tuple[Term, ...]"

    def __repr__(self) -> str:
        if not self.args:
            return self.functor
        return f"{self.functor}({','.join(map(repr, self.args))})"

    @property
    def indicator(self) -> "tuple[str, int]":
        return (self.functor, len(self.args))


Term = Union[Var, Const, Struct]


@dataclass(frozen=True)
class Literal:
    atom: Struct
    negated: bool = False

    def __repr__(self) -> str:
        return ("\\+" if self.negated else "") + repr(self.atom)


@dataclass(frozen=True)
class ProbLabel:
    """Probability annotation of a clause.

    Either a numeric literal in [0, 1] (``value``) or a named parameter
    reference (``param`` plus an optional index term, as in ``p1(N)``).
    """

    value: Optional[float] = None
    param: Optional[str] = None
    index: Optional[Term] = None

    def __repr__(self) -> str:
        if self.param is None:
            return repr(self.value)
        if self.index is None:
            return self.param
        return f"{self.param}({self.index!r})"


@dataclass(frozen=True)
class NeuralLabel:
    """``nn(name, Args...)`` annotation: probability supplied by a bound network."""

    network: str
    args: "tuple[Term, ...]"

    def __repr__(self) -> str:
        return f"nn({self.network},{','.join(map(repr, self.args))})"


Label = Union[None, ProbLabel, NeuralLabel]


@dataclass(frozen=True)
class Clause:
    head: Struct
    body: "tuple[Literal, ...]" = ()
    label: Label = None
    line: int = 0
    col: int = 0

    def __repr__(self) -> str:
        text = "" if self.label is None else f"{self.label!r} :: "
        text += repr(self.head)
        if self.body:
            text += " :- " + ", ".join(map(repr, self.body))
        return text + "."


@dataclass(frozen=True)
class Program:
    clauses: "tuple[Clause, ...]"
    queries: "tuple[Struct, ...]" = ()
    source: str = field(default="", compare=False, hash=False)

    def __repr__(self) -> str:
        lines = [repr(c) for c in self.clauses]
        lines += [f"?- {q!r}." for q in self.queries]
        return "\n".join(lines)

    def clauses_for(self, indicator: "tuple[str, int]") -> "tuple[Clause, ...]":
        return self._index().get(indicator, ())

    def _index(self) -> "dict[tuple[str, int], tuple[Clause, ...]]":
        index = getattr(self, "_indicator_index", None)
        if index is None:
            index = {}
            for clause in self.clauses:
                index.setdefault(clause.head.indicator, []).append(clause)
            index = {key: tuple(val) for key, val in index.items()}
            object.__setattr__(self, "_indicator_index", index)
        return index


# ---------------------------------------------------------------------------
# Substitutions and unification
# ---------------------------------------------------------------------------

Subst = "dict[str, Term]"


def walk(term: Term, subst: dict) -> Term:
    """Follow variable bindings until a non-variable or unbound variable."""
    while isinstance(term, Var):
        bound = subst.get(term.name)
        if bound is None:
            return term
        term = bound
    return term


def substitute(term: Term, subst: dict) -> Term:
    """Deep-apply a substitution to a term."""
    term = walk(term, subst)
    if isinstance(term, Struct) and term.args:
        return Struct(term.functor, tuple(substitute(a, subst) for a in term.args))
    return term


def unify(t1: Term, t2: Term, subst: dict) -> Optional[dict]:
    """Unify two terms, returning an extended substitution or None.

    The input dict is never mutated; a copy is made on first binding.
    """
    stack = [(t1, t2)]
    out = subst
    copied = False
    while stack:
        a, b = stack.pop()
        a = walk(a, out)
        b = walk(b, out)
        if a is b:
            continue
        if isinstance(a, Var):
            if not copied:
                out = dict(out)
                copied = True
            out[a.name] = b
        elif isinstance(b, Var):
            if not copied:
                out = dict(out)
                copied = True
            out[b.name] = a
        elif isinstance(a, Const) and isinstance(b, Const):
            if a.value != b.value:
                return None
        elif isinstance(a, Struct) and isinstance(b, Struct):
            if a.functor != b.functor or len(a.args) != len(b.args):
                return None
            stack.extend(zip(a.args, b.args))
        else:
            return None
    return out


def variables(term: Term) -> Iterator[Var]:
    if isinstance(term, Var):
        yield term
    elif isinstance(term, Struct):
        for arg in term.args:
            yield from variables(arg)


def is_ground(term: Term) -> bool:
    return next(variables(term), None) is None


def rename_term(term: Term, counter: int) -> Term:
    """Standardize a term apart by suffixing its variables with a counter."""
    if isinstance(term, Var):
        return Var(f"{term.name}#{counter}")
    if isinstance(term, Struct) and term.args:
        return Struct(term.functor, tuple(rename_term(a, counter) for a in term.args))
    return term


def rename_clause(clause: Clause, counter: int) -> Clause:
    """Standardize a clause apart by suffixing its variables with a counter."""
    mapping: dict = {}

    def ren(term: Term) -> Term:
        if isinstance(term, Var):
            fresh = mapping.get(term.name)
            if fresh is None:
                fresh = Var(f"{term.name}#{counter}")
                mapping[term.name] = fresh
            return fresh
        if isinstance(term, Struct) and term.args:
            return Struct(term.functor, tuple(ren(a) for a in term.args))
        return term

    head = ren(clause.head)
    body = tuple(Literal(ren(lit.atom), lit.negated) for lit in clause.body)
    label = clause.label
    if isinstance(label, ProbLabel) and label.index is not None:
        label = ProbLabel(param=label.param, index=ren(label.index))
    elif isinstance(label, NeuralLabel):
        label = NeuralLabel(label.network, tuple(ren(a) for a in label.args))
    return Clause(head, body, label, clause.line, clause.col)


def canonical_clause(clause: Clause) -> Clause:
    """Rename variables to positional names, for variant comparison."""
    mapping: dict = {}

    def ren(term: Term) -> Term:
        if isinstance(term, Var):
            if term.name not in mapping:
                mapping[term.name] = Var(f"_G{len(mapping)}")
            return mapping[term.name]
        if isinstance(term, Struct) and term.args:
            return Struct(term.functor, tuple(ren(a) for a in term.args))
        return term

    head = ren(clause.head)
    body = tuple(Literal(ren(lit.atom), lit.negated) for lit in clause.body)
    label = clause.label
    if isinstance(label, ProbLabel) and label.index is not None:
        label = ProbLabel(param=label.param, index=ren(label.index))
    elif isinstance(label, NeuralLabel):
        label = NeuralLabel(label.network, tuple(ren(a) for a in label.args))
    return Clause(head, body, label)


def programs_equivalent(p1: Program, p2: Program) -> bool:
    """Structural equality up to variable renaming and source positions."""
    if len(p1.clauses) != len(p2.clauses) or p1.queries != p2.queries:
        return False
    return all(
        canonical_clause(a) == canonical_clause(b)
        for a, b in zip(p1.clauses, p2.clauses)
    )
