"""Query grounding: SLD resolution with tabling, compiled to circuits.

Resolution proceeds top-down from a ground query. Each proof contributes
an AND of its subgoal circuits (times the clause's coin when the clause
is probabilistic or neural); alternative proofs of the same answer are
OR-ed. Subgoal answers are memoized per call variant; re-entering a call
that is still in progress means the ground dependency graph is cyclic,
which is rejected (all supported programs are acyclic and stratified).

Built-ins ``>(A, B)`` and ``is(V, Expr)`` (Expr over +, - and integers)
are evaluated eagerly during resolution and never appear in circuits.

Coin (Bernoulli leaf) identity:

* a clause with a literal probability gets one coin per ground clause
  instance (standard possible-world semantics),
* a clause labelled with a named parameter such as ``p1(N)`` gets one
  coin per resolved ``(name, index)`` pair: the parameter names one
  bias event, shared by every ground rule that references it,
* a neural fact gets one leaf per (network, ground arguments); bindings
  marked ``ground_time`` are evaluated during grounding instead and
  must return exactly 0 or 1 (attribute selectors).
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Any, Callable, Mapping, Optional, Union

from .circuit import FALSE, TRUE, CircuitBuilder, Leaf, ProofCircuit
from .terms import (
    Clause,
    Const,
    Literal,
    NeuralLabel,
    ProbLabel,
    Program,
    Struct,
    Term,
    Var,
    is_ground,
    rename_clause,
    rename_term,
    substitute,
    unify,
)


class GroundingError(ValueError):
    """Base class for errors raised while grounding a query."""


class CyclicProgramError(GroundingError):
    """The query's ground dependency graph is cyclic or unstratified."""


class NonGroundError(GroundingError):
    """A built-in, negation, label or query received unbound arguments."""


class UnknownParameterError(GroundingError):
    """A named parameter does not resolve in the parameter table."""


class UnknownNetworkError(GroundingError):
    """A neural fact references a network with no binding."""


class ParameterTable:
    """Map from (parameter name, index) to a probability in [0, 1].

    Entries may be keyed by bare name (index 0) or ``(name, index)``.
    """

    def __init__(self, entries: Optional[Mapping] = None):
        self._table: "dict[tuple[str, int], float]" = {}
        if entries:
            for key, value in entries.items():
                if isinstance(key, str):
                    key = (key, 0)
                name, index = key
                value = float(value)
                if not 0.0 <= value <= 1.0:
                    raise ValueError(f"parameter {name}({index}) = {value} outside [0, 1]")
                self._table[(name, int(index))] = value

    def get(self, name: str, index: int = 0) -> float:
        try:
            return self._table[(name, index)]
        except KeyError:
            raise UnknownParameterError(
                f"parameter {name!r} with index {index} is not defined"
            ) from None

    def has(self, name: str, index: int = 0) -> bool:
        return (name, index) in self._table

    def items(self):
        return self._table.items()

    def __len__(self) -> int:
        return len(self._table)

    def __repr__(self) -> str:
        inner = ", ".join(f"{n}({i})={v}" for (n, i), v in sorted(self._table.items()))
        return f"ParameterTable({inner})"


@dataclass
class NeuralBinding:
    """Evaluator behind a neural fact.

    ``fn(args, context)`` receives the ground argument terms and the
    grounding context (e.g. the example's feature vector) and returns a
    probability. ``ground_time`` bindings are deterministic attribute
    selectors: they are folded into the circuit structure as constants
    and must return exactly 0.0 or 1.0.
    """

    fn: Callable[[tuple, Any], float]
    ground_time: bool = False


NeuralBindings = Mapping[str, NeuralBinding]

_BUILTINS = {(">", 2), ("is", 2)}
_MAX_STEPS = 1_000_000


def _variant_key(term: Term, names: "dict[str, int]") -> tuple:
    if isinstance(term, Var):
        if term.name not in names:
            names[term.name] = len(names)
        return ("v", names[term.name])
    if isinstance(term, Const):
        return ("c", term.value)
    return ("s", term.functor) + tuple(_variant_key(a, names) for a in term.args)


def _eval_arith(term: Term) -> int:
    if isinstance(term, Const) and isinstance(term.value, int):
        return term.value
    if isinstance(term, Struct) and term.functor in ("+", "-") and len(term.args) == 2:
        left = _eval_arith(term.args[0])
        right = _eval_arith(term.args[1])
        return left + right if term.functor == "+" else left - right
    if isinstance(term, Var):
        raise NonGroundError(f"non-ground built-in argument: {term!r}")
    raise GroundingError(f"cannot evaluate arithmetic term {term!r}")


class Grounder:
    def __init__(
        self,
        program: Program,
        params: ParameterTable,
        neural: NeuralBindings,
        context: Any = None,
    ):
        self.program = program
        self.params = params
        self.neural = neural
        self.context = context
        self.builder = CircuitBuilder()
        self.leaves: "list[Leaf]" = []
        self._leaf_ids: "dict[tuple, int]" = {}
        self._memo: "dict[tuple, list]" = {}
        self._active: "set[tuple]" = set()
        self._clause_index = {clause: i for i, clause in enumerate(program.clauses)}
        self._rename = itertools.count(1)
        self._steps = 0

    # -- leaves ----------------------------------------------------------------

    def _leaf_node(self, key: tuple, source: tuple) -> int:
        index = self._leaf_ids.get(key)
        if index is None:
            index = len(self.leaves)
            self._leaf_ids[key] = index
            self.leaves.append(Leaf(index, key, source))
        return self.builder.leaf(index)

    def _coin(self, clause: Clause, clause_idx: int, env: dict) -> int:
        """Circuit node for the clause's probabilistic/neural annotation."""
        label = clause.label
        if label is None:
            return TRUE
        if isinstance(label, ProbLabel):
            if label.param is None:
                head = substitute(clause.head, env)
                body = tuple(substitute(lit.atom, env) for lit in clause.body)
                key = ("fact", clause_idx, repr(head), repr(body))
                return self._leaf_node(key, ("const", label.value))
            if label.index is None:
                index = 0
            else:
                index_term = substitute(label.index, env)
                if not (isinstance(index_term, Const) and isinstance(index_term.value, int)):
                    raise NonGroundError(
                        f"parameter index {index_term!r} is not a ground integer"
                    )
                index = index_term.value
            if not self.params.has(label.param, index):
                raise UnknownParameterError(
                    f"parameter {label.param!r} with index {index} is not defined"
                )
            key = ("param", label.param, index)
            return self._leaf_node(key, key)
        # neural fact
        args = tuple(substitute(a, env) for a in label.args)
        if any(not is_ground(a) for a in args):
            raise NonGroundError(f"neural fact nn({label.network}, ...) called with unbound arguments")
        binding = self.neural.get(label.network)
        if binding is None:
            raise UnknownNetworkError(f"no binding for neural network {label.network!r}")
        if binding.ground_time:
            value = float(binding.fn(args, self.context))
            if value == 1.0:
                return TRUE
            if value == 0.0:
                return FALSE
            raise GroundingError(
                f"ground-time binding {label.network!r} returned {value}; must be exactly 0 or 1"
            )
        key = ("nn", label.network, args)
        return self._leaf_node(key, key)

    # -- resolution --------------------------------------------------------------

    def solve(self, goal: Struct, subst: dict) -> "list[tuple[dict, int]]":
        """All answers to ``goal`` under ``subst`` as (substitution, node)."""
        self._steps += 1
        if self._steps > _MAX_STEPS:
            raise GroundingError("resolution step budget exceeded; query does not terminate")
        goal_now = substitute(goal, subst)
        indicator = goal_now.indicator
        if indicator in _BUILTINS:
            return self._solve_builtin(goal_now, subst)

        key = _variant_key(goal_now, {})
        if key in self._active:
            raise CyclicProgramError(
                f"cyclic dependency through {goal_now!r}; programs must be acyclic and stratified"
            )
        answers = self._memo.get(key)
        if answers is None:
            self._active.add(key)
            try:
                answers = self._solve_fresh(goal_now)
            finally:
                self._active.discard(key)
            self._memo[key] = answers

        results = []
        for answer, node in answers:
            if not is_ground(answer):
                # rename memoized free variables apart per use so two uses
                # in one body cannot capture each other's bindings
                answer = rename_term(answer, next(self._rename))
            bound = unify(goal_now, answer, subst)
            if bound is not None:
                results.append((bound, node))
        return results

    def _solve_fresh(self, goal: Struct) -> "list[tuple[Struct, int]]":
        grouped: "dict[Struct, list[int]]" = {}
        for clause in self.program.clauses_for(goal.indicator):
            renamed = rename_clause(clause, next(self._rename))
            env = unify(renamed.head, goal, {})
            if env is None:
                continue
            clause_idx = self._clause_index[clause]
            for env2, body_node in self._solve_body(renamed.body, env):
                node = self.builder.conjoin([body_node, self._coin(renamed, clause_idx, env2)])
                if node == FALSE:
                    continue
                answer = substitute(goal, env2)
                grouped.setdefault(answer, []).append(node)
        return [(ans, self.builder.disjoin(nodes)) for ans, nodes in grouped.items()]

    def _solve_body(self, body: "tuple[Literal, ...]", env: dict):
        results = [(env, TRUE)]
        for literal in body:
            next_results = []
            for current, acc in results:
                if literal.negated:
                    goal = substitute(literal.atom, current)
                    if not is_ground(goal):
                        raise NonGroundError(f"negated subgoal {goal!r} is not ground")
                    sols = self.solve(goal, current)
                    node = self.builder.negate(self.builder.disjoin([n for _, n in sols]))
                    merged = self.builder.conjoin([acc, node])
                    if merged != FALSE:
                        next_results.append((current, merged))
                else:
                    for bound, node in self.solve(literal.atom, current):
                        merged = self.builder.conjoin([acc, node])
                        if merged != FALSE:
                            next_results.append((bound, merged))
            results = next_results
            if not results:
                break
        return results

    def _solve_builtin(self, goal: Struct, subst: dict) -> "list[tuple[dict, int]]":
        name = goal.functor
        if name == ">":
            left = _eval_arith(goal.args[0])
            right = _eval_arith(goal.args[1])
            return [(subst, TRUE)] if left > right else []
        # is(V, Expr)
        value = _eval_arith(goal.args[1])
        bound = unify(goal.args[0], Const(value), subst)
        return [] if bound is None else [(bound, TRUE)]


def ground(
    program: Program,
    query: Struct,
    params: Optional[Union[ParameterTable, Mapping]] = None,
    neural: Optional[NeuralBindings] = None,
    context: Any = None,
) -> ProofCircuit:
    """Ground a query against a program and compile its proof circuit.

    ``context`` is handed to neural bindings (typically the example's
    feature vector). The circuit's evaluation equals the query's success
    probability under possible-world semantics.
    """
    if not isinstance(params, ParameterTable):
        params = ParameterTable(params)
    if not isinstance(query, Struct):
        raise GroundingError(f"query must be an atom, got {query!r}")
    if not is_ground(query):
        raise NonGroundError(f"query {query!r} is not ground")
    grounder = Grounder(program, params, neural or {}, context)
    solutions = grounder.solve(query, {})
    root = grounder.builder.disjoin([node for _, node in solutions])
    return ProofCircuit(grounder.builder, root, grounder.leaves)
