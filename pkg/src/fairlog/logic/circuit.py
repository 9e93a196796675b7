"""Boolean proof circuits and their compilation to decision tapes.

A grounded query becomes a boolean DAG over random-variable leaves
(AND/OR/NOT over independent Bernoulli facts). Exact inference uses
Shannon expansion: repeatedly split onone leaf and simplify, producing
a reduced decision DAG ("tape") that evaluates the query probability as
a multilinear function of the leaf probabilities. Hash-consing makes the
expansion memoization structural: two partial assignments that leave the
same residual circuit share all further work.

The tape is the hot object: training re-evaluates it for every example
in every batch, so evaluation lives in fairlog.kernels.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

FALSE = 0
TRUE = 1

# node kinds in the boolean DAG
_LEAF = 0
_AND = 1
_OR = 2
_NOT = 3


class CircuitBuilder:
    """Hash-consed constructor for boolean DAG nodes.

    Node ids are dense ints; 0 and 1 are the FALSE/TRUE terminals.
    Construction applies cheap simplifications (constant folding,
    flattening, deduplication, double-negation) so structurally equal
    subcircuits always receive the same id.
    """

    def __init__(self) -> None:
        self.kinds: "list[int]" = [_LEAF, _LEAF]  # placeholders for terminals
        self.payload: "list" = [None, None]
        self._cache: "dict[tuple, int]" = {}

    def _intern(self, kind: int, payload) -> int:
        key = (kind, payload)
        node = self._cache.get(key)
        if node is None:
            node = len(self.kinds)
            self.kinds.append(kind)
            self.payload.append(payload)
            self._cache[key] = node
        return node

    def leaf(self, leaf_index: int) -> int:
        return self._intern(_LEAF, leaf_index)

    def negate(self, child: int) -> int:
        if child == TRUE:
            return FALSE
        if child == FALSE:
            return TRUE
        if self.kinds[child] == _NOT:
            return self.payload[child]
        return self._intern(_NOT, child)

    def conjoin(self, children: Sequence[int]) -> int:
        flat: "list[int]" = []
        seen = set()
        for child in children:
            if child == FALSE:
                return FALSE
            if child == TRUE:
                continue
            parts = self.payload[child] if self.kinds[child] == _AND else (child,)
            for part in parts:
                if part not in seen:
                    seen.add(part)
                    flat.append(part)
        if not flat:
            return TRUE
        if len(flat) == 1:
            return flat[0]
        return self._intern(_AND, tuple(sorted(flat)))

    def disjoin(self, children: Sequence[int]) -> int:
        flat: "list[int]" = []
        seen = set()
        for child in children:
            if child == TRUE:
                return TRUE
            if child == FALSE:
                continue
            parts = self.payload[child] if self.kinds[child] == _OR else (child,)
            for part in parts:
                if part not in seen:
                    seen.add(part)
                    flat.append(part)
        if not flat:
            return FALSE
        if len(flat) == 1:
            return flat[0]
        return self._intern(_OR, tuple(sorted(flat)))


@dataclass(frozen=True)
class Leaf:
    """One independent Bernoulli variable of a circuit.

    ``key`` identifies the ground fact; ``source`` says where its
    probability comes from:

    * ``("const", p)`` -- literal probability from the program text,
    * ``("param", name, index)`` -- named parameter, resolved against a
      ParameterTable at evaluation time,
    * ``("nn", network, args)`` -- neural fact, evaluated on the example.
    """

    index: int
    key: tuple
    source: tuple

    def __repr__(self) -> str:
        return f"Leaf({self.index}, {self.key})"


class ProofCircuit:
    """Immutable grounded proof structure for one query."""

    def __init__(self, builder: CircuitBuilder, root: int, leaves: "list[Leaf]"):
        self._kinds = builder.kinds
        self._payload = builder.payload
        self.root = root
        reachable = self._support_indices(root)
        self.leaves = [leaf for leaf in leaves if leaf.index in reachable]
        self._all_leaves = list(leaves)
        # compile eagerly: afterwards the circuit is read-only and safe to
        # evaluate from multiple threads
        self._tape = _compile_tape(self)

    # -- inspection ----------------------------------------------------------

    def _support_indices(self, node: int) -> "set[int]":
        seen: "set[int]" = set()
        out: "set[int]" = set()
        stack = [node]
        while stack:
            cur = stack.pop()
            if cur in seen or cur in (TRUE, FALSE):
                continue
            seen.add(cur)
            kind = self._kinds[cur]
            if kind == _LEAF:
                out.add(self._payload[cur])
            elif kind == _NOT:
                stack.append(self._payload[cur])
            else:
                stack.extend(self._payload[cur])
        return out

    @property
    def n_leaves(self) -> int:
        return len(self._all_leaves)

    def leaf_by_key(self, key: tuple) -> Leaf:
        for leaf in self._all_leaves:
            if leaf.key == key:
                return leaf
        raise KeyError(key)

    def structure_signature(self) -> tuple:
        """Hashable full description; equal signatures mean identical circuits."""
        return (
            tuple(self._kinds[2:]),
            tuple(self._payload[2:]),
            self.root,
            tuple((leaf.key, leaf.source) for leaf in self._all_leaves),
        )

    # -- semantics -----------------------------------------------------------

    def evaluate_boolean(self, assignment: "dict[int, bool]") -> bool:
        """Truth value of the root under a complete leaf assignment."""
        memo: "dict[int, bool]" = {FALSE: False, TRUE: True}

        def rec(node: int) -> bool:
            if node in memo:
                return memo[node]
            kind = self._kinds[node]
            payload = self._payload[node]
            if kind == _LEAF:
                value = assignment[payload]
            elif kind == _NOT:
                value = not rec(payload)
            elif kind == _AND:
                value = all(rec(c) for c in payload)
            else:
                value = any(rec(c) for c in payload)
            memo[node] = value
            return value

        return rec(self.root)

    def tape(self) -> "DecisionTape":
        return self._tape


@dataclass
class DecisionTape:
    """Reduced decision DAG in topological array form.

    Node ids: 0 = FALSE terminal, 1 = TRUE terminal, and decision node
    ``i >= 2`` is stored at array position ``i - 2``. The probability of
    node ``i`` with split leaf ``v`` is ``p_v * P(hi) + (1 - p_v) * P(lo)``.
    """

    var: np.ndarray  # int32, leaf index per decision node
    lo: np.ndarray  # int32, node id
    hi: np.ndarray  # int32, node id
    root: int
    n_leaves: int
    leaves: "list[Leaf]"

    @property
    def n_nodes(self) -> int:
        return len(self.var)


def _compile_tape(circuit: ProofCircuit) -> DecisionTape:
    kinds = circuit._kinds
    payload = circuit._payload
    builder = CircuitBuilder()
    builder.kinds = kinds
    builder.payload = payload
    builder._cache = {}
    # rebuild the cons cache so restriction reuses existing nodes
    for node in range(2, len(kinds)):
        builder._cache[(kinds[node], payload[node])] = node

    support_memo: "dict[int, int]" = {TRUE: 0, FALSE: 0}

    def support(node: int) -> int:
        cached = support_memo.get(node)
        if cached is not None:
            return cached
        kind = builder.kinds[node]
        data = builder.payload[node]
        if kind == _LEAF:
            mask = 1 << data
        elif kind == _NOT:
            mask = support(data)
        else:
            mask = 0
            for child in data:
                mask |= support(child)
        support_memo[node] = mask
        return mask

    restrict_memo: "dict[tuple[int, int, bool], int]" = {}

    def restrict(node: int, leaf_index: int, value: bool) -> int:
        if node in (TRUE, FALSE) or not (support(node) >> leaf_index) & 1:
            return node
        key = (node, leaf_index, value)
        cached = restrict_memo.get(key)
        if cached is not None:
            return cached
        kind = builder.kinds[node]
        data = builder.payload[node]
        if kind == _LEAF:
            out = TRUE if value else FALSE
        elif kind == _NOT:
            out = builder.negate(restrict(data, leaf_index, value))
        elif kind == _AND:
            out = builder.conjoin([restrict(c, leaf_index, value) for c in data])
        else:
            out = builder.disjoin([restrict(c, leaf_index, value) for c in data])
        restrict_memo[key] = out
        return out

    var: "list[int]" = []
    lo: "list[int]" = []
    hi: "list[int]" = []
    expand_memo: "dict[int, int]" = {FALSE: 0, TRUE: 1}
    unique: "dict[tuple[int, int, int], int]" = {}

    def expand(node: int) -> int:
        cached = expand_memo.get(node)
        if cached is not None:
            return cached
        leaf_index = _lowest_bit(support(node))
        lo_id = expand(restrict(node, leaf_index, False))
        hi_id = expand(restrict(node, leaf_index, True))
        if lo_id == hi_id:
            out = lo_id
        else:
            key = (leaf_index, lo_id, hi_id)
            out = unique.get(key)
            if out is None:
                out = len(var) + 2
                unique[key] = out
                var.append(leaf_index)
                lo.append(lo_id)
                hi.append(hi_id)
        expand_memo[node] = out
        return out

    root = expand(circuit.root)
    return DecisionTape(
        var=np.asarray(var, dtype=np.int32),
        lo=np.asarray(lo, dtype=np.int32),
        hi=np.asarray(hi, dtype=np.int32),
        root=root,
        n_leaves=circuit.n_leaves,
        leaves=circuit._all_leaves,
    )


def _lowest_bit(mask: int) -> int:
    return (mask & -mask).bit_length() - 1
