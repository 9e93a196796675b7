"""Exact circuit evaluation, gradients, and the brute-force oracle."""

from __future__ import annotations

from dataclasses import dataclass
from itertools import product
from typing import Any, Mapping, Optional, Union

import numpy as np

from .. import kernels
from ..losses import LossSpec, loss_grad
from .circuit import ProofCircuit
from .ground import NeuralBindings, ParameterTable

NEURAL_CLAMP = 1e-6


class EvaluationError(ValueError):
    pass


@dataclass
class InferenceResult:
    probability: float
    gradients: "dict[tuple, float]"  # leaf key -> dP/dp_leaf


def _prob_vector(circuit: ProofCircuit, leaf_probs) -> np.ndarray:
    leaves = circuit.tape().leaves
    if isinstance(leaf_probs, Mapping):
        values = []
        for leaf in leaves:
            if leaf.key not in leaf_probs:
                raise EvaluationError(f"no probability assigned to leaf {leaf.key!r}")
            values.append(float(leaf_probs[leaf.key]))
    else:
        values = [float(v) for v in leaf_probs]
        if len(values) != len(leaves):
            raise EvaluationError(
                f"expected {len(leaves)} leaf probabilities, got {len(values)}"
            )
    probs = np.asarray(values, dtype=np.float64)
    if probs.size and (probs.min() < 0.0 or probs.max() > 1.0):
        raise EvaluationError("leaf probabilities must lie in [0, 1]")
    return probs


def evaluate(circuit: ProofCircuit, leaf_probs) -> InferenceResult:
    """Exact query probability plus dP/dp for every leaf.

    ``leaf_probs`` is a mapping from leaf key to probability, or a
    sequence in leaf order.
    """
    probs = _prob_vector(circuit, leaf_probs)
    tape = circuit.tape()
    value, grad = kernels.tape_forward_backward(
        tape.var, tape.lo, tape.hi, tape.root, probs.reshape(1, -1)
    )
    gradients = {leaf.key: float(grad[0, i]) for i, leaf in enumerate(tape.leaves)}
    return InferenceResult(float(value[0]), gradients)


def evaluate_batch(circuit: ProofCircuit, probs: np.ndarray):
    """Vectorized evaluation: ``probs`` is (batch, n_leaves) in leaf order.

    Returns (values (batch,), gradients (batch, n_leaves)).
    """
    tape = circuit.tape()
    probs = np.ascontiguousarray(probs, dtype=np.float64)
    return kernels.tape_forward_backward(tape.var, tape.lo, tape.hi, tape.root, probs)


def brute_force(circuit: ProofCircuit, leaf_probs, max_leaves: int = 20) -> float:
    """Possible-world enumeration oracle (testing only).

    Sums the probability of every complete assignment to the reachable
    leaves under which the root is true.
    """
    all_probs = _prob_vector(circuit, leaf_probs)
    leaves = circuit.leaves  # reachable only; others cannot affect the root
    if len(leaves) > max_leaves:
        raise EvaluationError(
            f"brute force limited to {max_leaves} leaves, circuit has {len(leaves)}"
        )
    total = 0.0
    for bits in product((False, True), repeat=len(leaves)):
        assignment = {leaf.index: bit for leaf, bit in zip(leaves, bits)}
        if circuit.evaluate_boolean(assignment):
            weight = 1.0
            for leaf, bit in zip(leaves, bits):
                p = all_probs[leaf.index]
                weight *= p if bit else 1.0 - p
            total += weight
    return total


def query_loss_gradient(
    circuit: ProofCircuit,
    leaf_probs,
    observed_label: int,
    loss: Union[LossSpec, str] = "bce",
) -> "dict[tuple, float]":
    """dL/dp per leaf for loss(P(query), observed_label): the distant
    supervision signal that flows into neural leaves."""
    if isinstance(loss, str):
        loss = LossSpec(kind=loss)
    result = evaluate(circuit, leaf_probs)
    dldp = float(loss_grad(np.float64(result.probability), np.float64(observed_label), loss))
    return {key: dldp * g for key, g in result.gradients.items()}


def leaf_probabilities(
    circuit: ProofCircuit,
    params: Optional[ParameterTable] = None,
    neural: Optional[NeuralBindings] = None,
    context: Any = None,
    clamp: float = NEURAL_CLAMP,
) -> "dict[tuple, float]":
    """Resolve every leaf's probability from its source.

    Constant coins keep their program probability, named parameters are
    looked up in ``params``, and neural leaves are evaluated through
    their binding and clamped to [clamp, 1 - clamp].
    """
    params = params if isinstance(params, ParameterTable) else ParameterTable(params)
    out: "dict[tuple, float]" = {}
    for leaf in circuit.tape().leaves:
        kind = leaf.source[0]
        if kind == "const":
            out[leaf.key] = float(leaf.source[1])
        elif kind == "param":
            out[leaf.key] = params.get(leaf.source[1], leaf.source[2])
        else:
            _, network, args = leaf.source
            if neural is None or network not in neural:
                raise EvaluationError(f"no binding for neural network {network!r}")
            p = float(neural[network].fn(args, context))
            out[leaf.key] = min(max(p, clamp), 1.0 - clamp)
    return out
