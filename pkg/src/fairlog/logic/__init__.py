"""Probabilistic logic core: parsing, grounding, exact circuit inference."""

from .circuit import DecisionTape, Leaf, ProofCircuit
from .evaluate import (
    EvaluationError,
    InferenceResult,
    brute_force,
    evaluate,
    evaluate_batch,
    leaf_probabilities,
    query_loss_gradient,
)
from .ground import (
    CyclicProgramError,
    GroundingError,
    NeuralBinding,
    NeuralBindings,
    NonGroundError,
    ParameterTable,
    UnknownNetworkError,
    UnknownParameterError,
    ground,
)
from .parser import ParseError, parse
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
    programs_equivalent,
)

__all__ = [
    "Clause",
    "Const",
    "CyclicProgramError",
    "DecisionTape",
    "EvaluationError",
    "GroundingError",
    "InferenceResult",
    "Leaf",
    "Literal",
    "NeuralBinding",
    "NeuralBindings",
    "NeuralLabel",
    "NonGroundError",
    "ParameterTable",
    "ParseError",
    "ProbLabel",
    "Program",
    "ProofCircuit",
    "Struct",
    "Term",
    "UnknownNetworkError",
    "UnknownParameterError",
    "Var",
    "brute_force",
    "evaluate",
    "evaluate_batch",
    "ground",
    "leaf_probabilities",
    "parse",
    "programs_equivalent",
    "query_loss_gradient",
]
