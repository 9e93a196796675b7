"""fairlog: train classifiers through probabilistic-logic bias models.

Assumed biasing mechanisms (label, measurement, historical) are written
as small probabilistic logic programs; queries compile to exact,
differentiable circuits, so a classifier can learn unbiased predictions
from biased observations by distant supervision.
"""

from .datagen import Dataset, GenConfig, generate, to_training_views
from .logic import (
    NeuralBinding,
    ParameterTable,
    ProofCircuit,
    Program,
    brute_force,
    evaluate,
    ground,
    parse,
)
from .losses import LossSpec
from .metrics import evaluate_scores
from .net import Classifier, TrainConfig, load_checkpoint, save_checkpoint
from .templates import (
    BiasSpec,
    FlipProbs,
    build_model,
    estimate_params,
    hoeffding_n,
    simplify,
)
from .training import historical_mode, train_plain, train_through_program

__version__ = "0.1.0"

__all__ = [
    "BiasSpec",
    "Classifier",
    "Dataset",
    "FlipProbs",
    "GenConfig",
    "LossSpec",
    "NeuralBinding",
    "ParameterTable",
    "Program",
    "ProofCircuit",
    "TrainConfig",
    "brute_force",
    "build_model",
    "estimate_params",
    "evaluate",
    "evaluate_scores",
    "generate",
    "ground",
    "historical_mode",
    "hoeffding_n",
    "load_checkpoint",
    "parse",
    "save_checkpoint",
    "simplify",
    "to_training_views",
    "train_plain",
    "train_through_program",
    "__version__",
]
