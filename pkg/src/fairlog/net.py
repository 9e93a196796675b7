"""Feedforward classifier, AdamW optimizer, and checkpointing.

The classifier is a plain numpy MLP (ReLU hidden layers, logistic
output, optional inverted dropout) with an explicit activation tape so
gradients arriving at the output probability -- from a loss or from a
proof circuit -- can be pushed back to the weights.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from typing import Optional, Sequence

import numpy as np

from .losses import LossSpec


class StaleTapeError(RuntimeError):
    """backward() received a tape recorded before the last weight update."""


class TrainingDivergedError(RuntimeError):
    pass


@dataclass
class TrainConfig:
    """Hyperparameters for one training run."""

    lr: float = 3e-4
    batch_size: int = 64
    epochs: int = 100
    loss: LossSpec = field(default_factory=LossSpec)
    weight_decay: float = 0.01
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    val_fraction: float = 0.1
    seed: int = 0

    def __post_init__(self):
        if self.lr <= 0:
            raise ValueError("learning rate must be positive")
        if not 0.0 < self.val_fraction < 1.0:
            raise ValueError("validation fraction must be in (0, 1)")
        if isinstance(self.loss, str):
            self.loss = LossSpec(kind=self.loss)
        elif isinstance(self.loss, dict):
            self.loss = LossSpec(**self.loss)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "TrainConfig":
        return cls(**data)


def _sigmoid(z: np.ndarray) -> np.ndarray:
    return 1.0 / (1.0 + np.exp(-np.clip(z, -500.0, 500.0)))


class Classifier:
    """MLP with ReLU hidden layers and a single logistic output.

    Weights are initialized uniformly at +-1/sqrt(fan_in), seeded for
    reproducibility. Dropout is applied after each hidden activation in
    training mode only.
    """

    def __init__(
        self,
        input_dim: int,
        hidden: Sequence[int] = (32, 32, 32),
        dropout: float = 0.0,
        seed: int = 0,
    ):
        if input_dim < 1:
            raise ValueError("input_dim must be >= 1")
        if not 0.0 <= dropout < 1.0:
            raise ValueError("dropout must be in [0, 1)")
        self.input_dim = input_dim
        self.hidden = tuple(int(h) for h in hidden)
        self.dropout = float(dropout)
        self.seed = int(seed)
        rng = np.random.default_rng([seed, 0])
        dims = [input_dim, *self.hidden, 1]
        self.weights: "list[np.ndarray]" = []
        self.biases: "list[np.ndarray]" = []
        for fan_in, fan_out in zip(dims[:-1], dims[1:]):
            bound = 1.0 / np.sqrt(fan_in)
            self.weights.append(rng.uniform(-bound, bound, size=(fan_in, fan_out)))
            self.biases.append(rng.uniform(-bound, bound, size=fan_out))
        self._version = 0

    # -- parameters ------------------------------------------------------------

    def parameters(self) -> "list[np.ndarray]":
        params = []
        for w, b in zip(self.weights, self.biases):
            params.append(w)
            params.append(b)
        return params

    def copy_weights(self) -> "list[np.ndarray]":
        return [p.copy() for p in self.parameters()]

    def set_weights(self, values: "list[np.ndarray]") -> None:
        for target, value in zip(self.parameters(), values):
            target[...] = value
        self._version += 1

    def bump_version(self) -> None:
        self._version += 1

    # -- forward / backward -----------------------------------------------------

    def forward(
        self,
        x: np.ndarray,
        training: bool = False,
        rng: Optional[np.random.Generator] = None,
    ):
        """Returns (probabilities (batch,), tape for backward)."""
        x = np.atleast_2d(np.asarray(x, dtype=np.float64))
        if x.shape[1] != self.input_dim:
            raise ValueError(f"expected {self.input_dim} features, got {x.shape[1]}")
        activation = x
        layers = []
        n_hidden = len(self.hidden)
        for layer in range(n_hidden):
            z = activation @ self.weights[layer] + self.biases[layer]
            relu_mask = z > 0
            out = np.where(relu_mask, z, 0.0)
            drop_mask = None
            if training and self.dropout > 0.0:
                if rng is None:
                    raise ValueError("training forward with dropout needs an rng")
                keep = 1.0 - self.dropout
                drop_mask = (rng.random(out.shape) < keep) / keep
                out = out * drop_mask
            layers.append((activation, relu_mask, drop_mask))
            activation = out
        z_out = activation @ self.weights[-1] + self.biases[-1]
        probs = _sigmoid(z_out[:, 0])
        tape = {
            "layers": layers,
            "last_input": activation,
            "probs": probs,
            "version": self._version,
        }
        return probs, tape

    def backward(self, tape: dict, dloss_dprob: np.ndarray):
        """Gradients of sum_i dloss_dprob[i] * p_i w.r.t. all parameters.

        The dropout masks recorded by the forward pass are reused; the
        tape must come from the current weights.
        """
        if tape["version"] != self._version:
            raise StaleTapeError("tape was recorded before the last weight update")
        probs = tape["probs"]
        dz = (np.asarray(dloss_dprob, dtype=np.float64) * probs * (1.0 - probs))[:, None]
        grads_w = [None] * len(self.weights)
        grads_b = [None] * len(self.biases)
        grads_w[-1] = tape["last_input"].T @ dz
        grads_b[-1] = dz.sum(axis=0)
        upstream = dz @ self.weights[-1].T
        for layer in range(len(self.hidden) - 1, -1, -1):
            activation, relu_mask, drop_mask = tape["layers"][layer]
            if drop_mask is not None:
                upstream = upstream * drop_mask
            upstream = np.where(relu_mask, upstream, 0.0)
            grads_w[layer] = activation.T @ upstream
            grads_b[layer] = upstream.sum(axis=0)
            if layer > 0:
                upstream = upstream @ self.weights[layer].T
        grads = []
        for gw, gb in zip(grads_w, grads_b):
            grads.append(gw)
            grads.append(gb)
        return grads

    def predict_proba(self, x: np.ndarray) -> np.ndarray:
        probs, _ = self.forward(x, training=False)
        return probs


class AdamW:
    """Adaptive-moment optimizer with decoupled weight decay."""

    def __init__(self, params: "list[np.ndarray]", config: TrainConfig):
        self.params = params
        self.lr = config.lr
        self.beta1 = config.beta1
        self.beta2 = config.beta2
        self.eps = config.eps
        self.weight_decay = config.weight_decay
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]
        self.t = 0

    def step(self, grads: "list[np.ndarray]") -> None:
        self.t += 1
        bias1 = 1.0 - self.beta1**self.t
        bias2 = 1.0 - self.beta2**self.t
        for p, g, m, v in zip(self.params, grads, self.m, self.v):
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * np.square(g)
            m_hat = m / bias1
            v_hat = v / bias2
            p -= self.lr * self.weight_decay * p
            p -= self.lr * m_hat / (np.sqrt(v_hat) + self.eps)


# -- checkpointing ---------------------------------------------------------------

CHECKPOINT_VERSION = 1


def save_checkpoint(path, classifier: Classifier, config: Optional[TrainConfig] = None) -> None:
    """Write a versioned .npz checkpoint that round-trips exactly."""
    meta = {
        "version": CHECKPOINT_VERSION,
        "input_dim": classifier.input_dim,
        "hidden": list(classifier.hidden),
        "dropout": classifier.dropout,
        "seed": classifier.seed,
        "train_config": config.to_dict() if config is not None else None,
    }
    arrays = {}
    for i, (w, b) in enumerate(zip(classifier.weights, classifier.biases)):
        arrays[f"w{i}"] = w
        arrays[f"b{i}"] = b
    np.savez(path, meta=json.dumps(meta), **arrays)


def load_checkpoint(path):
    """Returns (classifier, train_config or None)."""
    with np.load(path, allow_pickle=False) as data:
        meta = json.loads(str(data["meta"]))
        if meta["version"] != CHECKPOINT_VERSION:
            raise ValueError(f"unsupported checkpoint version {meta['version']}")
        classifier = Classifier(
            meta["input_dim"], meta["hidden"], meta["dropout"], meta["seed"]
        )
        for i in range(len(classifier.weights)):
            classifier.weights[i][...] = data[f"w{i}"]
            classifier.biases[i][...] = data[f"b{i}"]
    config = meta.get("train_config")
    return classifier, (TrainConfig.from_dict(config) if config else None)
