"""Training loops: plain supervision and distant supervision through circuits.

Both paths share one fit() loop (validation split, epoch shuffling,
AdamW steps, best-model selection by validation loss) and differ only in
how a batch's predicted probabilities and their pullback to network
gradients are computed. With all bias parameters at zero the circuit
path reduces exactly to the plain path, batch for batch.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import kernels
from .logic import Const, NeuralBinding, ProofCircuit, Struct, ground
from .losses import loss_grad, loss_value
from .net import AdamW, Classifier, TrainConfig, TrainingDivergedError
from .templates import BiasModel

H_CLAMP = 1e-6


@dataclass
class TrainResult:
    classifier: Classifier
    history: "list[dict]"  # per epoch: train_loss, val_loss
    best_epoch: int
    val_indices: np.ndarray
    train_indices: np.ndarray


class PlainObjective:
    """Directly supervised probabilities: loss(h(x), y).

    Outputs are clamped to the same window as circuit leaves so that a
    zero-parameter bias program reproduces plain training exactly.
    """

    def __init__(self, X: np.ndarray, y: np.ndarray):
        self.X = np.asarray(X, dtype=np.float64)
        self.y = np.asarray(y, dtype=np.float64)

    @property
    def n_examples(self) -> int:
        return len(self.y)

    def batch_loss_and_grads(self, clf, idx, loss_spec, rng):
        raw, tape = clf.forward(self.X[idx], training=True, rng=rng)
        probs = np.clip(raw, H_CLAMP, 1.0 - H_CLAMP)
        losses = loss_value(probs, self.y[idx], loss_spec)
        dldp = loss_grad(probs, self.y[idx], loss_spec) / len(idx)
        grads = clf.backward(tape, dldp)
        return float(losses.mean()), grads

    def mean_loss(self, clf, idx, loss_spec):
        probs, _ = clf.forward(self.X[idx], training=False)
        probs = np.clip(probs, H_CLAMP, 1.0 - H_CLAMP)
        return float(loss_value(probs, self.y[idx], loss_spec).mean())

    def predict_proba(self, clf, idx):
        probs, _ = clf.forward(self.X[idx], training=False)
        return probs


class _Cell:
    """Compiled circuit for one combination of sensitive-attribute values.

    Splits the tape's leaves into classifier leaves (with their feature
    flip masks), feature-selector leaves, and fixed coins whose values
    come from the parameter table or the program text.
    """

    def __init__(self, circuit: ProofCircuit, model: BiasModel, input_dim: int):
        self.circuit = circuit
        tape = circuit.tape()
        self.tape = tape
        self.n_leaves = len(tape.leaves)
        h_cols, h_masks = [], []
        n_cols, n_feats, n_bits = [], [], []
        fixed = np.zeros(self.n_leaves)
        for col, leaf in enumerate(tape.leaves):
            kind = leaf.source[0]
            if kind == "nn" and leaf.source[1] == "h":
                h_cols.append(col)
                h_masks.append(_flip_mask(leaf.source[2][0], input_dim))
            elif kind == "nn" and leaf.source[1] == "n":
                vec, index = leaf.source[2]
                feature = index.value - 1
                n_cols.append(col)
                n_feats.append(feature)
                n_bits.append(_flip_mask(vec, input_dim)[feature])
            elif kind == "param":
                fixed[col] = model.params.get(leaf.source[1], leaf.source[2])
            elif kind == "const":
                fixed[col] = leaf.source[1]
            else:
                raise ValueError(f"unsupported neural leaf {leaf.source!r} in training")
        self.h_cols = np.asarray(h_cols, dtype=np.intp)
        self.h_masks = np.asarray(h_masks, dtype=np.float64).reshape(len(h_cols), input_dim)
        self.n_cols = np.asarray(n_cols, dtype=np.intp)
        self.n_feats = np.asarray(n_feats, dtype=np.intp)
        self.n_bits = np.asarray(n_bits, dtype=np.float64)
        self.fixed = fixed

    @property
    def n_h(self) -> int:
        return len(self.h_cols)


def _flip_mask(term, input_dim: int) -> np.ndarray:
    """Feature-flip mask encoded by a vector term.

    ``x`` (or any constant) is the unmodified input; ``x_(b1,...,bn)``
    flips feature i where b_i = 1. Masks are zero-padded to the full
    input width so extra (unflippable) input columns pass through.
    """
    mask = np.zeros(input_dim)
    if isinstance(term, Struct) and term.functor == "x_":
        bits = [float(arg.value) for arg in term.args]
        mask[: len(bits)] = bits
    elif not isinstance(term, (Const, Struct)):
        raise ValueError(f"cannot interpret feature-vector term {term!r}")
    return mask


class CircuitEngine:
    """Grounds and evaluates a bias model for batches of examples.

    Circuit structure depends only on the sensitive-attribute values
    (ground-time selectors), so one cell is compiled per combination and
    shared by all matching rows. An engine belongs to one training run;
    parallel runs each build their own (cells are cheap to ground).
    """

    def __init__(self, model: BiasModel, input_dim: int):
        self.model = model
        self.input_dim = input_dim
        self._cells: "dict[tuple, _Cell]" = {}

    def cell(self, svals: "tuple[int, ...]") -> _Cell:
        cached = self._cells.get(svals)
        if cached is None:
            bindings = {
                name: NeuralBinding(_const_fn(float(svals[i])), ground_time=True)
                for i, name in enumerate(self.model.sensitive_nets)
            }
            bindings["h"] = NeuralBinding(_unused_fn)
            bindings["n"] = NeuralBinding(_unused_fn)
            circuit = ground(
                self.model.program, self.model.query, self.model.params, bindings
            )
            cached = _Cell(circuit, self.model, self.input_dim)
            self._cells[svals] = cached
        return cached

    def _group_rows(self, sens: np.ndarray):
        sens = np.asarray(sens, dtype=np.int64)
        if sens.ndim == 1:
            sens = sens[:, None]
        groups: "dict[tuple, list[int]]" = {}
        for row, values in enumerate(sens):
            groups.setdefault(tuple(int(v) for v in values), []).append(row)
        return {key: np.asarray(rows, dtype=np.intp) for key, rows in sorted(groups.items())}

    def forward(self, clf: Classifier, X: np.ndarray, sens: np.ndarray, training: bool, rng=None):
        """Query probability per row plus a pullback closure.

        Classifier inputs for all rows are assembled in row order into a
        single forward pass; pullback(dL/dP) runs one backward pass and
        returns parameter gradients.
        """
        X = np.asarray(X, dtype=np.float64)
        batch = len(X)
        groups = self._group_rows(sens)
        cells = {key: self.cell(key) for key in groups}
        offsets = np.zeros(batch + 1, dtype=np.intp)
        row_cell: "list[Optional[_Cell]]" = [None] * batch
        for key, rows in groups.items():
            cell = cells[key]
            for row in rows:
                row_cell[row] = cell
        for row in range(batch):
            offsets[row + 1] = offsets[row] + row_cell[row].n_h
        flat_inputs = np.empty((offsets[-1], self.input_dim))
        for row in range(batch):
            cell = row_cell[row]
            lo = offsets[row]
            base = X[row]
            # x XOR mask for 0/1 features; mask rows are dense per leaf
            flat_inputs[lo : lo + cell.n_h] = base + cell.h_masks - 2.0 * base * cell.h_masks

        # candidate vectors repeat heavily when circuits fan out (binary
        # features); deduplicating the forward pass is exact as long as
        # per-example dropout masks are not in play
        dedupe = offsets[-1] > batch and not (training and clf.dropout > 0.0)
        if dedupe:
            unique_inputs, inverse = np.unique(flat_inputs, axis=0, return_inverse=True)
            h_unique, tape = clf.forward(unique_inputs, training=training, rng=rng)
            h_flat = np.clip(h_unique, H_CLAMP, 1.0 - H_CLAMP)[inverse]
        else:
            inverse = None
            h_raw, tape = clf.forward(flat_inputs, training=training, rng=rng)
            h_flat = np.clip(h_raw, H_CLAMP, 1.0 - H_CLAMP)

        values = np.empty(batch)
        grads_h: "dict[tuple, np.ndarray]" = {}
        for key, rows in groups.items():
            cell = cells[key]
            probs = np.tile(cell.fixed, (len(rows), 1))
            if len(cell.n_cols):
                feats = X[rows][:, cell.n_feats]
                probs[:, cell.n_cols] = np.abs(feats - cell.n_bits)
            if cell.n_h:
                slots = offsets[rows][:, None] + np.arange(cell.n_h)
                probs[:, cell.h_cols] = h_flat[slots]
            probs = np.ascontiguousarray(probs)
            t = cell.tape
            value, grad = kernels.tape_forward_backward(t.var, t.lo, t.hi, t.root, probs)
            values[rows] = value
            grads_h[key] = grad[:, cell.h_cols]

        def pullback(dldp_rows: np.ndarray):
            flat_grad = np.zeros(offsets[-1])
            for key, rows in groups.items():
                cell = cells[key]
                if not cell.n_h:
                    continue
                slots = offsets[rows][:, None] + np.arange(cell.n_h)
                flat_grad[slots.ravel()] = (
                    dldp_rows[rows][:, None] * grads_h[key]
                ).ravel()
            if inverse is not None:
                unique_grad = np.zeros(tape["probs"].shape[0])
                np.add.at(unique_grad, inverse, flat_grad)
                return clf.backward(tape, unique_grad)
            return clf.backward(tape, flat_grad)

        return values, pullback


def _const_fn(value: float):
    return lambda args, ctx: value


def _unused_fn(args, ctx):
    raise RuntimeError("eval-time binding should not be called during grounding")


class CircuitObjective:
    """Distant supervision: loss(P_program(query | x), observed label)."""

    def __init__(self, model: BiasModel, X: np.ndarray, y: np.ndarray, sens: np.ndarray):
        self.X = np.asarray(X, dtype=np.float64)
        self.y = np.asarray(y, dtype=np.float64)
        self.sens = np.asarray(sens)
        if self.sens.ndim == 1:
            self.sens = self.sens[:, None]
        self.engine = CircuitEngine(model, input_dim=self.X.shape[1])

    @property
    def n_examples(self) -> int:
        return len(self.y)

    def batch_loss_and_grads(self, clf, idx, loss_spec, rng):
        probs, pullback = self.engine.forward(
            clf, self.X[idx], self.sens[idx], training=True, rng=rng
        )
        losses = loss_value(probs, self.y[idx], loss_spec)
        dldp = loss_grad(probs, self.y[idx], loss_spec) / len(idx)
        grads = pullback(dldp)
        return float(losses.mean()), grads

    def mean_loss(self, clf, idx, loss_spec):
        probs, _ = self.engine.forward(clf, self.X[idx], self.sens[idx], training=False)
        return float(loss_value(probs, self.y[idx], loss_spec).mean())

    def predict_proba(self, clf, idx):
        probs, _ = self.engine.forward(clf, self.X[idx], self.sens[idx], training=False)
        return probs


def fit(classifier: Classifier, objective, config: TrainConfig) -> TrainResult:
    """Minibatch AdamW training with validation-based model selection.

    A fraction of the data is held out; after every epoch the validation
    loss is computed and the weights achieving the minimum are restored
    at the end. History records per-epoch train/validation loss.
    """
    n = objective.n_examples
    if n == 0:
        raise ValueError("dataset is empty")
    rng = np.random.default_rng([config.seed, 1])
    order = rng.permutation(n)
    n_val = max(1, int(round(n * config.val_fraction)))
    if n_val >= n:
        raise ValueError("validation split leaves no training data")
    val_idx = order[:n_val]
    train_idx = order[n_val:]

    optimizer = AdamW(classifier.parameters(), config)
    best_val = np.inf
    best_weights = classifier.copy_weights()
    best_epoch = -1
    history = []
    for epoch in range(config.epochs):
        perm = rng.permutation(len(train_idx))
        epoch_losses = []
        for start in range(0, len(perm), config.batch_size):
            batch = train_idx[perm[start : start + config.batch_size]]
            loss, grads = objective.batch_loss_and_grads(
                classifier, batch, config.loss, rng
            )
            if not np.isfinite(loss):
                raise TrainingDivergedError(
                    f"non-finite training loss {loss} at epoch {epoch}"
                )
            optimizer.step(grads)
            classifier.bump_version()
            epoch_losses.append(loss)
        train_loss = float(np.mean(epoch_losses))
        val_loss = objective.mean_loss(classifier, val_idx, config.loss)
        if not np.isfinite(val_loss):
            raise TrainingDivergedError(f"non-finite validation loss at epoch {epoch}")
        history.append({"epoch": epoch, "train_loss": train_loss, "val_loss": val_loss})
        if val_loss < best_val:
            best_val = val_loss
            best_weights = classifier.copy_weights()
            best_epoch = epoch
    classifier.set_weights(best_weights)
    return TrainResult(classifier, history, best_epoch, val_idx, train_idx)


def train_plain(
    X: np.ndarray,
    y: np.ndarray,
    config: TrainConfig,
    hidden=(32, 32, 32),
    dropout: float = 0.0,
) -> TrainResult:
    clf = Classifier(X.shape[1], hidden=hidden, dropout=dropout, seed=config.seed)
    return fit(clf, PlainObjective(X, y), config)


def train_through_program(
    model: BiasModel,
    X: np.ndarray,
    y_observed: np.ndarray,
    sens: np.ndarray,
    config: TrainConfig,
    hidden=(32, 32, 32),
    dropout: float = 0.0,
) -> TrainResult:
    clf = Classifier(X.shape[1], hidden=hidden, dropout=dropout, seed=config.seed)
    return fit(clf, CircuitObjective(model, X, y_observed, sens), config)


class HistoricalPredictor:
    """Test-time debiasing: mixture of classifier scores over candidate
    fair feature vectors, per the measurement mechanism.

    The classifier itself was trained directly on biased features and
    labels; no logic is used during its training.
    """

    def __init__(self, classifier: Classifier, model: BiasModel):
        if model.kind not in ("measurement", "historical"):
            raise ValueError("historical mode wraps a measurement-style model")
        self.classifier = classifier
        self.model = model
        self.engine = CircuitEngine(model, input_dim=classifier.input_dim)

    def predict_proba(self, X_biased: np.ndarray, sens: np.ndarray) -> np.ndarray:
        sens = np.asarray(sens)
        if sens.ndim == 1:
            sens = sens[:, None]
        values, _ = self.engine.forward(
            self.classifier, X_biased, sens, training=False
        )
        return values


def historical_mode(classifier: Classifier, model: BiasModel) -> HistoricalPredictor:
    return HistoricalPredictor(classifier, model)
