"""Minimal dense feed-forward classifier with manual backprop.

Everything downstream (explainers, gating, attacks) treats the model as a
differentiable black box: batched forward pass, cross-entropy loss, and
analytic gradients with respect to both parameters and inputs. 64-bit floats
throughout so finite-difference checks are meaningful.

Binary tasks default to a single logistic output unit; tasks with three or
more classes (or an explicit request) use a softmax head. Both heads train
with cross-entropy.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import (
    ConfigurationError,
    DivergenceError,
    InputError,
    MetricError,
    ModelFileError,
    ShapeError,
)
from .rng import RngStream

MODEL_FORMAT_VERSION = 1

# Floor for probabilities entering a log; keeps losses finite without
# disturbing gradients in any non-saturated regime.
_PROB_FLOOR = 1e-12


@dataclass
class FeatureMatrix:
    """Instances-by-features data with class labels and column names.

    Values are expected to be finite; pipelines normalize columns to [0,1]
    via :func:`xailab.synthdata.normalize_minmax` before modeling.
    """

    data: np.ndarray
    labels: np.ndarray
    feature_names: list[str]

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.data.ndim != 2:
            raise ShapeError(f"data must be 2-D, got shape {self.data.shape}")
        if self.labels.shape != (self.data.shape[0],):
            raise ShapeError(
                f"labels shape {self.labels.shape} does not match "
                f"{self.data.shape[0]} instances"
            )
        if len(self.feature_names) != self.data.shape[1]:
            raise ShapeError(
                f"{len(self.feature_names)} feature names for "
                f"{self.data.shape[1]} columns"
            )
        if not np.all(np.isfinite(self.data)):
            raise InputError("feature matrix contains non-finite values")
        if self.labels.size and self.labels.min() < 0:
            raise InputError("labels must be non-negative class indices")

    @property
    def n_instances(self) -> int:
        return self.data.shape[0]

    @property
    def n_features(self) -> int:
        return self.data.shape[1]

    def subset(self, indices) -> "FeatureMatrix":
        idx = np.asarray(indices)
        return FeatureMatrix(self.data[idx], self.labels[idx], list(self.feature_names))


@dataclass
class MlpModel:
    """Layered feed-forward classifier.

    `layer_dims` records the semantic architecture (input dim, hidden sizes,
    number of classes). For the logistic head the final weight matrix has a
    single row even though `layer_dims[-1] == 2`. The "linear" head emits raw
    outputs and exists for internal consumers (the gating discriminator); it
    cannot be trained or scored as a classifier.
    """

    layer_dims: list[int]
    weights: list[np.ndarray]
    biases: list[np.ndarray]
    head: str  # "logistic" | "softmax" | "linear"

    @property
    def n_features(self) -> int:
        return self.layer_dims[0]

    @property
    def n_classes(self) -> int:
        return max(self.layer_dims[-1], 2)

    def copy(self) -> "MlpModel":
        return MlpModel(
            list(self.layer_dims),
            [w.copy() for w in self.weights],
            [b.copy() for b in self.biases],
            self.head,
        )


@dataclass
class TrainConfig:
    epochs: int = 200
    batch_size: int = 32
    learning_rate: float = 0.001
    seed: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    patience: int | None = None  # early stop on stalled training loss

    def validate(self):
        if self.epochs < 1:
            raise ConfigurationError(f"epochs must be >= 1, got {self.epochs}")
        if self.batch_size < 1:
            raise ConfigurationError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.learning_rate <= 0:
            raise ConfigurationError(
                f"learning_rate must be > 0, got {self.learning_rate}"
            )


@dataclass
class TrainResult:
    model: MlpModel
    history: list[float]  # full-data loss after each epoch
    initial_loss: float


def mlp_init(layer_dims: list[int], seed: int, head: str = "auto") -> MlpModel:
    """Create a model with scaled-normal fan-in init (std = sqrt(2/fan_in)).

    Two calls with equal arguments produce byte-identical weights.
    """
    if len(layer_dims) < 2:
        raise ConfigurationError(
            f"layer_dims needs at least input and output entries, got {layer_dims}"
        )
    if any(int(d) < 1 for d in layer_dims):
        raise ConfigurationError(f"all layer dims must be >= 1, got {layer_dims}")
    layer_dims = [int(d) for d in layer_dims]

    n_out = layer_dims[-1]
    if head == "auto":
        head = "logistic" if n_out <= 2 else "softmax"
    if head not in ("logistic", "softmax", "linear"):
        raise ConfigurationError(f"unknown head {head!r}")
    if head == "logistic" and n_out > 2:
        raise ConfigurationError("logistic head supports at most 2 classes")

    internal_dims = list(layer_dims)
    if head == "logistic":
        internal_dims[-1] = 1

    gen = RngStream(seed).derive("init").generator
    weights, biases = [], []
    for fan_in, fan_out in zip(internal_dims[:-1], internal_dims[1:]):
        std = np.sqrt(2.0 / fan_in)
        weights.append(gen.normal(0.0, std, size=(fan_out, fan_in)))
        biases.append(np.zeros(fan_out))
    return MlpModel(layer_dims, weights, biases, head)


def _check_input(model: MlpModel, X: np.ndarray) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X[None, :]
    if X.ndim != 2 or X.shape[1] != model.n_features:
        raise ShapeError(
            f"expected inputs with {model.n_features} features, got shape {X.shape}"
        )
    if not np.all(np.isfinite(X)):
        raise InputError("input contains non-finite values")
    return X


def _forward_cache(model: MlpModel, X: np.ndarray):
    """Run the network, keeping pre-activations and activations for backprop.

    Returns (zs, activations, probs) where activations[0] is the input and
    probs are the raw (unclipped) class probabilities, shape (n, n_classes).
    """
    acts = [X]
    zs = []
    a = X
    n_layers = len(model.weights)
    for i, (W, b) in enumerate(zip(model.weights, model.biases)):
        z = a @ W.T + b
        zs.append(z)
        if i < n_layers - 1:
            a = np.maximum(z, 0.0)
            acts.append(a)
    z_out = zs[-1]
    if model.head == "logistic":
        p1 = 1.0 / (1.0 + np.exp(-z_out[:, 0]))
        probs = np.column_stack([1.0 - p1, p1])
    elif model.head == "softmax":
        shifted = z_out - z_out.max(axis=1, keepdims=True)
        e = np.exp(shifted)
        probs = e / e.sum(axis=1, keepdims=True)
    else:  # linear: raw outputs
        probs = z_out
    return zs, acts, probs


def forward_batch(model: MlpModel, X: np.ndarray) -> np.ndarray:
    """Class probabilities for a batch, shape (n, n_classes).

    Outputs are nudged away from exact 0/1 and renormalized, so every row
    lies in (0,1) and sums to 1. Linear-head models return raw outputs.
    """
    X = _check_input(model, X)
    _, _, probs = _forward_cache(model, X)
    if model.head == "linear":
        return probs
    probs = np.clip(probs, _PROB_FLOOR, 1.0 - _PROB_FLOOR)
    return probs / probs.sum(axis=1, keepdims=True)


def forward(model: MlpModel, x: np.ndarray) -> np.ndarray:
    """Class probabilities for a single feature vector."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise ShapeError(f"forward expects a 1-D vector, got shape {x.shape}")
    return forward_batch(model, x[None, :])[0]


def predict_classes(model: MlpModel, X: np.ndarray) -> np.ndarray:
    return np.argmax(forward_batch(model, X), axis=1)


def _check_labels(model: MlpModel, y: np.ndarray) -> np.ndarray:
    y = np.asarray(y, dtype=np.int64)
    if y.ndim != 1:
        raise ShapeError(f"labels must be 1-D, got shape {y.shape}")
    if y.size and (y.min() < 0 or y.max() >= model.n_classes):
        raise InputError(
            f"labels must lie in [0, {model.n_classes - 1}], got range "
            f"[{y.min()}, {y.max()}]"
        )
    return y


def _check_classifier(model: MlpModel):
    if model.head == "linear":
        raise ConfigurationError("operation requires a classifier head")


def loss_value(model: MlpModel, X: np.ndarray, y: np.ndarray) -> float:
    """Mean cross-entropy of the batch."""
    _check_classifier(model)
    X = _check_input(model, X)
    y = _check_labels(model, y)
    _, _, probs = _forward_cache(model, X)
    p_true = np.clip(probs[np.arange(len(y)), y], _PROB_FLOOR, 1.0)
    return float(-np.mean(np.log(p_true)))


def _output_delta(model: MlpModel, probs: np.ndarray, y: np.ndarray) -> np.ndarray:
    """d(mean CE)/d(z_out), the usual (p - onehot)/n form for both heads."""
    n = len(y)
    if model.head == "logistic":
        return ((probs[:, 1] - y) / n)[:, None]
    delta = probs.copy()
    delta[np.arange(n), y] -= 1.0
    return delta / n


def _backward(model: MlpModel, zs, acts, dZ_out):
    """Backprop an output pre-activation gradient through the network.

    Returns (dWs, dbs, dX) where dX has one row per instance.
    """
    dWs = [None] * len(model.weights)
    dbs = [None] * len(model.biases)
    delta = dZ_out
    for i in range(len(model.weights) - 1, -1, -1):
        dWs[i] = delta.T @ acts[i]
        dbs[i] = delta.sum(axis=0)
        if i > 0:
            delta = (delta @ model.weights[i]) * (zs[i - 1] > 0)
    dX = delta @ model.weights[0]
    return dWs, dbs, dX


def loss_gradients(model: MlpModel, X: np.ndarray, y: np.ndarray):
    """Mean-CE loss plus gradients wrt weights, biases, and inputs."""
    _check_classifier(model)
    X = _check_input(model, X)
    y = _check_labels(model, y)
    zs, acts, probs = _forward_cache(model, X)
    p_true = np.clip(probs[np.arange(len(y)), y], _PROB_FLOOR, 1.0)
    loss = float(-np.mean(np.log(p_true)))
    dWs, dbs, dX = _backward(model, zs, acts, _output_delta(model, probs, y))
    return loss, dWs, dbs, dX


def input_gradient(model: MlpModel, x: np.ndarray, target: int) -> np.ndarray:
    """Gradient of the cross-entropy loss toward `target` wrt the input."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise ShapeError(f"input_gradient expects a 1-D vector, got {x.shape}")
    _, _, _, dX = loss_gradients(model, x[None, :], np.array([target]))
    return dX[0]


def batch_input_gradient(model: MlpModel, X: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Per-instance d(CE_i)/dx_i, shape (n, d). Each row is an independent loss."""
    X = _check_input(model, X)
    y = _check_labels(model, y)
    zs, acts, probs = _forward_cache(model, X)
    # per-instance losses: drop the 1/n of the batch-mean convention
    _, _, dX = _backward(model, zs, acts, _output_delta(model, probs, y) * len(y))
    return dX


def probability_gradient(model: MlpModel, x: np.ndarray, class_index: int) -> np.ndarray:
    """d P(class_index | x) / dx for a single instance."""
    x = np.asarray(x, dtype=np.float64)
    if not 0 <= class_index < model.n_classes:
        raise ShapeError(f"class index {class_index} out of range")
    X = _check_input(model, x[None, :] if x.ndim == 1 else x)
    zs, acts, probs = _forward_cache(model, X)
    p = probs[0]
    if model.head == "logistic":
        dz = np.array([[p[1] * (1.0 - p[1])]])
        if class_index == 0:
            dz = -dz
    else:
        # dP_k/dz_j = P_k (1[k=j] - P_j)
        dz = (p[class_index] * (np.eye(model.n_classes)[class_index] - p))[None, :]
    _, _, dX = _backward(model, zs, acts, dz)
    return dX[0]


# ---------------------------------------------------------------------------
# training


class AdamState:
    """Per-parameter first/second moment accumulators."""

    def __init__(self, model: MlpModel):
        self.m_w = [np.zeros_like(w) for w in model.weights]
        self.v_w = [np.zeros_like(w) for w in model.weights]
        self.m_b = [np.zeros_like(b) for b in model.biases]
        self.v_b = [np.zeros_like(b) for b in model.biases]
        self.t = 0


def _adam_update(model: MlpModel, state: AdamState, dWs, dbs, cfg: TrainConfig):
    state.t += 1
    lr_t = cfg.learning_rate * (
        np.sqrt(1.0 - cfg.beta2**state.t) / (1.0 - cfg.beta1**state.t)
    )
    for i in range(len(model.weights)):
        state.m_w[i] = cfg.beta1 * state.m_w[i] + (1 - cfg.beta1) * dWs[i]
        state.v_w[i] = cfg.beta2 * state.v_w[i] + (1 - cfg.beta2) * dWs[i] ** 2
        model.weights[i] -= lr_t * state.m_w[i] / (np.sqrt(state.v_w[i]) + cfg.epsilon)
        state.m_b[i] = cfg.beta1 * state.m_b[i] + (1 - cfg.beta1) * dbs[i]
        state.v_b[i] = cfg.beta2 * state.v_b[i] + (1 - cfg.beta2) * dbs[i] ** 2
        model.biases[i] -= lr_t * state.m_b[i] / (np.sqrt(state.v_b[i]) + cfg.epsilon)


def train_one_epoch(
    model: MlpModel,
    X: np.ndarray,
    y: np.ndarray,
    cfg: TrainConfig,
    state: AdamState,
    gen: np.random.Generator,
):
    """One pass of shuffled mini-batch Adam; mutates model and state in place.

    Exposed so adversarial training can regenerate its data between epochs
    while sharing the exact update path (and rng consumption) of `train`.
    """
    order = gen.permutation(len(y))
    for start in range(0, len(y), cfg.batch_size):
        idx = order[start : start + cfg.batch_size]
        _, dWs, dbs, _ = loss_gradients(model, X[idx], y[idx])
        _adam_update(model, state, dWs, dbs, cfg)


def train(model: MlpModel, data: FeatureMatrix, cfg: TrainConfig) -> TrainResult:
    """Train a copy of the model with mini-batch Adam and cross-entropy.

    The run is fully determined by (model, data, cfg.seed). History holds the
    full-data loss after each completed epoch.
    """
    cfg.validate()
    if data.n_instances == 0:
        raise InputError("training data is empty")
    y = _check_labels(model, data.labels)
    X = _check_input(model, data.data)

    model = model.copy()
    state = AdamState(model)
    gen = RngStream(cfg.seed).derive("train").generator
    initial_loss = loss_value(model, X, y)
    history: list[float] = []
    best = np.inf
    stalled = 0
    for epoch in range(cfg.epochs):
        train_one_epoch(model, X, y, cfg, state, gen)
        epoch_loss = loss_value(model, X, y)
        if not np.isfinite(epoch_loss):
            raise DivergenceError(f"loss became non-finite at epoch {epoch}", epoch)
        history.append(epoch_loss)
        if cfg.patience:
            if epoch_loss < best - 1e-12:
                best = epoch_loss
                stalled = 0
            else:
                stalled += 1
                if stalled >= cfg.patience:
                    break
    return TrainResult(model, history, initial_loss)


def balanced_accuracy(model: MlpModel, data: FeatureMatrix) -> float:
    """Mean of per-class recalls over all of the model's classes."""
    _check_classifier(model)
    y = _check_labels(model, data.labels)
    preds = predict_classes(model, data.data)
    recalls = []
    for c in range(model.n_classes):
        mask = y == c
        if not mask.any():
            raise MetricError(f"class {c} has zero instances")
        recalls.append(float(np.mean(preds[mask] == c)))
    return float(np.mean(recalls))


# ---------------------------------------------------------------------------
# persistence


def save_model(model: MlpModel, path: str | Path):
    doc = {
        "format_version": MODEL_FORMAT_VERSION,
        "layer_dims": model.layer_dims,
        "head": model.head,
        "hidden_activation": "relu",
        "weights": [w.tolist() for w in model.weights],
        "biases": [b.tolist() for b in model.biases],
    }
    Path(path).write_text(json.dumps(doc, indent=1))


def load_model(path: str | Path) -> MlpModel:
    """Load a model file; round-trips predictions bit-exactly."""
    try:
        doc = json.loads(Path(path).read_text())
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise ModelFileError(f"cannot parse model file {path}: {exc}") from exc
    if not isinstance(doc, dict) or "format_version" not in doc:
        raise ModelFileError(f"model file {path} has no format_version header")
    version = doc["format_version"]
    if version != MODEL_FORMAT_VERSION:
        raise ModelFileError(
            f"model file {path} has format version {version}, "
            f"this build reads version {MODEL_FORMAT_VERSION}"
        )
    try:
        layer_dims = [int(d) for d in doc["layer_dims"]]
        head = doc["head"]
        weights = [np.asarray(w, dtype=np.float64) for w in doc["weights"]]
        biases = [np.asarray(b, dtype=np.float64) for b in doc["biases"]]
    except (KeyError, TypeError, ValueError) as exc:
        raise ModelFileError(f"model file {path} is incomplete: {exc}") from exc

    internal_dims = list(layer_dims)
    if head == "logistic":
        internal_dims[-1] = 1
    expected = list(zip(internal_dims[1:], internal_dims[:-1]))
    got = [w.shape for w in weights]
    if got != expected or [b.shape[0] for b in biases] != [s[0] for s in expected]:
        raise ModelFileError(
            f"model file {path} has inconsistent dimensions: "
            f"weights {got}, layer_dims {layer_dims}"
        )
    return MlpModel(layer_dims, weights, biases, head)


def save_dataset(data: FeatureMatrix, path: str | Path):
    """CSV with header = feature names + 'label'; floats written via repr."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(list(data.feature_names) + ["label"])
        for row, label in zip(data.data, data.labels):
            writer.writerow([repr(float(v)) for v in row] + [int(label)])


def load_dataset(path: str | Path) -> FeatureMatrix:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if not header or header[-1] != "label":
            raise InputError(f"dataset {path} must end with a 'label' column")
        names = header[:-1]
        rows, labels = [], []
        for rec in reader:
            rows.append([float(v) for v in rec[:-1]])
            labels.append(int(rec[-1]))
    return FeatureMatrix(np.array(rows, dtype=np.float64), np.array(labels), names)
