"""Dense feed-forward binary classifier, written against plain numpy.

Architecture for the click-statistics task: 17 input frequencies, three
rectified-linear hidden layers of 50 units, one sigmoid output. Training
is mini-batch Adam on the mean-square error with early stopping on the
validation loss. A linear least-squares baseline lives here too.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

DEFAULT_LAYER_DIMS = (17, 50, 50, 50, 1)

MODEL_FORMAT = "clickstats-model v1"

# predict() must stay strictly inside (0, 1) even where the sigmoid
# saturates to an exact float 0.0 or 1.0.
_OUTPUT_CLIP = 1e-15


class TrainingError(RuntimeError):
    """Raised when training encounters a non-finite loss."""

    def __init__(self, message, epoch):
        super().__init__(message)
        self.epoch = epoch


class ModelFormatError(ValueError):
    """Raised when a model file fails schema or finiteness validation."""


@dataclass
class NetworkModel:
    """Feed-forward network parameters plus bookkeeping metadata.

    weights[i] has shape (layer_dims[i], layer_dims[i+1]) and biases[i]
    has shape (layer_dims[i+1],). Hidden layers use the rectifier, the
    scalar output goes through a sigmoid.
    """

    layer_dims: tuple
    weights: list
    biases: list
    hidden_activation: str = "relu"
    output_activation: str = "sigmoid"
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        dims = tuple(int(d) for d in self.layer_dims)
        if len(dims) < 2 or any(d < 1 for d in dims):
            raise ValueError(f"layer_dims must be >= 2 positive entries, got {dims}")
        if self.hidden_activation != "relu":
            raise ValueError(f"unsupported hidden activation {self.hidden_activation!r}")
        if self.output_activation != "sigmoid":
            raise ValueError(f"unsupported output activation {self.output_activation!r}")
        if len(self.weights) != len(dims) - 1 or len(self.biases) != len(dims) - 1:
            raise ValueError("need one weight matrix and bias vector per layer pair")
        weights, biases = [], []
        for i, (din, dout) in enumerate(zip(dims[:-1], dims[1:])):
            w = np.asarray(self.weights[i], dtype=float)
            b = np.asarray(self.biases[i], dtype=float)
            if w.shape != (din, dout):
                raise ValueError(
                    f"weight {i} has shape {w.shape}, expected {(din, dout)}"
                )
            if b.shape != (dout,):
                raise ValueError(f"bias {i} has shape {b.shape}, expected {(dout,)}")
            if not (np.isfinite(w).all() and np.isfinite(b).all()):
                raise ValueError(f"non-finite parameters in layer {i}")
            weights.append(w)
            biases.append(b)
        self.layer_dims = dims
        self.weights = weights
        self.biases = biases

    @property
    def input_dim(self):
        return self.layer_dims[0]

    def copy(self):
        """Deep copy of all parameters (metadata is shallow-copied)."""
        return NetworkModel(
            layer_dims=self.layer_dims,
            weights=[w.copy() for w in self.weights],
            biases=[b.copy() for b in self.biases],
            hidden_activation=self.hidden_activation,
            output_activation=self.output_activation,
            metadata=dict(self.metadata),
        )


@dataclass(frozen=True)
class TrainingConfig:
    """Hyperparameters for mini-batch Adam with early stopping."""

    learning_rate: float = 1e-3
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_epsilon: float = 1e-8
    batch_size: int = 32
    max_epochs: int = 2000
    patience: int = 50
    seed: int = 0

    def __post_init__(self):
        if not self.learning_rate > 0:
            raise ValueError(f"learning_rate must be > 0, got {self.learning_rate}")
        for name in ("adam_beta1", "adam_beta2"):
            beta = getattr(self, name)
            if not 0.0 < beta < 1.0:
                raise ValueError(f"{name} must lie in (0, 1), got {beta}")
        if self.adam_epsilon <= 0:
            raise ValueError(f"adam_epsilon must be > 0, got {self.adam_epsilon}")
        for name in ("batch_size", "max_epochs", "patience"):
            value = getattr(self, name)
            if not isinstance(value, (int, np.integer)) or value < 1:
                raise ValueError(f"{name} must be a positive integer, got {value}")
        if not isinstance(self.seed, (int, np.integer)) or not 0 <= self.seed < 2**64:
            raise ValueError(f"seed must be a 64-bit unsigned integer, got {self.seed}")

    def digest(self):
        """Plain-dict form stored in model metadata."""
        return {
            "learning_rate": self.learning_rate,
            "adam_beta1": self.adam_beta1,
            "adam_beta2": self.adam_beta2,
            "adam_epsilon": self.adam_epsilon,
            "batch_size": int(self.batch_size),
            "max_epochs": int(self.max_epochs),
            "patience": int(self.patience),
            "seed": int(self.seed),
        }


@dataclass(frozen=True)
class LinearModel:
    """Ordinary least-squares baseline: intercept + coefficients . features."""

    coefficients: np.ndarray
    intercept: float

    def __post_init__(self):
        coeffs = np.asarray(self.coefficients, dtype=float)
        if coeffs.ndim != 1 or coeffs.size == 0:
            raise ValueError("coefficients must be a nonempty vector")
        if not (np.isfinite(coeffs).all() and math.isfinite(self.intercept)):
            raise ValueError("linear model parameters must be finite")
        coeffs.setflags(write=False)
        object.__setattr__(self, "coefficients", coeffs)
        object.__setattr__(self, "intercept", float(self.intercept))


@dataclass
class TrainingHistory:
    """Per-epoch loss record; best_epoch indexes the restored parameters."""

    train_mse: list
    val_mse: list
    best_epoch: int

    @property
    def epochs_run(self):
        return len(self.val_mse)


def _sigmoid(z):
    """Numerically safe logistic function, elementwise."""
    z = np.asarray(z, dtype=float)
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def _as_features(hist, input_dim):
    """Accept a ClickHistogram-like object or a raw feature vector."""
    freqs = getattr(hist, "freqs", hist)
    x = np.atleast_2d(np.asarray(freqs, dtype=float))
    if x.shape[1] != input_dim:
        raise ValueError(f"expected {input_dim} input features, got {x.shape[1]}")
    return x


def _forward(model, x):
    """Forward pass keeping pre-activations for backprop.

    Returns (activations, pre_activations); activations[0] is the input
    and activations[-1] the unclipped sigmoid output of shape (batch, 1).
    """
    activations = [x]
    pre = []
    a = x
    last = len(model.weights) - 1
    for i, (w, b) in enumerate(zip(model.weights, model.biases)):
        z = a @ w + b
        pre.append(z)
        a = _sigmoid(z) if i == last else np.maximum(z, 0.0)
        activations.append(a)
    return activations, pre


def predict(model, hist):
    """Network output in the open interval (0, 1) for one histogram."""
    return float(predict_batch(model, _as_features(hist, model.input_dim))[0])


def predict_batch(model, features):
    """Vector of network outputs for a (batch, input_dim) feature array."""
    x = _as_features(features, model.input_dim)
    out = _forward(model, x)[0][-1][:, 0]
    return np.clip(out, _OUTPUT_CLIP, 1.0 - _OUTPUT_CLIP)


def loss(predictions, labels):
    """Mean squared error between prediction and label vectors."""
    p = np.asarray(predictions, dtype=float)
    y = np.asarray(labels, dtype=float)
    if p.shape != y.shape:
        raise ValueError(f"shape mismatch: predictions {p.shape}, labels {y.shape}")
    if p.size == 0:
        raise ValueError("loss of an empty batch is undefined")
    return float(np.mean((p - y) ** 2))


def gradients(model, batch):
    """Exact MSE gradients for one (features, labels) batch.

    Returns (grad_weights, grad_biases) shaped like the model parameters.
    The rectifier contributes zero gradient where its pre-activation is
    exactly 0.
    """
    features, labels = batch
    x = _as_features(features, model.input_dim)
    y = np.asarray(labels, dtype=float).reshape(-1)
    if x.shape[0] != y.size:
        raise ValueError(f"batch has {x.shape[0]} rows but {y.size} labels")
    if y.size == 0:
        raise ValueError("gradient of an empty batch is undefined")

    activations, pre = _forward(model, x)
    out = activations[-1][:, 0]
    # d(MSE)/d(output), then through the sigmoid.
    delta = (2.0 / y.size) * (out - y) * out * (1.0 - out)
    delta = delta[:, None]

    grad_w = [None] * len(model.weights)
    grad_b = [None] * len(model.biases)
    for i in range(len(model.weights) - 1, -1, -1):
        grad_w[i] = activations[i].T @ delta
        grad_b[i] = delta.sum(axis=0)
        if i > 0:
            delta = (delta @ model.weights[i].T) * (pre[i - 1] > 0.0)
    return grad_w, grad_b


def initialize_network(layer_dims, rng, *, metadata=None):
    """Glorot-uniform weights, zero biases, drawn from the given generator."""
    dims = tuple(int(d) for d in layer_dims)
    weights, biases = [], []
    for din, dout in zip(dims[:-1], dims[1:]):
        limit = math.sqrt(6.0 / (din + dout))
        weights.append(rng.uniform(-limit, limit, size=(din, dout)))
        biases.append(np.zeros(dout))
    return NetworkModel(
        layer_dims=dims, weights=weights, biases=biases, metadata=metadata or {}
    )


@dataclass
class AdamState:
    """First/second moment accumulators plus the step counter."""

    m_weights: list
    v_weights: list
    m_biases: list
    v_biases: list
    step: int = 0


def adam_init(model):
    """Zeroed Adam accumulators matching the model's parameter shapes."""
    return AdamState(
        m_weights=[np.zeros_like(w) for w in model.weights],
        v_weights=[np.zeros_like(w) for w in model.weights],
        m_biases=[np.zeros_like(b) for b in model.biases],
        v_biases=[np.zeros_like(b) for b in model.biases],
    )


def adam_step(model, state, grads, config):
    """One in-place Adam update with bias correction.

    The epsilon sits outside the square root, as in the original method.
    """
    grad_w, grad_b = grads
    state.step += 1
    t = state.step
    b1, b2 = config.adam_beta1, config.adam_beta2
    corr1 = 1.0 - b1**t
    corr2 = 1.0 - b2**t
    params = (
        (model.weights, state.m_weights, state.v_weights, grad_w),
        (model.biases, state.m_biases, state.v_biases, grad_b),
    )
    for values, ms, vs, gs in params:
        for value, m, v, g in zip(values, ms, vs, gs):
            m *= b1
            m += (1.0 - b1) * g
            v *= b2
            v += (1.0 - b2) * g * g
            value -= config.learning_rate * (m / corr1) / (
                np.sqrt(v / corr2) + config.adam_epsilon
            )
    return model


def _as_xy(dataset):
    """Accept a (features, labels) pair or a LabeledDataset-like object."""
    if isinstance(dataset, tuple) and len(dataset) == 2:
        x, y = dataset
    else:
        x, y = dataset.features(), dataset.labels()
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float).reshape(-1)
    if x.ndim != 2 or x.shape[0] != y.size or y.size == 0:
        raise ValueError("dataset must provide a nonempty (rows, features) matrix "
                         "with one label per row")
    return x, y


def train(train_set, validation_set, config, *, layer_dims=None, detector=None):
    """Train a fresh network and return (model, history).

    Mini-batch Adam on the mean-square error. After every epoch the full
    train and validation losses are recorded; training stops when the
    validation loss has not improved for `config.patience` consecutive
    epochs, and the parameters of the best validation epoch are restored.
    One generator seeded from config.seed drives both the initialization
    and the per-epoch shuffles, so runs are bit-reproducible.
    """
    x_train, y_train = _as_xy(train_set)
    x_val, y_val = _as_xy(validation_set)
    if layer_dims is None:
        layer_dims = (x_train.shape[1], 50, 50, 50, 1)
    if x_train.shape[1] != layer_dims[0] or x_val.shape[1] != layer_dims[0]:
        raise ValueError("dataset feature width does not match the input layer")

    metadata = {"config": config.digest(), "seed": int(config.seed)}
    if detector is not None:
        metadata["detector"] = {
            "n_detectors": detector.n_detectors,
            "efficiency": detector.efficiency,
        }
    rng = np.random.default_rng(config.seed)
    model = initialize_network(layer_dims, rng, metadata=metadata)
    state = adam_init(model)

    n = x_train.shape[0]
    history = TrainingHistory(train_mse=[], val_mse=[], best_epoch=-1)
    best_val = math.inf
    best_params = None
    stale = 0
    for epoch in range(config.max_epochs):
        order = rng.permutation(n)
        for start in range(0, n, config.batch_size):
            idx = order[start : start + config.batch_size]
            grads = gradients(model, (x_train[idx], y_train[idx]))
            adam_step(model, state, grads, config)

        train_mse = loss(predict_batch(model, x_train), y_train)
        val_mse = loss(predict_batch(model, x_val), y_val)
        if not (math.isfinite(train_mse) and math.isfinite(val_mse)):
            raise TrainingError(
                f"non-finite loss at epoch {epoch}: train={train_mse}, val={val_mse}",
                epoch,
            )
        history.train_mse.append(train_mse)
        history.val_mse.append(val_mse)

        if val_mse < best_val:
            best_val = val_mse
            history.best_epoch = epoch
            best_params = ([w.copy() for w in model.weights],
                           [b.copy() for b in model.biases])
            stale = 0
        else:
            stale += 1
            if stale >= config.patience:
                break

    model.weights, model.biases = best_params
    model.metadata["best_epoch"] = history.best_epoch
    model.metadata["epochs_run"] = history.epochs_run
    return model, history


def fit_linear(dataset):
    """Least-squares fit of labels on features with an intercept.

    The click frequencies sum to one, which makes the design collinear
    with the intercept column; a 1e-10 ridge jitter keeps the normal
    equations solvable.
    """
    x, y = _as_xy(dataset)
    design = np.hstack([np.ones((x.shape[0], 1)), x])
    gram = design.T @ design
    gram += 1e-10 * np.eye(gram.shape[0])
    theta = np.linalg.solve(gram, design.T @ y)
    return LinearModel(coefficients=theta[1:], intercept=theta[0])


def predict_linear(model, hist):
    """Baseline score; unbounded, unlike the network output."""
    freqs = getattr(hist, "freqs", hist)
    x = np.asarray(freqs, dtype=float)
    if x.shape != model.coefficients.shape:
        raise ValueError(
            f"expected {model.coefficients.shape[0]} features, got {x.shape}"
        )
    return float(model.intercept + x @ model.coefficients)


def save_model(model, path):
    """Write the versioned JSON model file; floats round-trip exactly."""
    doc = {
        "format": MODEL_FORMAT,
        "layer_dims": list(model.layer_dims),
        "hidden_activation": model.hidden_activation,
        "output_activation": model.output_activation,
        "weights": [w.tolist() for w in model.weights],
        "biases": [b.tolist() for b in model.biases],
        "metadata": model.metadata,
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=1)
        fh.write("\n")


def load_model(path):
    """Read and validate a model file written by save_model."""
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ModelFormatError(f"unparseable model file {path}: {exc}") from exc
    if not isinstance(doc, dict) or doc.get("format") != MODEL_FORMAT:
        raise ModelFormatError(
            f"expected format {MODEL_FORMAT!r}, got {doc.get('format')!r}"
            if isinstance(doc, dict)
            else "model file is not a JSON object"
        )
    required = {"layer_dims", "hidden_activation", "output_activation",
                "weights", "biases", "metadata"}
    missing = required - doc.keys()
    if missing:
        raise ModelFormatError(f"model file missing fields: {sorted(missing)}")
    try:
        return NetworkModel(
            layer_dims=tuple(doc["layer_dims"]),
            weights=[np.asarray(w, dtype=float) for w in doc["weights"]],
            biases=[np.asarray(b, dtype=float) for b in doc["biases"]],
            hidden_activation=doc["hidden_activation"],
            output_activation=doc["output_activation"],
            metadata=doc["metadata"],
        )
    except (ValueError, TypeError) as exc:
        raise ModelFormatError(f"invalid model file {path}: {exc}") from exc
