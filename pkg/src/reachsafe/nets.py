"""Small fully connected networks used as state estimators and attack targets.

Everything here is plain float64 numpy: the networks are tiny (a few layers of
at most ~64 units), so an autograd framework would cost more in dependencies
than it saves.  Models are immutable after construction; training returns a
new model.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

ACTIVATIONS = ("relu", "tanh", "sigmoid", "identity")

MODEL_FORMAT_VERSION = 1


class DimensionError(ValueError):
    """Input/target dimensions do not match the model."""


class ModelFormatError(ValueError):
    """A serialized model file is malformed."""


class UnsupportedVersionError(ModelFormatError):
    """A serialized model declares a format version this code cannot read."""


class TrainingDivergedError(RuntimeError):
    """Training produced a non-finite loss."""

    def __init__(self, epoch: int):
        self.epoch = epoch
        super().__init__(f"training loss became non-finite at epoch {epoch}")


class TrainingNotConvergedError(RuntimeError):
    """Training finished without improving the mean loss."""


@dataclass(frozen=True)
class Layer:
    weight: np.ndarray  # (out, in)
    bias: np.ndarray  # (out,)
    activation: str

    def __post_init__(self):
        w = np.asarray(self.weight, dtype=float)
        b = np.asarray(self.bias, dtype=float)
        if w.ndim != 2 or b.ndim != 1 or w.shape[0] != b.shape[0]:
            raise DimensionError(
                f"layer weight {w.shape} incompatible with bias {b.shape}"
            )
        if not (np.all(np.isfinite(w)) and np.all(np.isfinite(b))):
            raise ValueError("layer parameters must be finite")
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}")
        object.__setattr__(self, "weight", w)
        object.__setattr__(self, "bias", b)


@dataclass(frozen=True)
class MlpModel:
    """Feedforward network: affine layers followed by pointwise activations.

    The final layer must use the identity activation (regression output).
    Consecutive layer dimensions must chain.
    """

    layers: tuple[Layer, ...]

    def __post_init__(self):
        layers = tuple(self.layers)
        if not layers:
            raise ValueError("model needs at least one layer")
        for k in range(len(layers) - 1):
            if layers[k + 1].weight.shape[1] != layers[k].weight.shape[0]:
                raise DimensionError(
                    f"layer {k} output dim {layers[k].weight.shape[0]} does not "
                    f"chain into layer {k + 1} input dim {layers[k + 1].weight.shape[1]}"
                )
        if layers[-1].activation != "identity":
            raise ValueError("last layer activation must be identity")
        object.__setattr__(self, "layers", layers)

    @property
    def input_dim(self) -> int:
        return self.layers[0].weight.shape[1]

    @property
    def output_dim(self) -> int:
        return self.layers[-1].weight.shape[0]


@dataclass(frozen=True)
class Dataset:
    inputs: np.ndarray  # (n, input_dim)
    targets: np.ndarray  # (n, output_dim)

    def __post_init__(self):
        x = np.atleast_2d(np.asarray(self.inputs, dtype=float))
        y = np.atleast_2d(np.asarray(self.targets, dtype=float))
        if x.shape[0] != y.shape[0]:
            raise DimensionError(
                f"inputs have {x.shape[0]} rows but targets have {y.shape[0]}"
            )
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
            raise ValueError("dataset entries must be finite")
        object.__setattr__(self, "inputs", x)
        object.__setattr__(self, "targets", y)

    def __len__(self) -> int:
        return self.inputs.shape[0]


@dataclass(frozen=True)
class AdamParams:
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float
    batch_size: int
    epochs: int
    seed: int = 0
    optimizer: str = "adam"  # "sgd" | "adam"
    adam: AdamParams = field(default_factory=AdamParams)
    weight_decay: float = 0.0

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.batch_size < 1:
            raise ValueError("batch_size must be positive")
        if self.epochs < 0:
            raise ValueError("epochs must be nonnegative")
        if self.optimizer not in ("sgd", "adam"):
            raise ValueError(f"unknown optimizer {self.optimizer!r}")


def _act(name: str, a: np.ndarray) -> np.ndarray:
    if name == "relu":
        return np.maximum(a, 0.0)
    if name == "tanh":
        return np.tanh(a)
    if name == "sigmoid":
        return sigmoid(a)
    return a


def _act_deriv(name: str, a: np.ndarray) -> np.ndarray:
    # relu kink at exactly 0 uses subgradient 0
    if name == "relu":
        return (a > 0.0).astype(float)
    if name == "tanh":
        t = np.tanh(a)
        return 1.0 - t * t
    if name == "sigmoid":
        s = sigmoid(a)
        return s * (1.0 - s)
    return np.ones_like(a)


def sigmoid(a: np.ndarray) -> np.ndarray:
    # numerically stable split on sign
    out = np.empty_like(a, dtype=float)
    pos = a >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-a[pos]))
    ea = np.exp(a[~pos])
    out[~pos] = ea / (1.0 + ea)
    return out


def forward(model: MlpModel, z: np.ndarray) -> np.ndarray:
    """Evaluate the network.  ``z`` may be a vector or an (n, input_dim) batch."""
    z = np.asarray(z, dtype=float)
    single = z.ndim == 1
    zb = z[None, :] if single else z
    if zb.shape[-1] != model.input_dim:
        raise DimensionError(
            f"input has dim {zb.shape[-1]}, model expects {model.input_dim}"
        )
    h = zb
    for layer in model.layers:
        h = _act(layer.activation, h @ layer.weight.T + layer.bias)
    return h[0] if single else h


def _forward_trace(model: MlpModel, zb: np.ndarray):
    """Forward pass keeping pre-activations and post-activations per layer."""
    pre, post = [], [zb]
    h = zb
    for layer in model.layers:
        a = h @ layer.weight.T + layer.bias
        h = _act(layer.activation, a)
        pre.append(a)
        post.append(h)
    return pre, post


def mse_loss(model: MlpModel, z: np.ndarray, target: np.ndarray) -> float:
    out = forward(model, np.atleast_2d(z))
    t = np.atleast_2d(np.asarray(target, dtype=float))
    with np.errstate(over="ignore"):
        return float(np.mean((out - t) ** 2))


def grad_input(model: MlpModel, z: np.ndarray, target: np.ndarray) -> np.ndarray:
    """Gradient of the mean-squared error between the output and ``target``
    with respect to the input, by reverse-mode accumulation.

    The loss is averaged over output components (not over batch rows), so for
    a single output the loss is exactly ``(forward(z) - target)**2``.
    """
    z = np.asarray(z, dtype=float)
    target = np.asarray(target, dtype=float)
    single = z.ndim == 1
    zb = z[None, :] if single else z
    tb = target[None, :] if target.ndim == 1 else target
    if zb.shape[-1] != model.input_dim:
        raise DimensionError(
            f"input has dim {zb.shape[-1]}, model expects {model.input_dim}"
        )
    if tb.shape[-1] != model.output_dim:
        raise DimensionError(
            f"target has dim {tb.shape[-1]}, model outputs {model.output_dim}"
        )
    pre, post = _forward_trace(model, zb)
    g = 2.0 * (post[-1] - tb) / model.output_dim
    for k in range(len(model.layers) - 1, -1, -1):
        layer = model.layers[k]
        g = (g * _act_deriv(layer.activation, pre[k])) @ layer.weight
    return g[0] if single else g


def _param_grads(model: MlpModel, zb: np.ndarray, tb: np.ndarray):
    """Backprop gradients of the batch-mean MSE w.r.t. weights and biases."""
    n = zb.shape[0]
    pre, post = _forward_trace(model, zb)
    grads = [None] * len(model.layers)
    g = 2.0 * (post[-1] - tb) / (model.output_dim * n)
    for k in range(len(model.layers) - 1, -1, -1):
        layer = model.layers[k]
        g = g * _act_deriv(layer.activation, pre[k])
        grads[k] = (g.T @ post[k], g.sum(axis=0))
        g = g @ layer.weight
    return grads


def init_model(
    layer_sizes: list[int], activations: list[str], seed: int = 0
) -> MlpModel:
    """Seeded uniform init scaled by layer fan-in.

    ``layer_sizes`` are [input_dim, hidden..., output_dim]; ``activations``
    has one entry per layer (the last must be "identity").
    """
    if len(activations) != len(layer_sizes) - 1:
        raise DimensionError("need one activation per layer")
    rng = np.random.default_rng(seed)
    layers = []
    for k in range(len(layer_sizes) - 1):
        fan_in = layer_sizes[k]
        bound = 1.0 / np.sqrt(fan_in)
        w = rng.uniform(-bound, bound, size=(layer_sizes[k + 1], fan_in))
        b = rng.uniform(-bound, bound, size=layer_sizes[k + 1])
        layers.append(Layer(w, b, activations[k]))
    return MlpModel(tuple(layers))


def train(model: MlpModel, data: Dataset, cfg: TrainConfig) -> MlpModel:
    """Minibatch gradient descent on the mean-squared error.

    Deterministic given the seed.  Raises :class:`TrainingDivergedError` if
    the loss becomes non-finite, and :class:`TrainingNotConvergedError` if a
    nonzero-epoch run fails to strictly reduce the mean training loss.
    """
    if data.inputs.shape[1] != model.input_dim:
        raise DimensionError("dataset input dim does not match model")
    if data.targets.shape[1] != model.output_dim:
        raise DimensionError("dataset target dim does not match model")
    if cfg.batch_size > len(data):
        raise ValueError("batch_size exceeds dataset size")
    if cfg.epochs == 0:
        return model

    rng = np.random.default_rng(cfg.seed)
    weights = [l.weight.copy() for l in model.layers]
    biases = [l.bias.copy() for l in model.layers]
    acts = [l.activation for l in model.layers]

    def build() -> MlpModel:
        return MlpModel(
            tuple(Layer(w.copy(), b.copy(), a) for w, b, a in zip(weights, biases, acts))
        )

    init_loss = mse_loss(model, data.inputs, data.targets)

    if cfg.optimizer == "adam":
        m_w = [np.zeros_like(w) for w in weights]
        v_w = [np.zeros_like(w) for w in weights]
        m_b = [np.zeros_like(b) for b in biases]
        v_b = [np.zeros_like(b) for b in biases]
        step = 0

    n = len(data)
    for epoch in range(cfg.epochs):
        order = rng.permutation(n)
        for start in range(0, n - cfg.batch_size + 1, cfg.batch_size):
            idx = order[start : start + cfg.batch_size]
            zb, tb = data.inputs[idx], data.targets[idx]
            grads = _param_grads(build(), zb, tb)
            if cfg.optimizer == "sgd":
                for k, (gw, gb) in enumerate(grads):
                    if cfg.weight_decay:
                        gw = gw + cfg.weight_decay * weights[k]
                    weights[k] -= cfg.learning_rate * gw
                    biases[k] -= cfg.learning_rate * gb
            else:
                step += 1
                b1, b2, eps = cfg.adam.beta1, cfg.adam.beta2, cfg.adam.eps
                corr1 = 1.0 - b1**step
                corr2 = 1.0 - b2**step
                for k, (gw, gb) in enumerate(grads):
                    if cfg.weight_decay:
                        gw = gw + cfg.weight_decay * weights[k]
                    m_w[k] = b1 * m_w[k] + (1 - b1) * gw
                    v_w[k] = b2 * v_w[k] + (1 - b2) * gw * gw
                    m_b[k] = b1 * m_b[k] + (1 - b1) * gb
                    v_b[k] = b2 * v_b[k] + (1 - b2) * gb * gb
                    weights[k] -= cfg.learning_rate * (m_w[k] / corr1) / (
                        np.sqrt(v_w[k] / corr2) + eps
                    )
                    biases[k] -= cfg.learning_rate * (m_b[k] / corr1) / (
                        np.sqrt(v_b[k] / corr2) + eps
                    )
        epoch_loss = mse_loss(build(), data.inputs, data.targets)
        if not np.isfinite(epoch_loss):
            raise TrainingDivergedError(epoch)

    trained = build()
    final_loss = mse_loss(trained, data.inputs, data.targets)
    if not final_loss < init_loss:
        raise TrainingNotConvergedError(
            f"mean loss did not improve: {init_loss:.6g} -> {final_loss:.6g}"
        )
    return trained


def save_model(model: MlpModel, path) -> None:
    """Write the model as a JSON document (format version 1).

    Floats are serialized with Python's shortest round-trip repr, so a
    load(save(m)) round trip is bit-exact.
    """
    doc = {
        "format_version": MODEL_FORMAT_VERSION,
        "input_dim": model.input_dim,
        "layers": [
            {
                "rows": int(l.weight.shape[0]),
                "cols": int(l.weight.shape[1]),
                "activation": l.activation,
                "weights": l.weight.ravel().tolist(),
                "bias": l.bias.tolist(),
            }
            for l in model.layers
        ],
    }
    with open(path, "w") as fh:
        json.dump(doc, fh)


def load_model(path) -> MlpModel:
    with open(path) as fh:
        raw = fh.read()
    try:
        doc = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise ModelFormatError(
            f"not valid JSON at byte offset {exc.pos}: {exc.msg}"
        ) from exc

    def need(obj, key, where):
        if not isinstance(obj, dict) or key not in obj:
            raise ModelFormatError(f"missing field {key!r} in {where}")
        return obj[key]

    version = need(doc, "format_version", "document")
    if version != MODEL_FORMAT_VERSION:
        raise UnsupportedVersionError(
            f"unsupported format_version {version!r}; this build reads version "
            f"{MODEL_FORMAT_VERSION}"
        )
    input_dim = need(doc, "input_dim", "document")
    raw_layers = need(doc, "layers", "document")
    if not isinstance(raw_layers, list) or not raw_layers:
        raise ModelFormatError("field 'layers' must be a nonempty list")
    layers = []
    prev = input_dim
    for i, entry in enumerate(raw_layers):
        where = f"layers[{i}]"
        rows = need(entry, "rows", where)
        cols = need(entry, "cols", where)
        activation = need(entry, "activation", where)
        flat = np.asarray(need(entry, "weights", where), dtype=float)
        bias = np.asarray(need(entry, "bias", where), dtype=float)
        if flat.size != rows * cols:
            raise ModelFormatError(
                f"{where}: declared shape {rows}x{cols} needs {rows * cols} "
                f"weights but field 'weights' has {flat.size}"
            )
        if bias.size != rows:
            raise ModelFormatError(
                f"{where}: declared {rows} rows but field 'bias' has {bias.size}"
            )
        if cols != prev:
            raise ModelFormatError(
                f"{where}: declared input dim {cols} does not chain "
                f"(expected {prev})"
            )
        try:
            layers.append(Layer(flat.reshape(rows, cols), bias, activation))
        except ValueError as exc:
            raise ModelFormatError(f"{where}: {exc}") from exc
        prev = rows
    try:
        return MlpModel(tuple(layers))
    except ValueError as exc:
        raise ModelFormatError(str(exc)) from exc


def relu_active_pattern(model: MlpModel, z: np.ndarray) -> list[np.ndarray]:
    """Boolean activity masks of every relu layer at input ``z``."""
    pre, _ = _forward_trace(model, np.asarray(z, dtype=float)[None, :])
    return [
        (pre[k][0] > 0.0) for k, l in enumerate(model.layers) if l.activation == "relu"
    ]


def affine_from_pattern(model: MlpModel, z: np.ndarray):
    """The affine function induced by the relu activity pattern at ``z``.

    Returns (W, b) with forward(z) == W @ z + b for relu/identity networks.
    """
    pre, _ = _forward_trace(model, np.asarray(z, dtype=float)[None, :])
    W = np.eye(model.input_dim)
    b = np.zeros(model.input_dim)
    for k, layer in enumerate(model.layers):
        W = layer.weight @ W
        b = layer.weight @ b + layer.bias
        if layer.activation == "relu":
            mask = (pre[k][0] > 0.0).astype(float)
            W = W * mask[:, None]
            b = b * mask
        elif layer.activation != "identity":
            raise ValueError("affine_from_pattern needs a relu/identity network")
    return W, b
