"""Dense feed-forward networks with manual backpropagation.

Everything here is desk-scale numpy in float64: layers, the two losses the
probes train with (softmax cross-entropy, masked sigmoid BCE), Adam/SGD,
a deterministic training loop, and a central-difference gradient checker.

Seeding contract: every stochastic choice (weight init, shuffle order) is
derived from a single integer seed via ``derive_seed``, so identical
(data, config, seed) runs are bit-reproducible on the same platform.
"""

from __future__ import annotations

import copy
import enum
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import (
    ConfigError,
    DataError,
    DimensionError,
    NumericError,
    StaleCacheError,
    TrainingAbortError,
)

__all__ = [
    "Activation",
    "AdamState",
    "Batch",
    "DenseLayer",
    "EpochStats",
    "MlpModel",
    "TrainConfig",
    "backward",
    "derive_seed",
    "forward",
    "grad_check",
    "init_mlp",
    "num_parameters",
    "optimizer_step",
    "sigmoid",
    "sigmoid_bce",
    "softmax",
    "softmax_cross_entropy",
    "train",
]


def derive_seed(root: int, *path: int) -> int:
    """Derive a child seed from a root seed and a fixed counter path.

    The scheme is ``SeedSequence((root, *path))`` folded to one uint64; it is
    part of the reproducibility contract and must not change.
    """
    words = np.random.SeedSequence((root, *path)).generate_state(2, np.uint32)
    return int(words[0]) | (int(words[1]) << 32)


class Activation(enum.Enum):
    IDENTITY = 0
    RELU = 1


@dataclass
class DenseLayer:
    """One dense layer: ``act(x @ weights.T + bias)``.

    weights is (out_dim, in_dim), bias is (out_dim,), both float64.
    """

    weights: np.ndarray
    bias: np.ndarray
    activation: Activation

    @property
    def in_dim(self) -> int:
        return self.weights.shape[1]

    @property
    def out_dim(self) -> int:
        return self.weights.shape[0]


@dataclass
class MlpModel:
    layers: list[DenseLayer]
    input_dim: int

    @property
    def output_dim(self) -> int:
        return self.layers[-1].out_dim

    @property
    def layer_dims(self) -> tuple[int, ...]:
        """(input_dim, hidden..., output_dim)."""
        return (self.input_dim, *(layer.out_dim for layer in self.layers))


def validate_model(model: MlpModel) -> None:
    """Check the structural invariants: dim chaining, final Identity, finiteness."""
    if not model.layers:
        raise DimensionError("model has no layers")
    prev = model.input_dim
    for i, layer in enumerate(model.layers):
        if layer.weights.ndim != 2 or layer.bias.ndim != 1:
            raise DimensionError(f"layer {i}: weights must be 2-D, bias 1-D")
        if layer.bias.shape[0] != layer.out_dim:
            raise DimensionError(
                f"layer {i}: bias length {layer.bias.shape[0]} != out_dim {layer.out_dim}"
            )
        if layer.in_dim != prev:
            raise DimensionError(
                f"layer {i}: in_dim {layer.in_dim} does not chain with previous dim {prev}"
            )
        if not (np.isfinite(layer.weights).all() and np.isfinite(layer.bias).all()):
            raise NumericError(f"layer {i}: non-finite parameters")
        prev = layer.out_dim
    if model.layers[-1].activation is not Activation.IDENTITY:
        raise DimensionError("final layer activation must be Identity; losses own the nonlinearity")


def init_mlp(layer_dims: Sequence[int], seed: int) -> MlpModel:
    """Build an MLP with the given (input, hidden..., output) dims.

    Hidden layers are ReLU, the final layer Identity. Weights are uniform in
    +-sqrt(6 / (fan_in + fan_out)), biases zero, drawn from a generator
    seeded with ``seed``.
    """
    if len(layer_dims) < 2:
        raise DimensionError("need at least (input_dim, output_dim)")
    if any(d < 1 for d in layer_dims):
        raise DimensionError(f"all layer dims must be >= 1, got {tuple(layer_dims)}")
    rng = np.random.default_rng(seed)
    layers = []
    for i in range(len(layer_dims) - 1):
        fan_in, fan_out = layer_dims[i], layer_dims[i + 1]
        bound = np.sqrt(6.0 / (fan_in + fan_out))
        weights = rng.uniform(-bound, bound, size=(fan_out, fan_in))
        bias = np.zeros(fan_out)
        last = i == len(layer_dims) - 2
        layers.append(DenseLayer(weights, bias, Activation.IDENTITY if last else Activation.RELU))
    model = MlpModel(layers=layers, input_dim=int(layer_dims[0]))
    validate_model(model)
    return model


def num_parameters(model: MlpModel) -> int:
    return sum(layer.weights.size + layer.bias.size for layer in model.layers)


@dataclass
class ForwardCache:
    """Per-layer inputs and pre-activations, pinned to the producing model."""

    model: MlpModel
    inputs: list[np.ndarray]
    preacts: list[np.ndarray]


def _as_batch_matrix(batch: np.ndarray) -> np.ndarray:
    a = np.asarray(batch, dtype=np.float64)
    if a.ndim != 2:
        raise DimensionError(f"batch must be 2-D (rows, features), got shape {a.shape}")
    return a


def forward(model: MlpModel, batch: np.ndarray) -> tuple[np.ndarray, ForwardCache]:
    """Run the network, returning logits and the cache backward() needs.

    Pure function: identical inputs give bit-identical outputs.
    """
    x = _as_batch_matrix(batch)
    if x.shape[1] != model.input_dim:
        raise DimensionError(
            f"batch has {x.shape[1]} columns, model expects input_dim {model.input_dim}"
        )
    if not np.isfinite(x).all():
        raise NumericError("batch contains non-finite values")
    inputs, preacts = [], []
    for i, layer in enumerate(model.layers):
        inputs.append(x)
        with np.errstate(over="ignore", invalid="ignore"):
            z = x @ layer.weights.T + layer.bias
        if not np.isfinite(z).all():
            raise NumericError(f"non-finite pre-activation at layer {i}")
        preacts.append(z)
        x = np.maximum(z, 0.0) if layer.activation is Activation.RELU else z
    return x, ForwardCache(model=model, inputs=inputs, preacts=preacts)


def softmax(logits: np.ndarray) -> np.ndarray:
    """Row softmax with max-subtraction stabilization."""
    z = np.asarray(logits, dtype=np.float64)
    if not np.isfinite(z).all():
        raise NumericError("logits contain non-finite values")
    shifted = z - z.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def softmax_cross_entropy(logits: np.ndarray, labels: np.ndarray) -> tuple[float, np.ndarray]:
    """Mean cross-entropy over rows and the gradient w.r.t. the logits.

    Loss is computed in log-sum-exp form so saturated logits stay finite;
    the gradient is (softmax - onehot) / n, so each row sums to zero.
    """
    z = _as_batch_matrix(logits)
    if not np.isfinite(z).all():
        raise NumericError("logits contain non-finite values")
    y = np.asarray(labels)
    if y.ndim != 1 or y.shape[0] != z.shape[0]:
        raise DimensionError(f"labels shape {y.shape} does not match logits rows {z.shape[0]}")
    num_classes = z.shape[1]
    bad = (y < 0) | (y >= num_classes)
    if bad.any():
        i = int(np.argmax(bad))
        raise DataError(f"label {int(y[i])} at row {i} outside [0, {num_classes})")
    n = z.shape[0]
    m = z.max(axis=1, keepdims=True)
    lse = m[:, 0] + np.log(np.exp(z - m).sum(axis=1))
    loss = float(np.mean(lse - z[np.arange(n), y]))
    grad = softmax(z)
    grad[np.arange(n), y] -= 1.0
    grad /= n
    return loss, grad


def sigmoid(z: np.ndarray) -> np.ndarray:
    """Numerically stable logistic function."""
    z = np.asarray(z, dtype=np.float64)
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def sigmoid_bce(
    logits: np.ndarray, targets: np.ndarray, mask: Optional[np.ndarray] = None
) -> tuple[float, np.ndarray]:
    """Masked mean binary cross-entropy on logits, in log-sum-exp form.

    The mean runs over masked-in entries only; masked-out entries contribute
    zero loss and exactly zero gradient. mask=None means all-ones.
    """
    z = _as_batch_matrix(logits)
    if not np.isfinite(z).all():
        raise NumericError("logits contain non-finite values")
    t = np.asarray(targets, dtype=np.float64)
    if t.shape != z.shape:
        raise DimensionError(f"targets shape {t.shape} != logits shape {z.shape}")
    if not np.isin(t, (0.0, 1.0)).all():
        raise DataError("targets must be 0 or 1")
    if mask is None:
        m = np.ones_like(z)
    else:
        m = np.asarray(mask, dtype=np.float64)
        if m.shape != z.shape:
            raise DimensionError(f"mask shape {m.shape} != logits shape {z.shape}")
        if not np.isin(m, (0.0, 1.0)).all():
            raise DataError("mask must be 0 or 1")
    n_in = m.sum()
    if n_in == 0:
        raise DataError("empty loss support: mask excludes every entry")
    # per-entry: max(z,0) - z*t + log(1 + exp(-|z|))
    per_entry = np.maximum(z, 0.0) - z * t + np.log1p(np.exp(-np.abs(z)))
    loss = float((per_entry * m).sum() / n_in)
    grad = (sigmoid(z) - t) * m / n_in
    return loss, grad


def backward(
    model: MlpModel, cache: ForwardCache, grad_logits: np.ndarray
) -> list[tuple[np.ndarray, np.ndarray]]:
    """Backprop grad_logits through the cached forward pass.

    Returns one (d_weights, d_bias) pair per layer, shapes mirroring the
    parameters.
    """
    if cache.model is not model:
        raise StaleCacheError("cache was produced by a different model")
    if len(cache.inputs) != len(model.layers):
        raise StaleCacheError("cache depth does not match model depth")
    g = np.asarray(grad_logits, dtype=np.float64)
    if g.shape != (cache.inputs[0].shape[0], model.output_dim):
        raise DimensionError(
            f"grad_logits shape {g.shape} != (batch {cache.inputs[0].shape[0]}, "
            f"out {model.output_dim})"
        )
    grads: list[tuple[np.ndarray, np.ndarray]] = [None] * len(model.layers)  # type: ignore[list-item]
    for i in range(len(model.layers) - 1, -1, -1):
        layer = model.layers[i]
        if cache.preacts[i].shape[1] != layer.out_dim:
            raise StaleCacheError(f"cache at layer {i} does not match layer shape")
        dz = g * (cache.preacts[i] > 0) if layer.activation is Activation.RELU else g
        grads[i] = (dz.T @ cache.inputs[i], dz.sum(axis=0))
        if i > 0:
            g = dz @ layer.weights
    return grads


@dataclass
class TrainConfig:
    learning_rate: float = 1e-5
    batch_size: int = 32
    epochs: int = 20
    seed: int = 0
    optimizer: str = "adam"  # "adam" | "sgd"
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    checkpoint_policy: str = "best_validation"  # "best_validation" | "last"

    def __post_init__(self):
        if not self.learning_rate > 0:
            raise ConfigError(f"learning_rate must be > 0, got {self.learning_rate}")
        if self.batch_size < 1:
            raise ConfigError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.epochs < 1:
            raise ConfigError(f"epochs must be >= 1, got {self.epochs}")
        if self.optimizer not in ("adam", "sgd"):
            raise ConfigError(f"unknown optimizer {self.optimizer!r}")
        if self.checkpoint_policy not in ("best_validation", "last"):
            raise ConfigError(f"unknown checkpoint_policy {self.checkpoint_policy!r}")


@dataclass
class AdamState:
    """First/second moment accumulators mirroring the model parameters."""

    first_moment: list[tuple[np.ndarray, np.ndarray]]
    second_moment: list[tuple[np.ndarray, np.ndarray]]
    step_count: int = 0

    @classmethod
    def zeros_like(cls, model: MlpModel) -> "AdamState":
        zeros = lambda: [
            (np.zeros_like(l.weights), np.zeros_like(l.bias)) for l in model.layers
        ]
        return cls(first_moment=zeros(), second_moment=zeros())


def optimizer_step(
    model: MlpModel,
    grads: list[tuple[np.ndarray, np.ndarray]],
    state: Optional[AdamState],
    config: TrainConfig,
) -> Optional[AdamState]:
    """Apply one optimizer update in place; returns the updated state.

    Adam uses bias correction: m_hat = m / (1 - beta1^t), v_hat likewise,
    update = lr * m_hat / (sqrt(v_hat) + eps).
    """
    if len(grads) != len(model.layers):
        raise DimensionError(f"got {len(grads)} gradient pairs for {len(model.layers)} layers")
    if config.optimizer == "sgd":
        for layer, (dw, db) in zip(model.layers, grads):
            layer.weights -= config.learning_rate * dw
            layer.bias -= config.learning_rate * db
        return state
    if state is None:
        raise ConfigError("adam optimizer requires an AdamState")
    state.step_count += 1
    t = state.step_count
    c1 = 1.0 - config.beta1**t
    c2 = 1.0 - config.beta2**t
    for layer, (dw, db), m, v in zip(
        model.layers, grads, state.first_moment, state.second_moment
    ):
        for param, grad, m_acc, v_acc in ((layer.weights, dw, m[0], v[0]), (layer.bias, db, m[1], v[1])):
            if grad.shape != param.shape:
                raise DimensionError(
                    f"gradient shape {grad.shape} != parameter shape {param.shape}"
                )
            m_acc *= config.beta1
            m_acc += (1.0 - config.beta1) * grad
            v_acc *= config.beta2
            v_acc += (1.0 - config.beta2) * grad * grad
            param -= config.learning_rate * (m_acc / c1) / (np.sqrt(v_acc / c2) + config.eps)
    return state


@dataclass
class Batch:
    """A dataset for one loss family.

    cross_entropy: y is integer class labels, mask unused.
    masked_bce:    y is a (rows, heads) 0/1 matrix, mask optional 0/1 matrix.
    """

    x: np.ndarray
    y: np.ndarray
    mask: Optional[np.ndarray] = None

    def __len__(self) -> int:
        return self.x.shape[0]

    def take(self, idx: np.ndarray) -> "Batch":
        return Batch(
            x=self.x[idx],
            y=self.y[idx],
            mask=None if self.mask is None else self.mask[idx],
        )


LOSS_KINDS = ("cross_entropy", "masked_bce")


def _loss_and_grad(loss_kind: str, logits: np.ndarray, batch: Batch) -> tuple[float, np.ndarray]:
    if loss_kind == "cross_entropy":
        return softmax_cross_entropy(logits, batch.y)
    if loss_kind == "masked_bce":
        return sigmoid_bce(logits, batch.y, batch.mask)
    raise ConfigError(f"unknown loss kind {loss_kind!r}")


def _val_metric(loss_kind: str, logits: np.ndarray, batch: Batch) -> float:
    """cross_entropy: top-1 accuracy. masked_bce: masked accuracy at p=0.5."""
    if loss_kind == "cross_entropy":
        return float(np.mean(np.argmax(logits, axis=1) == batch.y))
    pred = logits > 0  # sigmoid(z) > 0.5  <=>  z > 0
    hits = pred == (batch.y > 0.5)
    if batch.mask is None:
        return float(hits.mean())
    m = batch.mask > 0.5
    return float(hits[m].mean())


@dataclass
class EpochStats:
    epoch: int
    train_loss: float
    val_loss: Optional[float]
    val_metric: Optional[float]


def _snapshot_params(model: MlpModel) -> list[tuple[np.ndarray, np.ndarray]]:
    return [(l.weights.copy(), l.bias.copy()) for l in model.layers]


def _restore_params(model: MlpModel, snap: list[tuple[np.ndarray, np.ndarray]]) -> None:
    for layer, (w, b) in zip(model.layers, snap):
        layer.weights = w.copy()
        layer.bias = b.copy()


def train(
    model: MlpModel,
    train_data: Batch,
    val_data: Optional[Batch],
    loss_kind: str,
    config: TrainConfig,
) -> tuple[MlpModel, list[EpochStats]]:
    """Train in place with seeded shuffling; returns (model, per-epoch history).

    The returned model carries the checkpoint selected by
    config.checkpoint_policy: lowest validation loss (ties go to the earlier
    epoch), or the last epoch.
    """
    if len(train_data) == 0:
        raise DataError("empty train set")
    if val_data is not None and len(val_data) == 0:
        val_data = None
    if val_data is None and config.checkpoint_policy == "best_validation":
        raise ConfigError("checkpoint_policy=best_validation requires a validation set")
    if loss_kind not in LOSS_KINDS:
        raise ConfigError(f"unknown loss kind {loss_kind!r}")

    shuffle_rng = np.random.default_rng(derive_seed(config.seed, 1))
    state = AdamState.zeros_like(model) if config.optimizer == "adam" else None
    n = len(train_data)
    history: list[EpochStats] = []
    best_val = np.inf
    best_snap = None

    for epoch in range(config.epochs):
        perm = shuffle_rng.permutation(n)
        loss_sum = 0.0
        for start in range(0, n, config.batch_size):
            idx = perm[start : start + config.batch_size]
            mb = train_data.take(idx)
            try:
                logits, cache = forward(model, mb.x)
                loss, grad_logits = _loss_and_grad(loss_kind, logits, mb)
            except NumericError as exc:
                raise TrainingAbortError(
                    f"numeric failure at epoch {epoch}, batch {start // config.batch_size}: {exc}"
                ) from exc
            if not np.isfinite(loss):
                raise TrainingAbortError(
                    f"non-finite loss at epoch {epoch}, batch {start // config.batch_size}"
                )
            grads = backward(model, cache, grad_logits)
            state = optimizer_step(model, grads, state, config)
            loss_sum += loss * len(mb)
        train_loss = loss_sum / n

        val_loss = val_metric = None
        if val_data is not None:
            logits, _ = forward(model, val_data.x)
            val_loss, _ = _loss_and_grad(loss_kind, logits, val_data)
            val_metric = _val_metric(loss_kind, logits, val_data)
            if not np.isfinite(val_loss):
                raise TrainingAbortError(f"non-finite validation loss at epoch {epoch}")
            if config.checkpoint_policy == "best_validation" and val_loss < best_val:
                best_val = val_loss
                best_snap = _snapshot_params(model)
        history.append(EpochStats(epoch, train_loss, val_loss, val_metric))

    if config.checkpoint_policy == "best_validation" and best_snap is not None:
        _restore_params(model, best_snap)
    return model, history


def grad_check(
    model: MlpModel, loss_kind: str, batch: Batch, epsilon: float = 1e-5
) -> float:
    """Central-difference check of backward() over every parameter.

    Returns the worst relative error |analytic - numeric| / max(|a|, |n|, 1e-6);
    the 1e-6 floor keeps finite-difference roundoff on vanishing gradients from
    registering as error. Perturbations that flip a ReLU gate are skipped: the
    loss is not differentiable across the kink, so the central difference says
    nothing about the gradient there. A model with zero parameters reports 0.0
    by convention. Costs two forwards per parameter.
    """
    if epsilon <= 0:
        raise ConfigError(f"epsilon must be > 0, got {epsilon}")
    if num_parameters(model) == 0:
        return 0.0

    def loss_and_gates() -> tuple[float, tuple[bytes, ...]]:
        logits, fcache = forward(model, batch.x)
        loss = _loss_and_grad(loss_kind, logits, batch)[0]
        gates = tuple(
            (z > 0).tobytes()
            for z, layer in zip(fcache.preacts, model.layers)
            if layer.activation is Activation.RELU
        )
        return loss, gates

    logits, cache = forward(model, batch.x)
    _, grad_logits = _loss_and_grad(loss_kind, logits, batch)
    analytic = backward(model, cache, grad_logits)

    worst = 0.0
    for layer, (dw, db) in zip(model.layers, analytic):
        for param, grad in ((layer.weights, dw), (layer.bias, db)):
            flat_p = param.reshape(-1)
            flat_g = grad.reshape(-1)
            for j in range(flat_p.size):
                orig = flat_p[j]
                flat_p[j] = orig + epsilon
                hi, gates_hi = loss_and_gates()
                flat_p[j] = orig - epsilon
                lo, gates_lo = loss_and_gates()
                flat_p[j] = orig
                if gates_hi != gates_lo:
                    continue
                numeric = (hi - lo) / (2.0 * epsilon)
                denom = max(abs(flat_g[j]), abs(numeric), 1e-6)
                worst = max(worst, abs(flat_g[j] - numeric) / denom)
    return worst
