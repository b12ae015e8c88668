"""Small numpy MLP classifier: parameters, forward pass, softmax cross-entropy,
backpropagation and plain SGD with coupled weight decay.

Every model in the simulator (global, per-client learning and unlearning
models) is a :class:`ParamVector`. Parameters are stored as one flat float64
array with a layer directory on top, so elementwise algebra (blending,
averaging, masking) is a single numpy operation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterator, Sequence

import numpy as np

ACTIVATIONS = ("relu", "tanh")


@dataclass(frozen=True)
class ParamVector:
    """Ordered, named layer tensors backed by one flat array.

    Layers alternate ``W{i}`` (shape ``(fan_in, fan_out)``) and ``b{i}``.
    ``activation`` is carried along so that forward/gradient need no
    separate model handle; it plays no role in alignment.
    """

    names: tuple[str, ...]
    shapes: tuple[tuple[int, ...], ...]
    flat: np.ndarray
    activation: str = "relu"

    def __post_init__(self) -> None:
        if len(self.names) != len(self.shapes):
            raise ValueError("names and shapes must have the same length")
        flat = np.asarray(self.flat, dtype=np.float64)
        if flat.ndim != 1 or flat.size != sum(_size(s) for s in self.shapes):
            raise ValueError(
                f"flat array of size {flat.size} does not match layer shapes {self.shapes}"
            )
        object.__setattr__(self, "flat", flat)
        offsets, start = [], 0
        for shape in self.shapes:
            offsets.append((start, start + _size(shape)))
            start += _size(shape)
        object.__setattr__(self, "_offsets", tuple(offsets))

    @property
    def total_len(self) -> int:
        return int(self.flat.size)

    @property
    def offsets(self) -> tuple[tuple[int, int], ...]:
        return self._offsets  # type: ignore[attr-defined]

    def layers(self) -> Iterator[tuple[str, tuple[int, ...], np.ndarray]]:
        """Yield ``(name, shape, view)``; views share memory with ``flat``."""
        for name, shape, (start, stop) in zip(self.names, self.shapes, self.offsets):
            yield name, shape, self.flat[start:stop].reshape(shape)

    def layer(self, name: str) -> np.ndarray:
        for lname, _, values in self.layers():
            if lname == name:
                return values
        raise KeyError(name)

    def aligned(self, other: "ParamVector") -> bool:
        return self.names == other.names and self.shapes == other.shapes

    def check_aligned(self, other: "ParamVector") -> None:
        if not self.aligned(other):
            raise ValueError(
                f"misaligned parameter vectors: {list(zip(self.names, self.shapes))} "
                f"vs {list(zip(other.names, other.shapes))}"
            )

    def with_flat(self, flat: np.ndarray) -> "ParamVector":
        return ParamVector(self.names, self.shapes, np.array(flat, dtype=np.float64), self.activation)

    def copy(self) -> "ParamVector":
        return self.with_flat(self.flat.copy())

    def zeros_like(self) -> "ParamVector":
        return self.with_flat(np.zeros_like(self.flat))

    def __add__(self, other: "ParamVector") -> "ParamVector":
        self.check_aligned(other)
        return self.with_flat(self.flat + other.flat)

    def __sub__(self, other: "ParamVector") -> "ParamVector":
        self.check_aligned(other)
        return self.with_flat(self.flat - other.flat)

    def __mul__(self, scalar: float) -> "ParamVector":
        return self.with_flat(self.flat * float(scalar))

    __rmul__ = __mul__

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, ParamVector):
            return NotImplemented
        return self.aligned(other) and np.array_equal(self.flat, other.flat)

    __hash__ = None  # type: ignore[assignment]


def _size(shape: Sequence[int]) -> int:
    return math.prod(shape)


@dataclass(frozen=True)
class ModelSpec:
    input_dim: int
    hidden_dims: tuple[int, ...]
    num_classes: int
    activation: str = "relu"
    init_seed: int = 0

    def __post_init__(self) -> None:
        object.__setattr__(self, "hidden_dims", tuple(int(h) for h in self.hidden_dims))
        if self.input_dim < 1:
            raise ValueError("input_dim must be >= 1")
        if not self.hidden_dims or min(self.hidden_dims) < 1:
            raise ValueError("hidden_dims must be a nonempty list of positive sizes")
        if self.num_classes < 2:
            raise ValueError("num_classes must be >= 2")
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"activation must be one of {ACTIVATIONS}")

    @property
    def layer_dims(self) -> list[int]:
        return [self.input_dim, *self.hidden_dims, self.num_classes]

    @property
    def num_params(self) -> int:
        dims = self.layer_dims
        return sum(a * b + b for a, b in zip(dims[:-1], dims[1:]))


@dataclass(frozen=True)
class Batch:
    inputs: np.ndarray
    labels: np.ndarray

    def __post_init__(self) -> None:
        inputs = np.atleast_2d(np.asarray(self.inputs, dtype=np.float64))
        labels = np.asarray(self.labels, dtype=np.int64).reshape(-1)
        if inputs.shape[0] != labels.shape[0]:
            raise ValueError("inputs and labels have different row counts")
        if labels.size < 1:
            raise ValueError("a batch needs at least one sample")
        object.__setattr__(self, "inputs", inputs)
        object.__setattr__(self, "labels", labels)

    def __len__(self) -> int:
        return int(self.labels.size)


@dataclass(frozen=True)
class SgdConfig:
    learning_rate: float = 1e-2
    weight_decay: float = 4e-5
    batch_size: int = 32
    local_episodes: int = 2

    def __post_init__(self) -> None:
        if self.learning_rate < 0:
            raise ValueError("learning_rate must be non-negative")
        if self.weight_decay < 0:
            raise ValueError("weight_decay must be non-negative")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.local_episodes < 0:
            raise ValueError("local_episodes must be >= 0")


def init_params(spec: ModelSpec) -> ParamVector:
    """Glorot-uniform weights, zero biases, fully determined by ``spec.init_seed``."""
    rng = np.random.default_rng(spec.init_seed)
    dims = spec.layer_dims
    names, shapes, chunks = [], [], []
    for i, (fan_in, fan_out) in enumerate(zip(dims[:-1], dims[1:])):
        limit = np.sqrt(6.0 / (fan_in + fan_out))
        names += [f"W{i}", f"b{i}"]
        shapes += [(fan_in, fan_out), (fan_out,)]
        chunks += [rng.uniform(-limit, limit, size=fan_in * fan_out), np.zeros(fan_out)]
    return ParamVector(tuple(names), tuple(shapes), np.concatenate(chunks), spec.activation)


def _weights(params: ParamVector) -> list[tuple[np.ndarray, np.ndarray]]:
    views = [v for _, _, v in params.layers()]
    return list(zip(views[0::2], views[1::2]))


def _activate(z: np.ndarray, kind: str) -> np.ndarray:
    if kind == "relu":
        return np.maximum(z, 0.0)
    return np.tanh(z)


def _forward_cache(params: ParamVector, inputs: np.ndarray) -> tuple[np.ndarray, list[np.ndarray]]:
    layers = _weights(params)
    if inputs.shape[1] != layers[0][0].shape[0]:
        raise ValueError(
            f"input dimension {inputs.shape[1]} does not match model input {layers[0][0].shape[0]}"
        )
    acts = [inputs]
    h = inputs
    for W, b in layers[:-1]:
        h = _activate(h @ W + b, params.activation)
        acts.append(h)
    W, b = layers[-1]
    return h @ W + b, acts


def forward(params: ParamVector, batch: Batch | np.ndarray) -> np.ndarray:
    """Logits of shape ``(n, num_classes)``."""
    inputs = batch.inputs if isinstance(batch, Batch) else np.atleast_2d(np.asarray(batch, dtype=np.float64))
    logits, _ = _forward_cache(params, inputs)
    return logits


def log_softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))


def softmax(logits: np.ndarray) -> np.ndarray:
    shifted = np.exp(logits - logits.max(axis=1, keepdims=True))
    return shifted / shifted.sum(axis=1, keepdims=True)


def cross_entropy(logits: np.ndarray, labels: np.ndarray) -> float:
    """Mean negative log-likelihood of the true class."""
    logits = np.atleast_2d(logits)
    labels = np.asarray(labels, dtype=np.int64)
    if labels.min() < 0 or labels.max() >= logits.shape[1]:
        raise ValueError("label out of range for the given logits")
    return float(-log_softmax(logits)[np.arange(labels.size), labels].mean())


def loss(params: ParamVector, batch: Batch) -> float:
    return cross_entropy(forward(params, batch), batch.labels)


def gradient(params: ParamVector, batch: Batch) -> ParamVector:
    """Backpropagated gradient of the mean cross-entropy w.r.t. every parameter."""
    logits, acts = _forward_cache(params, batch.inputs)
    n = len(batch)
    if batch.labels.max() >= logits.shape[1]:
        raise ValueError("label out of range for the model")
    delta = softmax(logits)
    delta[np.arange(n), batch.labels] -= 1.0
    delta /= n

    layers = _weights(params)
    grads: list[np.ndarray] = []
    for i in range(len(layers) - 1, -1, -1):
        W, _ = layers[i]
        grads.append(delta.sum(axis=0))
        grads.append((acts[i].T @ delta).ravel())
        if i > 0:
            upstream = delta @ W.T
            if params.activation == "relu":
                delta = upstream * (acts[i] > 0)
            else:
                delta = upstream * (1.0 - acts[i] ** 2)
    return params.with_flat(np.concatenate(grads[::-1]))


def sgd_step(params: ParamVector, grad: ParamVector, cfg: SgdConfig) -> ParamVector:
    """theta - lr * (grad + weight_decay * theta)."""
    params.check_aligned(grad)
    step = grad.flat + cfg.weight_decay * params.flat
    return params.with_flat(params.flat - cfg.learning_rate * step)


def local_train(params: ParamVector, dataset, cfg: SgdConfig, seed: int | None = 0) -> ParamVector:
    """``cfg.local_episodes`` shuffled passes of mini-batch SGD over ``dataset``.

    ``dataset`` is anything with ``inputs`` and ``labels`` arrays. The final
    short batch of each pass is kept.
    """
    inputs = np.asarray(dataset.inputs, dtype=np.float64)
    labels = np.asarray(dataset.labels, dtype=np.int64)
    n = labels.size
    if n == 0:
        raise ValueError("cannot train on an empty dataset")
    rng = np.random.default_rng(seed)
    theta = params.copy()
    for _ in range(cfg.local_episodes):
        order = rng.permutation(n)
        for start in range(0, n, cfg.batch_size):
            idx = order[start:start + cfg.batch_size]
            theta = sgd_step(theta, gradient(theta, Batch(inputs[idx], labels[idx])), cfg)
    return theta


def predict(params: ParamVector, inputs: np.ndarray) -> np.ndarray:
    # argmax returns the lowest index among ties
    return forward(params, inputs).argmax(axis=1)
