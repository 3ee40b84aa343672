"""Dense feed-forward stacks with exact reverse-mode gradients.

Everything is float64 and batch-first: a batch is an array of shape
``(batch, features)``; a single 1-D input is treated as a batch of one and
returned 1-D again.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import ShapeMismatch


class Activation(str, enum.Enum):
    IDENTITY = "identity"
    RELU = "relu"
    SIGMOID = "sigmoid"
    TANH = "tanh"


def _sigmoid(z):
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def _activate(kind: Activation, z):
    if kind is Activation.IDENTITY:
        return z
    if kind is Activation.RELU:
        return np.maximum(z, 0.0)
    if kind is Activation.SIGMOID:
        return _sigmoid(z)
    return np.tanh(z)


def _activation_grad(kind: Activation, z, a, upstream):
    if kind is Activation.IDENTITY:
        return upstream
    if kind is Activation.RELU:
        return upstream * (z > 0)
    if kind is Activation.SIGMOID:
        return upstream * a * (1.0 - a)
    return upstream * (1.0 - a * a)


@dataclass(frozen=True)
class LayerSpec:
    input_dim: int
    output_dim: int
    activation: Activation = Activation.IDENTITY

    def __post_init__(self):
        if self.input_dim < 1 or self.output_dim < 1:
            raise ValueError("layer dimensions must be >= 1")
        object.__setattr__(self, "activation", Activation(self.activation))


@dataclass(frozen=True, eq=False)
class Layer:
    name: str
    weights: np.ndarray  # (output_dim, input_dim)
    biases: np.ndarray   # (output_dim,)
    activation: Activation

    @property
    def spec(self) -> LayerSpec:
        out_dim, in_dim = self.weights.shape
        return LayerSpec(in_dim, out_dim, self.activation)


class ParameterSet:
    """Ordered, immutable-by-convention list of dense layers.

    The same structure doubles as a gradient container (``GradientSet``):
    gradients carry the layer names and activations of the parameters they
    belong to so the two can be combined entry-wise.
    """

    __slots__ = ("layers",)

    def __init__(self, layers: Sequence[Layer] = ()):
        layers = tuple(layers)
        for prev, nxt in zip(layers, layers[1:]):
            if prev.weights.shape[0] != nxt.weights.shape[1]:
                raise ShapeMismatch(
                    f"layer {prev.name} outputs {prev.weights.shape[0]} but "
                    f"{nxt.name} expects {nxt.weights.shape[1]}"
                )
        self.layers = layers

    def __len__(self):
        return len(self.layers)

    def __iter__(self):
        return iter(self.layers)

    def __repr__(self):
        dims = " -> ".join(
            [str(self.input_dim)] + [f"{l.weights.shape[0]}({l.activation.value})" for l in self.layers]
        ) if self.layers else "empty"
        return f"ParameterSet({dims})"

    @property
    def input_dim(self) -> int:
        return self.layers[0].weights.shape[1]

    @property
    def output_dim(self) -> int:
        return self.layers[-1].weights.shape[0]

    @property
    def size(self) -> int:
        return sum(l.weights.size + l.biases.size for l in self.layers)

    def specs(self) -> list[LayerSpec]:
        return [l.spec for l in self.layers]

    def arrays(self):
        for l in self.layers:
            yield l.weights
            yield l.biases

    def ravel(self) -> np.ndarray:
        if not self.layers:
            return np.zeros(0)
        return np.concatenate([a.ravel() for a in self.arrays()])

    def with_vector(self, vec) -> "ParameterSet":
        vec = np.asarray(vec, dtype=np.float64)
        if vec.size != self.size:
            raise ShapeMismatch(f"vector of {vec.size} entries for {self.size} parameters")
        layers, pos = [], 0
        for l in self.layers:
            nw, nb = l.weights.size, l.biases.size
            w = vec[pos:pos + nw].reshape(l.weights.shape).copy()
            b = vec[pos + nw:pos + nw + nb].copy()
            pos += nw + nb
            layers.append(Layer(l.name, w, b, l.activation))
        return ParameterSet(layers)

    def map(self, fn: Callable[[np.ndarray], np.ndarray]) -> "ParameterSet":
        return ParameterSet(
            Layer(l.name, fn(l.weights), fn(l.biases), l.activation) for l in self.layers
        )

    def zeros_like(self) -> "ParameterSet":
        return self.map(np.zeros_like)

    def same_shape(self, other: "ParameterSet") -> bool:
        return len(self.layers) == len(other.layers) and all(
            a.weights.shape == b.weights.shape and a.biases.shape == b.biases.shape
            for a, b in zip(self.layers, other.layers)
        )

    def combine(self, other: "ParameterSet", fn) -> "ParameterSet":
        if not self.same_shape(other):
            raise ShapeMismatch("parameter sets differ in shape")
        return ParameterSet(
            Layer(a.name, fn(a.weights, b.weights), fn(a.biases, b.biases), a.activation)
            for a, b in zip(self.layers, other.layers)
        )


GradientSet = ParameterSet


def init_params(specs: Sequence[LayerSpec], rng: np.random.Generator, prefix: str = "layer") -> ParameterSet:
    """Glorot-uniform weights, zero biases."""
    layers = []
    for k, spec in enumerate(specs):
        limit = np.sqrt(6.0 / (spec.input_dim + spec.output_dim))
        w = rng.uniform(-limit, limit, size=(spec.output_dim, spec.input_dim))
        layers.append(Layer(f"{prefix}{k}", w, np.zeros(spec.output_dim), spec.activation))
    return ParameterSet(layers)


@dataclass
class Tape:
    params: ParameterSet
    inputs: list      # input to each layer
    pre: list         # affine outputs
    post: list        # activations
    squeeze: bool


def forward(params: ParameterSet, x) -> tuple[np.ndarray, Tape]:
    """Run ``x`` through ``params``; returns the output and a tape for :func:`backward`."""
    x = np.asarray(x, dtype=np.float64)
    squeeze = x.ndim == 1
    h = x[None, :] if squeeze else x
    if h.ndim != 2 or (params.layers and h.shape[1] != params.input_dim):
        raise ShapeMismatch(
            f"input of shape {x.shape} for a network taking {params.input_dim if params.layers else 0} features"
        )
    tape = Tape(params, [], [], [], squeeze)
    for layer in params.layers:
        tape.inputs.append(h)
        z = h @ layer.weights.T + layer.biases
        h = _activate(layer.activation, z)
        tape.pre.append(z)
        tape.post.append(h)
    return (h[0] if squeeze else h), tape


def backward(tape: Tape, upstream) -> tuple[GradientSet, np.ndarray]:
    """Gradients of ``sum(upstream * output)`` w.r.t. every parameter and the input."""
    g = np.asarray(upstream, dtype=np.float64)
    if tape.squeeze:
        g = g[None, :]
    out_shape = tape.post[-1].shape if tape.post else None
    if out_shape is not None and g.shape != out_shape:
        raise ShapeMismatch(f"upstream of shape {g.shape} for output of shape {out_shape}")
    grads = []
    for layer, x, z, a in zip(
        reversed(tape.params.layers), reversed(tape.inputs), reversed(tape.pre), reversed(tape.post)
    ):
        dz = _activation_grad(layer.activation, z, a, g)
        grads.append(Layer(layer.name, dz.T @ x, dz.sum(axis=0), layer.activation))
        g = dz @ layer.weights
    grads.reverse()
    return ParameterSet(grads), (g[0] if tape.squeeze else g)


def log_softmax(logits) -> np.ndarray:
    logits = np.asarray(logits, dtype=np.float64)
    shifted = logits - logits.max(axis=-1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=-1, keepdims=True))


def softmax(logits) -> np.ndarray:
    return np.exp(log_softmax(logits))


def cross_entropy(logits, label) -> float:
    """Softmax negative log-likelihood of ``label`` for a single logit vector."""
    return float(-log_softmax(logits)[int(label)])


def mse(prediction, target) -> float:
    prediction = np.asarray(prediction, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if prediction.shape != target.shape:
        raise ShapeMismatch(f"{prediction.shape} vs {target.shape}")
    return float(np.mean((prediction - target) ** 2))


def cross_entropy_batch(logits: np.ndarray, labels) -> tuple[float, np.ndarray]:
    """Mean cross-entropy over rows and its gradient w.r.t. ``logits``."""
    labels = np.asarray(labels, dtype=np.int64)
    n = logits.shape[0]
    logp = log_softmax(logits)
    loss = -logp[np.arange(n), labels].mean()
    grad = np.exp(logp)
    grad[np.arange(n), labels] -= 1.0
    return float(loss), grad / n


def mse_batch(prediction: np.ndarray, target: np.ndarray) -> tuple[float, np.ndarray]:
    """Mean over rows of the per-row MSE, and its gradient w.r.t. ``prediction``."""
    if prediction.shape != target.shape:
        raise ShapeMismatch(f"{prediction.shape} vs {target.shape}")
    diff = prediction - target
    return float(np.mean(diff ** 2)), 2.0 * diff / diff.size


def axpy_params(dst, scale: float, grad):
    """Return ``dst - scale * grad`` without touching either operand.

    Works on anything exposing ``combine`` (``ParameterSet`` or a model bundle).
    """
    if scale == 0.0:
        return dst.combine(grad, lambda a, b: a.copy())
    return dst.combine(grad, lambda a, b: a - scale * b)


def fd_check(params, loss_fn: Callable, step: float = 1e-5, min_grad: float = 1e-12) -> float:
    """Worst relative error between analytic and central-difference gradients.

    ``loss_fn(params)`` must return ``(loss, gradient)`` where ``gradient`` has
    the structure of ``params``. Parameters whose analytic derivative is at most
    ``min_grad`` in magnitude are skipped. At ``step=1e-5`` the difference
    quotient carries roughly 1e-11 of rounding noise, which bounds how small a
    derivative can be checked to a given relative tolerance.
    """
    if step <= 0:
        raise ValueError("step must be positive")
    theta = params.ravel()
    if theta.size == 0:
        return 0.0
    _, grad = loss_fn(params)
    analytic = grad.ravel()
    worst = 0.0
    for i in range(theta.size):
        if abs(analytic[i]) <= min_grad:
            continue
        old = theta[i]
        theta[i] = old + step
        up = loss_fn(params.with_vector(theta))[0]
        theta[i] = old - step
        down = loss_fn(params.with_vector(theta))[0]
        theta[i] = old
        numeric = (up - down) / (2.0 * step)
        err = abs(analytic[i] - numeric) / max(abs(analytic[i]), abs(numeric))
        worst = max(worst, err)
    return worst
