"""Dense feed-forward networks with hand-derived reverse-mode gradients.

Everything runs in float64 on plain numpy arrays. A network is a stack of
affine layers, each followed by an elementwise activation. ``forward`` walks
one sample through the stack and returns a tape; ``backward`` consumes the
tape and produces exact parameter and input gradients. No autodiff graph is
involved, the per-layer derivatives are written out by hand, and a central
finite-difference helper serves as the independent oracle in the tests.

Checkpoints are JSON: dims, per-layer activation ids, and row-major
parameter lists. Python's float repr round-trips doubles exactly, so a
save/load cycle is bit-identical.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DataError, NumericalError

SELU_LAMBDA = 1.0507009873554805
SELU_ALPHA = 1.6732632423543772

ACTIVATIONS = ("relu", "selu", "tanh", "identity")

CHECKPOINT_FORMAT = "densenet-v1"


def activate(name: str, z: np.ndarray) -> np.ndarray:
    if name == "relu":
        return np.maximum(z, 0.0)
    if name == "selu":
        return SELU_LAMBDA * np.where(z > 0.0, z, SELU_ALPHA * np.expm1(z))
    if name == "tanh":
        return np.tanh(z)
    if name == "identity":
        return z
    raise ConfigError(f"unknown activation {name!r}")


def activate_grad(name: str, z: np.ndarray) -> np.ndarray:
    """Derivative of the activation, evaluated at the pre-activation z."""
    if name == "relu":
        return (z > 0.0).astype(np.float64)
    if name == "selu":
        return SELU_LAMBDA * np.where(z > 0.0, 1.0, SELU_ALPHA * np.exp(z))
    if name == "tanh":
        t = np.tanh(z)
        return 1.0 - t * t
    if name == "identity":
        return np.ones_like(z)
    raise ConfigError(f"unknown activation {name!r}")


@dataclass
class Layer:
    w: np.ndarray  # (out, in)
    b: np.ndarray  # (out,)
    activation: str


class DenseNet:
    """A stack of affine layers with elementwise activations."""

    def __init__(self, layers: list[Layer]):
        if not layers:
            raise ConfigError("a network needs at least one layer")
        for k, layer in enumerate(layers):
            if layer.activation not in ACTIVATIONS:
                raise ConfigError(f"layer {k}: unknown activation {layer.activation!r}")
            if layer.w.ndim != 2 or layer.b.ndim != 1 or layer.w.shape[0] != layer.b.shape[0]:
                raise ConfigError(f"layer {k}: weight/bias shapes do not chain")
            if k > 0 and layer.w.shape[1] != layers[k - 1].w.shape[0]:
                raise ConfigError(f"layer {k}: input dim {layer.w.shape[1]} does not match previous output")
            if not (np.isfinite(layer.w).all() and np.isfinite(layer.b).all()):
                raise NumericalError(f"layer {k}: non-finite parameters")
        self.layers = layers

    @property
    def input_dim(self) -> int:
        return self.layers[0].w.shape[1]

    @property
    def output_dim(self) -> int:
        return self.layers[-1].w.shape[0]

    @property
    def dims(self) -> tuple[int, ...]:
        return (self.input_dim,) + tuple(layer.w.shape[0] for layer in self.layers)

    def param_count(self) -> int:
        return sum(layer.w.size + layer.b.size for layer in self.layers)

    def forward(self, x: np.ndarray) -> tuple[np.ndarray, list]:
        """Run one sample through the stack.

        Returns the output vector and a tape of (input, pre-activation)
        pairs, one per layer, that ``backward`` consumes.
        """
        x = np.asarray(x, dtype=np.float64)
        if x.shape != (self.input_dim,):
            raise ConfigError(f"input shape {x.shape} does not match network input dim {self.input_dim}")
        if not np.isfinite(x).all():
            raise NumericalError("non-finite network input")
        tape = []
        a = x
        for layer in self.layers:
            z = layer.w @ a + layer.b
            tape.append((a, z))
            a = activate(layer.activation, z)
        return a, tape

    def backward(self, tape: list, upstream: np.ndarray) -> tuple["GradientSet", np.ndarray]:
        """Backpropagate an upstream gradient through a forward tape.

        Returns parameter gradients plus the gradient with respect to the
        network input (needed when networks are chained).
        """
        if len(tape) != len(self.layers):
            raise ConfigError("tape does not match network depth")
        upstream = np.asarray(upstream, dtype=np.float64)
        if upstream.shape != (self.output_dim,):
            raise ConfigError(f"upstream shape {upstream.shape} does not match output dim {self.output_dim}")
        grads = GradientSet.zeros_like(self)
        delta = upstream
        for k in range(len(self.layers) - 1, -1, -1):
            a_in, z = tape[k]
            dz = delta * activate_grad(self.layers[k].activation, z)
            grads.dw[k] += np.outer(dz, a_in)
            grads.db[k] += dz
            delta = self.layers[k].w.T @ dz
        return grads, delta

    def copy(self) -> "DenseNet":
        return DenseNet([Layer(l.w.copy(), l.b.copy(), l.activation) for l in self.layers])

    def flat_params(self) -> np.ndarray:
        return np.concatenate([np.concatenate([l.w.ravel(), l.b]) for l in self.layers])

    def set_flat_params(self, p: np.ndarray) -> None:
        p = np.asarray(p, dtype=np.float64)
        if p.shape != (self.param_count(),):
            raise ConfigError("flat parameter vector has wrong length")
        ofs = 0
        for layer in self.layers:
            n = layer.w.size
            layer.w[...] = p[ofs:ofs + n].reshape(layer.w.shape)
            ofs += n
            layer.b[...] = p[ofs:ofs + layer.b.size]
            ofs += layer.b.size


class GradientSet:
    """Per-layer parameter gradients for one DenseNet, accumulated in place."""

    def __init__(self, dw: list[np.ndarray], db: list[np.ndarray]):
        self.dw = dw
        self.db = db

    @classmethod
    def zeros_like(cls, net: DenseNet) -> "GradientSet":
        return cls([np.zeros_like(l.w) for l in net.layers], [np.zeros_like(l.b) for l in net.layers])

    def add(self, other: "GradientSet") -> None:
        for k in range(len(self.dw)):
            self.dw[k] += other.dw[k]
            self.db[k] += other.db[k]

    def scale(self, c: float) -> None:
        for k in range(len(self.dw)):
            self.dw[k] *= c
            self.db[k] *= c

    def flat(self) -> np.ndarray:
        return np.concatenate([np.concatenate([dw.ravel(), db]) for dw, db in zip(self.dw, self.db)])

    def is_finite(self) -> bool:
        return all(np.isfinite(dw).all() for dw in self.dw) and all(np.isfinite(db).all() for db in self.db)


def init_net(dims: tuple[int, ...], activation: str, seed, output_activation: str | None = None) -> DenseNet:
    """Build a network with freshly initialized parameters.

    ``dims`` lists layer widths input first, e.g. (80, 64, 32). Hidden layers
    use ``activation``; the last layer uses ``output_activation`` when given.
    Weights are zero-mean normal with variance 2/fan_in, except SELU layers
    which use 1/fan_in. Biases start at zero. ``seed`` may be an int or a
    numpy SeedSequence; the result is deterministic either way.
    """
    if len(dims) < 2:
        raise ConfigError("dims must list at least input and output width")
    if any(d < 1 for d in dims):
        raise ConfigError("all layer widths must be positive")
    rng = np.random.default_rng(seed)
    layers = []
    for k in range(len(dims) - 1):
        fan_in, fan_out = dims[k], dims[k + 1]
        act = activation
        if output_activation is not None and k == len(dims) - 2:
            act = output_activation
        if act not in ACTIVATIONS:
            raise ConfigError(f"unknown activation {act!r}")
        var = 1.0 / fan_in if act == "selu" else 2.0 / fan_in
        w = rng.normal(0.0, math.sqrt(var), size=(fan_out, fan_in))
        layers.append(Layer(w, np.zeros(fan_out), act))
    return DenseNet(layers)


class OptimizerState:
    """Per-network optimizer state. ``optimizer_step`` is the only mutator."""

    def __init__(self, algorithm: str, lr: float, net: DenseNet,
                 beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        if algorithm not in ("sgd", "adam"):
            raise ConfigError(f"unknown optimizer {algorithm!r}")
        if lr <= 0.0:
            raise ConfigError("learning rate must be positive")
        self.algorithm = algorithm
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        if algorithm == "adam":
            self.m = GradientSet.zeros_like(net)
            self.v = GradientSet.zeros_like(net)


def optimizer_step(net: DenseNet, grads: GradientSet, state: OptimizerState) -> None:
    """Apply one update in place. Refuses to step on non-finite gradients."""
    if len(grads.dw) != len(net.layers):
        raise ConfigError("gradient set does not match network depth")
    for k, layer in enumerate(net.layers):
        if grads.dw[k].shape != layer.w.shape or grads.db[k].shape != layer.b.shape:
            raise ConfigError(f"gradient shapes do not match layer {k}")
    if not grads.is_finite():
        raise NumericalError("non-finite gradient entries, step refused")
    state.t += 1
    if state.algorithm == "sgd":
        for k, layer in enumerate(net.layers):
            layer.w -= state.lr * grads.dw[k]
            layer.b -= state.lr * grads.db[k]
        return
    b1, b2 = state.beta1, state.beta2
    c1 = 1.0 - b1 ** state.t
    c2 = 1.0 - b2 ** state.t
    for k, layer in enumerate(net.layers):
        for p, g, m, v in ((layer.w, grads.dw[k], state.m.dw[k], state.v.dw[k]),
                           (layer.b, grads.db[k], state.m.db[k], state.v.db[k])):
            m *= b1
            m += (1.0 - b1) * g
            v *= b2
            v += (1.0 - b2) * g * g
            p -= state.lr * (m / c1) / (np.sqrt(v / c2) + state.eps)


def finite_diff_grad(f, p: np.ndarray, h: float = 1e-5) -> np.ndarray:
    """Central finite-difference gradient of a scalar function of a vector."""
    p = np.asarray(p, dtype=np.float64)
    g = np.zeros_like(p)
    for k in range(p.size):
        step = np.zeros_like(p)
        step[k] = h
        g[k] = (f(p + step) - f(p - step)) / (2.0 * h)
    if not np.isfinite(g).all():
        raise NumericalError("non-finite finite-difference gradient")
    return g


def net_to_dict(net: DenseNet) -> dict:
    return {
        "format": CHECKPOINT_FORMAT,
        "dims": list(net.dims),
        "activations": [l.activation for l in net.layers],
        "layers": [{"w": l.w.ravel().tolist(), "b": l.b.tolist()} for l in net.layers],
    }


def net_from_dict(d: dict) -> DenseNet:
    if d.get("format") != CHECKPOINT_FORMAT:
        raise DataError(f"not a network checkpoint (format {d.get('format')!r})")
    dims = d["dims"]
    layers = []
    for k, (act, blob) in enumerate(zip(d["activations"], d["layers"])):
        shape = (dims[k + 1], dims[k])
        w = np.asarray(blob["w"], dtype=np.float64).reshape(shape)
        b = np.asarray(blob["b"], dtype=np.float64)
        layers.append(Layer(w, b, act))
    return DenseNet(layers)


def save_net(net: DenseNet, path: str) -> None:
    with open(path, "w") as fh:
        json.dump(net_to_dict(net), fh)


def load_net(path: str) -> DenseNet:
    with open(path) as fh:
        return net_from_dict(json.load(fh))
