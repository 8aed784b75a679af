"""Fully connected approximation network u(x, t; w)."""

from dataclasses import dataclass, field

import numpy as np

from .autodiff import array as ad
from .autodiff.scalar import Tape
from .errors import DomainError, StructuralError

ACTIVATIONS = ("tanh", "sin")
MODEL_MAGIC = "sapinn-model"
MODEL_VERSION = 1


@dataclass(frozen=True)
class ArchitectureSpec:
    layer_sizes: tuple
    activation: str = "tanh"
    init_seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "layer_sizes", tuple(int(n) for n in self.layer_sizes))
        if len(self.layer_sizes) < 2:
            raise DomainError("an architecture needs at least an input and an output layer")
        if any(n <= 0 for n in self.layer_sizes):
            raise DomainError(f"layer sizes must be positive, got {self.layer_sizes}")
        if self.activation not in ACTIVATIONS:
            raise DomainError(f"activation must be one of {ACTIVATIONS}")


@dataclass
class NetworkParams:
    """Weights ``(out, in)`` and biases ``(out,)`` for each dense layer."""

    weights: list
    biases: list
    activation: str = "tanh"
    layer_sizes: tuple = field(init=False)

    def __post_init__(self):
        if len(self.weights) != len(self.biases) or not self.weights:
            raise StructuralError("need one bias vector per weight matrix")
        sizes = [self.weights[0].shape[1]]
        for W, b in zip(self.weights, self.biases):
            if W.ndim != 2 or b.shape != (W.shape[0],) or W.shape[1] != sizes[-1]:
                raise StructuralError("layer shapes do not chain")
            sizes.append(W.shape[0])
        if sizes[-1] != 1:
            raise StructuralError("the output layer must have width 1")
        self.layer_sizes = tuple(sizes)

    @property
    def n_params(self):
        return sum(W.size + b.size for W, b in zip(self.weights, self.biases))

    def copy(self):
        return NetworkParams(
            [W.copy() for W in self.weights], [b.copy() for b in self.biases], self.activation
        )

    def to_vector(self):
        parts = []
        for W, b in zip(self.weights, self.biases):
            parts.append(W.ravel())
            parts.append(b)
        return np.concatenate(parts)

    def set_vector(self, theta):
        theta = np.asarray(theta, dtype=np.float64)
        if theta.shape != (self.n_params,):
            raise StructuralError(f"expected {self.n_params} parameters, got {theta.shape}")
        k = 0
        for W, b in zip(self.weights, self.biases):
            W[...] = theta[k : k + W.size].reshape(W.shape)
            k += W.size
            b[...] = theta[k : k + b.size]
            k += b.size

    def arrays(self):
        """Parameter arrays in flat-vector order (W1, b1, W2, b2, ...)."""
        out = []
        for W, b in zip(self.weights, self.biases):
            out.extend((W, b))
        return out


def init(spec):
    """Glorot-uniform weights and zero biases, reproducible from the seed."""
    if not isinstance(spec, ArchitectureSpec):
        spec = ArchitectureSpec(*spec)
    rng = np.random.default_rng(spec.init_seed)
    weights, biases = [], []
    sizes = spec.layer_sizes
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        bound = np.sqrt(6.0 / (fan_in + fan_out))
        weights.append(rng.uniform(-bound, bound, size=(fan_out, fan_in)))
        biases.append(np.zeros(fan_out))
    return NetworkParams(weights, biases, spec.activation)


def zeros_like_spec(layer_sizes, activation="tanh"):
    sizes = list(layer_sizes)
    return NetworkParams(
        [np.zeros((o, i)) for i, o in zip(sizes[:-1], sizes[1:])],
        [np.zeros(o) for o in sizes[1:]],
        activation,
    )


def _act(name, x):
    return ad.tanh(x) if name == "tanh" else ad.sin(x)


def predict(params, X, chunk=65536):
    """Plain numpy forward pass, ``X`` of shape ``(n, d)`` -> ``(n,)``.

    Large batches are processed ``chunk`` rows at a time; rows are
    independent, so the result does not depend on the chunk size.
    """
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != params.layer_sizes[0]:
        raise DomainError(f"inputs must have shape (n, {params.layer_sizes[0]})")
    out = np.empty(len(X))
    last = len(params.weights) - 1
    for start in range(0, len(X), chunk):
        h = X[start : start + chunk]
        for k, (W, b) in enumerate(zip(params.weights, params.biases)):
            h = h @ W.T + b
            if k < last:
                h = _act(params.activation, h)
        out[start : start + chunk] = h[:, 0]
    return out


def param_leaves(tape, params):
    """Put the parameters on an array tape; biases become ``(1, out)`` rows."""
    nodes = []
    for W, b in zip(params.weights, params.biases):
        nodes.append(tape.leaf(W))
        nodes.append(tape.leaf(b.reshape(1, -1)))
    return nodes


def forward_batch(param_nodes, X, activation="tanh"):
    """Network output ``(n, 1)`` for a batch node ``X`` of shape ``(n, d)``."""
    h = X
    n_layers = len(param_nodes) // 2
    for k in range(n_layers):
        W, b = param_nodes[2 * k], param_nodes[2 * k + 1]
        h = h @ W.T + b
        if k < n_layers - 1:
            h = _act(activation, h)
    return h


class ScalarNetwork:
    """Parameters lifted onto a scalar tape, callable on DiffValue inputs."""

    def __init__(self, params, tape=None):
        self.params = params
        self.tape = tape if tape is not None else Tape()
        self.weights = []
        self.biases = []
        for W, b in zip(params.weights, params.biases):
            self.weights.append([self.tape.variable(v) for v in W.ravel()])
            self.biases.append([self.tape.variable(v) for v in b])

    def leaves(self):
        out = []
        for W, b in zip(self.weights, self.biases):
            out.extend(W)
            out.extend(b)
        return out

    def __call__(self, *inputs):
        tape = self.tape
        if len(inputs) != self.params.layer_sizes[0]:
            raise DomainError(
                f"network takes {self.params.layer_sizes[0]} inputs, got {len(inputs)}"
            )
        h = [tape.lift(x) for x in inputs]
        last = len(self.weights) - 1
        for k, (W, b) in enumerate(zip(self.weights, self.biases)):
            h = tape.affine(W, h, b)
            if k < last:
                if self.params.activation == "tanh":
                    h = tape.tanh_many(h)
                else:
                    h = [v.sin() for v in h]
        return h[0]


def forward(params, point, tape=None):
    """Scalar network output at one point, as a DiffValue."""
    if isinstance(params, ScalarNetwork):
        return params(*point)
    return ScalarNetwork(params, tape)(*point)


def save_model(params, path):
    """Versioned text format: header lines, then one value per line."""
    with open(path, "w") as fh:
        fh.write(f"{MODEL_MAGIC} {MODEL_VERSION}\n")
        fh.write(f"activation {params.activation}\n")
        fh.write("layer_sizes " + " ".join(str(n) for n in params.layer_sizes) + "\n")
        for k, (W, b) in enumerate(zip(params.weights, params.biases)):
            fh.write(f"weights {k} {W.shape[0]} {W.shape[1]}\n")
            fh.writelines(f"{v!r}\n" for v in W.ravel().tolist())
            fh.write(f"bias {k} {b.shape[0]}\n")
            fh.writelines(f"{v!r}\n" for v in b.tolist())


def load_model(path):
    with open(path) as fh:
        lines = fh.read().split("\n")
    head = lines[0].split()
    if len(head) != 2 or head[0] != MODEL_MAGIC:
        raise StructuralError(f"{path} is not a model file")
    if int(head[1]) != MODEL_VERSION:
        raise StructuralError(f"unsupported model file version {head[1]}")
    activation = lines[1].split()[1]
    sizes = [int(s) for s in lines[2].split()[1:]]
    pos = 3
    weights, biases = [], []
    for k, (n_in, n_out) in enumerate(zip(sizes[:-1], sizes[1:])):
        tag = lines[pos].split()
        if tag[:2] != ["weights", str(k)] or [int(t) for t in tag[2:]] != [n_out, n_in]:
            raise StructuralError(f"malformed weights header at line {pos + 1}")
        pos += 1
        W = np.array([float(v) for v in lines[pos : pos + n_out * n_in]]).reshape(n_out, n_in)
        pos += n_out * n_in
        tag = lines[pos].split()
        if tag[:2] != ["bias", str(k)] or int(tag[2]) != n_out:
            raise StructuralError(f"malformed bias header at line {pos + 1}")
        pos += 1
        b = np.array([float(v) for v in lines[pos : pos + n_out]])
        pos += n_out
        weights.append(W)
        biases.append(b)
    return NetworkParams(weights, biases, activation)


__all__ = [
    "ArchitectureSpec",
    "NetworkParams",
    "ScalarNetwork",
    "forward",
    "forward_batch",
    "init",
    "load_model",
    "param_leaves",
    "predict",
    "save_model",
]
