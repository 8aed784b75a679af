"""Scalar reverse-mode tape with nested (reverse-over-reverse) derivatives.

A :class:`Tape` owns an append-only node store; a :class:`DiffValue` is a
handle ``(tape, index)``. Calling :meth:`Tape.grad` with
``create_graph=True`` records the reverse sweep on the same tape, so the
returned derivatives are themselves differentiable. Each such sweep bumps
the generation of the nodes it creates by one.

The node store lives in a compiled core when the extension is built; set
``SAPINN_PURE_PYTHON=1`` to force the pure-Python core.
"""

import math
import os
from numbers import Real

from ..errors import ContractError, DomainError, StructuralError
from . import _ops
from . import _tape_py

if os.environ.get("SAPINN_PURE_PYTHON"):
    _core_module = _tape_py
else:
    try:
        from . import _tape_core as _core_module
    except ImportError:
        _core_module = _tape_py

BACKEND = _core_module.BACKEND
BACKENDS = {"python": _tape_py.TapeCore}
if BACKEND == "cython":
    BACKENDS["cython"] = _core_module.TapeCore


class Tape:
    """Append-only scalar node store.

    Parameters
    ----------
    backend : {"python", "cython"}, optional
        Core implementation. Defaults to the one selected at import.
    """

    def __init__(self, backend=None):
        backend = backend or BACKEND
        try:
            self._core = BACKENDS[backend]()
        except KeyError:
            raise DomainError(f"tape backend {backend!r} is not available") from None
        self.backend = backend
        self._adjoints = None

    def __len__(self):
        return len(self._core)

    def clear(self):
        """Drop every node; handles created before are invalidated."""
        self._core.clear()
        self._adjoints = None

    def variable(self, value, generation=0):
        return DiffValue(self, self._core.leaf(float(value), generation))

    def constant(self, value):
        return DiffValue(self, self._core.const(float(value)))

    def lift(self, x):
        if isinstance(x, DiffValue):
            if x.tape is not self:
                raise StructuralError("DiffValue belongs to a different tape")
            return x
        if isinstance(x, Real):
            return self.constant(x)
        raise StructuralError(f"cannot place {type(x).__name__} on a tape")

    def record(self, op, *args, exponent=None):
        """Record one elementary operation and return its output node.

        ``op`` is one of add, sub, mul, div, pow, tanh, sin, cos, neg. ``pow``
        takes a constant real exponent.
        """
        code = _ops.BY_NAME.get(op)
        if code is None:
            raise DomainError(f"unknown elementary operation {op!r}")
        arity = 2 if code in _ops.BINARY else 1
        if code == _ops.POW:
            if len(args) == 2 and exponent is None:
                args, exponent = args[:1], args[1]
            if isinstance(exponent, DiffValue) or exponent is None:
                raise DomainError("pow needs a constant real exponent")
        if len(args) != arity:
            raise StructuralError(f"{op} takes {arity} argument(s), got {len(args)}")
        nodes = [self.lift(a) for a in args]
        b = nodes[1].index if arity == 2 else -1
        c = float(exponent) if code == _ops.POW else 0.0
        return DiffValue(self, self._core.record(code, nodes[0].index, b, c))

    def backward(self, root):
        """Numeric reverse sweep from ``root``.

        Returns a :class:`Gradients` map; adjoints are also readable as
        ``node.adjoint`` until the next sweep.
        """
        root = self._check_root(root)
        self._adjoints = self._core.backward(root.index)
        return Gradients(self, self._adjoints)

    def grad(self, root, wrt, create_graph=False):
        """Derivatives of ``root`` with respect to each node in ``wrt``.

        With ``create_graph`` the results are nodes on this tape; otherwise
        they are floats.
        """
        root = self._check_root(root)
        wrt = [self.lift(w) for w in wrt]
        if not create_graph:
            adj = self._core.backward(root.index)
            return [adj[w.index] if w.index <= root.index else 0.0 for w in wrt]
        idx = self._core.backward_graph(root.index, [w.index for w in wrt])
        return [DiffValue(self, i) if i >= 0 else self.constant(0.0) for i in idx]

    def _check_root(self, root):
        if not isinstance(root, DiffValue):
            raise ContractError("backward needs a scalar DiffValue root")
        if root.tape is not self:
            raise StructuralError("root belongs to a different tape")
        return root

    def affine(self, weights, inputs, biases):
        """Record ``W x + b`` for a row-major flat list of weight nodes."""
        out = self._core.affine(
            [w.index for w in weights], [x.index for x in inputs], [b.index for b in biases]
        )
        return [DiffValue(self, i) for i in out]

    def tanh_many(self, nodes):
        return [DiffValue(self, i) for i in self._core.unary_many(_ops.TANH, [n.index for n in nodes])]


class Gradients:
    """Read-only mapping from nodes to adjoints after one reverse sweep."""

    def __init__(self, tape, adjoints):
        self._tape = tape
        self._adj = adjoints

    def __getitem__(self, node):
        if node.tape is not self._tape:
            raise StructuralError("node belongs to a different tape")
        if node.index >= len(self._adj):
            return 0.0
        return self._adj[node.index]

    def __len__(self):
        return len(self._adj)


class DiffValue:
    """Handle to one scalar node on a :class:`Tape`."""

    __slots__ = ("tape", "index")

    def __init__(self, tape, index):
        self.tape = tape
        self.index = index

    @property
    def value(self):
        return self.tape._core.value(self.index)

    @property
    def generation(self):
        return self.tape._core.generation(self.index)

    @property
    def adjoint(self):
        adj = self.tape._adjoints
        if adj is None:
            raise ContractError("no reverse sweep has been run on this tape")
        return adj[self.index] if self.index < len(adj) else 0.0

    @property
    def op(self):
        return _ops.NAMES[self.tape._core.node(self.index)[0]]

    def __repr__(self):
        return f"DiffValue({self.value!r}, op={self.op}, gen={self.generation})"

    def __float__(self):
        return float(self.value)

    def _bin(self, code, other, swap=False):
        tape = self.tape
        other = tape.lift(other)
        a, b = (other, self) if swap else (self, other)
        return DiffValue(tape, tape._core.record(code, a.index, b.index, 0.0))

    def __add__(self, other):
        return self._bin(_ops.ADD, other)

    def __radd__(self, other):
        return self._bin(_ops.ADD, other, swap=True)

    def __sub__(self, other):
        return self._bin(_ops.SUB, other)

    def __rsub__(self, other):
        return self._bin(_ops.SUB, other, swap=True)

    def __mul__(self, other):
        return self._bin(_ops.MUL, other)

    def __rmul__(self, other):
        return self._bin(_ops.MUL, other, swap=True)

    def __truediv__(self, other):
        return self._bin(_ops.DIV, other)

    def __rtruediv__(self, other):
        return self._bin(_ops.DIV, other, swap=True)

    def __pow__(self, exponent):
        if isinstance(exponent, DiffValue):
            raise DomainError("pow needs a constant real exponent")
        return DiffValue(self.tape, self.tape._core.record(_ops.POW, self.index, -1, float(exponent)))

    def __neg__(self):
        return DiffValue(self.tape, self.tape._core.record(_ops.NEG, self.index, -1, 0.0))

    def _unary(self, code):
        return DiffValue(self.tape, self.tape._core.record(code, self.index, -1, 0.0))

    def tanh(self):
        return self._unary(_ops.TANH)

    def sin(self):
        return self._unary(_ops.SIN)

    def cos(self):
        return self._unary(_ops.COS)


def derivative(f, inputs, order, tape=None):
    """Partial derivative of ``f`` at ``inputs`` along the listed input axes.

    ``order=[0]`` gives df/dx0, ``order=[0, 0]`` the second derivative.
    Inputs become fresh leaves on ``tape``; the result stays differentiable
    with respect to any other leaf ``f`` closes over (network weights).
    """
    tape = tape if tape is not None else Tape()
    n = len(inputs)
    for axis in order:
        if not 0 <= axis < n:
            raise DomainError(f"input index {axis} outside 0..{n - 1}")
    xs = [tape.variable(float(v)) for v in inputs]
    y = f(*xs)
    y = tape.lift(y)
    for axis in order:
        (y,) = tape.grad(y, [xs[axis]], create_graph=True)
    return y


def tanh(x):
    return x.tanh() if hasattr(x, "tanh") else math.tanh(x)


def sin(x):
    return x.sin() if hasattr(x, "sin") else math.sin(x)


def cos(x):
    return x.cos() if hasattr(x, "cos") else math.cos(x)
