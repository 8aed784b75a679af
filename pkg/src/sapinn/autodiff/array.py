"""Array-valued reverse-mode tape for batched PINN evaluation.

Same design as the scalar tape: nodes are appended in evaluation order,
the reverse sweep walks them in strict reverse insertion order, and with
``create_graph=True`` the sweep is itself recorded so derivatives can be
differentiated again. Every node holds a float64 array with one row per
point, which keeps the Python overhead per training step to a few hundred
node records while BLAS does the arithmetic.

Beyond the nine elementwise operations the tape knows the structural ops
a dense network needs: ``matmul``, ``transpose``, reductions, and column
or row slicing with their scatter adjoints. Broadcasting is limited to
what a bias row or a scalar constant needs.
"""

import numpy as np

from ..errors import ContractError, StructuralError

_F64 = np.float64


class ArrayTape:
    """Append-only store of :class:`Node` objects."""

    def __init__(self):
        self.nodes = []
        self._min_gen = 0

    def __len__(self):
        return len(self.nodes)

    def clear(self):
        self.nodes.clear()
        self._min_gen = 0

    def leaf(self, value, generation=0):
        return self._push("leaf", np.asarray(value, dtype=_F64), (), None, generation)

    def const(self, value):
        return self._push("const", np.asarray(value, dtype=_F64), (), None, self._min_gen)

    def lift(self, x):
        if isinstance(x, Node):
            if x.tape is not self:
                raise StructuralError("node belongs to a different tape")
            return x
        return self.const(x)

    def _push(self, op, value, parents, aux, generation):
        node = Node(self, len(self.nodes), op, value, parents, aux, generation)
        self.nodes.append(node)
        return node

    def record(self, op, parents, aux=None):
        parents = tuple(self.lift(p) for p in parents)
        value = _FORWARD[op](*[p.value for p in parents], aux)
        gen = self._min_gen
        for p in parents:
            if p.generation > gen:
                gen = p.generation
        return self._push(op, value, parents, aux, gen)

    def grad(self, root, wrt, create_graph=False, seed=None):
        """Vector-Jacobian product of ``root`` against each node in ``wrt``.

        ``seed`` defaults to ones shaped like ``root``; for a scalar root
        this is the plain gradient. Leaves ``root`` does not depend on get
        zero adjoints.
        """
        if not isinstance(root, Node):
            raise ContractError("reverse sweep needs a Node root")
        if root.tape is not self:
            raise StructuralError("root belongs to a different tape")
        wrt = [self.lift(w) for w in wrt]
        nodes = self.nodes
        top = root.index
        dep = bytearray(top + 1)
        lo = top + 1
        for w in wrt:
            if w.index <= top:
                dep[w.index] = 1
                lo = min(lo, w.index)
        for i in range(lo, top + 1):
            if dep[i]:
                continue
            for p in nodes[i].parents:
                if dep[p.index]:
                    dep[i] = 1
                    break

        if not dep[top]:
            return [self._zero(w, create_graph) for w in wrt]

        keep = {w.index for w in wrt}
        saved = self._min_gen
        if create_graph:
            self._min_gen = max(saved, root.generation + 1)
        try:
            if seed is None:
                seed = np.ones_like(root.value)
            if create_graph:
                seed = self.lift(seed)
            else:
                seed = seed.value if isinstance(seed, Node) else np.asarray(seed, dtype=_F64)
            adj = {top: seed}
            for i in range(top, lo - 1, -1):
                if not dep[i] or i not in adj:
                    continue
                node = nodes[i]
                if not node.parents:
                    continue
                g = adj[i] if i in keep else adj.pop(i)
                needs = [bool(dep[p.index]) for p in node.parents]
                if create_graph:
                    contribs = _VJP[node.op](g, node, node.parents, node.aux, needs)
                else:
                    contribs = _VJP[node.op](
                        g, node.value, [p.value for p in node.parents], node.aux, needs
                    )
                for p, c, need in zip(node.parents, contribs, needs):
                    if not need or c is None:
                        continue
                    j = p.index
                    prev = adj.get(j)
                    adj[j] = c if prev is None else prev + c
        finally:
            self._min_gen = saved
        out = []
        for w in wrt:
            g = adj.get(w.index)
            if g is None:
                out.append(self._zero(w, create_graph))
            elif create_graph:
                out.append(self.lift(g))
            else:
                out.append(g.value if isinstance(g, Node) else g)
        return out

    def _zero(self, w, create_graph):
        z = np.zeros_like(w.value)
        return self.const(z) if create_graph else z


class Node:
    """One array value on an :class:`ArrayTape`."""

    __slots__ = ("tape", "index", "op", "value", "parents", "aux", "generation")

    __array_priority__ = 100

    def __init__(self, tape, index, op, value, parents, aux, generation):
        self.tape = tape
        self.index = index
        self.op = op
        self.value = value
        self.parents = parents
        self.aux = aux
        self.generation = generation

    def __repr__(self):
        return f"Node(op={self.op}, shape={self.value.shape}, gen={self.generation})"

    @property
    def shape(self):
        return self.value.shape

    @property
    def T(self):
        if self.op == "transpose":
            return self.parents[0]
        return self.tape.record("transpose", (self,))

    def __add__(self, other):
        return self.tape.record("add", (self, other))

    def __radd__(self, other):
        return self.tape.record("add", (other, self))

    def __sub__(self, other):
        return self.tape.record("sub", (self, other))

    def __rsub__(self, other):
        return self.tape.record("sub", (other, self))

    def __mul__(self, other):
        return self.tape.record("mul", (self, other))

    def __rmul__(self, other):
        return self.tape.record("mul", (other, self))

    def __truediv__(self, other):
        return self.tape.record("div", (self, other))

    def __rtruediv__(self, other):
        return self.tape.record("div", (other, self))

    def __pow__(self, exponent):
        if isinstance(exponent, Node):
            raise ContractError("pow needs a constant exponent")
        return self.tape.record("pow", (self,), float(exponent))

    def __neg__(self):
        return self.tape.record("neg", (self,))

    def __matmul__(self, other):
        return self.tape.record("matmul", (self, other))

    def __rmatmul__(self, other):
        return self.tape.record("matmul", (other, self))

    def tanh(self):
        return self.tape.record("tanh", (self,))

    def sin(self):
        return self.tape.record("sin", (self,))

    def cos(self):
        return self.tape.record("cos", (self,))

    def sum(self):
        return self.tape.record("sum", (self,))

    def col(self, j):
        return self.tape.record("col", (self,), j)

    def rows(self, start, stop):
        return self.tape.record("rows", (self,), (start, stop))


# generic helpers: operate on Node (recording) or on plain arrays


def tanh(x):
    return x.tanh() if isinstance(x, Node) else np.tanh(x)


def sin(x):
    return x.sin() if isinstance(x, Node) else np.sin(x)


def cos(x):
    return x.cos() if isinstance(x, Node) else np.cos(x)


def total(x):
    return x.sum() if isinstance(x, Node) else np.sum(x)


def col(x, j):
    return x.col(j) if isinstance(x, Node) else x[:, j : j + 1]


def rows(x, start, stop):
    return x.rows(start, stop) if isinstance(x, Node) else x[start:stop]


def dtanh(g, t):
    """``g * (1 - t**2)``: the tanh adjoint given the tanh output ``t``."""
    if isinstance(g, Node) or isinstance(t, Node):
        tape = g.tape if isinstance(g, Node) else t.tape
        return tape.record("dtanh", (g, t))
    return _dtanh_np(g, t, None)


def prod3(a, b, c, scale=1.0):
    """``scale * a * b * c`` as one node."""
    for x in (a, b, c):
        if isinstance(x, Node):
            return x.tape.record("prod3", (a, b, c), float(scale))
    return _prod3_np(a, b, c, scale)


def _dtanh_np(g, t, _):
    out = np.multiply(t, t)
    np.subtract(1.0, out, out=out)
    out *= g
    return out


def _prod3_np(a, b, c, scale):
    out = np.multiply(a, b)
    out *= c
    if scale != 1.0:
        out *= scale
    return out


def _sum_to_np(g, shape):
    if g.shape == shape:
        return g
    lead = g.ndim - len(shape)
    axes = tuple(range(lead)) + tuple(
        k + lead for k, s in enumerate(shape) if s == 1 and g.shape[k + lead] != 1
    )
    return np.sum(g, axis=axes, keepdims=True).reshape(shape)


def sum_to(g, shape):
    if g.shape == shape:
        return g
    if isinstance(g, Node):
        return g.tape.record("sum_to", (g,), shape)
    return _sum_to_np(g, shape)


def broadcast_to(g, shape):
    if g.shape == shape:
        return g
    if isinstance(g, Node):
        return g.tape.record("broadcast_to", (g,), shape)
    return np.broadcast_to(g, shape)


def put_col(g, j, ncols):
    if isinstance(g, Node):
        return g.tape.record("put_col", (g,), (j, ncols))
    return _put_col_np(g, (j, ncols))


def put_rows(g, start, stop, nrows):
    if isinstance(g, Node):
        return g.tape.record("put_rows", (g,), (start, stop, nrows))
    return _put_rows_np(g, (start, stop, nrows))


def _put_col_np(g, aux):
    j, ncols = aux
    out = np.zeros((g.shape[0], ncols), dtype=_F64)
    out[:, j] = g[:, 0]
    return out


def _put_rows_np(g, aux):
    start, stop, nrows = aux
    out = np.zeros((nrows,) + g.shape[1:], dtype=_F64)
    out[start:stop] = g
    return out


_FORWARD = {
    "add": lambda a, b, _: a + b,
    "sub": lambda a, b, _: a - b,
    "mul": lambda a, b, _: a * b,
    "div": lambda a, b, _: a / b,
    "pow": lambda a, c: np.power(a, c),
    "tanh": lambda a, _: np.tanh(a),
    "dtanh": _dtanh_np,
    "prod3": _prod3_np,
    "sin": lambda a, _: np.sin(a),
    "cos": lambda a, _: np.cos(a),
    "neg": lambda a, _: -a,
    "matmul": lambda a, b, _: a @ b,
    "transpose": lambda a, _: a.T,
    "sum": lambda a, _: np.sum(a),
    "sum_to": _sum_to_np,
    "broadcast_to": lambda a, shape: np.broadcast_to(a, shape),
    "col": lambda a, j: a[:, j : j + 1],
    "rows": lambda a, se: a[se[0] : se[1]],
    "put_col": _put_col_np,
    "put_rows": _put_rows_np,
}


# vjp rules: (g, out, inputs, aux, needs) -> per-input contribution or None.
# In recording mode g/out/inputs are Nodes, otherwise arrays.


def _vjp_add(g, out, ins, aux, needs):
    a, b = ins
    return (
        sum_to(g, a.shape) if needs[0] else None,
        sum_to(g, b.shape) if needs[1] else None,
    )


def _vjp_sub(g, out, ins, aux, needs):
    a, b = ins
    return (
        sum_to(g, a.shape) if needs[0] else None,
        sum_to(-g, b.shape) if needs[1] else None,
    )


def _vjp_mul(g, out, ins, aux, needs):
    a, b = ins
    return (
        sum_to(g * b, a.shape) if needs[0] else None,
        sum_to(g * a, b.shape) if needs[1] else None,
    )


def _vjp_div(g, out, ins, aux, needs):
    a, b = ins
    return (
        sum_to(g / b, a.shape) if needs[0] else None,
        sum_to(-((g * out) / b), b.shape) if needs[1] else None,
    )


def _vjp_pow(g, out, ins, c, needs):
    (a,) = ins
    return (g * (c * a ** (c - 1.0)),)


def _vjp_tanh(g, out, ins, aux, needs):
    return (dtanh(g, out),)


def _vjp_dtanh(g, out, ins, aux, needs):
    # y = a * (1 - t^2): dy/da = 1 - t^2, dy/dt = -2 a t
    a, t = ins
    return (
        dtanh(g, t) if needs[0] else None,
        prod3(g, a, t, -2.0) if needs[1] else None,
    )


def _vjp_prod3(g, out, ins, scale, needs):
    a, b, c = ins
    return (
        prod3(g, b, c, scale) if needs[0] else None,
        prod3(g, a, c, scale) if needs[1] else None,
        prod3(g, a, b, scale) if needs[2] else None,
    )


def _vjp_sin(g, out, ins, aux, needs):
    return (g * cos(ins[0]),)


def _vjp_cos(g, out, ins, aux, needs):
    return (-(g * sin(ins[0])),)


def _vjp_neg(g, out, ins, aux, needs):
    return (-g,)


def _vjp_matmul(g, out, ins, aux, needs):
    a, b = ins
    return (
        g @ b.T if needs[0] else None,
        a.T @ g if needs[1] else None,
    )


def _vjp_transpose(g, out, ins, aux, needs):
    return (g.T,)


def _vjp_sum(g, out, ins, aux, needs):
    return (broadcast_to(g, ins[0].shape),)


def _vjp_sum_to(g, out, ins, shape, needs):
    return (broadcast_to(g, ins[0].shape),)


def _vjp_broadcast_to(g, out, ins, shape, needs):
    return (sum_to(g, ins[0].shape),)


def _vjp_col(g, out, ins, j, needs):
    return (put_col(g, j, ins[0].shape[1]),)


def _vjp_rows(g, out, ins, se, needs):
    return (put_rows(g, se[0], se[1], ins[0].shape[0]),)


def _vjp_put_col(g, out, ins, aux, needs):
    return (col(g, aux[0]),)


def _vjp_put_rows(g, out, ins, aux, needs):
    return (rows(g, aux[0], aux[1]),)


_VJP = {
    "add": _vjp_add,
    "sub": _vjp_sub,
    "mul": _vjp_mul,
    "div": _vjp_div,
    "pow": _vjp_pow,
    "tanh": _vjp_tanh,
    "dtanh": _vjp_dtanh,
    "prod3": _vjp_prod3,
    "sin": _vjp_sin,
    "cos": _vjp_cos,
    "neg": _vjp_neg,
    "matmul": _vjp_matmul,
    "transpose": _vjp_transpose,
    "sum": _vjp_sum,
    "sum_to": _vjp_sum_to,
    "broadcast_to": _vjp_broadcast_to,
    "col": _vjp_col,
    "rows": _vjp_rows,
    "put_col": _vjp_put_col,
    "put_rows": _vjp_put_rows,
}
