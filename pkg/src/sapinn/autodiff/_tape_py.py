"""Pure-Python scalar tape core.

Node storage is a set of parallel lists indexed by insertion order, so the
store is topologically sorted by construction. Used when the compiled
``_tape_core`` extension is unavailable or ``SAPINN_PURE_PYTHON`` is set.
"""

import math

from ._ops import ADD, BINARY, CONST, COS, DIV, LEAF, MUL, NEG, POW, SIN, SUB, TANH

BACKEND = "python"


def _div(a, b):
    try:
        return a / b
    except ZeroDivisionError:
        if a == 0.0 or math.isnan(a):
            return math.nan
        return math.copysign(math.inf, a) * math.copysign(1.0, b)


def _pow(a, c):
    try:
        return math.pow(a, c)
    except ValueError:
        return math.nan
    except OverflowError:
        return math.inf


def _apply(op, x, y, c):
    if op == ADD:
        return x + y
    if op == SUB:
        return x - y
    if op == MUL:
        return x * y
    if op == DIV:
        return _div(x, y)
    if op == POW:
        return _pow(x, c)
    if op == TANH:
        return math.tanh(x)
    if op == SIN:
        return math.sin(x)
    if op == COS:
        return math.cos(x)
    if op == NEG:
        return -x
    raise ValueError(f"unknown op code {op}")


class TapeCore:
    def __init__(self):
        self.clear()

    def clear(self):
        self._op = []
        self._a = []
        self._b = []
        self._c = []
        self._val = []
        self._gen = []
        self._min_gen = 0

    def __len__(self):
        return len(self._val)

    def _push(self, op, a, b, c, value, gen):
        self._op.append(op)
        self._a.append(a)
        self._b.append(b)
        self._c.append(c)
        self._val.append(value)
        self._gen.append(gen)
        return len(self._val) - 1

    def leaf(self, value, generation=0):
        return self._push(LEAF, -1, -1, 0.0, float(value), int(generation))

    def const(self, value):
        return self._push(CONST, -1, -1, 0.0, float(value), self._min_gen)

    def record(self, op, a, b=-1, c=0.0):
        n = len(self._val)
        if not 0 <= a < n or (op in BINARY and not 0 <= b < n):
            raise IndexError("operand index outside the tape")
        if op not in BINARY:
            b = -1
        gen = self._gen[a]
        if b >= 0 and self._gen[b] > gen:
            gen = self._gen[b]
        if self._min_gen > gen:
            gen = self._min_gen
        y = self._val[b] if b >= 0 else 0.0
        return self._push(op, a, b, float(c), _apply(op, self._val[a], y, c), gen)

    def affine(self, weights, inputs, biases):
        """Record ``W @ x + b`` as individual mul/add nodes.

        ``weights`` is a row-major flat list of node indices (len(biases)
        rows by len(inputs) columns).
        """
        n_in = len(inputs)
        out = []
        for row, bias in enumerate(biases):
            base = row * n_in
            acc = bias
            for col in range(n_in):
                prod = self.record(MUL, weights[base + col], inputs[col])
                acc = self.record(ADD, acc, prod)
            out.append(acc)
        return out

    def unary_many(self, op, indices, c=0.0):
        return [self.record(op, i, -1, c) for i in indices]

    def value(self, i):
        return self._val[i]

    def values(self):
        return list(self._val)

    def generation(self, i):
        return self._gen[i]

    def node(self, i):
        return self._op[i], self._a[i], self._b[i], self._c[i]

    def backward(self, root):
        """Numeric reverse sweep; returns adjoints of nodes ``0..root``."""
        op, pa, pb, pc, val = self._op, self._a, self._b, self._c, self._val
        adj = [0.0] * (root + 1)
        reached = [False] * (root + 1)
        adj[root] = 1.0
        reached[root] = True
        for i in range(root, -1, -1):
            if not reached[i]:
                continue
            o = op[i]
            if o == LEAF or o == CONST:
                continue
            g = adj[i]
            a = pa[i]
            reached[a] = True
            if o == ADD:
                b = pb[i]
                reached[b] = True
                adj[a] += g
                adj[b] += g
            elif o == SUB:
                b = pb[i]
                reached[b] = True
                adj[a] += g
                adj[b] += -g
            elif o == MUL:
                b = pb[i]
                reached[b] = True
                adj[a] += g * val[b]
                adj[b] += g * val[a]
            elif o == DIV:
                b = pb[i]
                reached[b] = True
                adj[a] += _div(g, val[b])
                adj[b] += -_div(g * val[i], val[b])
            elif o == POW:
                adj[a] += g * (pc[i] * _pow(val[a], pc[i] - 1.0))
            elif o == TANH:
                adj[a] += g * (1.0 - val[i] * val[i])
            elif o == SIN:
                adj[a] += g * math.cos(val[a])
            elif o == COS:
                adj[a] += -(g * math.sin(val[a]))
            elif o == NEG:
                adj[a] += -g
        return adj

    def backward_graph(self, root, wrt):
        """Reverse sweep recorded on this tape.

        Returns, for each index in ``wrt``, the node holding d(root)/d(wrt)
        or -1 when ``root`` does not depend on it. New nodes carry
        generation ``generation(root) + 1`` or more.
        """
        op, pa, pb, pc = self._op, self._a, self._b, self._c
        dep = [False] * (root + 1)
        for w in wrt:
            if 0 <= w <= root:
                dep[w] = True
        for i in range(root + 1):
            o = op[i]
            if o == LEAF or o == CONST:
                continue
            b = pb[i]
            if dep[pa[i]] or (b >= 0 and dep[b]):
                dep[i] = True
        grads = [-1] * (root + 1)
        if not dep[root]:
            return [-1] * len(wrt)
        saved_min = self._min_gen
        self._min_gen = max(saved_min, self._gen[root] + 1)
        rec = self.record

        def acc(p, v):
            if grads[p] < 0:
                grads[p] = v
            else:
                grads[p] = rec(ADD, grads[p], v)

        try:
            grads[root] = self.const(1.0)
            for i in range(root, -1, -1):
                gi = grads[i]
                if gi < 0 or not dep[i]:
                    continue
                o = op[i]
                if o == LEAF or o == CONST:
                    continue
                a = pa[i]
                b = pb[i]
                if o == ADD:
                    if dep[a]:
                        acc(a, gi)
                    if dep[b]:
                        acc(b, gi)
                elif o == SUB:
                    if dep[a]:
                        acc(a, gi)
                    if dep[b]:
                        acc(b, rec(NEG, gi))
                elif o == MUL:
                    if dep[a]:
                        acc(a, rec(MUL, gi, b))
                    if dep[b]:
                        acc(b, rec(MUL, gi, a))
                elif o == DIV:
                    if dep[a]:
                        acc(a, rec(DIV, gi, b))
                    if dep[b]:
                        acc(b, rec(NEG, rec(DIV, rec(MUL, gi, i), b)))
                elif o == POW:
                    c = pc[i]
                    d = rec(MUL, self.const(c), rec(POW, a, -1, c - 1.0))
                    acc(a, rec(MUL, gi, d))
                elif o == TANH:
                    d = rec(SUB, self.const(1.0), rec(MUL, i, i))
                    acc(a, rec(MUL, gi, d))
                elif o == SIN:
                    acc(a, rec(MUL, gi, rec(COS, a)))
                elif o == COS:
                    acc(a, rec(NEG, rec(MUL, gi, rec(SIN, a))))
                elif o == NEG:
                    acc(a, rec(NEG, gi))
        finally:
            self._min_gen = saved_min
        return [grads[w] if 0 <= w <= root else -1 for w in wrt]
