# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled scalar tape core.

Mirrors ``_tape_py.TapeCore`` operation for operation so the two backends
produce bit-identical values and adjoints.
"""

from libc.math cimport cos, pow, sin, tanh
from libc.stdlib cimport free, malloc, realloc

BACKEND = "cython"

cdef enum:
    LEAF = 0
    CONST = 1
    ADD = 2
    SUB = 3
    MUL = 4
    DIV = 5
    POW = 6
    TANH = 7
    SIN = 8
    COS = 9
    NEG = 10

OP_CODES = {
    "LEAF": LEAF, "CONST": CONST, "ADD": ADD, "SUB": SUB, "MUL": MUL,
    "DIV": DIV, "POW": POW, "TANH": TANH, "SIN": SIN, "COS": COS, "NEG": NEG,
}


cdef inline bint is_binary(int op) nogil:
    return op == ADD or op == SUB or op == MUL or op == DIV


cdef class TapeCore:
    cdef int *_op
    cdef Py_ssize_t *_a
    cdef Py_ssize_t *_b
    cdef double *_c
    cdef double *_val
    cdef int *_gen
    cdef Py_ssize_t _n
    cdef Py_ssize_t _cap
    cdef int _min_gen

    def __cinit__(self):
        self._cap = 0
        self._n = 0
        self._min_gen = 0
        self._op = NULL
        self._a = NULL
        self._b = NULL
        self._c = NULL
        self._val = NULL
        self._gen = NULL
        self._grow(1024)

    def __dealloc__(self):
        free(self._op)
        free(self._a)
        free(self._b)
        free(self._c)
        free(self._val)
        free(self._gen)

    cdef void _grow(self, Py_ssize_t cap) except *:
        cdef void *p
        p = realloc(self._op, cap * sizeof(int))
        if p == NULL:
            raise MemoryError()
        self._op = <int *> p
        p = realloc(self._a, cap * sizeof(Py_ssize_t))
        if p == NULL:
            raise MemoryError()
        self._a = <Py_ssize_t *> p
        p = realloc(self._b, cap * sizeof(Py_ssize_t))
        if p == NULL:
            raise MemoryError()
        self._b = <Py_ssize_t *> p
        p = realloc(self._c, cap * sizeof(double))
        if p == NULL:
            raise MemoryError()
        self._c = <double *> p
        p = realloc(self._val, cap * sizeof(double))
        if p == NULL:
            raise MemoryError()
        self._val = <double *> p
        p = realloc(self._gen, cap * sizeof(int))
        if p == NULL:
            raise MemoryError()
        self._gen = <int *> p
        self._cap = cap

    def clear(self):
        self._n = 0
        self._min_gen = 0

    def __len__(self):
        return self._n

    cdef Py_ssize_t _push(self, int op, Py_ssize_t a, Py_ssize_t b, double c,
                          double value, int gen) except -1:
        if self._n == self._cap:
            self._grow(2 * self._cap)
        cdef Py_ssize_t i = self._n
        self._op[i] = op
        self._a[i] = a
        self._b[i] = b
        self._c[i] = c
        self._val[i] = value
        self._gen[i] = gen
        self._n = i + 1
        return i

    cdef Py_ssize_t _rec(self, int op, Py_ssize_t a, Py_ssize_t b, double c) except -1:
        cdef double x = self._val[a]
        cdef double y = 0.0
        cdef double v
        cdef int gen = self._gen[a]
        if b >= 0:
            y = self._val[b]
            if self._gen[b] > gen:
                gen = self._gen[b]
        if self._min_gen > gen:
            gen = self._min_gen
        if op == ADD:
            v = x + y
        elif op == SUB:
            v = x - y
        elif op == MUL:
            v = x * y
        elif op == DIV:
            v = x / y
        elif op == POW:
            v = pow(x, c)
        elif op == TANH:
            v = tanh(x)
        elif op == SIN:
            v = sin(x)
        elif op == COS:
            v = cos(x)
        elif op == NEG:
            v = -x
        else:
            raise ValueError(f"unknown op code {op}")
        return self._push(op, a, b, c, v, gen)

    cdef Py_ssize_t _const(self, double value) except -1:
        return self._push(CONST, -1, -1, 0.0, value, self._min_gen)

    def leaf(self, double value, int generation=0):
        return self._push(LEAF, -1, -1, 0.0, value, generation)

    def const(self, double value):
        return self._const(value)

    def record(self, int op, Py_ssize_t a, Py_ssize_t b=-1, double c=0.0):
        if a < 0 or a >= self._n or (is_binary(op) and (b < 0 or b >= self._n)):
            raise IndexError("operand index outside the tape")
        if not is_binary(op):
            b = -1
        return self._rec(op, a, b, c)

    def affine(self, weights, inputs, biases):
        cdef Py_ssize_t n_in = len(inputs)
        cdef Py_ssize_t n_out = len(biases)
        cdef Py_ssize_t row, col, acc, prod, base
        cdef long long[::1] w = _as_index_array(weights)
        cdef long long[::1] x = _as_index_array(inputs)
        cdef long long[::1] bias = _as_index_array(biases)
        if w.shape[0] != n_in * n_out:
            raise ValueError("weight count does not match inputs x biases")
        out = []
        for row in range(n_out):
            base = row * n_in
            acc = bias[row]
            for col in range(n_in):
                prod = self._rec(MUL, w[base + col], x[col], 0.0)
                acc = self._rec(ADD, acc, prod, 0.0)
            out.append(acc)
        return out

    def unary_many(self, int op, indices, double c=0.0):
        return [self._rec(op, i, -1, c) for i in indices]

    def value(self, Py_ssize_t i):
        if i < 0 or i >= self._n:
            raise IndexError(i)
        return self._val[i]

    def values(self):
        return [self._val[i] for i in range(self._n)]

    def generation(self, Py_ssize_t i):
        if i < 0 or i >= self._n:
            raise IndexError(i)
        return self._gen[i]

    def node(self, Py_ssize_t i):
        if i < 0 or i >= self._n:
            raise IndexError(i)
        return self._op[i], self._a[i], self._b[i], self._c[i]

    def backward(self, Py_ssize_t root):
        if root < 0 or root >= self._n:
            raise IndexError(root)
        cdef double *adj = <double *> malloc((root + 1) * sizeof(double))
        cdef char *reached = <char *> malloc((root + 1) * sizeof(char))
        cdef Py_ssize_t i, a, b
        cdef int o
        cdef double g
        if adj == NULL or reached == NULL:
            free(adj)
            free(reached)
            raise MemoryError()
        try:
            for i in range(root + 1):
                adj[i] = 0.0
                reached[i] = 0
            adj[root] = 1.0
            reached[root] = 1
            with nogil:
                for i in range(root, -1, -1):
                    if not reached[i]:
                        continue
                    o = self._op[i]
                    if o == LEAF or o == CONST:
                        continue
                    g = adj[i]
                    a = self._a[i]
                    b = self._b[i]
                    reached[a] = 1
                    if o == ADD:
                        reached[b] = 1
                        adj[a] += g
                        adj[b] += g
                    elif o == SUB:
                        reached[b] = 1
                        adj[a] += g
                        adj[b] += -g
                    elif o == MUL:
                        reached[b] = 1
                        adj[a] += g * self._val[b]
                        adj[b] += g * self._val[a]
                    elif o == DIV:
                        reached[b] = 1
                        adj[a] += g / self._val[b]
                        adj[b] += -((g * self._val[i]) / self._val[b])
                    elif o == POW:
                        adj[a] += g * (self._c[i] * pow(self._val[a], self._c[i] - 1.0))
                    elif o == TANH:
                        adj[a] += g * (1.0 - self._val[i] * self._val[i])
                    elif o == SIN:
                        adj[a] += g * cos(self._val[a])
                    elif o == COS:
                        adj[a] += -(g * sin(self._val[a]))
                    elif o == NEG:
                        adj[a] += -g
            return [adj[i] for i in range(root + 1)]
        finally:
            free(adj)
            free(reached)

    def backward_graph(self, Py_ssize_t root, wrt):
        if root < 0 or root >= self._n:
            raise IndexError(root)
        cdef long long[::1] targets = _as_index_array(wrt)
        cdef Py_ssize_t n = root + 1
        cdef Py_ssize_t i, a, b, gi, d, k, w
        cdef int o
        cdef double c
        cdef int saved_min = self._min_gen
        cdef char *dep = <char *> malloc(n * sizeof(char))
        cdef Py_ssize_t *grads = <Py_ssize_t *> malloc(n * sizeof(Py_ssize_t))
        if dep == NULL or grads == NULL:
            free(dep)
            free(grads)
            raise MemoryError()
        try:
            for i in range(n):
                dep[i] = 0
                grads[i] = -1
            for k in range(targets.shape[0]):
                w = targets[k]
                if 0 <= w <= root:
                    dep[w] = 1
            for i in range(n):
                o = self._op[i]
                if o == LEAF or o == CONST:
                    continue
                b = self._b[i]
                if dep[self._a[i]] or (b >= 0 and dep[b]):
                    dep[i] = 1
            if not dep[root]:
                return [-1] * targets.shape[0]
            if self._gen[root] + 1 > self._min_gen:
                self._min_gen = self._gen[root] + 1
            grads[root] = self._const(1.0)
            for i in range(root, -1, -1):
                gi = grads[i]
                if gi < 0 or not dep[i]:
                    continue
                o = self._op[i]
                if o == LEAF or o == CONST:
                    continue
                a = self._a[i]
                b = self._b[i]
                if o == ADD:
                    if dep[a]:
                        _acc(self, grads, a, gi)
                    if dep[b]:
                        _acc(self, grads, b, gi)
                elif o == SUB:
                    if dep[a]:
                        _acc(self, grads, a, gi)
                    if dep[b]:
                        _acc(self, grads, b, self._rec(NEG, gi, -1, 0.0))
                elif o == MUL:
                    if dep[a]:
                        _acc(self, grads, a, self._rec(MUL, gi, b, 0.0))
                    if dep[b]:
                        _acc(self, grads, b, self._rec(MUL, gi, a, 0.0))
                elif o == DIV:
                    if dep[a]:
                        _acc(self, grads, a, self._rec(DIV, gi, b, 0.0))
                    if dep[b]:
                        d = self._rec(MUL, gi, i, 0.0)
                        d = self._rec(DIV, d, b, 0.0)
                        _acc(self, grads, b, self._rec(NEG, d, -1, 0.0))
                elif o == POW:
                    c = self._c[i]
                    k = self._const(c)
                    d = self._rec(POW, a, -1, c - 1.0)
                    d = self._rec(MUL, k, d, 0.0)
                    _acc(self, grads, a, self._rec(MUL, gi, d, 0.0))
                elif o == TANH:
                    k = self._const(1.0)
                    d = self._rec(MUL, i, i, 0.0)
                    d = self._rec(SUB, k, d, 0.0)
                    _acc(self, grads, a, self._rec(MUL, gi, d, 0.0))
                elif o == SIN:
                    d = self._rec(COS, a, -1, 0.0)
                    _acc(self, grads, a, self._rec(MUL, gi, d, 0.0))
                elif o == COS:
                    d = self._rec(SIN, a, -1, 0.0)
                    d = self._rec(MUL, gi, d, 0.0)
                    _acc(self, grads, a, self._rec(NEG, d, -1, 0.0))
                elif o == NEG:
                    _acc(self, grads, a, self._rec(NEG, gi, -1, 0.0))
            out = []
            for k in range(targets.shape[0]):
                w = targets[k]
                out.append(grads[w] if 0 <= w <= root else -1)
            return out
        finally:
            self._min_gen = saved_min
            free(dep)
            free(grads)


cdef inline int _acc(TapeCore tape, Py_ssize_t *grads, Py_ssize_t p, Py_ssize_t v) except -1:
    if grads[p] < 0:
        grads[p] = v
    else:
        grads[p] = tape._rec(ADD, grads[p], v, 0.0)
    return 0


cdef long long[::1] _as_index_array(seq):
    cdef Py_ssize_t n = len(seq)
    cdef Py_ssize_t k
    cdef long long[::1] out
    import array
    out = array.array("q", [0]) * n if n else array.array("q")
    for k in range(n):
        out[k] = seq[k]
    return out
