"""Op codes shared by the scalar tape backends.

The Cython core declares the same integers; ``tests/test_tape_backends.py``
checks that the two tables agree.
"""

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

BINARY = frozenset({ADD, SUB, MUL, DIV})
UNARY = frozenset({POW, TANH, SIN, COS, NEG})

BY_NAME = {
    "add": ADD,
    "sub": SUB,
    "mul": MUL,
    "div": DIV,
    "pow": POW,
    "tanh": TANH,
    "sin": SIN,
    "cos": COS,
    "neg": NEG,
}
NAMES = {code: name for name, code in BY_NAME.items()}
NAMES[LEAF] = "leaf"
NAMES[CONST] = "const"
