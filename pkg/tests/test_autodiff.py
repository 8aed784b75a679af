import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sapinn.autodiff import Tape, derivative
from sapinn.autodiff import _ops, _tape_py
from sapinn.autodiff.scalar import BACKENDS
from sapinn.errors import ContractError, DomainError, StructuralError
from sapinn.network import ArchitectureSpec, ScalarNetwork, init

from oracles import central_gradient, rel_err

BACKEND_NAMES = sorted(BACKENDS)


@pytest.fixture(params=BACKEND_NAMES)
def tape(request):
    return Tape(request.param)


def test_record_tanh_at_origin(tape):
    x = tape.variable(0.0)
    y = tape.record("tanh", x)
    assert y.value == 0.0
    assert tape.grad(y, [x]) == [1.0]


def test_record_mul_partials(tape):
    a, b = tape.variable(3.0), tape.variable(4.0)
    y = tape.record("mul", a, b)
    assert y.value == 12.0
    assert tape.grad(y, [a, b]) == [4.0, 3.0]


def test_record_sin_half_pi(tape):
    x = tape.variable(math.pi / 2)
    y = tape.record("sin", x)
    assert y.value == 1.0
    assert abs(tape.grad(y, [x])[0]) < 1e-16


def test_record_rejects_foreign_node(tape):
    other = Tape()
    with pytest.raises(StructuralError):
        tape.record("add", tape.variable(1.0), other.variable(2.0))


def test_record_rejects_unknown_op(tape):
    with pytest.raises(DomainError):
        tape.record("exp", tape.variable(1.0))


def test_pow_needs_constant_exponent(tape):
    x = tape.variable(2.0)
    assert tape.record("pow", x, exponent=3).value == 8.0
    with pytest.raises(DomainError):
        tape.record("pow", x, exponent=x)


def test_backward_square(tape):
    x = tape.variable(3.0)
    grads = tape.backward(x * x)
    assert grads[x] == 6.0
    assert x.adjoint == 6.0


def test_backward_tanh_product(tape):
    w, x = tape.variable(0.0), tape.variable(5.0)
    tape.backward((w * x).tanh())
    assert w.adjoint == 5.0


def test_backward_needs_scalar_root(tape):
    with pytest.raises(ContractError):
        tape.backward([tape.variable(1.0)])


def test_adjoint_before_sweep_is_an_error(tape):
    with pytest.raises(ContractError):
        tape.variable(1.0).adjoint


def test_two_layer_network_gradients_match_differences(tape):
    params = init(ArchitectureSpec([2, 6, 5, 1], "tanh", 3))
    point = (0.3, -0.7)

    def value(theta):
        p = params.copy()
        p.set_vector(theta)
        return ScalarNetwork(p, Tape())(*point).value

    net = ScalarNetwork(params, tape)
    out = net(*point)
    got = tape.grad(out, net.leaves())
    want = central_gradient(value, params.to_vector())
    assert rel_err(got, want) < 1e-6


def test_derivative_cubic(tape):
    assert derivative(lambda x: x**3, [2.0], [0, 0], tape).value == pytest.approx(12.0, abs=1e-12)


def test_derivative_sine_curvature(tape):
    d2 = derivative(lambda x, t: (math.pi * x).sin(), [0.5, 0.1], [0, 0], tape)
    assert d2.value == pytest.approx(-math.pi**2, rel=1e-14)


def test_derivative_bad_axis(tape):
    with pytest.raises(DomainError):
        derivative(lambda x, t: x * t, [0.0, 0.0], [2], tape)


def test_mixed_third_order_against_nested_differences(tape):
    params = init(ArchitectureSpec([2, 7, 1], "tanh", 11))
    point = (0.2, 0.4)
    h = 1e-4

    def u_xx(theta):
        p = params.copy()
        p.set_vector(theta)
        t2 = Tape()
        net = ScalarNetwork(p, t2)
        return derivative(net, list(point), [0, 0], t2).value

    net = ScalarNetwork(params, tape)
    d2 = derivative(net, list(point), [0, 0], tape)
    got = tape.grad(d2, net.leaves())
    want = central_gradient(u_xx, params.to_vector(), step=h)
    assert rel_err(got, want) < 1e-4


def test_generation_grows_with_nested_sweeps(tape):
    x = tape.variable(0.3)
    y = x.sin() * x
    (dy,) = tape.grad(y, [x], create_graph=True)
    (ddy,) = tape.grad(dy, [x], create_graph=True)
    assert x.generation == 0
    assert dy.generation == 1
    assert ddy.generation == 2
    assert ddy.value == pytest.approx(2 * math.cos(0.3) - 0.3 * math.sin(0.3), rel=1e-14)


def test_clear_reuses_the_tape(tape):
    x = tape.variable(1.0)
    tape.backward(x * x)
    tape.clear()
    assert len(tape) == 0
    y = tape.variable(2.0)
    assert tape.grad(y * y, [y]) == [4.0]


def test_op_tables_agree():
    if "cython" not in BACKENDS:
        pytest.skip("compiled core not built")
    from sapinn.autodiff import _tape_core

    assert _tape_core.OP_CODES == {name: getattr(_ops, name) for name in _tape_core.OP_CODES}
    assert {n.upper() for n in _ops.BY_NAME} | {"LEAF", "CONST"} == set(_tape_core.OP_CODES)


def _random_expression(tape, seed):
    rng = np.random.default_rng(seed)
    xs = [tape.variable(v) for v in rng.uniform(-1, 1, 4)]
    nodes = list(xs)
    for _ in range(40):
        op = ["add", "sub", "mul", "div", "pow", "tanh", "sin", "cos", "neg"][rng.integers(9)]
        a = nodes[rng.integers(len(nodes))]
        if op in ("add", "sub", "mul"):
            out = tape.record(op, a, nodes[rng.integers(len(nodes))])
        elif op == "div":
            out = tape.record(op, a, 2.0 + nodes[rng.integers(len(nodes))].tanh())
        elif op == "pow":
            out = tape.record(op, a, exponent=2)
        else:
            out = tape.record(op, a)
        nodes.append(out)
    return xs, sum(nodes[-5:], tape.constant(0.0))


@pytest.mark.skipif("cython" not in BACKENDS, reason="compiled core not built")
@pytest.mark.parametrize("seed", range(10))
def test_backends_bit_identical(seed):
    results = []
    for name in ("python", "cython"):
        t = Tape(name)
        xs, root = _random_expression(t, seed)
        first = t.grad(root, xs, create_graph=True)
        second = t.grad(first[0], xs)
        results.append((root.value, [f.value for f in first], second))
    assert results[0] == results[1]


def test_pure_python_core_is_selectable():
    assert isinstance(Tape("python")._core, _tape_py.TapeCore)
    with pytest.raises(DomainError):
        Tape("fortran")


@settings(max_examples=50, deadline=None)
@given(a=st.floats(-5, 5), b=st.floats(-5, 5), x0=st.floats(-2, 2))
def test_backward_is_linear(a, b, x0):
    def grads(fn):
        t = Tape()
        x = t.variable(x0)
        return t.grad(fn(t, x), [x])[0]

    f = lambda t, x: (x * x).sin()
    g = lambda t, x: x.tanh() * x
    combined = grads(lambda t, x: a * f(t, x) + b * g(t, x))
    assert combined == pytest.approx(a * grads(f) + b * grads(g), rel=1e-12, abs=1e-12)


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**31))
def test_adjoints_are_deterministic(seed):
    outs = []
    for _ in range(2):
        t = Tape()
        xs, root = _random_expression(t, seed)
        outs.append(t.grad(root, xs))
    assert outs[0] == outs[1]
