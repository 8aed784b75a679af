"""Benchmark PDE systems: residual operators, boundary and initial data.

Residual formulas are written once against the operator protocol shared
by floats, numpy arrays, scalar ``DiffValue`` nodes and array-tape
``Node`` objects; the derivative fields they consume always come from
reverse-mode differentiation of the network.
"""

import math
from dataclasses import dataclass

import numpy as np

from .autodiff import array as ad
from .autodiff.scalar import DiffValue, Tape
from .errors import ContractError, DomainError
from .network import NetworkParams, ScalarNetwork

BOUNDARY_TOL = 1e-12


@dataclass(frozen=True)
class Box:
    lower: tuple
    upper: tuple

    def __post_init__(self):
        if len(self.lower) != len(self.upper):
            raise DomainError("box bounds have different dimensions")
        if any(lo >= hi for lo, hi in zip(self.lower, self.upper)):
            raise DomainError("box bounds must be strictly ordered")

    def contains(self, pts, tol=0.0):
        pts = np.atleast_2d(pts)
        lo = np.asarray(self.lower) - tol
        hi = np.asarray(self.upper) + tol
        return bool(np.all((pts >= lo) & (pts <= hi)))


def _split_field(name):
    """'u' -> (), 'u_x' -> ('x',), 'u_xx' -> ('x', 'x')."""
    if name == "u":
        return ()
    return tuple(name.split("_", 1)[1])


class PdeProblem:
    """One benchmark system on a 2-D box with axes ``axes``."""

    name = ""
    axes = ("x", "t")
    domain = Box((-1.0, 0.0), (1.0, 1.0))
    boundary_kind = "dirichlet"
    has_initial = True
    fields = ("u",)
    reference_kind = "analytic"

    def residual_formula(self, f, coords):
        raise NotImplementedError

    def initial_condition(self, x):
        raise ContractError(f"{self.name} has no initial condition")

    def boundary_target(self, pts):
        return np.zeros(len(np.atleast_2d(pts)))

    def boundary_fields(self):
        return ("u", "u_x") if self.boundary_kind == "periodic" else ("u",)

    def all_fields(self):
        names = set(self.fields) | set(self.boundary_fields()) | {"u"}
        return tuple(sorted(names, key=lambda n: (len(n), n)))

    def axis_index(self, label):
        return self.axes.index(label)

    def on_boundary(self, point):
        x, s = point
        lo, hi = self.domain.lower, self.domain.upper
        return abs(abs(x) - 1.0) <= BOUNDARY_TOL and lo[1] <= s <= hi[1]

    def describe(self):
        return {"name": self.name, "axes": list(self.axes)}


@dataclass(frozen=True)
class AllenCahn(PdeProblem):
    diffusion: float = 1e-4
    reaction: float = 5.0

    name = "allen-cahn"
    boundary_kind = "periodic"
    fields = ("u", "u_t", "u_x", "u_xx")
    reference_kind = "spectral"

    def residual_formula(self, f, coords):
        u = f["u"]
        return f["u_t"] - self.diffusion * f["u_xx"] + self.reaction * (u * u * u) - self.reaction * u

    def initial_condition(self, x):
        return x * x * np.cos(np.pi * x)


@dataclass(frozen=True)
class Burgers(PdeProblem):
    viscosity: float = 0.01 / math.pi

    name = "burgers"
    fields = ("u", "u_t", "u_x", "u_xx")
    reference_kind = "cole-hopf"

    def residual_formula(self, f, coords):
        u = f["u"]
        return f["u_t"] + u * f["u_x"] - self.viscosity * f["u_xx"]

    def initial_condition(self, x):
        return -np.sin(np.pi * x)


@dataclass(frozen=True)
class Helmholtz(PdeProblem):
    a1: float = 1.0
    a2: float = 4.0
    k: float = 1.0

    name = "helmholtz"
    axes = ("x", "y")
    domain = Box((-1.0, -1.0), (1.0, 1.0))
    has_initial = False
    fields = ("u", "u_xx", "u_yy")

    def residual_formula(self, f, coords):
        x, y = coords
        return f["u_xx"] + f["u_yy"] + (self.k * self.k) * f["u"] - self.forcing(x, y)

    def forcing(self, x, y):
        if isinstance(x, (float, int)) and isinstance(y, (float, int)):
            return forcing_q(x, y, self.a1, self.a2, self.k)
        x = np.asarray(x)
        y = np.asarray(y)
        return forcing_q(x, y, self.a1, self.a2, self.k)

    def exact(self, x, y):
        return helmholtz_exact(x, y, self.a1, self.a2)

    def on_boundary(self, point):
        x, y = point
        on_x = abs(abs(x) - 1.0) <= BOUNDARY_TOL and -1.0 <= y <= 1.0
        on_y = abs(abs(y) - 1.0) <= BOUNDARY_TOL and -1.0 <= x <= 1.0
        return on_x or on_y


def forcing_q(x, y, a1, a2, k):
    """Forcing term whose solution is sin(a1 pi x) sin(a2 pi y)."""
    if isinstance(x, np.ndarray) or isinstance(y, np.ndarray):
        s = np.sin(a1 * np.pi * x) * np.sin(a2 * np.pi * y)
    else:
        s = math.sin(a1 * math.pi * x) * math.sin(a2 * math.pi * y)
    return -((a1 * math.pi) ** 2) * s - ((a2 * math.pi) ** 2) * s + (k * k) * s


def helmholtz_exact(x, y, a1=1.0, a2=4.0):
    if isinstance(x, np.ndarray) or isinstance(y, np.ndarray):
        return np.sin(a1 * np.pi * x) * np.sin(a2 * np.pi * y)
    return math.sin(a1 * math.pi * x) * math.sin(a2 * math.pi * y)


PROBLEMS = {"allen-cahn": AllenCahn, "burgers": Burgers, "helmholtz": Helmholtz}


def get_problem(name, **params):
    try:
        cls = PROBLEMS[name]
    except KeyError:
        raise DomainError(f"unknown problem {name!r}; choose from {sorted(PROBLEMS)}") from None
    return cls(**params)


# -- pointwise evaluation on the scalar tape ---------------------------------


def _scalar_model(net, tape):
    if isinstance(net, ScalarNetwork):
        return net, net.tape
    tape = tape if tape is not None else Tape()
    if isinstance(net, NetworkParams):
        return ScalarNetwork(net, tape), tape
    return net, tape


def scalar_fields(problem, net, point, names, tape=None):
    """Network value and input derivatives at one point, as DiffValues."""
    model, tape = _scalar_model(net, tape)
    xs = [tape.variable(float(p)) for p in point]
    out = {"u": tape.lift(model(*xs))}
    wanted = [_split_field(n) for n in names]
    first = sorted({d[0] for d in wanted if d})
    if first:
        grads = tape.grad(out["u"], [xs[problem.axis_index(a)] for a in first], create_graph=True)
        for a, g in zip(first, grads):
            out["u_" + a] = g
    for d in wanted:
        if len(d) == 2:
            (g,) = tape.grad(out["u_" + d[0]], [xs[problem.axis_index(d[1])]], create_graph=True)
            out["u_" + "".join(d)] = g
    return out


def residual(problem, net, point, tape=None):
    f = scalar_fields(problem, net, point, problem.fields, tape)
    return problem.residual_formula(f, tuple(float(p) for p in point))


def allen_cahn_residual(net, point, tape=None, problem=None):
    return residual(problem or AllenCahn(), net, point, tape)


def burgers_residual(net, point, tape=None, problem=None):
    return residual(problem or Burgers(), net, point, tape)


def helmholtz_residual(net, point, tape=None, problem=None):
    return residual(problem or Helmholtz(), net, point, tape)


def boundary_terms(problem, net, point, tape=None):
    """Boundary discrepancies at one boundary point (or periodic pair)."""
    if problem.boundary_kind == "periodic":
        pts = np.atleast_2d(np.asarray(point, dtype=float))
        if pts.shape == (2, 2):
            lo, hi = pts
        else:
            lo, hi = np.array([-1.0, pts[0, 1]]), np.array([1.0, pts[0, 1]])
        for p in (lo, hi):
            if not problem.on_boundary(tuple(p)):
                raise DomainError(f"{tuple(p)} is not on the periodic boundary")
        if lo[0] != -1.0 or hi[0] != 1.0 or lo[1] != hi[1]:
            raise DomainError("periodic pair must be (-1, t) and (1, t)")
        model, tape = _scalar_model(net, tape)
        f_lo = scalar_fields(problem, model, lo, ("u", "u_x"), tape)
        f_hi = scalar_fields(problem, model, hi, ("u", "u_x"), tape)
        return [f_hi["u"] - f_lo["u"], f_hi["u_x"] - f_lo["u_x"]]
    point = tuple(float(p) for p in point)
    if not problem.on_boundary(point):
        raise DomainError(f"{point} is not on the boundary of {problem.name}")
    f = scalar_fields(problem, net, point, ("u",), tape)
    return [f["u"] - float(problem.boundary_target(np.array([point]))[0])]


def initial_terms(problem, net, x, tape=None):
    """u(x, 0) - h(x) at one initial point."""
    if not problem.has_initial:
        raise ContractError(f"{problem.name} has no initial condition")
    f = scalar_fields(problem, net, (float(x), 0.0), ("u",), tape)
    return f["u"] - float(problem.initial_condition(np.float64(x)))


# -- batched evaluation on the array tape -------------------------------------


def batch_fields(problem, model, X, names):
    """Fields for every row of the batch node ``X``; values are ``(n, 1)`` nodes."""
    tape = X.tape
    out = {"u": model(X)}
    wanted = [_split_field(n) for n in names]
    first = sorted({d[0] for d in wanted if d}, key=problem.axis_index)
    if first:
        (G,) = tape.grad(out["u"].sum(), [X], create_graph=True)
        for a in first:
            out["u_" + a] = G.col(problem.axis_index(a))
    for d in wanted:
        if len(d) == 2:
            (H,) = tape.grad(out["u_" + d[0]].sum(), [X], create_graph=True)
            out["u_" + "".join(d)] = H.col(problem.axis_index(d[1]))
    return out


def batch_residual(problem, model, X, fields=None):
    f = fields if fields is not None else batch_fields(problem, model, X, problem.fields)
    coords = (X.value[:, 0:1], X.value[:, 1:2])
    return problem.residual_formula(f, coords)


def residual_on_points(problem, params, pts):
    """Residual values at ``pts`` of shape ``(n, 2)`` for trained parameters."""
    from .network import forward_batch, param_leaves

    tape = ad.ArrayTape()
    nodes = param_leaves(tape, params)
    X = tape.leaf(np.asarray(pts, dtype=np.float64))
    r = batch_residual(problem, lambda Z: forward_batch(nodes, Z, params.activation), X)
    return np.asarray(r.value)[:, 0]


__all__ = [
    "AllenCahn",
    "Box",
    "Burgers",
    "DiffValue",
    "Helmholtz",
    "PdeProblem",
    "allen_cahn_residual",
    "batch_fields",
    "batch_residual",
    "boundary_terms",
    "burgers_residual",
    "forcing_q",
    "get_problem",
    "helmholtz_exact",
    "helmholtz_residual",
    "initial_terms",
    "residual_on_points",
]
