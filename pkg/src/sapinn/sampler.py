"""Reproducible collocation, boundary and initial point sets."""

from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError

STRATEGIES = ("latin-hypercube", "uniform-random", "mesh-subsample")


@dataclass(frozen=True)
class SamplerConfig:
    n_residual: int
    n_boundary: int
    n_initial: int
    strategy: str = "latin-hypercube"
    seed: int = 0
    mesh_shape: tuple = None

    def __post_init__(self):
        if min(self.n_residual, self.n_boundary, self.n_initial) < 0:
            raise DomainError("point counts must be nonnegative")
        if self.strategy not in STRATEGIES:
            raise DomainError(f"strategy must be one of {STRATEGIES}")
        if self.strategy == "mesh-subsample":
            if self.mesh_shape is None:
                raise DomainError("mesh-subsample needs mesh_shape")
            rows, cols = self.mesh_shape
            if self.n_residual > rows * cols:
                raise DomainError(
                    f"cannot draw {self.n_residual} points from a {rows}x{cols} mesh"
                )


@dataclass
class PointSet:
    """Training points; ``boundary`` is ``(N_b, 2, 2)`` pairs for periodic problems."""

    residual: np.ndarray
    boundary: np.ndarray
    boundary_values: np.ndarray
    initial: np.ndarray
    initial_values: np.ndarray
    sample: np.ndarray = field(default_factory=lambda: np.zeros((0, 2)))
    sample_values: np.ndarray = field(default_factory=lambda: np.zeros(0))
    periodic: bool = False

    @property
    def counts(self):
        return len(self.residual), len(self.boundary), len(self.initial)

    def boundary_rows(self):
        """Boundary coordinates as ``(rows, 2)``; periodic pairs give all
        ``x = lo`` members first, then all ``x = hi`` members."""
        if self.periodic:
            return np.concatenate([self.boundary[:, 0, :], self.boundary[:, 1, :]], axis=0)
        return self.boundary

    def all_points(self):
        return np.concatenate(
            [self.residual, self.boundary_rows(), self.initial, self.sample], axis=0
        )


def latin_hypercube(n, lower, upper, rng):
    """One point per stratum on every axis, uniform within the stratum."""
    lower = np.asarray(lower, dtype=float)
    upper = np.asarray(upper, dtype=float)
    d = len(lower)
    u = np.empty((n, d))
    for k in range(d):
        u[:, k] = (rng.permutation(n) + rng.uniform(size=n)) / n
    return lower + u * (upper - lower)


def _interior(problem, cfg, rng):
    lo, hi = problem.domain.lower, problem.domain.upper
    n = cfg.n_residual
    if cfg.strategy == "latin-hypercube":
        return latin_hypercube(n, lo, hi, rng)
    if cfg.strategy == "uniform-random":
        return rng.uniform(lo, hi, size=(n, 2))
    rows, cols = cfg.mesh_shape
    flat = rng.choice(rows * cols, size=n, replace=False)
    ax0 = np.linspace(lo[0], hi[0], rows)
    ax1 = np.linspace(lo[1], hi[1], cols)
    return np.column_stack([ax0[flat // cols], ax1[flat % cols]])


def _boundary(problem, n, rng):
    lo, hi = problem.domain.lower, problem.domain.upper
    if problem.boundary_kind == "periodic":
        s = rng.uniform(lo[1], hi[1], size=n)
        pairs = np.empty((n, 2, 2))
        pairs[:, 0, 0] = lo[0]
        pairs[:, 1, 0] = hi[0]
        pairs[:, 0, 1] = s
        pairs[:, 1, 1] = s
        return pairs
    if problem.has_initial:
        # space-time problems: walls at x = lo and x = hi, alternating
        s = rng.uniform(lo[1], hi[1], size=n)
        side = np.where(np.arange(n) % 2 == 0, lo[0], hi[0])
        return np.column_stack([side, s])
    # steady problems: all four edges, round robin
    s = rng.uniform(size=n)
    edge = np.arange(n) % 4
    pts = np.empty((n, 2))
    along0 = lo[0] + s * (hi[0] - lo[0])
    along1 = lo[1] + s * (hi[1] - lo[1])
    pts[:, 0] = np.select([edge == 0, edge == 1], [lo[0], hi[0]], along0)
    pts[:, 1] = np.select([edge == 2, edge == 3, edge < 2], [lo[1], hi[1], along1])
    return pts


def sample(problem, config):
    """Draw a :class:`PointSet`; identical inputs give identical arrays."""
    streams = np.random.SeedSequence(config.seed).spawn(3)
    r_rng, b_rng, i_rng = (np.random.default_rng(s) for s in streams)
    residual = _interior(problem, config, r_rng)
    boundary = _boundary(problem, config.n_boundary, b_rng)
    periodic = problem.boundary_kind == "periodic"
    if periodic:
        boundary_values = np.zeros(len(boundary))
    else:
        boundary_values = problem.boundary_target(boundary) if len(boundary) else np.zeros(0)
    if problem.has_initial:
        lo, hi = problem.domain.lower, problem.domain.upper
        x0 = i_rng.uniform(lo[0], hi[0], size=config.n_initial)
        initial = np.column_stack([x0, np.full(config.n_initial, lo[1])])
        initial_values = problem.initial_condition(x0)
    else:
        if config.n_initial:
            raise DomainError(f"{problem.name} has no initial condition; set n_initial = 0")
        initial = np.zeros((0, 2))
        initial_values = np.zeros(0)
    return PointSet(
        residual=residual,
        boundary=boundary,
        boundary_values=np.asarray(boundary_values, dtype=float),
        initial=initial,
        initial_values=np.asarray(initial_values, dtype=float),
        periodic=periodic,
    )


def write_points(points, path, axes=("x", "t")):
    """Delimited text: header, then one row per physical point."""
    with open(path, "w") as fh:
        fh.write(f"{axes[0]},{axes[1]},group\n")
        for group, arr in (
            ("r", points.residual),
            ("b", points.boundary_rows()),
            ("0", points.initial),
            ("s", points.sample),
        ):
            for a, b in arr:
                fh.write(f"{a:.17g},{b:.17g},{group}\n")


def read_points(path):
    """Rows grouped as written by :func:`write_points`."""
    groups = {"r": [], "b": [], "0": [], "s": []}
    with open(path) as fh:
        next(fh)
        for line in fh:
            a, b, g = line.strip().split(",")
            groups[g].append((float(a), float(b)))
    return {g: np.array(v, dtype=float).reshape(-1, 2) for g, v in groups.items()}
