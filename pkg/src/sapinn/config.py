"""Run configuration: one JSON document per run, plus built-in presets."""

import json
from dataclasses import asdict, dataclass, field, fields, replace

import numpy as np

from .errors import ConfigError
from .loss import MODES
from .mask import GROUPS
from .problems import PROBLEMS
from .sampler import STRATEGIES

CONFIG_VERSION = 1


@dataclass
class RunConfig:
    problem: str
    layer_sizes: tuple
    n_residual: int
    n_boundary: int
    n_initial: int
    activation: str = "tanh"
    strategy: str = "latin-hypercube"
    mesh_shape: tuple = None
    init_ranges: dict = field(default_factory=lambda: {g: (1.0, 1.0) for g in GROUPS})
    trainable: dict = field(default_factory=lambda: {g: True for g in GROUPS})
    adam_iters: int = 1000
    lbfgs_iters: int = 1000
    lr_w: float = 1e-3
    lr_lam: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    decay_rate: float = 1.0
    decay_steps: int = 1000
    lbfgs_memory: int = 50
    lbfgs_tol: float = 1e-9
    lbfgs_refine: bool = False
    mode: str = "sa"
    c_weight: float = 1.0
    restarts: int = 1
    seed: int = 0
    log_every: int = 100
    reference_shape: tuple = None
    reference_file: str = None
    out_dir: str = "runs"
    name: str = "custom"

    def __post_init__(self):
        self.layer_sizes = tuple(int(n) for n in self.layer_sizes)
        if self.mesh_shape is not None:
            self.mesh_shape = tuple(int(n) for n in self.mesh_shape)
        if self.reference_shape is not None:
            self.reference_shape = tuple(int(n) for n in self.reference_shape)
        self.init_ranges = {
            g: tuple(float(v) for v in self.init_ranges.get(g, (1.0, 1.0))) for g in GROUPS
        }
        self.trainable = {g: bool(self.trainable.get(g, True)) for g in GROUPS}
        self.lbfgs_refine = bool(self.lbfgs_refine)
        self.validate()

    def validate(self):
        if self.problem not in PROBLEMS:
            raise ConfigError(f"unknown problem {self.problem!r}; choose from {sorted(PROBLEMS)}")
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}")
        if self.strategy not in STRATEGIES:
            raise ConfigError(f"strategy must be one of {STRATEGIES}")
        if len(self.layer_sizes) < 2 or self.layer_sizes[0] != 2 or self.layer_sizes[-1] != 1:
            raise ConfigError("layer_sizes must start with 2 inputs and end with 1 output")
        if min(self.n_residual, self.n_boundary, self.n_initial) < 0:
            raise ConfigError("point counts must be nonnegative")
        if self.problem == "helmholtz" and self.n_initial:
            raise ConfigError("helmholtz has no initial condition; n_initial must be 0")
        if self.strategy == "mesh-subsample":
            if self.mesh_shape is None:
                raise ConfigError("mesh-subsample needs mesh_shape")
            if self.n_residual > self.mesh_shape[0] * self.mesh_shape[1]:
                raise ConfigError("n_residual exceeds the mesh size")
        if self.restarts < 1:
            raise ConfigError("restarts must be at least 1")
        if self.adam_iters < 0 or self.lbfgs_iters < 0:
            raise ConfigError("iteration counts must be nonnegative")
        if self.mode == "nonadaptive" and self.c_weight <= 0:
            raise ConfigError("c_weight must be positive")
        if self.log_every < 1:
            raise ConfigError("log_every must be at least 1")
        for g, (lo, hi) in self.init_ranges.items():
            if lo < 0 or hi < lo:
                raise ConfigError(f"init range for group {g} must satisfy 0 <= low <= high")

    # -- serialization ---------------------------------------------------

    def to_dict(self):
        d = asdict(self)
        d["layer_sizes"] = list(self.layer_sizes)
        d["mesh_shape"] = None if self.mesh_shape is None else list(self.mesh_shape)
        d["reference_shape"] = None if self.reference_shape is None else list(self.reference_shape)
        d["init_ranges"] = {g: list(v) for g, v in self.init_ranges.items()}
        d["version"] = CONFIG_VERSION
        return d

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_dict(cls, data):
        data = dict(data)
        version = data.pop("version", CONFIG_VERSION)
        if version != CONFIG_VERSION:
            raise ConfigError(f"unsupported config version {version}")
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
        try:
            return cls(**data)
        except TypeError as exc:
            raise ConfigError(str(exc)) from None

    @classmethod
    def from_json(cls, text):
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}") from None
        if not isinstance(data, dict):
            raise ConfigError("config must be a JSON object")
        return cls.from_dict(data)

    def save(self, path):
        with open(path, "w") as fh:
            fh.write(self.to_json())

    @classmethod
    def load(cls, path):
        try:
            with open(path) as fh:
                return cls.from_json(fh.read())
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None

    def with_(self, **changes):
        return replace(self, **changes)

    # -- seeds -------------------------------------------------------------

    def seeds(self, restart=0):
        """Sampler, network and mask seeds for one restart.

        Derived from ``(seed, restart)`` only, so the three modes see the
        same points and initial weights for the same seed.
        """
        seq = np.random.SeedSequence([int(self.seed), int(restart)])
        a, b, c = (int(s.generate_state(1)[0]) for s in seq.spawn(3))
        return {"sampler": a, "network": b, "mask": c}


_AC = dict(problem="allen-cahn", n_boundary=100, n_initial=100,
           init_ranges={"r": (0.0, 1.0), "b": (1.0, 1.0), "0": (0.0, 100.0)},
           trainable={"r": True, "b": False, "0": True})
_BURGERS = dict(problem="burgers", layer_sizes=(2,) + (20,) * 8 + (1,), n_boundary=200,
                n_initial=100,
                init_ranges={"r": (0.0, 1.0), "b": (0.0, 1.0), "0": (0.0, 1.0)})
# a wide lambda_b range keeps the zero-boundary constraint from being swamped
# by the O(17 pi^2) forcing in the residual
_HELM = dict(problem="helmholtz", layer_sizes=(2, 50, 50, 50, 50, 1), n_boundary=400,
             n_initial=0, strategy="mesh-subsample", mesh_shape=(1001, 1001),
             init_ranges={"r": (0.0, 1.0), "b": (0.0, 100.0), "0": (1.0, 1.0)})

PRESETS = {
    "allen-cahn-paper": dict(_AC, layer_sizes=(2, 128, 128, 128, 128, 1), n_residual=20000,
                             adam_iters=10000, lbfgs_iters=10000),
    "allen-cahn-desk": dict(_AC, layer_sizes=(2, 64, 64, 64, 64, 1), n_residual=5000,
                            adam_iters=3000, lbfgs_iters=2000),
    "burgers-paper": dict(_BURGERS, n_residual=10000, adam_iters=10000, lbfgs_iters=10000),
    "burgers-desk": dict(_BURGERS, n_residual=10000, adam_iters=2000, lbfgs_iters=2000),
    "helmholtz-paper": dict(_HELM, n_residual=100000, adam_iters=10000, lbfgs_iters=10000),
    "helmholtz-desk": dict(_HELM, n_residual=10000, adam_iters=2000, lbfgs_iters=1000),
    # seconds-scale smoke runs
    "allen-cahn-tiny": dict(_AC, layer_sizes=(2, 16, 16, 1), n_residual=200, n_boundary=20,
                            n_initial=20, adam_iters=20, lbfgs_iters=10, log_every=5),
    "burgers-tiny": dict(_BURGERS, layer_sizes=(2, 16, 16, 1), n_residual=200, n_boundary=20,
                         n_initial=20, adam_iters=20, lbfgs_iters=10, log_every=5,
                         reference_shape=(64, 21)),
    "helmholtz-tiny": dict(_HELM, layer_sizes=(2, 16, 16, 1), n_residual=200, n_boundary=40,
                           adam_iters=20, lbfgs_iters=10, log_every=5, reference_shape=(101, 101)),
}


def preset(name, **overrides):
    try:
        base = PRESETS[name]
    except KeyError:
        raise ConfigError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}") from None
    return RunConfig(**dict(base, name=name, out_dir=f"runs/{name}", **overrides))
