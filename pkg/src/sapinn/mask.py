"""Trainable self-adaptation weights (the soft attention mask).

One weight per collocation point (group ``r``), boundary point or periodic
pair (group ``b``) and initial point (group ``0``). Weights are bound to
points by position.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, StructuralError

GROUPS = ("r", "b", "0")


@dataclass
class AdaptiveMask:
    lambda_r: np.ndarray
    lambda_b: np.ndarray
    lambda_0: np.ndarray
    trainable: dict = field(default_factory=lambda: {g: True for g in GROUPS})
    init_ranges: dict = field(default_factory=lambda: {g: (1.0, 1.0) for g in GROUPS})

    def group(self, g):
        return {"r": self.lambda_r, "b": self.lambda_b, "0": self.lambda_0}[g]

    def set_group(self, g, values):
        values = np.asarray(values, dtype=np.float64)
        if values.shape != self.group(g).shape:
            raise StructuralError(f"group {g}: expected shape {self.group(g).shape}")
        setattr(self, _ATTR[g], values)

    @property
    def counts(self):
        return len(self.lambda_r), len(self.lambda_b), len(self.lambda_0)

    def copy(self):
        return AdaptiveMask(
            self.lambda_r.copy(),
            self.lambda_b.copy(),
            self.lambda_0.copy(),
            dict(self.trainable),
            dict(self.init_ranges),
        )

    def stats(self):
        out = {}
        for g in GROUPS:
            v = self.group(g)
            if len(v):
                out[g] = (float(v.min()), float(np.mean(v)), float(v.max()))
        return out


_ATTR = {"r": "lambda_r", "b": "lambda_b", "0": "lambda_0"}


def init_mask(counts, ranges=None, flags=None, seed=0):
    """Draw each trainable group from U[low, high]; frozen groups are all ones."""
    ranges = {g: (1.0, 1.0) for g in GROUPS} | dict(ranges or {})
    flags = {g: True for g in GROUPS} | dict(flags or {})
    streams = np.random.SeedSequence(seed).spawn(len(GROUPS))
    values = {}
    for g, n, stream in zip(GROUPS, counts, streams):
        low, high = (float(v) for v in ranges[g])
        if low < 0:
            raise DomainError(f"group {g}: weights must start nonnegative, got low={low}")
        if high < low:
            raise DomainError(f"group {g}: empty range ({low}, {high})")
        if flags[g]:
            values[g] = np.random.default_rng(stream).uniform(low, high, size=n)
        else:
            values[g] = np.ones(n)
    return AdaptiveMask(
        values["r"], values["b"], values["0"],
        trainable={g: bool(flags[g]) for g in GROUPS},
        init_ranges={g: tuple(float(v) for v in ranges[g]) for g in GROUPS},
    )


def ones_mask(counts):
    return init_mask(counts, flags={g: False for g in GROUPS})


def mask_gradient(mask, pointwise_errors):
    """d(loss)/d(lambda) per group: (2 / N) * lambda * e^2.

    ``pointwise_errors`` maps group -> squared discrepancy per point. Groups
    missing from the map, or with no points, get empty gradients.
    """
    out = {}
    for g in GROUPS:
        lam = mask.group(g)
        e2 = np.asarray(pointwise_errors.get(g, np.zeros(len(lam))), dtype=np.float64)
        if e2.shape != lam.shape:
            raise StructuralError(f"group {g}: {len(e2)} errors for {len(lam)} weights")
        if np.any(e2 < 0):
            raise DomainError(f"group {g}: squared errors must be nonnegative")
        out[g] = (2.0 / len(lam)) * lam * e2 if len(lam) else np.zeros(0)
    return out


def export_mask(mask, points):
    """Rows ``(a, b, group, lambda)`` ordered by group then index.

    Periodic pairs are reported at their ``x = -1`` member.
    """
    if mask.counts != points.counts:
        raise StructuralError(f"mask counts {mask.counts} != point counts {points.counts}")
    boundary = points.boundary[:, 0, :] if points.periodic else points.boundary
    rows = []
    for g, pts in (("r", points.residual), ("b", boundary), ("0", points.initial)):
        for (a, b), lam in zip(pts, mask.group(g)):
            rows.append((float(a), float(b), g, float(lam)))
    return rows


def write_mask(mask, points, path, axes=("x", "t")):
    with open(path, "w") as fh:
        fh.write(f"{axes[0]},{axes[1]},group,lambda\n")
        for a, b, g, lam in export_mask(mask, points):
            fh.write(f"{a:.17g},{b:.17g},{g},{lam:.17g}\n")


def read_mask(path, trainable=None, init_ranges=None):
    """Inverse of :func:`write_mask`; returns ``(mask, coordinates by group)``."""
    lam = {g: [] for g in GROUPS}
    coords = {g: [] for g in GROUPS}
    with open(path) as fh:
        header = next(fh).strip().split(",")
        if header[2:] != ["group", "lambda"]:
            raise StructuralError(f"{path} is not a mask export")
        for line in fh:
            a, b, g, v = line.strip().split(",")
            lam[g].append(float(v))
            coords[g].append((float(a), float(b)))
    mask = AdaptiveMask(
        np.array(lam["r"]), np.array(lam["b"]), np.array(lam["0"]),
        trainable=dict(trainable or {g: True for g in GROUPS}),
        init_ranges=dict(init_ranges or {g: (1.0, 1.0) for g in GROUPS}),
    )
    return mask, {g: np.array(c).reshape(-1, 2) for g, c in coords.items()}
