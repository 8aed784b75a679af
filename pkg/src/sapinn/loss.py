"""Training loss in self-adaptive, baseline and nonadaptive-C modes.

All points (collocation, boundary, initial, sample) go through the network
as one batch on one array tape; group terms are row slices of that batch.
"""

from dataclasses import dataclass, field

import numpy as np

from .autodiff import array as ad
from .errors import NumericError, StructuralError
from .mask import GROUPS
from .network import NetworkParams, forward_batch, param_leaves
from .problems import batch_fields

MODES = ("sa", "baseline", "nonadaptive")


@dataclass
class LossBreakdown:
    L_s: float
    L_r: float
    L_b: float
    L_0: float
    total: float
    pointwise_errors: dict = field(default_factory=dict)

    def as_dict(self):
        return {"L_s": self.L_s, "L_r": self.L_r, "L_b": self.L_b, "L_0": self.L_0, "total": self.total}


@dataclass
class Evaluation:
    breakdown: LossBreakdown
    param_grads: list = None
    mask_grads: dict = None


def _square(x):
    return x * x


def _mean(x, n):
    return ad.total(x) / float(n)


def _check_finite(values, pts):
    bad = ~np.isfinite(values[:, 0])
    if np.any(bad):
        i = int(np.flatnonzero(bad)[0])
        raise NumericError(f"non-finite network output at point {tuple(pts[i])}")


def build(tape, problem, points, model, lam, c_weight=1.0):
    """Record the loss on ``tape``.

    ``lam`` maps group -> ``(N, 1)`` node or array of weights. Returns the
    term nodes (zero-point groups are the float 0.0) and the squared
    discrepancies per group.
    """
    n_r, n_b, n_0 = points.counts
    n_s = len(points.sample)
    b_rows = 2 * n_b if points.periodic else n_b
    pts = points.all_points()
    X = tape.leaf(pts)
    f = batch_fields(problem, model, X, problem.all_fields())
    _check_finite(f["u"].value, pts)

    def part(name, start, stop):
        return f[name].rows(start, stop)

    terms = {"L_s": 0.0, "L_r": 0.0, "L_b": 0.0, "L_0": 0.0}
    errors = {}

    if n_r:
        fr = {k: part(k, 0, n_r) for k in problem.fields}
        coords = (pts[:n_r, 0:1], pts[:n_r, 1:2])
        r = problem.residual_formula(fr, coords)
        terms["L_r"] = _mean(_square(lam["r"] * r), n_r)
        errors["r"] = np.square(r.value[:, 0])

    lo = n_r
    if n_b:
        if points.periodic:
            d_u = part("u", lo + n_b, lo + 2 * n_b) - part("u", lo, lo + n_b)
            d_ux = part("u_x", lo + n_b, lo + 2 * n_b) - part("u_x", lo, lo + n_b)
            e2 = _square(d_u) + _square(d_ux)
            terms["L_b"] = _mean(_square(lam["b"]) * e2, n_b)
            errors["b"] = e2.value[:, 0].copy()
        else:
            d = part("u", lo, lo + n_b) - points.boundary_values.reshape(-1, 1)
            terms["L_b"] = _mean(_square(lam["b"] * d), n_b)
            errors["b"] = np.square(d.value[:, 0])

    lo += b_rows
    if n_0:
        d = part("u", lo, lo + n_0) - points.initial_values.reshape(-1, 1)
        term = _mean(_square(lam["0"] * d), n_0)
        terms["L_0"] = term if c_weight == 1.0 else c_weight * term
        errors["0"] = np.square(d.value[:, 0])

    lo += n_0
    if n_s:
        d = part("u", lo, lo + n_s) - points.sample_values.reshape(-1, 1)
        terms["L_s"] = _mean(_square(d), n_s)
        errors["s"] = np.square(d.value[:, 0])

    total = 0.0
    for key in ("L_s", "L_r", "L_b", "L_0"):
        if isinstance(terms[key], ad.Node):
            total = terms[key] if isinstance(total, float) else total + terms[key]
    return terms, total, errors


def _breakdown(terms, total, errors):
    def val(x):
        return float(x.value) if isinstance(x, ad.Node) else float(x)

    return LossBreakdown(
        val(terms["L_s"]), val(terms["L_r"]), val(terms["L_b"]), val(terms["L_0"]), val(total), errors
    )


def evaluate(net, mask, points, problem, mode="sa", c_weight=1.0, params_grad=True,
             mask_grad=False, tape=None):
    """Loss breakdown plus optional gradients for parameters and mask.

    ``net`` is :class:`NetworkParams` or any callable taking a batch node
    and returning ``(n, 1)`` outputs. ``mask`` may be ``None`` outside
    ``sa`` mode. The tape, if given, is cleared and reused.
    """
    if mode not in MODES:
        raise StructuralError(f"mode must be one of {MODES}")
    if mode != "sa":
        mask_grad = False
    tape = tape if tape is not None else ad.ArrayTape()
    tape.clear()
    if mode == "sa":
        if mask is None or mask.counts != points.counts:
            got = None if mask is None else mask.counts
            raise StructuralError(f"mask counts {got} do not match point counts {points.counts}")
        lam = {}
        for g in GROUPS:
            v = mask.group(g).reshape(-1, 1)
            lam[g] = tape.leaf(v) if mask_grad and mask.trainable[g] else tape.const(v)
    else:
        lam = {g: tape.const(np.ones((n, 1))) for g, n in zip(GROUPS, points.counts)}
    weight_c = c_weight if mode == "nonadaptive" else 1.0

    if isinstance(net, NetworkParams):
        nodes = param_leaves(tape, net)

        def model(Z):
            return forward_batch(nodes, Z, net.activation)
    else:
        nodes = []
        model = net
        params_grad = False

    terms, total, errors = build(tape, problem, points, model, lam, weight_c)
    result = Evaluation(_breakdown(terms, total, errors))
    if not isinstance(total, ad.Node):
        if params_grad:
            result.param_grads = [np.zeros_like(n.value) for n in nodes]
        if mask_grad:
            result.mask_grads = {g: np.zeros_like(mask.group(g)) for g in GROUPS}
        return result

    wrt = list(nodes) if params_grad else []
    lam_leaves = [g for g in GROUPS if mask_grad and mask.trainable[g]]
    wrt += [lam[g] for g in lam_leaves]
    if wrt:
        grads = tape.grad(total, wrt)
        if params_grad:
            pg = grads[: len(nodes)]
            # bias leaves are (1, out) rows
            result.param_grads = [
                g.reshape(n.value.shape[1]) if k % 2 else np.asarray(g)
                for k, (g, n) in enumerate(zip(pg, nodes))
            ]
        if mask_grad:
            mg = grads[len(nodes) if params_grad else 0 :]
            result.mask_grads = {g: np.zeros_like(mask.group(g)) for g in GROUPS}
            for g, val in zip(lam_leaves, mg):
                result.mask_grads[g] = np.asarray(val).reshape(-1)
    if not np.isfinite(result.breakdown.total):
        raise NumericError(f"non-finite loss: {result.breakdown.as_dict()}")
    return result


def weighted_loss(net, mask, points, problem):
    """Self-adaptive loss value, no gradients."""
    return evaluate(net, mask, points, problem, "sa", params_grad=False).breakdown


def baseline_loss(net, points, problem):
    return evaluate(net, None, points, problem, "baseline", params_grad=False).breakdown


def nonadaptive_loss(net, points, problem, c_weight):
    """Baseline terms with the initial-condition term multiplied by ``c_weight``.

    The reported ``L_0`` is the scaled term, so ``total`` stays the sum.
    """
    if c_weight <= 0:
        raise StructuralError("the initial-loss weight must be positive")
    return evaluate(net, None, points, problem, "nonadaptive", c_weight, params_grad=False).breakdown
