"""Full training run: sample, initialize, Adam, L-BFGS, evaluate."""

import time
from dataclasses import dataclass, field

import numpy as np

from .._alloc import tune_allocator
from ..autodiff.array import ArrayTape
from ..errors import NumericError, SapinnError
from ..loss import evaluate
from ..mask import init_mask, ones_mask
from ..network import ArchitectureSpec, init
from ..problems import get_problem
from ..reference import get_reference, l2_error
from ..sampler import SamplerConfig, sample
from .adam import AdamState, adam_step
from .lbfgs import LbfgsState, lbfgs_run


@dataclass
class TrainingReport:
    """Outcome of one restart. ``records`` holds one entry per log interval."""

    config: dict
    restart: int
    seeds: dict
    records: list = field(default_factory=list)
    loss_trace: list = field(default_factory=list)
    l2_error: float = None
    timings: dict = field(default_factory=dict)
    status: str = "ok"
    lbfgs_status: str = None
    reference: dict = field(default_factory=dict)
    net: object = None
    mask: object = None
    points: object = None

    def summary(self):
        return {
            "restart": self.restart,
            "seeds": self.seeds,
            "l2_error": self.l2_error,
            "status": self.status,
            "lbfgs_status": self.lbfgs_status,
            "final_loss": self.loss_trace[-1] if self.loss_trace else None,
            "steps": len(self.loss_trace),
        }


def _mask_stats(mask):
    if mask is None:
        return {}
    return {g: list(v) for g, v in mask.stats().items()}


def _record(phase, step, breakdown, mask):
    rec = {"phase": phase, "step": step}
    rec.update(breakdown.as_dict())
    rec["mask"] = _mask_stats(mask)
    return rec


def setup(config, restart=0):
    """Problem, points, network, mask and seeds for one restart."""
    seeds = config.seeds(restart)
    problem = get_problem(config.problem)
    points = sample(problem, SamplerConfig(
        config.n_residual, config.n_boundary, config.n_initial, config.strategy,
        seeds["sampler"], config.mesh_shape,
    ))
    net = init(ArchitectureSpec(config.layer_sizes, config.activation, seeds["network"]))
    if config.mode == "sa":
        mask = init_mask(points.counts, config.init_ranges, config.trainable, seeds["mask"])
    else:
        mask = ones_mask(points.counts)
    return problem, points, net, mask, seeds


def train(config, restart=0, reference=None, progress=None, plain_mask=False):
    """Run Adam then L-BFGS for one restart and measure the L2 error.

    ``reference`` defaults to the cached oracle for the problem. Failures
    inside a phase end the run with a ``failed`` status; whatever state was
    reached is still returned. ``progress`` is called with every record.
    """
    tune_allocator()
    problem, points, net, mask, seeds = setup(config, restart)
    report = TrainingReport(config.to_dict(), restart, seeds, net=net, mask=mask, points=points)
    if reference is None:
        reference = get_reference(config.problem, config.reference_shape, problem,
                                  config.reference_file)
    report.reference = {"provenance": reference.provenance, "shape": list(reference.shape),
                        "solver_meta": reference.solver_meta}
    tape = ArrayTape()
    mode, cw = config.mode, config.c_weight

    def emit(rec):
        report.records.append(rec)
        if progress is not None:
            progress(rec)

    state = AdamState.create(
        net, mask, lr_w=config.lr_w, lr_lam=config.lr_lam, beta1=config.beta1,
        beta2=config.beta2, eps=config.eps, decay_rate=config.decay_rate,
        decay_steps=config.decay_steps, plain_mask=plain_mask,
    )
    t0 = time.perf_counter()
    try:
        for k in range(config.adam_iters):
            _, _, _, bd = adam_step(net, mask, points, problem, state, mode, cw, tape)
            report.loss_trace.append(bd.total)
            if k % config.log_every == 0:
                emit(_record("adam", k, bd, mask if mode == "sa" else None))
    except SapinnError as exc:
        report.status = f"failed: adam step {state.step}: {exc}"
    report.timings["adam"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    if report.status == "ok" and config.lbfgs_iters > 0:
        frozen = mask.copy()
        offset = len(report.loss_trace)

        def on_step(it, x, f, g):
            report.loss_trace.append(float(f))
            if it % config.log_every == 0:
                emit({"phase": "lbfgs", "step": offset + it - 1, "total": float(f),
                      "grad_norm": float(np.linalg.norm(g))})

        try:
            state = LbfgsState(memory=config.lbfgs_memory, refine=config.lbfgs_refine)
            net, res = lbfgs_run(net, frozen, points, problem, config.lbfgs_iters,
                                 config.lbfgs_tol, mode, cw, state, tape, on_step)
            report.lbfgs_status = res.status
            if res.status == "line-search-failed":
                report.status = "ok: lbfgs stopped early (line search failed)"
        except SapinnError as exc:
            report.status = f"failed: lbfgs: {exc}"
        report.net = net
    report.timings["lbfgs"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    try:
        final = evaluate(net, mask if mode == "sa" else None, points, problem, mode, cw,
                         params_grad=False, tape=tape).breakdown
        rec = _record("final", len(report.loss_trace), final, mask if mode == "sa" else None)
        report.l2_error = l2_error(net, reference)
        rec["l2_error"] = report.l2_error
        emit(rec)
    except (SapinnError, NumericError) as exc:
        if report.status == "ok":
            report.status = f"failed: evaluation: {exc}"
    report.timings["evaluate"] = time.perf_counter() - t0
    return report


def aggregate(reports):
    """Mean and population standard deviation of the restart L2 errors."""
    errs = [r.l2_error for r in reports if r.l2_error is not None]
    if not errs:
        return {"n": 0, "l2_mean": None, "l2_std": None}
    arr = np.array(errs)
    return {"n": len(errs), "l2_mean": float(arr.mean()), "l2_std": float(arr.std())}
