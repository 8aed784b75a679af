"""Command line entry point: ``sapinn <subcommand> ...``."""

import argparse
import json
import sys
from pathlib import Path

from .config import PRESETS, RunConfig, preset
from .errors import ConfigError, DomainError, SapinnError
from .loss import MODES
from .network import load_model, predict
from .plotting import KINDS
from .problems import PROBLEMS, get_problem, residual_on_points
from .reference import DEFAULT_SHAPES, get_reference, l2_error, write_grid


def _add_config_args(p):
    src = p.add_mutually_exclusive_group()
    src.add_argument("--config", type=Path, help="JSON run configuration")
    src.add_argument("--preset", choices=sorted(PRESETS), help="built-in configuration")
    p.add_argument("--seed", type=int)
    p.add_argument("--restarts", type=int)
    p.add_argument("--mode", choices=MODES)
    p.add_argument("--c-weight", type=float, help="initial-loss weight for nonadaptive mode")
    p.add_argument("--adam-iters", type=int)
    p.add_argument("--lbfgs-iters", type=int)


def load_config(args):
    if args.config is None and args.preset is None:
        raise ConfigError("give --config PATH or --preset NAME")
    cfg = RunConfig.load(args.config) if args.config else preset(args.preset)
    changes = {}
    for flag, key in (("seed", "seed"), ("restarts", "restarts"), ("mode", "mode"),
                      ("c_weight", "c_weight"), ("adam_iters", "adam_iters"),
                      ("lbfgs_iters", "lbfgs_iters")):
        value = getattr(args, flag, None)
        if value is not None:
            changes[key] = value
    if changes.get("mode") == "nonadaptive" and "c_weight" not in changes and cfg.c_weight == 1.0:
        changes["c_weight"] = 100.0
    return cfg.with_(**changes) if changes else cfg


def cmd_train(args):
    from .runner import resolve_out_dir, run

    cfg = load_config(args)
    out = resolve_out_dir(cfg, args.out)

    def progress(restart, rec):
        if not args.quiet:
            keys = ("total", "L_r", "L_b", "L_0", "l2_error")
            body = " ".join(f"{k}={rec[k]:.4e}" for k in keys if k in rec)
            print(f"[restart {restart}] {rec['phase']:6s} step {rec['step']:6d} {body}", flush=True)

    doc = run(cfg, out, progress)
    agg = doc["aggregate"]
    if agg["n"]:
        print(f"L2 error: {agg['l2_mean']:.6e} +- {agg['l2_std']:.6e} over {agg['n']} restart(s)")
    print(f"artifacts: {out}")
    return 0 if doc["status"] == "ok" else 1


def _reference_for(problem, path):
    return get_reference(problem, path=path) if path else get_reference(problem)


def cmd_evaluate(args):
    net = load_model(args.model)
    grid = _reference_for(args.problem, args.reference)
    if net.layer_sizes[0] != len(grid.axes):
        raise DomainError(f"model takes {net.layer_sizes[0]} inputs, grid has {len(grid.axes)} axes")
    err = l2_error(net, grid)
    record = {"model": str(args.model), "problem": args.problem,
              "reference": grid.provenance, "shape": list(grid.shape), "l2_error": err}
    print(json.dumps(record, sort_keys=True))
    if args.out:
        Path(args.out).parent.mkdir(parents=True, exist_ok=True)
        with open(args.out, "w") as fh:
            fh.write(json.dumps(record, sort_keys=True) + "\n")
    return 0


def _run_inputs(run_dir, restart):
    folder = Path(run_dir) / f"restart-{restart:02d}"
    cfg_path = Path(run_dir) / "config.json"
    missing = [str(p) for p in (cfg_path, folder / "model.txt") if not p.exists()]
    if missing:
        raise ConfigError(
            "missing inputs: " + ", ".join(missing) + "; run `sapinn train --out "
            f"{run_dir}` first"
        )
    return RunConfig.load(cfg_path), folder


def cmd_plot(args):
    from . import plotting

    cfg, folder = _run_inputs(args.run, args.restart)
    out = Path(args.out) if args.out else folder / f"{args.kind}.png"
    out.parent.mkdir(parents=True, exist_ok=True)
    if args.kind == "mask-scatter":
        mask_path = folder / "mask.csv"
        if not mask_path.exists():
            raise ConfigError(f"missing input {mask_path}; train in sa mode first")
        rows = []
        with open(mask_path) as fh:
            next(fh)
            for line in fh:
                a, b, g, lam = line.strip().split(",")
                rows.append((float(a), float(b), g, float(lam)))
        axes = get_problem(cfg.problem).axes
        side = plotting.mask_scatter(out, rows, args.group, axes)
    else:
        net = load_model(folder / "model.txt")
        grid = get_reference(cfg.problem, cfg.reference_shape, None, cfg.reference_file)
        values = predict(net, grid.points()).reshape(grid.shape)
        if args.kind == "solution-heatmap":
            side = plotting.solution_heatmap(out, grid, values)
        elif args.kind == "abs-error-map":
            side = plotting.abs_error_map(out, grid, values)
        elif args.kind == "snapshot-slices":
            side = plotting.snapshot_slices(out, grid, values, args.times)
        else:
            r = residual_on_points(get_problem(cfg.problem), net, grid.points())
            side = plotting.residual_map(out, *grid.coords, r.reshape(grid.shape), grid.axes)
    print(f"{out}\n{side}")
    return 0


def cmd_reference(args):
    shape = tuple(args.shape) if args.shape else DEFAULT_SHAPES[args.problem]
    grid = get_reference(args.problem, shape, progress=None if args.quiet else print)
    out = Path(args.out) if args.out else Path(f"{args.problem}-reference.{'txt' if args.text else 'grid'}")
    out.parent.mkdir(parents=True, exist_ok=True)
    write_grid(grid, out, binary=not args.text)
    print(json.dumps({"file": str(out), "provenance": grid.provenance,
                      "shape": list(grid.shape), "solver_meta": grid.solver_meta},
                     sort_keys=True, default=str))
    return 0


def cmd_export_points(args):
    from .optim.training import setup
    from .sampler import write_points

    cfg = load_config(args)
    problem, points, _, _, _ = setup(cfg, args.restart)
    out = Path(args.out) if args.out else Path(f"{cfg.name}-points.csv")
    out.parent.mkdir(parents=True, exist_ok=True)
    write_points(points, out, problem.axes)
    print(out)
    return 0


def build_parser():
    parser = argparse.ArgumentParser(prog="sapinn", description="Self-adaptive PINN runs.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train one configuration over its restarts")
    _add_config_args(p)
    p.add_argument("--out", help="output directory (overrides SAPINN_OUT_DIR and the config)")
    p.add_argument("--quiet", action="store_true")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", help="relative L2 error of a saved model")
    p.add_argument("--model", type=Path, required=True)
    p.add_argument("--problem", choices=sorted(PROBLEMS), required=True)
    p.add_argument("--reference", type=Path, help="grid file to use instead of the built-in oracle")
    p.add_argument("--out", help="write the record to this file")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("plot", help="static figure plus sidecar data from a run directory")
    p.add_argument("kind", choices=KINDS)
    p.add_argument("--run", required=True, help="output directory of `sapinn train`")
    p.add_argument("--restart", type=int, default=0)
    p.add_argument("--group", default="r", choices=("r", "b", "0"))
    p.add_argument("--times", type=float, nargs="+", default=[0.0, 0.5, 1.0])
    p.add_argument("--out", help="image path (sidecar CSV goes next to it)")
    p.set_defaults(func=cmd_plot)

    p = sub.add_parser("reference-solve", help="compute and save a reference grid")
    p.add_argument("--problem", choices=sorted(PROBLEMS), required=True)
    p.add_argument("--shape", type=int, nargs=2)
    p.add_argument("--text", action="store_true", help="text variant instead of binary")
    p.add_argument("--out")
    p.add_argument("--quiet", action="store_true")
    p.set_defaults(func=cmd_reference)

    p = sub.add_parser("export-points", help="write the training points of a configuration")
    _add_config_args(p)
    p.add_argument("--restart", type=int, default=0)
    p.add_argument("--out")
    p.set_defaults(func=cmd_export_points)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except SapinnError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
