"""Multi-restart runs and their on-disk artifacts.

Layout of an output directory::

    config.json                 the resolved configuration
    report.json                 aggregate, per-restart summaries, timings
    restart-00/metrics.jsonl    one record per log interval, then a final one
    restart-00/model.txt        trained parameters
    restart-00/mask.csv         final mask export
    restart-00/points.csv       the training points

``metrics.jsonl`` carries no wall-clock data, so identical configurations
give byte-identical files.
"""

import json
import os
from pathlib import Path

from .mask import write_mask
from .network import save_model
from .optim.training import aggregate, train
from .reference import get_reference
from .sampler import write_points

OUT_ENV = "SAPINN_OUT_DIR"


def resolve_out_dir(config, explicit=None):
    """``explicit`` wins, then the environment override, then the config."""
    if explicit:
        return Path(explicit)
    env = os.environ.get(OUT_ENV)
    if env:
        return Path(env)
    return Path(config.out_dir)


def _dump(obj):
    return json.dumps(obj, sort_keys=True, allow_nan=True)


def write_restart(report, folder, axes):
    folder.mkdir(parents=True, exist_ok=True)
    with open(folder / "metrics.jsonl", "w") as fh:
        for rec in report.records:
            fh.write(_dump(rec) + "\n")
    if report.net is not None:
        save_model(report.net, folder / "model.txt")
    if report.mask is not None and report.points is not None:
        write_mask(report.mask, report.points, folder / "mask.csv", axes)
        write_points(report.points, folder / "points.csv", axes)


def run(config, out_dir=None, progress=None):
    """Train ``config.restarts`` restarts and write every artifact.

    Returns the report document (also written as ``report.json``).
    """
    out = resolve_out_dir(config, out_dir)
    out.mkdir(parents=True, exist_ok=True)
    config.save(out / "config.json")
    reference = get_reference(config.problem, config.reference_shape, None, config.reference_file)
    reports = []
    for r in range(config.restarts):
        rep = train(config, restart=r, reference=reference,
                    progress=None if progress is None else (lambda rec, r=r: progress(r, rec)))
        write_restart(rep, out / f"restart-{r:02d}", reference.axes)
        reports.append(rep)
    doc = {
        "config": config.to_dict(),
        "reference": reports[0].reference,
        "restarts": [dict(rep.summary(), timings=rep.timings,
                          artifacts=f"restart-{rep.restart:02d}") for rep in reports],
        "aggregate": aggregate(reports),
        "status": "ok" if all(rep.status.startswith("ok") for rep in reports) else "failed",
    }
    with open(out / "report.json", "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return doc
