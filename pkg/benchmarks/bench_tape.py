"""Compiled vs pure-Python scalar tape.

Times the pointwise workload the scalar tape exists for: the Allen-Cahn
residual of a [2, 20, 20, 20, 1] network at one point (forward pass, two
nested reverse sweeps for u_t and u_xx) followed by the gradient of the
residual with respect to every weight. Usage::

    python benchmarks/bench_tape.py [--repeats 20] [--width 20]
"""

import argparse
import statistics
import time

from sapinn.autodiff.scalar import BACKENDS, Tape
from sapinn.network import ArchitectureSpec, ScalarNetwork, init
from sapinn.problems import AllenCahn, residual


def workload(params, backend, point=(0.3, 0.4)):
    tape = Tape(backend)
    net = ScalarNetwork(params, tape)
    r = residual(AllenCahn(), net, point, tape)
    grads = tape.grad(r, net.leaves())
    return r.value, grads, len(tape)


def time_backend(params, backend, repeats):
    times = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        out = workload(params, backend)
        times.append(time.perf_counter() - t0)
    return statistics.median(times), out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeats", type=int, default=20)
    ap.add_argument("--width", type=int, default=20)
    args = ap.parse_args(argv)
    params = init(ArchitectureSpec([2, args.width, args.width, args.width, 1], "tanh", 0))
    results = {}
    for backend in sorted(BACKENDS):
        results[backend] = time_backend(params, backend, args.repeats)
        med, (value, _, nodes) = results[backend]
        print(f"{backend:8s} median {med * 1e3:9.2f} ms  nodes {nodes:7d}  residual {value:.17g}")
    if len(results) == 2:
        (tp, (vp, gp, _)), (tc, (vc, gc, _)) = results["python"], results["cython"]
        print(f"speedup  {tp / tc:.1f}x  bit-identical: {vp == vc and gp == gc}")
    else:
        print("compiled core not built; only the Python core was timed")


if __name__ == "__main__":
    main()
