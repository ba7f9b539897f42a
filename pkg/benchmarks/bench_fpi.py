"""Compare the compiled and pure-Python fixed-point kernels.

Runs a fixed number of iterations (no early stop) on corpus problems of
increasing size and reports iterations per second for each backend, the
speedup, and the largest difference between the final iterates.

Usage::

    python3 benchmarks/bench_fpi.py [--iters N] [--repeat R]
"""
import argparse
import time

import numpy as np

from msfactor import corpus, kernels, nme


def timed(prob, backend, iters, repeat):
    cfg = nme.SolverConfig(tol_residual=0.0, tol_step=0.0, max_iter=iters, record_trace=False)
    best = np.inf
    res = None
    for _ in range(repeat):
        t = time.perf_counter()
        res = nme.fpi_solve(prob, cfg, backend=backend)
        best = min(best, time.perf_counter() - t)
    return best, res


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--iters", type=int, default=20000)
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--examples", type=int, nargs="*", default=[2, 3, 1, 7])
    args = ap.parse_args(argv)

    backends = kernels.available_backends()
    if "compiled" not in backends:
        print("compiled kernel not built; only the python backend is timed")
    print(f"{'example':>8} {'d':>3} {'iters':>6} " + " ".join(f"{b + ' it/s':>16}" for b in backends)
          + f" {'speedup':>8} {'max |dX|':>10}")
    for i in args.examples:
        prob = corpus.get(i).problem()
        times, results = {}, {}
        for b in backends:
            times[b], results[b] = timed(prob, b, args.iters, args.repeat)
        # an exactly fixed iterate ends the run early, so use the count performed
        rates = " ".join(f"{max(results[b].iterations, 1) / times[b]:16.0f}" for b in backends)
        if len(backends) == 2:
            speedup = times["python"] / times["compiled"]
            diff = float(np.max(np.abs(results["python"].X - results["compiled"].X)))
            tail = f" {speedup:8.1f} {diff:10.1e}"
        else:
            tail = ""
        print(f"{i:>8} {prob.d:>3} {results[backends[0]].iterations:>6} {rates}{tail}")


if __name__ == "__main__":
    main()
