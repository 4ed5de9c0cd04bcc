"""Compiled vs pure-Python kernels: timing and bit-identity.

    python3 benchmarks/bench_kernels.py [--repeat 3]
"""
import argparse
import math
import time

import numpy as np

from flatlab import _kernels_py, kernels


def _best(fn, repeat):
    best, out = math.inf, None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def _same(a, b) -> bool:
    return all(np.array_equal(np.asarray(x), np.asarray(y)) for x, y in zip(a, b))


CASES = {
    "rauzy_zorich (4 intervals, T=2000)": lambda k: k.rauzy_zorich_run(
        np.array([0.31830988618, 0.27182818284, 0.22360679775, 0.18626513323]),
        np.array([0, 1, 2, 3]), np.array([3, 2, 1, 0]), 2000.0),
    "windtree (a=b=1/2, T=1e5)": lambda k: k.windtree_run(
        0.5, 0.5, 0.75, 0.75, math.cos(0.4142), math.sin(0.4142),
        np.geomspace(100.0, 1e5, 25), 10 ** 10, 0),
}


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)
    if kernels.BACKEND != "cython":
        print("compiled extension not available; only the pure-Python timings are shown")
    print(f"{'kernel':<38}{'python s':>10}{'cython s':>10}{'speedup':>9}  identical")
    for name, case in CASES.items():
        tp, op = _best(lambda: case(_kernels_py), args.repeat)
        if kernels.BACKEND == "cython":
            tc, oc = _best(lambda: case(kernels), args.repeat)
            print(f"{name:<38}{tp:>10.3f}{tc:>10.4f}{tp / tc:>9.1f}  {_same(op, oc)}")
        else:
            print(f"{name:<38}{tp:>10.3f}{'-':>10}{'-':>9}  -")


if __name__ == "__main__":
    main()
