"""Compare the compiled and numpy LU kernels on KKT-sized dense systems.

    python benchmarks/bench_lu.py [--sizes 20 60 150 400] [--rhs 5] [--repeat 5]

scipy's LAPACK-backed ``lu_factor`` is timed as a reference when installed.
"""

import argparse
import timeit

import numpy as np

from kkt_sense import linalg


def _time(fn, repeat):
    fn()
    return min(timeit.repeat(fn, number=1, repeat=repeat))


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sizes", type=int, nargs="+", default=[20, 60, 150, 400])
    ap.add_argument("--rhs", type=int, default=5, help="right-hand sides per solve")
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()

    try:
        import scipy.linalg as sla
    except ImportError:
        sla = None

    backends = linalg.available_backends()
    cols = backends + (["scipy"] if sla else [])
    print(f"{'n':>6}" + "".join(f"{c + ' (ms)':>16}" for c in cols) + f"{'speedup':>10}")
    rng = np.random.default_rng(0)
    for n in args.sizes:
        A = rng.standard_normal((n, n)) + n * np.eye(n)
        B = rng.standard_normal((n, args.rhs))
        times = {}
        for be in backends:
            times[be] = _time(lambda: linalg.LUFactorization(A, backend=be).solve(B), args.repeat)
        if sla:
            times["scipy"] = _time(lambda: sla.lu_solve(sla.lu_factor(A), B), args.repeat)
        row = f"{n:>6}" + "".join(f"{1e3 * times[c]:>16.3f}" for c in cols)
        if "cython" in times:
            row += f"{times['python'] / times['cython']:>9.1f}x"
        print(row)


if __name__ == "__main__":
    main()
