"""Time the numba and numpy flavours of every hot kernel side by side.

    python bench/bench_kernels.py [--repeat N] [--csv out.csv]

The first numba call of each kernel (compilation) is excluded; each timing is
the best of ``--repeat`` runs.
"""

import argparse
import csv
import sys
import time

import numpy as np
from scipy.linalg import cholesky, solve_triangular

from safeopt_ps import kernels
from safeopt_ps.benchmarks.pid import SAFE_GAINS, PlantModel


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def cases(rng):
    R, m, n = 60, 2000, 3
    X = rng.uniform(size=(R, n))
    inv_ls = 1.0 / rng.uniform(0.2, 0.6, size=n)
    K = kernels.NUMPY.sqexp_cross(X, X, inv_ls, 2.0) + 1e-4 * np.eye(R)
    L = np.ascontiguousarray(cholesky(K, lower=True))
    alpha = solve_triangular(L.T, solve_triangular(L, rng.normal(size=R), lower=True))
    Q = rng.uniform(size=(m, n))
    Xo = rng.uniform(size=(m, n))

    plant = PlantModel()
    Ad, Bd = plant.discrete()
    N = plant.n_samples
    ref = np.minimum(plant.time(), 1.0)
    c = np.array([0.0, 1.0, 0.0])
    buf = [np.zeros(N) for _ in range(3)]
    t = plant.time()
    s = np.exp(-0.5 * t) * np.sin(40 * t)

    return {
        "sqexp_cross": lambda ns: ns.sqexp_cross(Q, X, inv_ls, 2.0),
        "posterior_predict": lambda ns: ns.posterior_predict(Q, X, inv_ls, 2.0, L, alpha),
        "pair_predict": lambda ns: ns.pair_predict(Xo, Q, X, inv_ls, 2.0, L, alpha, 1e-4, 2.0),
        "cascade_loop": lambda ns: ns.cascade_loop(Ad, Bd, c, ref, *SAFE_GAINS[0], 1e-3, 1e6,
                                                   *buf),
        "peak_slope": lambda ns: ns.peak_slope(t, s),
    }


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=20)
    ap.add_argument("--csv", help="also write the table to this file")
    args = ap.parse_args(argv)
    if kernels.NUMBA is None:
        print("numba is not installed; nothing to compare", file=sys.stderr)
        return 1
    rows = []
    for name, call in cases(np.random.default_rng(0)).items():
        call(kernels.NUMBA)  # compile
        t_np = best_of(lambda: call(kernels.NUMPY), args.repeat)
        t_nb = best_of(lambda: call(kernels.NUMBA), args.repeat)
        rows.append((name, 1e3 * t_np, 1e3 * t_nb, t_np / t_nb))
    print(f"{'kernel':<20}{'numpy ms':>12}{'numba ms':>12}{'speed-up':>10}")
    for name, a, b, r in rows:
        print(f"{name:<20}{a:>12.3f}{b:>12.3f}{r:>10.1f}")
    if args.csv:
        with open(args.csv, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["kernel", "numpy_ms", "numba_ms", "speedup"])
            w.writerows(rows)
    return 0


if __name__ == "__main__":
    sys.exit(main())
