"""Compare the numba-compiled kernels against their numpy equivalents.

    python benchmarks/bench_kernels.py [--repeat 5] [--dim 3] [--degree 10]

Both implementations are called directly (the ``RKHS_WCO_DISABLE_JIT`` flag
only picks the default), so one run times both and checks they agree.
"""

from __future__ import annotations

import argparse
import timeit

import numpy as np

from rkhs_wco import _kernels
from rkhs_wco.mpseries import basis


def cases(dim: int, degree: int, n_points: int, rng: np.random.Generator):
    b = basis(dim, degree)
    a = rng.normal(size=b.size) + 1j * rng.normal(size=b.size)
    c = a.copy()
    c[0] = 2.0
    p = np.zeros(b.size, dtype=np.complex128)
    p[0] = 0.5
    q = np.full(b.size, -0.5, dtype=np.complex128)
    coef = 1.0 / np.arange(1, 20_001, dtype=np.float64)
    t = 0.9 * np.sqrt(rng.random(n_points)) * np.exp(2j * np.pi * rng.random(n_points))
    return {
        f"cauchy_product  (d={dim}, N={degree}, {b.ii.size} products)":
            lambda k: k.cauchy_product(a, a, b.ii, b.jj, b.kk, b.size),
        f"triangular_solve (d={dim}, N={degree}, reciprocal)":
            lambda k: k.triangular_solve(c, p, q, b.nz_ii, b.nz_jj, b.nz_kk, b.deg, 1.0, 0.0, 0.0),
        f"partial_sums    ({n_points} points, |t| < 0.9)":
            lambda k: k.partial_sums(coef, t, 1e-16),
    }


def _first(x):
    return x[0] if isinstance(x, tuple) else x


def main(argv=None) -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--dim", type=int, default=3)
    ap.add_argument("--degree", type=int, default=10)
    ap.add_argument("--points", type=int, default=2000)
    args = ap.parse_args(argv)
    if _kernels.NUMBA is None:
        raise SystemExit("numba is not importable; nothing to compare")
    rng = np.random.default_rng(0)
    print(f"{'kernel':<52} {'numpy [ms]':>11} {'numba [ms]':>11} {'speedup':>8} {'max diff':>9}")
    for label, call in cases(args.dim, args.degree, args.points, rng).items():
        ref = _first(call(_kernels.NUMPY))
        got = _first(call(_kernels.NUMBA))  # also triggers compilation outside the timed region
        times = {}
        for k in (_kernels.NUMPY, _kernels.NUMBA):
            times[k.name] = min(timeit.repeat(lambda k=k: call(k), number=1, repeat=args.repeat)) * 1e3
        diff = float(np.max(np.abs(ref - got)))
        print(f"{label:<52} {times['numpy']:>11.3f} {times['numba']:>11.3f} "
              f"{times['numpy'] / times['numba']:>7.1f}x {diff:>9.1e}")


if __name__ == "__main__":
    main()
