#!/usr/bin/env python3
"""Benchmark the numba kernels against the pure-numpy fallback.

Times the standard and log-domain solvers on production-shaped problems
(51 image views x 51 descriptions, the default operating point) and on the
small desk-scale instances the acceptance oracle uses.  Run from the repo
root:

    python3 benchmarks/bench_sinkhorn.py

The dispatch flag AWT_NUMBA only selects the default backend; this script
calls both implementations directly, so one process covers the comparison.
"""

from __future__ import annotations

import time

import numpy as np

from awt import _kernels


def make_instance(rng, n, m):
    C = rng.uniform(0.0, 2.0, (n, m))
    a = rng.dirichlet(np.ones(n))
    b = rng.dirichlet(np.ones(m))
    return C, a, b


def bench(fn, instances, eps, max_iter, tol, repeats=3):
    best = np.inf
    for _ in range(repeats):
        start = time.perf_counter()
        for C, a, b in instances:
            fn(C, a, b, eps, max_iter, tol)
        best = min(best, time.perf_counter() - start)
    return best


def main() -> None:
    if not _kernels.NUMBA_AVAILABLE:
        raise SystemExit("numba is not importable; nothing to compare")

    rng = np.random.default_rng(0)
    cases = [
        ("51x51, eps=0.1, std   ", 0.1, 200, 1e-6, [make_instance(rng, 51, 51) for _ in range(20)],
         _kernels._std_numba, _kernels._std_numpy),
        ("51x51, eps=0.01, log  ", 0.01, 2000, 1e-6, [make_instance(rng, 51, 51) for _ in range(20)],
         _kernels._log_numba, _kernels._log_numpy),
        ("2..8 sq, eps=0.001 log", 0.001, 20000, 1e-9,
         [make_instance(rng, int(rng.integers(2, 9)), int(rng.integers(2, 9))) for _ in range(100)],
         _kernels._log_numba, _kernels._log_numpy),
    ]

    # compile outside the timed region
    warm = make_instance(rng, 4, 4)
    _kernels._std_numba(*warm, 0.1, 10, 1e-6)
    _kernels._log_numba(*warm, 0.01, 10, 1e-6)

    print(f"{'case':<24} {'numba':>10} {'numpy':>10} {'speedup':>9}")
    for name, eps, max_iter, tol, instances, fn_numba, fn_numpy in cases:
        t_nb = bench(fn_numba, instances, eps, max_iter, tol)
        t_np = bench(fn_numpy, instances, eps, max_iter, tol)
        print(f"{name:<24} {t_nb:>9.4f}s {t_np:>9.4f}s {t_np / t_nb:>8.1f}x")

    # sanity: identical sweep order means near-identical plans
    C, a, b = make_instance(rng, 6, 7)
    P1, i1, v1, _ = _kernels._log_numba(C, a, b, 0.01, 2000, 1e-9)
    P2, i2, v2, _ = _kernels._log_numpy(C, a, b, 0.01, 2000, 1e-9)
    print(f"\nagreement: max|P_numba - P_numpy| = {np.max(np.abs(P1 - P2)):.2e} "
          f"(iterations {i1} vs {i2})")


if __name__ == "__main__":
    main()
