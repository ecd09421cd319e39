"""Benchmark the jitted kernels against their pure-numpy fallbacks.

Run as ``python benchmarks/bench_kernels.py``. The same comparison is what
the KINEMON_LAB_DISABLE_NUMBA environment flag switches between at import
time; this script times both implementations directly in one process.
"""

import time

import numpy as np

from kinemon_lab import PhaseGrid
from kinemon_lab import _kernels


def best_of(fn, repeats=7, number=20):
    timings = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        for _ in range(number):
            fn()
        timings.append((time.perf_counter() - t0) / number)
    return min(timings)


def bench_hamiltonian():
    print("Hamiltonian assembly (per call)")
    print(f"{'nodes':>8} {'numpy':>12} {'numba':>12} {'speedup':>9}")
    for n in (51, 201, 401):
        grid = PhaseGrid.symmetric(8.0, n)
        args = (grid.nodes, grid.step, 5.38, 2.0, 0.9, 8.59, 0.35, 0.7)
        t_np = best_of(lambda: _kernels.hamiltonian_numpy(*args))
        if _kernels.hamiltonian_numba is None:
            print(f"{n:>8} {1e6 * t_np:>10.1f}us {'n/a':>12} {'':>9}")
            continue
        _kernels.hamiltonian_numba(*args)  # compile outside the timer
        t_nb = best_of(lambda: _kernels.hamiltonian_numba(*args))
        print(f"{n:>8} {1e6 * t_np:>10.1f}us {1e6 * t_nb:>10.1f}us {t_np / t_nb:>8.1f}x")


def bench_lab_frame():
    print("\nLab-frame RK4 master-equation stepper (2000 steps, 12-dim)")
    rng = np.random.default_rng(3)
    dim = 12
    h = rng.normal(size=(dim, dim))
    h = ((h + h.T) / 2).astype(complex)
    drive = np.diag(rng.normal(size=dim)).astype(complex)
    c1 = np.diag(np.sqrt(np.arange(1.0, dim)), 1).astype(complex)
    c2 = np.diag(np.ones(dim - 1), 1).astype(complex)
    rho0 = np.zeros((dim, dim), dtype=complex)
    rho0[0, 0] = 1.0
    obs = np.eye(dim, dtype=complex)
    args = (h, drive, 4.0, 0.2, c1, 0.0025, c2, 0.01, rho0, 0.01, 2000, c1, obs, 100)

    t_np = best_of(lambda: _kernels.lab_frame_rk4_numpy(*args), repeats=3, number=1)
    print(f"{'numpy':>8} {1e3 * t_np:>10.1f} ms")
    if _kernels.lab_frame_rk4_numba is None:
        print(f"{'numba':>8} {'n/a':>10}")
        return
    _kernels.lab_frame_rk4_numba(*args)
    t_nb = best_of(lambda: _kernels.lab_frame_rk4_numba(*args), repeats=3, number=1)
    print(f"{'numba':>8} {1e3 * t_nb:>10.1f} ms   speedup {t_np / t_nb:.1f}x")


if __name__ == "__main__":
    print(f"numba available: {_kernels.numba is not None}; "
          f"active path: {'numba' if _kernels.NUMBA_ENABLED else 'numpy'}\n")
    bench_hamiltonian()
    bench_lab_frame()
