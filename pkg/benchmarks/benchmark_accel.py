"""Benchmark the numba-accelerated hot kernels against the pure-numpy
fallback (the path selected when BESSELLE_NO_NUMBA=1).

Run:  python3 benchmarks/benchmark_accel.py
"""

import time

import numpy as np

from besselle import bridge
from besselle._accel import HAVE_NUMBA, USE_NUMBA
from besselle.specfun import AlphaIndex


def timeit(fn, repeats=5):
    fn()  # warm-up / JIT compile
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def bench_bridge_paths():
    grid = np.linspace(0.0, 1.0, 17)
    uniforms = np.random.default_rng(0).random((500, 15))
    args = (0.0, grid, 1.0, 2.0, uniforms, 1024)
    t_np = timeit(lambda: bridge._bridge_paths_numpy(*args))
    out = {"numpy": t_np}
    if HAVE_NUMBA:
        t_nb = timeit(lambda: bridge._bridge_paths_njit(*args))
        out["numba"] = t_nb
        a = bridge._bridge_paths_njit(*args)
        b = bridge._bridge_paths_numpy(*args)
        out["max_diff"] = float(np.abs(a - b).max())
    return out


def bench_glauber():
    from besselle import glauber
    from besselle.bridge import BridgeBoundary
    from besselle.experiments import discrete_marginal

    idx = AlphaIndex(0.0)
    b = BridgeBoundary(1, 0.0, 1.0, [1.0], [1.0])
    # the pure-python fallback is orders of magnitude slower; keep its
    # workload small so the benchmark still terminates promptly
    n_events = 200000 if USE_NUMBA else 2000

    def run():
        discrete_marginal(idx, b, 4, 2, 1, n_events, 1)

    return {"events_per_sec": n_events / timeit(run, repeats=3)}


def main():
    print(f"numba available: {HAVE_NUMBA}; accelerated path in use: {USE_NUMBA}")
    res = bench_bridge_paths()
    line = f"bridge sampling (500 paths, 15 steps, 1024-pt CDF): numpy {res['numpy']*1e3:.1f} ms"
    if "numba" in res:
        line += (
            f", numba {res['numba']*1e3:.1f} ms "
            f"({res['numpy']/res['numba']:.1f}x), max diff {res['max_diff']:.2e}"
        )
    print(line)
    g = bench_glauber()
    print(f"glauber chain: {g['events_per_sec']:.3g} events/s on the active path")


if __name__ == "__main__":
    main()
