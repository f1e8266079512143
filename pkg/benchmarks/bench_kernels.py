"""Benchmark: compiled kernels vs the pure-NumPy fallback.

Times the perspective prox (the scalar root solve dominating the inner loop)
and the fused TREX subproblem iteration on the published problem sizes.

    python benchmarks/bench_kernels.py
"""

import time

import numpy as np

from hiersplit._kern import _pykernels
from hiersplit.linop import GramSolver, LinearMap
from hiersplit.trex import TrexSpec, synth_generate

try:
    from hiersplit._kern import _ckernels
except ImportError:
    _ckernels = None


def _time(fn, repeats=3):
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def bench_perspective(backend, n_calls=2000):
    rng = np.random.default_rng(0)
    etas = rng.normal(size=n_calls) * 3.0
    ys = rng.normal(size=(n_calls, 31)) * 3.0

    def run():
        for eta, y in zip(etas, ys):
            backend.perspective_prox(eta, y, 2.0, 0.25)

    return _time(run) / n_calls


def bench_trex_loop(backend, n_iter=2000):
    data, btru = synth_generate(30, 20, float("inf"), seed=0)
    spec = TrexSpec(data)
    M = spec.design_map(1)
    G = GramSolver(LinearMap(M)).inverse_matrix()
    a = float(spec.signed_column(1) @ data.z)

    def run():
        backend.drs1_trex_run(M, G, a, data.z, 2.0, 0.5, 0.975, n_iter, 0.0,
                              None, np.zeros(20), np.zeros(31), btru)

    return _time(run) / n_iter


def main():
    backends = [("pure", _pykernels)]
    if _ckernels is not None:
        backends.append(("compiled", _ckernels))
    rows = []
    for name, mod in backends:
        rows.append((name, bench_perspective(mod), bench_trex_loop(mod)))
    print(f"{'backend':<10} {'perspective prox':>18} {'trex iteration':>16}")
    for name, tp, tt in rows:
        print(f"{name:<10} {tp * 1e6:>14.2f} us {tt * 1e6:>13.2f} us")
    if len(rows) == 2:
        print(
            f"{'speedup':<10} {rows[0][1] / rows[1][1]:>16.1f}x "
            f"{rows[0][2] / rows[1][2]:>14.1f}x"
        )


if __name__ == "__main__":
    main()
