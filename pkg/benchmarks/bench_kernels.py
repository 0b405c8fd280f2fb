"""Benchmark the numba kernels against the pure-numpy fallback.

Times the three hot kernels at simulation scale and a full end-to-end test
run on both backends. Run directly:

    python benchmarks/bench_kernels.py [--repeats 20]
"""

import argparse
import time

import numpy as np

from mfdglht import SimConfig, gen_sample, run_glht
from mfdglht import _kernels


def time_call(fn, repeats):
    fn()  # warm-up (JIT compilation, caches)
    best = float("inf")
    for _ in range(repeats):
        start = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - start)
    return best


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--repeats", type=int, default=20)
    args = parser.parse_args()

    rng = np.random.default_rng(0)
    n, p, m = 30, 6, 80
    z = rng.normal(size=(n, p, m))
    c2 = rng.normal(size=(25, p, m))
    w = np.full(m, 1.0 / m)

    cfg = SimConfig(n="n3", rho=0.5, scenario="S1", model=1, reps=1, seed=0)
    ds = gen_sample(cfg, [0, 0])
    spec = cfg.contrast_spec()

    cases = [
        ("within_group_scalars(n=30,p=6,m=80)", lambda be: _kernels.within_group_scalars(z, w, backend=be)),
        ("k4_first_term(n=30,p=6,m=80)", lambda be: _kernels.k4_first_term(z, w, backend=be)),
        ("pair_trace_integrals(30x25,p=6,m=80)", lambda be: _kernels.pair_trace_integrals(z, c2, w, backend=be)),
        ("run_glht(k=4,n=n3,p=6,m=80)", lambda be: run_glht(ds, spec, backend=be)),
    ]
    print(f"{'kernel':42s} {'numpy':>12s} {'numba':>12s} {'speedup':>9s}")
    for label, fn in cases:
        times = {}
        for backend in ("numpy", "numba"):
            times[backend] = time_call(lambda: fn(backend), args.repeats)
        ratio = times["numpy"] / times["numba"] if times["numba"] > 0 else float("inf")
        print(
            f"{label:42s} {times['numpy'] * 1e3:9.3f} ms {times['numba'] * 1e3:9.3f} ms "
            f"{ratio:8.2f}x"
        )


if __name__ == "__main__":
    main()
