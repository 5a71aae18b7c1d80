"""Compare the compiled kernel backend against the NumPy fallback.

Run:  python3 benchmarks/bench_kernels.py

Workloads mirror the hot paths: Gram-trace energies over an SDXL-sized
layer set, top-k magnitude sums, and large squared-norm reductions.
Both backends are imported directly so one process measures both.
"""

from __future__ import annotations

import time

import numpy as np

from estlora import _kernels_py

try:
    from estlora import _kernels
except ImportError:
    _kernels = None


def _time(fn, repeat: int = 3) -> float:
    best = float("inf")
    for _ in range(repeat):
        start = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - start)
    return best


def main() -> None:
    rng = np.random.default_rng(0)

    layers = []
    for _ in range(560):
        a = np.ascontiguousarray(rng.standard_normal((8, 640)))
        b = np.ascontiguousarray(rng.standard_normal((640, 8)))
        layers.append((a, b))

    big = np.ascontiguousarray(rng.standard_normal(640 * 640))
    vec = np.ascontiguousarray(rng.standard_normal(4_000_000))

    cases = [
        (
            "gram_trace 560 layers (8x640)",
            lambda impl: [impl.gram_trace(a, b) for a, b in layers],
        ),
        (
            "topk_abs_sum 640*640, k=4096",
            lambda impl: impl.topk_abs_sum(big, 4096),
        ),
        (
            "sum_sq 4M elements",
            lambda impl: impl.sum_sq(vec),
        ),
    ]

    impls = [("numpy", _kernels_py)]
    if _kernels is not None:
        impls.append(("cython", _kernels))
    else:
        print("compiled backend not built; benchmarking the fallback alone")

    width = max(len(name) for name, _ in cases)
    print(f"{'workload':<{width}}  " + "".join(f"{n:>12}" for n, _ in impls) + "     ratio")
    for name, runner in cases:
        times = []
        values = []
        for _, impl in impls:
            times.append(_time(lambda impl=impl: runner(impl)))
            values.append(runner(impl))
        line = f"{name:<{width}}  " + "".join(f"{t * 1e3:>10.2f}ms" for t in times)
        if len(times) == 2:
            line += f"  {times[0] / times[1]:>7.2f}x"
            v0, v1 = values
            same = v0 == v1 if not isinstance(v0, list) else all(
                x == y for x, y in zip(v0, v1)
            )
            if not same:
                line += "  BACKENDS DISAGREE"
        print(line)


if __name__ == "__main__":
    main()
