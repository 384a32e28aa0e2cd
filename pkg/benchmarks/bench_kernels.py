"""Time the pure-Python and compiled kernels on the same inputs.

    python3 benchmarks/bench_kernels.py [--repeat N]
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from logrank import _kernels
from logrank.matrix import gen_rigidity_example


def _bits(Z: np.ndarray) -> list[int]:
    return [sum(1 << int(j) for j in np.flatnonzero(row)) for row in Z]


def cases():
    rng = np.random.default_rng(0)
    W = rng.standard_normal((12, 40))
    yield "signed_subset_scan 12x40", lambda k: k.signed_subset_scan(W)

    Z = rng.random((16, 60)) < 0.5
    bits = _bits(Z)
    yield "max_biclique_dfs 16x60", lambda k: k.max_biclique_dfs(bits, 60, _kernels.TARGET_AREA)

    M = np.array(gen_rigidity_example(16, 2).rows) == 0
    zbits = _bits(M)
    yield "max_biclique_bnb 120x120", lambda k: k.max_biclique_bnb(zbits, 120, _kernels.TARGET_MINSIDE)


def best_time(fn, backend, repeat: int) -> float:
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn(backend)
        best = min(best, time.perf_counter() - t0)
    return best


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    backends = [("python", _kernels.python_backend)]
    if _kernels.compiled_backend is not None:
        backends.append(("cython", _kernels.compiled_backend))
    else:
        print("compiled kernels not built; timing the Python fallback only")
    print(f"{'kernel':<28}" + "".join(f"{name:>12}" for name, _ in backends) + f"{'speedup':>10}")
    for label, fn in cases():
        results = [fn(mod) for _, mod in backends]
        if len(results) == 2:
            a, b = results
            # masks must match; float sums may differ in the last bits
            same = all(x == y if isinstance(x, int) else np.isclose(x, y) for x, y in zip(a, b))
            assert same, f"backends disagree on {label}"
        times = [best_time(fn, mod, args.repeat) for _, mod in backends]
        speed = f"{times[0] / times[1]:>9.1f}x" if len(times) == 2 else ""
        print(f"{label:<28}" + "".join(f"{t:>11.4f}s" for t in times) + speed)


if __name__ == "__main__":
    main()
