"""Time the numpy and numba kernel backends on the same inputs.

Run with ``python3 benchmarks/bench_kernels.py [-n N] [--repeat R]``.
Each kernel is called once per backend before timing so numba compilation
is excluded; the best of ``--repeat`` runs is reported.
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from telecert import kernels
from telecert.geometry import sample_uniform_sphere, sample_unit_quaternions


def best_of(fn, args, repeat: int) -> float:
    fn(*args)
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn(*args)
        times.append(time.perf_counter() - t0)
    return min(times)


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("-n", type=int, default=1_000_000, help="vectors per call")
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args()

    if kernels.numba_impl is None:
        raise SystemExit("numba is not installed; nothing to compare")

    rng = np.random.default_rng(0)
    n = args.n
    a = np.ascontiguousarray(sample_uniform_sphere(rng, n))
    b = np.ascontiguousarray(sample_uniform_sphere(rng, n))
    l1 = np.ascontiguousarray(sample_uniform_sphere(rng, n))
    l2 = np.ascontiguousarray(sample_uniform_sphere(rng, n))
    q = np.ascontiguousarray(sample_unit_quaternions(rng, n))
    u = rng.random(n)
    caps = np.array([np.sqrt(2) - 0.75, np.sqrt(2) - 0.75, 0.75])
    probs = np.ascontiguousarray(kernels.numpy_impl.linear_probabilities(a, b).reshape(n, 8))

    cases = {
        "sector_index": (a,),
        "pcrit_map": (a, 1 / np.sqrt(2)),
        "capped_map": (a, caps),
        "linear_probabilities": (a, b),
        "sample_categorical": (probs, u),
        "toner_bacon": (a, b, l1, l2),
        "frame_gisin": (a, b, q, u),
    }
    print(f"n = {n}, best of {args.repeat}")
    print(f"{'kernel':<22}{'numpy [ms]':>12}{'numba [ms]':>12}{'speedup':>10}")
    for name, call_args in cases.items():
        t_np = best_of(getattr(kernels.numpy_impl, name), call_args, args.repeat)
        t_nb = best_of(getattr(kernels.numba_impl, name), call_args, args.repeat)
        print(f"{name:<22}{1e3 * t_np:>12.2f}{1e3 * t_nb:>12.2f}{t_np / t_nb:>9.1f}x")


if __name__ == "__main__":
    main()
