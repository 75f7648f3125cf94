"""Time every hot kernel on both backends: numba @njit vs the pure-numpy
fallback (the path you get with VSAMIL_NO_NUMBA=1).

Run:  python benchmarks/bench_kernels.py [--repeats 5]
"""

import argparse
import time

import numpy as np

from vsamil import kernels


def timeit(fn, args, repeats):
    fn(*args)  # warm up (and trigger JIT compilation)
    best = np.inf
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def workloads(rng):
    points = rng.normal(size=(20_000, 128))
    centroids = rng.normal(size=(10, 128))
    labels = rng.integers(0, 10, size=20_000)

    param = rng.normal(size=200_000)
    grad = rng.normal(size=200_000)
    m = np.zeros(200_000)
    v = np.zeros(200_000)

    instances = rng.normal(size=(8_000, 128))
    offsets = np.linspace(0, 8_000, 201).astype(np.int64)
    concepts = rng.normal(size=(16, 128))

    sil_points = rng.normal(size=(1_500, 64))
    sil_labels = rng.integers(0, 6, size=1_500)

    return {
        "assign_nearest": (points, centroids),
        "centroid_update": (points, labels, 10),
        "adamw_update": (param, grad, m, v, 0.1, 0.9, 0.999, 1e-8, 0.01, 0.1, 0.001),
        "bag_concept_responses": (instances, offsets, concepts),
        "silhouette_mean_dists": (sil_points, sil_labels, 6),
    }


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--repeats", type=int, default=5)
    args = parser.parse_args()

    if not kernels.NUMBA_ENABLED:
        print("numba backend unavailable (VSAMIL_NO_NUMBA set or numba missing); "
              "only the numpy path can be timed here.")

    rng = np.random.default_rng(0)
    loads = workloads(rng)
    print(f"{'kernel':<24} {'numpy':>10} {'numba':>10} {'speedup':>8}")
    for name, (py_fn, active_fn) in kernels.KERNEL_PAIRS.items():
        py_t = timeit(py_fn, loads[name], args.repeats)
        if active_fn is py_fn:
            print(f"{name:<24} {py_t * 1e3:>9.2f}ms {'-':>10} {'-':>8}")
            continue
        nb_t = timeit(active_fn, loads[name], args.repeats)
        print(f"{name:<24} {py_t * 1e3:>9.2f}ms {nb_t * 1e3:>9.2f}ms {py_t / nb_t:>7.1f}x")


if __name__ == "__main__":
    main()
