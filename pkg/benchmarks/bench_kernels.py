"""Time the compiled kernels against the pure-Python fallback.

    python benchmarks/bench_kernels.py [--repeat 3]

Each row times one workload under both backends and prints the speedup.
"""

import argparse
import time

import numpy as np

from conclust import kernels
from conclust.center_dp import solve_center_exact
from conclust.decomposition import nice_decomposition
from conclust.instances import gen_partial_ktree, gen_random_geometric
from conclust.median_dp import solve_median_fpt
from conclust.msr_msd import PairTable, _csr


def _best(fn, repeat):
    best = float("inf")
    for _ in range(repeat):
        t = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t)
    return best


def workloads():
    inst, td = gen_partial_ktree(14, 3, 2, seed=7)
    nice = nice_decomposition(inst, td)
    geo = gen_random_geometric(60, 4, seed=3, edge_prob=0.1)
    indptr, indices = _csr(geo)
    table = PairTable(geo)
    centers, radii = table.centers, table.radii
    rng = np.random.default_rng(0)
    member = (rng.random((400, 120)) < 0.05).astype(np.uint8)
    member[np.arange(120) % 400, np.arange(120)] = 1
    cap = rng.random(400) * 3
    return {
        "center DP (partial 2-tree, n=14)": lambda: solve_center_exact(inst, nice),
        "median DP (partial 2-tree, n=14)": lambda: solve_median_fpt(inst, nice),
        "connected balls (n=60, all pairs)": lambda: kernels.connected_balls(indptr, indices, geo.dist, centers,
                                                                             radii),
        "dual growth (400 pairs x 120 vertices)": lambda: kernels.grow_duals(member, cap, 1e-9),
    }


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    backends = kernels.available_backends()
    if "cython" not in backends:
        print("compiled extension not built; run `pip install -e . --no-build-isolation` first")
    print(f"{'workload':42s} {'python':>10s} {'cython':>10s} {'speedup':>8s}")
    for name, fn in workloads().items():
        times = {}
        for b in backends:
            with kernels.backend(b):
                times[b] = _best(fn, args.repeat)
        py, cy = times["python"], times.get("cython")
        tail = f"{cy:10.4f} {py / cy:7.1f}x" if cy else f"{'-':>10s} {'-':>8s}"
        print(f"{name:42s} {py:10.4f} {tail}")


if __name__ == "__main__":
    main()
