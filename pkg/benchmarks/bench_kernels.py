"""Timing comparison between the compiled kernels and the numpy fallback.

Run from the repository root after an editable install:

    python3 benchmarks/bench_kernels.py

Both backends are imported directly, so the script works regardless of
which one the package selected at import time.  If the compiled module
is missing (build skipped or unavailable), only the fallback is timed.
"""

import argparse
import time

import numpy as np

from netquant import _kernels_py
from netquant.graph import build_graph

try:
    from netquant import _kernels
except ImportError:
    _kernels = None


def random_graph(node_count, avg_degree, rng):
    edge_count = node_count * avg_degree // 2
    heads = rng.integers(0, node_count, size=edge_count)
    tails = rng.integers(0, node_count, size=edge_count)
    keep = heads != tails
    edges = np.stack([heads[keep], tails[keep]], axis=1)
    return build_graph(edges, node_count)


def best_of(fn, repeats=7):
    timings = []
    for _ in range(repeats):
        start = time.perf_counter()
        fn()
        timings.append(time.perf_counter() - start)
    return min(timings)


def run_case(node_count, avg_degree, dim, rng):
    g = random_graph(node_count, avg_degree, rng)
    state = rng.uniform(-1.0, 1.0, size=(g.node_count, dim))
    vector = rng.uniform(-1.0, 1.0, size=g.node_count)

    rows = []
    backends = [("python", _kernels_py)]
    if _kernels is not None:
        backends.append(("compiled", _kernels))

    results = {}
    for name, mod in backends:
        t_ns = best_of(lambda: mod.neighbor_sum(g.indptr, g.indices, state))
        t_sp = best_of(lambda: mod.spmv(g.indptr, g.indices, vector))
        results[name] = (t_ns, t_sp)
        rows.append((name, t_ns, t_sp))

    if _kernels is not None:
        a = _kernels.neighbor_sum(g.indptr, g.indices, state)
        b = _kernels_py.neighbor_sum(g.indptr, g.indices, state)
        if not np.array_equal(a, b):
            raise AssertionError("backends disagree on neighbor_sum")
        a = _kernels.spmv(g.indptr, g.indices, vector)
        b = _kernels_py.spmv(g.indptr, g.indices, vector)
        if not np.array_equal(a, b):
            raise AssertionError("backends disagree on spmv")

    print(f"\nnodes={node_count} edges={g.edge_count} dim={dim}")
    print(f"  {'backend':<10} {'neighbor_sum':>14} {'spmv':>14}")
    for name, t_ns, t_sp in rows:
        print(f"  {name:<10} {t_ns * 1e3:>12.3f}ms {t_sp * 1e3:>12.3f}ms")
    if _kernels is not None:
        py_ns, py_sp = results["python"]
        c_ns, c_sp = results["compiled"]
        print(f"  {'speedup':<10} {py_ns / c_ns:>13.2f}x {py_sp / c_sp:>13.2f}x")
        print("  outputs bitwise identical across backends")


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--seed", type=int, default=7)
    args = parser.parse_args()

    rng = np.random.default_rng(args.seed)
    if _kernels is None:
        print("compiled backend unavailable, timing the fallback only")
    for node_count, avg_degree, dim in [
        (2_000, 8, 16),
        (20_000, 12, 64),
        (100_000, 16, 64),
    ]:
        run_case(node_count, avg_degree, dim, rng)


if __name__ == "__main__":
    main()
