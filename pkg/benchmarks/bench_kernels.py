"""Compare the compiled and pure-Python kernels.

    python benchmarks/bench_kernels.py [--repeat 3]

Both backends consume the generator identically, so each pair of timings
below computes the same result; the script checks that too.
"""
import argparse
import time

import numpy as np

from bondperc import kernels
from bondperc.grid import make_window, saturated_edges
from bondperc.inference import ChainConfig, initial_graph_s2, s1_kernel_run, UNIFORM
from bondperc.lattice import full_lattice, make_box
from bondperc.rng import make_rng


def _time(fn, repeat):
    best, out = float("inf"), None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def bench_simulate(backend):
    window = make_window(make_box(2, 201))
    rng = make_rng(1)
    return kernels.simulate(window.mask, window.offsets, window.origin, 0.55, -1,
                            rng.bit_generator, backend=backend)[1]


def bench_s1(backend):
    window = make_window(make_box(2, 11))
    idx = np.sort(window.index([(x, y) for x in range(-5, 6) for y in range(-5, 6)]))
    ea, eb, w = saturated_edges(window, idx)
    cfg = ChainConfig(50_000, 5_000, 10, seed=2)
    return s1_kernel_run(len(idx), ea, eb, w, cfg, UNIFORM, make_rng(2), backend=backend)[0]


def bench_s2(backend):
    n = 50
    plot = full_lattice(2)
    window = make_window(plot, n + 2)
    sites, edges = initial_graph_s2(n, plot)
    verts = window.index(sites)
    ea = window.index([a for a, _ in edges])
    eb = window.index([b for _, b in edges])
    rng = make_rng(3)
    return kernels.s2_chain(window.mask, window.offsets, window.origin, verts, ea, eb, 1.0, 1.0,
                            20_000, 2_000, 10, rng.bit_generator, backend=backend)[0]


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=3)
    args = parser.parse_args()
    backends = ["python"]
    try:
        kernels.get_backend("compiled")
        backends.insert(0, "compiled")
    except ImportError:
        print("compiled kernels unavailable; timing the Python fallback only")
    print(f"{'kernel':<12}" + "".join(f"{b:>12}" for b in backends) + f"{'speedup':>10}  same")
    for name, fn in [("simulate", bench_simulate), ("s1_chain", bench_s1), ("s2_chain", bench_s2)]:
        results = {b: _time(lambda: fn(b), args.repeat) for b in backends}
        row = f"{name:<12}" + "".join(f"{results[b][0]:>11.3f}s" for b in backends)
        if len(backends) == 2:
            speedup = results["python"][0] / results["compiled"][0]
            same = np.array_equal(results["python"][1], results["compiled"][1])
            row += f"{speedup:>9.0f}x  {same}"
        print(row)


if __name__ == "__main__":
    main()
