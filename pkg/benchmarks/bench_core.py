"""Time the compiled kernels against their pure-Python twins.

    python3 benchmarks/bench_core.py [--repeat 3]

Both back ends get identical inputs and seeds, so the outputs are also
checked for equality before any timing is reported.
"""

import argparse
import time

import numpy as np

from mbtrees._kernels import backend
from mbtrees.gw import GWSpec, count_tables
from mbtrees.growth import GrowthSpec, build_brick_set
from mbtrees.models import KernelModel


def cases():
    tab = KernelModel("two_type_mixed", {}).build(2000).tables()
    spec = GWSpec(([((0, 0), 0.25), ((0, 4), 0.75)],
                   [((0, 0), 0.5), ((1, 0), 0.25), ((0, 1), 0.25)])).validate()
    gw_arrays = count_tables(spec, 2000).sampler_arrays()
    bricks = build_brick_set(GrowthSpec((-1, 0, 1), (((-1, 0), 0.5), ((-1, 0, 1), 0.5))))
    par, types = bricks.trees[0]
    t0 = (np.array(par, dtype=np.int64), np.array(types, dtype=np.int64))
    urn = np.array([[1.0, 1.5, 2.25]] * 50)
    return {
        "rng_stream (1e5 draws)": lambda c: c.rng_stream(1, 10**5),
        "tabulated tree (n=2000)": lambda c: c.tab_sample_tree(*tab, 2000, 1, 1, 10**6),
        "tagged chain x200 (n=2000)": lambda c: [c.tab_tagged_chain(*tab, 2000, 1, s, 10**6) for s in range(200)],
        "GW conditioned tree (n=2000)": lambda c: c.gw_sample_tree(*gw_arrays, 2000, 1, 1, True, 10**7),
        "growth (3000 steps)": lambda c: c.grow_tree(*t0, *bricks.brick_arrays(), 3000, 1),
        "root splits (n=1000, 50 reps)": lambda c: c.growth_root_split(1000, 1, *bricks.root_split_arrays(1), 50, 1),
        "urn (50 x 2000 steps)": lambda c: c.urn_run_many(urn, np.array([1.0, 2.0]), np.array([0.5, 1.0]), 2000, 1),
    }


def timed(fn, repeat):
    best = float("inf")
    for _ in range(repeat):
        t = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t)
    return best, out


def _equal(a, b):
    if isinstance(a, (tuple, list)):
        return len(a) == len(b) and all(_equal(x, y) for x, y in zip(a, b))
    if isinstance(a, np.ndarray):
        return np.array_equal(a, b)
    return a == b


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    py = backend("python")
    try:
        fast = backend("compiled")
    except ImportError:
        fast = None
        print("compiled extension not built; timing the Python back end only")
    print(f"{'kernel':32s} {'python s':>10s} {'compiled s':>11s} {'speedup':>8s}")
    for name, fn in cases().items():
        tp, out_p = timed(lambda: fn(py), args.repeat)
        if fast is None:
            print(f"{name:32s} {tp:10.4f}")
            continue
        tc, out_c = timed(lambda: fn(fast), args.repeat)
        flag = "" if _equal(out_p, out_c) else "  OUTPUTS DIFFER"
        print(f"{name:32s} {tp:10.4f} {tc:11.5f} {tp / tc:7.0f}x{flag}")


if __name__ == "__main__":
    main()
