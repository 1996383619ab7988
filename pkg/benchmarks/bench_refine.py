"""Compare the numba and numpy backends on dpbb minimization.

    python benchmarks/bench_refine.py [--sizes 1000 10000 100000] [--repeat 3]

Each size n uses a random LTS with n states and 5n transitions (30% silent).
The deep-chain row exercises a single long tau path, where the numpy backend
pays one vectorized pass per layer.
"""

import argparse
import time

import numpy as np

from dpbb import _kernels
from dpbb.equiv import dpbb_partition
from dpbb.gen import random_lts
from dpbb.lts import TAU, Lts


def _chain(n: int) -> Lts:
    edges = [(i, TAU, i + 1) for i in range(n - 1)]
    edges += [(i, "a", i) for i in range(0, n, 7)]
    return Lts(n, 0, edges)


def _time(lts, name, repeat):
    _kernels.set_backend(name)
    dpbb_partition(lts)  # warm up (jit compile, caches)
    best = float("inf")
    for _ in range(repeat):
        start = time.perf_counter()
        blocks = dpbb_partition(lts).num_blocks
        best = min(best, time.perf_counter() - start)
    return best, blocks


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sizes", type=int, nargs="+", default=[1_000, 10_000, 100_000])
    ap.add_argument("--chain", type=int, default=20_000)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)

    cases = [(f"random n={n}", random_lts(np.random.default_rng(n), n, 5 * n)) for n in args.sizes]
    if args.chain:
        cases.append((f"tau chain n={args.chain}", _chain(args.chain)))

    prev = _kernels.backend()
    print(f"{'case':<24}{'blocks':>9}{'numba s':>10}{'numpy s':>10}{'ratio':>8}")
    try:
        for label, lts in cases:
            t_nb, blocks = _time(lts, "numba", args.repeat)
            t_np, blocks_np = _time(lts, "numpy", args.repeat)
            assert blocks == blocks_np, "backends disagree"
            print(f"{label:<24}{blocks:>9}{t_nb:>10.3f}{t_np:>10.3f}{t_np / t_nb:>8.1f}")
    finally:
        _kernels.set_backend(prev)


if __name__ == "__main__":
    main()
