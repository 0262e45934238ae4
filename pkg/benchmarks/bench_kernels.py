"""Compare the compiled kernels against the pure-Python fallback.

    python benchmarks/bench_kernels.py [--repeat 3]

Prints the best-of-``repeat`` wall time per kernel and size, and checks
that both backends return the same result.
"""

import argparse
import timeit

import numpy as np

from routeio._backend import AVAILABLE, Backend


def cases(rng):
    for n in (10, 13, 16):
        w = rng.random((n, n))
        yield f"held_karp n={n}", lambda be, w=w, n=n: be.held_karp(w, range(n), 1e-10)
    for n in (30, 60, 120):
        w = rng.random((n, n))
        tour = rng.permutation(n).tolist()
        yield f"local_search n={n}", lambda be, w=w, t=tour: be.local_search(w, t, 1e-10, 0)
    for n in (50, 200):
        m = rng.random((n, n))
        same = np.eye(n, dtype=np.uint8)
        np.fill_diagonal(m, 0.0)
        ga, gb = rng.random(n), rng.random(n)
        yield f"erp len={n}", lambda be, m=m, s=same, a=ga, b=gb: be.erp(m, s, a, b, 1e-12)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)
    if "compiled" not in AVAILABLE:
        raise SystemExit("compiled kernels are not built; run `pip install --no-build-isolation -e .`")
    backends = [Backend("compiled"), Backend("python")]
    print(f"{'kernel':<22}{'compiled [ms]':>15}{'python [ms]':>14}{'speedup':>10}  same")
    for name, fn in cases(np.random.default_rng(args.seed)):
        times, results = [], []
        for be in backends:
            results.append(fn(be))
            times.append(min(timeit.repeat(lambda: fn(be), number=1, repeat=args.repeat)) * 1e3)
        same = results[0] == results[1]
        print(f"{name:<22}{times[0]:>15.3f}{times[1]:>14.3f}{times[1] / times[0]:>9.0f}x  {same}")


if __name__ == "__main__":
    main()
