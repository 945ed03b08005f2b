"""Compare the compiled and pure-Python kernel backends.

Times claim sampling, weakest-first allocation, batched greedy counts and a
full generation step at several population sizes, and checks that both
backends return the same allocation on the same input.

    python benchmarks/bench_kernels.py --sizes 10000 100000 1000000 --repeat 5
"""
import argparse
import sys
import timeit

import numpy as np

from rdbp import kernels
from rdbp.dists import ConstantResource, Exponential, Poisson, Uniform
from rdbp.society import SubPopulationSpec, step_generation

SPECS = [SubPopulationSpec("h", Poisson(2.0), ConstantResource(0.9), Uniform(0.0, 1.0)),
         SubPopulationSpec("i", Poisson(3.0), ConstantResource(0.5), Exponential(1.0))]


def best_of(fn, repeat):
    return min(timeit.repeat(fn, number=1, repeat=repeat))


def bench(size, repeat, backends):
    rng = np.random.default_rng(0)
    half = size // 2
    claims = np.concatenate([rng.random(half), rng.exponential(size=size - half)])
    offsets = np.array([0, half, size], dtype=np.int64)
    budget = 0.35 * size
    batch = rng.random((max(1, size // 100), 100))
    rows = {}
    results = {}
    for name in backends:
        kern = kernels.get_backend(name)
        out = np.empty(size)
        results[name] = kern.allocate(claims, offsets, budget)
        rows[name] = {
            "sample": best_of(lambda: kern.sample_claims(np.random.default_rng(1), SPECS[1].claims, size, out), repeat),
            "allocate": best_of(lambda: kern.allocate(claims, offsets, budget), repeat),
            "greedy": best_of(lambda: kern.greedy_counts(batch, 20.0), repeat),
            "step": best_of(lambda: step_generation((size // 5, size // 5), SPECS,
                                                    np.random.default_rng(2), backend=name), repeat),
        }
    if len(results) == 2:
        a, b = results.values()
        if list(a[0]) != list(b[0]) or a[1] != b[1]:
            sys.exit(f"backends disagree at size {size}")
    return rows


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    p.add_argument("--sizes", type=int, nargs="+", default=[10_000, 100_000, 1_000_000])
    p.add_argument("--repeat", type=int, default=5)
    args = p.parse_args(argv)
    backends = kernels.available_backends()
    print(f"backends: {', '.join(backends)}   (best of {args.repeat}, milliseconds)")
    print(f"{'size':>9} {'kernel':>9} " + " ".join(f"{b:>10}" for b in backends)
          + ("    speedup" if len(backends) == 2 else ""))
    for size in args.sizes:
        rows = bench(size, args.repeat, backends)
        for op in ("sample", "allocate", "greedy", "step"):
            times = [rows[b][op] for b in backends]
            line = f"{size:>9} {op:>9} " + " ".join(f"{1e3 * t:10.2f}" for t in times)
            if len(backends) == 2:
                line += f"   {rows['python'][op] / rows['compiled'][op]:8.1f}x"
            print(line)


if __name__ == "__main__":
    main()
