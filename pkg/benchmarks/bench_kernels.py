"""Compare the compiled and numpy/pure-Python kernel backends.

Usage::

    python benchmarks/bench_kernels.py [--repeat 5]

Prints the best-of-N wall time per kernel and backend, plus the speedup.
"""
import argparse
import timeit

import numpy as np

from coldec import kernels


def cases(rng):
    frames = rng.normal(size=(2000, 256))
    weights = rng.uniform(0, 0.6, size=2000)
    a = list(rng.integers(0, 50, size=400))
    b = list(rng.integers(0, 50, size=400))
    flat = rng.normal(size=10 * 5000)  # beam 10 x vocab 5000 candidates
    return {
        "cif_fire T=2000 D=256": lambda m: m.cif_fire(frames, weights, 1.0, True),
        "edit_distance 400x400": lambda m: m.edit_distance(a, b),
        "topk_desc n=50000 k=10": lambda m: m.topk_desc(flat, 10),
        "topk_desc n=2001 k=2": lambda m: m.topk_desc(flat[:2001], 2),
    }


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    found = kernels.backends()
    names = sorted(found)
    print(f"backends: {', '.join(names)} (default: {kernels.BACKEND})")
    header = f"{'kernel':28s}" + "".join(f"{n:>12s}" for n in names)
    if len(names) == 2:
        header += f"{'speedup':>10s}"
    print(header)
    for label, fn in cases(np.random.default_rng(args.seed)).items():
        times = {}
        for n in names:
            mod = found[n]
            number = 3
            times[n] = min(timeit.repeat(lambda: fn(mod), number=number, repeat=args.repeat)) / number
        line = f"{label:28s}" + "".join(f"{times[n] * 1e3:10.3f}ms" for n in names)
        if len(names) == 2:
            line += f"{times['python'] / times['cython']:9.1f}x"
        print(line)


if __name__ == "__main__":
    main()
