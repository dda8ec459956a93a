"""Timing of the 3D Henon inner loops for every available backend.

Usage::

    python3 benchmarks/bench_kernels.py [--n 200000] [--repeat 3]

Prints the best wall time per call and the speed-up of the compiled
backend over the pure-Python one, after checking that both return the
same floats.
"""

import argparse
import time

from lorenz_forge import kernels
from lorenz_forge.henon3d import INITIAL_FRAME

# a bounded chaotic orbit (the Lorenz-like target used in the tests)
PARAMS = (0.05, 0.85, 0.7)
SEED = (0.1, 0.1, 0.1)


def cases(n):
    m1, m2, b = PARAMS
    return {
        "iterate": lambda k: k.iterate(m1, m2, b, *SEED, n, 1e6),
        "first_return": lambda k: k.first_return(m1, m2, b, *SEED, n, 1e-300),
        "lyapunov": lambda k: k.lyapunov(m1, m2, b, *SEED, n, 1e6, n // 2, INITIAL_FRAME),
    }


def best_time(fn, repeat):
    best = float("inf")
    out = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=200_000, help="iterates per call")
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)

    names = sorted(kernels.BACKENDS)
    print(f"active backend: {kernels.BACKEND}; n = {args.n}")
    print(f"{'kernel':<14}" + "".join(f"{name + ' [s]':>14}" for name in names) + f"{'speed-up':>12}")
    for label, call in cases(args.n).items():
        times, outs = {}, {}
        for name in names:
            times[name], outs[name] = best_time(lambda: call(kernels.BACKENDS[name]), args.repeat)
        if len(set(map(repr, outs.values()))) != 1:
            raise SystemExit(f"{label}: backends disagree")
        speed = times["python"] / times["cython"] if "cython" in times else float("nan")
        print(f"{label:<14}" + "".join(f"{times[n]:>14.4f}" for n in names) + f"{speed:>11.1f}x")


if __name__ == "__main__":
    main()
