"""Throughput comparison of the numba and numpy kernel implementations.

Runs each hot kernel on random batches of increasing size and reports the
best-of-N wall time per backend plus the numeric agreement between them.
The numba path is warmed up (JIT-compiled) before timing. Works with
numba absent: the numpy columns are then reported alone.

    python3 benchmarks/bench_kernels.py --sizes 1000,10000,100000 --repeats 5
"""

import argparse
import time

import numpy as np

from calibkit import kernels


def parse_args(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--sizes", default="1000,10000,100000",
                        help="comma-separated batch sizes")
    parser.add_argument("--classes", type=int, default=8)
    parser.add_argument("--bins", type=int, default=10)
    parser.add_argument("--repeats", type=int, default=5,
                        help="timing repeats; the best is reported")
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args(argv)
    args.sizes = [int(s) for s in args.sizes.split(",") if s]
    return args


def make_batch(rng, n, k):
    probs = rng.dirichlet(np.ones(k), size=n)
    probs /= probs.sum(axis=1, keepdims=True)
    labels = rng.integers(0, k, size=n)
    conf = probs.max(axis=1)
    correct = (probs.argmax(axis=1) == labels).astype(np.float64)
    return probs, labels, conf, correct


def best_time(fn, repeats):
    best = float("inf")
    for _ in range(repeats):
        tic = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - tic)
    return best


def flatten(result):
    if isinstance(result, tuple):
        return np.concatenate([np.asarray(part, dtype=np.float64).ravel()
                               for part in result])
    return np.asarray(result, dtype=np.float64).ravel()


def main(argv=None) -> int:
    args = parse_args(argv)
    rng = np.random.default_rng(args.seed)
    edges = kernels.bin_edges(args.bins)
    eps = 1e-6

    have_numba = kernels._HAVE_NUMBA
    header = f"{'kernel':<20} {'n':>8} {'numpy (s)':>11}"
    if have_numba:
        header += f" {'numba (s)':>11} {'speedup':>8} {'max |diff|':>11}"
    print(f"best of {args.repeats}, K={args.classes}, M={args.bins}")
    print(header)
    print("-" * len(header))

    for n in args.sizes:
        probs, labels, conf, correct = make_batch(rng, n, args.classes)
        cases = [
            ("reliability_sums",
             lambda: kernels.reliability_sums_numpy(conf, correct, edges, args.bins),
             (lambda: kernels.reliability_sums_numba(conf, correct, edges, args.bins))
             if have_numba else None),
            ("soft_ece_forward",
             lambda: kernels.soft_ece_forward_numpy(probs, labels, edges, eps, False),
             (lambda: kernels.soft_ece_forward_numba(probs, labels, edges, eps, False))
             if have_numba else None),
            ("soft_ece_backward",
             lambda: kernels.soft_ece_backward_numpy(probs, labels, edges, eps, False),
             (lambda: kernels.soft_ece_backward_numba(probs, labels, edges, eps, False))
             if have_numba else None),
        ]
        for name, np_fn, nb_fn in cases:
            row = f"{name:<20} {n:>8}"
            np_best = best_time(np_fn, args.repeats)
            row += f" {np_best:>11.6f}"
            if nb_fn is not None:
                nb_fn()  # warm-up: trigger (or load the cached) JIT compile
                nb_best = best_time(nb_fn, args.repeats)
                diff = float(np.abs(flatten(np_fn()) - flatten(nb_fn())).max())
                row += f" {nb_best:>11.6f} {np_best / nb_best:>7.1f}x {diff:>11.2e}"
            print(row)
    if not have_numba:
        print("(numba not installed: numpy timings only)")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
