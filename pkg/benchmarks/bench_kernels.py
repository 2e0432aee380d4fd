"""Time the numba kernels against the pure-numpy fallback.

    python benchmarks/bench_kernels.py --queries 5000 --depth 200 --repeat 5

Each kernel is called once untimed so numba compilation is excluded, then
the best of ``--repeat`` runs is reported. Outputs are also checked for
bit-identity between the two backends.
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from xmreval import kernels


def best_of(fn, repeat):
    fn()
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--queries", type=int, default=5000, help="rows per kernel call")
    ap.add_argument("--depth", type=int, default=200, help="ranked depth (columns)")
    ap.add_argument("--gallery", type=int, default=5000, help="gallery size for the plausible-match kernel")
    ap.add_argument("--classes", type=int, default=80, help="class-vector length")
    ap.add_argument("--tau-length", type=int, default=3000, help="list length for tau-b counting")
    ap.add_argument("--repeat", type=int, default=5, help="timed repetitions per kernel")
    ap.add_argument("--seed", type=int, default=0, help="random seed")
    args = ap.parse_args(argv)

    if kernels.numba_backend is None:
        raise SystemExit("numba backend unavailable (not installed, or XMREVAL_DISABLE_NUMBA is set)")

    rng = np.random.default_rng(args.seed)
    match = (rng.random((args.queries, args.depth)) < 0.1).astype(np.float64)
    R = rng.integers(1, args.depth, size=args.queries)
    qbits = rng.integers(0, 2, size=(min(args.queries, 500), args.classes)).astype(np.uint8)
    gbits = rng.integers(0, 2, size=(args.gallery, args.classes)).astype(np.uint8)
    x = rng.integers(0, 50, size=args.tau_length).astype(np.float64)
    y = rng.integers(0, 50, size=args.tau_length).astype(np.float64)

    cases = {
        "recall_at_k": lambda impl: kernels.recall_at_k(match, 10, impl),
        "r_precision": lambda impl: kernels.r_precision(match, R, impl),
        "map_at_r": lambda impl: kernels.map_at_r(match, R, impl),
        "plausible_mask": lambda impl: kernels.plausible_mask(qbits, gbits, 2, impl),
        "tau_b_counts": lambda impl: kernels.tau_b_counts(x, y, impl),
    }
    print(f"{'kernel':<16}{'numpy ms':>12}{'numba ms':>12}{'speedup':>10}  identical")
    for name, fn in cases.items():
        a = fn(kernels.numpy_backend)
        b = fn(kernels.numba_backend)
        same = (a == b) if isinstance(a, tuple) else (np.asarray(a).tobytes() == np.asarray(b).tobytes())
        t_np = best_of(lambda: fn(kernels.numpy_backend), args.repeat)
        t_nb = best_of(lambda: fn(kernels.numba_backend), args.repeat)
        print(f"{name:<16}{t_np * 1e3:>12.2f}{t_nb * 1e3:>12.2f}{t_np / t_nb:>9.1f}x  {same}")


if __name__ == "__main__":
    main()
