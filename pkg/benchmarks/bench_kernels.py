"""Compare the numba and numpy propagation kernels on generated models.

    python3 benchmarks/bench_kernels.py [--sizes 4,6,8] [--repeat 5] [--seed 0]

For each model size the script times one full enumeration (every exogenous
assignment, null intervention) with each backend, checks that both agree,
and prints a table of median wall-clock times.
"""

import argparse
import statistics
import time

import numpy as np

from abstraq import kernels
from abstraq.harness import GenParams, random_scm


def kernel_args(model):
    p = model.packed
    forced = np.full(len(model.endogenous), -1, dtype=np.int64)
    keys = ("exo_cards", "endo_cards", "order", "par_ptr", "par_src", "par_card", "tab_ptr", "tables")
    return [p[k] for k in keys] + [forced]


def median_time(fn, args, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn(*args)
        times.append(time.perf_counter() - t0)
    return statistics.median(times)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sizes", default="4,6,8", help="comma-separated endogenous variable counts (2..8)")
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    if not kernels.HAVE_NUMBA:
        raise SystemExit("numba is not importable; nothing to compare")
    # Compile once outside the timed region.
    warm = random_scm(GenParams(n_endo=2, seed=args.seed))
    kernels.numba_propagate(*kernel_args(warm))

    print(f"{'n_endo':>6} {'n_exo_states':>12} {'numpy_ms':>10} {'numba_ms':>10} {'speedup':>8}")
    for n in (int(s) for s in args.sizes.split(",")):
        model = random_scm(GenParams(n_endo=n, n_exo=3, max_domain=3, seed=args.seed))
        kargs = kernel_args(model)
        a = kernels.numpy_propagate(*kargs)
        b = kernels.numba_propagate(*kargs)
        if not np.array_equal(a, b):
            raise SystemExit(f"backends disagree on n_endo={n}")
        t_np = median_time(kernels.numpy_propagate, kargs, args.repeat)
        t_nb = median_time(kernels.numba_propagate, kargs, args.repeat)
        print(f"{n:>6} {a.size:>12} {t_np * 1e3:>10.3f} {t_nb * 1e3:>10.3f} {t_np / t_nb:>8.1f}")


if __name__ == "__main__":
    main()
