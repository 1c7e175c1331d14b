"""Time the numba kernels against their numpy fallbacks on classifier-sized inputs.

    python3 benchmarks/bench_kernels.py --repeat 5
"""
import argparse
import timeit

import numpy as np

from csure import kernels
from csure._backend import HAS_NUMBA


def make_cases(rng, n, length, channels):
    u = rng.normal(0.0, 0.5, (n, length, 1))
    t = rng.uniform(-np.pi, np.pi, (n, length, 1))
    alpha = rng.dirichlet(np.ones(5), channels)[:, :, None]
    T = (length - 5) // 2 + 1
    fu = rng.normal(size=(n, T, channels))
    ft = rng.uniform(-np.pi, np.pi, (n, T, channels))
    pu = rng.normal(size=(4, channels))
    pt = rng.uniform(-np.pi, np.pi, (4, channels))
    xbar_u, xbar_t = rng.normal(size=512), rng.uniform(-np.pi, np.pi, 512)
    mu_u, mu_t = rng.normal(size=64), rng.uniform(-1, 1, 64)
    lam = np.geomspace(1e-3, 1e3, 61)
    th = rng.uniform(-np.pi, np.pi, (n * T, 10))
    return {
        "circular_mean": (th, np.full(th.shape, 0.1)),
        "wfm_windows": (u, t, alpha, 2),
        "sure_loss_grid": (xbar_u, xbar_t, xbar_u, xbar_t, mu_u, mu_t, lam, 0.25, 10, 2),
        "min_distance": (fu, ft, pu, pt),
    }


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=160, help="signals per batch")
    ap.add_argument("--length", type=int, default=128)
    ap.add_argument("--channels", type=int, default=8)
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)

    cases = make_cases(np.random.default_rng(args.seed), args.n, args.length, args.channels)
    print(f"{'kernel':<16}{'numpy ms':>12}{'numba ms':>12}{'speedup':>10}")
    for name, call_args in cases.items():
        np_fn = getattr(kernels, f"np_{name}")
        t_np = min(timeit.repeat(lambda: np_fn(*call_args), number=1, repeat=args.repeat)) * 1e3
        if HAS_NUMBA:
            nb_fn = getattr(kernels, f"nb_{name}")
            nb_fn(*call_args)  # compile or load from cache
            t_nb = min(timeit.repeat(lambda: nb_fn(*call_args), number=1, repeat=args.repeat)) * 1e3
            print(f"{name:<16}{t_np:>12.2f}{t_nb:>12.2f}{t_np / t_nb:>9.1f}x")
        else:
            print(f"{name:<16}{t_np:>12.2f}{'n/a':>12}{'':>10}")


if __name__ == "__main__":
    main()
