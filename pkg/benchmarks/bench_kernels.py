"""Compiled vs NumPy timings for the hot kernels.

Usage: python benchmarks/bench_kernels.py [--n 8192] [--repeat 20]
"""
import argparse
import timeit

import numpy as np

from lagspec import _kernels_py

try:
    from lagspec import _kernels
except ImportError:
    _kernels = None


def _cases(n: int, n_rings: int = 12):
    rng = np.random.default_rng(0)
    m = n // 2 + 1
    a = 0.05 * rng.standard_normal(n)
    c = [rng.standard_normal(m) + 1j * rng.standard_normal(m) for _ in range(6)]
    ah = rng.standard_normal(m) + 1j * rng.standard_normal(m)
    vh = rng.standard_normal(m) + 1j * rng.standard_normal(m)
    gh = rng.standard_normal(m) + 1j * rng.standard_normal(m)
    filters = np.abs(rng.standard_normal((n_rings, m)))
    w = np.full(m, 2.0)
    w[0] = w[-1] = 1.0
    return {
        "gamma_remainder": lambda k: k.gamma_remainder(a, 1.4),
        "etd_apply": lambda k: k.etd_apply(*c[:4], ah, vh, c[4], c[5], gh),
        "block_energies": lambda k: k.block_energies(ah, filters, w),
    }


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=8192)
    ap.add_argument("--repeat", type=int, default=20)
    args = ap.parse_args()
    backends = {"python": _kernels_py}
    if _kernels is not None:
        backends["compiled"] = _kernels
    print(f"n = {args.n}, best of {args.repeat}")
    print(f"{'kernel':<18}" + "".join(f"{b:>14}" for b in backends) + f"{'speedup':>10}")
    for name, call in _cases(args.n).items():
        best = {}
        for b, mod in backends.items():
            best[b] = min(timeit.repeat(lambda: call(mod), number=10, repeat=args.repeat)) / 10
        row = f"{name:<18}" + "".join(f"{best[b] * 1e6:>11.1f} us" for b in backends)
        if "compiled" in best:
            row += f"{best['python'] / best['compiled']:>9.2f}x"
        print(row)


if __name__ == "__main__":
    main()
