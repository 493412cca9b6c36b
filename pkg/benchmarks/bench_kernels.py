"""Compare the numba kernels against their pure-numpy fallbacks.

    python3 benchmarks/bench_kernels.py [--repeat 5] [--size 1000000]

Each kernel is called once before timing so numba compilation is excluded.
"""
import argparse
import time

import numpy as np

from pkrdh import kernels
from pkrdh._accel import USE_NUMBA

Q = 57601


def _best(fn, args, repeat):
    fn(*args)
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def cases(size, rng):
    lam = rng.integers(0, Q, size)
    h = rng.integers(0, 256, size)
    l = rng.integers(0, 256, size)
    rows = max(1, size // 240)
    u = rng.integers(0, Q, (rows, 240))
    c = rng.integers(0, Q, rows)
    s = rng.integers(0, Q, 240)
    side = int(np.sqrt(size))
    a = rng.integers(0, 256, (side, side)).astype(np.float64)
    b = np.clip(a + rng.integers(-5, 6, a.shape), 0, 255)
    c1, c2 = (0.01 * 255) ** 2, (0.03 * 255) ** 2
    return {
        "centered": (lam, Q),
        "decrypt_bits": (lam, Q),
        "sign_factors": (lam, Q),
        "extract_levels": (lam, Q, 7200),
        "available_mask": (h, l, 10),
        "quantize_rows": (u, c, s, Q),
        "ssim_mean": (a, b, 8, c1, c2),
    }


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--size", type=int, default=10**6)
    args = ap.parse_args()
    if not USE_NUMBA:
        print("numba disabled (PKRDH_DISABLE_NUMBA); timing the numpy path twice")
    rng = np.random.default_rng(0)
    print(f"{'kernel':<16}{'numba ms':>12}{'numpy ms':>12}{'speedup':>10}")
    for name, call_args in cases(args.size, rng).items():
        nb, np_ = kernels.PAIRS[name]
        t_nb = _best(nb, call_args, args.repeat)
        t_np = _best(np_, call_args, args.repeat)
        print(f"{name:<16}{t_nb * 1e3:>12.2f}{t_np * 1e3:>12.2f}{t_np / t_nb:>9.1f}x")


if __name__ == "__main__":
    main()
