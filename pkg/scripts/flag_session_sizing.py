"""Exact probability that an honest broadcast session ends in ⊥, against its size m.

An honest receiver gets |J| ~ Bin(m, 1/3) indices, and each non-x digit
appears Bin(|J|, 1/2) times inside J. The session yields ⊥ when |J| < m/6 or
the split leaves [1/2 - tol, 1/2 + tol]. Both receivers see the same split,
so this is also the per-session failure rate.
"""

import argparse

import numpy as np
from scipy import stats


def bottom_probability(m: int, tol: float = 0.15) -> float:
    j_min = max(1, m // 6)
    total = 0.0
    for j in range(j_min, m + 1):
        pj = stats.binom.pmf(j, m, 1 / 3)
        if pj < 1e-300:
            continue
        lo = int(np.ceil((0.5 - tol) * j - 1e-9))
        hi = int(np.floor((0.5 + tol) * j + 1e-9))
        inside = stats.binom.cdf(hi, j, 0.5) - stats.binom.cdf(lo - 1, j, 0.5)
        total += pj * (1 - inside)
    return float(total + stats.binom.cdf(j_min - 1, m, 1 / 3))


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--sizes", type=int, nargs="+", default=[60, 120, 240, 360, 480, 600])
    ap.add_argument("--tol", type=float, default=0.15)
    args = ap.parse_args()
    print(f"{'m':>5} {'P(⊥) per session':>18} {'two flag sessions':>18}")
    for m in args.sizes:
        p = bottom_probability(m, args.tol)
        print(f"{m:>5} {p:>18.3e} {1 - (1 - p) ** 2:>18.3e}")


if __name__ == "__main__":
    main()
