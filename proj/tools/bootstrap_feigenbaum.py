#!/usr/bin/env python3
"""Offline damped-Newton bootstrap for the Feigenbaum-like collocation problem.

Unknowns are the coefficients c_0..c_{n-1} of the even polynomial
g(s) = sum_k c_k s^(2k). Residuals:

    r_0 = c_0 - 1
    r_i = g(s_i) + g(g(lam * s_i)) / lam,   lam = -g(1),   i = 1..n-1

at the n-1 Chebyshev points of [0, 1]. The system is solved in 60-digit
arithmetic with a finite-difference Jacobian, independently of the C++
analytic Jacobian, and written one coefficient per line.

usage: bootstrap_feigenbaum.py OUTDIR N [N ...]
"""
import sys
from pathlib import Path

import mpmath as mp

mp.mp.dps = 60


def nodes(n):
    m = n - 1
    return [(1 + mp.cos((2 * i - 1) * mp.pi / (2 * m))) / 2 for i in range(1, m + 1)]


def g(c, s):
    s2 = s * s
    acc = mp.mpf(0)
    for coef in reversed(c):
        acc = acc * s2 + coef
    return acc


def residual(c, pts):
    lam = -g(c, mp.mpf(1))
    r = [c[0] - 1]
    for s in pts:
        r.append(g(c, s) + g(c, g(c, lam * s)) / lam)
    return mp.matrix(r)


def solve(n, guess):
    pts = nodes(n)
    c = [mp.mpf(v) for v in guess]
    for _ in range(200):
        r = residual(c, pts)
        if mp.norm(r) < mp.mpf(10) ** -45:
            break
        h = mp.mpf(10) ** -25
        J = mp.matrix(n, n)
        for k in range(n):
            cp = list(c)
            cm = list(c)
            cp[k] += h
            cm[k] -= h
            col = (residual(cp, pts) - residual(cm, pts)) / (2 * h)
            for i in range(n):
                J[i, k] = col[i]
        step = mp.lu_solve(J, -r)
        t = mp.mpf(1)
        base = mp.norm(r)
        while t > mp.mpf(10) ** -6:
            trial = [c[k] + t * step[k] for k in range(n)]
            if mp.norm(residual(trial, pts)) < base:
                c = trial
                break
            t /= 2
        else:
            raise RuntimeError(f"line search failed at n={n}")
    return c, mp.norm(residual(c, pts))


def main():
    out = Path(sys.argv[1])
    sizes = [int(a) for a in sys.argv[2:]]
    guess = [1, -1.5276, 0.1048, 0.0267, -0.0035]
    for n in sorted(sizes):
        start = (guess + [0] * n)[:n]
        c, res = solve(n, start)
        path = out / f"feigenbaum_like_n{n}.txt"
        with path.open("w") as fh:
            for v in c:
                fh.write(mp.nstr(v, 20, min_fixed=-5, max_fixed=5) + "\n")
        print(f"n={n} residual={mp.nstr(res, 3)} c1={mp.nstr(c[1], 10)}")
        guess = [float(v) for v in c]


if __name__ == "__main__":
    main()
