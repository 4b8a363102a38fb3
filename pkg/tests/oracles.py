"""Slow, independent reference implementations used only by the tests.

Nothing here imports the package: each oracle takes a different route to the
same quantity so agreement is evidence rather than a tautology.
"""

from __future__ import annotations

from fractions import Fraction

import mpmath


def elliptic_K(m, dps=40):
    with mpmath.workdps(dps):
        return mpmath.ellipk(m)


def parameter_from_nome(q, terms=80, dps=40):
    """``m(q) = 16 q prod_n ((1 + q^2n) / (1 + q^(2n-1)))^8`` (theta-function identity)."""
    with mpmath.workdps(dps):
        q = mpmath.mpf(q)
        p = mpmath.mpf(1)
        for n in range(1, terms):
            p *= ((1 + q ** (2 * n)) / (1 + q ** (2 * n - 1))) ** 8
        return 16 * q * p


def nome_series(q, j, terms=200, dps=50):
    """``A_j``, ``B_j`` by brute-force summation in high precision."""
    with mpmath.workdps(dps):
        q = mpmath.mpf(q)
        A = mpmath.fsum(q ** (2 * l + 1 + j) / ((1 - q ** (2 * l + 2 * j + 1)) * (1 - q ** (2 * l + 1)))
                        for l in range(terms))
        B = mpmath.fsum(q ** j / ((1 - q ** (2 * l + 1)) * (1 - q ** (2 * j - 2 * l - 1)))
                        for l in range(j))
        return A, B


def quartic_turning_point(g, dps=40):
    with mpmath.workdps(dps):
        g = mpmath.mpf(g)
        # largest root of 1 - 2 x^2 - 2 g x^4
        return mpmath.sqrt((-2 + mpmath.sqrt(4 + 8 * g)) / (4 * g))


def quartic_quarter_period(g, dps=40):
    """Time of flight from the centre to the turning point, ``int dx / sqrt(1 - 2x^2 - 2g x^4)``."""
    with mpmath.workdps(dps):
        lam = quartic_turning_point(g, dps)
        # x = lam sin(theta) removes the square-root endpoint singularity
        f = lambda th: lam * mpmath.cos(th) / mpmath.sqrt(
            1 - 2 * (lam * mpmath.sin(th)) ** 2 - 2 * g * (lam * mpmath.sin(th)) ** 4)
        return mpmath.quad(f, [0, mpmath.pi / 2])


def exact_moments(freqs, weights, n_max):
    """``M_n = sum w (-f)^n`` over rationals, normalized to ``M_0 = 1``."""
    fs = [Fraction(f) for f in freqs]
    ws = [Fraction(w) for w in weights]
    tot = sum(ws)
    return [sum(w * (-f) ** n for f, w in zip(fs, ws)) / tot for n in range(n_max + 1)]


def bareiss_det(rows):
    """Fraction-free determinant of an integer/rational matrix."""
    a = [list(r) for r in rows]
    n = len(a)
    sign, prev = 1, Fraction(1)
    for k in range(n - 1):
        if a[k][k] == 0:
            for i in range(k + 1, n):
                if a[i][k] != 0:
                    a[k], a[i] = a[i], a[k]
                    sign = -sign
                    break
            else:
                return Fraction(0)
        for i in range(k + 1, n):
            for j in range(k + 1, n):
                a[i][j] = (a[i][j] * a[k][k] - a[i][k] * a[k][j]) / prev
        prev = a[k][k]
    return sign * a[n - 1][n - 1]


def hankel_det(mom, n):
    return bareiss_det([[mom[i + j] for j in range(n + 1)] for i in range(n + 1)])


def stieltjes(freqs, weights, steps):
    """Exact Lanczos coefficients by the Stieltjes procedure on rational nodes."""
    xs = [-Fraction(f) for f in freqs]
    ws = [Fraction(w) for w in weights]
    tot = sum(ws)
    ws = [w / tot for w in ws]

    def inner(p, r):
        return sum(w * p[i] * r[i] for i, w in enumerate(ws))

    prev = [Fraction(0)] * len(xs)
    cur = [Fraction(1)] * len(xs)
    a, bsq = [], []
    norm_prev = None
    for _ in range(steps):
        norm = inner(cur, cur)
        if norm == 0:
            break
        if norm_prev is not None:
            bsq.append(norm / norm_prev)
        an = inner([x * c for x, c in zip(xs, cur)], cur) / norm
        a.append(an)
        nxt = [(x - an) * c - (bsq[-1] if bsq else 0) * p for x, c, p in zip(xs, cur, prev)]
        prev, cur, norm_prev = cur, nxt, norm
    return a, bsq
