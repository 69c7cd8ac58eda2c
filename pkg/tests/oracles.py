"""Brute-force reference implementations used only by the tests."""

from __future__ import annotations

import itertools
from fractions import Fraction
from math import factorial, prod


def ssyt(shape, n):
    """Yield every semistandard filling of ``shape`` with entries ``1..n`` as row tuples."""
    cells = [(r, c) for r, length in enumerate(shape) for c in range(length)]
    fill = {}

    def rec(k):
        if k == len(cells):
            yield dict(fill)
            return
        r, c = cells[k]
        lo = 1
        if c > 0:
            lo = max(lo, fill[(r, c - 1)])
        if r > 0:
            lo = max(lo, fill[(r - 1, c)] + 1)
        for v in range(lo, n + 1):
            fill[(r, c)] = v
            yield from rec(k + 1)
        fill.pop((r, c), None)

    yield from rec(0)


def schur_ssyt(shape, x):
    """``s_lambda(x)`` as the content sum over semistandard tableaux (exact for Fractions)."""
    n = len(x)
    if len(shape) > n:
        return 0
    total = 0
    for t in ssyt(shape, n):
        term = 1
        for v in t.values():
            term = term * x[v - 1]
        total = total + term
    return total


def partitions_brute(m, N):
    """All partitions of ``m`` into at most ``N`` parts by filtering compositions."""
    out = set()
    for parts in itertools.product(range(m + 1), repeat=N):
        if sum(parts) == m and all(parts[i] >= parts[i + 1] for i in range(N - 1)):
            out.add(tuple(p for p in parts if p))
    return out


def dim_hook(shape, N):
    """Hook-content formula for ``s_lambda(1^N)``."""
    conj = [sum(1 for p in shape if p > j) for j in range(shape[0])] if shape else []
    num = Fraction(1)
    for i, row in enumerate(shape):
        for j in range(row):
            hook = row - j + conj[j] - i - 1
            num *= Fraction(N + j - i, hook)
    return num


def hciz_two_by_two(d, e):
    """``N = 2`` spherical integral: ``|U_11|^2`` is uniform on ``[0, 1]`` under Haar measure."""
    import math

    (d1, d2), (e1, e2) = d, e
    base = 2 * (e1 * d2 + e2 * d1)
    x = 2 * (d1 - d2) * (e1 - e2)
    return math.exp(base) * (math.expm1(x) / x if x else 1.0)


def cauchy_product_fraction(x, y):
    return prod(1 / (1 - Fraction(a) * Fraction(b)) for a in x for b in y)


def fact_prod(N):
    return prod(factorial(i) for i in range(1, N))
