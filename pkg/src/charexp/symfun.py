"""Schur polynomials by branching and by bialternant, dimensions, and the Cauchy identity."""

from __future__ import annotations

import contextlib
import math
from itertools import product
from typing import Sequence

import mpmath
import numpy as np

from ._linalg import log_vandermonde_batch
from .errors import ComplexityGuard, DegenerateVandermonde, RadiusViolation
from .tableaux import (
    YoungShape,
    as_shape,
    check_fits,
    enumerate_shapes,
    l_sequence,
    vandermonde_int,
)

DEFAULT_STATE_BUDGET = 2_000_000
BIALT_COND_LIMIT = 1e5
BIALT_MP_DPS = 40  # about 133 bits
SPACING_THRESHOLD = 1e-10
Q_GRID = 32


def _interlacing(lam: tuple[int, ...], n: int):
    """Shapes ``mu`` with at most ``n-1`` rows interlacing ``lam`` (``n`` rows, zero padded)."""
    lam = lam + (0,) * (n - len(lam))
    ranges = [range(lam[i + 1], lam[i] + 1) for i in range(n - 1)]
    for mu in product(*ranges):
        yield tuple(m for m in mu if m > 0)


class SchurEvaluator:
    """Branching-rule evaluator bound to a fixed point set.

    ``x`` is a sequence of N "scalars" supporting ``+``, ``*`` and ``**``:
    floats, numpy arrays (a batch of evaluation points per coordinate),
    mpmath numbers or complex numbers.  Sub-shape values are memoized, so
    evaluating many shapes on the same points shares work.
    """

    def __init__(self, x: Sequence, budget: int = DEFAULT_STATE_BUDGET):
        self.x = list(x)
        self.N = len(self.x)
        self.budget = budget
        self._memo: dict[tuple[tuple[int, ...], int], object] = {}
        self._pow: dict[tuple[int, int], object] = {}
        self._one = self.x[0] ** 0 if self.N else 1

    def _xpow(self, n: int, k: int):
        key = (n, k)
        v = self._pow.get(key)
        if v is None:
            v = self.x[n - 1] ** k
            self._pow[key] = v
        return v

    def value(self, lam: tuple[int, ...], n: int | None = None):
        n = self.N if n is None else n
        if len(lam) > n:
            return 0 * self._one
        if not lam:
            return self._one
        if n == 1:
            return self._xpow(1, lam[0])
        key = (lam, n)
        v = self._memo.get(key)
        if v is not None:
            return v
        if len(self._memo) >= self.budget:
            raise ComplexityGuard(f"branching DP exceeded {self.budget} states")
        total = None
        size = sum(lam)
        for mu in _interlacing(lam, n):
            term = self.value(mu, n - 1)
            k = size - sum(mu)
            if k:
                term = term * self._xpow(n, k)
            total = term if total is None else total + term
        self._memo[key] = total
        return total

    def __call__(self, shape) -> object:
        shape = as_shape(shape)
        check_fits(shape, self.N)
        return self.value(shape.parts)


def schur_branching(shape, x, budget: int = DEFAULT_STATE_BUDGET):
    """Schur polynomial ``s_lambda(x)`` from the interlacing (branching) rule.

    Parameters
    ----------
    shape : YoungShape or sequence of ints
    x : sequence of N values, or an array of shape ``(B, N)`` for a batch
    budget : maximum number of memoized sub-shape states

    Returns
    -------
    float, ndarray of shape ``(B,)`` or the scalar type of ``x``
    """
    if isinstance(x, np.ndarray) and x.ndim == 2:
        cols = [np.ascontiguousarray(x[:, i]) for i in range(x.shape[1])]
        val = SchurEvaluator(cols, budget)(shape)
        return np.broadcast_to(np.asarray(val, dtype=x.dtype), (x.shape[0],)).copy()
    if isinstance(x, np.ndarray):
        x = [v for v in x.tolist()]
    return SchurEvaluator(list(x), budget)(shape)


def _bialternant_mp(l, x, dps):
    with mpmath.workdps(dps):
        xm = [mpmath.mpf(float(v)) for v in x]
        A = mpmath.matrix([[xi**lj for lj in l] for xi in xm])
        num = mpmath.det(A)
        den = mpmath.mpf(1)
        for i in range(len(xm)):
            for j in range(i + 1, len(xm)):
                den *= xm[i] - xm[j]
        return num / den


def schur_bialternant(
    shape,
    x,
    *,
    fallback: bool = True,
    extended: bool | None = None,
    cond_limit: float = BIALT_COND_LIMIT,
):
    """Schur polynomial as ``det(x_i^{l_j}) / prod_{i<j}(x_i - x_j)``.

    Columns are scaled by their largest entry before a partially pivoted LU
    factorization.  Rows whose scaled matrix has condition number above
    ``cond_limit`` are recomputed with about 133-bit arithmetic; pass
    ``extended=True`` to force that path or ``extended=False`` to forbid it.
    Coincident points fall back to the branching rule unless ``fallback`` is
    false, in which case :class:`DegenerateVandermonde` is raised.

    Accepts a single point vector or a batch of shape ``(B, N)``.
    """
    shape = as_shape(shape)
    X = np.atleast_2d(np.asarray(x, dtype=float))
    single = np.asarray(x).ndim == 1
    B, N = X.shape
    check_fits(shape, N)
    l = np.array(l_sequence(shape, N).l)
    out = np.empty(B)

    d = np.abs(X[:, :, None] - X[:, None, :])
    d[:, np.arange(N), np.arange(N)] = np.inf
    close = d.reshape(B, -1).min(axis=1) < SPACING_THRESHOLD * np.maximum(1.0, np.abs(X).max(axis=1))
    if N == 1:
        close[:] = False
    if np.any(close):
        if not fallback:
            raise DegenerateVandermonde("evaluation points nearly coincide")
        for b in np.nonzero(close)[0]:
            out[b] = schur_branching(shape, X[b])

    ok = ~close
    if np.any(ok):
        Xo = X[ok]
        with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
            V = Xo[:, :, None] ** l[None, None, :]
        scale = np.abs(V).max(axis=1)
        scale[scale == 0] = 1.0
        Vs = V / scale[:, None, :]
        sgn, logdet = np.linalg.slogdet(Vs)
        vs, vlog = log_vandermonde_batch(Xo)
        val = sgn * vs * np.exp(logdet + np.log(scale).sum(axis=1) - vlog)
        if extended is None:
            cond = np.linalg.cond(Vs)
            need = ~(cond < cond_limit)
        else:
            need = np.full(Xo.shape[0], bool(extended))
        for k in np.nonzero(need)[0]:
            val[k] = float(_bialternant_mp(l, Xo[k], BIALT_MP_DPS))
        out[ok] = val
    return float(out[0]) if single else out


def dim_shape(shape, N: int) -> int:
    """Dimension ``Delta(l) / prod_{i=1}^{N-1} i!`` as an exact integer."""
    shape = as_shape(shape)
    l = l_sequence(shape, N).l
    den = 1
    for i in range(1, N):
        den *= math.factorial(i)
    num = vandermonde_int(l)
    assert num % den == 0
    return num // den


def cauchy_product(x, y, dps: int | None = None):
    """``prod_{i,j} (1 - x_i y_j)^{-1}``."""
    if dps is None:
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        return float(np.exp(-np.sum(np.log1p(-np.outer(x, y)))))
    with mpmath.workdps(dps):
        out = mpmath.mpf(1)
        for a in x:
            for b in y:
                out /= 1 - mpmath.mpf(float(a)) * mpmath.mpf(float(b))
        return out


def markov_tail_bound(x, y, K: int, dps: int | None = None):
    """Bound on ``sum_{|lambda| > K} s_lambda(x) s_lambda(y)``.

    Uses ``tail <= q^{-K-1} prod (1 - q x_i y_j)^{-1}`` for every ``q`` with
    ``q max(x_i y_j) < 1``, minimized over a geometric grid of ``q``.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    r = float(np.max(np.outer(x, y))) if x.size and y.size else 0.0
    if r >= 1:
        raise RadiusViolation(f"max x_i y_j = {r} >= 1")
    if r <= 0:
        return 0.0
    qs = r ** (-np.arange(1, Q_GRID + 1) / (Q_GRID + 1))
    if dps is None:
        prods = np.outer(x, y).ravel()
        logs = [-(K + 1) * math.log(q) - np.sum(np.log1p(-q * prods)) for q in qs]
        return float(math.exp(min(logs)))
    with mpmath.workdps(dps):
        best = None
        for q in qs:
            qm = mpmath.mpf(float(q))
            v = qm ** (-(K + 1))
            for a in x:
                for b in y:
                    v /= 1 - qm * mpmath.mpf(float(a)) * mpmath.mpf(float(b))
            best = v if best is None or v < best else best
        return best


def cauchy_truncated(x, y, K: int, *, precision: int | None = None):
    """Truncated Cauchy sum and a certified bound on the discarded tail.

    Parameters
    ----------
    x, y : sequences of non-negative reals with ``max x * max y < 1``
    K : largest box count kept
    precision : decimal digits for mpmath evaluation; ``None`` uses floats

    Returns
    -------
    partial_sum, tail_bound
        Floats, or mpmath numbers when ``precision`` is given.
    """
    x = np.asarray(x, dtype=float).ravel()
    y = np.asarray(y, dtype=float).ravel()
    if np.any(x < 0) or np.any(y < 0):
        raise ValueError("Cauchy arguments must be non-negative")
    if K < 0:
        raise ValueError("K must be non-negative")
    r = float(x.max() * y.max())
    if r >= 1:
        raise RadiusViolation(f"max x_i y_j = {r} >= 1")
    n = min(x.size, y.size)
    ctx = contextlib.nullcontext() if precision is None else mpmath.workdps(precision)
    with ctx:
        if precision is None:
            ex, ey = SchurEvaluator(x.tolist()), SchurEvaluator(y.tolist())
            total = 0.0
        else:
            ex = SchurEvaluator([mpmath.mpf(float(v)) for v in x])
            ey = SchurEvaluator([mpmath.mpf(float(v)) for v in y])
            total = mpmath.mpf(0)
        for lam in enumerate_shapes(K, n):
            total = total + ex.value(lam.parts) * ey.value(lam.parts)
        tail = markov_tail_bound(x, y, K, precision)
    return total, tail


def orthogonality_check(shape, V, W, samples: int, stream, workers: int | None = None):
    """Monte-Carlo estimate of the Haar average of ``s_lambda(U V U^* W)``.

    ``V`` and ``W`` are the diagonals of positive Hermitian matrices; the
    eigenvalues of ``U V U^* W`` are those of ``W^{1/2} U V U^* W^{1/2}``.
    """
    from .sampling import MCEstimate, haar_batch, mc_map

    shape = as_shape(shape)
    V = np.asarray(getattr(V, "values", V), dtype=float)
    W = np.asarray(getattr(W, "values", W), dtype=float)
    N = V.size
    check_fits(shape, N)
    if not shape.parts:
        return MCEstimate(1.0, 0.0, samples, stream.seed)
    if np.any(W < 0):
        raise ValueError("W must be non-negative")
    sw = np.sqrt(W)

    def block(rng, n):
        U = haar_batch(N, n, rng)
        Mt = (U * V[None, None, :]) @ np.conj(np.swapaxes(U, 1, 2))
        Mt = sw[None, :, None] * Mt * sw[None, None, :]
        ev = np.linalg.eigvalsh(Mt)
        return schur_branching(shape, ev)

    return mc_map(block, samples, stream, workers=workers)


def schur_polynomial_oracle(shape, x) -> float:
    """Sum over semistandard tableaux, by brute force; only for tiny cases."""
    shape = as_shape(shape)
    cells = [(i, j) for i, row in enumerate(shape.parts) for j in range(row)]
    N = len(x)
    total = 0.0
    for fill in product(range(N), repeat=len(cells)):
        T = dict(zip(cells, fill))
        if all(
            (j == 0 or T[(i, j - 1)] <= T[(i, j)]) and (i == 0 or T[(i - 1, j)] < T[(i, j)])
            for (i, j) in cells
        ):
            total += math.prod(x[v] for v in fill)
    return total


__all__ = [
    "SchurEvaluator",
    "YoungShape",
    "cauchy_product",
    "cauchy_truncated",
    "dim_shape",
    "markov_tail_bound",
    "orthogonality_check",
    "schur_bialternant",
    "schur_branching",
    "schur_polynomial_oracle",
]
