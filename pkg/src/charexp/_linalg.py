"""Log-domain determinants and Vandermonde products with adaptive extended precision."""

from __future__ import annotations

import math

import mpmath
import numpy as np

from .errors import PrecisionError

FLOAT_COND_LIMIT = 1e4
MP_AGREE = 1e-14
MP_MAX_DPS = 4000


def log_vandermonde(x) -> tuple[int, float]:
    """Sign and ``log|prod_{i<j}(x_i - x_j)|`` in the given order."""
    x = np.asarray(x, dtype=float)
    n = x.size
    if n < 2:
        return 1, 0.0
    i, j = np.triu_indices(n, 1)
    diff = x[i] - x[j]
    if np.any(diff == 0):
        return 0, -math.inf
    sign = -1 if np.count_nonzero(diff < 0) % 2 else 1
    return sign, float(np.sum(np.log(np.abs(diff))))


def log_vandermonde_batch(x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Row-wise version of :func:`log_vandermonde` for an array of shape ``(B, n)``."""
    x = np.asarray(x, dtype=float)
    n = x.shape[-1]
    if n < 2:
        return np.ones(x.shape[0]), np.zeros(x.shape[0])
    i, j = np.triu_indices(n, 1)
    diff = x[:, i] - x[:, j]
    sign = np.where(np.count_nonzero(diff < 0, axis=1) % 2, -1.0, 1.0)
    sign = np.where(np.any(diff == 0, axis=1), 0.0, sign)
    with np.errstate(divide="ignore"):
        return sign, np.sum(np.log(np.abs(diff)), axis=1)


def mp_log_vandermonde(x) -> tuple[int, mpmath.mpf]:
    n = len(x)
    s, acc = 1, mpmath.mpf(0)
    for a in range(n):
        for b in range(a + 1, n):
            d = x[a] - x[b]
            if d == 0:
                return 0, mpmath.mpf("-inf")
            if d < 0:
                s = -s
            acc += mpmath.log(abs(d))
    return s, acc


def log_factorial_sum(N: int) -> float:
    """``log prod_{p=1}^{N-1} p!``."""
    return float(sum(math.lgamma(p + 1) for p in range(1, N)))


def _exp_kernel_float(d, e, N):
    X = N * np.outer(d, e)
    shift = X.max(axis=1)
    return np.exp(X - shift[:, None]), float(shift.sum())


def _mp_logdet_exp(d, e, N, dps):
    with mpmath.workdps(dps):
        dm = [mpmath.mpf(float(v)) for v in d]
        em = [mpmath.mpf(float(v)) for v in e]
        n = len(dm)
        rows, shift = [], mpmath.mpf(0)
        for i in range(n):
            ex = [N * dm[i] * em[j] for j in range(n)]
            m = max(ex)
            shift += m
            rows.append([mpmath.exp(v - m) for v in ex])
        det = mpmath.det(mpmath.matrix(rows))
        if det == 0:
            return 0, mpmath.mpf("-inf")
        return (1 if det > 0 else -1), mpmath.log(abs(det)) + shift


def log_det_exp_outer(d, e, N: int, *, min_dps: int = 0, guess_log_det: float | None = None):
    """Sign and log of ``|det(exp(N d_i e_j))|``.

    Float evaluation is used when the row-shifted kernel is well conditioned;
    otherwise the determinant is recomputed in mpmath at increasing precision
    until two consecutive precisions agree.

    Returns
    -------
    sign : int
    logdet : float
    used_mp : bool
    """
    d = np.asarray(d, dtype=float)
    e = np.asarray(e, dtype=float)
    n = d.size
    if n == 1:
        v = N * d[0] * e[0]
        return 1, float(v), False
    if min_dps == 0:
        K, shift = _exp_kernel_float(d, e, N)
        if np.all(np.isfinite(K)):
            cond = np.linalg.cond(K)
            if cond < FLOAT_COND_LIMIT:
                s, ld = np.linalg.slogdet(K)
                if s != 0:
                    return int(s), float(ld + shift), False
    # digits needed: the shifted determinant can be tiny compared to its unit-size entries
    dps = max(30, min_dps)
    if guess_log_det is not None:
        K, shift = _exp_kernel_float(d, e, N)
        dps = max(dps, int(max(0.0, shift - guess_log_det) / math.log(10)) + 25)
    s1, v1 = _mp_logdet_exp(d, e, N, dps)
    while dps <= MP_MAX_DPS:
        dps2 = 2 * dps
        s2, v2 = _mp_logdet_exp(d, e, N, dps2)
        if s1 == s2 and s1 != 0 and abs(v1 - v2) <= MP_AGREE * max(1.0, abs(float(v2))):
            return int(s2), float(v2), True
        dps, s1, v1 = dps2, s2, v2
    raise PrecisionError(f"determinant did not stabilize up to {MP_MAX_DPS} digits")


def mp_det(rows, dps: int):
    with mpmath.workdps(dps):
        return mpmath.det(mpmath.matrix(rows))
