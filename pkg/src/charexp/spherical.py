"""Finite-N spherical (HCIZ) integrals: exact determinant, Monte Carlo, and related bounds."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import mpmath
import numpy as np

from ._linalg import log_det_exp_outer, log_factorial_sum, log_vandermonde
from .errors import BoundViolation, DegenerateSpectrum, HypothesisViolation, SandwichViolation
from .measures import Measure, dirac_value, spectrum_points
from .sampling import RngStream, haar_batch, mc_map
from .tableaux import as_shape, check_fits, l_sequence

SPACING_REL = 1e-8
CHECK_TOL = 1e-9


@dataclass(frozen=True)
class SpectrumSet:
    """Ascending eigenvalue list with verified sign and norm flags."""

    values: np.ndarray
    nonnegative: bool = field(init=False)
    norm_le_one: bool = field(init=False)
    bounded_below_by: float = field(init=False)

    def __post_init__(self):
        v = np.sort(np.asarray(self.values, dtype=float).ravel())
        if v.size == 0 or not np.all(np.isfinite(v)):
            raise ValueError("a spectrum needs at least one finite value")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "nonnegative", bool(v[0] >= 0))
        object.__setattr__(self, "norm_le_one", bool(np.abs(v).max() <= 1.0))
        object.__setattr__(self, "bounded_below_by", float(v[0]))

    @classmethod
    def parse(cls, text: str) -> "SpectrumSet":
        return cls(np.array([float(t) for t in text.split(",") if t.strip()]))

    @property
    def N(self) -> int:
        return self.values.size

    @property
    def norm(self) -> float:
        return float(np.abs(self.values).max())

    def is_scalar(self) -> bool:
        return bool(self.values[0] == self.values[-1])

    def min_gap(self) -> float:
        return float(np.diff(self.values).min()) if self.N > 1 else math.inf

    def __len__(self) -> int:
        return self.N


def as_spectrum(v) -> SpectrumSet:
    return v if isinstance(v, SpectrumSet) else SpectrumSet(np.atleast_1d(np.asarray(v, dtype=float)))


@dataclass(frozen=True)
class SphericalValue:
    """Log of a spherical integral.

    For Monte-Carlo values ``stderr`` is the standard error of
    ``exp(log_value)``, i.e. on the linear scale.  ``perturbed`` flags
    exact evaluations whose coincident eigenvalues were split apart.
    """

    log_value: float
    method: str
    stderr: float = 0.0
    perturbed: bool = False
    n: int = 0

    @property
    def value(self) -> float:
        return math.exp(self.log_value)


def log_ctilde(N: int) -> float:
    """``log prod_{p<N} p! - (N(N-1)/2) log N``: fixes ``I_N(0, E) = 1``."""
    return log_factorial_sum(N) - 0.5 * N * (N - 1) * math.log(N)


def spacing_tolerance(v: np.ndarray, rel: float = SPACING_REL) -> float:
    return rel * max(1.0, float(v[-1] - v[0]))


def split_ties(v: np.ndarray, eps: float) -> tuple[np.ndarray, bool]:
    """Spread runs of values closer than ``eps`` symmetrically about their mean.

    Symmetric splitting leaves the sum unchanged, and since the integral is
    symmetric in each argument the first-order effect cancels.
    """
    v = np.sort(np.asarray(v, dtype=float))
    out = v.copy()
    changed = False
    i = 0
    while i < v.size:
        j = i
        while j + 1 < v.size and v[j + 1] - v[j] < eps:
            j += 1
        if j > i:
            m = j - i + 1
            c = v[i : j + 1].mean()
            out[i : j + 1] = c + eps * (np.arange(m) - (m - 1) / 2)
            changed = True
        i = j + 1
    if changed and np.any(np.diff(out) < eps * 0.5):
        # clusters collided after splitting; widen once more
        return split_ties(out, eps)
    return out, changed


def hciz_exact(D, E, *, ties: str = "raise", spacing_rel: float = SPACING_REL) -> SphericalValue:
    """Exact ``log I_N(D, E)`` with ``I_N = c_N det(exp(N d_i e_j)) / (Delta(d) Delta(e))``.

    Parameters
    ----------
    D, E : spectra of equal size N
    ties : ``"raise"`` to reject eigenvalues closer than the spacing
        tolerance, or ``"perturb"`` to split them symmetrically
    spacing_rel : spacing tolerance relative to ``max(1, range)``

    Raises
    ------
    DegenerateSpectrum
    """
    D, E = as_spectrum(D), as_spectrum(E)
    N = D.N
    if E.N != N:
        raise ValueError("D and E must have the same size")
    d, e = D.values, E.values
    # a scalar argument commutes with U, so the integrand is constant
    if D.is_scalar():
        return SphericalValue(float(N * d[0] * e.sum()), "exact_determinant")
    if E.is_scalar():
        return SphericalValue(float(N * e[0] * d.sum()), "exact_determinant")
    perturbed = False
    for name, v in (("D", d), ("E", e)):
        eps = spacing_tolerance(v, spacing_rel)
        if np.diff(v).min() < eps:
            if ties != "perturb":
                raise DegenerateSpectrum(f"{name} has eigenvalues closer than {eps:.3g}")
            v2, _ = split_ties(v, eps)
            if name == "D":
                d = v2
            else:
                e = v2
            perturbed = True
    _, ld_d = log_vandermonde(d)
    _, ld_e = log_vandermonde(e)
    lc = log_ctilde(N)
    # Jensen lower bound on log I gives a lower bound on the determinant size
    guess = float(d.sum() * e.sum()) - lc + ld_d + ld_e
    s, logdet, _ = log_det_exp_outer(d, e, N, guess_log_det=guess)
    if s <= 0:
        raise DegenerateSpectrum("kernel determinant is not positive; spectrum too degenerate")
    return SphericalValue(float(lc + logdet - ld_d - ld_e), "exact_determinant", perturbed=perturbed)


def hciz_mc(D, E, samples: int, stream: RngStream, *, workers: int | None = None) -> SphericalValue:
    """Haar average of ``exp(N tr(U D U^* E))`` by Monte Carlo."""
    D, E = as_spectrum(D), as_spectrum(E)
    N = D.N
    if E.N != N:
        raise ValueError("D and E must have the same size")
    d, e = D.values, E.values

    def block(rng, n):
        P = np.abs(haar_batch(N, n, rng)) ** 2
        return np.exp(N * np.einsum("i,bij,j->b", e, P, d))

    est = mc_map(block, samples, stream, workers=workers)
    return SphericalValue(math.log(est.mean), "monte_carlo", est.stderr, n=est.n)


def schur_via_hciz(shape, M) -> float:
    """Schur polynomial at a positive spectrum through the spherical integral.

    ``s_lambda(M) = exp(log I_N(log M, l/N)) Delta(l/N) Delta(log M) / (c_N Delta(M))``.
    """
    shape = as_shape(shape)
    M = as_spectrum(M)
    N = M.N
    check_fits(shape, N)
    if not M.values[0] > 0:
        raise HypothesisViolation("positivity", "M must be positive definite")
    if N > 1 and M.min_gap() < spacing_tolerance(M.values):
        raise DegenerateSpectrum("M has coincident eigenvalues")
    if N == 1:
        return float(M.values[0] ** shape.size)
    lv = np.log(M.values)
    lN = np.sort(np.array(l_sequence(shape, N).l, dtype=float) / N)
    logI = hciz_exact(lv, lN).log_value
    val = logI + log_vandermonde(lN)[1] + log_vandermonde(lv)[1] - log_vandermonde(M.values)[1] - log_ctilde(N)
    return float(math.exp(val))


def _require_signs(D: SpectrumSet, E: SpectrumSet):
    if D.values[-1] > 0:
        raise HypothesisViolation("nonpositive_D", "D must be nonpositive")
    if not E.nonnegative:
        raise HypothesisViolation("nonnegative_E", "E must be nonnegative")


def cutoff_sandwich(D, E, M: float) -> tuple[float, float, float]:
    """Bracket ``log I_N(D, E)`` using the cut-off argument ``min(E, M)``.

    Returns ``(lower, mid, upper)`` with
    ``lower = log I_N(D, phi_M E) - N ||D|| tr(E - phi_M E)``,
    ``mid = log I_N(D, E)``, ``upper = log I_N(D, phi_M E)``.

    Raises
    ------
    SandwichViolation
        If the computed values break the ordering (an evaluator fault).
    """
    D, E = as_spectrum(D), as_spectrum(E)
    _require_signs(D, E)
    N = D.N
    Ec = np.minimum(E.values, M)
    upper = hciz_exact(D, Ec, ties="perturb").log_value
    mid = hciz_exact(D, E, ties="perturb").log_value
    lower = upper - N * D.norm * float(np.sum(E.values - Ec))
    tol = CHECK_TOL * max(1.0, abs(mid))
    if not (lower <= mid + tol and mid <= upper + tol):
        raise SandwichViolation(f"lower={lower!r}, mid={mid!r}, upper={upper!r}")
    return float(lower), float(mid), float(upper)


def jensen_bounds(D, E) -> tuple[float, float, float]:
    """``mean(D) mean(E) <= N^-2 log I_N(D, E) <= 0`` for ``D <= 0 <= E``.

    Raises
    ------
    BoundViolation
    """
    D, E = as_spectrum(D), as_spectrum(E)
    _require_signs(D, E)
    N = D.N
    lo = float(D.values.mean() * E.values.mean())
    val = hciz_exact(D, E, ties="perturb").log_value / N**2
    tol = CHECK_TOL * max(1.0, abs(val))
    if not (lo - tol <= val <= tol):
        raise BoundViolation(f"{lo!r} <= {val!r} <= 0 fails")
    return lo, float(val), 0.0


@dataclass
class LimitEstimate:
    estimate: float
    per_N: list  # (N, N^-2 log I_N, running extrapolant)
    bracket: tuple[float, float] | None
    perturbed: bool = False
    exact: bool = False

    def to_csv_rows(self):
        return [("N", "value", "extrapolant")] + [tuple(r) for r in self.per_N]


def _mean(mu: Measure) -> float:
    return mu.mean()


def spherical_limit_estimate(mu_D: Measure, mu_E: Measure, N_list) -> LimitEstimate:
    """Extrapolate ``N^-2 log I_N`` along quantile spectra of two measures.

    Each ``N`` uses ``N`` quantile points of both measures.  The estimate is
    the linear Richardson extrapolant in ``1/N`` from the last two sizes,
    clipped into the Jensen bracket when the sign conditions hold.  If one
    measure is a point mass the limit is exact: ``d * mean(E)``.
    """
    N_list = sorted(int(n) for n in N_list)
    if len(N_list) < 2:
        raise ValueError("N_list needs at least two sizes")
    mD, mE = _mean(mu_D), _mean(mu_E)
    dD, dE = dirac_value(mu_D), dirac_value(mu_E)
    if dD is not None or dE is not None:
        v = mD * mE
        return LimitEstimate(v, [(n, v, v) for n in N_list], (v, v) if mD <= 0 <= mE else None, exact=True)
    signs_ok = mu_D.support()[1] <= 0 and mu_E.support()[0] >= 0
    bracket = (mD * mE, 0.0) if signs_ok else None
    rows, perturbed, prev = [], False, None
    for n in N_list:
        d = spectrum_points(mu_D, n)
        e = spectrum_points(mu_E, n)
        hv = hciz_exact(d, e, ties="perturb")
        perturbed |= hv.perturbed
        v = hv.log_value / n**2
        if prev is None:
            ext = v
        else:
            n0, v0 = prev
            ext = (n * v - n0 * v0) / (n - n0)
        rows.append((n, v, ext))
        prev = (n, v)
    est = rows[-1][2]
    if bracket is not None:
        est = min(max(est, bracket[0]), bracket[1])
    return LimitEstimate(float(est), rows, bracket, perturbed)


def hciz_grad_e(D, E, dps: int = 50) -> np.ndarray:
    """Gradient of ``log I_N(D, E)`` with respect to the entries of ``E`` (ascending order).

    ``d/de_j log I = sum_i (K^-1)_{ji} K_{ij} N d_i - sum_{k != j} 1/(e_j - e_k)``
    with ``K_{ij} = exp(N d_i e_j)``, evaluated in extended precision.
    """
    D, E = as_spectrum(D), as_spectrum(E)
    N = D.N
    d, e = D.values, E.values
    if D.is_scalar():
        return np.full(N, N * d[0])
    if N > 1 and E.min_gap() < spacing_tolerance(e):
        e, _ = split_ties(e, spacing_tolerance(e))
    # the kernel can be nearly singular; size the precision from the Vandermonde factors
    extra = int((-log_vandermonde(d)[1] - log_vandermonde(e)[1]) / math.log(10)) if N > 1 else 0
    with mpmath.workdps(dps + max(0, extra)):
        dm = [mpmath.mpf(float(v)) for v in d]
        em = [mpmath.mpf(float(v)) for v in e]
        K = mpmath.matrix(N, N)
        for i in range(N):
            for j in range(N):
                K[i, j] = mpmath.exp(N * dm[i] * em[j])
        Ki = K**-1
        g = []
        for j in range(N):
            acc = mpmath.fsum(Ki[j, i] * K[i, j] * N * dm[i] for i in range(N))
            acc -= mpmath.fsum(1 / (em[j] - em[k]) for k in range(N) if k != j)
            g.append(float(acc))
    return np.array(g)
