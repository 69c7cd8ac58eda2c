"""Limit functionals on discretized measures: log energy, the s-kernel functional, rate functions, metric."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize, sparse
from scipy.linalg import matmul_toeplitz

from .errors import DiagonalSingularity, HypothesisViolation, NonPositiveInput, NotInL
from .families import Functional, Potential
from .measures import (
    DiscreteMeasure,
    GridMeasure,
    Measure,
    as_atoms,
    cutoff,
    dirac_value,
)
from .spherical import spherical_limit_estimate

DEFAULT_N_REF = (8, 16, 32)
_SERIES_FROM = 8


# --------------------------------------------------------------------------
# bounded-Lipschitz metric


@dataclass
class BLWitness:
    support: np.ndarray
    f: np.ndarray
    sup_norm: float
    lipschitz: float


def _merged(mu: Measure, nu: Measure, nodes: int):
    a, b = as_atoms(mu, nodes), as_atoms(nu, nodes)
    pts = np.union1d(a.positions, b.positions)
    wa = np.zeros(pts.size)
    wb = np.zeros(pts.size)
    np.add.at(wa, np.searchsorted(pts, a.positions), a.weights)
    np.add.at(wb, np.searchsorted(pts, b.positions), b.weights)
    return pts, wa - wb


def bl_distance(mu: Measure, nu: Measure, *, metric: str = "bl", nodes: int = 1, return_witness: bool = False):
    """Distance ``sup |int f dmu - int f dnu|`` over test functions ``f``.

    ``metric="bl"`` takes ``||f||_inf + Lip(f) <= 1`` (bounded-Lipschitz),
    solved as a linear program on the merged support.  ``metric="lip"``
    takes ``Lip(f) <= 1`` only, which is the Wasserstein-1 distance and has
    the closed form ``int |F_mu - F_nu|``.  Grid measures are represented by
    ``nodes`` atoms per cell.
    """
    pts, diff = _merged(mu, nu, nodes)
    n = pts.size
    if n == 1 or np.all(diff == 0):
        out = 0.0
        wit = BLWitness(pts, np.zeros(n), 0.0, 0.0)
        return (out, wit) if return_witness else out
    gaps = np.diff(pts)
    if metric == "lip":
        out = float(np.sum(np.abs(np.cumsum(diff)[:-1]) * gaps))
        if return_witness:
            f = np.concatenate([[0.0], np.cumsum(np.sign(np.cumsum(diff)[:-1]) * -gaps)])
            f -= f.mean()
            return out, BLWitness(pts, f, float(np.abs(f).max()), 1.0)
        return out
    if metric != "bl":
        raise ValueError("metric must be 'bl' or 'lip'")
    # variables: f_0..f_{n-1}, s (sup bound), t (Lipschitz bound)
    m = n - 1
    I = sparse.identity(n, format="csr")
    Dm = sparse.diags([-np.ones(m), np.ones(m)], [0, 1], shape=(m, n), format="csr")
    col_s = sparse.csr_matrix(np.ones((n, 1)))
    col_g = sparse.csr_matrix(gaps[:, None])
    zn = sparse.csr_matrix((n, 1))
    zm = sparse.csr_matrix((m, 1))
    A = sparse.vstack([
        sparse.hstack([I, -col_s, zn]),
        sparse.hstack([-I, -col_s, zn]),
        sparse.hstack([Dm, zm, -col_g]),
        sparse.hstack([-Dm, zm, -col_g]),
        sparse.csr_matrix(np.concatenate([np.zeros(n), [1.0, 1.0]])[None, :]),
    ]).tocsr()
    rhs = np.concatenate([np.zeros(2 * n + 2 * m), [1.0]])
    c = np.concatenate([-diff, [0.0, 0.0]])
    bounds = [(None, None)] * n + [(0, None), (0, None)]
    res = optimize.linprog(c, A_ub=A, b_ub=rhs, bounds=bounds, method="highs")
    if res.status != 0:
        raise RuntimeError(f"bounded-Lipschitz LP failed: {res.message}")
    out = float(max(0.0, -res.fun))
    if return_witness:
        f = res.x[:n]
        sup, lip = float(np.abs(f).max()), float(np.max(np.abs(np.diff(f)) / gaps))
        # solver tolerance divided by tiny gaps can push the norm slightly above 1
        scale = max(1.0, sup + lip)
        return out, BLWitness(pts, f / scale, sup / scale, lip / scale)
    return out


def w1_grid(mu: GridMeasure, nu: GridMeasure) -> float:
    """Exact Wasserstein-1 distance ``int |F_mu - F_nu|`` between two piecewise-constant densities.

    It bounds the bounded-Lipschitz distance from above.
    """
    lo = min(mu.support()[0], nu.support()[0])
    hi = max(mu.support()[1], nu.support()[1])
    x = np.union1d(np.concatenate([mu.edges, nu.edges]), [lo, hi])
    d = np.asarray(mu.cdf(x), dtype=float) - np.asarray(nu.cdf(x), dtype=float)
    h = np.diff(x)
    u, v = d[:-1], d[1:]
    same = u * v >= 0
    au, av = np.abs(u), np.abs(v)
    with np.errstate(invalid="ignore", divide="ignore"):
        cross = (u * u + v * v) / (2 * (au + av))
    return float(np.sum(h * np.where(same, 0.5 * (au + av), cross)))


# --------------------------------------------------------------------------
# logarithmic energy


def _G(u):
    u = np.abs(np.asarray(u, dtype=float))
    with np.errstate(divide="ignore", invalid="ignore"):
        out = 0.5 * u * u * np.log(u) - 0.75 * u * u
    return np.where(u == 0, 0.0, out)


def cell_pair_kernel(n: int, h: float) -> np.ndarray:
    """``K_d = int_{cell 0} int_{cell d} log|x - y| dx dy`` for ``d = 0..n-1``.

    Closed form through ``G(u) = u^2 log|u| / 2 - 3u^2/4``; far from the
    diagonal a series in ``(h/u)^2`` avoids cancellation.
    """
    d = np.arange(n, dtype=float)
    K = _G((d + 1) * h) + _G((d - 1) * h) - 2 * _G(d * h)
    far = d >= _SERIES_FROM
    if np.any(far):
        u = d[far] * h
        r2 = (h / u) ** 2
        corr = np.zeros_like(u)
        rk = np.ones_like(u)
        for k in range(2, 12):
            rk = rk * r2
            corr += 2.0 / ((2 * k) * (2 * k - 1) * (2 * k - 2)) * rk
        K[far] = h * h * (np.log(u) - corr)
    return K


def log_potential(nu: GridMeasure) -> np.ndarray:
    """Cell averages of ``U(x) = int log|x - y| dnu(y)``."""
    K = cell_pair_kernel(nu.n, nu.dx)
    return matmul_toeplitz((K, K), nu.rho) / nu.dx


def log_energy(nu: Measure) -> float:
    """``Sigma(nu) = int int log|x - y| dnu dnu``; ``-inf`` for measures with atoms."""
    if isinstance(nu, DiscreteMeasure):
        return -math.inf
    return float(np.dot(nu.masses, log_potential(nu)))


# --------------------------------------------------------------------------
# s-kernel and S functional


def s_kernel(x, y):
    """``int_0^1 (a x + (1 - a) y)^{-1} da = (log x - log y)/(x - y)``, ``1/x`` on the diagonal."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if np.any(x <= 0) or np.any(y <= 0):
        raise NonPositiveInput("s-kernel needs positive arguments")
    m = 0.5 * (x + y)
    z = (x - y) / (x + y)
    z2 = z * z
    small = np.abs(z) < 1e-3
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(small, 1 + z2 / 3 + z2 * z2 / 5 + z2**3 / 7, np.arctanh(z) / z)
    out = ratio / m
    return float(out) if out.ndim == 0 else out


def log_s_kernel(x, y):
    return np.log(s_kernel(x, y))


def s_functional(mu: Measure, nodes: int = 4) -> float:
    """``S(mu) = int int log s(x, y) dmu dmu`` including the diagonal."""
    at = as_atoms(mu, nodes)
    if np.any(at.positions <= 0):
        raise NonPositiveInput("S needs a measure on (0, inf)")
    L = log_s_kernel(at.positions[:, None], at.positions[None, :])
    return float(at.weights @ L @ at.weights)


def s_functional_finite(points) -> float:
    """``S_N = (2/N^2) sum_{i<j} log s(A_i, A_j)`` over the off-diagonal pairs."""
    a = np.asarray(points, dtype=float).ravel()
    N = a.size
    if np.any(a <= 0):
        raise NonPositiveInput("S_N needs positive points")
    i, j = np.triu_indices(N, 1)
    return float(2.0 / N**2 * np.sum(log_s_kernel(a[i], a[j])))


# --------------------------------------------------------------------------
# ensembles and rate functions


@dataclass(frozen=True)
class EnsembleSpec:
    """Data of the shape rate function: ``F``, ``c``, ``a``, ``b``, ``mu_A``, ``mu_B``."""

    c: Potential
    a: float = 0.0
    b: float = 0.0
    mu_A: DiscreteMeasure = field(default_factory=lambda: DiscreteMeasure.dirac(1.0))
    mu_B: DiscreteMeasure = field(default_factory=lambda: DiscreteMeasure.dirac(1.0))
    F: Functional = field(default_factory=Functional)
    eps: float = 1e-12

    def __post_init__(self):
        if self.a < 0 or self.b < 0:
            raise HypothesisViolation("ab_nonnegative", "a and b must be non-negative")
        for name, mu in (("mu_A", self.mu_A), ("mu_B", self.mu_B)):
            lo, hi = mu.support()
            if lo < self.eps or hi > 1.0:
                raise HypothesisViolation("support", f"{name} must be supported in [eps, 1]")

    @property
    def beta(self) -> float:
        return 0.5 * (self.a + self.b)

    def log_push(self, which: str) -> DiscreteMeasure:
        mu = self.mu_A if which == "A" else self.mu_B
        return mu.pushforward(np.log)

    def i_terms_vanish(self) -> bool:
        zA = self.a == 0 or dirac_value(self.mu_A) == 1.0
        zB = self.b == 0 or dirac_value(self.mu_B) == 1.0
        return zA and zB

    def borg_constants(self) -> tuple[float, float]:
        """``(rho, C)`` with ``g(x, y) >= rho x / 2 + rho y / 2 + C`` on the quadrant."""
        rc, Cc = self.c.growth, self.c.offset
        ab = self.a + self.b
        if ab == 0:
            return rc, Cc
        kappa = 2 * ab / rc
        return rc / 2, Cc - 0.5 * ab * (math.log(kappa) - 1)

    def describe(self) -> dict:
        return {
            "c": self.c.describe(),
            "a": self.a,
            "b": self.b,
            "mu_A": self.mu_A.atoms,
            "mu_B": self.mu_B.atoms,
            "F": self.F.describe(),
        }


def g_value(x, y, ens: EnsembleSpec, *, on_diagonal: str = "raise"):
    """``((a+b)/2) log|x-y|^{-1} + c(x)/2 + c(y)/2``.

    On the diagonal the value is ``+inf`` when ``a + b > 0``: raised as
    :class:`DiagonalSingularity` unless ``on_diagonal="inf"``.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    base = 0.5 * (ens.c(x) + ens.c(y))
    if ens.beta == 0:
        out = base
    else:
        diag = x == y
        if np.any(diag) and on_diagonal == "raise":
            raise DiagonalSingularity("g is infinite on the diagonal")
        with np.errstate(divide="ignore"):
            out = np.where(diag, np.inf, base - ens.beta * np.log(np.abs(x - y)))
    return float(out) if np.ndim(out) == 0 else out


def pair_excess(nu: GridMeasure, ens: EnsembleSpec, M: float, gauss: int = 16) -> float:
    """``int int (g - M)_+ dnu dnu`` by quadrature in ``(x, u = y - x)``.

    The ``u`` axis is split at multiples of the cell width and graded
    geometrically towards ``u = 0``; the inner ``x`` integral is split at the
    cell edges so that the density product is constant on every piece.
    """
    beta = ens.beta
    lo, hi = nu.support()
    length = hi - lo
    edges = nu.edges
    cmax = float(np.max(ens.c(np.linspace(lo, hi, 257))))
    if beta == 0:
        if cmax <= M:
            return 0.0
        u_max = length
    else:
        u_max = min(length, math.exp((cmax - M) / beta))
    if u_max <= 0:
        return 0.0
    h = nu.dx
    bps = list(h * np.arange(1, int(u_max / h) + 1))
    small = min(h, u_max)
    bps = sorted(set([small * 2.0**-j for j in range(0, 48)] + [b for b in bps if b < u_max] + [u_max]))
    gx, gw = np.polynomial.legendre.leggauss(gauss)
    ix, iw = np.polynomial.legendre.leggauss(6)
    total = 0.0
    prev = 0.0
    for b in bps:
        us = prev + (b - prev) * 0.5 * (gx + 1)
        uw = (b - prev) * 0.5 * gw
        for u, w in zip(us, uw):
            pts = np.union1d(edges, edges - u)
            pts = pts[(pts >= lo) & (pts <= hi - u)]
            if pts.size < 2:
                continue
            a0, a1 = pts[:-1], pts[1:]
            mid = 0.5 * (a0 + a1)
            k1 = np.clip(((mid - nu.x0) / h).astype(int), 0, nu.n - 1)
            k2 = np.clip(((mid + u - nu.x0) / h).astype(int), 0, nu.n - 1)
            r = nu.rho[k1] * nu.rho[k2]
            xs = a0[:, None] + (a1 - a0)[:, None] * 0.5 * (ix + 1)[None, :]
            g = 0.5 * (ens.c(xs) + ens.c(xs + u))
            if beta:
                g = g - beta * math.log(u)
            inner = (np.maximum(g - M, 0.0) @ (0.5 * iw)) * (a1 - a0) * r
            total += w * inner.sum()
        prev = b
    return 2.0 * total


@dataclass
class RateReport:
    value: float
    bracket: tuple[float, float]
    tilde_value: float
    tilde_bracket: tuple[float, float]
    components: dict
    grid: dict
    in_L: bool = True

    def to_dict(self) -> dict:
        return {
            "value": self.value,
            "bracket": list(self.bracket),
            "tilde_value": self.tilde_value,
            "tilde_bracket": list(self.tilde_bracket),
            "components": self.components,
            "grid": self.grid,
            "in_L": self.in_L,
        }

    def to_json(self) -> str:
        return json.dumps(_jsonable(self.to_dict()), sort_keys=True, indent=2)


def _jsonable(o):
    if isinstance(o, dict):
        return {k: _jsonable(v) for k, v in o.items()}
    if isinstance(o, (list, tuple)):
        return [_jsonable(v) for v in o]
    if isinstance(o, float) and not math.isfinite(o):
        return "inf" if o > 0 else ("-inf" if o < 0 else "nan")
    if isinstance(o, (np.floating, np.integer)):
        return _jsonable(o.item())
    return o


def _grid_info(nu: GridMeasure) -> dict:
    return {"x0": nu.x0, "dx": nu.dx, "n": nu.n}


def i_term(mu_log: DiscreteMeasure, nu: Measure, N_ref=DEFAULT_N_REF) -> dict:
    """Finite-N estimate of ``I(mu_log, nu)`` with its Jensen bracket ``[mean*mean, 0]``."""
    est = spherical_limit_estimate(mu_log, nu, N_ref)
    lo = mu_log.mean() * nu.mean()
    return {"estimate": est.estimate, "bracket": [min(lo, 0.0), 0.0], "exact": est.exact, "per_N": est.per_N}


def rate_H(nu: GridMeasure, ens: EnsembleSpec, N_ref=DEFAULT_N_REF, *, strict: bool = False) -> RateReport:
    """Shape rate function ``H`` and its variant ``H~`` without the ``S`` terms.

    ``H~(nu) = int c dnu - ((a+b)/2) Sigma(nu) - F(nu) - a I(log#mu_A, nu) - b I(log#mu_B, nu)``
    and ``H = H~ - (a/2) S(mu_A) - (b/2) S(mu_B)``.  Outside the density-capped
    set the value is ``+inf`` (or :class:`NotInL` with ``strict=True``).
    """
    if not nu.in_L():
        if strict:
            raise NotInL(f"density reaches {nu.rho.max():.6g} > 1")
        inf = math.inf
        return RateReport(inf, (inf, inf), inf, (inf, inf), {"reason": "NotInL"}, _grid_info(nu), False)
    comp: dict = {}
    comp["potential"] = nu.integrate(ens.c)
    comp["log_energy"] = log_energy(nu)
    comp["F"] = ens.F.value(nu)
    base = comp["potential"] - ens.beta * comp["log_energy"] - comp["F"]
    est, lo_add, hi_add = base, 0.0, 0.0
    for tag, weight in (("A", ens.a), ("B", ens.b)):
        if weight == 0:
            comp[f"I_{tag}"] = {"estimate": 0.0, "bracket": [0.0, 0.0], "exact": True}
            continue
        it = i_term(ens.log_push(tag), nu, N_ref)
        comp[f"I_{tag}"] = it
        est -= weight * it["estimate"]
        hi_add -= weight * it["bracket"][0]
        lo_add -= weight * it["bracket"][1]
    comp["S_A"] = s_functional(ens.mu_A)
    comp["S_B"] = s_functional(ens.mu_B)
    s_part = 0.5 * ens.a * comp["S_A"] + 0.5 * ens.b * comp["S_B"]
    tb = (base + lo_add, base + hi_add)
    return RateReport(
        value=est - s_part,
        bracket=(tb[0] - s_part, tb[1] - s_part),
        tilde_value=est,
        tilde_bracket=tb,
        components=comp,
        grid=_grid_info(nu),
    )


def rate_H_cutoff(nu: GridMeasure, ens: EnsembleSpec, M: float, N_ref=DEFAULT_N_REF) -> float:
    """``H~^M(nu) = -a I(log#mu_A, phi_M#nu) - b I(log#mu_B, phi_M#nu) + int int g ^ M - F``."""
    gg = nu.integrate(ens.c) - ens.beta * log_energy(nu)
    val = gg - pair_excess(nu, ens, M) - ens.F.value(nu)
    nuM = cutoff(nu, M)
    for tag, weight in (("A", ens.a), ("B", ens.b)):
        if weight:
            val -= weight * i_term(ens.log_push(tag), nuM, N_ref)["estimate"]
    return float(val)


def model_functionals(nu: GridMeasure, mu: GridMeasure, spec, N_ref=DEFAULT_N_REF, *, strict: bool = False):
    """Rate-function pieces of the matrix model.

    ``G(nu) = -I(log#mu_A, nu) - I(log#mu_B, nu) - Sigma(nu) + rho_Phi int x dnu``
    and ``J(nu, mu) = -I(log Psi#mu, nu) - S(Psi#mu)/2 - Sigma(mu) + int x^2 dmu / 2``
    with ``Psi = Phi / sup Phi``.

    Returns
    -------
    G, J : dict
        ``{"value", "bracket", ...}``; infinite when ``nu`` leaves the capped set.
    components : dict
    """
    from .spherical import as_spectrum

    if not nu.in_L():
        if strict:
            raise NotInL("nu violates the density cap")
        inf = {"value": math.inf, "bracket": [math.inf, math.inf]}
        return dict(inf), dict(inf), {"reason": "NotInL"}
    if spec.phi.certified_inf <= 0:
        raise NonPositiveInput("Psi must be certified positive")
    A, B = as_spectrum(spec.A), as_spectrum(spec.B)
    if A.values[0] <= 0 or B.values[0] <= 0:
        raise NonPositiveInput("log pushforward needs positive A and B")
    muA = DiscreteMeasure.uniform(A.values)
    muB = DiscreteMeasure.uniform(B.values)
    comp: dict = {}
    comp["I_A"] = i_term(muA.pushforward(np.log), nu, N_ref)
    comp["I_B"] = i_term(muB.pushforward(np.log), nu, N_ref)
    comp["Sigma_nu"] = log_energy(nu)
    comp["mean_nu"] = nu.mean()
    rho = spec.phi.rho
    g_base = -comp["Sigma_nu"] + rho * comp["mean_nu"]
    G = {
        "value": g_base - comp["I_A"]["estimate"] - comp["I_B"]["estimate"],
        "bracket": [g_base, g_base - comp["I_A"]["bracket"][0] - comp["I_B"]["bracket"][0]],
    }
    psi = spec.phi.normalized()
    if spec.phi.is_constant():
        push = DiscreteMeasure.dirac(1.0)
    else:
        push = mu.pushforward(psi, nodes=4)
    comp["I_psi"] = i_term(push.pushforward(np.log), nu, N_ref)
    comp["S_psi"] = 0.0 if spec.phi.is_constant() else s_functional(push, nodes=1)
    comp["Sigma_mu"] = log_energy(mu)
    comp["half_second_moment_mu"] = 0.5 * mu.moment(2)
    j_base = -0.5 * comp["S_psi"] - comp["Sigma_mu"] + comp["half_second_moment_mu"]
    J = {
        "value": j_base - comp["I_psi"]["estimate"],
        "bracket": [j_base, j_base - comp["I_psi"]["bracket"][0]],
    }
    return G, J, comp
