"""Minimization over density-capped measures, quantile discretization, and first-order residuals."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import matmul_toeplitz

from .errors import ConvergenceError, GridTooSmall, NotInL
from .measures import DiscreteMeasure, GridMeasure, Measure, spectrum_points
from .ratefun import (
    DEFAULT_N_REF,
    EnsembleSpec,
    bl_distance,
    cell_pair_kernel,
    i_term,
)
from .spherical import SpectrumSet, hciz_grad_e
from .tableaux import LSequence, YoungShape

SPACING_TOL = 1e-9
BOUND_TOL = 1e-13
EDGE_MASS = 1e-6


# --------------------------------------------------------------------------
# quantile discretization


@dataclass
class Discretization:
    points: np.ndarray  # a_{1,N} >= ... >= a_{N,N}
    l: LSequence | None
    shape: YoungShape | None
    distance: float
    min_spacing: float

    @property
    def spectrum(self) -> SpectrumSet:
        return SpectrumSet(self.points)


def quantile_points(nu: Measure, N: int, L: float | None = None) -> np.ndarray:
    """Nested quantile points ``a_{1,N} > ... > a_{N,N}`` of ``phi_L # nu``.

    ``a_{N,N}`` is the ``1/N`` quantile and each next point is the first
    location carrying a further ``1/N`` of mass.  Once a point reaches the
    truncation level ``L`` the following points step up by ``1/N``.
    """
    if isinstance(nu, DiscreteMeasure):
        raise TypeError("quantile_points expects a measure without atoms")
    F, Q = nu.cdf, nu.quantile
    top = nu.support()[1]
    L = top if L is None else float(L)
    a = np.empty(N)
    a[N - 1] = min(float(Q(1.0 / N)), L)
    for i in range(N - 1, 0, -1):
        prev = a[i]
        if prev < L:
            p = min(float(F(prev)) + 1.0 / N, 1.0)
            cand = float(Q(p))
            a[i - 1] = cand if cand < L else max(L, prev + 1.0 / N)
        else:
            a[i - 1] = prev + 1.0 / N
    return a


def quantile_discretize(nu: Measure, N: int, L: float | None = None, *, metric: str = "bl") -> Discretization:
    """N-point discretization of ``nu``, rounded to a Young shape when ``nu`` has a density.

    For a density bounded by one the points satisfy
    ``N (a_i - a_{i+1}) >= 1``, so ``l_i = floor(N a_i)`` is strictly
    decreasing.  Atomic measures are discretized by repeating each atom
    ``floor(N * mass)`` times; no shape is produced then.

    Raises
    ------
    NotInL
        If the spacing guarantee fails for a density input.
    """
    if N < 1:
        raise ValueError("N must be positive")
    if isinstance(nu, DiscreteMeasure):
        pts = spectrum_points(nu, N)[::-1].copy()
        d = bl_distance(DiscreteMeasure.uniform(pts), nu, metric=metric)
        sp = float(np.min(pts[:-1] - pts[1:])) if N > 1 else math.inf
        return Discretization(pts, None, None, d, sp)
    a = quantile_points(nu, N, L)
    gaps = N * (a[:-1] - a[1:]) if N > 1 else np.array([math.inf])
    if np.any(gaps < 1 - SPACING_TOL):
        raise NotInL(f"quantile spacing {gaps.min():.6g} < 1; density exceeds one")
    l = np.floor(N * a + SPACING_TOL).astype(int)
    for i in range(N - 2, -1, -1):
        l[i] = max(l[i], l[i + 1] + 1)
    l[l < 0] = 0
    for i in range(N - 2, -1, -1):
        l[i] = max(l[i], l[i + 1] + 1)
    lseq = LSequence(N, tuple(int(v) for v in l))
    d = bl_distance(DiscreteMeasure.uniform(a), nu, metric=metric, nodes=4)
    return Discretization(a, lseq, lseq.to_shape(), d, float(gaps.min()))


# --------------------------------------------------------------------------
# capped-simplex projection


def project_capped_simplex(y: np.ndarray, cap: float, total: float = 1.0) -> np.ndarray:
    """Euclidean projection onto ``{0 <= m <= cap, sum m = total}`` by shift-and-clip."""
    n = y.size
    if cap * n < total * (1 - 1e-14):
        raise ValueError("cap too small for the requested total mass")
    lo, hi = float(y.min() - cap), float(y.max())
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        s = np.clip(y - mid, 0.0, cap).sum()
        if s > total:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-16 * max(1.0, abs(mid)):
            break
    tau = 0.5 * (lo + hi)
    m = np.clip(y - tau, 0.0, cap)
    free = (y - tau > 0) & (y - tau < cap)
    if np.any(free):
        upper = (y - tau) >= cap
        tau = (y[free].sum() - (total - cap * upper.sum())) / free.sum()
        m = np.clip(y - tau, 0.0, cap)
    return m


# --------------------------------------------------------------------------
# discretized functional


@dataclass
class Grid:
    x_max: float
    n: int
    x0: float = 0.0

    @property
    def h(self) -> float:
        return (self.x_max - self.x0) / self.n

    @property
    def midpoints(self) -> np.ndarray:
        return self.x0 + self.h * (np.arange(self.n) + 0.5)

    @classmethod
    def parse(cls, text: str) -> "Grid":
        """``"a:b:n"`` or ``"b:n"``."""
        parts = [t for t in text.split(":")]
        if len(parts) == 3:
            return cls(float(parts[1]), int(parts[2]), float(parts[0]))
        if len(parts) == 2:
            return cls(float(parts[0]), int(parts[1]))
        raise ValueError("grid must be 'x0:x_max:n' or 'x_max:n'")


class DiscretizedFunctional:
    """``H~`` restricted to piecewise-constant densities on a grid, in cell-mass variables.

    ``f(m) = sum m_k cbar_k - ((a+b)/2) m^T K m / h^2 - F(nu) - a I_A - b I_B``
    where ``K`` is the exact cell-pair log kernel.  I-terms are either absent
    (trivial log-pushforwards) or represented by an external field that is
    held fixed between outer updates.
    """

    def __init__(self, ens: EnsembleSpec, grid: Grid, cap: float = 1.0, N_ref=DEFAULT_N_REF):
        self.ens, self.grid, self.cap = ens, grid, cap
        self.N_ref = tuple(N_ref)
        h = grid.h
        left = grid.x0 + h * np.arange(grid.n)
        gx, gw = np.polynomial.legendre.leggauss(4)
        nodes = left[:, None] + h * 0.5 * (gx + 1)[None, :]
        self.cbar = ens.c(nodes) @ (0.5 * gw)
        self.K = cell_pair_kernel(grid.n, h)
        self.beta = ens.beta
        self.field = np.zeros(grid.n)  # frozen I-term potential per unit mass
        self.field_const = 0.0

    def measure(self, m: np.ndarray) -> GridMeasure:
        return GridMeasure(self.grid.x0, self.grid.h, m / self.grid.h)

    def log_field(self, m: np.ndarray) -> np.ndarray:
        """Cell averages of ``int log|x - y| dnu(y)``."""
        h = self.grid.h
        return matmul_toeplitz((self.K, self.K), m) / (h * h)

    def value(self, m: np.ndarray, U: np.ndarray | None = None) -> float:
        U = self.log_field(m) if U is None else U
        v = float(m @ self.cbar) - self.beta * float(m @ U) + float(m @ self.field) + self.field_const
        if self.ens.F.kind != "zero":
            v -= self.ens.F.value(self.measure(m))
        return v

    def gradient(self, m: np.ndarray, U: np.ndarray | None = None) -> np.ndarray:
        """Effective potential per unit mass."""
        U = self.log_field(m) if U is None else U
        g = self.cbar - 2 * self.beta * U + self.field
        if self.ens.F.kind != "zero":
            g = g - self.ens.F.gradient(self.measure(m), self.grid.midpoints)
        return g

    # I-term field ---------------------------------------------------------
    def update_field(self, m: np.ndarray) -> float:
        """Re-linearize the I-terms at ``m``; returns their current value."""
        if self.ens.i_terms_vanish():
            return 0.0
        nu = self.measure(m)
        N = max(self.N_ref)
        x = self.grid.midpoints
        phi = np.zeros_like(x)
        total = 0.0
        for tag, w in (("A", self.ens.a), ("B", self.ens.b)):
            if w == 0:
                continue
            muL = self.ens.log_push(tag)
            total += w * i_term(muL, nu, self.N_ref)["estimate"]
            d = spectrum_points(muL, N)
            e = spectrum_points(nu, N)
            ge = hciz_grad_e(d, e) / N  # derivative of the first variation
            # integrate the slope to get the first variation, up to a constant
            slope = np.interp(x, e, ge)
            prim = np.concatenate([[0.0], np.cumsum(0.5 * (slope[1:] + slope[:-1]) * np.diff(x))])
            phi += w * prim
        self.field = -phi
        # constant so that the linearization matches the current I-value
        self.field_const = -total - float(m @ self.field)
        return total


@dataclass
class KKTReport:
    effective_potential: np.ndarray = field(repr=False)
    lagrange_const: float
    residual_interior: float
    residual_lower: float
    residual_upper: float
    fw_gap: float = math.nan

    @property
    def residual(self) -> float:
        return max(self.residual_interior, self.residual_lower, self.residual_upper)

    def to_dict(self) -> dict:
        return {
            "lagrange_const": self.lagrange_const,
            "residual_interior": self.residual_interior,
            "residual_lower": self.residual_lower,
            "residual_upper": self.residual_upper,
            "fw_gap": self.fw_gap,
        }


def _kkt(m: np.ndarray, V: np.ndarray, ub: float) -> KKTReport:
    lower = m <= BOUND_TOL * ub
    upper = m >= ub * (1 - 1e-12)
    interior = ~(lower | upper)
    lo_set = interior | lower
    up_set = interior | upper
    vmin = float(V[lo_set].min()) if np.any(lo_set) else math.inf
    vmax = float(V[up_set].max()) if np.any(up_set) else -math.inf
    if math.isinf(vmin):
        lam = vmax
    elif math.isinf(vmax):
        lam = vmin
    else:
        lam = 0.5 * (vmin + vmax)
    r_int = float(np.max(np.abs(V[interior] - lam))) if np.any(interior) else 0.0
    r_low = float(np.max(np.maximum(0.0, lam - V[lower]))) if np.any(lower) else 0.0
    r_up = float(np.max(np.maximum(0.0, V[upper] - lam))) if np.any(upper) else 0.0
    # Frank-Wolfe gap: fill the cheapest cells up to the cap
    order = np.argsort(V, kind="stable")
    s = np.zeros_like(m)
    k_full = int(math.floor(1.0 / ub + 1e-12))
    s[order[:k_full]] = ub
    rest = 1.0 - ub * k_full
    if rest > 0 and k_full < m.size:
        s[order[k_full]] = rest
    gap = float(V @ (m - s))
    return KKTReport(V, lam, r_int, r_low, r_up, max(gap, 0.0))


def kkt_residual(nu: GridMeasure, ens: EnsembleSpec, grid: Grid | None = None, cap: float = 1.0) -> KKTReport:
    """First-order optimality residuals of ``nu`` for the discretized functional."""
    if grid is None:
        grid = Grid(nu.edges[-1], nu.n, nu.x0)
    fun = DiscretizedFunctional(ens, grid, cap)
    m = nu.masses
    fun.update_field(m)
    return _kkt(m, fun.gradient(m), cap * grid.h)


@dataclass
class MinimizeResult:
    measure: GridMeasure
    kkt: KKTReport
    value: float
    bracket: tuple[float, float]
    iterations: int
    converged: bool
    history: list = field(repr=False, default_factory=list)

    def to_dict(self) -> dict:
        return {
            "value": self.value,
            "bracket": list(self.bracket),
            "iterations": self.iterations,
            "converged": self.converged,
            "kkt": self.kkt.to_dict(),
            "grid": {"x0": self.measure.x0, "dx": self.measure.dx, "n": self.measure.n},
        }


def default_grid(ens: EnsembleSpec, n: int = 512, cap: float = 1.0) -> Grid:
    """Grid ``[0, x_max]`` sized from the linear-growth bound on the first moment."""
    rho, C = ens.borg_constants()
    Cp = C - ens.F.bound
    # objective value of the unit block on [0, 1/cap] bounds the infimum
    probe = DiscretizedFunctional(ens, Grid(1.0 / cap, 64), cap)
    Mval = probe.value(np.full(64, 1.0 / 64))
    if not ens.i_terms_vanish():
        Mval += (ens.a + ens.b) * 1.0  # I-terms lie in [mean*mean, 0]; loose allowance
    mean_bound = max(0.0, 2.0 / rho * (Mval - Cp))
    return Grid(max(2.0 / cap, 2 * mean_bound + 1.0 / cap), n)


def _initial(fun: DiscretizedFunctional) -> np.ndarray:
    g = fun.grid
    ub = fun.cap * g.h
    width = min(g.n, max(1, int(math.ceil(2.0 / (fun.cap * g.h)))))
    center = int(np.argmin(fun.cbar))
    start = min(max(0, center - width // 2), g.n - width)
    m = np.zeros(g.n)
    m[start : start + width] = 1.0 / width
    return project_capped_simplex(m, ub)


def minimize_over_L(
    ens: EnsembleSpec,
    grid: Grid | None = None,
    *,
    cap: float = 1.0,
    tol: float = 1e-6,
    max_iter: int = 100_000,
    outer: int = 20,
    N_ref=DEFAULT_N_REF,
    check_edge: bool = True,
) -> MinimizeResult:
    """Minimize the discretized rate functional over capped densities.

    Projected gradient with Barzilai-Borwein steps and Armijo backtracking
    (monotone); stops when the KKT residual is below ``tol``.  When the
    I-terms are active, their field is re-linearized up to ``outer`` times.

    Raises
    ------
    GridTooSmall
        If more than ``1e-6`` of the mass sits in the last two cells.
    """
    grid = default_grid(ens, cap=cap) if grid is None else grid
    fun = DiscretizedFunctional(ens, grid, cap, N_ref)
    ub = cap * grid.h
    if ub * grid.n < 1:
        raise GridTooSmall("grid cannot hold unit mass under the density cap")
    m = _initial(fun)
    history: list[float] = []
    it_total = 0
    converged = False
    n_outer = 1 if ens.i_terms_vanish() else outer
    for _ in range(n_outer):
        fun.update_field(m)
        m, it, converged, hist = _pg(fun, m, ub, tol, max_iter - it_total)
        history += hist
        it_total += it
        if ens.i_terms_vanish():
            break
        prev = m.copy()
        fun.update_field(m)
        if np.abs(fun.gradient(m) - fun.gradient(prev)).max() < tol and converged:
            break
    U = fun.log_field(m)
    V = fun.gradient(m, U)
    rep = _kkt(m, V, ub)
    if check_edge and m[-2:].sum() > EDGE_MASS:
        raise GridTooSmall(f"mass {m[-2:].sum():.3g} within two cells of x_max={grid.x_max}")
    nu = fun.measure(m)
    value = fun.value(m, U)
    if ens.i_terms_vanish():
        bracket = (value - rep.fw_gap, value)
    else:
        # value already includes the I-terms at their estimate; bracket them by Jensen
        base = value - (float(m @ fun.field) + fun.field_const)
        hi_add = 0.0
        for tag, w in (("A", ens.a), ("B", ens.b)):
            if w:
                hi_add -= w * i_term(ens.log_push(tag), nu, N_ref)["bracket"][0]
        bracket = (min(value, base) - rep.fw_gap, base + hi_add)
    return MinimizeResult(nu, rep, float(value), bracket, it_total, converged, history)


def _pg(fun: DiscretizedFunctional, m: np.ndarray, ub: float, tol: float, max_iter: int):
    sigma = 1e-4
    U = fun.log_field(m)
    f = fun.value(m, U)
    g = fun.gradient(m, U)
    alpha = 1.0 / max(1e-12, np.abs(g).max())
    hist = [f]
    for it in range(1, max_iter + 1):
        rep = _kkt(m, g, ub)
        if rep.residual <= tol:
            return m, it - 1, True, hist
        while True:
            m_new = project_capped_simplex(m - alpha * g, ub)
            d = m_new - m
            U_new = fun.log_field(m_new)
            f_new = fun.value(m_new, U_new)
            if f_new <= f + sigma * float(g @ d) or np.abs(d).max() < 1e-16:
                break
            alpha *= 0.5
        g_new = fun.gradient(m_new, U_new)
        s, y = m_new - m, g_new - g
        sy = float(s @ y)
        alpha = float(s @ s) / sy if sy > 1e-300 else 1e10
        alpha = min(max(alpha, 1e-12), 1e10)
        if np.abs(d).max() < 1e-16 and f_new >= f:
            m, f, g = m_new, f_new, g_new
            hist.append(f)
            rep = _kkt(m, g, ub)
            return m, it, rep.residual <= tol, hist
        m, f, g = m_new, f_new, g_new
        hist.append(f)
    return m, max_iter, False, hist


def require_converged(res: MinimizeResult, tol: float = 1e-6):
    if res.kkt.residual > tol:
        raise ConvergenceError(f"KKT residual {res.kkt.residual:.3g} > {tol}")
    return res
