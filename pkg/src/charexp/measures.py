"""Probability measures on the line: finite atomic measures and piecewise-constant grid densities."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from typing import Callable, Iterable

import numpy as np

from .errors import NotInL

MASS_TOL = 1e-10

# 4-point Gauss-Legendre rule on [0, 1]; exact for cubics
_GL_X, _GL_W = np.polynomial.legendre.leggauss(4)
GL4_NODES = 0.5 * (_GL_X + 1.0)
GL4_WEIGHTS = 0.5 * _GL_W


def _freeze(a):
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class DiscreteMeasure:
    """Finitely many atoms with nonnegative weights summing to one."""

    positions: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        pos = _freeze(self.positions).ravel()
        w = _freeze(self.weights).ravel()
        if pos.shape != w.shape or pos.size == 0:
            raise ValueError("positions and weights must be nonempty and of equal length")
        if not np.all(np.isfinite(pos)):
            raise ValueError("positions must be finite")
        if np.any(w < 0):
            raise ValueError("weights must be nonnegative")
        if abs(w.sum() - 1.0) > 1e-12 * max(1, w.size):
            raise ValueError(f"weights sum to {w.sum()!r}, not 1")
        order = np.argsort(pos, kind="stable")
        object.__setattr__(self, "positions", _freeze(pos[order]))
        object.__setattr__(self, "weights", _freeze(w[order]))

    @classmethod
    def uniform(cls, positions) -> "DiscreteMeasure":
        pos = np.asarray(positions, dtype=float).ravel()
        return cls(pos, np.full(pos.size, 1.0 / pos.size))

    @classmethod
    def dirac(cls, x: float) -> "DiscreteMeasure":
        return cls([x], [1.0])

    @property
    def atoms(self):
        return list(zip(self.positions.tolist(), self.weights.tolist()))

    def is_dirac(self) -> bool:
        return bool(np.ptp(self.positions[self.weights > 0]) == 0.0)

    def moment(self, k: int = 1) -> float:
        return float(np.dot(self.weights, self.positions**k))

    def mean(self) -> float:
        return self.moment(1)

    def integrate(self, f: Callable) -> float:
        return float(np.dot(self.weights, f(self.positions)))

    def support(self):
        live = self.positions[self.weights > 0]
        return float(live[0]), float(live[-1])

    def cdf(self, x: float) -> float:
        return float(self.weights[self.positions <= x].sum())

    def pushforward(self, f: Callable) -> "DiscreteMeasure":
        return DiscreteMeasure(f(self.positions), self.weights)

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("# kind: atoms\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["position", "weight"])
        for p, q in zip(self.positions, self.weights):
            w.writerow([repr(float(p)), repr(float(q))])
        return buf.getvalue()


@dataclass(frozen=True)
class GridMeasure:
    """Piecewise-constant density ``rho`` on cells ``[x0 + k dx, x0 + (k+1) dx)``."""

    x0: float
    dx: float
    rho: np.ndarray = field(repr=False)

    def __post_init__(self):
        rho = _freeze(self.rho).ravel()
        if not self.dx > 0:
            raise ValueError("dx must be positive")
        if rho.size == 0 or np.any(rho < 0) or not np.all(np.isfinite(rho)):
            raise ValueError("rho must be a nonempty array of finite nonnegative values")
        mass = rho.sum() * self.dx
        if abs(mass - 1.0) > MASS_TOL:
            raise ValueError(f"total mass {mass!r} differs from 1")
        object.__setattr__(self, "x0", float(self.x0))
        object.__setattr__(self, "dx", float(self.dx))
        object.__setattr__(self, "rho", rho)

    # construction -------------------------------------------------------
    @classmethod
    def uniform(cls, a: float, b: float, n: int = 1) -> "GridMeasure":
        dx = (b - a) / n
        return cls(a, dx, np.full(n, 1.0 / (b - a)))

    @classmethod
    def from_density(cls, f: Callable, a: float, b: float, n: int) -> "GridMeasure":
        """Cell averages of ``f`` on ``[a, b]``, renormalized to unit mass."""
        dx = (b - a) / n
        left = a + dx * np.arange(n)
        vals = f(left[:, None] + dx * GL4_NODES[None, :]) @ GL4_WEIGHTS
        vals = np.clip(vals, 0.0, None)
        return cls(a, dx, vals / (vals.sum() * dx))

    # geometry -------------------------------------------------------------
    @property
    def n(self) -> int:
        return self.rho.size

    @property
    def edges(self) -> np.ndarray:
        return self.x0 + self.dx * np.arange(self.n + 1)

    @property
    def midpoints(self) -> np.ndarray:
        return self.x0 + self.dx * (np.arange(self.n) + 0.5)

    @property
    def masses(self) -> np.ndarray:
        return self.rho * self.dx

    def support(self):
        live = np.nonzero(self.rho > 0)[0]
        return float(self.x0 + live[0] * self.dx), float(self.x0 + (live[-1] + 1) * self.dx)

    def in_L(self, cap: float = 1.0, tol: float = 1e-12) -> bool:
        return bool(self.rho.max() <= cap + tol)

    def require_L(self, cap: float = 1.0):
        if not self.in_L(cap):
            raise NotInL(f"density reaches {self.rho.max():.6g} > {cap}")

    # integrals ------------------------------------------------------------
    def moment(self, k: int = 1) -> float:
        e = self.edges
        return float(np.dot(self.rho, (e[1:] ** (k + 1) - e[:-1] ** (k + 1)) / (k + 1)))

    def mean(self) -> float:
        return self.moment(1)

    def cell_average(self, f: Callable) -> np.ndarray:
        left = self.edges[:-1]
        return f(left[:, None] + self.dx * GL4_NODES[None, :]) @ GL4_WEIGHTS

    def integrate(self, f: Callable) -> float:
        return float(np.dot(self.masses, self.cell_average(f)))

    def cdf(self, x) -> np.ndarray | float:
        """Distribution function; exact for the piecewise-constant density."""
        x = np.asarray(x, dtype=float)
        cum = np.concatenate([[0.0], np.cumsum(self.masses)])
        t = np.clip((x - self.x0) / self.dx, 0.0, self.n)
        k = np.minimum(np.floor(t).astype(int), self.n - 1)
        out = cum[k] + (t - k) * self.masses[k]
        out = np.minimum(out, 1.0)
        return float(out) if out.ndim == 0 else out

    def quantile(self, p) -> np.ndarray | float:
        """Generalized inverse ``inf{x : F(x) >= p}``."""
        p = np.asarray(p, dtype=float)
        cum = np.concatenate([[0.0], np.cumsum(self.masses)])
        cum[-1] = max(cum[-1], 1.0)
        k = np.searchsorted(cum, p, side="left") - 1
        k = np.clip(k, 0, self.n - 1)
        m = self.masses[k]
        frac = np.where(m > 0, (p - cum[k]) / np.where(m > 0, m, 1.0), 0.0)
        frac = np.clip(frac, 0.0, 1.0)
        out = self.x0 + self.dx * (k + frac)
        out = np.where(p <= 0, self.support()[0], out)
        return float(out) if out.ndim == 0 else out

    def to_atoms(self, nodes: int = 1) -> DiscreteMeasure:
        """Atomic representation: cell midpoints (``nodes=1``) or Gauss-Legendre nodes."""
        if nodes == 1:
            pos, w = self.midpoints, self.masses
        else:
            gx, gw = np.polynomial.legendre.leggauss(nodes)
            left = self.edges[:-1]
            pos = (left[:, None] + self.dx * 0.5 * (gx + 1)[None, :]).ravel()
            w = (self.masses[:, None] * 0.5 * gw[None, :]).ravel()
        keep = w > 0
        w = w[keep]
        return DiscreteMeasure(pos[keep], w / w.sum())

    def pushforward(self, f: Callable, nodes: int = 1) -> DiscreteMeasure:
        """Image measure, with each cell represented by its midpoint or Gauss nodes."""
        return self.to_atoms(nodes).pushforward(f)

    def scaled(self, L: float) -> "GridMeasure":
        """Exact image under ``x -> L x`` for ``L > 0``."""
        return GridMeasure(L * self.x0, L * self.dx, self.rho / L)

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("# kind: density\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["x", "rho"])
        for x, r in zip(self.midpoints, self.rho):
            w.writerow([repr(float(x)), repr(float(r))])
        return buf.getvalue()


Measure = DiscreteMeasure | GridMeasure


def as_atoms(mu: Measure, nodes: int = 1) -> DiscreteMeasure:
    return mu if isinstance(mu, DiscreteMeasure) else mu.to_atoms(nodes)


def cutoff(mu: Measure, M: float) -> DiscreteMeasure | GridMeasure:
    """Image of ``mu`` under ``x -> min(x, M)``."""
    if isinstance(mu, DiscreteMeasure):
        return mu.pushforward(lambda x: np.minimum(x, M))
    if mu.edges[-1] <= M:
        return mu
    return mu.to_atoms(4).pushforward(lambda x: np.minimum(x, M))


def dirac_value(mu: Measure):
    """Location of ``mu`` if it is a point mass, else ``None``."""
    if isinstance(mu, DiscreteMeasure) and mu.is_dirac():
        return float(mu.positions[mu.weights > 0][0])
    return None


def spectrum_points(mu: Measure, N: int) -> np.ndarray:
    """N points whose empirical law approximates ``mu`` (ascending).

    Atoms of mass ``m`` receive ``floor(N m)`` repeated points; the remaining
    points sit at the ``i/(n+1)`` quantiles of the atomless remainder.
    """
    point = dirac_value(mu)
    if point is not None:
        return np.full(N, point)
    if isinstance(mu, GridMeasure):
        p = np.arange(1, N + 1) / (N + 1)
        return np.asarray(mu.quantile(p), dtype=float)
    big = mu.weights >= 1.0 / (N + 1)
    reps = np.floor(N * mu.weights[big] + 1e-12).astype(int)
    pts = list(np.repeat(mu.positions[big], reps))
    rest_w = mu.weights[~big]
    n_rest = N - len(pts)
    if n_rest > 0:
        if rest_w.sum() > 0:
            pos = mu.positions[~big]
            cum = np.cumsum(rest_w) / rest_w.sum()
            levels = np.arange(1, n_rest + 1) / (n_rest + 1)
            idx = np.searchsorted(cum, levels - 1e-15, side="left")
            pts.extend(pos[np.minimum(idx, pos.size - 1)])
        else:
            # rounding left slots over: give them to the largest fractional parts
            frac = N * mu.weights[big] - reps
            order = np.argsort(-frac, kind="stable")[:n_rest]
            pts.extend(mu.positions[big][order])
    return np.sort(np.asarray(pts[:N], dtype=float))


def measure_from_csv(text: str) -> Measure:
    """Parse a two-column measure file.

    A ``# kind: atoms`` marker means ``position,weight`` rows; ``# kind: density``
    means ``x,rho`` rows on a uniform grid of cell midpoints.
    """
    kind = None
    rows = []
    for line in text.splitlines():
        s = line.strip()
        if not s:
            continue
        if s.startswith("#"):
            key, _, val = s[1:].partition(":")
            if key.strip() == "kind":
                kind = val.strip()
            continue
        parts = [p.strip() for p in s.split(",")]
        try:
            rows.append((float(parts[0]), float(parts[1])))
        except ValueError:
            continue  # column header
    if kind not in ("atoms", "density"):
        raise ValueError("measure file needs a '# kind: atoms' or '# kind: density' marker")
    if not rows:
        raise ValueError("measure file has no data rows")
    a = np.array(rows)
    if kind == "atoms":
        w = a[:, 1]
        return DiscreteMeasure(a[:, 0], w / w.sum())
    x = a[:, 0]
    dx = float(x[1] - x[0]) if x.size > 1 else 1.0
    if x.size > 1 and not np.allclose(np.diff(x), dx, rtol=1e-9, atol=1e-12):
        raise ValueError("density rows must be on a uniform grid")
    rho = a[:, 1]
    return GridMeasure(x[0] - dx / 2, dx, rho / (rho.sum() * dx))


def pairwise_sum(values: Iterable[float] | np.ndarray) -> float:
    """Fixed-order pairwise-tree summation; bit-reproducible for a given input order."""
    a = np.asarray(values, dtype=float).ravel()
    if a.size == 0:
        return 0.0
    while a.size > 1:
        if a.size % 2:
            a = np.append(a, 0.0)
        a = a[0::2] + a[1::2]
    return float(a[0])

