"""Closed-form function families with certified bounds: potentials, cutoff functions, functionals."""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from numpy.polynomial import Polynomial

from .errors import HypothesisViolation

_TERM = re.compile(r"([+-]?)\s*(\d*\.?\d*(?:[eE][+-]?\d+)?)\s*\*?\s*(x(?:\s*(?:\^|\*\*)\s*(\d+))?)?")


def parse_polynomial(text: str) -> Polynomial:
    """Parse a polynomial in ``x`` such as ``"x^2-x"``, ``"0.5*x**3 + 2"`` or ``"-3x"``."""
    s = text.replace(" ", "")
    if s.startswith("(") and s.endswith(")"):
        s = s[1:-1]
    if not s:
        raise ValueError("empty polynomial")
    coeffs: dict[int, float] = {}
    pos = 0
    while pos < len(s):
        m = _TERM.match(s, pos)
        if not m or m.end() == pos:
            raise ValueError(f"cannot parse polynomial {text!r} at position {pos}")
        sign, num, xpart, power = m.groups()
        if not num and not xpart:
            raise ValueError(f"cannot parse polynomial {text!r} at position {pos}")
        c = float(num) if num else 1.0
        if sign == "-":
            c = -c
        k = (int(power) if power else 1) if xpart else 0
        coeffs[k] = coeffs.get(k, 0.0) + c
        pos = m.end()
    deg = max(coeffs)
    return Polynomial([coeffs.get(k, 0.0) for k in range(deg + 1)])


def _real_roots(p: Polynomial, tol: float = 1e-9) -> np.ndarray:
    if p.degree() < 1:
        return np.array([])
    r = p.roots()
    return np.sort(r[np.abs(r.imag) <= tol * (1 + np.abs(r.real))].real)


def _poly_str(p: Polynomial) -> str:
    return " + ".join(f"{c:g}*x^{k}" for k, c in enumerate(p.coef) if c != 0) or "0"


@dataclass(frozen=True)
class Potential:
    """Polynomial confining potential ``c(x) = scale * p(x)`` on ``x >= 0``.

    ``growth`` and ``offset`` certify ``c(x) >= growth * x + offset`` for all
    ``x >= 0`` with ``growth > 0``.
    """

    poly: Polynomial
    scale: float = 1.0
    text: str = ""
    growth: float = field(init=False)
    offset: float = field(init=False)

    def __post_init__(self):
        p = self.poly.trim() * self.scale
        deg = p.degree()
        lead = p.coef[-1] if deg >= 0 else 0.0
        if deg < 1 or lead <= 0:
            raise HypothesisViolation("growth", "potential must grow at least linearly at +infinity")
        rho = float(lead) if deg == 1 else 1.0
        q = p - Polynomial([0.0, rho])
        cands = [0.0] + [r for r in _real_roots(q.deriv()) if r > 0]
        C = float(min(q(c) for c in cands))
        object.__setattr__(self, "growth", rho)
        object.__setattr__(self, "offset", C)

    @classmethod
    def parse(cls, text: str, scale: float = 1.0) -> "Potential":
        return cls(parse_polynomial(text), scale, text)

    def __call__(self, x):
        return self.scale * self.poly(np.asarray(x, dtype=float))

    def deriv(self, x):
        return self.scale * self.poly.deriv()(np.asarray(x, dtype=float))

    def antideriv(self) -> Callable:
        P = self.poly.integ()
        return lambda x: self.scale * P(np.asarray(x, dtype=float))

    def is_increasing(self) -> bool:
        """Nondecreasing on ``[0, inf)``."""
        d = self.poly.deriv()
        pts = [0.0] + [r for r in _real_roots(d) if r > 0]
        # d has no sign change between roots; test midpoints and far right
        probe = [p + 1e-6 for p in pts] + [max(pts) + 1.0]
        return bool(all(d(t) >= 0 for t in probe) and d(0.0) >= 0)

    def describe(self) -> str:
        return f"{self.scale:g}*({self.text or _poly_str(self.poly)})"


class CutoffFunction:
    """Function ``Phi`` with analytically certified ``0 < inf Phi <= sup Phi < 1``."""

    family: str
    certified_inf: float
    certified_sup: float

    def __call__(self, x):
        raise NotImplementedError

    @property
    def rho(self) -> float:
        """``-log sup|Phi|``."""
        return -math.log(self.certified_sup)

    def is_constant(self) -> bool:
        return self.certified_inf == self.certified_sup

    def normalized(self) -> Callable:
        """``Psi = Phi / sup Phi``."""
        s = self.certified_sup
        return lambda x: self(x) / s

    def of_matrix(self, M: np.ndarray) -> np.ndarray:
        """``Phi(M)`` for a Hermitian matrix or stack of matrices."""
        w, V = np.linalg.eigh(M)
        return (V * self(w)[..., None, :]) @ np.conj(np.swapaxes(V, -1, -2))

    def check(self, strict: bool = True):
        if not (self.certified_sup < 1):
            raise HypothesisViolation("borne", f"sup Phi = {self.certified_sup} is not < 1")
        if strict and not (self.certified_inf > 0):
            raise HypothesisViolation("phi_lower", f"inf Phi = {self.certified_inf} is not > 0")


class ConstantCutoff(CutoffFunction):
    family = "constant"

    def __init__(self, phi0: float):
        self.phi0 = float(phi0)
        self.certified_inf = self.certified_sup = self.phi0

    def __call__(self, x):
        return np.full(np.shape(x), self.phi0)

    def describe(self) -> str:
        return f"constant:{self.phi0:g}"


class RationalCutoff(CutoffFunction):
    """``Phi = p / q`` with ``q`` free of real roots; range from critical points and limits."""

    family = "rational"

    def __init__(self, p: Polynomial, q: Polynomial, text: str = ""):
        self.p, self.q, self.text = p.trim(), q.trim(), text
        if q.degree() < 0 or len(_real_roots(self.q)) > 0:
            raise HypothesisViolation("rational_pole", "denominator has a real root")
        if self.p.degree() > self.q.degree():
            raise HypothesisViolation("borne", "numerator degree exceeds denominator degree")
        crit = _real_roots(self.p.deriv() * self.q - self.p * self.q.deriv())
        vals = [float(self.p(t) / self.q(t)) for t in crit]
        if self.p.degree() == self.q.degree():
            vals.append(float(self.p.coef[-1] / self.q.coef[-1]))
        else:
            vals.append(0.0)
        if len(vals) == 1 and not len(crit):
            vals.append(vals[0])
        self.certified_inf = min(vals)
        self.certified_sup = max(vals)

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        return self.p(x) / self.q(x)

    def describe(self) -> str:
        return f"rational:{self.text or (_poly_str(self.p) + '/' + _poly_str(self.q))}"


class LogisticCutoff(CutoffFunction):
    """``lo + (hi - lo) / (1 + exp(-k (x - x0)))``; range ``(lo, hi)``."""

    family = "shifted_logistic"

    def __init__(self, lo: float, hi: float, k: float = 1.0, x0: float = 0.0):
        if not lo <= hi:
            raise ValueError("need lo <= hi")
        self.lo, self.hi, self.k, self.x0 = map(float, (lo, hi, k, x0))
        self.certified_inf, self.certified_sup = self.lo, self.hi

    def __call__(self, x):
        z = -self.k * (np.asarray(x, dtype=float) - self.x0)
        return self.lo + (self.hi - self.lo) * 0.5 * (1 - np.tanh(z / 2))

    def describe(self) -> str:
        return f"logistic:{self.lo:g},{self.hi:g},{self.k:g},{self.x0:g}"


def parse_cutoff(text: str) -> CutoffFunction:
    """Parse ``constant:0.5``, ``rational:(0.5+0.3x^2)/(1+x^2)`` or ``logistic:lo,hi,k,x0``."""
    fam, _, arg = text.partition(":")
    fam = fam.strip().lower()
    if fam == "constant":
        return ConstantCutoff(float(arg))
    if fam == "rational":
        if "/" not in arg:
            raise ValueError("rational cutoff needs 'p/q'")
        num, den = arg.split("/", 1)
        return RationalCutoff(parse_polynomial(num), parse_polynomial(den), arg)
    if fam in ("logistic", "shifted_logistic"):
        vals = [float(t) for t in arg.split(",")]
        return LogisticCutoff(*vals)
    raise ValueError(f"unknown cutoff family {fam!r}")


# bounded functionals F(nu) of a probability measure --------------------------


class Functional:
    """Bounded functional of a measure with a certified sup-norm ``bound``."""

    kind = "zero"
    bound = 0.0

    def value(self, mu) -> float:
        return 0.0

    def gradient(self, mu, x) -> np.ndarray:
        """First variation ``dF/dnu`` evaluated at ``x``."""
        return np.zeros(np.shape(x))

    def describe(self) -> str:
        return self.kind


class ConstantFunctional(Functional):
    kind = "constant"

    def __init__(self, v: float):
        self.v = float(v)
        self.bound = abs(self.v)

    def value(self, mu) -> float:
        return self.v

    def describe(self) -> str:
        return f"constant:{self.v:g}"


class LinearFunctional(Functional):
    """``F(nu) = alpha * int exp(-x) dnu``."""

    kind = "linear"

    def __init__(self, alpha: float):
        self.alpha = float(alpha)
        self.bound = abs(self.alpha)

    def f(self, x):
        return self.alpha * np.exp(-np.abs(np.asarray(x, dtype=float)))

    def value(self, mu) -> float:
        return mu.integrate(self.f)

    def gradient(self, mu, x):
        return self.f(x)

    def describe(self) -> str:
        return f"linear:{self.alpha:g}"


class QuadraticFunctional(Functional):
    """``F(nu) = alpha * int int exp(-(x-y)^2) dnu dnu``."""

    kind = "quadratic"

    def __init__(self, alpha: float):
        self.alpha = float(alpha)
        self.bound = abs(self.alpha)

    def _field(self, mu, x):
        from .measures import as_atoms

        at = as_atoms(mu, 2)
        x = np.asarray(x, dtype=float)
        return np.exp(-((x[..., None] - at.positions) ** 2)) @ at.weights

    def value(self, mu) -> float:
        from .measures import as_atoms

        at = as_atoms(mu, 2)
        return float(self.alpha * at.weights @ self._field(mu, at.positions))

    def gradient(self, mu, x):
        return 2 * self.alpha * self._field(mu, x)

    def describe(self) -> str:
        return f"quadratic:{self.alpha:g}"


def parse_functional(text: str | None) -> Functional:
    if not text or text.strip() in ("0", "zero", "none"):
        return Functional()
    kind, _, arg = text.partition(":")
    kind = kind.strip().lower()
    if kind == "constant":
        return ConstantFunctional(float(arg))
    if kind == "linear":
        return LinearFunctional(float(arg))
    if kind == "quadratic":
        return QuadraticFunctional(float(arg))
    raise ValueError(f"unknown functional {text!r}")
