"""The cut-off matrix model: direct Monte Carlo, character expansion, and free-energy sequences."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import HypothesisViolation, RadiusViolation, SpectralGapLost
from .families import CutoffFunction
from .sampling import MCEstimate, RngStream, gue_eigenvalues, mc_blocks, mc_reduce
from .spherical import SpectrumSet, as_spectrum
from .symfun import SchurEvaluator, dim_shape, markov_tail_bound
from .tableaux import enumerate_shapes

DRIFT_TOL = 0.1


@dataclass(frozen=True)
class ModelSpec:
    A: SpectrumSet
    B: SpectrumSet
    phi: CutoffFunction

    def __post_init__(self):
        object.__setattr__(self, "A", as_spectrum(self.A))
        object.__setattr__(self, "B", as_spectrum(self.B))
        if self.A.N != self.B.N:
            raise HypothesisViolation("size", "A and B must have the same size")

    @property
    def N(self) -> int:
        return self.A.N

    def b_is_zero(self) -> bool:
        return bool(np.all(self.B.values == 0) or np.all(self.A.values == 0))

    def exact_product(self) -> float | None:
        """Closed form when the integrand does not depend on the matrix."""
        if self.b_is_zero():
            return 1.0
        if self.phi.is_constant():
            p = self.phi.certified_sup
            return float(np.exp(-np.sum(np.log1p(-p * np.outer(self.B.values, self.A.values)))))
        return None


def validate_hypotheses(spec: ModelSpec, *, require_lower: bool = False) -> dict:
    """Check the standing assumptions on ``A``, ``B`` and ``Phi``.

    Raises
    ------
    HypothesisViolation
        With ``clause`` one of ``nonnegativity``, ``norm``, ``borne`` or ``phi_lower``.
    """
    for name, S in (("A", spec.A), ("B", spec.B)):
        if not S.nonnegative:
            raise HypothesisViolation("nonnegativity", f"{name} has a negative eigenvalue")
        if not S.norm_le_one:
            raise HypothesisViolation("norm", f"||{name}|| = {S.norm} > 1")
    spec.phi.check(strict=require_lower)
    if spec.phi.certified_inf < 0:
        raise HypothesisViolation("phi_lower", "Phi takes negative values")
    sup = spec.phi.certified_sup
    return {
        "ok": True,
        "N": spec.N,
        "rho_phi": -math.log(sup),
        "phi_sup": sup,
        "phi_inf": spec.phi.certified_inf,
        "norm_A": spec.A.norm,
        "norm_B": spec.B.norm,
        "spectral_gap": 1.0 - sup * spec.A.norm * spec.B.norm,
    }


def _mu_batch(spec: ModelSpec, M: np.ndarray) -> np.ndarray:
    a = spec.A.values
    if spec.A.is_scalar():
        return a[0] * spec.phi(np.linalg.eigvalsh(M))
    sa = np.sqrt(a)
    P = spec.phi.of_matrix(M)
    return np.linalg.eigvalsh(sa[:, None] * P * sa[None, :])


def _log_terms(spec: ModelSpec, mu: np.ndarray) -> np.ndarray:
    g = 1.0 - spec.B.values[None, :, None] * mu[:, None, :]
    if np.any(g <= 0):
        raise SpectralGapLost("1 - b_i mu_j <= 0 for some pair")
    return -np.log(g).sum(axis=(1, 2))


def integrand_log(spec: ModelSpec, M: np.ndarray) -> float | np.ndarray:
    """``-tr(x)tr log(I (x) I - B (x) Phi(M) A)`` for one matrix or a stack."""
    M = np.asarray(M)
    single = M.ndim == 2
    Ms = M[None] if single else M
    out = _log_terms(spec, _mu_batch(spec, Ms))
    return float(out[0]) if single else out


def partition_mc_ratio(spec: ModelSpec, samples: int, stream: RngStream, *, workers=None) -> MCEstimate:
    """``Z_N(Phi)/Z_N(0)`` as the GUE average of ``exp(integrand_log)``."""
    validate_hypotheses(spec)
    exact = spec.exact_product()
    if exact is not None:
        return MCEstimate(exact, 0.0, samples, stream.seed)
    from .sampling import gue_batch

    N = spec.N

    def block(rng, n):
        return np.exp(integrand_log(spec, gue_batch(N, n, rng)))

    return mc_reduce(mc_blocks(block, samples, stream, workers=workers), stream.seed)


@dataclass
class CharacterReport:
    estimate: MCEstimate
    K: int
    tail_bound: float
    n_shapes: int
    term_means: list  # (shape, mean of s_A s_B s_Phi / d)
    exact_expectation: bool

    def as_dict(self) -> dict:
        return {
            "char_sum": self.estimate.mean,
            "char_stderr": self.estimate.stderr,
            "K": self.K,
            "tail_bound": self.tail_bound,
            "n_shapes": self.n_shapes,
            "exact_expectation": self.exact_expectation,
        }


def partition_character_ratio(spec: ModelSpec, K: int, samples: int, stream: RngStream, *, workers=None):
    """Truncated character expansion of ``Z_N(Phi)/Z_N(0)``.

    Sums ``s_lambda(A) s_lambda(B) E[s_lambda(Phi(M))] / d_lambda`` over
    ``|lambda| <= K``.  One set of GUE draws is shared by every shape, and the
    standard error is computed from the per-draw totals, so it accounts for
    the correlation between shapes.  For constant ``Phi`` the expectation is
    ``phi0^{|lambda|} d_lambda`` and no sampling is done.

    Returns
    -------
    (MCEstimate, CharacterReport)
    """
    validate_hypotheses(spec)
    N = spec.N
    a, b = spec.A.values, spec.B.values
    sup = spec.phi.certified_sup
    if sup * spec.A.norm * spec.B.norm >= 1:
        raise RadiusViolation("||Phi|| ||A|| ||B|| >= 1")
    shapes = list(enumerate_shapes(K, N))
    sA, sB = SchurEvaluator(a.tolist()), SchurEvaluator(b.tolist())
    coef = np.array([sA.value(l.parts) * sB.value(l.parts) / dim_shape(l, N) for l in shapes])
    tail = float(markov_tail_bound(sup * a, b, K))

    if spec.phi.is_constant() or spec.b_is_zero():
        p = spec.phi.certified_sup
        terms = np.array([c * dim_shape(l, N) * p ** l.size for c, l in zip(coef, shapes)])
        total = float(np.sum(terms))
        est = MCEstimate(total, 0.0, samples, stream.seed)
        rep = CharacterReport(est, K, tail, len(shapes), list(zip(shapes, terms.tolist())), True)
        return est, rep

    def block(rng, n):
        ev = spec.phi(gue_eigenvalues(N, n, rng))
        ev_cols = [np.ascontiguousarray(ev[:, i]) for i in range(N)]
        sp = SchurEvaluator(ev_cols)
        out = np.empty((n, len(shapes)))
        for k, l in enumerate(shapes):
            out[:, k] = coef[k] * np.broadcast_to(sp.value(l.parts), (n,))
        return out

    per = mc_blocks(block, samples, stream, workers=workers)
    if np.any(per < 0):
        raise SpectralGapLost("negative character term; Phi must be nonnegative")
    est = mc_reduce(per.sum(axis=1), stream.seed)
    term_means = per.mean(axis=0)
    rep = CharacterReport(est, K, tail, len(shapes), list(zip(shapes, term_means.tolist())), False)
    return est, rep


def free_energy_sequence(specs, samples: int, stream: RngStream, *, workers=None) -> list:
    """``(N, N^-2 log(Z_N(Phi)/Z_N(0)), stderr)`` for each model, stderr by the delta method."""
    specs = list(specs)
    if not specs:
        return []
    mA = [s.A.values.mean() for s in specs]
    mB = [s.B.values.mean() for s in specs]
    if max(mA) - min(mA) > DRIFT_TOL or max(mB) - min(mB) > DRIFT_TOL:
        raise HypothesisViolation("drift", "A/B spectral means drift across N")
    out = []
    for s in specs:
        est = partition_mc_ratio(s, samples, stream.child(s.N), workers=workers)
        N2 = s.N**2
        out.append((s.N, math.log(est.mean) / N2, est.stderr / (est.mean * N2)))
    return out
