"""End-to-end acceptance checks, shared by ``charexp verify`` and the test suite.

Each check returns a :class:`CriterionResult`; none of them raises on a
numerical miss, so a full run always produces a complete table.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import mpmath
import numpy as np

from .equilibrium import Grid, minimize_over_L, quantile_discretize
from .errors import CharexpError
from .families import ConstantCutoff, Potential, parse_cutoff
from .measures import DiscreteMeasure, GridMeasure
from .partition import ModelSpec, partition_character_ratio, partition_mc_ratio
from .ratefun import EnsembleSpec, bl_distance, log_energy, rate_H, rate_H_cutoff, s_functional, s_kernel, w1_grid
from .sampling import RngStream
from .shape_gibbs import exact_stationary, metropolis_sample
from .spherical import cutoff_sandwich, hciz_exact, hciz_mc, jensen_bounds, schur_via_hciz
from .symfun import SchurEvaluator, cauchy_product, cauchy_truncated, schur_bialternant
from .tableaux import YoungShape, enumerate_shapes
from .yangmills import scalar_sum_oracle, ym_free_energy_trend, ym_partition


@dataclass
class CriterionResult:
    number: int
    name: str
    passed: bool
    detail: dict = field(default_factory=dict)
    seconds: float = 0.0
    limit_seconds: float | None = None

    def line(self, timing: bool = True) -> str:
        status = "PASS" if self.passed else "FAIL"
        text = f"[{status}] {self.number:2d} {self.name}"
        return f"{text} ({self.seconds:.1f}s)" if timing else text

    def as_dict(self) -> dict:
        return {
            "number": self.number,
            "name": self.name,
            "passed": self.passed,
            "detail": self.detail,
        }


def spaced_points(rng: np.random.Generator, n: int, lo: float, hi: float, gap: float) -> np.ndarray:
    """``n`` sorted uniform-like points in ``[lo, hi]`` with pairwise spacing at least ``gap``."""
    u = np.sort(rng.uniform(0.0, hi - lo - gap * (n - 1), n))
    return lo + u + gap * np.arange(n)


def _random_shape(rng, N: int, max_part: int) -> YoungShape:
    return YoungShape(tuple(sorted(rng.integers(0, max_part + 1, N).tolist(), reverse=True)))


def _timed(number: int, name: str, limit: float | None):
    def deco(fn):
        def run(seed: int = 7) -> CriterionResult:
            t0 = time.perf_counter()
            try:
                passed, detail = fn(seed)
            except CharexpError as exc:
                passed, detail = False, {"error": type(exc).__name__, "message": str(exc)}
            dt = time.perf_counter() - t0
            if limit is not None and dt > limit:
                passed = False
                detail = {**detail, "runtime_exceeded": limit}
            return CriterionResult(number, name, bool(passed), detail, dt, limit)

        run.__name__ = fn.__name__
        run.__doc__ = fn.__doc__
        run.number = number
        return run

    return deco


@_timed(1, "Schur routes agree (bialternant vs branching)", 10.0)
def schur_routes(seed: int):
    rng = RngStream(seed, 1).generator()
    worst = 0.0
    count = 0
    for N in range(1, 6):
        X = np.stack([spaced_points(rng, N, 0.1, 0.9, 0.05) for _ in range(200)])
        ev = SchurEvaluator([np.ascontiguousarray(X[:, i]) for i in range(N)])
        for lam in enumerate_shapes(10, N):
            br = np.broadcast_to(ev.value(lam.parts), (X.shape[0],))
            bi = schur_bialternant(lam, X)
            worst = max(worst, float(np.max(np.abs(bi - br) / br)))
            count += X.shape[0]
    return worst <= 1e-9, {"max_rel_err": worst, "evaluations": count}


@_timed(2, "Schur through the spherical integral", 30.0)
def schur_bridge(seed: int):
    rng = RngStream(seed, 2).generator()
    worst = 0.0
    for k in range(100):
        N = (2, 3, 4)[k % 3]
        lam = _random_shape(rng, N, 8)
        M = spaced_points(rng, N, 0.1, 0.9, 0.05)
        ref = SchurEvaluator(M.tolist()).value(lam.parts)
        worst = max(worst, abs(schur_via_hciz(lam, M) - ref) / ref)
    return worst <= 1e-9, {"max_rel_err": worst, "instances": 100}


@_timed(3, "Spherical integral closed forms", None)
def hciz_closed_forms(seed: int):
    worst2 = 0.0
    for d in (-2.0, -0.7, 0.3, 1.0, 2.5):
        for e in (-1.5, -0.2, 0.4, 1.3):
            x = 2 * d * e
            ref = math.expm1(x) / x
            got = math.exp(hciz_exact([0.0, d], [0.0, e]).log_value)
            worst2 = max(worst2, abs(got - ref) / ref)
    worst1 = 0.0
    for d, e in ((0.5, 0.7), (-1.2, 2.0), (3.0, 1.5)):
        worst1 = max(worst1, abs(math.exp(hciz_exact([d], [e]).log_value) - math.exp(d * e)))
    return worst2 <= 1e-12 and worst1 == 0.0, {"rank_one_max_rel_err": worst2, "N1_max_abs_err": worst1}


@_timed(4, "Spherical integral: exact vs Monte Carlo", 120.0)
def hciz_vs_mc(seed: int):
    root = RngStream(seed, 4)
    rng = root.generator()
    ok = 0
    zs = []
    for k in range(100):
        N = 2 + k % 2
        D = spaced_points(rng, N, -0.6, 0.6, 0.1)
        E = spaced_points(rng, N, -0.6, 0.6, 0.1)
        ex = math.exp(hciz_exact(D, E).log_value)
        mc = hciz_mc(D, E, 100_000, root.child(k))
        z = abs(math.exp(mc.log_value) - ex) / mc.stderr
        zs.append(z)
        ok += z <= 4
    return ok >= 95, {"within_4_stderr": ok, "instances": 100, "max_z": max(zs)}


@_timed(5, "Cauchy identity truncation", None)
def cauchy_identity(seed: int):
    rng = RngStream(seed, 5).generator()
    worst = 0.0
    ok = True
    for k in range(10):
        N = 2 + k % 2
        x = rng.uniform(0.0, 0.3, N)
        y = rng.uniform(0.0, 0.3, N)
        part, tail = cauchy_truncated(x, y, 40, precision=100)
        with mpmath.workdps(100):
            err = abs(part - cauchy_product(x, y, dps=100))
            ok &= bool(err <= min(tail, mpmath.mpf("1e-10")))
        worst = max(worst, float(err))
    return ok, {"max_abs_err": worst, "instances": 10}


@_timed(6, "Character expansion of the cut-off model", 120.0)
def character_expansion(seed: int):
    A = B = [0.2, 0.4]
    phi = parse_cutoff("rational:(0.5+0.3x^2)/(1+x^2)")
    spec = ModelSpec(A, B, phi)
    root = RngStream(seed, 6)
    char, rep = partition_character_ratio(spec, 12, 100_000, root.child(0))
    mc = partition_mc_ratio(spec, 100_000, root.child(1))
    tol = 4 * (char.stderr + mc.stderr) + rep.tail_bound
    diff = abs(char.mean - mc.mean)
    spec0 = ModelSpec(A, B, ConstantCutoff(0.7))
    c0, _ = partition_character_ratio(spec0, 40, 10, root.child(2))
    ref = float(np.prod(1.0 / (1.0 - 0.7 * np.outer(A, B))))
    cerr = abs(c0.mean - ref)
    return diff <= tol and cerr <= 1e-8, {
        "character": char.mean,
        "monte_carlo": mc.mean,
        "diff": diff,
        "tolerance": tol,
        "tail_bound": rep.tail_bound,
        "constant_phi_err": cerr,
    }


@_timed(7, "Spherical integral bounds (Jensen and cut-off sandwich)", None)
def spherical_bounds(seed: int):
    rng = RngStream(seed, 7).generator()
    violations = []
    for k in range(100):
        N = 1 + k % 6
        D = -rng.uniform(0.0, 2.0, N)
        E = rng.uniform(0.0, 2.0, N)
        M = float(rng.uniform(0.1, 2.0))
        try:
            jensen_bounds(D, E)
            cutoff_sandwich(D, E, M)
        except CharexpError as exc:
            violations.append((k, type(exc).__name__))
    return not violations, {"violations": len(violations), "instances": 100}


@_timed(8, "Functional ground truths", None)
def functional_truths(seed: int):
    u256 = GridMeasure.uniform(0.0, 1.0, 256)
    sig256 = log_energy(u256)
    sig1 = log_energy(GridMeasure.uniform(0.0, 1.0, 1))
    scale_err = 0.0
    for L in (0.5, 2.0, 3.7):
        scale_err = max(scale_err, abs(log_energy(u256.scaled(L)) - sig256 - math.log(L)))
    s_err = abs(s_kernel(math.e, 1.0) - 1.0 / (math.e - 1.0))
    S_err = max(abs(s_functional(DiscreteMeasure.dirac(x)) + math.log(x)) for x in (0.1, 0.5, 1.0))
    # H^M increases to H~ on a few test measures
    ens = EnsembleSpec(Potential.parse("x^2"), 0.5, 0.5)
    monotone = True
    gaps = []
    Ms = (0.5, 1.0, 2.0, 4.0, 8.0, 16.0)
    for nu in (GridMeasure.uniform(0.0, 1.0, 64), GridMeasure.uniform(0.5, 2.5, 64),
               GridMeasure.from_density(lambda x: 0.5 + 0.0 * x, 0.0, 2.0, 64)):
        full = rate_H(nu, ens).tilde_value
        vals = [rate_H_cutoff(nu, ens, M) for M in Ms]
        monotone &= all(b >= a - 1e-12 for a, b in zip(vals, vals[1:]))
        monotone &= vals[-1] <= full + 1e-9
        gaps.append(full - vals[-1])
    passed = (abs(sig256 + 1.5) <= 1e-3 and abs(sig1 + 1.5) <= 1e-12 and scale_err <= 1e-6
              and s_err <= 1e-12 and S_err <= 1e-12 and monotone and max(gaps) <= 1e-6)
    return passed, {
        "sigma_256": sig256,
        "sigma_1": sig1,
        "scaling_err": scale_err,
        "s_err": s_err,
        "S_dirac_err": S_err,
        "cutoff_monotone": monotone,
        "cutoff_final_gap": max(gaps),
    }


def random_L_member(rng: np.random.Generator) -> GridMeasure:
    n = int(rng.integers(1, 60))
    u = rng.uniform(0.0, 1.0, n)
    u[rng.integers(0, n)] = 1.0
    dx = u.max() * rng.uniform(1.0, 3.0) / u.sum()
    return GridMeasure(float(rng.uniform(0.0, 2.0)), dx, u / (u.sum() * dx))


@_timed(9, "Capped equilibrium problem", None)
def equilibrium(seed: int):
    grid = Grid(3.0, 300)
    lin = minimize_over_L(EnsembleSpec(Potential.parse("x")), grid)
    target = (grid.midpoints < 1.0).astype(float)
    l1 = float(np.sum(np.abs(lin.measure.rho - target)) * grid.h)
    quad = EnsembleSpec(Potential.parse("x^2"), 1.0, 1.0)
    coarse = minimize_over_L(quad, Grid(4.0, 256))
    fine = minimize_over_L(quad, Grid(4.0, 1024))
    dv = abs(coarse.value - fine.value)
    # exact W1 between the two densities; it dominates the BL distance
    dm = w1_grid(coarse.measure, fine.measure)
    rng = RngStream(seed, 9).generator()
    bad = 0
    for _ in range(1000):
        nu = random_L_member(rng)
        N = int(rng.integers(2, 50))
        disc = quantile_discretize(nu, N)
        l = np.array(disc.l.l)
        bad += int(disc.min_spacing < 1 - 1e-9 or np.any(l[:-1] <= l[1:]))
    passed = l1 <= 2 * grid.h and lin.kkt.residual <= 1e-6 and dv <= 1e-3 and dm <= 1e-3 and bad == 0
    return passed, {
        "linear_L1": l1,
        "linear_kkt": lin.kkt.residual,
        "quadratic_value_diff": dv,
        "quadratic_w1": dm,
        "spacing_violations": bad,
    }


@_timed(10, "Shape chain concentration", 300.0)
def shape_concentration(seed: int):
    ens = EnsembleSpec(Potential.parse("x^2-x"))
    root = RngStream(seed, 10)
    summary, profile, _ = metropolis_sample(40, 1_000_000, ens, root.child(0))
    ref = minimize_over_L(ens, Grid(2.0, 400)).measure
    d = bl_distance(profile, ref, nodes=4)
    # N = 2 toy: independent chains give the batch means
    toy = EnsembleSpec(Potential.parse("x^2-x"), 0.0, 0.0)
    law = exact_stationary(2, 6, toy)
    chains = 20
    freq = np.zeros((chains, len(law)))
    shapes = list(law)
    for c in range(chains):
        s, _, _ = metropolis_sample(2, 20_000, toy, root.child(100 + c), max_boxes=6, record_visits=True)
        tot = sum(v for k, v in s.visits.items() if isinstance(k, YoungShape))
        freq[c] = [s.visits.get(sh, 0) / tot for sh in shapes]
    p = np.array([law[s] for s in shapes])
    # rare shapes are lumped into one bin so every bin has a usable batch variance
    major = p >= 0.01
    freq = np.column_stack([freq[:, major], freq[:, ~major].sum(axis=1)])
    p = np.append(p[major], p[~major].sum())
    mean = freq.mean(axis=0)
    se = freq.std(axis=0, ddof=1) / math.sqrt(chains)
    z = np.abs(mean - p) / se
    toy_ok = bool(np.all(z <= 3))
    return d <= 0.05 and toy_ok, {
        "bl_to_minimizer": d,
        "split_chain_distance": summary.split_distance,
        "max_drift": summary.max_drift,
        "toy_max_z": float(z.max()),
    }


@_timed(11, "Yang-Mills heat kernel", None)
def yang_mills(seed: int):
    a = 0.9
    n1 = ym_partition([a], [a], 1.0, K=60).value
    n1_err = abs(n1 - scalar_sum_oracle(a, a, 1.0))
    A, B = [0.3, 0.5], [0.4, 0.6]
    t0 = ym_partition(A, B, 0.0)
    ref = float(np.prod(1.0 / (1.0 - np.outer(A, B))))
    t0_err = abs(t0.value - ref)
    big = abs(ym_partition([0.5, 0.9], [0.5, 0.9], 1000.0).value - 1.0)
    trend = ym_free_energy_trend(DiscreteMeasure.dirac(1.0), DiscreteMeasure.dirac(1.0), 1.0, [2, 4, 8, 16])
    gap16 = trend.rows[-1].gap
    passed = n1_err <= 1e-12 and t0_err <= t0.tail_bound and big <= 1e-10 and gap16 <= 0.05
    return passed, {
        "N1_err": n1_err,
        "T0_err": t0_err,
        "T0_tail_bound": t0.tail_bound,
        "T1000_dev": big,
        "gap_N16": gap16,
        "free_energy_N16": trend.rows[-1].free_energy,
        "variational": trend.variational,
    }


CRITERIA = [
    schur_routes,
    schur_bridge,
    hciz_closed_forms,
    hciz_vs_mc,
    cauchy_identity,
    character_expansion,
    spherical_bounds,
    functional_truths,
    equilibrium,
    shape_concentration,
    yang_mills,
]


def run_all(seed: int = 7, only=None, echo=None) -> list[CriterionResult]:
    """Run the selected checks (all by default), calling ``echo(result)`` after each."""
    out = []
    for crit in CRITERIA:
        if only and crit.number not in only:
            continue
        res = crit(seed)
        out.append(res)
        if echo is not None:
            echo(res)
    return out
