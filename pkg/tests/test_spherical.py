import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from charexp.errors import BoundViolation, DegenerateSpectrum, HypothesisViolation, SandwichViolation
from charexp.measures import DiscreteMeasure, GridMeasure
from charexp.sampling import RngStream
from charexp.spherical import (
    SpectrumSet,
    cutoff_sandwich,
    hciz_exact,
    hciz_grad_e,
    hciz_mc,
    jensen_bounds,
    log_ctilde,
    schur_via_hciz,
    spherical_limit_estimate,
    split_ties,
)
from charexp.symfun import schur_branching

from oracles import hciz_two_by_two

# log I_N from the character series sum_lambda N^|lambda| f^lambda / |lambda|! s(D) s(E) / d_lambda,
# summed to |lambda| <= 45 at 40 digits
FROZEN_HCIZ = [
    ((-1.0, -0.5, 0.2), (0.1, 0.4, 1.0), -1.7784622292565186),
    ((-0.3, 0.1), (0.2, 0.9), -0.20696731190313142),
    ((-0.5, -0.2, 0.1, 0.3), (0.0, 0.25, 0.5, 0.6), -0.36243111474895502),
]


@st.composite
def spaced(draw, N, lo=-1.0, hi=1.0, gap=0.05):
    u = sorted(draw(st.lists(st.floats(0, hi - lo - gap * (N - 1)), min_size=N, max_size=N)))
    return np.array([lo + v + gap * i for i, v in enumerate(u)])


def test_spectrum_flags():
    s = SpectrumSet.parse("0.5, -0.2, 1.5")
    assert list(s.values) == [-0.2, 0.5, 1.5]
    assert not s.nonnegative and not s.norm_le_one and s.bounded_below_by == -0.2
    assert SpectrumSet([0.3, 0.3]).is_scalar()


def test_frozen_series_values():
    for D, E, ref in FROZEN_HCIZ:
        assert hciz_exact(D, E).log_value == pytest.approx(ref, rel=1e-12)


def test_n1_and_rank_one():
    assert hciz_exact([0.7], [-1.3]).log_value == 0.7 * -1.3
    for d, e in [(1.0, 2.0), (-0.5, 3.0), (2.0, -2.0)]:
        x = 2 * d * e
        assert hciz_exact([0.0, d], [0.0, e]).log_value == pytest.approx(math.log(math.expm1(x) / x), rel=1e-13)


def test_normalization_constant():
    for N in range(1, 8):
        assert hciz_exact(np.zeros(N), np.linspace(0, 1, N)).log_value == 0.0
    assert log_ctilde(1) == 0.0
    assert log_ctilde(3) == pytest.approx(math.log(2 / 27))


def test_scalar_argument_limit():
    E = np.array([0.1, 0.5, 1.2])
    assert hciz_exact([0.4] * 3, E).log_value == pytest.approx(3 * 0.4 * E.sum(), rel=1e-15)
    for eps in (1e-3, 1e-5):
        D = 0.4 + eps * np.array([-1.0, 0.0, 1.0])
        assert hciz_exact(D, E).log_value == pytest.approx(9 * 0.4 * E.mean(), abs=10 * eps)


def test_ties():
    with pytest.raises(DegenerateSpectrum):
        hciz_exact([0.1, 0.1, 0.5], [0.0, 0.2, 0.3])
    v = hciz_exact([0.1, 0.1, 0.5], [0.0, 0.2, 0.3], ties="perturb")
    assert v.perturbed
    w = hciz_exact([0.1 - 1e-5, 0.1 + 1e-5, 0.5], [0.0, 0.2, 0.3])
    assert v.log_value == pytest.approx(w.log_value, abs=1e-8)
    out, changed = split_ties(np.array([1.0, 1.0, 1.0]), 1e-3)
    assert changed and out.sum() == pytest.approx(3.0) and np.all(np.diff(out) > 0)


def test_large_arguments_log_domain():
    D = np.linspace(-30, 30, 6)
    E = np.linspace(-2, 5, 6)
    v = hciz_exact(D, E).log_value
    assert math.isfinite(v)
    assert hciz_exact(E, D).log_value == pytest.approx(v, rel=1e-10)


@given(st.integers(2, 5), st.data())
def test_symmetry_and_shift(N, data):
    D = data.draw(spaced(N))
    E = data.draw(spaced(N))
    t = data.draw(st.floats(-1, 1))
    v = hciz_exact(D, E).log_value
    assert hciz_exact(E, D).log_value == pytest.approx(v, rel=1e-9, abs=1e-10)
    assert hciz_exact(D, E + t).log_value == pytest.approx(v + N * t * D.sum(), rel=1e-9, abs=1e-9)


def test_n2_matches_uniform_u22():
    for d, e in [((-1, 0.5), (0.2, 1.3)), ((0.1, 0.7), (-2.0, 1.0))]:
        assert math.exp(hciz_exact(d, e).log_value) == pytest.approx(hciz_two_by_two(d, e), rel=1e-13)


def test_mc_examples():
    z = hciz_mc([0.0, 0.0], [0.3, 1.0], 1000, RngStream(1))
    assert z.value == 1.0 and z.stderr == 0.0
    m = hciz_mc([0.0, -1.0], [0.0, 1.0], 100_000, RngStream(2))
    assert abs(m.value - (1 - math.exp(-2)) / 2) <= 4 * m.stderr


def test_mc_agrees_with_exact_n3():
    rng = RngStream(3).generator()
    ok = 0
    for k in range(50):
        D = np.sort(rng.uniform(-0.8, 0.8, 3))
        E = np.sort(rng.uniform(-0.8, 0.8, 3))
        m = hciz_mc(D, E, 20_000, RngStream(3, k + 1))
        ok += abs(m.value - math.exp(hciz_exact(D, E).log_value)) <= 4 * m.stderr
    assert ok >= 47


def test_mc_handles_coincident_values():
    m = hciz_mc([0.2, 0.2, 0.5], [0.0, 0.2, 0.3], 20_000, RngStream(4))
    v = hciz_exact([0.2, 0.2, 0.5], [0.0, 0.2, 0.3], ties="perturb")
    assert abs(m.value - v.value) <= 4 * m.stderr


def test_bridge_examples():
    assert schur_via_hciz((), [0.2, 0.5, 0.8]) == pytest.approx(1.0, rel=1e-12)
    assert schur_via_hciz((2, 1), [0.3, 0.7]) == pytest.approx(0.21, rel=1e-12)
    M = [0.15, 0.45, 0.85]
    assert schur_via_hciz((3, 1), M) == pytest.approx(schur_branching((3, 1), M), rel=1e-9)
    with pytest.raises(HypothesisViolation):
        schur_via_hciz((1,), [-0.1, 0.5])
    with pytest.raises(DegenerateSpectrum):
        schur_via_hciz((1,), [0.5, 0.5])


@given(st.integers(2, 4), st.data())
def test_bridge_identity(N, data):
    parts = data.draw(st.lists(st.integers(0, 8), min_size=N, max_size=N))
    lam = tuple(sorted(parts, reverse=True))
    if sum(lam) > 8:
        lam = tuple(min(p, 2) for p in lam)
    M = data.draw(spaced(N, 0.1, 0.9, 0.05))
    ref = schur_branching(lam, M)
    assert abs(schur_via_hciz(lam, M) - ref) / ref <= 1e-9


def test_sandwich_examples():
    lo, mid, hi = cutoff_sandwich([-1.0, -0.5], [0.5, 3.0], 1.0)
    assert lo < mid < hi
    lo, mid, hi = cutoff_sandwich([-1.0, -0.5], [0.5, 3.0], 5.0)
    assert lo == mid == hi
    assert cutoff_sandwich([0.0, 0.0], [0.5, 3.0], 1.0) == (0.0, 0.0, 0.0)
    with pytest.raises(HypothesisViolation):
        cutoff_sandwich([1.0, 0.5], [0.5, 3.0], 1.0)


def test_jensen_examples():
    lo, val, hi = jensen_bounds([-0.7] * 3, [0.4] * 3)
    assert lo == pytest.approx(val) and val == pytest.approx(-0.28)
    assert jensen_bounds([0.0, 0.0], [1.0, 2.0]) == (0.0, 0.0, 0.0)
    with pytest.raises(HypothesisViolation):
        jensen_bounds([-1.0, 0.2], [0.0, 1.0])


def test_violation_types_are_computation_errors():
    from charexp.errors import ComputationError

    assert issubclass(SandwichViolation, ComputationError) and issubclass(BoundViolation, ComputationError)


@given(st.integers(1, 6), st.data())
def test_bounds_hold_randomly(N, data):
    D = -np.array(data.draw(st.lists(st.floats(0, 2), min_size=N, max_size=N)))
    E = np.array(data.draw(st.lists(st.floats(0, 2), min_size=N, max_size=N)))
    lo, val, hi = jensen_bounds(D, E)
    assert lo - 1e-9 <= val <= hi + 1e-9
    M = data.draw(st.floats(0.05, 2.5))
    l, m, u = cutoff_sandwich(D, E, M)
    assert l <= m + 1e-9 and m <= u + 1e-9


def test_cutoff_monotone_in_M():
    D, E = np.array([-1.0, -0.6, -0.1]), np.array([0.2, 0.9, 2.5])
    vals = [hciz_exact(D, np.minimum(E, M), ties="perturb").log_value for M in (0.1, 0.3, 0.6, 1.0, 2.0, 3.0)]
    assert all(b <= a + 1e-12 for a, b in zip(vals, vals[1:]))


def test_limit_estimate_examples():
    est = spherical_limit_estimate(DiscreteMeasure.dirac(0.0), GridMeasure.uniform(0, 1, 8), [4, 8])
    assert est.estimate == 0.0 and est.exact
    est = spherical_limit_estimate(DiscreteMeasure.dirac(-0.5), DiscreteMeasure.dirac(0.8), [2, 3])
    assert est.estimate == pytest.approx(-0.4)
    est = spherical_limit_estimate(GridMeasure.uniform(-1, 0, 16), GridMeasure.uniform(0, 1, 16), [8, 16, 32])
    assert -0.25 <= est.estimate <= 0.0
    assert [r[0] for r in est.per_N] == [8, 16, 32]
    vals = [r[1] for r in est.per_N]
    assert all(-0.25 <= v <= 0 for v in vals)
    with pytest.raises(ValueError):
        spherical_limit_estimate(GridMeasure.uniform(-1, 0), GridMeasure.uniform(0, 1), [4])


def test_gradient_matches_finite_differences():
    D = np.array([-0.9, -0.3, 0.4])
    E = np.array([0.1, 0.5, 1.1])
    g = hciz_grad_e(D, E)
    h = 1e-6
    for j in range(3):
        ep, em = E.copy(), E.copy()
        ep[j] += h
        em[j] -= h
        fd = (hciz_exact(D, ep).log_value - hciz_exact(D, em).log_value) / (2 * h)
        assert g[j] == pytest.approx(fd, rel=1e-6, abs=1e-8)
    assert np.allclose(hciz_grad_e([0.3] * 3, E), 3 * 0.3)
