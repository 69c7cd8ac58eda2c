import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from charexp.errors import ConvergenceError, DegenerateSpectrum, RadiusViolation
from charexp.measures import DiscreteMeasure, GridMeasure
from charexp.tableaux import casimir_c2, enumerate_shapes
from charexp.yangmills import (
    cauchy_free_energy,
    cauchy_limit,
    choose_K,
    heat_kernel_tail,
    ym_determinant_log,
    ym_free_energy_trend,
    ym_partition,
    ym_scalar_log,
)


def test_casimir_nonnegative_exhaustive():
    for N in range(1, 7):
        for lam in enumerate_shapes(12, N):
            c = casimir_c2(lam, N)
            assert c >= 0
            assert c >= lam.size**2 / N - 1e-12


def test_large_T_only_empty_shape():
    v = ym_partition([0.5, 0.9], [0.6, 0.8], 1000.0)
    assert abs(v.value - 1.0) <= 1e-10


@pytest.mark.parametrize("a,T", [(0.5, 0.3), (0.9, 1.0), (1.0, 2.0), (0.7, 0.0)])
def test_n1_scalar_series(a, T):
    mp.mp.dps = 30
    ref = mp.nsum(lambda k: mp.mpf(a) ** (2 * k) * mp.exp(-T * k * k / 2), [0, mp.inf])
    v = ym_partition([a], [a], T)
    assert v.value == pytest.approx(float(ref), abs=v.tail_bound + 1e-14)
    assert abs(float(ref) - v.value) <= v.tail_bound + 1e-14


def test_T_zero_is_cauchy_product():
    a, b = np.array([0.2, 0.5, 0.7]), np.array([0.3, 0.6, 0.9])
    v = ym_partition(a, b, 0.0)
    exact = float(np.prod(1 / (1 - np.outer(a, b))))
    assert 0 <= exact - v.value <= v.tail_bound * (1 + 1e-9)
    assert v.tail_bound <= 1e-6 * max(1.0, exact) or v.tail_bound <= 1e-6
    with pytest.raises(RadiusViolation):
        heat_kernel_tail([1.0], [1.0], 0.0, 5)


@settings(max_examples=20)
@given(st.integers(1, 3), st.data())
def test_monotone_in_T_and_symmetric(N, data):
    a = np.array(data.draw(st.lists(st.floats(0.05, 1.0), min_size=N, max_size=N)))
    b = np.array(data.draw(st.lists(st.floats(0.05, 1.0), min_size=N, max_size=N)))
    T1 = data.draw(st.floats(0.5, 3.0))
    T2 = T1 + data.draw(st.floats(0.0, 3.0))
    K = 10
    v1, v2 = ym_partition(a, b, T1, K=K), ym_partition(a, b, T2, K=K)
    assert v2.value <= v1.value * (1 + 1e-12)
    assert ym_partition(b, a, T1, K=K).value == pytest.approx(v1.value, rel=1e-12)


@pytest.mark.parametrize("a,b,T", [([0.4, 0.8], [0.5, 0.9], 0.5), ([0.9, 1.0], [1.0, 1.0], 2.0),
                                   ([0.3, 0.6, 0.9], [0.2, 0.5, 1.0], 1.0)])
def test_tail_bound_is_true_and_K_monotone(a, b, T):
    prev = 0.0
    for K in (2, 5, 8):
        v = ym_partition(a, b, T, K=K)
        w = ym_partition(a, b, T, K=K + 10)
        assert v.value >= prev
        assert 0 <= w.value - v.value <= v.tail_bound
        prev = v.value


@pytest.mark.parametrize("N,alpha,beta,T", [(2, 0.8, 0.9, 1.0), (3, 1.0, 1.0, 2.0), (2, 0.5, 0.7, 0.0), (3, 0.9, 0.6, 0.4)])
def test_orthogonal_polynomials_match_character_sum(N, alpha, beta, T):
    v = ym_partition([alpha] * N, [beta] * N, T)
    assert ym_scalar_log(alpha, beta, T, N) == pytest.approx(v.log_value, abs=v.tail_bound / v.value + 1e-10)


def test_scalar_T0_closed_form():
    for N in (4, 10, 25):
        assert ym_scalar_log(0.6, 0.7, 0.0, N) == pytest.approx(-N * N * math.log1p(-0.42), rel=1e-9)


def test_K_rule_rejects_uncertifiable():
    with pytest.raises(ConvergenceError):
        choose_K(np.ones(6), np.ones(6), 0.01)
    K = choose_K([0.5, 0.6], [0.4, 0.7], 1.0)
    assert heat_kernel_tail([0.5, 0.6], [0.4, 0.7], 1.0, K) <= 1e-6
    assert K == 0 or heat_kernel_tail([0.5, 0.6], [0.4, 0.7], 1.0, K - 1) > 1e-6


def test_trend_T0_against_quadrature():
    mu = GridMeasure.uniform(0.2, 0.6, 1)
    ref, _ = integrate.dblquad(lambda y, x: -math.log(1 - x * y) / 0.16, 0.2, 0.6, 0.2, 0.6, epsabs=1e-12)
    assert cauchy_limit(mu, mu) == pytest.approx(ref, rel=1e-6)
    rep = ym_free_energy_trend(mu, mu, 0.0, [2, 4, 8], variational=False)
    errs = [abs(r.free_energy - ref) for r in rep.rows]
    assert errs[-1] < errs[0] and errs[-1] < 0.01
    for r in rep.rows:
        assert r.method == "determinant"


@pytest.mark.parametrize("a,b,T", [([0.4, 0.8], [0.5, 0.9], 0.5), ([0.3, 0.6, 0.9], [0.2, 0.5, 1.0], 1.0),
                                   ([0.9, 1.0, 1.3], [0.8, 1.0, 1.2], 2.0)])
def test_determinant_matches_character_sum(a, b, T):
    v = ym_partition(a, b, T, K=30)
    assert ym_determinant_log(a, b, T) == pytest.approx(v.log_value, abs=v.tail_bound / v.value + 1e-12)


def test_determinant_T0_is_cauchy():
    a = np.linspace(0.2, 0.6, 10)
    assert ym_determinant_log(a, a, 0.0) == pytest.approx(100 * cauchy_free_energy(a, a), rel=1e-12)
    with pytest.raises(DegenerateSpectrum):
        ym_determinant_log([0.2, 0.2], [0.3, 0.4], 1.0)


def test_trend_delta_ensemble():
    d = DiscreteMeasure.dirac(1.0)
    rep = ym_free_energy_trend(d, d, 1.0, [4, 8, 16])
    assert all(r.method == "orthogonal_polynomials" for r in rep.rows)
    lo, hi = rep.bracket
    assert lo <= rep.variational <= hi
    assert rep.rows[-1].gap <= 0.05
    assert rep.components["kkt_residual"] <= 1e-6
    head, *body = rep.table()
    assert head == ("N", "free_energy", "variational_lo", "variational_hi", "gap") and len(body) == 3


def test_cauchy_free_energy():
    a = [0.1, 0.4]
    assert cauchy_free_energy(a, a) == pytest.approx(-sum(math.log1p(-x * y) for x in a for y in a) / 4)
