import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate, stats

from charexp.errors import HypothesisViolation, RadiusViolation
from charexp.families import parse_cutoff
from charexp.partition import (
    ModelSpec,
    free_energy_sequence,
    integrand_log,
    partition_character_ratio,
    partition_mc_ratio,
    validate_hypotheses,
)
from charexp.sampling import RngStream, gue_sample

RATIONAL = "rational:(0.5+0.3x^2)/(1+x^2)"


def spec(A, B, phi="constant:0.5"):
    return ModelSpec(A, B, parse_cutoff(phi))


def test_validate_examples():
    rep = validate_hypotheses(spec([0.2, 0.4], [0.2, 0.4]))
    assert rep["rho_phi"] == pytest.approx(math.log(2))
    assert rep["spectral_gap"] == pytest.approx(1 - 0.5 * 0.16)
    with pytest.raises(HypothesisViolation) as e:
        validate_hypotheses(spec([0.2], [0.3], "constant:1.0"))
    assert e.value.clause == "borne"
    with pytest.raises(HypothesisViolation) as e:
        validate_hypotheses(spec([-0.1, 0.3], [0.1, 0.3]))
    assert e.value.clause == "nonnegativity"
    with pytest.raises(HypothesisViolation) as e:
        validate_hypotheses(spec([0.1, 1.3], [0.1, 0.3]))
    assert e.value.clause == "norm"
    with pytest.raises(HypothesisViolation):
        spec([0.1, 0.2], [0.3])


def test_integrand_examples():
    M = gue_sample(3, RngStream(1))
    assert integrand_log(spec([0.2, 0.5, 0.9], [0.0, 0.0, 0.0], RATIONAL), M) == 0.0
    a, b = np.array([0.2, 0.5, 0.9]), np.array([0.1, 0.3, 0.6])
    ref = -np.log1p(-0.5 * np.outer(b, a)).sum()
    assert integrand_log(spec(a, b), M) == pytest.approx(ref, rel=1e-13)
    phi = parse_cutoff(RATIONAL)
    m = np.array([[0.7]])
    assert integrand_log(spec([0.8], [0.6], RATIONAL), m) == pytest.approx(-math.log(1 - 0.48 * phi(0.7)), rel=1e-13)


def test_integrand_uses_full_matrix_function():
    # compare against a direct eigendecomposition of Phi(M) A with non-commuting A
    M = gue_sample(3, RngStream(2))
    phi = parse_cutoff(RATIONAL)
    w, U = np.linalg.eigh(M)
    P = (U * phi(w)) @ U.conj().T
    a, b = np.array([0.3, 0.6, 0.9]), np.array([0.2, 0.5, 0.7])
    mu = np.linalg.eigvals(P @ np.diag(a)).real
    ref = -sum(math.log(1 - bi * mj) for bi in b for mj in mu)
    assert integrand_log(spec(a, b, RATIONAL), M) == pytest.approx(ref, rel=1e-10)


def test_mc_exact_cases():
    z = partition_mc_ratio(spec([0.3, 0.8], [0.0, 0.0], RATIONAL), 100, RngStream(3))
    assert z.mean == 1.0 and z.stderr == 0.0
    a, b = np.array([0.3, 0.8]), np.array([0.4, 0.6])
    z = partition_mc_ratio(spec(a, b, "constant:0.7"), 100, RngStream(3))
    assert z.mean == pytest.approx(np.prod(1 / (1 - 0.7 * np.outer(b, a))), rel=1e-13) and z.stderr == 0.0


def test_mc_n1_against_quadrature():
    phi = parse_cutoff(RATIONAL)
    a, b = 0.9, 0.8
    ref, _ = integrate.quad(lambda m: stats.norm.pdf(m) / (1 - a * b * phi(m)), -np.inf, np.inf, epsabs=1e-13)
    z = partition_mc_ratio(spec([a], [b], RATIONAL), 200_000, RngStream(4))
    assert abs(z.mean - ref) <= 4 * z.stderr


def test_character_examples():
    a, b = np.array([0.3, 0.7]), np.array([0.5, 0.9])
    exact = np.prod(1 / (1 - 0.6 * np.outer(b, a)))
    prev = 0.0
    for K in (2, 6, 12, 24):
        est, rep = partition_character_ratio(spec(a, b, "constant:0.6"), K, 10, RngStream(5))
        assert est.stderr == 0.0 and rep.exact_expectation
        assert 0 <= exact - est.mean <= rep.tail_bound * (1 + 1e-9) + 1e-12
        assert est.mean >= prev
        prev = est.mean
    est, rep = partition_character_ratio(spec(a, [0.0, 0.0], RATIONAL), 8, 10, RngStream(5))
    assert est.mean == pytest.approx(1.0)
    with pytest.raises((RadiusViolation, HypothesisViolation)):
        partition_character_ratio(spec([1.0], [1.0], "constant:1.0"), 4, 10, RngStream(5))


def test_estimators_agree_n2():
    s = spec([0.2, 0.4], [0.2, 0.4], "rational:(0.3+0.5x^2)/(1+x^2)")
    mc = partition_mc_ratio(s, 100_000, RngStream(6, 1))
    ch, rep = partition_character_ratio(s, 20, 100_000, RngStream(6, 2))
    assert abs(mc.mean - ch.mean) <= 4 * (mc.stderr + ch.stderr) + rep.tail_bound


@pytest.mark.parametrize("N", [1, 2, 3])
def test_estimators_agree_small_radius(N):
    rng = np.random.default_rng(100 + N)
    a = np.sort(rng.uniform(0.1, 0.8, N))
    b = np.sort(rng.uniform(0.1, 0.8, N))
    s = spec(a, b, RATIONAL)
    mc = partition_mc_ratio(s, 40_000, RngStream(7, N))
    ch, rep = partition_character_ratio(s, 14, 20_000, RngStream(8, N))
    assert abs(mc.mean - ch.mean) <= 4 * (mc.stderr + ch.stderr) + rep.tail_bound


def test_terms_nonnegative_and_monotone_in_K():
    s = spec([0.3, 0.5, 0.9], [0.2, 0.6, 0.8], RATIONAL)
    vals = []
    for K in (0, 2, 4, 6, 8):
        est, rep = partition_character_ratio(s, K, 2000, RngStream(9))
        assert all(t >= 0 for _, t in rep.term_means)
        vals.append(est.mean)
    assert all(y >= x - 1e-12 for x, y in zip(vals, vals[1:]))
    assert vals[0] == pytest.approx(1.0)


def test_swap_symmetry():
    a, b = [0.3, 0.8], [0.1, 0.6]
    s1, s2 = spec(a, b, RATIONAL), spec(b, a, RATIONAL)
    e1, _ = partition_character_ratio(s1, 10, 5000, RngStream(10))
    e2, _ = partition_character_ratio(s2, 10, 5000, RngStream(10))
    assert e1.mean == pytest.approx(e2.mean, rel=1e-10)
    m1 = partition_mc_ratio(s1, 20_000, RngStream(11, 1))
    m2 = partition_mc_ratio(s2, 20_000, RngStream(11, 2))
    assert abs(m1.mean - m2.mean) <= 4 * (m1.stderr + m2.stderr)


@settings(max_examples=25)
@given(st.floats(0.05, 0.95), st.floats(0.05, 1.0), st.integers(1, 4))
def test_constant_free_energy_is_flat(phi0, a, N):
    s = spec([a] * N, [a] * N, f"constant:{phi0!r}")
    (n, f, se), = free_energy_sequence([s], 10, RngStream(12))
    assert n == N and se == 0.0
    assert f == pytest.approx(-math.log1p(-phi0 * a * a), rel=1e-12)


def test_free_energy_zero_b_and_drift():
    seq = free_energy_sequence([spec([0.5] * N, [0.0] * N, RATIONAL) for N in (2, 3)], 10, RngStream(13))
    assert [f for _, f, _ in seq] == [0.0, 0.0]
    with pytest.raises(HypothesisViolation):
        free_energy_sequence([spec([0.1], [0.5]), spec([0.9, 0.9], [0.5, 0.5])], 10, RngStream(13))


def test_mc_reproducible():
    s = spec([0.3, 0.8], [0.2, 0.9], RATIONAL)
    x = partition_mc_ratio(s, 5000, RngStream(14))
    y = partition_mc_ratio(s, 5000, RngStream(14))
    assert x.mean == y.mean and x.stderr == y.stderr
