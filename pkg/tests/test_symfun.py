from fractions import Fraction

import mpmath
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from charexp.errors import ComplexityGuard, DegenerateVandermonde, RadiusViolation, ShapeTooTall
from charexp.sampling import RngStream
from charexp.symfun import (
    SchurEvaluator,
    cauchy_product,
    cauchy_truncated,
    dim_shape,
    markov_tail_bound,
    orthogonality_check,
    schur_bialternant,
    schur_branching,
)
from charexp.tableaux import enumerate_shapes, l_sequence, vandermonde_int

from oracles import cauchy_product_fraction, dim_hook, fact_prod, schur_ssyt

# Frozen from two exact oracles: SSYT content sums and a rational bialternant determinant
FROZEN_SCHUR = [
    ((2, 1), (1, 2), 6),
    ((2, 1), (Fraction(1, 2), Fraction(1, 3), Fraction(1, 5)), Fraction(14, 45)),
    ((3, 1), (Fraction(1, 5), Fraction(1, 2), Fraction(7, 10)), Fraction(7103, 10000)),
    ((2, 2, 1), (1, 2, 3), 66),
]


@st.composite
def spectra(draw, N, lo=0.1, hi=0.9, gap=0.05):
    u = sorted(draw(st.lists(st.floats(0, hi - lo - gap * (N - 1)), min_size=N, max_size=N)))
    return np.array([lo + v + gap * i for i, v in enumerate(u)])


@st.composite
def shape_and_n(draw, max_n=5, max_boxes=10):
    N = draw(st.integers(1, max_n))
    shapes = list(enumerate_shapes(max_boxes, N))
    return draw(st.sampled_from(shapes)), N


def test_frozen_values_match_ssyt_oracle():
    for shape, x, val in FROZEN_SCHUR:
        assert schur_ssyt(shape, list(x)) == val
        xf = [float(v) for v in x]
        assert schur_branching(shape, xf) == pytest.approx(float(val), rel=1e-13)
        assert schur_bialternant(shape, xf) == pytest.approx(float(val), rel=1e-12)


def test_branching_examples():
    assert schur_branching((1,), [0.3, 0.4]) == pytest.approx(0.7)
    assert schur_branching((), [0.3, 0.4, 5.0]) == 1.0
    assert schur_bialternant((), [1.0, 2.0, 3.0]) == pytest.approx(1.0)
    assert schur_bialternant((5,), [0.7]) == pytest.approx(0.7**5)


def test_branching_exact_with_mpmath():
    with mpmath.workdps(50):
        x = [mpmath.mpf(1) / 3, mpmath.mpf(1) / 7]
        v = SchurEvaluator(x).value((3, 1))
        ref = schur_ssyt((3, 1), [Fraction(1, 3), Fraction(1, 7)])
        assert abs(v - mpmath.mpf(ref.numerator) / ref.denominator) < mpmath.mpf(10) ** -45


def test_too_tall():
    with pytest.raises(ShapeTooTall):
        schur_branching((1, 1, 1), [0.1, 0.2])


def test_complexity_guard():
    with pytest.raises(ComplexityGuard):
        SchurEvaluator([0.1 * (i + 1) for i in range(6)], budget=10).value((30, 20, 10, 5, 2, 1))


def test_bialternant_degenerate():
    with pytest.raises(DegenerateVandermonde):
        schur_bialternant((2, 1), [0.5, 0.5], fallback=False)
    assert schur_bialternant((2, 1), [0.5, 0.5]) == pytest.approx(schur_branching((2, 1), [0.5, 0.5]))


def test_bialternant_ill_conditioned_uses_extended_precision():
    x = [0.1, 0.1001, 0.1002, 0.9]
    lam = (20, 10, 3)
    ref = schur_branching(lam, x)
    assert schur_bialternant(lam, x) == pytest.approx(ref, rel=1e-9)


def test_batched_evaluation():
    X = np.array([[0.2, 0.5, 0.7], [0.1, 0.3, 0.9]])
    lam = (3, 2)
    b = schur_bialternant(lam, X)
    ref = [schur_branching(lam, row) for row in X]
    np.testing.assert_allclose(b, ref, rtol=1e-12)
    np.testing.assert_allclose(schur_branching(lam, X), ref, rtol=1e-14)


@pytest.mark.parametrize("shape, N, d", [((), 4, 1), ((2, 1), 2, 2), ((1,), 3, 3), ((2, 1), 3, 8), ((4, 2, 1), 5, 700)])
def test_dim_examples(shape, N, d):
    assert dim_shape(shape, N) == d


def test_dim_exact_against_hook_content():
    for N in range(1, 7):
        for s in enumerate_shapes(12, N):
            d = dim_shape(s, N)
            assert isinstance(d, int)
            assert d * fact_prod(N) == vandermonde_int(l_sequence(s, N).l)
            assert d == dim_hook(s.parts, N)


def test_dim_is_limit_of_near_coincident_points():
    eps = 1e-6
    for s, N in [((2, 1), 3), ((3, 3, 1), 4)]:
        x = 1 + eps * np.arange(N)
        assert schur_branching(s, x) == pytest.approx(dim_shape(s, N), rel=1e-4)


def test_cauchy_examples():
    assert cauchy_truncated([0.0], [0.0], 5) == (1.0, 0.0)
    part, tail = cauchy_truncated([0.2], [0.3], 10)
    assert part == pytest.approx(sum(0.06**k for k in range(11)), rel=1e-15)
    assert tail >= 0.06**11 / 0.94
    x, y = [0.2, 0.1], [0.3, 0.2]
    part, tail = cauchy_truncated(x, y, 40)
    assert abs(part - cauchy_product(x, y)) <= 1e-10


def test_cauchy_radius():
    with pytest.raises(RadiusViolation):
        cauchy_truncated([0.9, 1.0], [1.0, 0.5], 3)


def test_cauchy_tail_is_true_bound_exact_arithmetic():
    # Fraction oracle for the product; mp partial sums at high precision
    for x, y in [((0.5, 0.25), (0.5, 0.75)), ((0.3, 0.2, 0.1), (0.6, 0.4, 0.2))]:
        ref = cauchy_product_fraction(x, y)
        for K in (2, 5, 10, 20):
            part, tail = cauchy_truncated(x, y, K, precision=60)
            with mpmath.workdps(60):
                err = mpmath.mpf(ref.numerator) / ref.denominator - part
                assert 0 <= err <= tail


@given(st.lists(st.floats(0, 0.9), min_size=1, max_size=3), st.lists(st.floats(0, 0.9), min_size=1, max_size=3))
def test_cauchy_monotone_in_K_and_bounded(x, y):
    n = min(len(x), len(y))
    x, y = x[:n], y[:n]
    if max(x) * max(y) >= 0.85:
        return
    prev = 0.0
    prod = cauchy_product(x, y)
    for K in (0, 3, 6, 12):
        part, tail = cauchy_truncated(x, y, K)
        assert part >= prev - 1e-15
        assert prod - part <= tail * (1 + 1e-9) + 1e-13
        prev = part


def test_markov_bound_mp_path_matches_float():
    x, y = [0.3, 0.5], [0.4, 0.2]
    f = markov_tail_bound(x, y, 12)
    m = markov_tail_bound(x, y, 12, dps=30)
    assert float(m) == pytest.approx(f, rel=1e-10)


@given(shape_and_n(), st.data())
def test_route_agreement(sn, data):
    shape, N = sn
    x = data.draw(spectra(N))
    b = schur_branching(shape, x)
    assert b > 0
    assert abs(schur_bialternant(shape, x) - b) / b <= 1e-9


@given(shape_and_n(max_n=4, max_boxes=8), st.data(), st.floats(0.2, 3.0))
def test_symmetry_and_homogeneity(sn, data, t):
    shape, N = sn
    x = data.draw(spectra(N))
    perm = data.draw(st.permutations(list(range(N))))
    b = schur_branching(shape, x)
    assert schur_branching(shape, x[list(perm)]) == pytest.approx(b, rel=1e-12)
    assert schur_branching(shape, t * x) == pytest.approx(t**shape.size * b, rel=1e-11)


def test_orthogonality_examples():
    V, W = [1.0, 2.0], [1.0, 2.0]
    est = orthogonality_check((), V, W, 100, RngStream(1))
    assert est.mean == 1.0 and est.stderr == 0.0
    est = orthogonality_check((1,), [0.5, 1.0, 2.0], [0.3, 1.0, 1.5], 20_000, RngStream(2))
    assert abs(est.mean - 3.5 * 2.8 / 3) <= 4 * est.stderr
    est = orthogonality_check((2, 1), V, W, 100_000, RngStream(3))
    ref = schur_branching((2, 1), V) ** 2 / dim_shape((2, 1), 2)
    assert abs(est.mean - ref) <= 4 * est.stderr


def test_orthogonality_thread_count_invariant():
    a = orthogonality_check((2,), [0.5, 1.0], [0.2, 0.9], 10_000, RngStream(5), workers=1)
    b = orthogonality_check((2,), [0.5, 1.0], [0.2, 0.9], 10_000, RngStream(5), workers=3)
    assert a.mean == b.mean and a.stderr == b.stderr
