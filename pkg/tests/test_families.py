import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from charexp.errors import HypothesisViolation
from charexp.families import Potential, parse_cutoff, parse_functional, parse_polynomial
from charexp.measures import DiscreteMeasure, GridMeasure


def test_parse_polynomial():
    p = parse_polynomial("0.5 + 0.3x^2 - x")
    assert p(2.0) == pytest.approx(0.5 + 1.2 - 2.0)
    with pytest.raises(ValueError):
        parse_polynomial("exp(x)")


@given(st.floats(-50, 50))
def test_cutoff_families_respect_certificates(x):
    for text in ("constant:0.4", "rational:(0.5+0.3x^2)/(1+x^2)", "logistic:0.2,0.7,1.5,0.3"):
        phi = parse_cutoff(text)
        v = float(phi(x))
        assert phi.certified_inf - 1e-15 <= v <= phi.certified_sup + 1e-15
        assert 0 < phi.certified_inf and phi.certified_sup < 1


def test_cutoff_rejections():
    with pytest.raises(ValueError):
        parse_cutoff("spline:1")
    with pytest.raises((HypothesisViolation, ValueError)):
        parse_cutoff("rational:(1+x^2)/(1+0.5x^2)").check()


def test_cutoff_matrix_function():
    phi = parse_cutoff("rational:(0.5+0.3x^2)/(1+x^2)")
    M = np.array([[0.2, 0.5], [0.5, -1.0]])
    w, U = np.linalg.eigh(M)
    assert np.allclose(phi.of_matrix(M), (U * phi(w)) @ U.T)
    assert phi.rho == pytest.approx(-np.log(phi.certified_sup))


@given(st.floats(0, 100))
def test_potential_growth_certificate(x):
    for text in ("x", "x^2-x", "x^3-2x^2+x"):
        c = Potential.parse(text, 0.5)
        assert c(x) >= c.growth * x + c.offset - 1e-9
    with pytest.raises(HypothesisViolation):
        Potential.parse("-x^2")


def test_functionals():
    u = GridMeasure.uniform(0, 1, 32)
    assert parse_functional("constant:0.3").value(u) == 0.3
    assert parse_functional(None).value(u) == 0.0
    lin = parse_functional("linear:0.5")
    assert abs(lin.value(u)) <= lin.bound
    q = parse_functional("quadratic:0.5")
    assert abs(q.value(DiscreteMeasure.uniform([0.1, 0.9]))) <= q.bound
    with pytest.raises(ValueError):
        parse_functional("cubic:1")
