import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from charexp.errors import ShapeOverflow, ShapeTooTall
from charexp.tableaux import (
    LSequence,
    YoungShape,
    casimir_c2,
    casimir_c2_lform,
    corner_moves,
    empirical_measure,
    enumerate_shapes,
    l_sequence,
    partition_count,
)

from oracles import partitions_brute


@st.composite
def shapes(draw, max_rows=6, max_part=8):
    n = draw(st.integers(0, max_rows))
    parts = draw(st.lists(st.integers(0, max_part), min_size=n, max_size=n))
    return YoungShape(tuple(sorted(parts, reverse=True)))


def test_shape_normalizes_trailing_zeros():
    assert YoungShape((3, 1, 0, 0)).parts == (3, 1)
    assert YoungShape.parse("3,1,1") == YoungShape((3, 1, 1))
    assert YoungShape.parse("") == YoungShape(())
    assert str(YoungShape((3, 1, 1))) == "3,1,1"


@pytest.mark.parametrize("bad", [(1, 2), (2, -1)])
def test_shape_rejects_invalid(bad):
    with pytest.raises(ValueError):
        YoungShape(bad)


def test_shape_overflow():
    with pytest.raises(ShapeOverflow):
        YoungShape((2**62, 2**62))


@pytest.mark.parametrize(
    "shape, N, expected",
    [((2, 1), 3, (4, 2, 0)), ((), 3, (2, 1, 0)), ((5,), 1, (5,))],
)
def test_l_sequence_examples(shape, N, expected):
    assert l_sequence(shape, N).l == expected


def test_l_sequence_too_tall():
    with pytest.raises(ShapeTooTall):
        l_sequence((1, 1, 1), 2)


def test_lsequence_invariants():
    with pytest.raises(ValueError):
        LSequence(2, (1, 1))
    with pytest.raises(ValueError):
        LSequence(2, (1, -1))
    assert LSequence(3, (4, 2, 0)).to_shape() == YoungShape((2, 1))


def test_empirical_measure_examples():
    mu = empirical_measure((), 2)
    assert sorted(mu.atoms) == [(0.0, 0.5), (0.5, 0.5)]
    mu = empirical_measure((2, 1), 3)
    np.testing.assert_allclose(sorted(mu.positions), [0, 2 / 3, 4 / 3])
    np.testing.assert_allclose(mu.weights, 1 / 3)


def test_empirical_measure_first_moment_trend():
    # first moment of the empty shape is (N-1)/(2N) -> 1/2
    vals = [empirical_measure((), N).mean() for N in (10, 100, 1000)]
    np.testing.assert_allclose(vals, [(N - 1) / (2 * N) for N in (10, 100, 1000)])
    assert abs(vals[-1] - 0.5) < 1e-3


@pytest.mark.parametrize("shape, N, expected", [((), 4, 0), ((1,), 2, 2), ((7,), 1, 49), ((3,), 1, 9)])
def test_casimir_examples(shape, N, expected):
    assert casimir_c2(shape, N) == expected


def test_casimir_two_forms_agree_exhaustively():
    for N in range(1, 7):
        for s in enumerate_shapes(12, N):
            c = casimir_c2(s, N)
            assert c == casimir_c2_lform(s, N)
            assert c >= 0
            # lower bound used by the heat-kernel tail
            assert c * N >= s.size**2


def test_enumerate_examples():
    assert list(enumerate_shapes(0, 3)) == [YoungShape(())]
    assert set(enumerate_shapes(2, 2)) == {YoungShape(p) for p in [(), (1,), (2,), (1, 1)]}
    assert len(list(enumerate_shapes(4, 4))) == 12


def test_enumerate_matches_partition_oracles():
    for N in range(1, 5):
        got = list(enumerate_shapes(7, N))
        assert len(got) == len(set(got))
        sizes = [s.size for s in got]
        assert sizes == sorted(sizes)
        for m in range(8):
            ref = partitions_brute(m, N)
            assert {s.parts for s in got if s.size == m} == ref
            assert partition_count(m, N) == len(ref)


def test_corner_move_examples():
    assert set(corner_moves((), 2)) == {YoungShape((1,))}
    assert set(corner_moves((2, 1), 2)) == {YoungShape(p) for p in [(3, 1), (2, 2), (1, 1), (2,)]}
    assert set(corner_moves((1,), 1)) == {YoungShape((2,)), YoungShape(())}


@given(shapes(), st.integers(1, 7))
def test_l_sequence_strictly_decreasing(shape, N):
    if len(shape) > N:
        with pytest.raises(ShapeTooTall):
            l_sequence(shape, N)
        return
    l = l_sequence(shape, N).l
    assert all(a - b >= 1 for a, b in zip(l, l[1:])) and l[-1] >= 0
    assert l_sequence(shape, N).to_shape() == shape
    mu = empirical_measure(shape, N)
    assert abs(mu.weights.sum() - 1) < 1e-15 and np.all(mu.positions >= 0)


@given(shapes(), st.integers(1, 7))
def test_corner_moves_symmetric(shape, N):
    if len(shape) > N:
        return
    for mu in corner_moves(shape, N):
        assert abs(mu.size - shape.size) == 1
        assert len(mu) <= N
        assert shape in corner_moves(mu, N)


@given(shapes())
def test_conjugate_is_involution(shape):
    assert shape.conjugate().conjugate() == shape
    assert shape.conjugate().size == shape.size
