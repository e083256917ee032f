"""Exact polynomial layer: arithmetic, calculus, bracket, serialization."""

import math
from fractions import Fraction as F

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from magneflow import (
    InputError,
    PhasePoly,
    fd_bracket_oracle,
    format_rational,
    parse_rational,
    poisson_bracket,
    p_var,
    x_var,
)

N = 2
WIDTH = 2 * (N + 1)


def build_poly(n, raw_terms):
    width = 2 * (n + 1)
    terms = {}
    for slots, coeff in raw_terms:
        expo = [0] * width
        for s in slots:
            expo[s] += 1
        key = tuple(expo)
        terms[key] = terms.get(key, F(0)) + coeff
    return PhasePoly(n, terms)


def polys(max_degree=2, max_terms=3):
    coeffs = st.fractions(min_value=F(-3), max_value=F(3), max_denominator=4)
    term = st.tuples(
        st.lists(st.integers(0, WIDTH - 1), max_size=max_degree), coeffs
    )
    return st.builds(lambda raw: build_poly(N, raw), st.lists(term, max_size=max_terms))


def points(lo=-0.9, hi=0.9):
    coord = st.floats(lo, hi, allow_nan=False, allow_infinity=False)
    return st.lists(coord, min_size=WIDTH, max_size=WIDTH)


# -- rational literals ----------------------------------------------------


def test_parse_rational_accepts_fraction_strings():
    assert parse_rational("3/4") == F(3, 4)
    assert parse_rational("-7") == F(-7)
    assert parse_rational(" 2/6 ") == F(1, 3)


@pytest.mark.parametrize("bad", ["0.5", "1e-3", "1/0", "", "a/b", "1/2/3"])
def test_parse_rational_rejects_non_rationals(bad):
    with pytest.raises(InputError):
        parse_rational(bad)


def test_format_rational_round_trip():
    for value in (F(0), F(5), F(-3, 7), F(22, 4)):
        assert parse_rational(format_rational(value)) == value


# -- arithmetic -----------------------------------------------------------


def test_addition_cancels():
    x1, px1 = x_var(1, N), p_var(1, N)
    assert (x1 + px1) + (x1 - px1) == 2 * x1


def test_multiplication_by_zero_is_empty():
    zero = PhasePoly(N)
    prod = x_var(1, N) * zero
    assert prod.is_zero and prod.num_terms == 0


def test_rotation_momentum_square_expands():
    m12 = x_var(1, N) * p_var(2, N) - x_var(2, N) * p_var(1, N)
    sq = m12 * m12
    x1, x2, p1, p2 = x_var(1, N), x_var(2, N), p_var(1, N), p_var(2, N)
    expected = x1 * x1 * p2 * p2 - 2 * (x1 * x2 * p1 * p2) + x2 * x2 * p1 * p1
    assert sq == expected


def test_mixed_dimension_rejected():
    with pytest.raises(InputError):
        x_var(1, 2) + x_var(1, 3)


def test_float_coefficients_rejected():
    with pytest.raises(TypeError):
        PhasePoly(N, {(0,) * WIDTH: 0.5})


@given(polys(), polys())
def test_product_degree_bound(f, g):
    prod = f * g
    if f.is_zero or g.is_zero:
        assert prod.is_zero
    else:
        assert prod.degree() <= f.degree() + g.degree()


def test_power_matches_repeated_product():
    f = x_var(1, N) + 2 * p_var(3, N)
    assert f ** 3 == f * f * f
    assert f ** 0 == PhasePoly.constant(N, 1)


# -- partial derivatives --------------------------------------------------


def test_partial_x_basic():
    f = x_var(1, N) ** 2 * p_var(2, N)
    assert f.partial_x(1) == 2 * (x_var(1, N) * p_var(2, N))


def test_partial_p_of_pure_position_is_zero():
    assert (x_var(1, N) ** 2).partial_p(1).is_zero


def test_partial_p_of_rotation_momentum():
    m12 = x_var(1, N) * p_var(2, N) - x_var(2, N) * p_var(1, N)
    assert m12.partial_p(2) == x_var(1, N)


# -- bracket --------------------------------------------------------------


def test_canonical_pairings():
    for i in range(1, N + 2):
        for j in range(1, N + 2):
            br = poisson_bracket(x_var(i, N), p_var(j, N))
            expected = PhasePoly.constant(N, 1) if i == j else PhasePoly(N)
            assert br == expected
            assert poisson_bracket(x_var(i, N), x_var(j, N)).is_zero
            assert poisson_bracket(p_var(i, N), p_var(j, N)).is_zero


def test_rotation_momentum_preserves_radius():
    m12 = x_var(1, N) * p_var(2, N) - x_var(2, N) * p_var(1, N)
    radius = x_var(1, N) ** 2 + x_var(2, N) ** 2
    assert poisson_bracket(m12, radius).is_zero


@given(polys(), polys())
def test_bracket_antisymmetry(f, g):
    assert (poisson_bracket(f, g) + poisson_bracket(g, f)).is_zero


@given(polys(), polys(), polys())
@settings(max_examples=60, deadline=None)
def test_bracket_leibniz(f, g, h):
    left = poisson_bracket(f, g * h)
    right = poisson_bracket(f, g) * h + g * poisson_bracket(f, h)
    assert (left - right).is_zero


@given(polys(), polys(), polys())
@settings(max_examples=60, deadline=None)
def test_bracket_jacobi(f, g, h):
    total = (
        poisson_bracket(f, poisson_bracket(g, h))
        + poisson_bracket(g, poisson_bracket(h, f))
        + poisson_bracket(h, poisson_bracket(f, g))
    )
    assert total.is_zero


@given(polys(), polys(), points())
@settings(max_examples=60, deadline=None)
def test_bracket_matches_finite_differences(f, g, point):
    symbolic = poisson_bracket(f, g).evaluate(point)
    numeric = fd_bracket_oracle(f, g, point)
    assert abs(symbolic - numeric) <= 1e-6 * max(1.0, abs(symbolic))


# -- evaluation -----------------------------------------------------------


def test_evaluate_rotation_momentum():
    m12 = x_var(1, N) * p_var(2, N) - x_var(2, N) * p_var(1, N)
    assert m12.evaluate([1, 0, 0, 0, 1, 0]) == 1.0


def test_evaluate_zero_polynomial():
    assert PhasePoly(N).evaluate([0.3] * WIDTH) == 0.0


def test_evaluate_exact_is_exact():
    f = x_var(1, N) ** 2
    value = f.evaluate_exact([F(3, 5), F(4, 5), 0, 0, 0, 0])
    assert value == F(9, 25)


# -- substitution ---------------------------------------------------------


def identity_matrix(d):
    return [[F(1) if i == j else F(0) for j in range(d)] for i in range(d)]


def test_identity_substitution_is_noop():
    f = x_var(1, N) * p_var(2, N) + 3 * x_var(3, N) ** 2
    assert f.substitute_linear(identity_matrix(N + 1)) == f


def test_momentum_shift_substitution():
    shift = [x_var(2, N), PhasePoly(N), PhasePoly(N)]
    image = p_var(1, N).substitute_linear(identity_matrix(N + 1), p_shift=shift)
    assert image == p_var(1, N) + x_var(2, N)


def test_substitution_agrees_with_shifted_evaluation():
    # f(x, p + s(x)) computed by substitution must equal evaluating f at
    # the explicitly shifted point, exactly over the rationals.
    rng = np.random.default_rng(7)
    f = (
        x_var(1, N) * p_var(2, N)
        - x_var(2, N) * p_var(1, N)
        + p_var(3, N) ** 2
        + 2 * x_var(3, N)
    )
    shift = [F(1, 2) * x_var(2, N), F(-1, 2) * x_var(1, N), PhasePoly(N)]
    composed = f.substitute_linear(identity_matrix(N + 1), p_shift=shift)
    for _ in range(20):
        z = [F(int(v), 8) for v in rng.integers(-8, 9, size=WIDTH)]
        x, p = z[: N + 1], z[N + 1 :]
        shifted = list(x) + [
            p[0] + F(1, 2) * x[1],
            p[1] - F(1, 2) * x[0],
            p[2],
        ]
        assert composed.evaluate_exact(z) == f.evaluate_exact(shifted)


def test_orthogonal_substitution_preserves_bracket():
    # rotating both blocks by the same orthogonal matrix is canonical, so
    # brackets commute with the substitution
    c, s = F(3, 5), F(4, 5)
    q = [[c, -s, F(0)], [s, c, F(0)], [F(0), F(0), F(1)]]
    f = x_var(1, N) * p_var(2, N) + x_var(3, N) ** 2
    g = p_var(1, N) ** 2 - x_var(2, N) * p_var(3, N)
    lhs = poisson_bracket(f.substitute_linear(q), g.substitute_linear(q))
    rhs = poisson_bracket(f, g).substitute_linear(q)
    assert (lhs - rhs).is_zero


# -- serialization --------------------------------------------------------


def test_json_round_trip():
    f = (
        F(22, 7) * x_var(1, N) * p_var(3, N) ** 2
        - x_var(2, N)
        + PhasePoly.constant(N, F(-5, 3))
    )
    data = f.to_dict()
    assert data["n"] == N
    assert all(set(item) == {"c", "e"} for item in data["terms"])
    assert PhasePoly.from_dict(data) == f


def test_serialized_terms_are_sorted():
    f = x_var(3, N) + x_var(1, N) ** 2 + PhasePoly.constant(N, 1)
    degrees = [sum(item["e"]) for item in f.to_dict()["terms"]]
    assert degrees == sorted(degrees)


@given(polys())
def test_json_round_trip_random(f):
    assert PhasePoly.from_dict(f.to_dict()) == f


def test_from_dict_rejects_garbage():
    with pytest.raises(InputError):
        PhasePoly.from_dict({"n": 2})
    with pytest.raises(InputError):
        PhasePoly.from_dict({"n": 2, "terms": [{"c": "0.5", "e": [0] * 6}]})
    with pytest.raises(InputError):
        PhasePoly.from_dict({"n": 2, "terms": [{"c": "1", "e": [0] * 4}]})
