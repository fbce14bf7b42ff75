from fractions import Fraction
from math import comb, factorial

import pytest
from hypothesis import given
from hypothesis import strategies as st

from pseudoshrink.bellpoly import BellArguments, bell_partial, bell_row, bell_terms
from pseudoshrink.errors import ArgumentError


def stirling2(m, k):
    if m == k:
        return 1
    if k == 0 or k > m:
        return 0
    return k * stirling2(m - 1, k) + stirling2(m - 1, k - 1)


orders = st.integers(1, 8).flatmap(lambda m: st.tuples(st.just(m), st.integers(1, m)))


def test_small_table():
    assert bell_partial(4, 2, (1, 2, 3)) == 24
    assert bell_partial(3, 1, (5, 6, 7)) == 7
    assert bell_partial(3, 3, (2,)) == 8


@given(orders)
def test_all_ones_give_stirling_numbers(mk):
    m, k = mk
    assert bell_partial(m, k, [1] * (m - k + 1)) == stirling2(m, k)


@given(orders)
def test_factorial_arguments_give_lah_numbers(mk):
    m, k = mk
    x = [factorial(j) for j in range(1, m - k + 2)]
    assert bell_partial(m, k, x) == comb(m - 1, k - 1) * factorial(m) // factorial(k)


@given(orders, st.integers(-4, 4), st.integers(-3, 3), st.data())
def test_homogeneity(mk, a, b, data):
    # B(a b x_1, a b^2 x_2, ...) = a^k b^m B(x)
    m, k = mk
    x = data.draw(st.lists(st.integers(-5, 5), min_size=m - k + 1, max_size=m - k + 1))
    y = [a * b**l * xl for l, xl in enumerate(x, start=1)]
    assert bell_partial(m, k, y) == a**k * b**m * bell_partial(m, k, x)


@given(st.integers(1, 8), st.data())
def test_edge_rows(m, data):
    x = data.draw(st.lists(st.fractions(max_denominator=9), min_size=m, max_size=m))
    assert bell_partial(m, 1, x) == x[m - 1]
    assert bell_partial(m, m, x[:1]) == x[0] ** m


@given(st.integers(1, 8), st.data())
def test_row_sums_to_complete_bell(m, data):
    # complete Bell polynomial recursion: Y_{m+1} = sum_i C(m, i) x_{i+1} Y_{m-i}
    x = data.draw(st.lists(st.integers(-3, 3), min_size=m, max_size=m))

    def complete(j):
        return 1 if j == 0 else sum(bell_row(j, x))

    rec = sum(comb(m - 1, i) * x[i] * complete(m - 1 - i) for i in range(m))
    assert complete(m) == rec


def test_exact_fraction_result():
    out = bell_partial(3, 2, (Fraction(1, 2), Fraction(1, 3)))
    assert out == 3 * Fraction(1, 2) * Fraction(1, 3)
    assert isinstance(out, Fraction)


def test_float_arguments():
    assert bell_partial(4, 2, (1.0, 2.0, 3.0)) == pytest.approx(24.0)


def test_terms_multinomial_count():
    # sum of coefficients with all x = 1 is the Stirling number
    assert sum(c for c, _ in bell_terms(6, 3)) == stirling2(6, 3)


@pytest.mark.parametrize("m,k,x", [(3, 0, (1, 1, 1, 1)), (2, 3, ()), (4, 2, (1, 2))])
def test_bad_arguments(m, k, x):
    with pytest.raises(ArgumentError):
        bell_partial(m, k, x)


def test_arguments_type():
    with pytest.raises(ArgumentError):
        BellArguments(2.0, 1, (1, 2))
    with pytest.raises(ArgumentError):
        bell_row(3, (1, 2))
