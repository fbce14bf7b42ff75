import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from pseudoshrink.detlim import (
    MAX_ORDER,
    DerivativeStack,
    dk_weighted,
    h_values,
    identity_closed_form,
    limit_moment,
    solve_v,
    u_derivatives,
    v_derivatives,
    v_identity,
    w_derivatives,
    w_identity,
)
from pseudoshrink.errors import ArgumentError, DomainError
from pseudoshrink.randmat import SpectralModel, WeightMatrix, paper_mix_eigenvalues

MIX = paper_mix_eigenvalues(100)
EYE = SpectralModel.identity(10)


def test_v_examples():
    assert solve_v(0.0, 2.0, EYE) == pytest.approx(1.0, abs=1e-10)
    assert solve_v(1.0, 2.0, EYE) == pytest.approx(math.sqrt(2) - 1, abs=1e-10)
    # the spectrum mix gives roughly a quarter
    assert solve_v(0.0, 2.0, MIX) == pytest.approx(0.2534, abs=5e-4)


def test_v_derivative_examples():
    st0 = v_derivatives(0.0, 2, 2.0, EYE)
    assert st0[1] == pytest.approx(-2.0, abs=1e-9)
    assert st0[2] == pytest.approx(12.0, abs=1e-8)
    v1 = math.sqrt(2) - 1
    st1 = v_derivatives(1.0, 1, 2.0, EYE)
    assert st1[1] == pytest.approx(-1.0 / (v1**-2 - 2.0 / (v1 + 1) ** 2), abs=1e-9)


@given(st.floats(1.05, 6.0), st.floats(0.0, 10.0))
def test_v_solves_fixed_point(c, t):
    # (1/p) sum 1/(v lam + 1) = (c - 1 + t v) / c
    v = solve_v(t, c, MIX)
    assert np.mean(1.0 / (v * MIX + 1.0)) == pytest.approx((c - 1.0 + t * v) / c, abs=1e-11)


@given(st.floats(1.05, 6.0), st.floats(0.0, 10.0))
def test_v_matches_explicit_root_at_identity(c, t):
    assert solve_v(t, c, EYE) == pytest.approx(v_identity(t, c)[0], rel=1e-10)


@given(st.floats(1.1, 5.0), st.floats(0.0, 5.0))
def test_v_derivative_closed_forms_at_identity(c, t):
    st_ = v_derivatives(t, 4, c, EYE)
    exact = v_identity(t, c, 4)
    for m in range(5):
        assert st_[m] == pytest.approx(exact[m], rel=1e-7, abs=1e-12)


@given(st.floats(1.1, 5.0), st.floats(0.1, 5.0))
def test_v_positive_decreasing_convex(c, t):
    st_ = v_derivatives(t, 2, c, MIX)
    assert st_[0] > 0 and st_[1] < 0 and st_[2] > 0


def test_dk_examples():
    st0 = v_derivatives(0.0, 1, 2.0, EYE)
    assert dk_weighted(st0, 1, WeightMatrix.identity_over_p(10), EYE) == pytest.approx(0.25)
    st1 = v_derivatives(1.0, 0, 2.0, EYE)
    assert dk_weighted(st1, 0, WeightMatrix.identity_over_p(10), EYE) == pytest.approx(1.0 / (st1[0] + 1.0))
    model = SpectralModel(np.array([1.0, 3.0]))
    fake = DerivativeStack(0.0, 0, (0.5,), "v_over_one")
    e1 = np.diag([1.0, 0.0])
    assert dk_weighted(fake, 1, e1, model) == pytest.approx(1 / 1.5**2)


def test_limit_examples():
    tr1 = WeightMatrix.identity_over_p(10)
    assert limit_moment("mp", 2, 0.0, tr1, 2.0, EYE).value == pytest.approx(1.0)
    assert limit_moment("samplecov", 3, 0.0, tr1, 2.0, EYE).value == pytest.approx(11.0)
    assert limit_moment("ordinary", 1, 0.0, tr1, 0.5, EYE).value == pytest.approx(8.0)
    v1 = math.sqrt(2) - 1
    assert limit_moment("ridge", 0, 1.0, tr1, 2.0, EYE).value == pytest.approx(v1 / 2 + 0.5, abs=1e-9)
    assert limit_moment("mp", 4, 0.0, tr1, 2.0, EYE).value == pytest.approx(11.0)
    assert w_identity(0.0, 0.5)[0] == pytest.approx(0.5)
    assert w_derivatives(0, 0.5, EYE)[0] == pytest.approx(0.5)
    vp = v_identity(1.0, 2.0, 1)[1]
    assert limit_moment("mpr", 1, 1.0, tr1, 2.0, EYE).value == pytest.approx((v1 + vp) / 2, abs=1e-9)
    assert limit_moment("mpr", 1, 1.0, tr1, 2.0, EYE).value == pytest.approx(0.103553, abs=1e-6)


@given(st.floats(1.1, 5.0))
def test_known_identity_moments(c):
    # (1/p) tr S^+ -> 1/(c (c-1)); (1/p) tr S^-1 -> 1/(1-c) for c < 1; (1/p) tr S^2 -> 1 + c
    assert identity_closed_form("mp", 1, 0.0, c) == pytest.approx(1.0 / (c * (c - 1.0)))
    assert identity_closed_form("mp", 2, 0.0, c) == pytest.approx(1.0 / (c - 1.0) ** 3)
    assert identity_closed_form("ordinary", 0, 0.0, 1.0 / c) == pytest.approx(1.0 / (1.0 - 1.0 / c))
    assert identity_closed_form("samplecov", 2, 0.0, c) == pytest.approx(1.0 + c)


@given(st.floats(0.2, 4.0), st.integers(0, 3))
def test_samplecov_second_moment_general(c, _):
    lam = MIX
    val = limit_moment("samplecov", 2, 0.0, None, c, lam).value
    assert val == pytest.approx(np.mean(lam**2) + c * np.mean(lam) ** 2, rel=1e-10)


@given(st.floats(0.3, 4.0), st.floats(0.2, 4.0), st.integers(0, 4))
def test_ridge_forms_agree(c, t, m):
    a = limit_moment("ridge", m, t, None, c, MIX).value
    b = limit_moment("ridge", m, t, None, c, MIX, form="recursive").value
    assert a == pytest.approx(b, rel=1e-10)


@given(st.floats(0.3, 4.0), st.floats(0.2, 4.0), st.integers(1, 3))
def test_mpr_routes_agree(c, t, m):
    # D_m form versus the binomial expansion through ridge moments
    a = limit_moment("mpr", m, t, None, c, MIX).value
    b = limit_moment("mpr", m, t, None, c, MIX, form="binomial").value
    assert a == pytest.approx(b, rel=1e-7)


@given(st.floats(0.3, 4.0), st.floats(0.2, 4.0), st.integers(0, 3), st.integers(1, 3))
def test_identity_limits_match_closed_forms(c, t, m, mm):
    assert limit_moment("ridge", m, t, None, c, EYE).value == pytest.approx(identity_closed_form("ridge", m, t, c), rel=1e-9)
    assert limit_moment("mpr", mm, t, None, c, EYE).value == pytest.approx(identity_closed_form("mpr", mm, t, c), rel=1e-8)


@given(st.floats(1.2, 4.0), st.floats(0.1, 3.0))
def test_limit_is_linear_in_theta(c, a):
    rng = np.random.default_rng(0)
    q = rng.standard_normal((100, 100))
    th = q @ q.T / 100
    base = limit_moment("mp", 2, 0.0, th, c, MIX).value
    assert limit_moment("mp", 2, 0.0, a * th, c, MIX).value == pytest.approx(a * base, rel=1e-10)


def test_h_values_identity():
    h = h_values(1.0, 2.0, EYE, 3)
    assert h[2] == pytest.approx(0.5)
    assert h[3] == pytest.approx(0.75)


def test_u_derivatives_shape():
    st_ = u_derivatives(3, 2.0, EYE)
    assert len(st_) == 4


def test_errors():
    with pytest.raises(DomainError):
        limit_moment("mp", 1, 0.0, None, 0.5, EYE)
    with pytest.raises(DomainError):
        limit_moment("ridge", 1, 0.0, None, 2.0, EYE)
    with pytest.raises(DomainError):
        limit_moment("ordinary", 1, 0.0, None, 2.0, EYE)
    with pytest.raises(ArgumentError):
        limit_moment("cholesky", 1, 0.0, None, 2.0, EYE)
    with pytest.raises(ArgumentError):
        v_derivatives(0.0, MAX_ORDER + 1, 2.0, EYE)
    with pytest.raises((ArgumentError, DomainError)):
        solve_v(-1.0, 2.0, EYE)
