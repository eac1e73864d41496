import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.integrate import quad

from fracnls.nonlinearity import (
    NonVanishingError,
    SeriesNonlinearity,
    apply_nonlinear_term,
    big_N_antiderivative,
    builtin,
    custom,
    evaluate_potential,
    evaluate_series,
    falling,
    potential_values,
    stirling_first,
)
from fracnls.spectral import TorusGrid, from_function

CLOSED_FORMS = [
    ("power", {"gamma": 2.0}, lambda x: x ** 2),
    ("power", {"gamma": -1.5}, lambda x: x ** -1.5),
    ("inverse_power", {"nu": 1.0}, lambda x: -1 / x),
    ("log", {}, np.log),
    ("log1p", {"gamma": 1.0}, np.log1p),
    ("log1p", {"gamma": -2.0}, lambda x: np.log1p(x ** -2.0)),
    ("exp", {"r": 1.0}, np.exp),
    ("exp", {"r": 2.0}, lambda x: np.exp(x ** 2)),
    ("sin_quotient", {"r1": 1.0, "r2": 0.5}, lambda x: np.sin(x) / np.sqrt(x)),
    ("combined", {"a_k": [2.0, -1.0], "nu_k": [1.0, 3.0]}, lambda x: 2 / x - x ** -3),
    ("series", {"a_k": [1.0, [0.0, 1.0]], "gamma_k": [2.0, 0.5]}, lambda x: x ** 2 + 1j * np.sqrt(x)),
    ("zero", {}, lambda x: 0 * x),
]


@pytest.mark.parametrize("name,params,exact", CLOSED_FORMS)
def test_builtin_values(name, params, exact):
    spec = builtin(name, **params)
    xs = np.array([0.3, 1.0, 1.7, 2.5])
    np.testing.assert_allclose(potential_values(spec, xs), exact(xs), rtol=1e-13, atol=1e-14)


def test_unknown_and_malformed():
    with pytest.raises(ValueError):
        builtin("cubic")
    with pytest.raises(ValueError):
        builtin("series", a_k=[1.0], gamma_k=[1.0, 2.0])


def test_singular_flags():
    assert builtin("log").singular
    assert builtin("power", gamma=-1.0).singular
    assert not builtin("power", gamma=2.0).singular
    assert not builtin("exp", r=1.0).singular
    assert builtin("combined", a_k=[1.0], nu_k=[1.0]).singular
    assert not builtin("series", a_k=[[1.0, 1.0]], gamma_k=[1.0]).is_real


def test_singular_at_zero():
    with pytest.raises(NonVanishingError):
        evaluate_potential(builtin("log"), 0.0)
    assert evaluate_potential(builtin("power", gamma=2.0), 0.0) == 0


@pytest.mark.parametrize("name,params", [
    ("power", {"gamma": 2.5}), ("power", {"gamma": -1.0}), ("log", {}),
    ("log1p", {"gamma": 1.0}), ("log1p", {"gamma": -1.5}), ("log1p", {"gamma": 0.5}),
])
@pytest.mark.parametrize("n", [1, 2, 3])
def test_derivatives_match_finite_differences(name, params, n):
    spec = builtin(name, **params)
    x = np.array([0.7, 1.3, 2.2])
    h = 1e-3
    # central stencil for the n-th derivative of the (n-1)-th derivative
    lower = (lambda y: spec.func(y)) if n == 1 else (lambda y: spec.deriv(n - 1, y))
    fd = (lower(x + h) - lower(x - h)) / (2 * h)
    np.testing.assert_allclose(spec.deriv(n, x), fd, rtol=1e-5)


def test_decay_constants_log1p():
    spec = builtin("log1p", gamma=1.0)
    x = np.geomspace(1e-3, 1e3, 2001)
    for n, c in enumerate(spec.decay_constants[:4], start=1):
        # |x^n N^(n)(x)| <= c_n (1 + x^gamma) with gamma = 0 in the decay sense
        assert np.all(np.abs(x ** n * spec.deriv(n, x)) <= c * (1 + 1e-12))


def test_stirling_first():
    # s(4, j) signed: 0, -6, 11, -6, 1
    assert [stirling_first(4, j) for j in range(5)] == [0, -6, 11, -6, 1]


def test_falling():
    assert falling(3.0, 2, step=2.0) == 3.0
    assert falling(5.0, 0) == 1.0
    assert falling(1.0, 3) == 0.0


@pytest.mark.parametrize("name,params", [
    ("power", {"gamma": 2.0}), ("power", {"gamma": -1.0}), ("power", {"gamma": -3.0}),
    ("log", {}), ("log1p", {"gamma": 1.0}), ("exp", {"r": 1.0}),
])
def test_antiderivative_derivative(name, params):
    spec = builtin(name, **params)
    for tau in (0.8, 1.6, 2.4):
        h = 1e-5
        d = (big_N_antiderivative(spec, tau + h) - big_N_antiderivative(spec, tau - h)) / (2 * h)
        assert d == pytest.approx(float(np.real(evaluate_potential(spec, tau))) * tau, rel=1e-6)


def test_antiderivative_base_zero():
    spec = builtin("power", gamma=2.0)
    assert big_N_antiderivative(spec, 2.0) == pytest.approx(4.0)
    log_anti = big_N_antiderivative(builtin("log"), 2.0)
    assert log_anti == pytest.approx(quad(lambda v: math.log(v) * v, 0, 2)[0])


def test_series_truncation():
    spec = builtin("exp", r=1.0)
    value, tail = evaluate_series(spec, 0.5)
    assert value == pytest.approx(math.exp(0.5), rel=1e-15)
    assert tail < 1e-15
    assert len(spec.active_terms(0.5, 0.5)) < len(spec.terms)


def test_nonlinear_term_constant_and_plane_wave():
    g = TorusGrid(1, 16)
    spec = builtin("power", gamma=2.0)
    F = from_function(g, lambda x: 1.5 * np.exp(2j * x))
    out = apply_nonlinear_term(spec, F)
    assert out.coefficient(2) == pytest.approx(1.5 ** 3)


def test_nonlinear_term_requires_non_vanishing():
    g = TorusGrid(1, 16)
    F = from_function(g, lambda x: np.cos(x))
    with pytest.raises(NonVanishingError):
        apply_nonlinear_term(builtin("log"), F)


@given(st.floats(0.5, 3), st.floats(-0.2, 0.2), st.integers(1, 5))
def test_nonlinear_term_gauge_covariant(c, eps, k):
    g = TorusGrid(1, 16)
    spec = builtin("power", gamma=2.0)
    F = from_function(g, lambda x: c + eps * np.exp(1j * k * x))
    rotated = F * np.exp(0.7j)
    np.testing.assert_allclose(apply_nonlinear_term(spec, rotated).coeffs,
                               np.exp(0.7j) * apply_nonlinear_term(spec, F).coeffs, atol=1e-12)


def test_custom():
    spec = custom("cube", lambda x: x ** 3, lambda n, x: math.perm(3, n) * x ** (3 - n), 3.0, (3.0, 6.0, 6.0))
    assert evaluate_potential(spec, 2.0) == pytest.approx(8.0)
    assert big_N_antiderivative(spec, 2.0) == pytest.approx(2 ** 5 / 5 - 1 / 5)


def test_series_max_terms():
    s = SeriesNonlinearity("long", tuple((1.0, float(k)) for k in range(100)), max_terms=10)
    assert len(s.terms) == 10
