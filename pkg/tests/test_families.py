import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from martlab.errors import ConfigurationError, EvaluationError, SpecSyntaxError
from martlab.families import (Cos, Cosh, ExpCombo, ExpMixture, HeatPolyPlus, Quadratic,
                              SampledFunction, Tabulated, TimeDepExpCombo, TimeDepQuadratic,
                              evaluate, first_derivative, parse_spec, render_spec,
                              second_derivative)
from martlab.heatpoly import hermite

from conftest import WIDE, sampled


def test_eval_examples():
    assert evaluate(Quadratic(2, -1, 3), 2.0) == 9.0
    assert evaluate(Cosh(1.0), 0.0) == 1.0
    assert evaluate(ExpMixture(((0.5, 1.0), (0.5, -2.0))), 0.0, t=0.0) == 1.0


def test_time_dependent_needs_t():
    with pytest.raises(EvaluationError):
        evaluate(ExpMixture(((1.0, 1.0),)), 0.0)
    with pytest.raises(EvaluationError):
        TimeDepQuadratic(1.0, 0.0, sampled(math.sin))(1.0)


def test_tabulated_outside_hull():
    f = Tabulated.from_function(np.cos, np.linspace(-1, 1, 11))
    with pytest.raises(EvaluationError):
        f(1.5)


def test_second_derivative_examples():
    assert second_derivative(Quadratic(3.5, 1, 2), 0.7) == 7.0
    assert second_derivative(Cosh(2.0), 0.0) == 4.0
    assert second_derivative(Tabulated.from_function(lambda x: x**3, WIDE), 1.0, h=1e-3) == \
        pytest.approx(6.0, abs=1e-5)


def test_first_derivative_analytic():
    assert first_derivative(Quadratic(1, 2, 3), 2.0) == 6.0


def test_tabulated_spline_derivative_accuracy():
    f = Tabulated.from_function(np.sin, np.linspace(-5, 5, 801))
    x = np.linspace(-3, 3, 13)
    np.testing.assert_allclose(f(x), np.sin(x), atol=1e-9)
    np.testing.assert_allclose(f.d2x(x), -np.sin(x), atol=1e-4)


@pytest.mark.parametrize("xs", [(0.0, 1.0, 2.0), (0.0, 2.0, 1.0, 3.0), (0.0, 0.0, 1.0, 2.0)])
def test_tabulated_grid_invariants(xs):
    with pytest.raises(ConfigurationError):
        Tabulated(xs, tuple(range(len(xs))))


def test_sampled_function_interpolates_and_checks_hull():
    c = SampledFunction((0.0, 1.0, 2.0), (0.0, 2.0, 0.0))
    assert c(0.5) == 1.0
    assert c(1.5) == 1.0
    with pytest.raises(EvaluationError):
        c(2.5)
    with pytest.raises(ConfigurationError):
        SampledFunction((0.0, 0.0), (1.0, 2.0))


@pytest.mark.parametrize("a,b", [(0.0, 0.0), (-1.0, 1.0), (1.0, -0.5)])
def test_expcombo_weights_rejected(a, b):
    with pytest.raises(ConfigurationError):
        ExpCombo(a, b, 1.0)


def test_mixture_rejects_nonpositive_weights():
    with pytest.raises(ConfigurationError):
        ExpMixture(((0.0, 1.0),))


def test_cosh_matches_half_exponentials():
    x = np.linspace(-5, 5, 101)
    for lam in (0.0, 0.5, 1.0, 2.0):
        assert np.max(np.abs(Cosh(lam)(x) - ExpCombo(0.5, 0.5, lam)(x))) < 1e-14 * np.max(Cosh(lam)(x))


def test_evenness():
    x = np.linspace(-5, 5, 101)
    assert np.all(Cosh(1.7)(x) == Cosh(1.7)(-x))
    f = ExpCombo(0.3, 0.3, 1.2)
    np.testing.assert_allclose(f(x), f(-x), rtol=1e-15)
    g = ExpCombo(0.3, 0.7, 1.2)
    assert np.max(np.abs(g(x) - g(-x))) > 1e-3


@settings(max_examples=60, deadline=None)
@given(st.floats(0, 3), st.floats(0, 3), st.floats(-2, 2), st.floats(-4, 4))
def test_expcombo_second_derivative_identity(a, b, lam, x):
    if a + b == 0:
        return
    f = ExpCombo(a, b, lam)
    assert f.d2x(x) == pytest.approx(lam * lam * f(x), rel=1e-12, abs=1e-300)


def test_time_dependent_values():
    c = sampled(lambda t: 2 + math.cos(t))
    f = TimeDepExpCombo(0.5, 0.5, 1.0, c)
    assert f(0.3, t=1.0) == pytest.approx((2 + math.cos(1.0)) * math.cosh(0.3), rel=1e-5)
    q = TimeDepQuadratic(1.0, 0.0, sampled(math.sin))
    assert q(2.0, t=0.0) == 4.0


def test_heatpoly_plus():
    h = HeatPolyPlus(hermite(3))
    assert h.time_dependent
    assert h(2.0, t=1.0) == 8.0 - 6.0
    assert h.dx(2.0, t=1.0) == 12.0 - 3.0
    assert not HeatPolyPlus(hermite(3) - hermite(3) + hermite(0)).time_dependent


@pytest.mark.parametrize("text,expected", [
    ("quadratic a=1 b=0 c=0", Quadratic(1.0, 0.0, 0.0)),
    ("quadratic a=2", Quadratic(2.0, 0.0, 0.0)),
    ("cosh lambda=2", Cosh(2.0)),
    ("cosh lam=2", Cosh(2.0)),
    ("cos lambda=1", Cos(1.0)),
    ("expcombo a=1 b=0 lambda=1", ExpCombo(1.0, 0.0, 1.0)),
    ("expmixture 0.5:1,0.5:-2", ExpMixture(((0.5, 1.0), (0.5, -2.0)))),
    ("expmixture nu=0.5:1,0.5:-2", ExpMixture(((0.5, 1.0), (0.5, -2.0)))),
])
def test_parse_examples(text, expected):
    assert parse_spec(text) == expected


def test_parse_rejects_invariant_violation():
    with pytest.raises(ConfigurationError):
        parse_spec("expcombo a=0 b=0 lambda=1")


@pytest.mark.parametrize("text", ["", "sinh lambda=1", "cosh lambda=abc", "cosh beta=1",
                                  "quadratic a=1 a=2", "quadratic 3"])
def test_parse_syntax_errors_have_position(text):
    with pytest.raises(SpecSyntaxError) as info:
        parse_spec(text)
    assert 0 <= info.value.position <= len(text)


def test_parse_table(cube_csv):
    f = parse_spec(f"table {cube_csv}")
    assert f(2.0) == pytest.approx(8.0, rel=1e-12)
    g = parse_spec("table cube.csv", base_dir=cube_csv.parent)
    assert isinstance(g, Tabulated)
    with pytest.raises(ConfigurationError):
        parse_spec("table missing.csv", base_dir=cube_csv.parent)


def test_parse_timedep_and_heatpoly():
    f = parse_spec("tdquad a=1 b=0 c=0:0,1:1,2:4")
    assert f(1.0, t=1.5) == 1.0 + 2.5
    g = parse_spec("heatpoly terms=1*x^3*t^0,-3*x^1*t^1")
    assert g.poly == hermite(3)
    h = parse_spec("tdexpcombo a=0.5 b=0.5 lambda=1 c=0:1,2:3")
    assert h(0.0, t=1.0) == 2.0


finite = st.floats(-50, 50, allow_nan=False).filter(lambda v: v == v)
positive = st.floats(0.01, 5)


@st.composite
def specs(draw):
    kind = draw(st.sampled_from(["quadratic", "expcombo", "cosh", "cos", "mix", "tdquad",
                                 "tdexp", "heatpoly"]))
    if kind == "quadratic":
        return Quadratic(draw(finite), draw(finite), draw(finite))
    if kind == "expcombo":
        return ExpCombo(draw(positive), draw(st.floats(0, 5)), draw(finite))
    if kind == "cosh":
        return Cosh(draw(finite))
    if kind == "cos":
        return Cos(draw(finite))
    if kind == "mix":
        return ExpMixture(tuple(draw(st.lists(st.tuples(positive, finite), min_size=1, max_size=3))))
    times = tuple(sorted(set(draw(st.lists(st.floats(0, 5), min_size=1, max_size=4)))))
    c = SampledFunction(times, tuple(draw(finite) for _ in times))
    if kind == "tdquad":
        return TimeDepQuadratic(draw(finite), draw(finite), c)
    if kind == "tdexp":
        return TimeDepExpCombo(draw(positive), draw(positive), draw(finite), c)
    return HeatPolyPlus(hermite(draw(st.integers(0, 6))), c)


@settings(max_examples=200, deadline=None)
@given(specs())
def test_render_parse_round_trip(spec):
    assert parse_spec(render_spec(spec)) == spec
