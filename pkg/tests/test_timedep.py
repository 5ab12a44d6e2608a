import math

import numpy as np
import pytest

from martlab import martingale as mg
from martlab import timedep as td
from martlab.config import DEFAULT_GRID
from martlab.errors import ConfigurationError, DomainError
from martlab.families import (Cosh, ExpMixture, HeatPolyPlus, Quadratic, TimeDepExpCombo,
                              TimeDepQuadratic)
from martlab.heatpoly import HeatPolynomial, T, X, hermite
from martlab.paths import TimeGrid, simulate
from martlab.quadrature import gauss_hermite_rule

from conftest import sampled

RULE = gauss_hermite_rule(64)
SIN_QUAD = TimeDepQuadratic(1.0, 0.0, sampled(math.sin))
COS_COSH = TimeDepExpCombo(0.5, 0.5, 1.0, sampled(lambda t: 2 + math.cos(t)))
MIXTURE = ExpMixture(((0.5, 1.0), (0.5, -2.0)))
TX = HeatPolyPlus(T * X)
X_GRID = np.linspace(-3, 3, 13)


@pytest.mark.parametrize("sigma", [1.0, 2.0])
def test_residual_sin_quadratic(sigma):
    r = td.timedep_residual(SIN_QUAD, sigma, 0.5, 2.0, X_GRID, RULE)
    assert np.max(np.abs(r)) <= 1e-9


def test_residual_tx():
    assert td.timedep_residual(TX, 1.0, 1.0, 2.0, 1.0, RULE) == pytest.approx(1.0, abs=1e-12)


def test_residual_mixture_multiplicative():
    r = td.timedep_residual(MIXTURE, 1.0, 0.5, 2.0, X_GRID, gauss_hermite_rule(128),
                            mg.MULTIPLICATIVE)
    assert np.max(np.abs(r)) <= 1e-9
    for u in (0.25, 1.0, 2.0):
        assert td.g_sigma(MIXTURE, u, 1.0, RULE) == pytest.approx(1.0, abs=1e-12)


def test_residual_argument_checks():
    with pytest.raises(DomainError):
        td.timedep_residual(SIN_QUAD, 1.0, 1.0, 1.0, 0.0, RULE)
    with pytest.raises(DomainError):
        td.timedep_residual(SIN_QUAD, 0.0, 0.5, 1.0, 0.0, RULE)


def test_two_sigma_additive_sin():
    v = td.two_sigma_additive_classify(SIN_QUAD, (1.0, 2.0))
    assert v.status == td.FORM
    assert v.params["a"] == pytest.approx(1.0, abs=1e-6)
    assert abs(v.params["b"]) <= 1e-6
    for t, c in v.c_samples:
        assert abs(c - math.sin(t)) <= 1e-6
    assert set(v.residual_sups) == {1.0, 2.0}


def test_two_sigma_additive_rejects_tx():
    v = td.two_sigma_additive_classify(TX, (1.0, 2.0))
    assert v.status == td.NOT_FORM
    assert v.witness["check"] == "residual"


def test_two_sigma_additive_static_quadratic():
    v = td.two_sigma_additive_classify(Quadratic(2, 3, -1))
    assert v.passed
    assert (v.params["a"], v.params["b"]) == pytest.approx((2.0, 3.0), abs=1e-9)
    assert all(c == -1.0 for _, c in v.c_samples)


def test_linear_when_g_constant_two_sigma():
    f = TimeDepQuadratic(0.0, 2.0, 5.0)
    v = td.two_sigma_additive_classify(f)
    assert v.passed and v.params["g_constant"] and v.params["linear"]
    w = td.two_sigma_additive_classify(SIN_QUAD)
    assert not w.params["g_constant"]


@pytest.mark.parametrize("sigmas", [(1.0, 1.0), (0.0, 2.0), (2.0, 0.0)])
def test_sigma_pair_checked(sigmas):
    with pytest.raises(ConfigurationError):
        td.two_sigma_additive_classify(SIN_QUAD, sigmas)


def test_two_sigma_multiplicative_cos_cosh():
    v = td.two_sigma_multiplicative_classify(COS_COSH, (1.0, 2.0))
    assert v.status == td.FORM
    assert v.params["a"] == pytest.approx(0.5, abs=1e-6)
    assert v.params["b"] == pytest.approx(0.5, abs=1e-6)
    assert v.params["lambda"] == pytest.approx(1.0, abs=1e-6)
    for t, c in v.c_samples:
        assert abs(c - (2 + math.cos(t))) <= 1e-6
    assert v.notes


def test_mixture_single_sigma_vs_two_sigma():
    assert td.verify_timedep(MIXTURE, 1.0, mg.MULTIPLICATIVE).passed
    v = td.two_sigma_multiplicative_classify(MIXTURE, (1.0, 2.0))
    assert v.status == td.NOT_FORM
    assert v.witness is not None


def test_mixture_curvature_is_not_constant():
    x = DEFAULT_GRID.x
    ratio = MIXTURE.d2x(x, t=1.0) / MIXTURE(x, t=1.0)
    assert np.ptp(ratio) > 1.0


def test_two_sigma_cosh_lifted():
    v = td.two_sigma_multiplicative_classify(Cosh(2.0))
    assert v.passed
    assert v.params["lambda"] == pytest.approx(2.0, abs=1e-6)
    assert v.params["a"] == pytest.approx(0.5, abs=1e-6)
    assert all(c == 1.0 for _, c in v.c_samples)


@pytest.mark.parametrize("sigma", [1.0, 2.0, 0.5])
def test_quadratic_g_identity(sigma):
    f = TimeDepQuadratic(1.5, -0.5, sampled(math.sin))
    for t in (0.25, 1.0, 2.0):
        assert td.g_sigma(f, t, sigma, RULE) - math.sin(t) == pytest.approx(sigma**2 * t * 1.5, abs=1e-9)


@pytest.mark.parametrize("sigma", [1.0, 2.0])
def test_exp_g_identity(sigma):
    for t in (0.25, 1.0, 2.0):
        ratio = td.g_sigma(COS_COSH, t, sigma, gauss_hermite_rule(128)) / COS_COSH.c(t)
        assert ratio == pytest.approx(math.exp(sigma**2 * t / 2), rel=1e-9)


@pytest.mark.parametrize("k", range(0, 7))
def test_hermite_polynomials_are_martingales(k):
    rep = td.verify_timedep(HeatPolyPlus(hermite(k)), 1.0, mg.ADDITIVE)
    assert rep.max_abs_residual <= 1e-9


def test_growth_hermite_three():
    r = td.growth_bound_check(HeatPolyPlus(hermite(3)), 3, 3.0)
    assert r.gradient_pass and r.gradient_witness is None
    assert r.max_ratio <= 1.0


def test_growth_single_exponential_fails():
    f = ExpMixture(((1.0, 1.0),))
    r = td.growth_bound_check(f, 3, 1e3, x_values=np.linspace(-40, 40, 161))
    assert not r.gradient_pass
    w = r.gradient_witness
    assert w["abs_fx"] > w["bound"]


def test_growth_constant_passes():
    r = td.growth_bound_check(Quadratic(0, 0, 4.0), 1, 1.0)
    assert r.passed and r.max_ratio == 0.0


def test_growth_qv_evidence():
    e = simulate(100, TimeGrid.uniform(2.0, 200), 1.0, seed=42)
    r = td.growth_bound_check(HeatPolyPlus(hermite(3)), 3, 3.0, ensemble=e)
    assert r.qv_checked and r.qv_pass
    assert r.label == "evidence"
    assert r.qv_max_excess <= r.qv_slack


def test_growth_qv_detects_violation():
    # x^3 - 3tx has |f_x| up to 3(1 + x^2); a tiny C cannot dominate its variation
    e = simulate(100, TimeGrid.uniform(2.0, 200), 1.0, seed=42)
    r = td.growth_bound_check(HeatPolyPlus(hermite(3)), 3, 0.1, ensemble=e)
    assert r.qv_pass is False and not r.passed


def test_growth_argument_checks():
    with pytest.raises(ConfigurationError):
        td.growth_bound_check(Quadratic(1.0), 0, 1.0)
    with pytest.raises(ConfigurationError):
        td.growth_bound_check(Quadratic(1.0), 1, 0.0)


def test_exp_mixture_constructor():
    one = td.exp_mixture_martingale([(1.0, 0.0)])
    np.testing.assert_array_equal(one(X_GRID, t=1.3), np.ones_like(X_GRID))
    m = td.exp_mixture_martingale([(0.5, 1.0), (0.5, -2.0)])
    assert m(0.0, t=0.0) == 1.0
    assert td.verify_timedep(m, 1.0, mg.ADDITIVE).passed
    with pytest.raises(ConfigurationError):
        td.exp_mixture_martingale([(0.5, 1.0), (0.25, -2.0)])
