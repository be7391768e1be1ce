import math

import numpy as np
import pytest

from sdepoint import (AdditiveProblem, CoefficientSet, DomainError, LinearProblem, analytic_constants,
                      gaussian_abs_moment, mc_constants, weight_rms, weighted_integration_constant)
from sdepoint.constants import constants_from_weights, sample_weights
from sdepoint.problem import ConstantInitial

from conftest import linear_bt


@pytest.mark.parametrize("p, expected", [(2.0, 1.0), (1.0, math.sqrt(2 / math.pi)), (4.0, 3 ** 0.25)])
def test_gaussian_moment_values(p, expected):
    assert gaussian_abs_moment(p) == pytest.approx(expected, rel=1e-14)


def test_gaussian_moment_against_sampling():
    z = np.random.default_rng(0).standard_normal(1_000_000)
    for p in (1.0, 3.0, 4.0):
        assert gaussian_abs_moment(p) == pytest.approx(np.mean(np.abs(z) ** p) ** (1 / p), rel=5e-3)
    with pytest.raises(DomainError):
        gaussian_abs_moment(0.5)


@pytest.mark.parametrize("b", [0.5, 1.0, 2.0, -1.5])
def test_linear_ramp_closed_forms(b):
    c = analytic_constants(linear_bt(b), 2.0)
    common = abs(b) * math.exp(b * b / 6)
    assert c.c_2 == pytest.approx(common, rel=1e-10)
    assert c.c_star == pytest.approx(common, rel=1e-10)
    assert c.c_equi == pytest.approx(common, rel=1e-10)
    assert c.c_star_star == pytest.approx(abs(b) * math.exp(-b * b / 18), rel=1e-10)


def test_ramp_ratio_at_b5():
    c = analytic_constants(linear_bt(5.0), 2.0)
    assert c.c_equi / c.c_star_star > 258


def test_constant_volatility_constants_vanish():
    c = analytic_constants(LinearProblem.polynomial(0.3, 1.2), 3.0)
    assert (c.c_star_star, c.c_star, c.c_2, c.c_equi) == (0.0, 0.0, 0.0, 0.0)


def test_linear_general_p():
    # beta(t) = t, alpha = 0, ||beta||^2 = 1/3: (E|X(1)|^q)^{1/q} = exp(-1/6 + q/6), q = p or p/(p+1)
    c = analytic_constants(linear_bt(1.0), 4.0)
    level = math.exp(-1 / 6)
    assert c.c_star == pytest.approx(3 ** 0.25 * level * math.exp(2 / 3), rel=1e-10)
    assert c.c_star_star == pytest.approx(3 ** 0.25 * level * math.exp(2 / 15), rel=1e-10)
    assert c.c_2 == pytest.approx(1.0 * math.exp(1 / 6), rel=1e-10)


def test_additive_quadratic_diffusion():
    prob = AdditiveProblem.polynomial(0.0, [0.0, 0.0, 0.5])
    c = analytic_constants(prob, 2.0)
    for v in (c.c_2, c.c_star, c.c_star_star):
        assert v == pytest.approx(0.6 ** 1.5, rel=1e-10)
    assert c.c_equi == pytest.approx(1 / math.sqrt(3), rel=1e-10)
    mc = mc_constants(prob.coefficients, 2.0, k=256, M=50)
    # Y is deterministic, so only the left Riemann sum separates the two
    for name in ("c_2", "c_star", "c_star_star", "c_equi"):
        assert getattr(mc, name) == pytest.approx(getattr(c, name), rel=5 / 256)
        assert mc.stderr[name] < 1e-12


def test_monte_carlo_matches_closed_form_small(lin1):
    exact = analytic_constants(lin1, 2.0)
    mc = mc_constants(lin1.coefficients, 2.0, k=64, M=2000, rng=5)
    for name in ("c_2", "c_star", "c_star_star", "c_equi"):
        assert abs(getattr(mc, name) - getattr(exact, name)) < 3 * mc.stderr[name] + 0.02 * getattr(exact, name)


def test_vanishing_weight_gives_zero_constants():
    c = CoefficientSet(a=lambda t, x: 1.0, sigma=lambda t, x: 2.0, x0_sampler=ConstantInitial(0.0))
    mc = mc_constants(c, 2.0, k=16, M=20)
    assert (mc.c_star_star, mc.c_star, mc.c_2, mc.c_equi) == (0.0, 0.0, 0.0, 0.0)


def test_weight_rms_matches_closed_form(lin1):
    est = weight_rms(lin1.coefficients, 8, 4000, 3)
    assert est.shape == (8,)
    np.testing.assert_allclose(est, lin1.weight_rms(0.5), rtol=0.1)


def test_sample_weights_reproducible(lin1):
    a = sample_weights(lin1.coefficients, 4, 5, 11)
    assert np.array_equal(a, sample_weights(lin1.coefficients, 4, 5, 11))
    assert a.shape == (5, 4)


def test_constants_from_weights_standard_errors_shrink():
    rng = np.random.default_rng(1)
    small = constants_from_weights(rng.lognormal(size=(200, 8)))
    large = constants_from_weights(rng.lognormal(size=(3200, 8)))
    for name in ("c_2", "c_star", "c_star_star", "c_equi"):
        assert large.stderr[name] == pytest.approx(small.stderr[name] / 4, rel=0.35)


def test_mc_validation(lin1):
    with pytest.raises(DomainError):
        mc_constants(lin1.coefficients, 2.0, k=1)
    with pytest.raises(DomainError):
        mc_constants(lin1.coefficients, 2.0, M=1)
    with pytest.raises(DomainError):
        mc_constants(lin1.coefficients, 0.5)


def test_unknown_family_has_no_closed_form():
    assert analytic_constants(CoefficientSet(a=lambda t, x: 0.0, sigma=lambda t, x: 1.0)) is None


@pytest.mark.parametrize("rho, expected", [(lambda t: 1.0, 1.0), (lambda t: t, 0.6 ** 1.5), (lambda t: 0.0, 0.0)])
def test_weighted_integration_constant(rho, expected):
    assert weighted_integration_constant(rho) == pytest.approx(expected, rel=1e-10, abs=1e-15)


def test_constant_set_dict():
    d = analytic_constants(linear_bt(1.0)).as_dict()
    assert {"c_star_star", "c_star", "c_2", "c_equi", "m_p"} <= set(d)
    assert d["method"] == "analytic"
