import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from cftlab import specfun as sf
from cftlab.params import ModelParams

from conftest import q_params

GRID = np.linspace(-2.9, 2.9, 41)


def test_theta4_at_q0_is_one():
    x = np.linspace(-3, 3, 13)
    for eps in (0.0, 0.3):
        assert np.all(sf.theta_reg(4, x, 0.0, eps) == 1)


def test_theta1_at_q0():
    x = np.linspace(-3, 3, 13)
    np.testing.assert_allclose(sf.theta_reg(1, x, 0.0, 0.0), -2j * np.sin(x), atol=1e-15)


def test_theta_rejects_q_ge_1():
    with pytest.raises(ValueError):
        sf.theta_reg(1, 0.3, 1.0)


@pytest.mark.parametrize("q", [0.1, 0.5, 0.8])
@pytest.mark.parametrize("kind", [1, 4])
def test_theta_product_vs_log(kind, q):
    z = GRID + 0.2j
    a = sf.theta_reg(kind, z, q, 0.1, path="product")
    b = sf.theta_reg(kind, z, q, 0.1, path="log")
    np.testing.assert_allclose(a, b, rtol=1e-12)


@pytest.mark.parametrize("q", [0.2, 0.5])
def test_theta_shift_relation(q):
    p = q_params(q)
    k = p.kappa
    for eps in (0.0, 0.2):
        lhs = sf.theta_reg(1, k * (GRID + 1j * p.delta), q, eps)
        rhs = q ** -0.5 * np.exp(-1j * k * GRID) * sf.theta_reg(4, k * GRID, q, eps)
        assert np.max(np.abs(lhs - rhs)) < 1e-12


def test_zeta_q0_is_cot():
    p = q_params(0.0)
    z = GRID + 0.1j
    np.testing.assert_allclose(sf.zeta1(z, p), p.kappa / np.tan(p.kappa * z), rtol=1e-14)


@given(x=st.floats(0.05, 3.0), y=st.floats(-0.5, 0.5), q=st.floats(0.0, 0.7))
def test_zeta_odd(x, y, q):
    p = q_params(q)
    z = complex(x, y)
    assert abs(sf.zeta1(-z, p) + sf.zeta1(z, p)) < 1e-13 * (1 + abs(sf.zeta1(z, p)))


@pytest.mark.parametrize("q", [0.0, 0.3, 0.6])
def test_zeta_series_vs_lattice(q):
    p = q_params(q)
    z = GRID[GRID != 0] + 0.3j
    np.testing.assert_allclose(sf.zeta1(z, p), sf.zeta1(z, p, path="lattice"), rtol=1e-12, atol=1e-13)


@pytest.mark.parametrize("q", [0.0, 0.3, 0.6])
def test_zeta_is_log_derivative_of_theta1(q):
    p = q_params(q)
    k, h = p.kappa, 1e-5
    x = np.array([0.4, 1.1, -2.0, 2.7])
    fd = (sf.log_theta_reg(1, k * (x + h), q) - sf.log_theta_reg(1, k * (x - h), q)) / (2 * h)
    np.testing.assert_allclose(sf.zeta1(x, p), fd, atol=1e-8)


def test_zeta_pole_flagged():
    with pytest.raises(sf.SingularInput):
        sf.zeta1(0.0, ModelParams())
    with pytest.raises(sf.SingularInput):
        sf.zeta1(2 * math.pi, ModelParams())


def test_zeta_limits():
    p = q_params(1e-9)
    z = np.array([0.5, 1.3])
    np.testing.assert_allclose(sf.zeta1(z, p), p.kappa / np.tan(p.kappa * z), atol=1e-8)
    np.testing.assert_allclose(sf.zeta1_shifted(z, p), -1j * p.kappa, atol=1e-8)


@pytest.mark.parametrize("q", [0.2, 0.6])
def test_zeta_shifted_vs_series(q):
    p = q_params(q)
    x = GRID
    np.testing.assert_allclose(sf.zeta1_shifted(x, p), sf.zeta1(x + 1j * p.delta, p, path="lattice"),
                               rtol=1e-11, atol=1e-12)


def test_wp_q0():
    p = q_params(0.0)
    x = np.array([0.3, 1.0, 2.5])
    np.testing.assert_allclose(sf.wp1_reg(x, 0.0, False, p), p.kappa ** 2 / np.sin(p.kappa * x) ** 2, rtol=1e-14)


def test_wp_shifted_attractive():
    p = q_params(0.4)
    x = np.linspace(-0.3, 0.3, 7)
    v = sf.wp1_reg(x, 0.0, True, p)
    assert np.all(np.isfinite(v)) and np.all(v < 0)


@pytest.mark.parametrize("shifted", [False, True])
@pytest.mark.parametrize("q,eps", [(0.3, 0.1), (0.6, 0.05)])
def test_wp_matches_finite_differences(shifted, q, eps):
    p = q_params(q)
    x = np.array([0.4, 1.5, -2.2])
    a = sf.wp1_reg(x, eps, shifted, p)
    b = sf.wp1_reg(x, eps, shifted, p, path="fd", h=1e-2 * eps)
    assert np.max(np.abs(a - b)) < 1e-7 * (1 + np.max(np.abs(a)))


def test_wp_pole_flagged():
    with pytest.raises(sf.SingularInput):
        sf.wp1_reg(0.0, 0.0, False, ModelParams())


def test_sgn_zero_and_odd():
    p = q_params(0.3)
    assert sf.sgn_reg(0.0, 0.2, p) == 0.0
    np.testing.assert_allclose(sf.sgn_reg(-GRID, 0.2, p), -sf.sgn_reg(GRID, 0.2, p), atol=1e-15)


@pytest.mark.parametrize("eps", [0.05, 0.3])
def test_sgn_log_vs_series(eps):
    p = ModelParams(ell=1.0)
    x = np.linspace(-1, 1, 33)
    np.testing.assert_allclose(sf.sgn_reg(x, eps, p), sf.sgn_reg(x, eps, p, path="series"), atol=1e-12)


def test_sgn_derivative_is_twice_delta():
    p = ModelParams()
    eps, h = 0.3, 1e-4
    x = GRID
    fd = (sf.sgn_reg(x + h, eps, p) - sf.sgn_reg(x - h, eps, p)) / (2 * h)
    np.testing.assert_allclose(fd, 2 * sf.dirac_reg(x, eps, p), atol=1e-8)


def test_sgn_approaches_sign():
    p = ModelParams()
    assert abs(sf.sgn_reg(1.0, 1e-4, p) - 1) < 1e-3
    assert abs(sf.sgn_reg(-1.0, 1e-4, p) + 1) < 1e-3


def test_eps_must_be_positive():
    for fn in (sf.dirac_reg, sf.sgn_reg):
        with pytest.raises(ValueError):
            fn(0.3, 0.0, ModelParams())


def test_dirac_closed_vs_series_and_normalized():
    p = q_params(0.2)
    eps = 0.2
    x = np.linspace(-p.ell, p.ell, 512, endpoint=False)
    np.testing.assert_allclose(sf.dirac_reg(x, eps, p), sf.dirac_reg(x, eps, p, path="series"), atol=1e-13)
    integral = sf.dirac_reg(x, eps, p).sum() * 2 * p.ell / x.size
    assert abs(integral - 1) < 1e-12


@pytest.mark.parametrize("q", [0.0, 0.4])
def test_Delta_sum(q):
    p = q_params(q)
    eps = 0.15
    s = sf.Delta_pm(1, GRID, eps, p) + sf.Delta_pm(-1, GRID, eps, p)
    assert np.max(np.abs(s - 2 * math.pi * sf.dirac_reg(GRID, eps, p))) < 1e-12


def test_delta_pm_closed_vs_series():
    p = q_params(0.3)
    for s in (1, -1):
        np.testing.assert_allclose(sf.delta_pm(s, GRID, 0.2, p), sf.delta_pm(s, GRID, 0.2, p, path="series"),
                                   atol=1e-13)


def test_Ct_vanishes_at_q0():
    assert np.all(sf.Ct_fun(GRID, 0.2, q_params(0.0)) == 0)


@given(x=st.floats(-3.0, 3.0), eps=st.floats(0.02, 1.0), q=st.floats(0.0, 0.7))
def test_exp_identities(x, eps, q):
    p = q_params(q)
    k = p.kappa
    lhs = np.exp(-1j * k * x - sf.C_fun(x, eps, p))
    assert abs(lhs - sf.theta_reg(1, k * x, q, k * eps)) < 1e-11
    lhs_t = np.exp(-sf.Ct_fun(x, eps, p))
    assert abs(lhs_t - sf.theta_reg(4, k * x, q, k * eps)) < 1e-11


def test_C_series_vs_modes():
    p = q_params(0.4)
    np.testing.assert_allclose(sf.C_fun(GRID, 0.2, p), sf.C_fun(GRID, 0.2, p, path="modes"), atol=1e-12)


@pytest.mark.parametrize("name", ["sgn", "dirac", "j", "jt", "C", "Ct", "wp", "wp_shift", "zeta_shift"])
def test_periodicity(name):
    p = q_params(0.3)
    eps = 0.2
    fns = {
        "sgn": lambda x: sf.sgn_reg(x, eps, p) - x / p.ell,
        "dirac": lambda x: sf.dirac_reg(x, eps, p),
        "j": lambda x: sf.j_fun(x, eps, p),
        "jt": lambda x: sf.jt_fun(x, eps, p),
        "C": lambda x: sf.C_fun(x, eps, p),
        "Ct": lambda x: sf.Ct_fun(x, eps, p),
        "wp": lambda x: sf.wp1_reg(x, eps, False, p),
        "wp_shift": lambda x: sf.wp1_reg(x, eps, True, p),
        "zeta_shift": lambda x: sf.zeta1_shifted(x, p),
    }
    f = fns[name]
    x = np.linspace(-2.5, 2.5, 11)
    assert np.max(np.abs(f(x + 2 * p.ell) - f(x))) < 1e-12 * (1 + np.max(np.abs(f(x))))
