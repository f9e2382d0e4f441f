import math
import warnings

import numpy as np
import pytest
from hypothesis import given, strategies as st

from cftlab import transforms as tr
from cftlab.params import ModelParams, bogo_arrays

from conftest import q_params


def band_limited(rng, n_grid, ell, n_modes=6, mean=0.0):
    coeffs = np.zeros(n_grid, dtype=complex)
    n = np.arange(1, n_modes + 1)
    c = rng.normal(size=n_modes) + 1j * rng.normal(size=n_modes)
    coeffs[n] = c
    coeffs[-n] = c.conj()
    coeffs[0] = mean
    return tr.PeriodicField.from_coeffs(coeffs, ell)


def test_field_roundtrip(rng):
    f = band_limited(rng, 64, 1.0)
    g = tr.PeriodicField.from_coeffs(f.coeffs, 1.0)
    np.testing.assert_allclose(f.samples, g.samples, atol=1e-14)
    n = tr.mode_numbers(64)
    np.testing.assert_allclose(f.coeffs[(-n) % 64], f.coeffs.conj(), atol=1e-14)


def test_grid_must_be_power_of_two():
    with pytest.raises(ValueError):
        tr.PeriodicField(np.zeros(12))


def test_coefficient_convention():
    ell = 2.0
    x = tr.grid(32, ell)
    k = math.pi / (2 * ell)
    fh = tr.to_modes(np.exp(2j * k * 3 * x))
    assert abs(fh[3] - 1) < 1e-14
    assert np.sum(np.abs(fh)) - 1 < 1e-13


def test_T_of_constant_is_zero():
    f = tr.PeriodicField(np.full(32, 2.5))
    assert np.max(np.abs(tr.apply_T(f, ModelParams()).samples)) < 1e-15


@pytest.mark.parametrize("q", [0.1, 0.5])
def test_T_and_Tt_on_sine(q):
    p = q_params(q)
    k = p.kappa
    x = tr.grid(64, p.ell)
    f = np.sin(2 * k * x)
    h = 2 * k * p.delta
    np.testing.assert_allclose(tr.apply_T(f, p), np.cos(2 * k * x) / math.tanh(h), atol=1e-13)
    np.testing.assert_allclose(tr.apply_Tt(f, p).real, np.cos(2 * k * x) / math.sinh(h), atol=1e-13)


@pytest.mark.parametrize("q", [0.1, 0.5])
def test_sine_against_quadrature_oracles(q):
    p = q_params(q)
    k = p.kappa
    f = lambda y: np.sin(2 * k * y)
    x = np.array([-1.1, 0.3, 2.0])
    v, err = tr.pv_oracle_T(f, x, p)
    np.testing.assert_allclose(v, np.cos(2 * k * x) / math.tanh(2 * k * p.delta), atol=1e-8)
    vt, errt = tr.quad_oracle_Tt(f, x, p)
    np.testing.assert_allclose(vt, np.cos(2 * k * x) / math.sinh(2 * k * p.delta), atol=1e-8)
    assert err < 1e-8 and errt < 1e-8


@pytest.mark.parametrize("q", [0.05, 0.4])
def test_multiplier_matches_oracle_on_random_fields(q, rng):
    p = q_params(q)
    f = band_limited(rng, 64, p.ell)
    coeffs = f.coeffs
    n = tr.mode_numbers(64)
    k = p.kappa
    fn = lambda y: (coeffs[None, :] * np.exp(2j * k * np.multiply.outer(y, n))).sum(-1).real
    x = f.x[::8]
    v, _ = tr.pv_oracle_T(fn, x, p)
    assert np.max(np.abs(v - tr.apply_T(f, p).samples[::8])) < 1e-8
    vt, _ = tr.quad_oracle_Tt(fn, x, p)
    assert np.max(np.abs(vt.real - tr.apply_Tt(f, p).samples[::8].real)) < 1e-8


def test_oracle_parity_on_even_function():
    p = q_params(0.3)
    v, err = tr.pv_oracle_T(lambda y: np.cos(y) + np.cos(3 * y), 0.0, p)
    assert abs(v) < 1e-12


def test_oracle_hilbert_kernel_at_q0():
    p = q_params(0.0)
    k = p.kappa
    f = lambda y: np.sin(2 * k * y) + 0.5 * np.cos(4 * k * y)
    x = np.array([0.2, 1.7])
    v, _ = tr.pv_oracle_T(f, x, p)
    np.testing.assert_allclose(v, np.cos(2 * k * x) - 0.5 * np.sin(4 * k * x), atol=1e-10)


def test_hilbert_limit():
    p = q_params(1e-12)
    n = np.arange(-5, 6)
    np.testing.assert_allclose(tr.multiplier_T(n, p), 1j * np.sign(n), atol=1e-12)
    np.testing.assert_allclose(tr.multiplier_Tt(n, p), 0, atol=1e-11)


def test_Tt_nonzero_mean_warns():
    f = tr.PeriodicField(np.ones(16))
    with pytest.warns(RuntimeWarning):
        out = tr.apply_Tt(f, ModelParams())
    np.testing.assert_allclose(out.samples, -1j, atol=1e-15)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        tr.apply_Tt(np.sin(tr.grid(16, math.pi)), ModelParams())


@given(q=st.one_of(st.just(0.0), st.floats(1e-3, 0.9)), n=st.integers(1, 60))
def test_multiplier_hyperbolic_identities(q, n):
    p = q_params(q)
    c, s = bogo_arrays(np.array([n]), q)
    if q > 0:
        h = 2 * n * p.kappa * p.delta
        assert abs(c[0] ** 2 + s[0] ** 2 - 1 / math.tanh(h)) < 1e-14 / math.tanh(h) + 1e-14
        assert abs(2 * c[0] * s[0] - 1 / math.sinh(h)) < 1e-14 * (1 + 1 / math.sinh(h))
    m = tr.multiplier_T(np.array([n, -n]), p)
    assert m[0] == -m[1]


@given(seed=st.integers(0, 2 ** 32 - 1), q=st.floats(0.0, 0.8))
def test_antisymmetry_and_commutation_with_derivative(seed, q):
    rng = np.random.default_rng(seed)
    p = q_params(q)
    f = band_limited(rng, 64, p.ell)
    g = band_limited(rng, 64, p.ell)
    for op in (tr.apply_T, lambda u, pp: tr.apply_Tt(u, pp).real):
        lhs = np.dot(g.samples, op(f.samples, p))
        rhs = -np.dot(op(g.samples, p), f.samples)
        assert abs(lhs - rhs) < 1e-12 * (1 + abs(lhs)) * 64
        a = tr.derivative(op(f.samples, p), p.ell)
        b = op(tr.derivative(f.samples, p.ell), p)
        assert np.max(np.abs(a - b)) < 1e-12 * (1 + np.max(np.abs(a)))
