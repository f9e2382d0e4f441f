import math

import numpy as np
import pytest
import scipy.linalg
from hypothesis import given, strategies as st

from cftlab import ncilw, transforms as tr
from cftlab.fock import FockBasis
from cftlab.ncilw import FieldPair, Spectral, integrate, preset_initial, rhs
from cftlab.params import ModelParams, Truncation


@pytest.fixture
def pde_params():
    return ModelParams(ell=2 * math.pi, delta=1.0)


def test_rhs_zero(pde_params):
    out = rhs(preset_initial("zero", 32, pde_params.ell), pde_params)
    assert np.all(out.u == 0) and np.all(out.v == 0)


def test_field_pair_shape_check():
    with pytest.raises(ValueError):
        FieldPair(np.zeros(8), np.zeros(4))
    with pytest.raises(ValueError):
        preset_initial("nope", 8, 1.0)


def test_benjamin_ono_limit():
    p = ModelParams(ell=math.pi, delta=40.0)
    n = 64
    x = tr.grid(n, p.ell)
    u = 0.3 * np.cos(x) + 0.1 * np.sin(2 * x)
    out = rhs(FieldPair(u, np.zeros(n)), p)
    ux = tr.derivative(u, p.ell)
    uxx = tr.derivative(u, p.ell, 2)
    hilbert = tr.from_modes(1j * np.sign(tr.mode_numbers(n)) * tr.to_modes(uxx)).real
    expect = -2 * u * ux - 0.5 * p.g * hilbert
    assert np.max(np.abs(out.u - expect)) < 1e-12
    assert np.max(np.abs(out.v)) < 1e-12


def test_rhs_matches_direct_formula(pde_params, rng):
    p = pde_params
    n = 64
    coeffs = np.zeros(n, complex)
    coeffs[1:5] = rng.normal(size=4) + 1j * rng.normal(size=4)
    coeffs[-4:] = coeffs[1:5][::-1].conj()
    u = tr.from_modes(coeffs).real
    v = np.roll(u, 7) * 0.5
    out = rhs(FieldPair(u, v), p)
    d = lambda f, o=1: tr.derivative(f, p.ell, o)
    T = lambda f: tr.apply_T(f, p)
    Tt = lambda f: tr.apply_Tt(f, p).real
    g = p.g
    eu = -2 * u * d(u) - g / 2 * (T(d(u, 2)) + Tt(d(v, 2)))
    ev = 2 * v * d(v) + g / 2 * (T(d(v, 2)) + Tt(d(u, 2)))
    assert np.max(np.abs(out.u - eu)) < 1e-10 and np.max(np.abs(out.v - ev)) < 1e-10


@pytest.mark.parametrize("mode", [1, 3])
def test_linear_dispersion(pde_params, mode):
    p = pde_params
    n, a, T = 32, 1e-7, 0.3
    x = tr.grid(n, p.ell)
    k = 2 * p.kappa * mode
    state = FieldPair(a * np.cos(k * x), np.zeros(n))
    out = integrate(state, 1e-3, int(T / 1e-3), p, "IMEX", log_every=1000).state
    h = 2 * mode * p.kappa * p.delta
    A = 0.5 * p.g * k * k * np.array([[1 / math.tanh(h), 1 / math.sinh(h)],
                                      [-1 / math.sinh(h), -1 / math.tanh(h)]])
    # on e^{ikx} the system is d/dt (uh, vh) = i A (uh, vh); eigenfrequencies +-(g/2) k^2
    w = np.sort(np.linalg.eigvals(A).real)
    assert w == pytest.approx([-0.5 * p.g * k * k, 0.5 * p.g * k * k], rel=1e-12)
    prop = scipy.linalg.expm(1j * A * T)
    uh = prop @ np.array([a / 2, 0])
    expect_u = 2 * (uh[0] * np.exp(1j * k * x)).real
    expect_v = 2 * (uh[1] * np.exp(1j * k * x)).real
    assert np.max(np.abs(out.u - expect_u)) < 1e-6 * a
    assert np.max(np.abs(out.v - expect_v)) < 1e-6 * a


def test_uncoupled_dispersion_at_large_delta():
    p = ModelParams(ell=2 * math.pi, delta=60.0)
    k = 2 * p.kappa * 2
    A = ncilw.Spectral(16, p)
    uh = np.zeros(9, complex)
    uh[2] = 1.0
    du, _ = A.linear(uh, np.zeros(9))
    assert du[2] / 1j == pytest.approx(0.5 * p.g * k * k / math.tanh(2 * 2 * p.kappa * p.delta), rel=1e-12)


def test_conservation_short_run(pde_params):
    s0 = preset_initial("waves", 64, pde_params.ell, amplitude=3.0)
    tr_ = integrate(s0, 1e-3, 200, pde_params)
    assert tr_.drift("mass_u") < 1e-10 and tr_.drift("mass_v") < 1e-10
    assert tr_.drift("momentum") < 1e-8 and tr_.drift("hamiltonian") < 1e-8
    assert len(tr_.times) == 201


def test_rk4_order(pde_params):
    s0 = preset_initial("waves", 32, pde_params.ell, amplitude=3.0)
    orders, diffs = ncilw.convergence_order(s0, 0.2, [0.02, 0.01, 0.005, 0.0025], pde_params)
    assert all(abs(o - 4) < 0.15 for o in orders)


def test_imex_agrees_with_rk4(pde_params):
    s0 = preset_initial("bump", 32, pde_params.ell, amplitude=2.0)
    a = integrate(s0, 1e-3, 100, pde_params).state
    b = integrate(s0, 1e-3, 100, pde_params, "IMEX").state
    assert np.max(np.abs(a.u - b.u)) < 1e-9


def test_stability_guard():
    p = ModelParams()
    s0 = preset_initial("waves", 256, p.ell)
    with pytest.raises(ValueError):
        integrate(s0, 1e-3, 1, p)
    with pytest.raises(ValueError):
        integrate(preset_initial("waves", 16, p.ell), 1e-3, 1, p, scheme="Euler")


def test_blowup_detected(pde_params):
    s0 = FieldPair(np.full(16, np.nan), np.zeros(16))
    with pytest.raises(ncilw.BlowUpError):
        integrate(s0, 1e-3, 2, pde_params)


def test_scaling_symmetry(pde_params):
    s, T, dt = 2.0, 0.1, 5e-4
    p = pde_params
    s0 = preset_initial("waves", 32, p.ell, amplitude=2.0)
    slow = integrate(s0, dt, int(round(s * T / dt)), p, "IMEX", g=p.g, log_every=10 ** 6).state
    scaled0 = FieldPair(s * s0.u, s * s0.v)
    fast = integrate(scaled0, dt / s, int(round(s * T / dt)), p, "IMEX", g=s * p.g, log_every=10 ** 6).state
    assert np.max(np.abs(s * slow.u - fast.u)) < 1e-9
    assert np.max(np.abs(s * slow.v - fast.v)) < 1e-9


def test_hamiltonian_special_cases(pde_params):
    p = pde_params
    assert ncilw.hamiltonian_classical(preset_initial("zero", 16, p.ell), p) == 0
    st0 = preset_initial("waves", 64, p.ell)
    h = 2 * p.ell / 64
    expect = 2 / math.pi * ((st0.u ** 3 + st0.v ** 3) / 3).sum() * h
    assert ncilw.hamiltonian_classical(st0, p, g=1.0, hbar=1.0) == pytest.approx(expect, abs=1e-14)


@given(seed=st.integers(0, 10 ** 6))
def test_momentum_and_masses_are_conserved_by_rhs(seed):
    # d/dt of the conserved quantities vanishes at every state
    p = ModelParams(ell=2 * math.pi, delta=0.7)
    rng = np.random.default_rng(seed)
    n = 32
    c = np.zeros(n, complex)
    c[1:6] = rng.normal(size=5) + 1j * rng.normal(size=5)
    c[-5:] = c[1:6][::-1].conj()
    c[0] = rng.normal()
    u = tr.from_modes(c).real
    v = np.roll(u, 5) * 0.7 - 0.2
    d = rhs(FieldPair(u, v), p)
    h = 2 * p.ell / n
    assert abs(d.u.sum() * h) < 1e-11 and abs(d.v.sum() * h) < 1e-11
    assert abs((2 * u * d.u - 2 * v * d.v).sum() * h) < 1e-10


def test_heisenberg_small():
    b = FockBasis(Truncation(4, 6, 1))
    p = ModelParams(delta=0.8)
    rep = ncilw.heisenberg_residual(tr.grid(4, p.ell), 0.0, b, p)
    assert rep.protected_dim > 0 and rep.level == 2
    assert rep.exact < 1e-8 and rep.fd < 1e-6
    assert set(rep.residuals) == {"W2_fd", "W3", "C", "H3"}


def test_protection_level():
    assert ncilw.protection_level(FockBasis(Truncation(4, 6, 0))) == 2
    assert ncilw.protection_level(FockBasis(Truncation(8, 10, 0))) == 2
    assert ncilw.protection_level(FockBasis(Truncation(4, 3, 0))) == -1
