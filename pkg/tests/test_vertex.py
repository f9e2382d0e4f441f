import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from cftlab import fock, vertex
from cftlab.fock import FockBasis
from cftlab.harness import multiplication_residual, nfold_residual, exchange_residual
from cftlab.params import ModelParams, Truncation
from cftlab.specfun import theta_reg
from cftlab.vertex import (Insertion, VertexDescriptor, anyon, anyon_desc, build_vertex, cocycle_chi,
                           correlator_closed, correlator_cocycle, correlator_fock, exchange_phase,
                           random_descriptor, vertex_adjoint_desc)


@pytest.fixture(scope="module")
def basis():
    return FockBasis(Truncation(8, 10, 2))


@pytest.fixture(scope="module")
def p1():
    return ModelParams(ell=1.0, delta=0.5)


def descriptors(max_modes=3, scale=0.4):
    c = st.complex_numbers(max_magnitude=scale, allow_nan=False, allow_infinity=False)
    mu = st.tuples(st.integers(-1, 1), st.integers(-1, 1))
    arr = st.lists(c, min_size=2 * max_modes, max_size=2 * max_modes).map(
        lambda v: np.array(v, complex).reshape(2, max_modes))
    return st.builds(lambda m, a0, ap, am: VertexDescriptor(m, a0, ap, am),
                     mu, st.lists(c, min_size=2, max_size=2), arr, arr)


@given(d=descriptors())
def test_star_is_involution(d):
    s = d.star().star()
    assert s.mu == d.mu
    np.testing.assert_array_equal(s.ap, d.ap)
    np.testing.assert_array_equal(s.am, d.am)
    np.testing.assert_array_equal(s.alpha0, d.alpha0)


def test_real_random_descriptor_is_real(rng):
    assert random_descriptor(rng, 4, real=True).is_real()
    assert not random_descriptor(rng, 4).is_real()


def test_from_modes_layout():
    d = VertexDescriptor.from_modes(mu=(1, 0), alpha={(1, 2): 3.0, (-1, -1): 1j})
    assert d.n_modes == 2 and d.support() == 2
    assert d.ap[0, 1] == 3.0 and d.am[1, 0] == 1j
    with pytest.raises(ValueError):
        VertexDescriptor.from_modes(alpha={(1, 0): 1.0})


def test_identity_vertex(basis, p1):
    v = build_vertex(VertexDescriptor(), basis, p1)
    np.testing.assert_array_equal(v.restricted(np.arange(200), np.arange(200)), np.eye(200))


def test_modes_outside_truncation_rejected(basis, p1):
    d = VertexDescriptor.from_modes(alpha={(1, basis.n_max + 1): 1.0})
    with pytest.raises(ValueError):
        build_vertex(d, basis, p1)


def test_vacuum_expectation(basis, p1, rng):
    vac = basis.vacuum_blocks()
    for _ in range(6):
        d = random_descriptor(rng, 4)
        out = build_vertex(d, basis, p1).apply_blocks(vac)
        val = out.get((0, 0), np.zeros((basis.dim_osc, 1)))[0, 0]
        expect = 1.0 if d.mu == (0, 0) else 0.0
        assert abs(val - expect) < 1e-14


def test_vertex_adjoint(basis, p1, rng):
    cols = basis.select(level_max=3, mu_max=1)
    rows = basis.select(level_max=3)
    for mu in ((1, 1), (1, 0), (0, -1)):
        d = random_descriptor(rng, 3, decay=1.0)
        d = VertexDescriptor(mu, d.alpha0, d.ap, d.am)
        sign, adj = vertex_adjoint_desc(d)
        lhs = build_vertex(d, basis, p1).H.restricted(rows, cols)
        rhs = sign * build_vertex(adj, basis, p1).restricted(rows, cols)
        assert np.max(np.abs(lhs - rhs)) < 1e-12


def test_cocycle_examples(p1):
    z = VertexDescriptor()
    assert abs(cocycle_chi((0, 1), (1, 0), z, z, p1) + 1) < 1e-15
    assert cocycle_chi((1, 0), (0, 1), z, z, p1) == 1
    a = VertexDescriptor.from_modes(alpha={(1, 1): 0.3, (-1, -2): 0.1j})
    assert cocycle_chi((0, 0), (0, 0), a, z, p1) == 1


@given(d1=descriptors(), d2=descriptors(), d3=descriptors())
def test_cocycle_is_bimultiplicative(d1, d2, d3):
    p = ModelParams(delta=0.7)
    lhs = cocycle_chi((d1 + d2).mu, d3.mu, d1 + d2, d3, p)
    rhs = cocycle_chi(d1.mu, d3.mu, d1, d3, p) * cocycle_chi(d2.mu, d3.mu, d2, d3, p)
    assert abs(lhs - rhs) < 1e-12 * max(1.0, abs(lhs))


@given(d1=descriptors(), d2=descriptors())
def test_commutator_two_paths(d1, d2):
    p = ModelParams(delta=0.4)
    a = vertex.jm_jp_commutator(d1, d2, p, "explicit")
    b = vertex.jm_jp_commutator(d1, d2, p, "modes")
    assert abs(a - b) < 1e-13 * (1 + abs(a))


def test_multiplication_rule_small(basis, p1, rng):
    assert multiplication_residual(basis, p1, rng, n_pairs=3, n_support=3, eps=0.3, col_level=1, row_level=3) < 1e-9


def test_nfold_small(basis, p1):
    nu0 = p1.nu0
    res, dim = nfold_residual(basis, p1, [0.3, -0.2, 0.55], 0.3, [nu0, -nu0, nu0], [1, 1, -1], row_level=3)
    assert dim > 0 and res < 1e-8


def test_anyon_requires_integer_charge_and_positive_eps(basis, p1):
    with pytest.raises(ValueError):
        anyon(1, 0.5, 0.0, 0.3, basis, p1)
    with pytest.raises(ValueError):
        anyon(1, p1.nu, 0.0, 0.0, basis, p1)
    with pytest.raises(ValueError):
        anyon(1, p1.nu, 0.0, 0.01, basis, p1, tail_tol=1e-12)


def test_anyon_descriptor_fields(p1):
    d = anyon_desc(1, p1.nu, 0.2, 0.3, p1, 4)
    assert d.mu == (p1.charge_ratio, 0)
    assert d.alpha0[0] == pytest.approx(-2 * p1.nu * p1.kappa * 0.2)
    n = np.arange(1, 5)
    np.testing.assert_allclose(d.ap[0], p1.nu * np.exp(-2 * p1.kappa * (1j * n * 0.2 + n * 0.3)) / (1j * n))
    assert d.is_real(1e-15) and not np.any(d.ap[1])


def test_anyon_adjoint(basis, p1):
    cols = basis.select(level_max=3, mu_max=0)
    rows = basis.select(level_max=3)
    for r in (1, -1):
        lhs = anyon(r, p1.nu0, 0.3, 0.3, basis, p1).H.restricted(rows, cols)
        rhs = anyon(r, -p1.nu0, 0.3, 0.3, basis, p1).restricted(rows, cols)
        assert np.max(np.abs(lhs - rhs)) < 1e-12


def test_anyon_periodicity(basis, p1):
    cols = basis.select(level_max=3, mu_max=1)
    rows = basis.select(level_max=3)
    for r, nu in ((1, p1.nu0), (-1, p1.nu)):
        shifted = anyon(r, nu, 0.3 + 2 * p1.ell, 0.3, basis, p1)
        base = anyon(r, nu, 0.3, 0.3, basis, p1)
        Q = fock.op_Q(r, basis, p1)
        ph = fock.SectorOp(basis, [(1.0, lambda a, b, f=Q.terms[0][1]: np.exp(-1j * r * math.pi * nu * f(a, b)), None)])
        rhs = fock.Product([ph, base, ph])
        assert np.max(np.abs(shifted.restricted(rows, cols) - rhs.restricted(rows, cols))) < 1e-12


def test_anyon_unitarity(basis, p1):
    cols = basis.select(level_max=2, mu_max=0)
    rows = basis.select(level_max=4)
    for r, nu in ((1, p1.nu0), (-1, -p1.nu)):
        phi = anyon(r, nu, 0.1, 0.5, basis, p1)
        c = vertex.unitarity_constant(phi.desc, p1)
        assert abs(c.imag) < 1e-12 and c.real > 0
        prod = fock.Product([phi.H, phi]).restricted(rows, cols)
        target = c * fock.Identity(basis).restricted(rows, cols)
        assert np.max(np.abs(prod - target)) < 1e-9 * c.real


def test_two_point_function(p1):
    nu = p1.nu
    val = correlator_closed([Insertion(1, nu, 0.3, 0.2), Insertion(1, -nu, -0.1, 0.2)], p1)
    k = p1.kappa
    expect = np.exp(-nu * nu * np.log(theta_reg(1, k * 0.4, p1.q, 2 * k * 0.2, path="log")))
    assert abs(val - expect) < 1e-13 * abs(expect)


def test_charge_selection(basis, p1):
    ins = [Insertion(1, p1.nu, 0.3, 0.3), Insertion(-1, p1.nu, -0.1, 0.3)]
    assert correlator_closed(ins, p1) == 0
    assert correlator_cocycle(ins, p1, 20) == 0
    assert correlator_fock(ins, basis, p1) == 0


def test_four_point_routes_agree(p1):
    nu = p1.nu0
    ins = [Insertion(1, nu, 0.3, 0.25), Insertion(-1, nu, -0.4, 0.25),
           Insertion(1, -nu, -0.1, 0.25), Insertion(-1, -nu, 0.6, 0.25)]
    ex = correlator_closed(ins, p1)
    assert abs(correlator_cocycle(ins, p1, 200) - ex) < 1e-12 * abs(ex)
    b = FockBasis(Truncation(12, 12, 1))
    assert abs(correlator_fock(ins, b, p1) - ex) < 1e-4 * abs(ex)


@pytest.mark.slow
def test_four_point_at_24(p1):
    nu = p1.nu0
    ins = [Insertion(1, nu, 0.3, 0.25), Insertion(-1, nu, -0.4, 0.25),
           Insertion(1, -nu, -0.1, 0.25), Insertion(-1, -nu, 0.6, 0.25)]
    ex = correlator_closed(ins, p1)
    b = FockBasis(Truncation(24, 24, 1))
    assert abs(correlator_fock(ins, b, p1) - ex) < 1e-6 * abs(ex)


def test_exchange_examples():
    pf = ModelParams(r0=1, s0=1)
    dev = [abs(exchange_phase(Insertion(1, -1.0, 0.3, e), Insertion(1, -1.0, -0.2, e), pf, path="closed") + 1)
           for e in (1e-3, 1e-5, 1e-8)]
    assert dev[0] > dev[1] > dev[2] and dev[2] < 1e-6
    p = ModelParams(r0=3, s0=1)
    a, b = Insertion(1, p.nu, 0.3, 0.2), Insertion(-1, p.nu, -0.2, 0.2)
    assert exchange_phase(a, b, p, path="closed") == (-1) ** 9
    p = ModelParams(r0=2, s0=1)
    assert exchange_phase(Insertion(1, p.nu, 0, .2), Insertion(-1, p.nu, 1, .2), p, path="closed") == 1


@given(dx=st.floats(-0.9, 0.9), r=st.sampled_from([1, -1]))
def test_exchange_phase_routes(dx, r):
    p = ModelParams(ell=1.0, delta=0.5)
    a, b = Insertion(r, p.nu, dx, 0.2), Insertion(r, -1 / p.nu, 0.0, 0.3)
    assert abs(exchange_phase(a, b, p) - exchange_phase(a, b, p, path="closed")) < 1e-12


def test_exchange_operator_small(basis, p1):
    res, dim = exchange_residual(basis, p1, Insertion(1, p1.nu0, 0.3, 0.3), Insertion(1, -p1.nu0, -0.25, 0.3),
                                 row_level=3)
    # truncation-limited at this size; the harness check reaches 1e-10 at n_max = l_max = 16
    assert dim > 0 and res < 1e-7


def test_mode_tail_decays():
    p = ModelParams(ell=1.0)
    t = [vertex.mode_tail(0.3, p, n) for n in (8, 16, 24)]
    assert t[0] > t[1] > t[2]
    assert math.log(t[1] * 16 / (t[2] * 24)) == pytest.approx(2 * p.kappa * 0.3 * 8)


def test_protected_residual_norms(basis, p1):
    A = anyon(1, p1.nu0, 0.3, 0.3, basis, p1)
    B = A * 1.0
    assert vertex.protected_residual(A, B, basis, 2, norm="fro") == 0
    C = A * 1.5
    r2 = vertex.protected_residual(A, C, basis, 2, row_level=3)
    rf = vertex.protected_residual(A, C, basis, 2, row_level=3, norm="fro")
    assert 0 < r2 <= rf * (1 + 1e-12)
    assert vertex.protected_residual(A, C, basis, 2, col_mu_max=-1) == 0
