import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from cftlab import fock, hamiltonians as ham
from cftlab.fock import FockBasis
from cftlab.params import ModelParams, Truncation
from cftlab.specfun import dirac_reg, wp1_reg
from cftlab.hamiltonians import ParticleLabel

from conftest import q_params


@pytest.fixture(scope="module")
def basis():
    return FockBasis(Truncation(4, 6, 1))


@pytest.fixture(scope="module")
def p():
    return q_params(0.4, r0=2, s0=1)


def dense(op):
    return op.toarray()


@pytest.mark.parametrize("kind", ["W2+", "W2-", "W3+", "W3-", "C", "H2", "H3"])
def test_hermitian_and_charge_conserving(basis, p, kind):
    ops = {"W2+": lambda: ham.build_W(2, 1, basis, p), "W2-": lambda: ham.build_W(2, -1, basis, p),
           "W3+": lambda: ham.build_W(3, 1, basis, p), "W3-": lambda: ham.build_W(3, -1, basis, p),
           "C": lambda: ham.build_C(basis, p), "H2": lambda: ham.build_H2(basis, p),
           "H3": lambda: ham.build_H3(basis, p)}
    M = dense(ops[kind]())
    assert np.max(np.abs(M - M.conj().T)) < 1e-13 * (1 + np.max(np.abs(M)))
    for r in (1, -1):
        Q = dense(fock.op_Q(r, basis, p))
        assert np.max(np.abs(M @ Q - Q @ M)) == 0


def test_vacuum_annihilated_at_q0(basis):
    p0 = q_params(0.0)
    vac = basis.vacuum()
    for k in (2, 3):
        for r in (1, -1):
            assert np.linalg.norm(ham.build_W(k, r, basis, p0).apply(vac)) == 0


def test_vacuum_image_is_pure_creation(basis, p):
    # normal ordering is relative to Omega, so at q > 0 the b-bilinears leave
    # the pair creators a_{+,-n} a_{-,-n} acting on Omega
    vac = basis.vacuum()
    lev = basis.level_of_flat()
    for k in (2, 3):
        for r in (1, -1):
            out = ham.build_W(k, r, basis, p).apply(vac)
            assert np.linalg.norm(out) > 0.1
            assert np.all(out[lev == 0] == 0)
            assert np.all(out[lev % 2 == 1] == 0)
    assert np.linalg.norm(ham.build_C(basis, p).apply(vac)) == 0


def test_W1_is_charge(basis, p):
    np.testing.assert_array_equal(dense(ham.build_W(1, -1, basis, p)), dense(fock.op_Q(-1, basis, p)))
    with pytest.raises(ValueError):
        ham.build_W(4, 1, basis, p)


def test_C_positive(basis, p):
    C = dense(ham.build_C(basis, p))
    assert np.all(np.diag(C).real >= 0) and np.count_nonzero(C - np.diag(np.diag(C))) == 0


def test_duality(basis, p):
    b3 = ham.H3Builder(basis, p)
    nu = p.nu
    d = fock.SectorOp.combine(basis, [(1.0, b3(nu)), (nu * nu, b3(-1 / nu))])
    assert max(float(abs(ham.sector_matrix(d, mu)).max()) for mu in basis.charges) < 1e-12


@given(nu=st.floats(-3, 3), nup=st.floats(-3, 3))
def test_H3_linear_in_nu(nu, nup):
    b = FockBasis(Truncation(3, 4, 1))
    p = q_params(0.3)
    b3 = ham.H3Builder(b, p)
    pred = fock.SectorOp.combine(b, [(1.0, b3(nup)), ((nu - nup) / 2, b3.W3), ((nup ** 2 - nu ** 2) / 2, b3.C)])
    d = fock.SectorOp.combine(b, [(1.0, b3(nu)), (-1.0, pred)])
    assert max(float(abs(ham.sector_matrix(d, mu)).max()) for mu in b.charges) < 1e-11 * (1 + nu * nu)


@pytest.mark.parametrize("k,r", [(2, 1), (2, -1), (3, 1), (3, -1)])
def test_W_from_chiral_boson_quadrature(basis, p, k, r):
    d = fock.SectorOp.combine(basis, [(1.0, ham.build_W(k, r, basis, p)), (-1.0, ham.W_from_rho(k, r, basis, p))])
    assert max(float(abs(ham.sector_matrix(d, mu)).max()) for mu in basis.charges) < 1e-10


def test_C_from_transforms(basis, p):
    d = fock.SectorOp.combine(basis, [(1.0, ham.build_C(basis, p)), (-1.0, ham.C_from_transforms(basis, p))])
    assert max(float(abs(ham.sector_matrix(d, mu)).max()) for mu in basis.charges) < 1e-9


def test_chiral_boson_hermitian_and_periodic(basis, p):
    for r in (1, -1):
        R = dense(ham.chiral_boson(r, 0.7, 0.2, basis, p))
        assert np.max(np.abs(R - R.conj().T)) < 1e-14
        Rs = dense(ham.chiral_boson(r, 0.7 + 2 * p.ell, 0.2, basis, p))
        assert np.max(np.abs(R - Rs)) < 1e-12


def test_chiral_boson_ccr():
    b = FockBasis(Truncation(6, 6, 1))
    p = ModelParams(ell=1.0, delta=0.5)
    eps, x, xp, h = 0.6, 0.3, -0.25, 1e-3
    cols = b.select(level_max=0)

    def comm(r, rp):
        A = ham.chiral_boson(r, x, eps, b, p)
        B = ham.chiral_boson(rp, xp, eps, b, p)
        return (fock.Product([A, B]) - fock.Product([B, A])).restricted(np.arange(b.dim), cols)

    assert np.max(np.abs(comm(1, -1))) < 1e-13
    ddelta = (-dirac_reg(x + 2 * h - xp, 2 * eps, p) + 8 * dirac_reg(x + h - xp, 2 * eps, p)
              - 8 * dirac_reg(x - h - xp, 2 * eps, p) + dirac_reg(x - 2 * h - xp, 2 * eps, p)) / (12 * h)
    for r in (1, -1):
        target = -2j * math.pi * r * ddelta * np.eye(b.dim)[:, cols]
        assert np.max(np.abs(comm(r, r) - target)) < 1e-8


def test_correction_R_vanishes_with_eps():
    b = FockBasis(Truncation(4, 4, 0))
    p = q_params(0.3, ell=1.0)
    norms = [np.abs(ham.correction_R(1, p.nu, 0.2, e, b, p).terms[0][2]).max() for e in (0.4, 0.2, 0.1, 1e-4)]
    assert norms[0] > norms[1] > norms[2] > norms[3]
    assert norms[3] < 1e-2 * norms[2]


def test_correction_terms_at_q0_are_quadratic():
    p = q_params(0.0)
    terms = ham.correction_terms(1, p.nu, 0.2, 0.3, p, 4)
    assert terms and all(len(m) == 2 for m in terms)
    # direct mode sum for the coefficient of a_{+,-2} a_{+,1}
    K = 2 * p.kappa
    expect = -K * K * np.exp(-1j * K * (2 - 1) * 0.2) * (math.exp(-K * 3 * 0.3) - math.exp(-K * 1 * 0.3))
    assert abs(terms[tuple(sorted([(1, -2), (1, 1)]))] - expect) < 1e-15


def test_correction_vacuum_component_only_creation_pairs():
    b = FockBasis(Truncation(4, 4, 0))
    p = q_params(0.3)
    R = ham.correction_R(-1, p.nu, 0.1, 0.2, b, p)
    out = R.apply(b.vacuum())
    poly = fock.NormalOrderedPoly(b)
    for mono, c in ham.correction_terms(-1, p.nu, 0.1, 0.2, p, b.n_max).items():
        if all(n < 0 for _, n in mono):
            poly.add(mono, c)
    np.testing.assert_allclose(out, fock.osc_op(b, poly.matrix()).apply(b.vacuum()), atol=1e-15)


def test_ecs_single_particle():
    p = ModelParams(ell=1.0)
    f = lambda x: np.sin(3 * x[0])
    val = ham.eCS_apply([ParticleLabel(1)], f, [0.4], 0.1, p)
    assert abs(val - 4.5 * math.sin(1.2)) < 1e-6
    assert ham.ecs_potential([ParticleLabel(1)], [0.4], 0.1, p) == 0


def test_ecs_same_labels_is_elliptic_cs():
    p = q_params(0.3)
    g = p.g
    x = np.array([0.5, -0.4, 1.6])
    labs = [ParticleLabel(1)] * 3
    pot = ham.ecs_potential(labs, x, 0.0, p)
    expect = sum(g * (g - 1) * wp1_reg(x[j] - x[k], 0.0, False, p) for j in range(3) for k in range(j + 1, 3))
    assert abs(pot - expect) < 1e-12


def test_ecs_split_matches_deformed_model():
    p = q_params(0.3)
    g = p.g
    x, xt = np.array([0.5, -0.4]), np.array([1.6])
    labs = [ParticleLabel(1), ParticleLabel(1), ParticleLabel(1, hole=True)]
    pot = ham.ecs_potential(labs, np.concatenate([x, xt]), 0.0, p)
    assert abs(pot - ham.deformed_potential(x, xt, g, p)) < 1e-12


def test_substitution_examples(rng):
    p = q_params(0.4)
    assert ham.substitution_check(1, 1, 0, 0, 2.0, p, rng) < 1e-12
    x, y, g = 0.3, -0.8, 2.5
    lhs = ham.deformed_potential(np.array([x, y + 1j * p.delta]), np.array([]), g, p)
    assert abs(lhs - g * (g - 1) * wp1_reg(x - y, 0.0, True, p)) < 1e-12
    for counts in [(1, 1, 1, 1), (2, 1, 0, 1)]:
        assert ham.substitution_check(*counts, 1.0, p, rng) < 1e-12
        assert abs(ham.generalized_potential({(1, False): [0.1, 0.5], (-1, True): [0.9]}, 1.0, p)) == 0


def test_vacuum_identity_trivial_cases():
    b = FockBasis(Truncation(4, 4, 1))
    p = q_params(0.3)
    H3 = ham.build_H3(b, p)
    assert ham.vacuum_identity(fock.Identity(b), H3) == 0
    from cftlab.vertex import VertexDescriptor, build_vertex
    d = VertexDescriptor.from_modes(mu=(1, 0), alpha={(1, 1): 0.2})
    assert ham.vacuum_identity(build_vertex(d, b, p), H3) == 0


def test_second_quantization_single_anyon():
    b = FockBasis(Truncation(12, 12, 2))
    p = ModelParams(ell=1.0, delta=0.5, r0=2, s0=1)
    for lab in (ParticleLabel(1), ParticleLabel(-1, hole=True)):
        rep = ham.second_quantization_check([lab], [0.3], 0.25, b, p)
        assert rep.residual / max(rep.scale, 1.0) < 1e-5
        assert rep.psi_norm > 0
