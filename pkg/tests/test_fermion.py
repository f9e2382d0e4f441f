import itertools
import math

import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, strategies as st

from cftlab import fermion
from cftlab.fermion import FermionBasis, anticommutator, build_WF, op_psi
from cftlab.fock import FockBasis, partition_counts
from cftlab.params import ModelParams, Truncation


@pytest.fixture(scope="module")
def fb():
    return FermionBasis(2)


def test_basis_layout(fb):
    assert fb.dim == 2 ** 8
    ref = fb.reference()
    for r in (1, -1):
        assert fb.charge(r)[ref] == 0 and fb.energy(r)[ref] == 0 and fb.level(r)[ref] == 0
    with pytest.raises(ValueError):
        fb.mode_index(1, 2.5)
    with pytest.raises(ValueError):
        FermionBasis(20)


def test_car_examples(fb):
    I = sp.identity(fb.dim, format="csr")
    a = op_psi(1, 0.5, fb)
    ad = op_psi(1, 0.5, fb, dagger=True)
    assert abs(anticommutator(a, ad) - I).max() == 0
    assert anticommutator(a, op_psi(1, 1.5, fb)).nnz == 0 or abs(anticommutator(a, op_psi(1, 1.5, fb))).max() == 0
    assert abs(anticommutator(a, op_psi(-1, 0.5, fb, dagger=True))).max() == 0


mode = st.tuples(st.sampled_from([1, -1]), st.sampled_from([-1.5, -0.5, 0.5, 1.5]))


@given(m1=mode, m2=mode, d1=st.booleans(), d2=st.booleans())
def test_car_all_pairs(m1, m2, d1, d2):
    fb = FermionBasis(2)
    A = op_psi(*m1, fb, dagger=d1)
    B = op_psi(*m2, fb, dagger=d2)
    ac = anticommutator(A, B).toarray()
    expect = np.eye(fb.dim) if (m1 == m2 and d1 != d2) else 0
    assert np.max(np.abs(ac - expect)) == 0


def test_psi_adjoint(fb):
    a = op_psi(-1, -1.5, fb)
    assert abs(a.T.conj() - op_psi(-1, -1.5, fb, dagger=True)).max() == 0


def test_WF1_is_charge(fb):
    p = ModelParams()
    for r in (1, -1):
        np.testing.assert_array_equal(build_WF(1, r, fb, p).diagonal(), fb.charge(r))
    with pytest.raises(ValueError):
        build_WF(4, 1, fb, p)


def test_WF2_is_energy(fb):
    p = ModelParams(ell=1.7)
    for r in (1, -1):
        np.testing.assert_allclose(build_WF(2, r, fb, p).diagonal(), 2 * p.kappa * fb.energy(r), atol=1e-14)


def test_WF3_enumeration():
    p = ModelParams(ell=1.3)
    fb = FermionBasis(2, chiralities=(1,))
    d = build_WF(3, 1, fb, p).diagonal()
    for s in range(fb.dim):
        occ = {k for j, (_, k) in enumerate(fb.modes) if (s >> j) & 1}
        val = sum((2 * p.kappa * k) ** 2 for k in occ if k > 0)
        val -= sum((2 * p.kappa * k) ** 2 for k in (-1.5, -0.5) if k not in occ)
        assert abs(d[s] - val) < 1e-13


def test_level_is_nonnegative_integer():
    fb = FermionBasis(4, chiralities=(1,))
    lev = fb.energy(1) - 0.5 * fb.charge(1) ** 2
    assert np.all(np.abs(lev - np.rint(lev)) < 1e-12) and np.all(lev >= 0)


@pytest.mark.parametrize("mu_max", [0, 1, 2])
def test_character_identity(mu_max):
    f = fermion.fermion_sector_dims(6 + mu_max, 6, mu_max)
    b = fermion.boson_sector_dims(6, mu_max)
    assert f == b
    assert [f[(0, L)] for L in range(7)] == [1, 1, 2, 3, 5, 7, 11]


def test_sector_dims_window_guard():
    with pytest.raises(ValueError):
        fermion.fermion_sector_dims(3, 4, 1)


def test_boson_side_partition_counts():
    fb = FockBasis(Truncation(6, 6, 0))
    one = partition_counts(6)
    for L in range(7):
        assert np.sum((fb.part_level[fb.osc_ip] == L) & (fb.part_level[fb.osc_im] == 0)) == one[L]


@pytest.mark.parametrize("r0,s0", [(1, 1), (2, 1)])
def test_h2_spectra(r0, s0):
    p = ModelParams(delta=math.inf, r0=r0, s0=s0)
    cmp_ = fermion.compare_h2_spectra(p, level_max=4, mu_max=1)
    assert cmp_.dims_match and cmp_.passed
    assert all(nb == nf for nb, nf, _ in cmp_.sectors.values())


def test_h2_spectrum_needs_q0():
    with pytest.raises(ValueError):
        fermion.compare_h2_spectra(ModelParams(delta=1.0))


def test_extrapolation_is_exact_on_polynomials():
    eps = [0.4, 0.2, 0.1, 0.05]
    vals = [np.array([[2.0 + 3 * e - e ** 3]]) for e in eps]
    assert abs(fermion.extrapolate_eps(vals, eps)[0, 0] - 2.0) < 1e-12


@pytest.fixture(scope="module")
def split_setup():
    b = FockBasis(Truncation(5, 5, 1))
    p = ModelParams(ell=1.0, delta=math.inf, r0=1, s0=1)
    return b, p


def test_point_split_q0_exact(split_setup):
    b, p = split_setup
    for r in (1, -1):
        rep = fermion.point_split_check(r, 0.3, b, p, level=2)
        assert rep.protected_dim > 0
        for res, s in zip(rep.residuals, rep.scales):
            assert res / s < 1e-6


def test_point_split_q0_extrapolated(split_setup):
    b, p = split_setup
    ex = fermion.point_split_extrapolated(1, 0.3, b, p, level=2)
    assert ex.passed(1e-4)
