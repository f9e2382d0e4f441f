"""Free fermions on the mode window and point-splitting checks on the boson side.

Modes are half-integers ``k = j + 1/2``.  The reference state fills every
``k < 0`` and leaves every ``k > 0`` empty.  A window of ``n_modes`` modes on
each side of zero keeps occupations explicit; modes further out keep their
reference occupation, which contributes the same sign to every state and
is dropped.

The boson side uses the composite fermion
``psi_r(x; eps) = phi_{r,-1}(x; eps/2)/sqrt(2 ell)`` and expands
``:psi_r^dagger(x) psi_r(x - a):`` in powers of ``a``.
"""
from __future__ import annotations

import itertools
import math
from collections import Counter
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .fock import FockBasis, partition_counts
from .hamiltonians import LinearField, build_H2, normal_product, rho_bcoefs, sector_matrix
from .params import G_const, ModelParams, c0
from .specfun import theta_rr
from .vertex import VertexDescriptor, build_vertex


# ----------------------------------------------------------------------------
# fermion Fock space on a mode window
# ----------------------------------------------------------------------------

class FermionBasis:
    """All occupation patterns of the modes ``|k| <= n_modes - 1/2`` for the given chiralities.

    Each state is an integer bitmask over the ordered mode list
    ``[(r, k) for r in chiralities for k in (-n_modes+1/2, ..., n_modes-1/2)]``;
    Jordan-Wigner signs count occupied modes earlier in this list.
    """

    def __init__(self, n_modes: int, chiralities=(1, -1), max_states: int = 1 << 22):
        self.n_modes = int(n_modes)
        self.chiralities = tuple(chiralities)
        ks = np.arange(-n_modes, n_modes) + 0.5
        self.modes = [(r, float(k)) for r in self.chiralities for k in ks]
        self.n_bits = len(self.modes)
        if (1 << self.n_bits) > max_states:
            raise ValueError(f"2^{self.n_bits} states exceed max_states={max_states}")
        self.dim = 1 << self.n_bits
        self.states = np.arange(self.dim, dtype=np.int64)
        self._index = {m: i for i, m in enumerate(self.modes)}
        bits = (self.states[:, None] >> np.arange(self.n_bits)) & 1
        self.occ = bits.astype(np.int8)
        self._charge = {}
        self._energy = {}
        for r in self.chiralities:
            sel = [i for i, (rr, _) in enumerate(self.modes) if rr == r]
            k = np.array([self.modes[i][1] for i in sel])
            occ = self.occ[:, sel]
            # relative to the reference: particles above zero count +1, holes below zero -1
            self._charge[r] = (occ[:, k > 0].sum(1) - (1 - occ[:, k < 0]).sum(1)).astype(int)
            self._energy[r] = (occ[:, k > 0] @ k[k > 0]) + ((1 - occ[:, k < 0]) @ -k[k < 0])

    def __repr__(self):
        return f"FermionBasis(n_modes={self.n_modes}, chiralities={self.chiralities}, dim={self.dim})"

    def mode_index(self, r: int, k: float) -> int:
        try:
            return self._index[(r, float(k))]
        except KeyError:
            raise ValueError(f"mode ({r}, {k}) outside the window") from None

    def reference(self) -> int:
        """Bitmask of the filled reference state."""
        return sum(1 << i for i, (_, k) in enumerate(self.modes) if k < 0)

    def charge(self, r: int) -> np.ndarray:
        return self._charge[r]

    def energy(self, r: int) -> np.ndarray:
        """``sum`` of ``k`` over particles plus ``|k|`` over holes, for chirality ``r``."""
        return self._energy[r]

    def level(self, r: int) -> np.ndarray:
        """``energy - charge^2/2``; a nonnegative integer."""
        return np.rint(self._energy[r] - 0.5 * self._charge[r] ** 2).astype(int)

    def faithful(self, r: int) -> np.ndarray:
        """States whose sector ``(charge, level)`` is fully represented in the window.

        A sector with charge ``mu`` and level ``L`` needs modes up to
        ``|mu| + L - 1/2``.
        """
        return np.abs(self._charge[r]) + self.level(r) <= self.n_modes


def op_psi(r: int, k: float, fb: FermionBasis, dagger: bool = False) -> sp.csr_matrix:
    """``psi_{r,k}`` (or its adjoint) as a sparse matrix with Jordan-Wigner signs."""
    j = fb.mode_index(r, k)
    occ = fb.occ[:, j].astype(bool)
    src = fb.states[occ != dagger]
    sign = np.where(fb.occ[src, :j].sum(1) % 2, -1.0, 1.0)
    dst = src ^ (1 << j)
    return sp.csr_matrix((sign, (dst, src)), shape=(fb.dim, fb.dim))


def anticommutator(a, b):
    return (a @ b + b @ a).tocsr()


def build_WF(k: int, r: int, fb: FermionBasis, params: ModelParams) -> sp.csr_matrix:
    """``W^F_{k,r} = sum_n (2 kappa n)^{k-1} :psi^dagger_{r,n} psi_{r,n}:``, diagonal.

    Normal ordering subtracts the reference expectation, so each particle
    contributes ``(2 kappa n)^{k-1}`` and each hole ``-(2 kappa n)^{k-1}``.
    """
    if k not in (1, 2, 3):
        raise ValueError("k must be 1, 2 or 3")
    sel = [i for i, (rr, _) in enumerate(fb.modes) if rr == r]
    kk = np.array([fb.modes[i][1] for i in sel])
    w = (2 * params.kappa * kk) ** (k - 1)
    occ = fb.occ[:, sel].astype(float)
    ref = (kk < 0).astype(float)
    return sp.diags((occ - ref) @ w, format="csr")


def build_H2F(fb: FermionBasis, params: ModelParams) -> sp.csr_matrix:
    return sum(build_WF(2, r, fb, params) for r in fb.chiralities).tocsr()


# ----------------------------------------------------------------------------
# bosonization at q = 0
# ----------------------------------------------------------------------------

def fermion_sector_dims(n_modes: int, level_max: int, mu_max: int) -> dict:
    """``{(mu, L): count}`` for one chirality, from exhaustive enumeration."""
    if mu_max + level_max > n_modes:
        raise ValueError("window too small for the requested sectors")
    fb = FermionBasis(n_modes, chiralities=(1,))
    mu, lev = fb.charge(1), fb.level(1)
    sel = (np.abs(mu) <= mu_max) & (lev <= level_max)
    counts = Counter(zip(mu[sel].tolist(), lev[sel].tolist()))
    return {(m, L): counts.get((m, L), 0) for m in range(-mu_max, mu_max + 1) for L in range(level_max + 1)}


def boson_sector_dims(level_max: int, mu_max: int) -> dict:
    p = partition_counts(level_max)
    return {(m, L): int(p[L]) for m in range(-mu_max, mu_max + 1) for L in range(level_max + 1)}


@dataclass
class SpectrumComparison:
    """Per-sector comparison of ``H_2`` eigenvalues (boson) and ``H_2^F`` (fermion)."""

    sectors: dict
    max_abs_diff: float
    dims_match: bool

    @property
    def passed(self) -> bool:
        return self.dims_match and self.max_abs_diff < 1e-10


def _multiset_diff(a, b):
    a, b = np.sort(np.asarray(a)), np.sort(np.asarray(b))
    if a.shape != b.shape:
        return math.inf
    return float(np.max(np.abs(a - b))) if a.size else 0.0


def compare_h2_spectra(params: ModelParams, level_max: int = 6, mu_max: int = 1) -> SpectrumComparison:
    """Sector-wise ``H_2`` versus ``G^2 H_2^F - kappa(1/nu0^2 - 1) sum Q_r^2``.

    The fermion charge of a sector equals the boson ``mu_r`` only when
    ``q = 0`` (then ``G = 1``), so other parameters are rejected.
    Sectors are labelled by ``(mu_+, mu_-)`` and total level ``L <= level_max``.
    Boson eigenvalues come from the sector matrix of ``H_2`` on the truncated
    Fock space; fermion eigenvalues from exhaustive enumeration of each
    chirality on a window wide enough for every sector compared.
    """
    if params.q > 0:
        raise ValueError("spectrum comparison needs q = 0 (delta = inf)")
    n_modes = level_max + mu_max
    one = FermionBasis(n_modes, chiralities=(1,))
    mu1, lev1 = one.charge(1), one.level(1)
    e_one = 2 * params.kappa * one.energy(1)
    G2 = G_const(params) ** 2
    nu0 = params.nu0
    basis = FockBasis(params.trunc.__class__(n_max=max(level_max, 1), l_max=level_max, mu_max=mu_max))
    H2 = build_H2(basis, params)
    out, worst, dims_ok = {}, 0.0, True
    for mp, mm in itertools.product(range(-mu_max, mu_max + 1), repeat=2):
        mat = sector_matrix(H2, (mp, mm)).toarray()
        for L in range(level_max + 1):
            rows = np.nonzero(basis.osc_level == L)[0]
            bos = np.linalg.eigvalsh(mat[np.ix_(rows, rows)]) if len(rows) else np.zeros(0)
            fer = []
            for Lp in range(L + 1):
                ep = e_one[(mu1 == mp) & (lev1 == Lp)]
                em = e_one[(mu1 == mm) & (lev1 == L - Lp)]
                fer.extend((ep[:, None] + em[None, :]).ravel())
            fer = G2 * np.asarray(fer) - params.kappa * (1 / nu0 ** 2 - 1) * nu0 ** 2 * (mp ** 2 + mm ** 2)
            d = _multiset_diff(bos, fer)
            dims_ok &= len(bos) == len(fer)
            worst = max(worst, d)
            out[(mp, mm, L)] = (len(bos), len(fer), d)
    return SpectrumComparison(out, worst, dims_ok)


# ----------------------------------------------------------------------------
# point splitting on the boson side
# ----------------------------------------------------------------------------

def split_descriptor(r: int, x: float, a: float, eps: float, params: ModelParams, n_modes: int) -> VertexDescriptor:
    """Descriptor of ``:exp(i(-2 kappa b_{r,0} r a + K_r(x-a; eps/2) - K_r(x; eps/2))):``."""
    k = params.kappa
    i = 0 if r > 0 else 1
    n = np.arange(1, n_modes + 1)
    damp = np.exp(-k * n * eps)

    def coef(m):
        # coefficient of b_{r,m} in i (K(x-a) - K(x)); descriptor entries are this divided by i
        return (np.exp(2j * k * r * m * (x - a)) - np.exp(2j * k * r * m * x)) / m

    ap = np.zeros((2, n_modes), complex)
    am = np.zeros((2, n_modes), complex)
    ap[i] = coef(-n) * damp / 1j
    am[i] = coef(n) * damp / 1j
    a0 = np.zeros(2, complex)
    a0[i] = -2 * k * r * a / params.nu0
    return VertexDescriptor((0, 0), a0, ap, am)


def split_operator(r, x, a, eps, basis: FockBasis, params: ModelParams, rows, cols) -> np.ndarray:
    """Restricted matrix of ``(V(a) - I)/(2 ell theta~_1(kappa r a; kappa eps))``."""
    V = build_vertex(split_descriptor(r, x, a, eps, params, basis.n_max), basis, params)
    m = V.restricted(rows, cols)
    eye = (rows[:, None] == cols[None, :]).astype(complex)
    th = complex(theta_rr(r, r, a, eps, params))
    return (m - eye) / (2 * params.ell * th)


def point_split_targets(r: int, x: float, basis: FockBasis, params: ModelParams, rows, cols):
    """Restricted matrices of the ``a^0``, ``a^1``, ``a^2`` coefficients predicted by the expansion.

    With ``rc = rho_r(x) + 2 kappa (1/nu0 - 1) Q_r`` (all at ``eps = 0``):
    ``rc/(2 pi G^2)``, ``-(i r/2)(:rc^2: - i r rc')/(2 pi G^2)`` and
    ``-(1/6)(:rc^3: - 3 i r :rc rc': - rc'' - 3 c0 rc)/(2 pi G^2)``.
    """
    N = basis.n_max
    K = 2 * params.kappa
    fld = [LinearField.from_b(rho_bcoefs(r, x, 0.0, params, N, d), params,
                              {r: K} if d == 0 else {}) for d in range(3)]
    rc, rc1, rc2 = fld
    pref = 1 / (2 * math.pi * G_const(params) ** 2)
    c = c0(params)

    def mat(op):
        return op.restricted(rows, cols)

    m_rc, m_rc1, m_rc2 = mat(rc.op(basis)), mat(rc1.op(basis)), mat(rc2.op(basis))
    m_rc_sq = mat(normal_product([rc, rc], basis))
    m_rc_cu = mat(normal_product([rc, rc, rc], basis))
    m_rc_rc1 = mat(normal_product([rc, rc1], basis))
    A0 = pref * m_rc
    A1 = -0.5j * r * pref * (m_rc_sq - 1j * r * m_rc1)
    A2 = -pref / 6 * (m_rc_cu - 3j * r * m_rc_rc1 - m_rc2 - 3 * c * m_rc)
    return [A0, A1, A2]


@dataclass
class PointSplitReport:
    coefficients: list
    targets: list
    residuals: list
    scales: list
    a_nodes: np.ndarray
    eps: float
    protected_dim: int


def point_split_check(r: int, x: float, basis: FockBasis, params: ModelParams, eps: float = 0.0,
                      a0: float | None = None, n_nodes: int = 4, level: int | None = None,
                      mu_max: int | None = None) -> PointSplitReport:
    """Fit ``(V(a) - I)/(2 ell theta~_1)`` in powers of ``a`` and compare with the predicted coefficients.

    Nodes are ``+-a0 2^{-j}`` for ``j < n_nodes`` (default ``a0 = 1e-2 ell``);
    the polynomial through all ``2 n_nodes`` nodes gives the coefficients.
    At ``eps = 0`` every mode sum is finite in the truncated space, so the
    expansion is exact there.  Rows and columns are states of level
    ``<= level`` (default ``l_max``) and ``|mu| <= mu_max`` (default 1).
    """
    a0 = 1e-2 * params.ell if a0 is None else a0
    level = basis.l_max if level is None else level
    mu_max = 1 if mu_max is None else mu_max
    idx = basis.select(level_max=level, mu_max=mu_max)
    j = np.arange(n_nodes)
    nodes = np.concatenate([a0 * 2.0 ** -j, -a0 * 2.0 ** -j])
    vals = np.stack([split_operator(r, x, a, eps, basis, params, idx, idx) for a in nodes])
    V = np.vander(nodes, len(nodes), increasing=True)
    coef = np.linalg.solve(V, vals.reshape(len(nodes), -1)).reshape(vals.shape)
    targets = point_split_targets(r, x, basis, params, idx, idx)
    res = [float(np.max(np.abs(coef[k] - targets[k]))) for k in range(3)]
    scales = [float(np.max(np.abs(t))) for t in targets]
    return PointSplitReport([coef[k] for k in range(3)], targets, res, scales, nodes, eps, len(idx))


def extrapolate_eps(values, eps_list) -> np.ndarray:
    """Richardson extrapolation to ``eps = 0`` assuming an expansion in integer powers of ``eps``."""
    eps_list = np.asarray(eps_list, dtype=float)
    V = np.vander(eps_list, len(eps_list), increasing=True)
    vals = np.asarray(values)
    sol = np.linalg.solve(V, vals.reshape(len(eps_list), -1))
    return sol[0].reshape(vals.shape[1:])


@dataclass
class ExtrapolatedSplit:
    """Coefficients fitted at several ``eps > 0`` and extrapolated to ``eps = 0``."""

    eps: list
    coefficients: list
    targets: list
    rel_residuals: list

    def passed(self, tol: float = 1e-4) -> bool:
        return max(self.rel_residuals) < tol


def point_split_extrapolated(r: int, x: float, basis: FockBasis, params: ModelParams,
                             a0: float | None = None, eps_fracs=(0.04, 0.02, 0.01, 0.005),
                             n_nodes: int = 4, level: int | None = None,
                             mu_max: int | None = None) -> ExtrapolatedSplit:
    """Point-splitting coefficients from regularized operators, extrapolated in ``eps``.

    For ``eps > 0`` the quotient vanishes at ``a = 0`` and is analytic only for
    ``|a|`` up to about ``eps``, so the ``a``-fit uses nodes much larger than
    ``eps``: ``eps_j = eps_fracs[j] * a_min`` with ``a_min`` the smallest node.
    The fitted coefficients are smooth in ``eps`` and Richardson extrapolation
    removes the leading corrections.  Default ``a0 = 5e-2 ell``.
    """
    a0 = 5e-2 * params.ell if a0 is None else a0
    a_min = a0 * 2.0 ** -(n_nodes - 1)
    eps_list = [f * a_min for f in eps_fracs]
    reps = [point_split_check(r, x, basis, params, eps=e, a0=a0, n_nodes=n_nodes, level=level,
                              mu_max=mu_max) for e in eps_list]
    targets = reps[0].targets
    coefs = [extrapolate_eps([rep.coefficients[k] for rep in reps], eps_list) for k in range(3)]
    rel = [float(np.max(np.abs(c - t)) / max(np.max(np.abs(t)), 1e-300)) for c, t in zip(coefs, targets)]
    return ExtrapolatedSplit(eps_list, coefs, targets, rel)
