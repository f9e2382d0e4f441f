"""Second-quantized operators W_{k,r}, C, H_2, H_{3,nu}, chiral bosons and the eCS side.

All mode sums are cut at ``basis.n_max``.  Normal ordering ``:...:`` is with
respect to the a-oscillators, so products of b-modes are first expanded into
a-monomials (``fock.NormalOrderedPoly``).  Consequently ``W_{2,r}`` and
``W_{3,r}`` do not annihilate the Fock vacuum when ``q > 0``.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .fock import (FockBasis, LinOp, NormalOrderedPoly, Product, SectorOp, SumOp,
                   b_expansion, expand_b_monomial)
from .params import ModelParams, bogo_arrays, c_eps
from .specfun import wp1_reg, wp_rr
from .transforms import multiplier_T, multiplier_Tt
from .vertex import VertexOp, anyon, jplus_coeffs


# ----------------------------------------------------------------------------
# linear fields
# ----------------------------------------------------------------------------

@dataclass
class LinearField:
    """``sum_r z_r a_{r,0} + sum_{(r,n)} w_{r,n} a_{r,n}`` (``n != 0``)."""

    zero: dict
    modes: dict

    @classmethod
    def from_b(cls, bcoefs: dict, params: ModelParams, zero=None) -> "LinearField":
        modes = {}
        for (r, n), w in bcoefs.items():
            for lab, cb in b_expansion(r, n, params).items():
                modes[lab] = modes.get(lab, 0.0) + w * cb
        return cls(dict(zero or {}), modes)

    def part(self, basis: FockBasis, creation: bool) -> sp.csr_matrix:
        mat = sp.csr_matrix((basis.dim_osc, basis.dim_osc), dtype=complex)
        for (r, n), w in self.modes.items():
            if (n < 0) == creation and w != 0:
                mat = mat + w * basis.osc_a(r, n)
        return mat.tocsr()

    def zero_fn(self):
        zp, zm = self.zero.get(1, 0.0), self.zero.get(-1, 0.0)
        return lambda a, b: zp * a + zm * b

    def op(self, basis: FockBasis) -> SectorOp:
        terms = [(1.0, None, (self.part(basis, True) + self.part(basis, False)).tocsr())]
        if any(v != 0 for v in self.zero.values()):
            terms.append((1.0, self.zero_fn(), None))
        return SectorOp(basis, terms)


def normal_product(fields, basis: FockBasis) -> SectorOp:
    """``:F_1 ... F_k:`` for linear fields.

    Each factor contributes its zero mode, creation part or annihilation part;
    creation parts go left, annihilation parts right, zero modes commute with both.
    """
    parts = [(f.zero_fn(), f.part(basis, True), f.part(basis, False)) for f in fields]
    eye = sp.identity(basis.dim_osc, dtype=complex, format="csr")
    terms = []
    for choice in itertools.product(range(3), repeat=len(fields)):
        zs = [parts[i][0] for i, c in enumerate(choice) if c == 0]
        cre = [parts[i][1] for i, c in enumerate(choice) if c == 1]
        ann = [parts[i][2] for i, c in enumerate(choice) if c == 2]
        mat = eye
        for m in cre + ann:
            mat = mat @ m
        if mat.nnz == 0:
            continue
        fn = None if not zs else (lambda fs: (lambda a, b: np.prod([f(a, b) for f in fs])))(zs)
        terms.append((1.0, fn, mat.tocsr()))
    return SectorOp(basis, terms)


def rho_bcoefs(r: int, x: float, eps: float, params: ModelParams, n_max: int, deriv: int = 0) -> dict:
    """b-mode coefficients of ``d^deriv/dx^deriv rho_r(x; eps)``."""
    k = params.kappa
    out = {}
    for n in range(-n_max, n_max + 1):
        if n == 0:
            continue
        out[(r, n)] = 2 * k * (2j * k * r * n) ** deriv * np.exp(2 * k * (1j * r * n * x - abs(n) * eps))
    return out


def rho_field(r: int, x: float, eps: float, params: ModelParams, n_max: int, deriv: int = 0) -> LinearField:
    zero = {r: 2 * params.kappa * params.nu0} if deriv == 0 else {}
    return LinearField.from_b(rho_bcoefs(r, x, eps, params, n_max, deriv), params, zero)


def chiral_boson(r: int, x: float, eps: float, basis: FockBasis, params: ModelParams,
                 deriv: int = 0) -> SectorOp:
    """``rho_r(x; eps) = 2 kappa Q_r + sum_{n != 0} 2 kappa e^{2 kappa(i r n x - |n| eps)} b_{r,n}``."""
    return rho_field(r, x, eps, params, basis.n_max, deriv).op(basis)


def transformed_rho_x(r_field: int, x: float, eps: float, params: ModelParams, n_max: int,
                      kind: str, deriv: int = 1) -> LinearField:
    """``(T rho_{r}^{(deriv)})(x; eps)`` or ``(T~ ...)`` using the Fourier multipliers.

    The b-mode ``b_{r,n}`` sits at Fourier index ``r n`` of the field, so its
    coefficient picks up the multiplier of that index.
    """
    mult = multiplier_T if kind == "T" else multiplier_Tt
    bc = rho_bcoefs(r_field, x, eps, params, n_max, deriv)
    idx = np.array([r_field * n for (_, n) in bc])
    m = mult(idx, params)
    return LinearField.from_b({lab: w * mm for (lab, w), mm in zip(bc.items(), m)}, params)


# ----------------------------------------------------------------------------
# W, C, H
# ----------------------------------------------------------------------------

def _quad_b_sum(basis: FockBasis, params: ModelParams, r: int) -> sp.csr_matrix:
    """``sum_{n != 0} :b_{r,-n} b_{r,n}:``."""
    poly = NormalOrderedPoly(basis)
    for n in range(1, basis.n_max + 1):
        for s in (n, -n):
            poly.add_b([(r, -s), (r, s)], 1.0, params)
    return poly.matrix()


def _cubic_b_sum(basis: FockBasis, params: ModelParams, r: int) -> sp.csr_matrix:
    """``sum :b_{r,-n} b_{r,-m} b_{r,n+m}:`` over ``n, m, n+m != 0`` within the cutoff."""
    N = basis.n_max
    poly = NormalOrderedPoly(basis)
    cache = {}
    for n in range(-N, N + 1):
        for m in range(-N, N + 1):
            if n == 0 or m == 0 or n + m == 0 or abs(n + m) > N:
                continue
            key = tuple(sorted([-n, -m, n + m]))
            if key not in cache:
                cache[key] = expand_b_monomial([(r, -n), (r, -m), (r, n + m)], params)
            for mono, c in cache[key].items():
                poly.add(mono, c)
    return poly.matrix()


def _Q(r, nu0):
    return (lambda a, b: nu0 * a) if r > 0 else (lambda a, b: nu0 * b)


def build_W(k: int, r: int, basis: FockBasis, params: ModelParams) -> SectorOp:
    """``W_{k,r}`` for ``k = 1, 2, 3``; ``W_{1,r} = Q_r``."""
    K = 2 * params.kappa
    Q = _Q(r, params.nu0)
    if k == 1:
        return SectorOp(basis, [(1.0, Q, None)])
    if k == 2:
        return SectorOp(basis, [(K / 2, None, _quad_b_sum(basis, params, r)),
                                (K / 2, lambda a, b: Q(a, b) ** 2, None)])
    if k == 3:
        return SectorOp(basis, [(K * K / 3, None, _cubic_b_sum(basis, params, r)),
                                (K * K, Q, _quad_b_sum(basis, params, r)),
                                (K * K / 3, lambda a, b: Q(a, b) ** 3, None)])
    raise ValueError("k must be 1, 2 or 3")


def build_C(basis: FockBasis, params: ModelParams) -> SectorOp:
    """``C = (2 kappa)^2 sum_{n >= 1, r} n a_{r,-n} a_{r,n}``, diagonal with entries ``(2k)^2 sum n^2 m_{r,n}``."""
    n = np.arange(1, basis.n_max + 1)
    diag = sum(basis.occupations(r).astype(float) @ (n * n) for r in (1, -1))
    return SectorOp(basis, [((2 * params.kappa) ** 2, None, sp.diags(diag.astype(complex), format="csr"))])


def build_H2(basis: FockBasis, params: ModelParams) -> SectorOp:
    return SectorOp.combine(basis, [(1.0, build_W(2, 1, basis, params)), (1.0, build_W(2, -1, basis, params))])


class H3Builder:
    """Caches ``sum_r W_{3,r}`` and ``C`` so that ``H_{3,nu}`` is cheap for several ``nu``."""

    def __init__(self, basis: FockBasis, params: ModelParams):
        self.basis, self.params = basis, params
        self.W3 = SectorOp.combine(basis, [(1.0, build_W(3, 1, basis, params)),
                                           (1.0, build_W(3, -1, basis, params))])
        self.C = build_C(basis, params)

    def __call__(self, nu: float | None = None) -> SectorOp:
        nu = self.params.nu if nu is None else nu
        return SectorOp.combine(self.basis, [(nu / 2, self.W3), ((1 - nu * nu) / 2, self.C)])


def build_H3(basis: FockBasis, params: ModelParams, nu: float | None = None) -> SectorOp:
    """``H_{3,nu} = (nu sum_r W_{3,r} + (1 - nu^2) C)/2``; ``nu`` defaults to ``params.nu``."""
    return H3Builder(basis, params)(nu)


def sector_matrix(op: SectorOp, mu) -> sp.csr_matrix:
    """Oscillator matrix of a charge-preserving operator in the sector ``mu``."""
    b = op.basis
    out = sp.csr_matrix((b.dim_osc, b.dim_osc), dtype=complex)
    eye = sp.identity(b.dim_osc, dtype=complex, format="csr")
    for w, fn, mat in op.terms:
        f = w if fn is None else w * fn(*mu)
        if f != 0:
            out = out + f * (eye if mat is None else mat)
    return out.tocsr()


# ----------------------------------------------------------------------------
# quadrature representations
# ----------------------------------------------------------------------------

def trapezoid_nodes(params: ModelParams, n_points: int):
    x = -params.ell + 2 * params.ell * np.arange(n_points) / n_points
    return x, 2 * params.ell / n_points


def W_from_rho(k: int, r: int, basis: FockBasis, params: ModelParams, n_points: int | None = None,
               eps: float = 0.0) -> SectorOp:
    """``(1/(2 k pi)) int :rho_r(x; eps)^k: dx`` by the trapezoid rule.

    At ``eps = 0`` the truncated integrand is a trigonometric polynomial of
    degree ``k n_max`` and the rule with more than that many nodes is exact.
    """
    n_points = n_points or k * basis.n_max + 2
    xs, w = trapezoid_nodes(params, n_points)
    ops = []
    for x in xs:
        f = rho_field(r, x, eps, params, basis.n_max)
        ops.append((w / (2 * k * math.pi), normal_product([f] * k, basis)))
    return SectorOp.combine(basis, ops)


def C_from_transforms(basis: FockBasis, params: ModelParams, n_points: int | None = None,
                      eps: float = 0.0) -> SectorOp:
    """``-(1/4pi) int sum_r :rho_r T rho_{r,x} + rho_{-r} T~ rho_{r,x}: dx`` by the trapezoid rule."""
    n_points = n_points or 2 * basis.n_max + 2
    xs, w = trapezoid_nodes(params, n_points)
    ops = []
    for x in xs:
        for r in (1, -1):
            rho_r = rho_field(r, x, eps, params, basis.n_max)
            rho_mr = rho_field(-r, x, eps, params, basis.n_max)
            t = transformed_rho_x(r, x, eps, params, basis.n_max, "T")
            tt = transformed_rho_x(r, x, eps, params, basis.n_max, "Tt")
            ops.append((-w / (4 * math.pi), normal_product([rho_r, t], basis)))
            ops.append((-w / (4 * math.pi), normal_product([rho_mr, tt], basis)))
    return SectorOp.combine(basis, ops)


def _circ_blocks(basis: FockBasis, params: ModelParams, r: int) -> dict:
    """``S_p = sum_{n+m=p} m :b_{r,n} b_{r,m}:`` for every total momentum ``p``, cached on the basis."""
    cache = basis.__dict__.setdefault("_circ_cache", {})
    key = (r, params.q)
    if key not in cache:
        N = basis.n_max
        out = {}
        for p in range(-2 * N, 2 * N + 1):
            poly = NormalOrderedPoly(basis)
            for n in range(max(-N, p - N), min(N, p + N) + 1):
                m = p - n
                if n and m:
                    poly.add_b([(r, n), (r, m)], float(m), params)
            out[p] = poly.matrix()
        cache[key] = out
    return cache[key]


def circ_rho_rhox(r: int, x: float, eps: float, basis: FockBasis, params: ModelParams) -> SectorOp:
    """``:rho_r o rho_{r,x}:(x; eps)`` with the regularized product ``o``.

    The undamped Fourier coefficients of ``rho_r`` are ``2 kappa b_{r,n}`` at
    index ``r n`` and ``2 kappa Q_r`` at index 0; the product damps index
    ``p`` by ``e^{-2 kappa |p| eps}``.
    """
    K = 2 * params.kappa
    N = basis.n_max
    quad = sp.csr_matrix((basis.dim_osc, basis.dim_osc), dtype=complex)
    for p, S in _circ_blocks(basis, params, r).items():
        if S.nnz:
            quad = quad + (K ** 3 * 1j * r * np.exp(1j * K * r * p * x - K * abs(p) * eps)) * S
    lin = {}
    for m in range(-N, N + 1):
        if m:
            lin[(r, m)] = K * K * (1j * K * r * m) * np.exp(1j * K * r * m * x - K * abs(m) * eps)
    linf = LinearField.from_b(lin, params)
    lin_mat = (linf.part(basis, True) + linf.part(basis, False)).tocsr()
    return SectorOp(basis, [(1.0, None, quad.tocsr()), (1.0, _Q(r, params.nu0), lin_mat)])


def heisenberg_rhs(r: int, x: float, eps: float, basis: FockBasis, params: ModelParams,
                   nu: float | None = None, circ: SectorOp | None = None) -> SectorOp:
    """``-nu r :rho_r o rho_{r,x}: - (r/2)(nu^2 - 1)(T rho_{r,xx} + T~ rho_{-r,xx})``."""
    nu = params.nu if nu is None else nu
    circ = circ_rho_rhox(r, x, eps, basis, params) if circ is None else circ
    t = transformed_rho_x(r, x, eps, params, basis.n_max, "T", deriv=2)
    tt = transformed_rho_x(-r, x, eps, params, basis.n_max, "Tt", deriv=2)
    lin = LinearField({}, {lab: t.modes.get(lab, 0) + tt.modes.get(lab, 0)
                           for lab in set(t.modes) | set(tt.modes)})
    return SectorOp.combine(basis, [(-nu * r, circ),
                                    (-0.5 * r * (nu * nu - 1), lin.op(basis))])


# ----------------------------------------------------------------------------
# correction operator R and normal ordering against a vertex operator
# ----------------------------------------------------------------------------

def correction_terms(r: int, nu_eff: float, x: float, eps: float, params: ModelParams, n_max: int,
                     tail: float = 1e-16) -> dict:
    """a-monomial coefficients of ``R_{r,nu}(x; eps)``.

    The dummy sum over ``n`` in the linear part is taken to convergence; the
    b-mode labels are cut at ``n_max``.
    """
    k = params.kappa
    K = 2 * k
    terms = {}

    def add(mono, c):
        key = tuple(sorted(mono))
        terms[key] = terms.get(key, 0.0) + c

    # linear part: nu s_n^2 e^{-2k n eps} summed over all n >= 1
    n_tot = max(n_max, 64)
    if params.q > 0:
        nn = np.arange(1, n_tot + 1)
        _, s = bogo_arrays(nn, params.q)
        m = np.arange(1, n_max + 1)
        N_, M_ = np.meshgrid(nn, m, indexing="ij")
        fac = np.exp(-K * (N_ + M_) * eps) - np.exp(-K * np.abs(N_ - M_) * eps)
        lin = (nu_eff * (s * s * np.exp(-K * nn * eps))[:, None] * fac).sum(0)
        for mi, w in zip(m, lin):
            for lab, cb in b_expansion(r, int(mi), params).items():
                add([lab], K * K * w * np.exp(1j * K * mi * r * x) * cb)
            for lab, cb in b_expansion(r, -int(mi), params).items():
                add([lab], -K * K * w * np.exp(-1j * K * mi * r * x) * cb)
    # quadratic part
    for n in range(1, n_max + 1):
        for m in range(1, n_max + 1):
            fac = math.exp(-K * (n + m) * eps) - math.exp(-K * abs(n - m) * eps)
            if fac == 0:
                continue
            c = -K * K * np.exp(-1j * K * (n - m) * r * x) * fac
            for mono, cb in expand_b_monomial([(r, -n), (r, m)], params).items():
                add(mono, c * cb)
    return terms


def correction_R(r: int, nu_eff: float, x: float, eps: float, basis: FockBasis, params: ModelParams) -> SectorOp:
    poly = NormalOrderedPoly(basis)
    for mono, c in correction_terms(r, nu_eff, x, eps, params, basis.n_max).items():
        poly.add(mono, c)
    return SectorOp(basis, [(1.0, None, poly.matrix())])


def normal_ordered_with_vertex(terms: dict, vop: VertexOp, path: str = "shift",
                               on_vacuum: bool = False) -> LinOp:
    """``:P Phi:`` for a polynomial ``P`` in nonzero a-modes and a vertex operator ``Phi``.

    ``path="direct"`` places the creation part of every monomial left and the
    annihilation part right of ``Phi``.  ``path="shift"`` uses
    ``Phi a_{r,n} = (a_{r,n} - i n B_{r,n}) Phi`` for ``n > 0`` (``B`` the
    ``J+`` coefficient) to move annihilators through ``Phi``, giving a single
    sparse matrix to the left of ``Phi``.  The two agree exactly in the
    untruncated space; after truncation the shift path loses accuracy once
    the annihilators reach above ``l_max``.

    With ``on_vacuum=True`` the result is only valid applied to ``Omega``:
    monomials containing an annihilator are dropped, which is exact.
    """
    basis = vop.basis
    groups = {}
    for mono, c in terms.items():
        if any(n == 0 for _, n in mono):
            raise ValueError("zero modes are not supported here")
        if on_vacuum and any(n > 0 for _, n in mono):
            continue
        cre = tuple(l for l in mono if l[1] < 0)
        ann = tuple(l for l in mono if l[1] > 0)
        groups.setdefault(ann, {})
        groups[ann][cre] = groups[ann].get(cre, 0.0) + c
    if path == "direct":
        ops = []
        for ann, cres in groups.items():
            left = NormalOrderedPoly(basis)
            for cre, c in cres.items():
                left.add(cre, c)
            factors = [SectorOp(basis, [(1.0, None, left.matrix())]), vop]
            if ann:
                right = NormalOrderedPoly(basis)
                right.add(ann, 1.0)
                factors.append(SectorOp(basis, [(1.0, None, right.matrix())]))
            ops.append((1.0, Product(factors)))
        return SumOp(ops)
    if path != "shift":
        raise ValueError(path)
    d = vop.desc.padded(basis.n_max)
    B = jplus_coeffs(d, vop.params)
    lam = {(r, n): 1j * n * B[0 if r > 0 else 1, n - 1]
           for r in (1, -1) for n in range(1, basis.n_max + 1)}
    poly = NormalOrderedPoly(basis)
    for ann, cres in groups.items():
        # expand prod (a_l - lam_l) over the annihilators
        for keep in itertools.product((True, False), repeat=len(ann)):
            kept = tuple(l for l, kf in zip(ann, keep) if kf)
            scal = np.prod([-lam[l] for l, kf in zip(ann, keep) if not kf]) if not all(keep) else 1.0
            for cre, c in cres.items():
                poly.add(cre + kept, c * scal)
    return Product([SectorOp(basis, [(1.0, None, poly.matrix())]), vop])


def rho_prime_terms(r: int, x: float, eps: float, params: ModelParams, n_max: int) -> dict:
    """a-monomial coefficients of ``rho_r'(x; eps)`` (no zero mode)."""
    terms = {}
    for (rr, n), c in rho_bcoefs(r, x, eps, params, n_max, deriv=1).items():
        for lab, cb in b_expansion(rr, n, params).items():
            terms[(lab,)] = terms.get((lab,), 0.0) + c * cb
    return terms


@dataclass
class CommutatorReport:
    """Residuals of the ``W_{k,r'}`` and ``C`` commutators with one anyon.

    ``residuals`` maps a label such as ``"W3,same"`` to the largest entry of
    ``P_rows (lhs - rhs) P_cols``; ``scales`` holds the largest entry of the
    corresponding right side.
    """

    residuals: dict
    scales: dict
    rows: int
    cols: int


def anyon_commutator_check(r: int, nu_eff: float, x: float, eps: float, basis: FockBasis,
                           params: ModelParams, row_level: int | None = None, col_level: int = 0,
                           h: float | None = None) -> CommutatorReport:
    """Compare ``[W_{k,r'}, phi_{r,nu}(x; eps)]`` with the closed right sides.

    Same chirality: ``nu phi``, ``i r phi'`` and
    ``-phi''/nu + i r (nu^2-1) :rho_r' phi: + 2 nu :R phi: + nu^3 c_eps phi``;
    opposite chirality: zero.  Also ``[C, phi] Omega = i r nu :rho_r' phi: Omega``.
    Derivatives in ``x`` use 5-point stencils with step ``h`` (default
    ``2e-3 ell``).  Columns are the charge-neutral states of level
    ``<= col_level``; rows are all states of level ``<= row_level``
    (default ``l_max // 2``).
    """
    h = 2e-3 * params.ell if h is None else h
    row_level = basis.l_max // 2 if row_level is None else row_level
    cols = basis.select(level_max=col_level, mu_max=0)
    rows = basis.select(level_max=row_level)
    k = len(cols)
    B = basis.unit_blocks(cols)

    def phi(xx, state):
        return anyon(r, nu_eff, xx, eps, basis, params).apply_blocks(state)

    def rows_of(d):
        return basis.rows_of_blocks(d, rows, k)

    vop = anyon(r, nu_eff, x, eps, basis, params)
    phiB = vop.apply_blocks(B)
    f = {j: rows_of(phi(x + j * h, B)) for j in (-2, -1, 1, 2)}
    f[0] = rows_of(phiB)
    d1 = (-f[2] + 8 * f[1] - 8 * f[-1] + f[-2]) / (12 * h)
    d2 = (-f[2] + 16 * f[1] - 30 * f[0] + 16 * f[-1] - f[-2]) / (12 * h * h)

    def comm(op):
        return rows_of(op.apply_blocks(phiB)) - rows_of(phi(x, op.apply_blocks(B)))

    rho1 = rows_of(normal_ordered_with_vertex(rho_prime_terms(r, x, eps, params, basis.n_max), vop,
                                              "direct").apply_blocks(B))
    corr = rows_of(normal_ordered_with_vertex(correction_terms(r, nu_eff, x, eps, params, basis.n_max),
                                              vop, "direct").apply_blocks(B))
    nu = nu_eff
    target = {1: nu * f[0], 2: 1j * r * d1,
              3: -d2 / nu + 1j * r * (nu * nu - 1) * rho1 + 2 * nu * corr + nu ** 3 * c_eps(params, eps) * f[0]}
    res, scale = {}, {}
    for kk in (1, 2, 3):
        for rp in (r, -r):
            key = f"W{kk},{'same' if rp == r else 'cross'}"
            lhs = comm(build_W(kk, rp, basis, params))
            tgt = target[kk] if rp == r else 0 * lhs
            res[key] = float(np.max(np.abs(lhs - tgt)))
            scale[key] = float(np.max(np.abs(tgt))) if rp == r else float(np.max(np.abs(lhs)))
    vac = [i for i, c in enumerate(cols) if c == basis.flat_index[basis.charge_index[(0, 0)], 0]]
    if vac:
        lhs = comm(build_C(basis, params))[:, vac]
        tgt = 1j * r * nu * rho1[:, vac]
        res["C,vacuum"] = float(np.max(np.abs(lhs - tgt)))
        scale["C,vacuum"] = float(np.max(np.abs(tgt)))
    return CommutatorReport(res, scale, len(rows), k)


# ----------------------------------------------------------------------------
# particles, eCS operators and the second-quantization identities
# ----------------------------------------------------------------------------

@dataclass(frozen=True)
class ParticleLabel:
    """Chirality ``r`` and type ``m`` in ``{1, -1/g}`` (``hole=True`` selects ``-1/g``)."""

    r: int
    hole: bool = False

    def m(self, g: float) -> float:
        return -1.0 / g if self.hole else 1.0


def ecs_potential(labels, x, eps: float, params: ModelParams, g: float | None = None,
                  order: str = "jk") -> complex:
    """``sum_{j<k} m_j m_k g (g-1) wp_{r_j,r_k}(x_j - x_k; 2 eps)``.

    ``order="kj"`` evaluates ``wp_{r_j,r_k}(x_k - x_j; 2 eps)`` instead; the two
    differ for equal chiralities at ``eps > 0``.
    """
    g = params.g if g is None else g
    tot = 0j
    for j in range(len(labels)):
        for k in range(j + 1, len(labels)):
            a, b = labels[j], labels[k]
            d = x[j] - x[k] if order == "jk" else x[k] - x[j]
            tot += a.m(g) * b.m(g) * g * (g - 1) * complex(wp_rr(a.r, b.r, d, 2 * eps, params))
    return tot


def fd_second(f, x, j: int, h: float):
    """5-point central second derivative of ``f`` in coordinate ``j``."""
    x = np.asarray(x, dtype=float)
    e = np.zeros_like(x)
    e[j] = h
    return (-f(x + 2 * e) + 16 * f(x + e) - 30 * f(x) + 16 * f(x - e) - f(x - 2 * e)) / (12 * h * h)


def fd_first(f, x, j: int, h: float):
    x = np.asarray(x, dtype=float)
    e = np.zeros_like(x)
    e[j] = h
    return (-f(x + 2 * e) + 8 * f(x + e) - 8 * f(x - e) + f(x - 2 * e)) / (12 * h)


def eCS_apply(labels, f, x, eps: float, params: ModelParams, g: float | None = None,
              h: float | None = None, order: str = "jk"):
    """Apply ``-sum (1/2m_j) d^2/dx_j^2 + potential`` to ``f`` at the point ``x``.

    ``f`` maps a coordinate vector to a scalar or an array (for instance a
    Fock vector); derivatives use 5-point stencils with step ``h`` (default
    ``1e-3 ell``).
    """
    g = params.g if g is None else g
    h = 1e-3 * params.ell if h is None else h
    x = np.asarray(x, dtype=float)
    val = f(x)
    out = ecs_potential(labels, x, eps, params, g, order) * val
    for j, lab in enumerate(labels):
        out = out - fd_second(f, x, j, h) / (2 * lab.m(g))
    return out


def ecs_constant(labels, eps: float, params: ModelParams) -> float:
    """``(nu/2) sum_j (nu m_j)^3 c_eps``."""
    nu, g = params.nu, params.g
    return 0.5 * nu * sum((nu * lab.m(g)) ** 3 for lab in labels) * c_eps(params, eps)


def anyon_product_apply(labels, x, eps: float, basis: FockBasis, params: ModelParams, state=None):
    """``phi_{r_1,m_1 nu}(x_1) ... phi_{r_N,m_N nu}(x_N)`` applied to ``state`` (default vacuum), as blocks."""
    g, nu = params.g, params.nu
    blocks = basis.vacuum_blocks() if state is None else state
    for lab, xj in reversed(list(zip(labels, x))):
        blocks = anyon(lab.r, lab.m(g) * nu, float(xj), eps, basis, params).apply_blocks(blocks)
    return blocks


def psi_apply(labels, x, eps: float, basis: FockBasis, params: ModelParams, prefactor: str = "theorem",
              path: str = "shift"):
    """Correction vector ``Psi Omega``.

    ``prefactor="theorem"`` weights term ``j`` by ``nu^2 m_j``; ``"bare"`` uses 1.
    """
    g, nu = params.g, params.nu
    N = len(labels)
    acc = {}
    for j in range(N):
        tail = anyon_product_apply(labels[j + 1:], x[j + 1:], eps, basis, params)
        lab = labels[j]
        nu_j = lab.m(g) * nu
        vop = anyon(lab.r, nu_j, float(x[j]), eps, basis, params)
        terms = correction_terms(lab.r, nu_j, float(x[j]), eps, params, basis.n_max)
        blk = normal_ordered_with_vertex(terms, vop, path, on_vacuum=(j == N - 1)).apply_blocks(tail)
        blk = anyon_product_apply(labels[:j], x[:j], eps, basis, params, blk)
        w = nu * nu * lab.m(g) if prefactor == "theorem" else 1.0
        for c, b in blk.items():
            acc[c] = acc.get(c, 0) + w * b
    return acc


@dataclass
class SecondQuantizationReport:
    residual: float
    scale: float
    lhs_norm: float
    psi_norm: float
    rows: int


def second_quantization_check(labels, x, eps: float, basis: FockBasis, params: ModelParams,
                              H3: SectorOp | None = None, row_level: int | None = None,
                              h: float | None = None, order: str = "jk",
                              prefactor: str = "theorem") -> SecondQuantizationReport:
    """Residual of ``[H_3, phi^N] Omega = (H_eCS + c) phi^N Omega + Psi Omega``.

    The comparison is restricted to rows of level ``<= row_level`` (default
    ``l_max // 2``), where the truncated operators act exactly up to the
    exponentially small weight of the state beyond ``l_max``.
    """
    H3 = build_H3(basis, params) if H3 is None else H3
    row_level = basis.l_max // 2 if row_level is None else row_level
    x = np.asarray(x, dtype=float)
    rows = basis.select(level_max=row_level)

    def vec(xx):
        return basis.rows_of_blocks(anyon_product_apply(labels, xx, eps, basis, params), rows, 1)[:, 0]

    phi_blocks = anyon_product_apply(labels, x, eps, basis, params)
    h3_phi = H3.apply_blocks(phi_blocks)
    h3_omega = H3.apply_blocks(basis.vacuum_blocks())
    phi_h3 = anyon_product_apply(labels, x, eps, basis, params, h3_omega)
    lhs = basis.rows_of_blocks(h3_phi, rows, 1)[:, 0] - basis.rows_of_blocks(phi_h3, rows, 1)[:, 0]
    rhs = eCS_apply(labels, vec, x, eps, params, h=h, order=order)
    rhs = rhs + ecs_constant(labels, eps, params) * vec(x)
    psi = basis.rows_of_blocks(psi_apply(labels, x, eps, basis, params, prefactor), rows, 1)[:, 0]
    res = lhs - rhs - psi
    return SecondQuantizationReport(float(np.linalg.norm(res)), float(np.linalg.norm(vec(x))),
                                    float(np.linalg.norm(lhs)), float(np.linalg.norm(psi)), len(rows))


def vacuum_identity(vop: LinOp, H3: SectorOp) -> complex:
    """``<Omega, [H_3, Phi] Omega> = <H_3 Omega, Phi Omega> - <Phi^dagger Omega, H_3 Omega>``."""
    b = vop.basis
    om = b.vacuum_blocks()
    h_om = H3.apply_blocks(om)
    first = H3.apply_blocks(vop.apply_blocks(om)).get((0, 0))
    second = vop.apply_blocks(h_om).get((0, 0))
    v1 = 0j if first is None else complex(first[0, 0])
    v2 = 0j if second is None else complex(second[0, 0])
    return v1 - v2


# ----------------------------------------------------------------------------
# deformed and generalized eCS potentials (classical functions)
# ----------------------------------------------------------------------------

def wp1_complex(z, params: ModelParams):
    """``wp_1(z)`` at complex ``z`` from the product formula of ``-d^2 log theta_1``."""
    k, q = params.kappa, params.q
    z = np.asarray(z, dtype=complex)
    out = k * k / np.sin(k * z) ** 2
    c2, s2 = np.cos(2 * k * z), np.sin(2 * k * z)
    m = 1
    while q > 0:
        A = q ** (2 * m)
        if A < 1e-18:
            break
        f = 1 - 2 * A * c2 + A * A
        out = out - 8 * k * k * A * c2 / f + 16 * k * k * A * A * s2 * s2 / (f * f)
        m += 1
    return out


def deformed_potential(x, xt, g: float, params: ModelParams, wp=None) -> complex:
    """Potential of ``H_{N;g}(x) - g H_{M;1/g}(xt) + sum (1-g) wp_1(x_j - xt_k)``."""
    wp = (lambda z: wp1_complex(z, params)) if wp is None else wp
    tot = 0j
    for j in range(len(x)):
        for k in range(j + 1, len(x)):
            tot += g * (g - 1) * wp(x[j] - x[k])
    gi = 1.0 / g
    for j in range(len(xt)):
        for k in range(j + 1, len(xt)):
            tot += -g * gi * (gi - 1) * wp(xt[j] - xt[k])
    for a in x:
        for b in xt:
            tot += (1 - g) * wp(a - b)
    return complex(tot)


def generalized_potential(groups, g: float, params: ModelParams) -> complex:
    """``sum_{j<k} m_j m_k g(g-1) wp_{r_j,r_k}(x_j - x_k)`` for real positions at ``eps = 0``.

    ``groups`` maps ``(r, hole)`` to a list of positions.
    """
    items = [(ParticleLabel(r, hole), float(p)) for (r, hole), ps in groups.items() for p in ps]
    tot = 0j
    for j in range(len(items)):
        for k in range(j + 1, len(items)):
            (a, xa), (b, xb) = items[j], items[k]
            if a.r == b.r:
                w = wp1_reg(xa - xb, 0.0, False, params)
            else:
                w = wp1_reg(xa - xb, 0.0, True, params)
            tot += a.m(g) * b.m(g) * g * (g - 1) * complex(w)
    return tot


def substitution_check(N1: int, M1: int, N2: int, M2: int, g: float, params: ModelParams,
                       rng=None, points=None) -> float:
    """Deformed potential with the second group shifted by ``i delta`` versus the generalized one.

    ``N1, M1`` count particles and holes of chirality ``+``; ``N2, M2`` those
    of chirality ``-``.  Chirality ``-`` positions enter the deformed model as
    ``y + i delta``.  Returns the absolute difference.
    """
    rng = np.random.default_rng(0) if rng is None else rng
    n = N1 + M1 + N2 + M2
    if points is None:
        points = -params.ell + 2 * params.ell * (np.arange(n) + 0.5 + 0.3 * rng.random(n)) / n
    pts = np.asarray(points, dtype=float)
    x, xt, y, yt = np.split(pts, np.cumsum([N1, M1, N2]))
    shift = 1j * params.delta
    lhs = deformed_potential(np.concatenate([x, y + shift]), np.concatenate([xt, yt + shift]), g, params)
    rhs = generalized_potential({(1, False): x, (1, True): xt, (-1, False): y, (-1, True): yt}, g, params)
    return abs(lhs - rhs)
