"""Vertex operators, their cocycle and the regularized anyons.

A vertex operator is

    Phi_mu(alpha) = e^{i alpha_0.Q/2} R_+^{mu_+} R_-^{mu_-} e^{i alpha_0.Q/2} e^{i J+(alpha)} e^{i J-(alpha)}

with ``J+`` collecting the Bogoliubov creation part and ``J-`` the
annihilation part of ``sum alpha_{r,n} b_{r,-n}``.  Products obey
``Phi_mu(alpha) Phi_mu'(beta) = chi Phi_{mu+mu'}(alpha+beta)`` with an
explicit scalar ``chi``; every correlation function of anyons follows from it.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .fock import ChargeShift, ExpOp, FockBasis, LinOp, Product, SectorOp, charge_diag
from .params import ModelParams, bogo_arrays
from .specfun import sgn_reg, theta_rr

_R = (1, -1)   # chirality of row 0 and row 1 in the coefficient arrays


@dataclass
class VertexDescriptor:
    """Charges ``mu``, zero-mode coefficients ``alpha0`` and mode coefficients.

    ``ap[i, n-1]`` holds ``alpha_{r,n}`` and ``am[i, n-1]`` holds
    ``alpha_{r,-n}`` for ``r = +1`` (``i = 0``) and ``r = -1`` (``i = 1``).
    """

    mu: tuple = (0, 0)
    alpha0: np.ndarray = field(default_factory=lambda: np.zeros(2, complex))
    ap: np.ndarray = field(default_factory=lambda: np.zeros((2, 0), complex))
    am: np.ndarray = field(default_factory=lambda: np.zeros((2, 0), complex))

    def __post_init__(self):
        self.mu = (int(self.mu[0]), int(self.mu[1]))
        self.alpha0 = np.asarray(self.alpha0, dtype=complex).reshape(2)
        self.ap = np.atleast_2d(np.asarray(self.ap, dtype=complex))
        self.am = np.atleast_2d(np.asarray(self.am, dtype=complex))
        if self.ap.shape != self.am.shape or self.ap.shape[0] != 2:
            raise ValueError("ap and am must both have shape (2, n_modes)")

    @classmethod
    def from_modes(cls, mu=(0, 0), alpha0=(0, 0), alpha=None, n_modes=None):
        """Build from a mapping ``{(r, n): value}`` with ``n != 0``."""
        alpha = alpha or {}
        n_modes = n_modes or max([abs(n) for _, n in alpha] + [0])
        ap = np.zeros((2, n_modes), complex)
        am = np.zeros((2, n_modes), complex)
        for (r, n), v in alpha.items():
            if n == 0:
                raise ValueError("use alpha0 for zero modes")
            (ap if n > 0 else am)[_R.index(r), abs(n) - 1] = v
        return cls(mu, alpha0, ap, am)

    @property
    def n_modes(self) -> int:
        return self.ap.shape[1]

    def support(self) -> int:
        """Largest ``|n|`` with a nonzero coefficient."""
        nz = np.nonzero(np.any(self.ap != 0, axis=0) | np.any(self.am != 0, axis=0))[0]
        return int(nz[-1]) + 1 if len(nz) else 0

    def padded(self, n_modes: int) -> "VertexDescriptor":
        pad = n_modes - self.n_modes
        if pad < 0:
            if self.support() > n_modes:
                raise ValueError("cannot drop nonzero modes")
            return VertexDescriptor(self.mu, self.alpha0, self.ap[:, :n_modes], self.am[:, :n_modes])
        z = np.zeros((2, pad), complex)
        return VertexDescriptor(self.mu, self.alpha0, np.hstack([self.ap, z]), np.hstack([self.am, z]))

    def star(self) -> "VertexDescriptor":
        """``(alpha*)_{r,n} = conj(alpha_{r,-n})``; charges are unchanged."""
        return VertexDescriptor(self.mu, np.conj(self.alpha0), np.conj(self.am), np.conj(self.ap))

    def is_real(self, tol: float = 0.0) -> bool:
        s = self.star()
        return bool(np.all(np.abs(s.alpha0 - self.alpha0) <= tol)
                    and np.all(np.abs(s.ap - self.ap) <= tol) and np.all(np.abs(s.am - self.am) <= tol))

    def __add__(self, other: "VertexDescriptor") -> "VertexDescriptor":
        n = max(self.n_modes, other.n_modes)
        a, b = self.padded(n), other.padded(n)
        return VertexDescriptor((a.mu[0] + b.mu[0], a.mu[1] + b.mu[1]), a.alpha0 + b.alpha0,
                                a.ap + b.ap, a.am + b.am)

    def __neg__(self) -> "VertexDescriptor":
        return VertexDescriptor((-self.mu[0], -self.mu[1]), -self.alpha0, -self.ap, -self.am)

    def scaled_modes(self, c: complex) -> "VertexDescriptor":
        """Multiply the coefficients (not the charges) by ``c``."""
        return VertexDescriptor(self.mu, c * self.alpha0, c * self.ap, c * self.am)


def random_descriptor(rng, n_support: int, mu_max: int = 1, scale: float = 0.5,
                      decay: float = 0.0, real: bool = False) -> VertexDescriptor:
    """Random descriptor on modes ``|n| <= n_support`` with ``|alpha_n| ~ scale e^{-decay n}/n``."""
    n = np.arange(1, n_support + 1)
    amp = scale * np.exp(-decay * n) / n
    def draw():
        return (rng.standard_normal((2, n_support)) + 1j * rng.standard_normal((2, n_support))) * amp / math.sqrt(2)
    ap = draw()
    am = np.conj(ap) if real else draw()
    a0 = rng.standard_normal(2) * scale
    if not real:
        a0 = a0 + 1j * rng.standard_normal(2) * scale * 0.1
    mu = tuple(int(v) for v in rng.integers(-mu_max, mu_max + 1, size=2))
    return VertexDescriptor(mu, a0, ap, am)


# ----------------------------------------------------------------------------
# J+/J- coefficients and the scalar commutator
# ----------------------------------------------------------------------------

def _cs(n_modes: int, params: ModelParams):
    if n_modes == 0:
        return np.zeros(0), np.zeros(0)
    return bogo_arrays(np.arange(1, n_modes + 1), params.q)


def jplus_coeffs(desc: VertexDescriptor, params: ModelParams) -> np.ndarray:
    """Coefficient of ``a_{r,-n}`` in ``J+``: ``alpha_{r,n} c_n - alpha_{-r,-n} s_n``."""
    c, s = _cs(desc.n_modes, params)
    return desc.ap * c - desc.am[::-1] * s


def jminus_coeffs(desc: VertexDescriptor, params: ModelParams) -> np.ndarray:
    """Coefficient of ``a_{r,n}`` in ``J-``: ``alpha_{r,-n} c_n - alpha_{-r,n} s_n``."""
    c, s = _cs(desc.n_modes, params)
    return desc.am * c - desc.ap[::-1] * s


def jm_jp_commutator(alpha: VertexDescriptor, beta: VertexDescriptor, params: ModelParams,
                     path: str = "explicit") -> complex:
    """The c-number ``[J-(alpha), J+(beta)]``.

    ``path="explicit"`` evaluates the closed expression in ``alpha, beta``
    directly; ``path="modes"`` contracts the J-/J+ coefficient arrays using
    ``[a_{r,n}, a_{r',-n'}] = n delta delta``.
    """
    n_modes = max(alpha.n_modes, beta.n_modes)
    a, b = alpha.padded(n_modes), beta.padded(n_modes)
    n = np.arange(1, n_modes + 1)
    if path == "modes":
        return complex(np.sum(n * jminus_coeffs(a, params) * jplus_coeffs(b, params)))
    if path != "explicit":
        raise ValueError(path)
    c, s = _cs(n_modes, params)
    tot = (c * c * a.am * b.ap + s * s * a.ap * b.am
           - c * s * (a.ap[::-1] * b.ap + a.am[::-1] * b.am))
    return complex(np.sum(n * tot))


def cocycle_chi(mu, mup, alpha: VertexDescriptor, beta: VertexDescriptor, params: ModelParams,
                path: str = "explicit") -> complex:
    """``chi`` in ``Phi_mu(alpha) Phi_mu'(beta) = chi Phi_{mu+mu'}(alpha+beta)``.

    ``mu`` and ``mup`` override the charges stored in the descriptors.
    """
    return complex(np.exp(log_chi(mu, mup, alpha, beta, params, path)))


def log_chi(mu, mup, alpha, beta, params, path="explicit") -> complex:
    """Logarithm of ``cocycle_chi`` (the Klein sign enters as ``i pi``)."""
    sign = 1j * math.pi * ((mu[1] * mup[0]) % 2)
    zero = 0.5j * params.nu0 * (alpha.alpha0[0] * mup[0] + alpha.alpha0[1] * mup[1]
                                - beta.alpha0[0] * mu[0] - beta.alpha0[1] * mu[1])
    return sign + zero - jm_jp_commutator(alpha, beta, params, path)


# ----------------------------------------------------------------------------
# operators
# ----------------------------------------------------------------------------

def _mode_sum_op(basis: FockBasis, coeffs: np.ndarray, creation: bool) -> SectorOp:
    terms = []
    for i, r in enumerate(_R):
        for n in range(1, coeffs.shape[1] + 1):
            cf = coeffs[i, n - 1]
            if cf != 0:
                terms.append((cf, None, basis.osc_a(r, -n if creation else n)))
    return SectorOp(basis, terms)


def _zero_mode_phase(basis, params, alpha0) -> SectorOp:
    a0p, a0m, nu0 = alpha0[0], alpha0[1], params.nu0
    return charge_diag(basis, lambda mp, mm: np.exp(0.5j * nu0 * (a0p * mp + a0m * mm)))


class VertexOp(Product):
    """``Phi_mu(alpha)`` as a product of matrix-free factors; keeps its descriptor."""

    def __init__(self, desc: VertexDescriptor, basis: FockBasis, params: ModelParams):
        if desc.support() > basis.n_max:
            raise ValueError(f"descriptor has modes up to {desc.support()} > n_max={basis.n_max}")
        d = desc.padded(basis.n_max)
        ph = _zero_mode_phase(basis, params, d.alpha0)
        factors = [ph, ChargeShift(basis, *d.mu), ph]
        jp, jm = jplus_coeffs(d, params), jminus_coeffs(d, params)
        if np.any(jp):
            factors.append(ExpOp(_mode_sum_op(basis, jp, True), 1j))
        if np.any(jm):
            factors.append(ExpOp(_mode_sum_op(basis, jm, False), 1j))
        super().__init__(factors)
        self.desc = desc
        self.params = params


def build_vertex(desc: VertexDescriptor, basis: FockBasis, params: ModelParams) -> VertexOp:
    return VertexOp(desc, basis, params)


def vertex_adjoint_desc(desc: VertexDescriptor):
    """``(sign, desc')`` with ``Phi_mu(alpha)^dagger = sign Phi_{-mu}(-alpha*)``."""
    sign = -1.0 if (desc.mu[0] * desc.mu[1]) % 2 else 1.0
    return sign, -desc.star()


# ----------------------------------------------------------------------------
# anyons
# ----------------------------------------------------------------------------

@dataclass(frozen=True)
class Insertion:
    """One anyon ``phi_{r, nu}(x; eps)``."""

    r: int
    nu: float
    x: float
    eps: float


def anyon_desc(r: int, nu_eff: float, x: float, eps: float, params: ModelParams,
               n_modes: int) -> VertexDescriptor:
    """Descriptor of ``phi_{r,nu_eff}(x; eps)`` with modes ``1..n_modes``.

    ``mu_r = nu_eff/nu0``, ``alpha_{r,0} = -2 r nu_eff kappa x`` and
    ``alpha_{r,n} = nu_eff e^{-2 kappa (i r n x + |n| eps)}/(i n)``; the other
    chirality is zero.
    """
    if r not in (1, -1):
        raise ValueError("chirality must be +1 or -1")
    if not eps > 0:
        raise ValueError("anyons need eps > 0")
    k = params.kappa
    charge = params.charge_of(nu_eff)
    i = _R.index(r)
    n = np.arange(1, n_modes + 1)
    ap = np.zeros((2, n_modes), complex)
    am = np.zeros((2, n_modes), complex)
    damp = np.exp(-2 * k * n * eps)
    ap[i] = nu_eff * np.exp(-2j * k * r * n * x) * damp / (1j * n)
    am[i] = nu_eff * np.exp(2j * k * r * n * x) * damp / (-1j * n)
    a0 = np.zeros(2, complex)
    a0[i] = -2 * r * nu_eff * k * x
    mu = (charge, 0) if r > 0 else (0, charge)
    return VertexDescriptor(mu, a0, ap, am)


def mode_tail(eps: float, params: ModelParams, n_modes: int) -> float:
    """Size ``e^{-2 kappa eps n_modes}/n_modes`` of the first dropped anyon coefficient."""
    return math.exp(-2 * params.kappa * eps * n_modes) / n_modes


def anyon(r: int, nu_eff: float, x: float, eps: float, basis: FockBasis, params: ModelParams,
          tail_tol: float | None = None) -> VertexOp:
    """Regularized anyon on the truncated Fock space.

    Modes above ``basis.n_max`` are absent from the truncation; the size of
    the first dropped coefficient is stored as ``op.tail`` and, when
    ``tail_tol`` is given, must not exceed it.
    """
    tail = mode_tail(eps, params, basis.n_max)
    if tail_tol is not None and tail > tail_tol:
        raise ValueError(f"anyon mode tail {tail:.2e} exceeds {tail_tol:.2e}; raise n_max or eps")
    op = VertexOp(anyon_desc(r, nu_eff, x, eps, params, basis.n_max), basis, params)
    op.tail = tail
    return op


def _as_insertion(ins) -> Insertion:
    return ins if isinstance(ins, Insertion) else Insertion(*ins)


def charges_balanced(insertions, params: ModelParams) -> bool:
    tot = {1: 0, -1: 0}
    for ins in map(_as_insertion, insertions):
        tot[ins.r] += params.charge_of(ins.nu)
    return tot[1] == 0 and tot[-1] == 0


def pair_factor(a: Insertion, b: Insertion, params: ModelParams) -> complex:
    """``(-1)^{[r_a=-][r_b=+] nu_a nu_b/nu0^2} theta_{r_a,r_b}(x_a - x_b; eps_a+eps_b)^{nu_a nu_b}``."""
    prod = a.nu * b.nu
    sign = 1.0
    if a.r == -1 and b.r == 1:
        k = params.charge_of(a.nu) * params.charge_of(b.nu)
        sign = -1.0 if k % 2 else 1.0
    return sign * complex(theta_rr(a.r, b.r, a.x - b.x, a.eps + b.eps, params, power=prod))


def correlator_closed(insertions, params: ModelParams) -> complex:
    """Closed-form vacuum expectation ``<Omega, phi_1 ... phi_N Omega>``.

    Zero unless the charges of each chirality add up to zero; otherwise the
    product over ordered pairs ``j < k`` of ``pair_factor``.
    """
    ins = [_as_insertion(i) for i in insertions]
    if not charges_balanced(ins, params):
        return 0j
    val = 1.0 + 0j
    for j in range(len(ins)):
        for k in range(j + 1, len(ins)):
            val *= pair_factor(ins[j], ins[k], params)
    return val


def correlator_cocycle(insertions, params: ModelParams, n_modes: int) -> complex:
    """The same expectation as a product of cocycle scalars truncated at ``n_modes``."""
    ins = [_as_insertion(i) for i in insertions]
    if not charges_balanced(ins, params):
        return 0j
    descs = [anyon_desc(i.r, i.nu, i.x, i.eps, params, n_modes) for i in ins]
    acc = descs[0]
    logv = 0j
    for d in descs[1:]:
        logv += log_chi(acc.mu, d.mu, acc, d, params)
        acc = acc + d
    return complex(np.exp(logv))


def correlator_fock(insertions, basis: FockBasis, params: ModelParams) -> complex:
    """``<Omega, phi_1 ... phi_N Omega>`` by applying the truncated operators in turn."""
    ins = [_as_insertion(i) for i in insertions]
    state = basis.vacuum_blocks()
    for i in reversed(ins):
        state = anyon(i.r, i.nu, i.x, i.eps, basis, params).apply_blocks(state)
    blk = state.get((0, 0))
    return 0j if blk is None else complex(blk[0, 0])


def exchange_phase(a: Insertion, b: Insertion, params: ModelParams, n_modes: int | None = None,
                   path: str = "cocycle") -> complex:
    """Scalar ``p`` with ``phi_a phi_b = p phi_b phi_a``.

    ``path="cocycle"`` forms ``chi_ab/chi_ba`` from mode sums (``n_modes``
    defaults to a 1e-16 tail); ``path="closed"`` uses
    ``e^{-i pi nu nu' sgn(r(x-x'); eps+eps')}`` for equal chiralities and
    ``(-1)^{nu nu'/nu0^2}`` otherwise.
    """
    a, b = _as_insertion(a), _as_insertion(b)
    if path == "closed":
        if a.r == b.r:
            sg = sgn_reg(a.r * (a.x - b.x), a.eps + b.eps, params)
            return complex(np.exp(-1j * math.pi * a.nu * b.nu * sg))
        k = params.charge_of(a.nu) * params.charge_of(b.nu)
        return -1.0 + 0j if k % 2 else 1.0 + 0j
    if path != "cocycle":
        raise ValueError(path)
    if n_modes is None:
        n_modes = max(64, int(math.ceil(37.0 / (2 * params.kappa * (a.eps + b.eps)))) + 1)
    da = anyon_desc(a.r, a.nu, a.x, a.eps, params, n_modes)
    db = anyon_desc(b.r, b.nu, b.x, b.eps, params, n_modes)
    return complex(np.exp(log_chi(da.mu, db.mu, da, db, params) - log_chi(db.mu, da.mu, db, da, params)))


def unitarity_constant(desc: VertexDescriptor, params: ModelParams) -> complex:
    """``c`` with ``Phi^dagger Phi = c Phi_0(alpha - alpha*)``, equal to ``c I`` for real descriptors."""
    sign, adj = vertex_adjoint_desc(desc)
    return sign * cocycle_chi(adj.mu, desc.mu, adj, desc, params)


def protected_residual(lhs: LinOp, rhs: LinOp, basis: FockBasis, level: int,
                       col_mu_max: int = 0, row_level: int | None = None, chunk: int = 256,
                       norm: str = "2") -> float:
    """Norm of ``P_rows (lhs - rhs) P_cols``.

    Columns are states of level ``<= level`` with ``|mu_r| <= col_mu_max``;
    rows are all states of level ``<= row_level`` (default ``level``) in the
    full charge window.  ``norm="2"`` is the spectral norm of the dense
    restriction; ``norm="fro"`` accumulates the Frobenius norm (an upper bound
    on the spectral norm) over column chunks without forming the matrix.
    """
    if col_mu_max < 0:
        return 0.0
    cols = basis.select(level_max=level, mu_max=col_mu_max)
    rows = basis.select(level_max=level if row_level is None else row_level)
    if not (len(cols) and len(rows)):
        return 0.0
    diff = lhs - rhs
    if norm == "2":
        return float(np.linalg.norm(diff.restricted(rows, cols, chunk=chunk), 2))
    if norm != "fro":
        raise ValueError(norm)
    # one column block per charge sector: identity columns at level <= level
    osc_cols = np.nonzero(basis.osc_level <= level)[0]
    row_mask = basis.osc_level <= (level if row_level is None else row_level)
    tot = 0.0
    for c in basis.charges:
        if max(abs(c[0]), abs(c[1])) > col_mu_max:
            continue
        for s in range(0, len(osc_cols), chunk):
            oc = osc_cols[s:s + chunk]
            blk = np.zeros((basis.dim_osc, len(oc)), dtype=complex)
            blk[oc, np.arange(len(oc))] = 1.0
            for out in diff.apply_blocks({c: blk}).values():
                tot += float(np.sum(np.abs(out[row_mask]) ** 2))
    return math.sqrt(tot)
