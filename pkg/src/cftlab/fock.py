"""Truncated two-chirality boson Fock space with Klein factors.

A basis state is ``prod a_{r,-n}^{m_{r,n}} / sqrt(m! n^m) R_+^{mu_+} R_-^{mu_-} Omega``
with total level ``sum n m_{r,n} <= l_max``, modes ``1 <= n <= n_max`` and
``|mu_r| <= mu_max``.

Internally a state is a dict mapping a charge pair ``(mu_+, mu_-)`` to a
``(dim_osc, k)`` block of oscillator amplitudes, so that charge-shifting
operators only touch the sectors that are actually populated.  The flat
vector layout exposed to users follows the basis ordering: total level,
then charges, then oscillator occupations.
"""
from __future__ import annotations

import math

import numpy as np
import scipy.sparse as sp

from .params import ModelParams, Truncation, bogo_arrays

MAX_OSC_DIM = 2_000_000


# ----------------------------------------------------------------------------
# partitions
# ----------------------------------------------------------------------------

def partitions(l_max: int, n_max: int) -> np.ndarray:
    """All occupation vectors ``m[0..n_max-1]`` with ``sum (n+1) m_n <= l_max``.

    Sorted by level, then lexicographically by occupation vector.
    """
    out = []

    def rec(n, remaining, prefix):
        if n > n_max:
            out.append(prefix)
            return
        for m in range(remaining // n + 1):
            rec(n + 1, remaining - m * n, prefix + (m,))

    rec(1, l_max, ())
    occ = np.array(out, dtype=np.int16).reshape(len(out), n_max)
    lev = occ @ np.arange(1, n_max + 1)
    order = np.lexsort(tuple(occ[:, j] for j in range(n_max - 1, -1, -1)) + (lev,))
    return occ[order]


def partition_counts(l_max: int, n_max: int | None = None) -> np.ndarray:
    """Number of partitions of each level ``0..l_max`` into parts ``<= n_max``."""
    n_max = l_max if n_max is None else n_max
    p = np.zeros(l_max + 1, dtype=np.int64)
    p[0] = 1
    for part in range(1, n_max + 1):
        for s in range(part, l_max + 1):
            p[s] += p[s - part]
    return p


# ----------------------------------------------------------------------------
# basis
# ----------------------------------------------------------------------------

class FockBasis:
    """Enumerated truncated basis; see module docstring for conventions."""

    def __init__(self, trunc: Truncation, max_osc_dim: int = MAX_OSC_DIM):
        self.trunc = trunc
        n_max, l_max, mu_max = trunc.n_max, trunc.l_max, trunc.mu_max
        self.n_max, self.l_max, self.mu_max = n_max, l_max, mu_max
        part = partitions(l_max, n_max)
        plev = part.astype(np.int64) @ np.arange(1, n_max + 1)
        self.part, self.part_level = part, plev
        P1 = len(part)
        self._P1 = P1
        cum = np.searchsorted(plev, np.arange(l_max + 1), side="right")
        # oscillator pairs (i_plus, i_minus) with total level <= l_max
        counts = cum[l_max - plev]
        size = int(counts.sum())
        if size > max_osc_dim:
            raise MemoryError(f"oscillator dimension {size} exceeds guard {max_osc_dim}")
        ip = np.repeat(np.arange(P1), counts)
        starts = np.repeat(np.cumsum(counts) - counts, counts)
        im = np.arange(size) - starts
        lev = plev[ip] + plev[im]
        order = np.lexsort((im, ip, lev))
        self.osc_ip, self.osc_im, self.osc_level = ip[order], im[order], lev[order]
        self.dim_osc = size
        keys = self.osc_ip * P1 + self.osc_im
        self._key_order = np.argsort(keys)
        self._keys_sorted = keys[self._key_order]
        # charges
        rng = np.arange(-mu_max, mu_max + 1)
        self.charges = [(int(a), int(b)) for a in rng for b in rng]
        self.charge_index = {c: i for i, c in enumerate(self.charges)}
        n_c = len(self.charges)
        self.n_charges = n_c
        self.dim = n_c * size
        # flat layout: (level, charge, oscillator)
        lev_count = np.bincount(self.osc_level, minlength=l_max + 1)
        lev_start = np.concatenate([[0], np.cumsum(lev_count)[:-1]])
        rank = np.arange(size) - lev_start[self.osc_level]
        block_start = np.concatenate([[0], np.cumsum(n_c * lev_count)[:-1]])
        self.flat_index = (block_start[self.osc_level][None, :]
                           + np.arange(n_c)[:, None] * lev_count[self.osc_level][None, :]
                           + rank[None, :])
        self._ladder = {}
        self._ops = {}
        self._part_lookup = {tuple(int(v) for v in row): i for i, row in enumerate(part)}

    def __repr__(self):
        return (f"FockBasis(n_max={self.n_max}, l_max={self.l_max}, mu_max={self.mu_max}, "
                f"dim={self.dim}, dim_osc={self.dim_osc})")

    # ---- lookups -------------------------------------------------------------
    def osc_lookup(self, ip, im):
        """Oscillator index of ``(ip, im)`` pairs; -1 where absent."""
        ip = np.asarray(ip)
        im = np.asarray(im)
        out = np.full(ip.shape, -1, dtype=np.int64)
        ok = (ip >= 0) & (im >= 0)
        keys = ip[ok] * self._P1 + im[ok]
        pos = np.searchsorted(self._keys_sorted, keys)
        pos = np.minimum(pos, len(self._keys_sorted) - 1)
        hit = self._keys_sorted[pos] == keys
        res = np.where(hit, self._key_order[pos], -1)
        out[ok] = res
        return out

    def occupations(self, r: int) -> np.ndarray:
        """``(dim_osc, n_max)`` occupation numbers of chirality ``r``."""
        return self.part[self.osc_ip if r > 0 else self.osc_im]

    def state_index(self, occ_plus=(), occ_minus=(), mu=(0, 0)) -> int:
        """Flat index of the state with the given occupation lists and charges."""
        def pidx(occ):
            v = tuple(int(x) for x in occ) + (0,) * (self.n_max - len(occ))
            return self._part_lookup[v]
        o = int(self.osc_lookup(np.array([pidx(occ_plus)]), np.array([pidx(occ_minus)]))[0])
        if o < 0:
            raise KeyError("state outside truncation")
        return int(self.flat_index[self.charge_index[tuple(mu)], o])

    def describe(self, flat: int):
        c, o = np.argwhere(self.flat_index == flat)[0]
        return {"mu": self.charges[c], "occ_plus": self.part[self.osc_ip[o]].tolist(),
                "occ_minus": self.part[self.osc_im[o]].tolist(), "level": int(self.osc_level[o])}

    def vacuum(self) -> np.ndarray:
        v = np.zeros(self.dim, dtype=complex)
        v[self.state_index()] = 1.0
        return v

    def vacuum_blocks(self, k: int = 1) -> dict:
        b = np.zeros((self.dim_osc, k), dtype=complex)
        b[0, :] = 1.0
        return {(0, 0): b}

    def select(self, level_max=None, mu_max=None, charges=None) -> np.ndarray:
        """Flat indices of states with level and charge restrictions (sorted)."""
        level_max = self.l_max if level_max is None else level_max
        mu_max = self.mu_max if mu_max is None else mu_max
        oks = np.nonzero(self.osc_level <= level_max)[0]
        idx = []
        for ci, c in enumerate(self.charges):
            if max(abs(c[0]), abs(c[1])) > mu_max:
                continue
            if charges is not None and c not in charges:
                continue
            idx.append(self.flat_index[ci, oks])
        return np.sort(np.concatenate(idx)) if idx else np.zeros(0, dtype=np.int64)

    def level_of_flat(self) -> np.ndarray:
        lev = np.empty(self.dim, dtype=np.int64)
        lev[self.flat_index.ravel()] = np.tile(self.osc_level, self.n_charges)
        return lev

    def charges_of_flat(self) -> np.ndarray:
        ch = np.empty((self.dim, 2), dtype=np.int64)
        for ci, c in enumerate(self.charges):
            ch[self.flat_index[ci]] = c
        return ch

    # ---- layout conversion -----------------------------------------------------
    def to_blocks(self, v) -> dict:
        v = np.asarray(v)
        vec = v.ndim == 1
        v2 = v[:, None] if vec else v
        out = {}
        for ci, c in enumerate(self.charges):
            blk = v2[self.flat_index[ci]]
            if np.any(blk):
                out[c] = blk.astype(complex)
        return out

    def from_blocks(self, d: dict, k: int | None = None) -> np.ndarray:
        if k is None:
            k = next(iter(d.values())).shape[1] if d else 1
        v = np.zeros((self.dim, k), dtype=complex)
        for c, blk in d.items():
            ci = self.charge_index.get(c)
            if ci is not None:
                v[self.flat_index[ci]] = blk
        return v

    def unit_blocks(self, flat_indices) -> dict:
        """Blocks holding the unit vectors ``e_j`` for ``j`` in ``flat_indices`` as columns."""
        flat_indices = np.asarray(flat_indices)
        k = len(flat_indices)
        inv_c, inv_o = self._inverse_index()
        ci, oi = inv_c[flat_indices], inv_o[flat_indices]
        out = {}
        for c in np.unique(ci):
            sel = np.nonzero(ci == c)[0]
            blk = np.zeros((self.dim_osc, k), dtype=complex)
            blk[oi[sel], sel] = 1.0
            out[self.charges[c]] = blk
        return out

    def _inverse_index(self):
        if not hasattr(self, "_inv"):
            inv_c = np.empty(self.dim, dtype=np.int32)
            inv_o = np.empty(self.dim, dtype=np.int64)
            for ci in range(self.n_charges):
                inv_c[self.flat_index[ci]] = ci
                inv_o[self.flat_index[ci]] = np.arange(self.dim_osc)
            self._inv = (inv_c, inv_o)
        return self._inv

    def rows_of_blocks(self, d: dict, flat_rows, k: int) -> np.ndarray:
        """Extract the rows ``flat_rows`` (in that order) from a block state."""
        flat_rows = np.asarray(flat_rows)
        out = np.zeros((len(flat_rows), k), dtype=complex)
        inv_c, inv_o = self._inverse_index()
        rc, ro = inv_c[flat_rows], inv_o[flat_rows]
        for c, blk in d.items():
            ci = self.charge_index.get(c)
            if ci is None:
                continue
            sel = np.nonzero(rc == ci)[0]
            out[sel] = blk[ro[sel]]
        return out

    # ---- oscillator ladder operators ---------------------------------------------
    def _part_ladder(self, n: int, up: bool):
        key = (n, up)
        if key not in self._ladder:
            occ = self.part
            m = occ[:, n - 1].astype(np.int64)
            new = occ.copy()
            new[:, n - 1] += 1 if up else -1
            idx = np.full(len(occ), -1, dtype=np.int64)
            amp = np.zeros(len(occ))
            ok = (new[:, n - 1] >= 0) & (self.part_level + (n if up else -n) <= self.l_max)
            for i in np.nonzero(ok)[0]:
                idx[i] = self._part_lookup[tuple(int(x) for x in new[i])]
            amp[ok] = np.sqrt(n * (m[ok] + 1)) if up else np.sqrt(n * m[ok])
            self._ladder[key] = (idx, amp)
        return self._ladder[key]

    def osc_a(self, r: int, n: int) -> sp.csr_matrix:
        """Sparse oscillator matrix of ``a_{r,n}`` (``n != 0``), cached."""
        if n == 0 or abs(n) > self.n_max:
            raise ValueError(f"mode {n} outside 1..{self.n_max}")
        key = (r, n)
        if key not in self._ops:
            idx, amp = self._part_ladder(abs(n), n < 0)
            if r > 0:
                ip_new = idx[self.osc_ip]
                a = amp[self.osc_ip]
                im_new = self.osc_im
            else:
                im_new = idx[self.osc_im]
                a = amp[self.osc_im]
                ip_new = self.osc_ip
            tgt = self.osc_lookup(ip_new, im_new)
            ok = tgt >= 0
            src = np.arange(self.dim_osc)[ok]
            self._ops[key] = sp.csr_matrix((a[ok], (tgt[ok], src)), shape=(self.dim_osc, self.dim_osc))
        return self._ops[key]


# ----------------------------------------------------------------------------
# block helpers
# ----------------------------------------------------------------------------

def _axpy(acc: dict, d: dict, coef=1.0):
    for c, b in d.items():
        if c in acc:
            acc[c] = acc[c] + coef * b
        else:
            acc[c] = coef * b
    return acc


def _is_zero(d: dict) -> bool:
    return all(not np.any(b) for b in d.values())


def block_norm(d: dict) -> float:
    return math.sqrt(sum(float(np.sum(np.abs(b) ** 2)) for b in d.values()))


# ----------------------------------------------------------------------------
# linear operators
# ----------------------------------------------------------------------------

class LinOp:
    """Matrix-free operator acting on charge-sector blocks of a FockBasis."""

    def __init__(self, basis: FockBasis):
        self.basis = basis

    # subclasses implement these two
    def apply_blocks(self, d: dict) -> dict:
        raise NotImplementedError

    def adjoint(self) -> "LinOp":
        raise NotImplementedError

    @property
    def H(self):
        return self.adjoint()

    def apply(self, v):
        v = np.asarray(v)
        out = self.basis.from_blocks(self.apply_blocks(self.basis.to_blocks(v)),
                                     k=1 if v.ndim == 1 else v.shape[1])
        return out[:, 0] if v.ndim == 1 else out

    def toarray(self) -> np.ndarray:
        b = self.basis
        if b.dim > 6000:
            raise MemoryError("toarray is meant for small bases")
        return self.restricted(np.arange(b.dim), np.arange(b.dim))

    def restricted(self, rows, cols, chunk: int = 512) -> np.ndarray:
        """Dense matrix ``<e_i, A e_j>`` for ``i`` in rows and ``j`` in cols."""
        rows, cols = np.asarray(rows), np.asarray(cols)
        out = np.zeros((len(rows), len(cols)), dtype=complex)
        for s in range(0, len(cols), chunk):
            cc = cols[s:s + chunk]
            res = self.apply_blocks(self.basis.unit_blocks(cc))
            out[:, s:s + chunk] = self.basis.rows_of_blocks(res, rows, len(cc))
        return out

    # algebra
    def __matmul__(self, other):
        if isinstance(other, LinOp):
            return Product([self, other])
        return self.apply(other)

    def __add__(self, other):
        return SumOp([(1.0, self), (1.0, other)])

    def __sub__(self, other):
        return SumOp([(1.0, self), (-1.0, other)])

    def __mul__(self, scalar):
        return SumOp([(scalar, self)])

    __rmul__ = __mul__

    def __neg__(self):
        return SumOp([(-1.0, self)])


class Identity(LinOp):
    def apply_blocks(self, d):
        return {c: b.copy() for c, b in d.items()}

    def adjoint(self):
        return self


class SectorOp(LinOp):
    """Charge-preserving operator ``sum_k w_k f_k(mu) M_k`` with sparse oscillator ``M_k``.

    Each term is ``(w, f, M)``: a scalar weight, a callable of
    ``(mu_plus, mu_minus)`` or ``None`` (meaning 1), and a sparse matrix or
    ``None`` (identity).
    """

    def __init__(self, basis, terms):
        super().__init__(basis)
        self.terms = list(terms)

    def apply_blocks(self, d):
        out = {}
        for c, b in d.items():
            acc = np.zeros_like(b)
            for w, fn, mat in self.terms:
                f = w if fn is None else w * fn(*c)
                if f != 0:
                    acc += f * (b if mat is None else mat @ b)
            out[c] = acc
        return out

    def adjoint(self):
        terms = []
        for w, fn, mat in self.terms:
            fc = None if fn is None else _conj_fn(fn)
            terms.append((np.conj(w), fc, None if mat is None else mat.conj().T.tocsr()))
        return SectorOp(self.basis, terms)

    @staticmethod
    def combine(basis, coef_ops):
        """Merge scalar combinations of SectorOps into one SectorOp.

        Charge-independent sparse terms are summed into a single matrix.
        """
        const, rest = None, []
        for coef, op in coef_ops:
            for w, fn, mat in op.terms:
                if fn is None and mat is not None:
                    m = (coef * w) * mat
                    const = m if const is None else const + m
                else:
                    rest.append((coef * w, fn, mat))
        if const is not None:
            rest.insert(0, (1.0, None, const.tocsr()))
        return SectorOp(basis, rest)


def _conj_fn(fn):
    return lambda a, b: np.conj(fn(a, b))


def osc_op(basis: FockBasis, mat) -> SectorOp:
    return SectorOp(basis, [(1.0, None, mat)])


def charge_diag(basis: FockBasis, fn) -> SectorOp:
    """Diagonal charge function, e.g. ``lambda mp, mm: mp`` for ``a_{+,0}``."""
    return SectorOp(basis, [(1.0, fn, None)])


class ChargeShift(LinOp):
    """``scale * R_+^{dp} R_-^{dm}`` in the basis ``... R_+^{mu_+} R_-^{mu_-} Omega``.

    ``R_+^{dp} R_-^{dm}`` maps ``|mu_+, mu_->`` to ``(-1)^{dm mu_+} |mu_+ + dp, mu_- + dm>``.
    Targets outside the charge window are dropped.
    """

    def __init__(self, basis, dp: int, dm: int, scale: complex = 1.0):
        super().__init__(basis)
        self.dp, self.dm, self.scale = int(dp), int(dm), scale

    def apply_blocks(self, d):
        out = {}
        mu = self.basis.mu_max
        for (a, b), blk in d.items():
            t = (a + self.dp, b + self.dm)
            if abs(t[0]) > mu or abs(t[1]) > mu:
                continue
            sign = -1.0 if (self.dm * a) % 2 else 1.0
            out[t] = (sign * self.scale) * blk
        return out

    def adjoint(self):
        sign = -1.0 if (self.dp * self.dm) % 2 else 1.0
        return ChargeShift(self.basis, -self.dp, -self.dm, sign * np.conj(self.scale))


def op_klein(r: int, power: int, basis: FockBasis) -> ChargeShift:
    """``R_r^power``."""
    return ChargeShift(basis, power if r > 0 else 0, power if r < 0 else 0)


class Product(LinOp):
    """Operator product; factors listed left to right as written."""

    def __init__(self, factors):
        flat = []
        for f in factors:
            flat.extend(f.factors if isinstance(f, Product) else [f])
        super().__init__(flat[0].basis)
        self.factors = flat

    def apply_blocks(self, d):
        for f in reversed(self.factors):
            d = f.apply_blocks(d)
            if not d:
                break
        return d

    def adjoint(self):
        return Product([f.adjoint() for f in reversed(self.factors)])


class SumOp(LinOp):
    def __init__(self, terms):
        flat = []
        for coef, op in terms:
            if isinstance(op, SumOp):
                flat.extend((coef * c2, o2) for c2, o2 in op.terms)
            else:
                flat.append((coef, op))
        super().__init__(flat[0][1].basis)
        self.terms = flat

    def apply_blocks(self, d):
        acc = {}
        for coef, op in self.terms:
            if coef != 0:
                _axpy(acc, op.apply_blocks(d), coef)
        return acc

    def adjoint(self):
        return SumOp([(np.conj(c), op.adjoint()) for c, op in self.terms])

    def simplified(self):
        """Merge into a single SectorOp when every term is one."""
        if all(isinstance(op, SectorOp) for _, op in self.terms):
            return SectorOp.combine(self.basis, self.terms)
        return self


class ExpOp(LinOp):
    """``exp(scale * G)`` by the Taylor series applied to vectors.

    Intended for ``G`` that strictly raises or strictly lowers the level, in
    which case the series terminates exactly inside the truncated space.
    """

    def __init__(self, gen: LinOp, scale: complex = 1.0, max_terms: int | None = None):
        super().__init__(gen.basis)
        self.gen, self.scale = gen, scale
        self.max_terms = gen.basis.l_max + 2 if max_terms is None else max_terms

    def apply_blocks(self, d):
        acc = {c: b.copy() for c, b in d.items()}
        term = d
        for k in range(1, self.max_terms + 1):
            term = self.gen.apply_blocks(term)
            term = {c: b * (self.scale / k) for c, b in term.items()}
            if _is_zero(term):
                return acc
            _axpy(acc, term)
        if not _is_zero(self.gen.apply_blocks(term)):
            raise RuntimeError("exponential generator is not nilpotent on the truncation")
        return acc

    def adjoint(self):
        return ExpOp(self.gen.adjoint(), np.conj(self.scale), self.max_terms)


# ----------------------------------------------------------------------------
# mode operators
# ----------------------------------------------------------------------------

def op_a(r: int, n: int, basis: FockBasis) -> SectorOp:
    """``a_{r,n}``; ``n = 0`` gives the diagonal charge operator with eigenvalue ``mu_r``."""
    if n == 0:
        return charge_diag(basis, (lambda a, b: a) if r > 0 else (lambda a, b: b))
    return osc_op(basis, basis.osc_a(r, n))


def op_Q(r: int, basis: FockBasis, params: ModelParams) -> SectorOp:
    nu0 = params.nu0
    return charge_diag(basis, (lambda a, b: nu0 * a) if r > 0 else (lambda a, b: nu0 * b))


def b_expansion(r: int, n: int, params: ModelParams) -> dict:
    """``b_{r,n}`` as a linear combination ``{(r', n'): coef}`` of a-modes."""
    if n == 0:
        return {(r, 0): 1.0}
    c, s = bogo_arrays(np.array([n]), params.q)
    out = {(r, n): float(c[0])}
    if s[0] != 0:
        out[(-r, -n)] = -float(s[0])
    return out


def op_b(r: int, n: int, basis: FockBasis, params: ModelParams) -> SectorOp:
    """Bogoliubov mode ``b_{r,n} = c_n a_{r,n} - s_n a_{-r,-n}``."""
    if n == 0:
        return op_a(r, 0, basis)
    mat = None
    for (rr, nn), coef in b_expansion(r, n, params).items():
        m = coef * basis.osc_a(rr, nn)
        mat = m if mat is None else mat + m
    return osc_op(basis, mat.tocsr())


def linear_osc(basis: FockBasis, coefs: dict) -> sp.csr_matrix:
    """Sparse matrix of ``sum coef * a_{r,n}`` over nonzero modes."""
    mat = sp.csr_matrix((basis.dim_osc, basis.dim_osc), dtype=complex)
    for (r, n), c in coefs.items():
        if c != 0:
            mat = mat + c * basis.osc_a(r, n)
    return mat.tocsr()


# ----------------------------------------------------------------------------
# normal ordering
# ----------------------------------------------------------------------------

def expand_b_monomial(labels, params: ModelParams) -> dict:
    """Expand a product of b-modes into a-mode monomials (sorted label tuples)."""
    terms = {(): 1.0}
    for r, n in labels:
        new = {}
        for mono, c in terms.items():
            for lab, cb in b_expansion(r, n, params).items():
                key = tuple(sorted(mono + (lab,)))
                new[key] = new.get(key, 0.0) + c * cb
        terms = new
    return terms


class NormalOrderedPoly:
    """Builder for ``sum coef * :a_{l1} ... a_{lk}:`` over nonzero modes.

    Monomials are sorted label tuples (normal ordering makes the order of
    factors irrelevant).  The result is one sparse oscillator matrix with
    creators to the left of annihilators.
    """

    def __init__(self, basis: FockBasis):
        self.basis = basis
        self.terms: dict = {}
        self._prod_cache = {}

    def add(self, labels, coef):
        key = tuple(sorted(labels))
        self.terms[key] = self.terms.get(key, 0.0) + coef

    def add_b(self, labels, coef, params):
        for mono, c in expand_b_monomial(labels, params).items():
            self.add(mono, coef * c)

    def _prod(self, labels):
        if labels not in self._prod_cache:
            if len(labels) == 1:
                self._prod_cache[labels] = self.basis.osc_a(*labels[0]).astype(complex)
            else:
                self._prod_cache[labels] = (self._prod(labels[:1]) @ self._prod(labels[1:])).tocsr()
        return self._prod_cache[labels]

    def matrix(self) -> sp.csr_matrix:
        b = self.basis
        groups = {}
        for mono, c in self.terms.items():
            if c == 0 or any(abs(n) > b.n_max for _, n in mono):
                continue
            cre = tuple(l for l in mono if l[1] < 0)
            ann = tuple(l for l in mono if l[1] > 0)
            groups.setdefault(ann, []).append((cre, c))
        total = sp.csr_matrix((b.dim_osc, b.dim_osc), dtype=complex)
        eye = sp.identity(b.dim_osc, dtype=complex, format="csr")
        for ann, lst in groups.items():
            left = sp.csr_matrix((b.dim_osc, b.dim_osc), dtype=complex)
            for cre, c in lst:
                left = left + c * (self._prod(cre) if cre else eye)
            total = total + (left @ self._prod(ann) if ann else left)
        return total.tocsr()


def normal_order(monomial, basis: FockBasis) -> LinOp:
    """Normal-ordered product of generators.

    ``monomial`` is a sequence of ``("a", r, n)`` and ``("R", r, power)``.
    Creators go to the left, annihilators to the right, the Klein part is
    collected as ``R_+^{p} R_-^{m}`` and each zero mode is symmetrized with
    ``(X a_0 + a_0 X)/2``.  The result does not depend on the input order.
    """
    p = m = 0
    zero, cre, ann = [], [], []
    for g in monomial:
        kind, r, n = g
        if kind == "R":
            if r > 0:
                p += n
            else:
                m += n
        elif kind == "a":
            (zero if n == 0 else cre if n < 0 else ann).append((r, n))
        else:
            raise ValueError(kind)
    core: LinOp = ChargeShift(basis, p, m)
    for r, _ in sorted(zero):
        a0 = op_a(r, 0, basis)
        core = SumOp([(0.5, Product([core, a0])), (0.5, Product([a0, core]))])
    factors = []
    if cre:
        poly_c = NormalOrderedPoly(basis)
        poly_c.add(cre, 1.0)
        factors.append(osc_op(basis, poly_c.matrix()))
    factors.append(core)
    if ann:
        poly_a = NormalOrderedPoly(basis)
        poly_a.add(ann, 1.0)
        factors.append(osc_op(basis, poly_a.matrix()))
    return Product(factors) if len(factors) > 1 else factors[0]


# ----------------------------------------------------------------------------
# Luttinger vacuum
# ----------------------------------------------------------------------------

def luttinger_vacuum(basis: FockBasis, params: ModelParams, tail_tol: float = 1e-12):
    """Vacuum annihilated by all ``b_{r,n}``, ``n > 0``.

    ``Omega~ = N exp(sum_n q^n a_{+,-n} a_{-,-n} / n) Omega``; the exponent
    only raises the level, so the truncated series is exact below ``l_max``.
    The missing norm of the truncated state, known in closed form from
    ``||exp(...)Omega||^2 = prod_n 1/(1-q^{2n})``, must stay below
    ``tail_tol``.  Returns ``(state, tail)`` with ``<Omega, Omega~> > 0``.
    """
    q = params.q
    if q == 0.0:
        return basis.vacuum(), 0.0
    gen = sp.csr_matrix((basis.dim_osc, basis.dim_osc), dtype=complex)
    for n in range(1, basis.n_max + 1):
        gen = gen + (q ** n / n) * (basis.osc_a(1, -n) @ basis.osc_a(-1, -n))
    op = ExpOp(osc_op(basis, gen.tocsr()))
    blocks = op.apply_blocks(basis.vacuum_blocks())
    v = basis.from_blocks(blocks)[:, 0]
    norm2_trunc = float(np.vdot(v, v).real)
    # modes above n_max are absent from the truncation; include them in the exact norm
    n = np.arange(1, 4096)
    norm2_full = float(np.exp(-np.sum(np.log1p(-q ** (2 * n)))))
    tail = 1.0 - norm2_trunc / norm2_full
    if tail > tail_tol:
        raise ValueError(f"Luttinger vacuum tail {tail:.3g} exceeds {tail_tol:.3g}; raise l_max/n_max")
    return v / math.sqrt(norm2_trunc), tail
