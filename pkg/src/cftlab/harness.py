"""Verification suites: every identity of the model as a pass/fail check.

Each check is a function ``fn(ctx) -> list[CheckResult]`` registered under a
dotted id.  ``run_all`` executes a selection, writes a JSON summary and CSV
details, and reports whether everything passed.  Status values:

``PASS`` / ``FAIL``
    residual compared with the (scaled) tolerance on a nonempty protected subspace;
``SKIPPED``
    the protected subspace is empty at the requested truncation;
``INFO``
    informational probes that never fail the run.
"""
from __future__ import annotations

import csv
import json
import math
import time
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from . import fermion, fock, hamiltonians as ham, ncilw, specfun, transforms, vertex
from .fock import FockBasis
from .params import ModelParams, Truncation, G_const, G_pentagonal, c0, c_eps

FMT = "{:.17g}"


@dataclass
class CheckResult:
    id: str
    anchor: str
    truncation: str
    protected_dim: int
    residual: float
    tol: float
    passed: bool
    wall_time: float
    status: str = ""
    details: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.status:
            if self.protected_dim <= 0:
                self.status, self.passed = "SKIPPED", False
            else:
                self.status = "PASS" if self.passed else "FAIL"

    def line(self) -> str:
        return (f"{self.status:7s} {self.id:34s} residual={self.residual:.3e} tol={self.tol:.1e} "
                f"dim={self.protected_dim} t={self.wall_time:.2f}s")


@dataclass
class Context:
    """Model parameters, seed and tolerance scaling shared by all checks."""

    params: ModelParams = field(default_factory=ModelParams)
    seed: int = 12345
    tolerance_scale: float = 1.0

    def rng(self, salt: int = 0):
        return np.random.default_rng(self.seed + salt)

    def tol(self, t: float) -> float:
        return t * self.tolerance_scale


def fock_params(ctx: Context, **kw) -> ModelParams:
    """Parameters for operator checks on the truncated Fock space: ``ell = 1``, ``delta = 0.5``.

    At ``ell = 1`` the anyon mode weights ``e^{-pi eps n}`` fall below the
    tolerances well inside the truncations used here.
    """
    return ctx.params.with_(ell=1.0, delta=0.5, **kw)


def _trunc(b) -> str:
    if isinstance(b, FockBasis):
        return f"n_max={b.n_max},l_max={b.l_max},mu_max={b.mu_max}"
    return str(b)


def _result(cid, anchor, trunc, dim, residual, tol, t0, info=False, **details):
    residual = float(residual)
    passed = bool(residual <= tol) and dim > 0
    res = CheckResult(cid, anchor, _trunc(trunc), int(dim), residual, float(tol), passed,
                      time.perf_counter() - t0, "INFO" if info else "", details)
    return res


REGISTRY: dict = {}


def check(cid: str):
    def deco(fn):
        REGISTRY[cid] = fn
        return fn
    return deco


# ----------------------------------------------------------------------------
# constants and special functions
# ----------------------------------------------------------------------------

@check("specfun.theta_paths")
def check_theta_paths(ctx: Context):
    t0 = time.perf_counter()
    x = ctx.rng(1).uniform(-1.5, 1.5, 64)
    worst = 0.0
    for q in (0.0, 0.2, 0.5, 0.8):
        for eps in (0.0, 0.05, 0.3):
            for kind in (1, 4):
                a = specfun.theta_reg(kind, x, q, eps, "product")
                b = specfun.theta_reg(kind, x, q, eps, "log")
                worst = max(worst, float(np.max(np.abs(a - b) / np.maximum(np.abs(a), 1e-300))))
    return [_result("specfun.theta_paths", "regularized theta functions", "product terms to 1e-17",
                    len(x), worst, ctx.tol(1e-12), t0)]


@check("specfun.zeta_paths")
def check_zeta_paths(ctx: Context):
    t0 = time.perf_counter()
    p = ctx.params
    z = ctx.rng(2).uniform(0.1, 0.9, 32) * p.ell * np.where(ctx.rng(3).random(32) > 0.5, 1, -1)
    z = z + 1j * ctx.rng(4).uniform(-0.4, 0.4, 32) * p.delta
    a = specfun.zeta1(z, p, "series")
    b = specfun.zeta1(z, p, "lattice")
    res = float(np.max(np.abs(a - b)))
    return [_result("specfun.zeta_paths", "modified Weierstrass zeta", "series vs lattice", len(z),
                    res, ctx.tol(1e-10), t0)]


@check("specfun.wp_paths")
def check_wp_paths(ctx: Context):
    t0 = time.perf_counter()
    p = ctx.params
    x = np.linspace(-0.9, 0.9, 25) * p.ell
    worst = 0.0
    for eps in (0.1, 0.3):
        for shifted in (False, True):
            a = specfun.wp1_reg(x, eps, shifted, p, "analytic")
            b = specfun.wp1_reg(x, eps, shifted, p, "fd", h=1e-2 * eps)
            worst = max(worst, float(np.max(np.abs(a - b) / np.maximum(1.0, np.abs(a)))))
    return [_result("specfun.wp_paths", "regularized wp_1", "5-point stencil, h = eps/100", len(x), worst,
                    ctx.tol(1e-6), t0)]


@check("specfun.sgn_delta_paths")
def check_sgn_delta(ctx: Context):
    t0 = time.perf_counter()
    p = ctx.params
    x = np.linspace(-0.95, 0.95, 39) * p.ell
    worst = 0.0
    for eps in (0.05, 0.2):
        worst = max(worst, float(np.max(np.abs(specfun.sgn_reg(x, eps, p, "log")
                                               - specfun.sgn_reg(x, eps, p, "series")))))
        worst = max(worst, float(np.max(np.abs(specfun.dirac_reg(x, eps, p, "closed")
                                               - specfun.dirac_reg(x, eps, p, "series")))))
    return [_result("specfun.sgn_delta_paths", "regularized sgn and Dirac delta", "mode series",
                    len(x), worst, ctx.tol(1e-10), t0)]


@check("constants.G_paths")
def check_G(ctx: Context):
    t0 = time.perf_counter()
    worst = 0.0
    for delta in (0.2, 0.5, 1.0, 3.0):
        p = ctx.params.with_(delta=delta)
        worst = max(worst, abs(G_const(p) - G_pentagonal(p)))
    return [_result("constants.G_paths", "G as an infinite product", "product vs pentagonal", 4,
                    worst, ctx.tol(1e-13), t0)]


@check("constants.c0_q0")
def check_c0_q0(ctx: Context):
    t0 = time.perf_counter()
    p = ctx.params.with_(delta=math.inf)
    res = abs(c0(p) - p.kappa ** 2 / 3)
    return [_result("constants.c0_q0", "c_0 at q = 0", "exact", 1, res, 0.0, t0)]


def c_eps_rate(params: ModelParams, eps_list=(1e-2, 5e-3, 2.5e-3, 1.25e-3)):
    """Observed order of ``|c_eps - c_0|`` from successive halvings of ``eps``."""
    d = [abs(c_eps(params, e) - c0(params)) for e in eps_list]
    return [math.log(d[i] / d[i + 1]) / math.log(eps_list[i] / eps_list[i + 1]) for i in range(len(d) - 1)], d


def _q_half(ctx: Context) -> ModelParams:
    """``ell = pi`` and ``q = 0.5``."""
    p = ctx.params.with_(ell=math.pi)
    return p.with_(delta=math.log(2.0) / (2 * p.kappa))


@check("constants.c_eps_rate")
def check_c_eps_rate(ctx: Context):
    t0 = time.perf_counter()
    p = _q_half(ctx)
    orders, d = c_eps_rate(p)
    res = max(abs(o - 1.0) for o in orders)
    return [_result("constants.c_eps_rate", "c_eps tends to c_0", "q=0.5,ell=pi", len(orders), res,
                    ctx.tol(0.1), t0, orders=orders, diffs=d)]


@check("constants.c_eps_limit")
def check_c_eps_limit(ctx: Context):
    """``|c_{1e-4} - c_0|`` at ``q = 0.5``: reported, not gated (the O(eps) coefficient is about 2.6)."""
    t0 = time.perf_counter()
    p = _q_half(ctx)
    res = abs(c_eps(p, 1e-4) - c0(p))
    return [_result("constants.c_eps_limit", "c_eps tends to c_0", "q=0.5,ell=pi", 1, res,
                    ctx.tol(1e-6), t0, info=True)]


@check("constants.H3_duality")
def check_duality(ctx: Context, trunc=Truncation(6, 8, 2)):
    t0 = time.perf_counter()
    p = ctx.params
    b = FockBasis(trunc)
    build = ham.H3Builder(b, p)
    nu = p.nu
    op = fock.SectorOp.combine(b, [(1.0, build(nu)), (nu * nu, build(-1 / nu))])
    res = max(float(abs(ham.sector_matrix(op, mu)).max()) for mu in b.charges)
    return [_result("constants.H3_duality", "H_{3,nu} + nu^2 H_{3,-1/nu} = 0", b, b.dim, res,
                    ctx.tol(1e-12), t0)]


# ----------------------------------------------------------------------------
# transforms
# ----------------------------------------------------------------------------

def _band_limited(params, n_modes=6, seed=0):
    rng = np.random.default_rng(seed)
    a = rng.standard_normal(n_modes) / np.arange(1, n_modes + 1)
    b = rng.standard_normal(n_modes) / np.arange(1, n_modes + 1)
    k = params.kappa

    def f(x):
        n = np.arange(1, n_modes + 1)
        ph = 2 * k * np.multiply.outer(x, n)
        return np.cos(ph) @ a + np.sin(ph) @ b
    return f


@check("transforms.oracle")
def check_transform_oracle(ctx: Context, n_grid=64):
    t0 = time.perf_counter()
    p = ctx.params
    f = _band_limited(p, seed=ctx.seed)
    x = transforms.grid(n_grid, p.ell)
    Tf = transforms.apply_T(f(x), p)
    Ttf = transforms.apply_Tt(f(x), p)
    xs = x[::4]
    pv, _ = transforms.pv_oracle_T(f, xs, p)
    qd, _ = transforms.quad_oracle_Tt(f, xs, p)
    res = max(float(np.max(np.abs(Tf[::4] - pv))), float(np.max(np.abs(Ttf[::4] - qd))))
    return [_result("transforms.oracle", "nonlocal operators T and T~", f"N={n_grid}", len(xs), res,
                    ctx.tol(1e-8), t0)]


@check("transforms.hilbert_limit")
def check_hilbert_limit(ctx: Context):
    t0 = time.perf_counter()
    p = ctx.params
    delta = -math.log(1e-8) / (2 * p.kappa)
    pq = p.with_(delta=delta)
    n = np.arange(-32, 33)
    m = transforms.multiplier_T(n, pq)
    res = float(np.max(np.abs(m - 1j * np.sign(n))))
    return [_result("transforms.hilbert_limit", "periodic Hilbert transform limit", "q=1e-8", len(n),
                    res, ctx.tol(1e-10), t0)]


# ----------------------------------------------------------------------------
# Fock space algebra
# ----------------------------------------------------------------------------

def algebra_residuals(basis: FockBasis, params: ModelParams, modes=(1, 2, 3)) -> dict:
    """Residuals of the Heisenberg, Klein and Bogoliubov relations on protected states.

    A relation whose operators move the oscillator level by at most ``B``
    and the charge ``mu_r`` by at most ``K`` along the way is checked on
    columns of level ``<= l_max - B`` and ``|mu_r| <= mu_max - K``, rows being
    all states of level ``<= l_max``.  Norms are Frobenius norms of the
    restricted difference.
    """
    L, M = basis.l_max, basis.mu_max
    out = {}

    def pr(lhs, rhs, budget, klein):
        return vertex.protected_residual(lhs, rhs, basis, L - budget, col_mu_max=M - klein,
                                         row_level=L, norm="fro")

    ident = fock.Identity(basis)
    ns = [n for m in modes for n in (m, -m)] + [0]
    worst = 0.0
    for r in (1, -1):
        for rp in (1, -1):
            for n in ns:
                for m in ns:
                    a, b = fock.op_a(r, n, basis), fock.op_a(rp, m, basis)
                    rhs = ident * (n if (r == rp and n == -m) else 0.0)
                    worst = max(worst, pr(a @ b - b @ a, rhs, abs(n) + abs(m), 0))
    out["a,a"] = worst
    worst = 0.0
    for r in (1, -1):
        for rp in (1, -1):
            R = fock.op_klein(rp, 1, basis)
            for n in ns:
                a = fock.op_a(r, n, basis)
                rhs = R * (1.0 if (n == 0 and r == rp) else 0.0)
                worst = max(worst, pr(a @ R - R @ a, rhs, abs(n), 1))
    out["a,R"] = worst
    Rp, Rm = fock.op_klein(1, 1, basis), fock.op_klein(-1, 1, basis)
    out["R+R-"] = pr(Rp @ Rm, Rm @ Rp * -1.0, 0, 1)
    worst = 0.0
    for mp, mm, np_, nm in [(1, 1, 1, 0), (0, 1, 1, 1), (1, -1, -1, 1), (2, 1, -1, 0), (-1, 2, 1, -1)]:
        lhs = fock.Product([fock.op_klein(1, mp, basis), fock.op_klein(-1, mm, basis),
                            fock.op_klein(1, np_, basis), fock.op_klein(-1, nm, basis)])
        sign = -1.0 if (mm * np_) % 2 else 1.0
        rhs = fock.Product([fock.op_klein(1, mp + np_, basis), fock.op_klein(-1, mm + nm, basis)]) * sign
        # largest charge excursion of each chirality on either side
        k = max(abs(np_), abs(np_ + mp), abs(mp + np_), abs(nm), abs(nm + mm))
        worst = max(worst, pr(lhs, rhs, 0, k))
    out["RRRR"] = worst
    worst = 0.0
    for r in (1, -1):
        worst = max(worst, pr(fock.op_klein(r, 1, basis).adjoint(), fock.op_klein(r, -1, basis), 0, 1))
        for n in ns:
            worst = max(worst, pr(fock.op_a(r, n, basis).adjoint(), fock.op_a(r, -n, basis), abs(n), 0))
    out["adjoints"] = worst
    vac = basis.vacuum_blocks()
    worst = 0.0
    for r in (1, -1):
        for n in list(modes) + [0]:
            worst = max(worst, fock.block_norm(fock.op_a(r, n, basis).apply_blocks(vac)))
    out["highest weight"] = worst
    worst = 0.0
    for mp in range(-M, M + 1):
        for mm in range(-M, M + 1):
            st = fock.Product([fock.op_klein(1, mp, basis), fock.op_klein(-1, mm, basis)]).apply_blocks(vac)
            # <Omega, R_+^mp R_-^mm Omega> = delta delta
            blk = st.get((0, 0))
            val = 0.0 if blk is None else complex(blk[0, 0])
            worst = max(worst, abs(val - (1.0 if mp == mm == 0 else 0.0)))
    out["vacuum product"] = worst
    worst = 0.0
    for r in (1, -1):
        for rp in (1, -1):
            R = fock.op_klein(rp, 1, basis)
            for n in ns:
                b = fock.op_b(r, n, basis, params)
                rhs = R * (1.0 if (n == 0 and r == rp) else 0.0)
                worst = max(worst, pr(b @ R - R @ b, rhs, abs(n), 1))
                if rp == r:
                    worst = max(worst, pr(b.adjoint(), fock.op_b(r, -n, basis, params), abs(n), 0))
                for m in ns:
                    bb = fock.op_b(rp, m, basis, params)
                    rhs = ident * (n if (r == rp and n == -m) else 0.0)
                    worst = max(worst, pr(b @ bb - bb @ b, rhs, abs(n) + abs(m), 0))
    out["b relations"] = worst
    return out


def car_residual(fb: fermion.FermionBasis) -> float:
    """Largest entry of ``{psi, psi^dagger} - delta`` and ``{psi, psi}`` over all mode pairs."""
    ops = {m: fermion.op_psi(*m, fb) for m in fb.modes}
    adj = {m: op.T.conj().tocsr() for m, op in ops.items()}
    worst = 0.0
    eye = fermion.sp.identity(fb.dim, format="csr")
    for m1 in fb.modes:
        for m2 in fb.modes:
            a = fermion.anticommutator(ops[m1], adj[m2])
            if m1 == m2:
                a = a - eye
            worst = max(worst, float(abs(a).max()) if a.nnz else 0.0)
            b = fermion.anticommutator(ops[m1], ops[m2])
            worst = max(worst, float(abs(b).max()) if b.nnz else 0.0)
    return worst


@check("fock.algebra")
def check_algebra(ctx: Context, trunc=Truncation(6, 8, 3)):
    t0 = time.perf_counter()
    b = FockBasis(trunc)
    p = ctx.params.with_(trunc=trunc)
    res = algebra_residuals(b, p)
    dim = len(b.select(level_max=b.l_max - 6, mu_max=b.mu_max - 2))
    return [_result("fock.algebra", "Heisenberg, Klein and Bogoliubov relations", b, dim,
                    max(res.values()), ctx.tol(1e-12), t0, **res)]


@check("fermion.car")
def check_car(ctx: Context, n_modes=3):
    t0 = time.perf_counter()
    fb = fermion.FermionBasis(n_modes)
    res = car_residual(fb)
    return [_result("fermion.car", "canonical anticommutator relations", f"n_modes={n_modes}", fb.dim,
                    res, 0.0, t0)]


# ----------------------------------------------------------------------------
# vertex operators and anyons
# ----------------------------------------------------------------------------

def multiplication_residual(basis: FockBasis, params: ModelParams, rng, n_pairs=3, n_support=4,
                            eps=0.2, col_level=2, row_level=None) -> float:
    """Max entry of ``Phi(alpha) Phi(beta) - chi Phi(alpha + beta)`` on low-level columns.

    Descriptors get mode amplitudes ``e^{-2 kappa eps n}/n`` so that the
    weight beyond ``l_max`` is negligible.
    """
    row_level = basis.l_max // 2 if row_level is None else row_level
    decay = 2 * params.kappa * eps
    worst = 0.0
    cols = basis.select(level_max=col_level, mu_max=0)
    rows = basis.select(level_max=row_level)
    for _ in range(n_pairs):
        a = vertex.random_descriptor(rng, n_support, mu_max=1, decay=decay)
        bb = vertex.random_descriptor(rng, n_support, mu_max=1, decay=decay)
        chi = vertex.cocycle_chi(a.mu, bb.mu, a, bb, params)
        lhs = fock.Product([vertex.build_vertex(a, basis, params), vertex.build_vertex(bb, basis, params)])
        rhs = vertex.build_vertex(a + bb, basis, params) * chi
        diff = (lhs - rhs).restricted(rows, cols)
        scale = max(1.0, float(np.max(np.abs(rhs.restricted(rows, cols)))))
        worst = max(worst, float(np.max(np.abs(diff))) / scale)
    return worst


def nfold_residual(basis: FockBasis, params: ModelParams, x, eps, nus, rs, col_level=1, row_level=None):
    """``phi_1 ... phi_N`` versus the iterated cocycle times ``Phi(sum)`` on low-level columns."""
    row_level = basis.l_max // 2 if row_level is None else row_level
    cols = basis.select(level_max=col_level, mu_max=0)
    rows = basis.select(level_max=row_level)
    descs = [vertex.anyon_desc(r, nu, xx, eps, params, basis.n_max) for r, nu, xx in zip(rs, nus, x)]
    acc, logc = descs[0], 0j
    for d in descs[1:]:
        logc += vertex.log_chi(acc.mu, d.mu, acc, d, params)
        acc = acc + d
    lhs = fock.Product([vertex.build_vertex(d, basis, params) for d in descs])
    rhs = vertex.build_vertex(acc, basis, params) * complex(np.exp(logc))
    diff = (lhs - rhs).restricted(rows, cols)
    scale = max(1.0, float(np.max(np.abs(rhs.restricted(rows, cols)))))
    return float(np.max(np.abs(diff))) / scale, len(cols)


@check("vertex.cocycle")
def check_cocycle(ctx: Context, trunc=Truncation(24, 24, 2), eps=0.2):
    t0 = time.perf_counter()
    p = fock_params(ctx, trunc=trunc)
    b = FockBasis(trunc)
    res = multiplication_residual(b, p, ctx.rng(7), eps=eps)
    rng = ctx.rng(8)
    worst = 0.0
    for _ in range(5):
        a = vertex.random_descriptor(rng, 4)
        bb = vertex.random_descriptor(rng, 4)
        worst = max(worst, abs(vertex.jm_jp_commutator(a, bb, p, "explicit") - vertex.jm_jp_commutator(a, bb, p, "modes")))
    dim = len(b.select(level_max=2, mu_max=0))
    return [_result("vertex.cocycle", "vertex multiplication rule", b, dim, max(res, worst), ctx.tol(1e-9), t0,
                    operator=res, scalar=worst)]


@check("vertex.nfold")
def check_nfold(ctx: Context, trunc=Truncation(24, 24, 2), eps=0.25):
    t0 = time.perf_counter()
    p = fock_params(ctx, trunc=trunc)
    b = FockBasis(trunc)
    nu0 = p.nu0
    res, dim = nfold_residual(b, p, [0.3, -0.2, 0.55], eps, [nu0, -nu0, nu0], [1, 1, -1])
    return [_result("vertex.nfold", "N-fold normal ordering of anyons", b, dim, res, ctx.tol(1e-9), t0)]


def correlator_errors(params: ModelParams, insertions, levels, mu_max=1):
    errs = []
    exact = vertex.correlator_closed(insertions, params)
    for L in levels:
        b = FockBasis(Truncation(L, L, mu_max))
        errs.append(abs(vertex.correlator_fock(insertions, b, params) - exact) / abs(exact))
    return errs, exact


@check("vertex.correlators")
def check_correlators(ctx: Context, trunc=Truncation(16, 16, 1), eps=0.25):
    t0 = time.perf_counter()
    p = fock_params(ctx)
    nu = p.nu0
    two = [vertex.Insertion(1, nu, 0.3, eps), vertex.Insertion(1, -nu, -0.2, eps)]
    four = [vertex.Insertion(1, nu, 0.3, eps), vertex.Insertion(-1, nu, -0.4, eps),
            vertex.Insertion(1, -nu, -0.1, eps), vertex.Insertion(-1, -nu, 0.6, eps)]
    b = FockBasis(trunc)
    worst = 0.0
    for ins in (two, four):
        ex = vertex.correlator_closed(ins, p)
        worst = max(worst, abs(vertex.correlator_fock(ins, b, p) - ex) / abs(ex),
                    abs(vertex.correlator_cocycle(ins, p, 200) - ex) / abs(ex))
    return [_result("vertex.correlators", "anyon correlation functions", b, 2, worst, ctx.tol(1e-6), t0)]


def decay_slope(params: ModelParams, eps: float, levels=(4, 6, 8, 10)):
    """Fitted slope of ``log(error)`` against ``l_max`` for a two-point function, and the prediction.

    The dropped contractions carry ``e^{-2 kappa (eps + eps') n}``, so the
    predicted slope is ``-4 kappa eps``.
    """
    nu = params.nu0
    ins = [vertex.Insertion(1, nu, 0.3, eps), vertex.Insertion(1, -nu, -0.2, eps)]
    errs, _ = correlator_errors(params, ins, levels)
    slope = float(np.polyfit(levels, np.log(errs), 1)[0])
    return slope, -4 * params.kappa * eps, errs


@check("vertex.correlator_decay")
def check_correlator_decay(ctx: Context, eps=0.25):
    t0 = time.perf_counter()
    slope, pred, errs = decay_slope(fock_params(ctx), eps)
    res = abs(slope / pred - 1)
    return [_result("vertex.correlator_decay", "anyon correlation functions", "l_max=4..10", len(errs),
                    res, ctx.tol(0.15), t0, slope=slope, predicted=pred, errors=errs)]


def exchange_residual(basis, params, a: vertex.Insertion, b: vertex.Insertion, col_level=1, row_level=None):
    """``phi_a phi_b - p phi_b phi_a`` on low-level columns.

    ``p`` is the cocycle phase of the descriptors truncated at ``basis.n_max``,
    so the residual measures the operator algebra alone.
    """
    row_level = basis.l_max // 2 if row_level is None else row_level
    cols = basis.select(level_max=col_level, mu_max=0)
    rows = basis.select(level_max=row_level)
    pa = vertex.anyon(a.r, a.nu, a.x, a.eps, basis, params)
    pb = vertex.anyon(b.r, b.nu, b.x, b.eps, basis, params)
    ph = vertex.exchange_phase(a, b, params, n_modes=basis.n_max, path="cocycle")
    lhs = fock.Product([pa, pb])
    rhs = fock.Product([pb, pa]) * ph
    diff = (lhs - rhs).restricted(rows, cols)
    scale = max(1.0, float(np.max(np.abs(lhs.restricted(rows, cols)))))
    return float(np.max(np.abs(diff))) / scale, len(cols)


def exchange_pairs(params: ModelParams, eps: float):
    """Representative pairs: same and opposite chirality, both anyon types, fermions at ``nu0 = 1``."""
    nu0, nu = params.nu0, params.nu
    pf = params.with_(r0=1, s0=1)
    return [
        (params, vertex.Insertion(1, nu0, 0.3, eps), vertex.Insertion(1, -nu0, -0.25, eps)),
        (params, vertex.Insertion(1, nu, 0.3, eps), vertex.Insertion(-1, nu0, -0.25, eps)),
        (params, vertex.Insertion(-1, nu, 0.1, eps), vertex.Insertion(-1, -1 / nu, 0.5, eps)),
        (pf, vertex.Insertion(1, -1.0, 0.3, eps), vertex.Insertion(1, -1.0, -0.2, eps)),
        (pf, vertex.Insertion(1, -1.0, 0.3, eps), vertex.Insertion(-1, -1.0, -0.2, eps)),
    ]


@check("vertex.exchange")
def check_exchange(ctx: Context, trunc=Truncation(16, 16, 3), eps=0.3):
    t0 = time.perf_counter()
    b = FockBasis(trunc)
    op_res, phase_res, dim = 0.0, 0.0, 0
    for p, a, c in exchange_pairs(fock_params(ctx), eps):
        r, dim = exchange_residual(b, p, a, c)
        op_res = max(op_res, r)
        phase_res = max(phase_res, abs(vertex.exchange_phase(a, c, p, path="cocycle")
                                       - vertex.exchange_phase(a, c, p, path="closed")))
    return [_result("vertex.exchange", "anyon exchange relations", b, dim, max(op_res, phase_res),
                    ctx.tol(1e-8), t0, operator=op_res, phase=phase_res)]


def exchange_limit(params: ModelParams, eps=1e-3, xs=None):
    """Cocycle-route exchange phase at small ``eps`` versus the closed form, and its distance to the ``eps -> 0`` limit."""
    xs = np.linspace(-0.9, 0.9, 10) * params.ell if xs is None else xs
    worst, lim = 0.0, 0.0
    for nu in (params.nu0, params.nu, -1 / params.nu):
        for dx in xs:
            a = vertex.Insertion(1, nu, float(dx), eps)
            b = vertex.Insertion(1, params.nu0, 0.0, eps)
            pc = vertex.exchange_phase(a, b, params, path="cocycle")
            pz = vertex.exchange_phase(a, b, params, path="closed")
            worst = max(worst, abs(pc - pz))
            lim = max(lim, abs(pz - np.exp(-1j * math.pi * nu * params.nu0 * np.sign(dx))))
    return worst, lim


@check("vertex.exchange_limit")
def check_exchange_limit(ctx: Context, eps=1e-3):
    t0 = time.perf_counter()
    res, lim = exchange_limit(ctx.params, eps)
    return [_result("vertex.exchange_limit", "regularized sign function", f"eps={eps}", 20, res,
                    ctx.tol(1e-6), t0, distance_to_sign=lim)]


# ----------------------------------------------------------------------------
# Hamiltonians
# ----------------------------------------------------------------------------

@check("hamiltonians.representations")
def check_representations(ctx: Context, trunc=Truncation(4, 6, 1)):
    t0 = time.perf_counter()
    p = ctx.params.with_(trunc=trunc)
    b = FockBasis(trunc)
    parts = {}
    for k in (2, 3):
        for r in (1, -1):
            d = fock.SectorOp.combine(b, [(1.0, ham.build_W(k, r, b, p)), (-1.0, ham.W_from_rho(k, r, b, p))])
            parts[f"W{k}{'+' if r > 0 else '-'}"] = max(float(abs(ham.sector_matrix(d, mu)).max()) for mu in b.charges)
    d = fock.SectorOp.combine(b, [(1.0, ham.build_C(b, p)), (-1.0, ham.C_from_transforms(b, p))])
    parts["C"] = max(float(abs(ham.sector_matrix(d, mu)).max()) for mu in b.charges)
    return [_result("hamiltonians.representations", "boson representations of W_2, W_3, C", b, b.dim,
                    max(parts.values()), ctx.tol(1e-9), t0, **parts)]


@check("hamiltonians.substitution")
def check_substitution(ctx: Context):
    t0 = time.perf_counter()
    p = ctx.params
    rng = ctx.rng(11)
    worst, n = 0.0, 0
    for counts in [(1, 1, 1, 1), (2, 1, 1, 0), (1, 0, 2, 1), (2, 2, 1, 1)]:
        for g in (2.0, 0.5, 3.0):
            val = ham.substitution_check(*counts, g, p, rng)
            worst = max(worst, val)
            n += 1
    return [_result("hamiltonians.substitution", "substitution into the deformed eCS potential",
                    "product formula", n, worst, ctx.tol(1e-12), t0)]


@check("ncilw.heisenberg")
def check_heisenberg(ctx: Context, trunc=Truncation(8, 10, 1), n_x=32, eps=0.0):
    t0 = time.perf_counter()
    p = ctx.params.with_(trunc=trunc)
    b = FockBasis(trunc)
    xs = transforms.grid(n_x, p.ell)
    rep = ncilw.heisenberg_residual(xs, eps, b, p)
    dim = rep.protected_dim
    return [_result("ncilw.heisenberg.exact", "quantum ncILW equation", b, dim, rep.exact, ctx.tol(1e-8), t0,
                    **{k: v for k, v in rep.residuals.items() if k != "W2_fd"}),
            _result("ncilw.heisenberg.fd", "quantum ncILW equation", b, dim, rep.fd, ctx.tol(1e-6), t0)]


def pde_run(params: ModelParams, n_grid=256, dt=1e-3, T=1.0, preset="waves", amplitude=3.0, g=None):
    state = ncilw.preset_initial(preset, n_grid, params.ell, amplitude)
    n = int(round(T / dt))
    return ncilw.integrate(state, dt, n, params, "RK4", g, log_every=10)


@check("ncilw.pde_conservation")
def check_pde(ctx: Context):
    t0 = time.perf_counter()
    p = ctx.params.with_(ell=2 * math.pi, delta=1.0)
    tr = pde_run(p)
    mass = max(tr.drift("mass_u"), tr.drift("mass_v"))
    other = max(tr.drift("momentum"), tr.drift("hamiltonian"))
    return [_result("ncilw.pde.mass", "classical ncILW conservation laws", "N=256,dt=1e-3", 256, mass,
                    ctx.tol(1e-10), t0),
            _result("ncilw.pde.momentum_energy", "classical ncILW conservation laws", "N=256,dt=1e-3", 256,
                    other, ctx.tol(1e-8), t0)]


@check("ncilw.pde_order")
def check_pde_order(ctx: Context):
    t0 = time.perf_counter()
    p = ctx.params.with_(ell=2 * math.pi, delta=1.0)
    state = ncilw.preset_initial("waves", 256, p.ell, 3.0)
    orders, diffs = ncilw.convergence_order(state, 0.5, [1e-3, 5e-4, 2.5e-4], p)
    res = max(abs(o - 4) for o in orders)
    return [_result("ncilw.pde.order", "RK4 self-convergence", "N=256", len(orders), res, ctx.tol(0.1), t0,
                    orders=orders)]


# ----------------------------------------------------------------------------
# second quantization, vacuum identity, anyon commutators
# ----------------------------------------------------------------------------

SQ_LABELS = {
    "(+,1)": [ham.ParticleLabel(1)],
    "(+,hole)": [ham.ParticleLabel(1, True)],
    "(-,1)": [ham.ParticleLabel(-1)],
    "(-,hole)": [ham.ParticleLabel(-1, True)],
    "(+,1)(+,1)": [ham.ParticleLabel(1), ham.ParticleLabel(1)],
    "(+,1)(-,1)": [ham.ParticleLabel(1), ham.ParticleLabel(-1)],
    "(+,1)(+,hole)": [ham.ParticleLabel(1), ham.ParticleLabel(1, True)],
    "(-,hole)(+,hole)": [ham.ParticleLabel(-1, True), ham.ParticleLabel(1, True)],
}
SQ_POINTS = {1: [0.3], 2: [0.35, -0.3]}


def sq_params(ctx: Context) -> ModelParams:
    """``g = 2`` at ``ell = 1``, ``delta = 0.5`` (``q`` about 0.21)."""
    return ctx.params.with_(ell=1.0, delta=0.5, r0=2, s0=1)


def suite_second_quantization(ctx: Context, trunc=Truncation(16, 16, 4), eps=0.25, labels=None):
    p = sq_params(ctx).with_(trunc=trunc)
    b = FockBasis(trunc)
    H3 = ham.build_H3(b, p)
    out = []
    for name in labels or SQ_LABELS:
        t0 = time.perf_counter()
        labs = SQ_LABELS[name]
        rep = ham.second_quantization_check(labs, SQ_POINTS[len(labs)], eps, b, p, H3=H3)
        out.append(_result(f"eCS.second_quantization{name}", "twofold second quantization of eCS", b,
                           rep.rows, rep.residual / max(rep.scale, 1.0), ctx.tol(1e-5), t0,
                           psi_norm=rep.psi_norm, lhs_norm=rep.lhs_norm))
    return out


@check("eCS.second_quantization")
def check_sq(ctx: Context):
    return suite_second_quantization(ctx)


def psi_decay(ctx: Context, trunc=Truncation(12, 12, 2), eps_list=(0.4, 0.2, 0.1), row_level=2):
    """``D(eps) = ||P Psi(eps) Omega|| / eps`` for single anyons of each label.

    ``P`` projects on states of level ``<= row_level``.  Returns per label the
    norms and the increment ratio ``(D(e3) - D(e2))/(D(e2) - D(e1))``, which
    stays at or below 1 for a decay at least linear in ``eps`` and equals
    ``2^{1-p} > 1`` for ``eps^p`` with ``p < 1``.
    """
    p = ctx.params.with_(ell=math.pi, delta=math.pi / 2, r0=2, s0=1, trunc=trunc)
    b = FockBasis(trunc)
    rows = b.select(level_max=row_level)
    out = {}
    for name in ("(+,1)", "(+,hole)", "(-,1)", "(-,hole)"):
        labs = SQ_LABELS[name]
        norms = []
        for e in eps_list:
            v = b.rows_of_blocks(ham.psi_apply(labs, SQ_POINTS[1], e, b, p), rows, 1)[:, 0]
            norms.append(float(np.linalg.norm(v)))
        D = [nv / e for nv, e in zip(norms, eps_list)]
        ratio = (D[2] - D[1]) / (D[1] - D[0]) if D[1] != D[0] else 0.0
        out[name] = {"norms": norms, "ratio": ratio, "decreasing": bool(norms[0] > norms[1] > norms[2])}
    return out


@check("eCS.psi_decay")
def check_psi_decay(ctx: Context):
    t0 = time.perf_counter()
    out = psi_decay(ctx)
    res = max(v["ratio"] if v["decreasing"] else math.inf for v in out.values())
    return [_result("eCS.psi_decay", "correction term vanishes as eps -> 0", "n_max=l_max=12,ell=pi",
                    len(out), res, 1.0, t0, **{k: v["ratio"] for k, v in out.items()})]


def suite_vacuum_identity(ctx: Context, trunc=Truncation(8, 8, 1), n_desc=100, n_support=4):
    t0 = time.perf_counter()
    p = ctx.params.with_(trunc=trunc)
    b = FockBasis(trunc)
    builder = ham.H3Builder(b, p)
    H3 = builder()
    rng = ctx.rng(21)
    worst, per = 0.0, np.zeros(2, complex)
    W3 = {r: ham.build_W(3, r, b, p) for r in (1, -1)}
    for _ in range(n_desc):
        d = vertex.random_descriptor(rng, n_support, mu_max=0, real=True)
        vop = vertex.build_vertex(d, b, p)
        worst = max(worst, abs(ham.vacuum_identity(vop, H3)))
        for i, r in enumerate((1, -1)):
            per[i] += abs(ham.vacuum_identity(vop, W3[r])) / n_desc
    ident = abs(ham.vacuum_identity(fock.Identity(b), H3))
    charged = vertex.random_descriptor(rng, n_support, mu_max=1)
    charged = vertex.VertexDescriptor((1, 0), charged.alpha0, charged.ap, charged.am)
    sel = abs(ham.vacuum_identity(vertex.build_vertex(charged, b, p), H3))
    return [_result("eCS.vacuum_identity", "vacuum expectation of [H_3, Phi]", b, n_desc,
                    max(worst, ident, sel), ctx.tol(1e-9), t0,
                    mean_abs_W3_plus=float(abs(per[0])), mean_abs_W3_minus=float(abs(per[1])))]


@check("eCS.vacuum_identity")
def check_vacuum(ctx: Context):
    return suite_vacuum_identity(ctx)


def suite_anyon_commutators(ctx: Context, trunc=Truncation(12, 12, 2), eps=0.3, x=0.3):
    p = ctx.params.with_(ell=1.0, delta=0.5, r0=2, s0=1, trunc=trunc)
    b = FockBasis(trunc)
    tols = {"W1": 1e-12, "W2": 1e-6, "W3": 1e-5, "C": 1e-10}
    out = []
    for r in (1, -1):
        for nu in (p.nu, -1 / p.nu):
            t0 = time.perf_counter()
            rep = ham.anyon_commutator_check(r, nu, x, eps, b, p, row_level=b.l_max // 2 - 1, col_level=1)
            for key, val in rep.residuals.items():
                kind = key.split(",")[0]
                out.append(_result(f"anyon.commutator.{key}[r={r:+d},nu={nu:+.3f}]",
                                   "commutators of W_k and C with anyons", b, rep.cols, val,
                                   ctx.tol(tols[kind]), t0, scale=rep.scales[key]))
    return out


@check("anyon.commutators")
def check_anyon_commutators(ctx: Context):
    return suite_anyon_commutators(ctx)


# ----------------------------------------------------------------------------
# fermions
# ----------------------------------------------------------------------------

@check("fermion.sector_dims")
def check_sector_dims(ctx: Context, level=6, mu_max=2):
    t0 = time.perf_counter()
    f = fermion.fermion_sector_dims(level + mu_max, level, mu_max)
    bdims = fermion.boson_sector_dims(level, mu_max)
    fb = FockBasis(Truncation(level, level, mu_max))
    bz = {}
    one = fock.partition_counts(level)
    for L in range(level + 1):
        bz[L] = int(np.sum((fb.part_level[fb.osc_ip] == L) & (fb.part_level[fb.osc_im] == 0)))
    mism = sum(f[k] != bdims[k] for k in f) + sum(bz[L] != one[L] for L in bz)
    return [_result("fermion.sector_dims", "bosonization character identity", f"level<={level}", len(f),
                    mism, 0.0, t0)]


@check("fermion.h2_spectrum")
def check_h2_spectrum(ctx: Context, level=6):
    t0 = time.perf_counter()
    out = []
    for r0, s0 in [(1, 1), (2, 1)]:
        p = ctx.params.with_(delta=math.inf, r0=r0, s0=s0)
        cmp_ = fermion.compare_h2_spectra(p, level, 1)
        res = cmp_.max_abs_diff if cmp_.dims_match else math.inf
        out.append(_result(f"fermion.h2_spectrum[nu0={p.nu0:.3f}]", "H_2 and its fermion form at q = 0",
                           f"level<={level}", len(cmp_.sectors), res, ctx.tol(1e-10), t0))
        t0 = time.perf_counter()
    return out


@check("fermion.wf3_enumeration")
def check_wf3(ctx: Context, n_modes=3):
    """``W^F_{3,r}`` diagonal versus a direct loop over occupied modes."""
    t0 = time.perf_counter()
    p = ctx.params
    fb = fermion.FermionBasis(n_modes)
    worst = 0.0
    for r in (1, -1):
        d = fermion.build_WF(3, r, fb, p).diagonal()
        for s in range(0, fb.dim, 37):
            val = 0.0
            for j, (rr, k) in enumerate(fb.modes):
                if rr != r:
                    continue
                occ = (s >> j) & 1
                if k > 0 and occ:
                    val += (2 * p.kappa * k) ** 2
                elif k < 0 and not occ:
                    val -= (2 * p.kappa * k) ** 2
            worst = max(worst, abs(d[s] - val))
    return [_result("fermion.wf3_enumeration", "fermion W^F_3", f"n_modes={n_modes}", fb.dim, worst,
                    ctx.tol(1e-12), t0)]


@check("fermion.composite_car")
def check_composite_car(ctx: Context, eps=0.05):
    """Exchange phases of ``nu = nu' = -1`` anyons at ``nu0 = 1`` approach ``-1``.

    Same chirality: ``e^{-i pi sgn(x - x'; 2 eps)}``, which tends to ``-1``;
    opposite chirality: exactly ``-1``.
    """
    t0 = time.perf_counter()
    p = ctx.params.with_(r0=1, s0=1)
    worst = 0.0
    for dx in np.linspace(-0.8, 0.8, 8) * p.ell:
        for rb in (1, -1):
            a = vertex.Insertion(1, -1.0, float(dx), eps)
            b = vertex.Insertion(rb, -1.0, 0.0, eps)
            ph = vertex.exchange_phase(a, b, p, path="cocycle")
            if rb == -1:
                worst = max(worst, abs(ph + 1))
            else:
                ref = np.exp(-1j * math.pi * specfun.sgn_reg(float(dx), 2 * eps, p))
                worst = max(worst, abs(ph - ref))
    return [_result("fermion.composite_car", "composite fermions anticommute", f"eps={eps}", 16, worst,
                    ctx.tol(1e-10), t0)]


def point_split_suite(ctx: Context, trunc=Truncation(6, 6, 1), x=0.3, level=3, deltas=(math.inf, 0.5)):
    out = []
    for delta in deltas:
        p = ctx.params.with_(ell=1.0, delta=delta, r0=1, s0=1, trunc=trunc)
        b = FockBasis(trunc)
        info = delta != math.inf
        tag = "q=0" if not info else f"q={p.q:.3f}"
        for r in (1, -1):
            t0 = time.perf_counter()
            rep = fermion.point_split_check(r, x, b, p, level=level)
            rel = max(res / max(s, 1e-300) for res, s in zip(rep.residuals, rep.scales))
            out.append(_result(f"fermion.point_split.eps0[{tag},r={r:+d}]", "point-split fermion bilinears",
                               b, rep.protected_dim, rel, ctx.tol(1e-6), t0, info=info))
            t0 = time.perf_counter()
            ex = fermion.point_split_extrapolated(r, x, b, p, level=level)
            out.append(_result(f"fermion.point_split.extrapolated[{tag},r={r:+d}]",
                               "point-split fermion bilinears", b, rep.protected_dim, max(ex.rel_residuals),
                               ctx.tol(1e-4), t0, info=info, eps=ex.eps))
    return out


@check("fermion.point_split")
def check_point_split(ctx: Context):
    return point_split_suite(ctx)


def charge_relation(ctx: Context, trunc=Truncation(4, 4, 1), level=2, delta=0.5):
    """``Q_r = G^2 nu0 int :psi^dagger psi:`` with the a^0 coefficient integrated by the trapezoid rule."""
    p = ctx.params.with_(ell=1.0, delta=delta, r0=2, s0=1, trunc=trunc)
    b = FockBasis(trunc)
    n_pts = 2 * b.n_max + 2
    xs, w = ham.trapezoid_nodes(p, n_pts)
    idx = b.select(level_max=level, mu_max=1)
    worst = 0.0
    for r in (1, -1):
        acc = 0
        for x in xs:
            acc = acc + w * fermion.point_split_check(r, float(x), b, p, level=level).coefficients[0]
        Q = fock.op_Q(r, b, p).restricted(idx, idx)
        worst = max(worst, float(np.max(np.abs(G_const(p) ** 2 * p.nu0 * acc - Q))))
    return worst, len(idx)


@check("fermion.charge_relation")
def check_charge_relation(ctx: Context):
    t0 = time.perf_counter()
    res, dim = charge_relation(ctx)
    return [_result("fermion.charge_relation", "integrated fermion density", "n_max=l_max=4", dim, res,
                    ctx.tol(1e-6), t0, info=True)]


# ----------------------------------------------------------------------------
# running and reporting
# ----------------------------------------------------------------------------

def select_checks(only=None) -> list:
    """Registered ids matching any of the comma-separated prefixes in ``only``."""
    ids = list(REGISTRY)
    if not only:
        return ids
    pats = [s.strip() for s in (only.split(",") if isinstance(only, str) else only) if s.strip()]
    chosen = [i for i in ids if any(i == p or i.startswith(p + ".") or i.startswith(p) for p in pats)]
    if not chosen:
        raise KeyError(f"no check matches {only!r}")
    return chosen


@dataclass
class Report:
    results: list
    config: dict

    @property
    def ok(self) -> bool:
        return all(r.status in ("PASS", "INFO") for r in self.results)

    def summary(self) -> dict:
        counts = {}
        for r in self.results:
            counts[r.status] = counts.get(r.status, 0) + 1
        return {"ok": self.ok, "counts": counts, "config": self.config,
                "checks": [asdict(r) for r in self.results]}

    def write_json(self, path):
        Path(path).write_text(json.dumps(self.summary(), indent=2, default=_jsonable))

    def write_csv(self, directory):
        d = Path(directory)
        d.mkdir(parents=True, exist_ok=True)
        with open(d / "checks.csv", "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["id", "status", "residual", "tol", "protected_dim", "truncation", "wall_time", "anchor"])
            for r in self.results:
                w.writerow([r.id, r.status, FMT.format(r.residual), FMT.format(r.tol), r.protected_dim,
                            r.truncation, FMT.format(r.wall_time), r.anchor])
        with open(d / "details.csv", "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["id", "key", "value"])
            for r in self.results:
                for k, v in r.details.items():
                    for i, item in enumerate(np.ravel(np.asarray(v, dtype=object))):
                        key = k if np.size(v) == 1 else f"{k}[{i}]"
                        w.writerow([r.id, key, _fmt(item)])


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return FMT.format(float(v))
    if isinstance(v, (complex, np.complexfloating)):
        return f"{FMT.format(v.real)}{'+' if v.imag >= 0 else '-'}{FMT.format(abs(v.imag))}j"
    return str(v)


def _jsonable(v):
    if isinstance(v, (np.floating, np.integer)):
        return v.item()
    if isinstance(v, (complex, np.complexfloating)):
        return [float(v.real), float(v.imag)]
    if isinstance(v, np.ndarray):
        return v.tolist()
    return str(v)


def run_all(ctx: Context | None = None, only=None, echo=None) -> Report:
    """Run the selected checks in registration order; ``echo`` receives one line per result."""
    ctx = ctx or Context()
    results = []
    for cid in select_checks(only):
        try:
            batch = REGISTRY[cid](ctx)
        except Exception as exc:  # reported as a failed check with the error message
            batch = [CheckResult(cid, "", "", 0, math.inf, 0.0, False, 0.0, "FAIL", {"error": repr(exc)})]
        for r in batch:
            results.append(r)
            if echo:
                echo(r.line())
    cfg = {"seed": ctx.seed, "tolerance_scale": ctx.tolerance_scale, **asdict(replace(ctx.params))}
    return Report(results, cfg)
