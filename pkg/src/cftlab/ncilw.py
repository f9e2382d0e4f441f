"""Pseudospectral solver for the periodic ncILW system and the quantum Heisenberg residual.

Classical equations on ``[-ell, ell)``::

    u_t = -2 u u_x - (g/2)(T u_xx + T~ v_xx)
    v_t = +2 v v_x + (g/2)(T v_xx + T~ u_xx)

In Fourier space the linear part acts on ``(u_n, v_n)`` as ``A_n = w_n M_n``
with ``w_n = (g/2)(2 kappa n)^2`` and ``M_n^2 = -1`` (because
``coth^2 - csch^2 = 1``), so ``exp(t A_n) = cos(w_n t) + sin(w_n t) M_n``.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from .fock import FockBasis, SectorOp
from .hamiltonians import (build_C, build_H3, build_W, chiral_boson, circ_rho_rhox, heisenberg_rhs,
                           sector_matrix, transformed_rho_x)
from .params import ModelParams
from .transforms import grid, multiplier_T, multiplier_Tt


@dataclass
class FieldPair:
    """Real samples of ``u`` and ``v`` on the uniform grid, and the time."""

    u: np.ndarray
    v: np.ndarray
    t: float = 0.0

    def __post_init__(self):
        self.u = np.asarray(self.u, dtype=float)
        self.v = np.asarray(self.v, dtype=float)
        if self.u.shape != self.v.shape:
            raise ValueError("u and v must share a grid")

    @property
    def n_grid(self) -> int:
        return self.u.shape[-1]

    def copy(self) -> "FieldPair":
        return FieldPair(self.u.copy(), self.v.copy(), self.t)


class Spectral:
    """Wavenumbers, multipliers and the 2/3 dealiasing mask for one grid."""

    def __init__(self, n_grid: int, params: ModelParams, g: float | None = None):
        if n_grid < 4 or n_grid % 2:
            raise ValueError("grid size must be even and at least 4")
        self.n = n_grid
        self.params = params
        self.g = params.g if g is None else g
        self.modes = np.arange(n_grid // 2 + 1)
        self.k = 2 * params.kappa * self.modes
        self.mask = self.modes <= n_grid // 3
        self.mT = multiplier_T(self.modes, params)
        self.mTt = multiplier_Tt(self.modes, params)
        self.w = 0.5 * self.g * self.k ** 2

    def fft(self, f):
        return np.fft.rfft(f) * self.mask

    def ifft(self, fh):
        return np.fft.irfft(fh, n=self.n)

    def linear(self, uh, vh):
        """Fourier coefficients of the nonlocal terms."""
        kk = self.k ** 2
        du = 0.5 * self.g * kk * (self.mT * uh + self.mTt * vh)
        dv = -0.5 * self.g * kk * (self.mT * vh + self.mTt * uh)
        return du, dv

    def nonlinear(self, uh, vh):
        u, v = self.ifft(uh), self.ifft(vh)
        ik = 1j * self.k
        return -ik * self.fft(u * u), ik * self.fft(v * v)

    def propagate(self, uh, vh, t: float):
        """Exact linear flow ``exp(t A)`` applied mode by mode."""
        c, s = np.cos(self.w * t), np.sin(self.w * t)
        with np.errstate(invalid="ignore", divide="ignore"):
            f = np.where(self.w > 0, s / np.where(self.w > 0, self.w, 1.0), t)
        du, dv = self.linear(uh, vh)
        return c * uh + f * du, c * vh + f * dv


def rhs(state: FieldPair, params: ModelParams, g: float | None = None, spec: Spectral | None = None) -> FieldPair:
    """Time derivative of ``(u, v)`` with 2/3-rule dealiasing."""
    spec = Spectral(state.n_grid, params, g) if spec is None else spec
    uh, vh = spec.fft(state.u), spec.fft(state.v)
    nu_, nv_ = spec.nonlinear(uh, vh)
    lu, lv = spec.linear(uh, vh)
    return FieldPair(spec.ifft(nu_ + lu), spec.ifft(nv_ + lv), state.t)


# ----------------------------------------------------------------------------
# conserved quantities
# ----------------------------------------------------------------------------

def masses(state: FieldPair, ell: float) -> tuple[float, float]:
    h = 2 * ell / state.n_grid
    return float(state.u.sum() * h), float(state.v.sum() * h)


def momentum(state: FieldPair, ell: float) -> float:
    """``int (u^2 - v^2) dx``."""
    h = 2 * ell / state.n_grid
    return float((state.u ** 2 - state.v ** 2).sum() * h)


def hamiltonian_classical(state: FieldPair, params: ModelParams, g: float | None = None,
                          hbar: float = 0.0) -> float:
    """``(2/(pi g)) int [(u^3+v^3)/3 + ((g-hbar)/4)(u T u_x + v T v_x + u T~ v_x + v T~ u_x)] dx``.

    ``hbar = 0`` is the coefficient conserved by the classical flow above;
    ``hbar = 1`` gives the quantum-shifted coefficient ``(g-1)/4``.
    """
    g = params.g if g is None else g
    spec = Spectral(state.n_grid, params, g)
    uh, vh = spec.fft(state.u), spec.fft(state.v)
    ik = 1j * spec.k
    Tux = spec.ifft(spec.mT * ik * uh)
    Tvx = spec.ifft(spec.mT * ik * vh)
    Ttvx = spec.ifft(spec.mTt * ik * vh)
    Ttux = spec.ifft(spec.mTt * ik * uh)
    u, v = spec.ifft(uh), spec.ifft(vh)
    dens = (u ** 3 + v ** 3) / 3 + 0.25 * (g - hbar) * (u * Tux + v * Tvx + u * Ttvx + v * Ttux)
    h = 2 * params.ell / state.n_grid
    return float(2 / (math.pi * g) * dens.sum() * h)


# ----------------------------------------------------------------------------
# time stepping
# ----------------------------------------------------------------------------

RK4_LIMIT = 2.8


@dataclass
class Trajectory:
    state: FieldPair
    times: list = field(default_factory=list)
    log: dict = field(default_factory=dict)
    wall_time: float = 0.0

    def drift(self, key: str) -> float:
        vals = np.asarray(self.log[key])
        return float(np.max(np.abs(vals - vals[0])))


class BlowUpError(RuntimeError):
    pass


def integrate(state: FieldPair, dt: float, n_steps: int, params: ModelParams, scheme: str = "RK4",
              g: float | None = None, log_every: int = 1, hbar: float = 0.0) -> Trajectory:
    """Advance ``state`` by ``n_steps`` steps of size ``dt``.

    ``scheme="RK4"`` is classical explicit RK4 on the full right side and
    refuses steps with ``max w_n dt`` above the stability limit on the
    imaginary axis.  ``scheme="IMEX"`` is RK4 in the integrating-factor
    variables, with the linear nonlocal part propagated exactly.
    """
    spec = Spectral(state.n_grid, params, g)
    wmax = float(np.max(spec.w[spec.mask]))
    if scheme == "RK4" and wmax * dt > RK4_LIMIT:
        raise ValueError(f"RK4 unstable: max multiplier * dt = {wmax * dt:.3g} > {RK4_LIMIT}")
    if scheme not in ("RK4", "IMEX"):
        raise ValueError(scheme)
    uh, vh = spec.fft(state.u), spec.fft(state.v)
    t0 = time.perf_counter()
    traj = Trajectory(state.copy())
    keys = ("mass_u", "mass_v", "momentum", "hamiltonian")
    traj.log = {k: [] for k in keys}

    def record(t, uh, vh):
        st = FieldPair(spec.ifft(uh), spec.ifft(vh), t)
        mu, mv = masses(st, params.ell)
        traj.times.append(t)
        traj.log["mass_u"].append(mu)
        traj.log["mass_v"].append(mv)
        traj.log["momentum"].append(momentum(st, params.ell))
        traj.log["hamiltonian"].append(hamiltonian_classical(st, params, spec.g, hbar))

    def full(uh, vh):
        a, b = spec.nonlinear(uh, vh)
        c, d = spec.linear(uh, vh)
        return a + c, b + d

    t = state.t
    record(t, uh, vh)
    for step in range(1, n_steps + 1):
        if scheme == "RK4":
            k1 = full(uh, vh)
            k2 = full(uh + 0.5 * dt * k1[0], vh + 0.5 * dt * k1[1])
            k3 = full(uh + 0.5 * dt * k2[0], vh + 0.5 * dt * k2[1])
            k4 = full(uh + dt * k3[0], vh + dt * k3[1])
            uh = uh + dt / 6 * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0])
            vh = vh + dt / 6 * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1])
        else:
            h2 = 0.5 * dt
            # Lawson RK4: stages in the propagated frame
            k1 = spec.nonlinear(uh, vh)
            base = spec.propagate(uh, vh, h2)
            p1 = spec.propagate(k1[0], k1[1], h2)
            y2 = (base[0] + h2 * p1[0], base[1] + h2 * p1[1])
            k2 = spec.nonlinear(*y2)
            y3 = (base[0] + h2 * k2[0], base[1] + h2 * k2[1])
            k3 = spec.nonlinear(*y3)
            p3 = spec.propagate(k3[0], k3[1], h2)
            full_base = spec.propagate(uh, vh, dt)
            y4 = (full_base[0] + dt * p3[0], full_base[1] + dt * p3[1])
            k4 = spec.nonlinear(*y4)
            p1f = spec.propagate(k1[0], k1[1], dt)
            p23 = spec.propagate(k2[0] + k3[0], k2[1] + k3[1], h2)
            uh = full_base[0] + dt / 6 * (p1f[0] + 2 * p23[0] + k4[0])
            vh = full_base[1] + dt / 6 * (p1f[1] + 2 * p23[1] + k4[1])
        t = state.t + step * dt
        if not (np.all(np.isfinite(uh)) and np.all(np.isfinite(vh))):
            raise BlowUpError(f"non-finite field at step {step} (t = {t:.6g})")
        if step % log_every == 0 or step == n_steps:
            record(t, uh, vh)
    traj.state = FieldPair(spec.ifft(uh), spec.ifft(vh), t)
    traj.wall_time = time.perf_counter() - t0
    return traj


def preset_initial(name: str, n_grid: int, ell: float, amplitude: float = 1.0) -> FieldPair:
    """Smooth initial data; ``waves`` is band-limited, ``bump`` is entire."""
    x = grid(n_grid, ell)
    k = math.pi / ell
    if name == "waves":
        u = 0.3 * np.cos(k * x) + 0.1 * np.sin(2 * k * x + 0.4) + 0.2
        v = 0.25 * np.sin(k * x + 0.3) - 0.05 * np.cos(3 * k * x) - 0.1
    elif name == "bump":
        u = 0.4 * np.exp(np.cos(k * x) - 1)
        v = 0.2 * np.exp(np.cos(k * (x - ell / 2)) - 1)
    elif name == "zero":
        u = np.zeros(n_grid)
        v = np.zeros(n_grid)
    else:
        raise ValueError(f"unknown preset {name!r}")
    return FieldPair(amplitude * u, amplitude * v)


def convergence_order(state: FieldPair, T: float, dts, params: ModelParams, scheme: str = "RK4",
                      g: float | None = None):
    """Self-convergence orders from successive step halvings.

    Returns ``(orders, diffs)`` with ``diffs[i] = ||U(dt_i) - U(dt_{i+1})||_inf``
    and ``orders[i] = log2(diffs[i] / diffs[i+1])`` for halving ``dts``.
    """
    finals = []
    for dt in dts:
        n = int(round(T / dt))
        tr = integrate(state, T / n, n, params, scheme, g, log_every=n)
        finals.append(np.concatenate([tr.state.u, tr.state.v]))
    diffs = [float(np.max(np.abs(a - b))) for a, b in zip(finals, finals[1:])]
    ratios = [dts[i] / dts[i + 1] for i in range(len(dts) - 1)]
    orders = [math.log(diffs[i] / diffs[i + 1]) / math.log(ratios[i]) for i in range(len(diffs) - 1)]
    return orders, diffs


# ----------------------------------------------------------------------------
# quantum Heisenberg residual
# ----------------------------------------------------------------------------

@dataclass
class HeisenbergReport:
    """Maximum residuals over the x grid for each part of the Heisenberg equation."""

    residuals: dict
    protected_dim: int
    level: int
    x_grid: np.ndarray

    @property
    def exact(self) -> float:
        return max(v for k, v in self.residuals.items() if k != "W2_fd")

    @property
    def fd(self) -> float:
        return self.residuals.get("W2_fd", 0.0)


def protection_level(basis: FockBasis) -> int:
    """Largest level ``P`` with ``l_max >= P + n_max`` and ``2 P <= n_max``.

    Under these two conditions, commutators with the cubic Hamiltonian
    restricted to levels ``<= P`` are free of both level and mode cutoff
    effects.
    """
    return max(-1, min(basis.l_max - basis.n_max, basis.n_max // 2))


def heisenberg_residual(x_grid, eps: float, basis: FockBasis, params: ModelParams,
                        nu: float | None = None, level: int | None = None, h: float | None = None,
                        chiralities=(1, -1)) -> HeisenbergReport:
    """Residuals of the Heisenberg equations for ``rho_r(x; eps)`` on protected states.

    Parts: ``W2_fd`` (``i[W_{2,r}, rho_r] + r d_x rho_r`` with a 5-point
    stencil), ``W3``, ``C`` and ``H3`` (all exact commutator identities).
    Each residual is the spectral norm of the difference restricted to states
    of level ``<= level`` in the whole charge window.  All operators conserve
    charge, so the norm is the maximum over charge sectors.
    """
    nu = params.nu if nu is None else nu
    level = protection_level(basis) if level is None else level
    if level < 0:
        return HeisenbergReport({}, 0, level, np.asarray(x_grid))
    h = 1e-3 * params.ell if h is None else h
    rows = np.nonzero(basis.osc_level <= level)[0]
    charges = list(basis.charges)

    def sectors(op):
        return [sector_matrix(op, mu).tocsr() for mu in charges]

    def restrict(mats):
        return [m[rows][:, rows].toarray() for m in mats]

    def comm(A, B):
        # [A, B] restricted to the protected rows and columns, sector by sector
        return [(a[rows] @ b[:, rows] - b[rows] @ a[:, rows]).toarray() for a, b in zip(A, B)]

    def worst(blocks):
        return max(float(np.linalg.norm(m, 2)) for m in blocks)

    H3 = sectors(build_H3(basis, params, nu))
    C = sectors(build_C(basis, params))
    W2 = {r: sectors(build_W(2, r, basis, params)) for r in chiralities}
    W3 = {r: sectors(build_W(3, r, basis, params)) for r in chiralities}

    res = {"W2_fd": 0.0, "W3": 0.0, "C": 0.0, "H3": 0.0}
    for x in np.asarray(x_grid, dtype=float):
        for r in chiralities:
            rho = sectors(chiral_boson(r, x, eps, basis, params))
            stencil = {d: restrict(sectors(chiral_boson(r, x + d * h, eps, basis, params)))
                       for d in (-2, -1, 1, 2)}
            fd = [(-s2 + 8 * s1 - 8 * m1 + m2) / (12 * h) for s2, s1, m1, m2 in
                  zip(stencil[2], stencil[1], stencil[-1], stencil[-2])]
            res["W2_fd"] = max(res["W2_fd"], worst([1j * c + r * d for c, d in zip(comm(W2[r], rho), fd)]))
            circ = circ_rho_rhox(r, x, eps, basis, params)
            res["W3"] = max(res["W3"], worst([1j * c + 2 * r * d for c, d in
                                              zip(comm(W3[r], rho), restrict(sectors(circ)))]))
            t = transformed_rho_x(r, x, eps, params, basis.n_max, "T", deriv=2).op(basis)
            tt = transformed_rho_x(-r, x, eps, params, basis.n_max, "Tt", deriv=2).op(basis)
            lin = restrict(sectors(SectorOp.combine(basis, [(1.0, t), (1.0, tt)])))
            res["C"] = max(res["C"], worst([1j * c - r * d for c, d in zip(comm(C, rho), lin)]))
            rhs_ = restrict(sectors(heisenberg_rhs(r, x, eps, basis, params, nu, circ)))
            res["H3"] = max(res["H3"], worst([1j * c - d for c, d in zip(comm(H3, rho), rhs_)]))
    return HeisenbergReport(res, len(rows) * len(charges), level, np.asarray(x_grid))
