"""Regularized elliptic functions and the auxiliary kernels built from them.

Every function that later serves as an oracle has at least two evaluation
paths (a mode series and a product or lattice sum).  Arguments are numpy
broadcastable.  Conventions: ``kappa = pi/(2 ell)``, ``q = exp(-2 kappa delta)``.
"""
from __future__ import annotations

import math
from typing import NamedTuple

import numpy as np

from .params import SERIES_TAIL, ModelParams, _check_q, _n_terms, bogo_arrays

#: proximity to the real lattice (relative to the period) treated as singular
SINGULAR_TOL = 1e-10


class RegularizedEval(NamedTuple):
    value: complex
    path: str
    trunc: int


class SingularInput(ValueError):
    """Raised when a function is evaluated on (or next to) its pole set."""


def _product_terms(q: float) -> int:
    """Number of product factors needed before ``q^{2m}`` drops below the tail."""
    if q == 0.0:
        return 0
    return _n_terms(-2.0 * math.log(q), SERIES_TAIL)


# ----------------------------------------------------------------------------
# theta functions
# ----------------------------------------------------------------------------

def log_theta_reg(kind: int, x, q: float, eps: float = 0.0):
    """Continuous logarithm of the regularized theta function.

    The branch is ``-ix + log(1 - e^{2ix-2eps}) + sum log(1 - ...)`` with
    principal logarithms of factors whose arguments stay in the right half
    plane; this is the branch used for non-integer powers.
    """
    _check_q(q)
    x = np.asarray(x, dtype=complex)
    e_p = np.exp(2j * x - 2 * eps)
    e_m = np.exp(-2j * x - 2 * eps)
    if kind == 1:
        out = -1j * x + np.log1p(-e_p)
        m = np.arange(1, _product_terms(q) + 1)
        qp = q ** (2 * m)
    elif kind == 4:
        out = np.zeros_like(x)
        m = np.arange(1, _product_terms(q) + 2)
        qp = q ** (2 * m - 1)
    else:
        raise ValueError("kind must be 1 or 4")
    for qm in qp:
        out = out + np.log1p(-qm * e_p) + np.log1p(-qm * e_m)
    return out


def theta_reg(kind: int, x, q: float, eps: float = 0.0, path: str = "product"):
    """Regularized theta functions ``theta~_1`` and ``theta~_4``.

    Parameters
    ----------
    kind : {1, 4}
    x : array_like, complex allowed
    q : float in [0, 1)
    eps : float >= 0
    path : {"product", "log"}
        ``"product"`` multiplies the defining factors directly, ``"log"``
        exponentiates :func:`log_theta_reg`.
    """
    _check_q(q)
    if path == "log":
        return np.exp(log_theta_reg(kind, x, q, eps))
    if path != "product":
        raise ValueError(path)
    x = np.asarray(x, dtype=complex)
    e_p = np.exp(2j * x - 2 * eps)
    e_m = np.exp(-2j * x - 2 * eps)
    if kind == 1:
        out = np.exp(-1j * x) - np.exp(1j * x - 2 * eps)
        qp = q ** (2 * np.arange(1, _product_terms(q) + 1))
    elif kind == 4:
        out = np.ones_like(x)
        qp = q ** (2 * np.arange(1, _product_terms(q) + 2) - 1)
    else:
        raise ValueError("kind must be 1 or 4")
    for qm in qp:
        out = out * (1 - qm * e_p) * (1 - qm * e_m)
    return out


def theta_rr(r: int, rp: int, x, eps: float, params: ModelParams, power: float = 1.0):
    """``theta_{r,r'}(x; eps)**power`` on the continuous branch.

    Same chirality: ``theta~_1(r kappa x, q; kappa eps)``; opposite chirality:
    ``theta~_4(kappa x, q; kappa eps)``.
    """
    k = params.kappa
    if r == rp:
        lg = log_theta_reg(1, r * k * np.asarray(x), params.q, k * eps)
    else:
        lg = log_theta_reg(4, k * np.asarray(x), params.q, k * eps)
    return np.exp(power * lg)


# ----------------------------------------------------------------------------
# C and C~ (mode series behind the theta functions)
# ----------------------------------------------------------------------------

def _mode_count(params: ModelParams, eps: float, floor: int = 64) -> int:
    rate = 2 * params.kappa * eps
    if rate <= 0:
        raise ValueError("eps must be positive for mode series")
    return _n_terms(rate, SERIES_TAIL, floor=floor)


def C_fun(x, eps: float, params: ModelParams, path: str = "series"):
    """``C(x; eps) = sum_n (1/n)(e^{2k(inx-n eps)} c_n^2 + e^{2k(-inx-n eps)} s_n^2)``.

    ``path="series"`` splits off the ``q=0`` part in closed form and sums the
    rapidly convergent remainder; ``path="modes"`` sums the raw mode series,
    which needs ``eps > 0``.
    """
    k, q = params.kappa, params.q
    x = np.asarray(x, dtype=complex)
    if path == "modes":
        n = np.arange(1, _mode_count(params, eps) + 1)
        c, s = bogo_arrays(n, q)
        damp = np.exp(-2 * k * n * eps) / n
        ph = np.exp(2j * k * np.multiply.outer(x, n))
        return (ph * (damp * c * c)).sum(-1) + ((1 / ph) * (damp * s * s)).sum(-1)
    if path != "series":
        raise ValueError(path)
    out = -np.log1p(-np.exp(2 * k * (1j * x - eps)))
    if q > 0:
        nmax = _n_terms(-2 * math.log(q), SERIES_TAIL)
        n = np.arange(1, nmax + 1)
        _, s = bogo_arrays(n, q)
        w = s * s * np.exp(-2 * k * n * eps) / n
        ph = np.exp(2j * k * np.multiply.outer(x, n))
        out = out + (ph * w).sum(-1) + ((1 / ph) * w).sum(-1)
    return out


def Ct_fun(x, eps: float, params: ModelParams):
    """``C~(x; eps) = sum_n (c_n s_n/n)(e^{2k(inx-n eps)} + e^{2k(-inx-n eps)})``."""
    k, q = params.kappa, params.q
    x = np.asarray(x, dtype=complex)
    if q == 0.0:
        return np.zeros_like(x)
    nmax = _n_terms(-math.log(q), SERIES_TAIL)
    n = np.arange(1, nmax + 1)
    c, s = bogo_arrays(n, q)
    w = c * s * np.exp(-2 * k * n * eps) / n
    ph = np.exp(2j * k * np.multiply.outer(x, n))
    return (ph * w).sum(-1) + ((1 / ph) * w).sum(-1)


# ----------------------------------------------------------------------------
# zeta_1 and wp_1
# ----------------------------------------------------------------------------

def _check_pole(z, params: ModelParams):
    s = np.abs(np.sin(params.kappa * np.asarray(z, dtype=complex)))
    if np.any(s < SINGULAR_TOL):
        raise SingularInput("argument on the pole lattice; shift by i*eps")


def zeta1(z, params: ModelParams, path: str = "series", M: int | None = None):
    """Periodic Weierstrass-type zeta function with half periods ``(ell, i delta)``.

    ``path="series"``: ``k cot(kz) + 4k sum q^{2n}/(1-q^{2n}) sin(2nkz)``,
    valid for ``|Im z| < 2 delta``.
    ``path="lattice"``: symmetric sum ``sum_{|m|<=M} k cot(k(z - 2imdelta))``.
    """
    k, q = params.kappa, params.q
    z = np.asarray(z, dtype=complex)
    _check_pole(z, params)
    if path == "lattice":
        if M is None:
            M = 0 if q == 0 else _n_terms(-2 * math.log(q), 1e-17)
        out = k / np.tan(k * z)
        for m in range(1, M + 1):
            s = 2j * m * params.delta
            out = out + k / np.tan(k * (z - s)) + k / np.tan(k * (z + s))
        return out
    if path != "series":
        raise ValueError(path)
    out = k / np.tan(k * z)
    if q > 0:
        if np.any(np.abs(z.imag) >= 2 * params.delta):
            raise ValueError("series needs |Im z| < 2 delta")
        ymax = float(np.max(np.abs(z.imag))) if z.size else 0.0
        rate = 2 * (-math.log(q)) - 2 * k * ymax
        n = np.arange(1, _n_terms(rate, SERIES_TAIL) + 1)
        w = q ** (2 * n) / -np.expm1(2 * n * math.log(q))
        out = out + 4 * k * (np.sin(2 * k * np.multiply.outer(z, n)) * w).sum(-1)
    return out


def zeta1_shifted(x, params: ModelParams):
    """``zeta_1(x + i delta)`` from its own series ``-ik + 4k sum q^n/(1-q^{2n}) sin(2nkx)``."""
    k, q = params.kappa, params.q
    x = np.asarray(x, dtype=complex)
    out = np.full(x.shape, -1j * k, dtype=complex)
    if q > 0:
        n = np.arange(1, _n_terms(-math.log(q), SERIES_TAIL) + 1)
        w = q ** n / -np.expm1(2 * n * math.log(q))
        out = out + 4 * k * (np.sin(2 * k * np.multiply.outer(x, n)) * w).sum(-1)
    return out


def wp1_reg(x, eps: float, shifted: bool, params: ModelParams, path: str = "analytic", h: float | None = None):
    """Regularized modified Weierstrass function.

    ``shifted=False`` gives ``wp_1(x; eps) = -d^2/dx^2 log theta~_1(kx, q; k eps)``,
    which is complex for ``eps > 0``; ``shifted=True`` gives
    ``wp_1(x + i delta; eps) = -d^2/dx^2 log theta~_4(kx, q; k eps)``, real.

    ``path="analytic"`` differentiates each product factor in closed form;
    ``path="fd"`` applies a 5-point stencil to the log of the product.
    """
    k, q = params.kappa, params.q
    x = np.asarray(x, dtype=float)
    if path == "fd":
        h = 1e-3 * params.ell if h is None else h
        kind = 4 if shifted else 1
        f = lambda y: log_theta_reg(kind, k * y, q, k * eps)
        d2 = (-f(x + 2 * h) + 16 * f(x + h) - 30 * f(x) + 16 * f(x - h) - f(x - 2 * h)) / (12 * h * h)
        return -d2
    if path != "analytic":
        raise ValueError(path)
    c2 = np.cos(2 * k * x)
    s2 = np.sin(2 * k * x)
    damp = math.exp(-2 * k * eps)
    if shifted:
        out = np.zeros(x.shape, dtype=complex)
        m = np.arange(1, _product_terms(q) + 2)
        amps = q ** (2 * m - 1) * damp if q > 0 else np.zeros(0)
    else:
        if eps == 0.0:
            _check_pole(x, params)
        out = k * k / np.sin(k * (x + 1j * eps)) ** 2
        m = np.arange(1, _product_terms(q) + 1)
        amps = q ** (2 * m) * damp if q > 0 else np.zeros(0)
    for A in amps:
        f = 1 - 2 * A * c2 + A * A
        out = out - 8 * k * k * A * c2 / f + 16 * k * k * A * A * s2 * s2 / (f * f)
    if shifted:
        return out.real
    return out


def wp_rr(r: int, rp: int, x, eps: float, params: ModelParams):
    """Pair potential ``wp_{r,r'}(x; eps) = -d^2/dx^2 log theta_{r,r'}(x; eps)``."""
    if r == rp:
        return wp1_reg(r * np.asarray(x, dtype=float), eps, False, params)
    return wp1_reg(x, eps, True, params)


# ----------------------------------------------------------------------------
# delta, sgn and the auxiliary kernels
# ----------------------------------------------------------------------------

def _require_eps(eps):
    if not eps > 0:
        raise ValueError("eps must be positive")


def dirac_reg(x, eps: float, params: ModelParams, path: str = "closed"):
    """Periodic regularized delta ``(1/2l) sum_n e^{2k(inx - |n| eps)}``.

    The closed form is the Poisson kernel; ``path="series"`` sums modes.
    """
    _require_eps(eps)
    k, ell = params.kappa, params.ell
    x = np.asarray(x, dtype=float)
    if path == "series":
        n = np.arange(1, _mode_count(params, eps) + 1)
        return (1 + 2 * (np.cos(2 * k * np.multiply.outer(x, n)) * np.exp(-2 * k * n * eps)).sum(-1)) / (2 * ell)
    rr = math.exp(-2 * k * eps)
    return (1 - rr * rr) / (1 - 2 * rr * np.cos(2 * k * x) + rr * rr) / (2 * ell)


def sgn_reg(x, eps: float, params: ModelParams, path: str = "log"):
    """Regularized sign function, odd, with ``d/dx sgn = 2 delta(x; eps)``.

    ``path="log"`` evaluates the logarithmic closed form on the branch that is
    continuous in x and vanishes at 0; ``path="series"`` sums
    ``x/l + (1/pi) sum_{n != 0} e^{2k(inx-|n|eps)}/(in)``.
    """
    _require_eps(eps)
    k, ell = params.kappa, params.ell
    x = np.asarray(x, dtype=float)
    if path == "series":
        n = np.arange(1, _mode_count(params, eps) + 1)
        return x / ell + (2 / math.pi) * (np.sin(2 * k * np.multiply.outer(x, n)) * np.exp(-2 * k * n * eps) / n).sum(-1)
    if path != "log":
        raise ValueError(path)
    # -1/(i pi) log[(1 - r e^{it}) / (e^{it} - r)], with e^{it}-r = e^{it}(1 - r e^{-it}):
    # the ratio's continuous log is log(1 - r e^{it}) - it - log(1 - r e^{-it}).
    rr = math.exp(-2 * k * eps)
    th = 2 * k * x
    lg = np.log1p(-rr * np.exp(1j * th)) - 1j * th - np.log1p(-rr * np.exp(-1j * th))
    return (-lg / (1j * math.pi)).real


def delta_pm(sign: int, x, eps: float, params: ModelParams, path: str = "closed"):
    """``delta_+/-(x; eps) = (1/2l) sum_{n>=1} e^{2k(-/+ inx - n eps)}``."""
    _require_eps(eps)
    k, ell = params.kappa, params.ell
    x = np.asarray(x, dtype=complex)
    if path == "series":
        n = np.arange(1, _mode_count(params, eps) + 1)
        return (np.exp(2 * k * (-sign * 1j * np.multiply.outer(x, n) - n * eps))).sum(-1) / (2 * ell)
    w = np.exp(2 * k * (-sign * 1j * x - eps))
    return w / (1 - w) / (2 * ell)


def j_fun(x, eps: float, params: ModelParams):
    """``j(x; eps) = (1/2l) sum_{n>=1} s_n^2 sin(2knx) e^{-2kn eps}``."""
    return _sine_series(x, eps, params, lambda c, s: s * s)


def jt_fun(x, eps: float, params: ModelParams):
    """``j~(x; eps) = (1/2l) sum_{n>=1} c_n s_n sin(2knx) e^{-2kn eps}``."""
    return _sine_series(x, eps, params, lambda c, s: c * s)


def _sine_series(x, eps, params, weight):
    k, q = params.kappa, params.q
    x = np.asarray(x, dtype=complex)
    if q == 0.0:
        return np.zeros(x.shape, dtype=complex)
    n = np.arange(1, _n_terms(-math.log(q) + 2 * k * eps, SERIES_TAIL) + 1)
    c, s = bogo_arrays(n, q)
    w = weight(c, s) * np.exp(-2 * k * n * eps)
    return (np.sin(2 * k * np.multiply.outer(x, n)) * w).sum(-1) / (2 * params.ell)


def Delta_pm(sign: int, x, eps: float, params: ModelParams):
    """``Delta_+/- = k + 2 pi delta_+/- -/+ 4 pi i j``; their sum is ``2 pi delta``."""
    return params.kappa + 2 * math.pi * delta_pm(sign, x, eps, params) - sign * 4j * math.pi * j_fun(x, eps, params)
