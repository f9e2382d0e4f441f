"""Model parameters, Bogoliubov coefficients and the derived constants.

The coupling is carried as an integer pair ``(r0, s0)`` with ``g = r0/s0``.
Everything else (``kappa``, ``q``, ``nu``, ``nu0``) is derived on demand.
"""
from __future__ import annotations

import configparser
import math
from dataclasses import dataclass, field, replace
from typing import NamedTuple

import numpy as np

#: absolute tail bound used by every truncated series unless overridden
SERIES_TAIL = 1e-16


@dataclass(frozen=True)
class Truncation:
    """Mode cutoff, level cutoff and Klein charge window of the Fock space."""

    n_max: int = 6
    l_max: int = 8
    mu_max: int = 1

    def __post_init__(self):
        if self.n_max < 1:
            raise ValueError("n_max must be >= 1")
        if self.l_max < 0 or self.mu_max < 0:
            raise ValueError("l_max and mu_max must be >= 0")


@dataclass(frozen=True)
class ModelParams:
    """Physical and numerical parameters.

    Parameters
    ----------
    ell : float
        Half period of the spatial circle.
    delta : float
        Imaginary half period; controls the coupling of opposite chiralities.
    r0, s0 : int
        Integer pair defining the coupling ``g = r0/s0``.
    nu_sign : int
        Sign of ``nu = nu_sign * sqrt(g)``.
    eps : float
        Default regularization length.
    trunc : Truncation
        Fock space truncation used by operator builders.
    """

    ell: float = math.pi
    delta: float = 1.0
    r0: int = 2
    s0: int = 1
    nu_sign: int = 1
    eps: float = 0.25
    trunc: Truncation = field(default_factory=Truncation)

    def __post_init__(self):
        if not self.ell > 0:
            raise ValueError("ell must be positive")
        if not self.delta > 0:
            raise ValueError("delta must be positive")
        if int(self.r0) != self.r0 or int(self.s0) != self.s0:
            raise TypeError("r0 and s0 must be integers")
        if self.r0 == 0 or self.s0 == 0 or self.r0 * self.s0 <= 0:
            raise ValueError("need r0*s0 > 0 so that g = r0/s0 > 0")
        if self.nu_sign not in (1, -1):
            raise ValueError("nu_sign must be +1 or -1")
        if self.eps < 0:
            raise ValueError("eps must be >= 0")

    # derived quantities
    @property
    def kappa(self) -> float:
        return math.pi / (2.0 * self.ell)

    @property
    def q(self) -> float:
        return math.exp(-2.0 * self.kappa * self.delta)

    @property
    def g(self) -> float:
        return self.r0 / self.s0

    @property
    def nu(self) -> float:
        return self.nu_sign * math.sqrt(self.r0 / self.s0)

    @property
    def nu0(self) -> float:
        return 1.0 / math.sqrt(self.r0 * self.s0)

    @property
    def charge_ratio(self) -> int:
        """Integer ``nu/nu0``."""
        return self.nu_sign * abs(self.r0)

    @property
    def dual_charge_ratio(self) -> int:
        """Integer ``(-1/nu)/nu0``."""
        return -self.nu_sign * abs(self.s0)

    def charge_of(self, nu_eff: float) -> int:
        """Return the integer ``nu_eff/nu0``, raising if it is not integral."""
        ratio = nu_eff / self.nu0
        k = int(round(ratio))
        if abs(ratio - k) > 1e-9 * max(1.0, abs(ratio)):
            raise ValueError(f"nu_eff/nu0 = {ratio!r} is not an integer")
        return k

    def with_(self, **kw) -> "ModelParams":
        """Copy with some fields replaced; truncation keys are accepted too."""
        tkeys = {k: kw.pop(k) for k in ("n_max", "l_max", "mu_max") if k in kw}
        p = replace(self, **kw)
        if tkeys:
            p = replace(p, trunc=replace(p.trunc, **tkeys))
        return p


class BogoCoeffs(NamedTuple):
    n: int
    c: float
    s: float


def bogo(n: int, params: ModelParams) -> BogoCoeffs:
    """Bogoliubov coefficients ``(c_n, s_n)`` for a nonzero mode ``n``."""
    if n == 0:
        raise ValueError("zero mode has no Bogoliubov partner (b_0 = a_0)")
    c, s = bogo_arrays(np.array([abs(n)]), params.q)
    return BogoCoeffs(int(n), float(c[0]), float(s[0]))


def bogo_arrays(n, q: float):
    """Vectorized ``(c_n, s_n)`` for integer array ``n`` (zeros not allowed)."""
    n = np.abs(np.asarray(n))
    if np.any(n == 0):
        raise ValueError("zero mode has no Bogoliubov partner")
    _check_q(q)
    if q == 0.0:
        return np.ones(n.shape), np.zeros(n.shape)
    # 1 - q^{2n} via expm1 keeps c_n accurate when q is close to 1
    one_minus = -np.expm1(2.0 * n * math.log(q))
    c = 1.0 / np.sqrt(one_minus)
    s = q ** n * c
    return c, s


def _check_q(q):
    if not 0.0 <= q < 1.0:
        raise ValueError("q must lie in [0, 1)")


def _n_terms(rate: float, tail: float = SERIES_TAIL, floor: int = 1) -> int:
    """Number of terms N with ``exp(-rate*N) < tail``."""
    if rate <= 0:
        raise ValueError("series does not converge")
    return max(floor, int(math.ceil(-math.log(tail) / rate)) + 1)


def c0(params: ModelParams) -> float:
    """The constant ``c_0 = k^2/3 - 8k^2 sum n q^{2n}/(1-q^{2n})``."""
    k, q = params.kappa, params.q
    _check_q(q)
    if q == 0.0:
        return k * k / 3.0
    n = np.arange(1, _n_terms(-2 * math.log(q)) + 1)
    q2n = np.exp(2 * n * math.log(q))
    return k * k / 3.0 - 8 * k * k * float(np.sum(n * q2n / -np.expm1(2 * n * math.log(q))))


def c_eps(params: ModelParams, eps: float) -> float:
    """The regularized constant ``c_eps``; reduces to ``c0`` as ``eps -> 0``."""
    k, q = params.kappa, params.q
    _check_q(q)
    if eps < 0:
        raise ValueError("eps must be >= 0")
    if q == 0.0:
        return k * k / 3.0
    n_terms = _n_terms(-2 * math.log(q) + 4 * k * eps)
    n = np.arange(1, n_terms + 1)
    _, s = bogo_arrays(n, q)
    s2 = s * s
    single = np.sum(n * s2 * np.exp(-4 * k * n * eps))
    N, M = np.meshgrid(n, n, indexing="ij")
    w = np.exp(-2 * k * (N + M) * eps)
    diff = np.exp(-2 * k * np.abs(N - M) * eps) - np.exp(-2 * k * (N + M) * eps)
    double = np.sum(np.outer(s2, s2) * w * diff)
    return float(k * k / 3.0 - 8 * k * k * (single + double))


def G_const(params: ModelParams) -> float:
    """``G = prod_{m>=1} (1 - q^{2m})`` by direct multiplication."""
    q = params.q
    _check_q(q)
    if q == 0.0:
        return 1.0
    m = np.arange(1, _n_terms(-2 * math.log(q), 1e-17) + 1)
    return float(np.prod(-np.expm1(2 * m * math.log(q))))


def G_pentagonal(params: ModelParams) -> float:
    """``G`` from Euler's pentagonal number series in ``x = q^2``.

    ``prod (1 - x^m) = sum_k (-1)^k x^{k(3k-1)/2}`` over all integers ``k``.
    """
    x = params.q ** 2
    if x == 0.0:
        return 1.0
    total, k = 1.0, 1
    while True:
        e1, e2 = k * (3 * k - 1) // 2, k * (3 * k + 1) // 2
        t = (-1) ** k * (x ** e1 + x ** e2)
        total += t
        if x ** e1 < 1e-18:
            return total
        k += 1


_INT_KEYS = {"r0", "s0", "nu_sign", "n_max", "l_max", "mu_max"}
_FLOAT_KEYS = {"ell", "delta", "eps"}


def load_config(path=None, overrides=None) -> tuple[ModelParams, configparser.ConfigParser]:
    """Read an INI file with a ``[model]`` section and build ``ModelParams``.

    Other sections are returned untouched for the harness to consume.
    ``overrides`` is a mapping of model keys applied last.
    """
    cp = configparser.ConfigParser()
    if path is not None:
        with open(path) as fh:
            cp.read_file(fh)
    kw = {}
    if cp.has_section("model"):
        for key, val in cp.items("model"):
            kw[key] = val
    for key, val in (overrides or {}).items():
        if val is not None:
            kw[key] = val
    typed = {}
    for key, val in kw.items():
        if key in _INT_KEYS:
            typed[key] = int(val)
        elif key in _FLOAT_KEYS:
            typed[key] = float(val)
        else:
            raise KeyError(f"unknown model key {key!r}")
    return ModelParams().with_(**typed), cp
