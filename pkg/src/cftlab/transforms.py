"""The nonlocal operators T and T~ as Fourier multipliers, with quadrature oracles.

Grid convention: ``x_j = -ell + 2 ell j / N`` and
``f(x) = sum_n fhat_n exp(2 i kappa n x)``, so that
``fhat_n = (-1)^n fft(f)[n] / N``.

On a mode ``n != 0``

* ``T``  multiplies by ``i sgn(n) (c_n^2 + s_n^2) = i sgn(n) coth(2 n kappa delta)``,
* ``T~`` multiplies by ``i sgn(n) 2 c_n s_n     = i sgn(n) csch(2 n kappa delta)``.

Both follow from the sine series of ``zeta_1(x)`` and ``zeta_1(x + i delta)``:
integrating ``(1/pi) zeta_1(x'-x) e^{2ik n x'}`` term by term picks out one
Fourier coefficient of the kernel.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .params import ModelParams, bogo_arrays
from .specfun import zeta1, zeta1_shifted


@dataclass
class PeriodicField:
    """Real ``2 ell``-periodic samples on the uniform grid over ``[-ell, ell)``."""

    samples: np.ndarray
    ell: float = math.pi

    def __post_init__(self):
        self.samples = np.asarray(self.samples)
        n = self.samples.shape[-1]
        if n < 2 or n & (n - 1):
            raise ValueError("grid size must be a power of two")

    @property
    def n_grid(self) -> int:
        return self.samples.shape[-1]

    @property
    def x(self) -> np.ndarray:
        return grid(self.n_grid, self.ell)

    @property
    def coeffs(self) -> np.ndarray:
        return to_modes(self.samples)

    @classmethod
    def from_coeffs(cls, coeffs, ell=math.pi, real=True):
        s = from_modes(coeffs)
        return cls(s.real if real else s, ell)


def grid(n: int, ell: float) -> np.ndarray:
    return -ell + 2 * ell * np.arange(n) / n


def mode_numbers(n: int) -> np.ndarray:
    """Signed mode numbers in FFT order."""
    return np.fft.fftfreq(n, 1.0 / n).astype(int)


def to_modes(f) -> np.ndarray:
    f = np.asarray(f)
    n = f.shape[-1]
    return (-1.0) ** mode_numbers(n) * np.fft.fft(f, axis=-1) / n


def from_modes(fh) -> np.ndarray:
    fh = np.asarray(fh)
    n = fh.shape[-1]
    return np.fft.ifft((-1.0) ** mode_numbers(n) * fh * n, axis=-1)


def multiplier_T(n, params: ModelParams) -> np.ndarray:
    """``i sgn(n)(c_n^2 + s_n^2)``, zero on the mean mode."""
    return _mult(n, params, lambda c, s: c * c + s * s)


def multiplier_Tt(n, params: ModelParams) -> np.ndarray:
    """``i sgn(n) 2 c_n s_n`` for ``n != 0``; the mean mode is handled separately."""
    return _mult(n, params, lambda c, s: 2 * c * s)


def _mult(n, params, fn):
    n = np.asarray(n)
    out = np.zeros(n.shape, dtype=complex)
    nz = n != 0
    c, s = bogo_arrays(n[nz], params.q)
    out[nz] = 1j * np.sign(n[nz]) * fn(c, s)
    return out


def _samples(f):
    return f.samples if isinstance(f, PeriodicField) else np.asarray(f)


def apply_T(f, params: ModelParams):
    """Apply ``T`` spectrally; returns the same type as the input."""
    s = _samples(f)
    n = mode_numbers(s.shape[-1])
    out = from_modes(multiplier_T(n, params) * to_modes(s))
    return _wrap(f, out)


def apply_Tt(f, params: ModelParams, real_output: bool = True):
    """Apply ``T~`` spectrally.

    The mean mode maps to ``-i mean``, so a nonzero mean gives a complex
    result; with ``real_output`` a warning is raised in that case.
    """
    s = _samples(f)
    n = mode_numbers(s.shape[-1])
    fh = to_modes(s)
    m = multiplier_Tt(n, params)
    m[n == 0] = -1j
    if real_output and np.any(np.abs(fh[..., 0]) > 1e-12 * (1 + np.max(np.abs(fh)))):
        warnings.warn("T~ applied to a field with nonzero mean; output is complex", RuntimeWarning)
    out = from_modes(m * fh)
    return _wrap(f, out, real=False)


def _wrap(f, out, real=True):
    if isinstance(f, PeriodicField):
        return PeriodicField(out.real if real else out, f.ell)
    if real and np.isrealobj(np.asarray(f)):
        return out.real
    return out


def derivative(f, ell: float, order: int = 1):
    s = _samples(f)
    n = mode_numbers(s.shape[-1])
    k = math.pi / (2 * ell)
    out = from_modes((2j * k * n) ** order * to_modes(s))
    return out.real if np.isrealobj(s) else out


# ----------------------------------------------------------------------------
# quadrature oracles
# ----------------------------------------------------------------------------

def pv_oracle_T(f, x, params: ModelParams, n_points: int = 2048):
    """Principal value ``(1/pi) PV int zeta_1(x'-x) f(x') dx'`` by a punctured rule.

    The nodes ``x' = x + (j + 1/2) h`` are symmetric about the pole, so the odd
    singular part cancels pairwise and the rule is spectrally accurate for
    smooth periodic ``f``.  ``f`` is a callable.  Returns ``(value, err)``
    with ``err`` the change under halving the number of points.
    """
    def rule(m):
        h = 2 * params.ell / m
        j = np.arange(m) - m // 2
        xp = np.add.outer(np.atleast_1d(x), (j + 0.5) * h)
        return (zeta1(xp - np.atleast_1d(x)[:, None], params) * f(xp)).sum(-1) * h / math.pi

    fine, coarse = rule(n_points), rule(n_points // 2)
    return _squeeze(fine, x), float(np.max(np.abs(fine - coarse)))


def quad_oracle_Tt(f, x, params: ModelParams, n_points: int = 2048):
    """Trapezoid ``(1/pi) int zeta_1(x'-x+i delta) f(x') dx'``; the kernel is smooth."""
    def rule(m):
        xp = grid(m, params.ell)
        d = np.subtract.outer(xp, np.atleast_1d(x)).T
        return (zeta1_shifted(d, params) * f(xp)).sum(-1) * (2 * params.ell / m) / math.pi

    fine, coarse = rule(n_points), rule(n_points // 2)
    return _squeeze(fine, x), float(np.max(np.abs(fine - coarse)))


def _squeeze(v, x):
    return v[0] if np.ndim(x) == 0 else v
