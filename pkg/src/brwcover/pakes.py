"""Limit law of the conditioned total progeny of a critical Galton-Watson tree.

The law ``F`` is known only through its Laplace-Stieltjes transform
``x / sinh(x)`` with ``x = sqrt(2 sigma^2 theta)``. Its tail ``1 - F`` is
recovered by numerical inversion of ``(1 - Fhat(theta)) / theta`` with the
Fourier-series (Bromwich contour) method and Euler summation of the
alternating tail.

Moment constants used by the tests come from the series

    x / sinh x = 1 - x^2/6 + 7 x^4/360 - 31 x^6/15120 + ...

With ``x^2 = 2 sigma^2 theta`` this is ``1 - (sigma^2/3) theta +
(7 sigma^4/90) theta^2 - ...``, so the mean of ``F`` is ``sigma^2/3`` and the
second moment is ``2 * 7 sigma^4 / 90 = 7 sigma^4 / 45``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate
from scipy.special import comb

#: Series coefficients of x/sinh(x) in powers of x^2.
_XCSCH = (1.0, -1.0 / 6.0, 7.0 / 360.0, -31.0 / 15120.0, 127.0 / 604800.0)


def _xcsch(x):
    """``x / sinh(x)`` for complex ``x`` with nonnegative real part."""
    x = np.asarray(x, dtype=complex)
    small = np.abs(x) < 0.1
    x2 = x * x
    series = sum(c * x2**i for i, c in enumerate(_XCSCH))
    safe = np.where(small, 1.0, x)
    e = np.exp(-safe)
    direct = 2.0 * safe * e / (1.0 - e * e)
    return np.where(small, series, direct)


def _one_minus_xcsch_over_x2(x):
    """``(1 - x/sinh x) / x^2`` without cancellation near zero."""
    x = np.asarray(x, dtype=complex)
    small = np.abs(x) < 0.1
    x2 = x * x
    series = -sum(c * x2 ** (i - 1) for i, c in enumerate(_XCSCH) if i > 0)
    safe = np.where(small, 1.0, x)
    direct = (1.0 - _xcsch(safe)) / (safe * safe)
    return np.where(small, series, direct)


def pakes_transform(theta: float, sigma2: float) -> float:
    """``E[exp(-theta V)]`` for ``V ~ F``."""
    if theta < 0:
        raise ValueError("theta must be nonnegative")
    if sigma2 <= 0:
        raise ValueError("sigma2 must be positive")
    x = math.sqrt(2.0 * sigma2 * theta)
    if x < 0.1:
        x2 = x * x
        return sum(c * x2**i for i, c in enumerate(_XCSCH))
    return float(_xcsch(x).real)


def tail_transform(theta, sigma2: float):
    """Laplace transform of the tail ``1 - F``: ``(1 - Fhat(theta)) / theta``."""
    theta = np.asarray(theta, dtype=complex)
    x = np.sqrt(2.0 * sigma2 * theta)
    return 2.0 * sigma2 * _one_minus_xcsch_over_x2(x)


class InversionError(RuntimeError):
    def __init__(self, message: str, partial_sums: np.ndarray):
        super().__init__(message)
        self.partial_sums = partial_sums


@dataclass(frozen=True)
class PakesLaw:
    """Tail of ``F`` for variance ``sigma2`` by Euler-accelerated Fourier inversion.

    ``A`` sets the discretisation error (about ``exp(-A)``), ``terms`` the
    number of plain series terms and ``euler`` the order of the binomial
    averaging applied to the partial sums that follow.
    """

    sigma2: float
    terms: int = 30
    euler: int = 15
    A: float = 18.4
    tol: float = 1e-6

    def __post_init__(self) -> None:
        if self.sigma2 <= 0:
            raise ValueError("sigma2 must be positive")

    def transform(self, theta: float) -> float:
        return pakes_transform(theta, self.sigma2)

    def tail_with_error(self, gamma: float) -> tuple[float, float]:
        """Unclamped ``1 - F(gamma)`` and an error estimate."""
        if gamma <= 0:
            raise ValueError("gamma must be positive")
        n, m, A = self.terms, self.euler, self.A
        k = np.arange(n + m + 2)
        s = (A + 2j * math.pi * k) / (2.0 * gamma)
        vals = tail_transform(s, self.sigma2).real
        terms = (-1.0) ** k * vals
        terms[0] *= 0.5
        partial = np.cumsum(terms) * math.exp(A / 2.0) / gamma
        weights = comb(m, np.arange(m + 1)) / 2.0**m
        e0 = float(weights @ partial[n : n + m + 1])
        e1 = float(weights @ partial[n + 1 : n + m + 2])
        err = abs(e1 - e0) + math.exp(-A)
        if not math.isfinite(e0) or err > self.tol:
            raise InversionError(f"Euler summation did not settle at gamma={gamma} (err {err:.3g})", partial)
        return e0, err

    def tail(self, gamma: float) -> float:
        """``1 - F(gamma)``, clamped to [0, 1]."""
        value, _ = self.tail_with_error(gamma)
        return min(1.0, max(0.0, value))

    def cdf(self, gamma: float) -> float:
        return 1.0 - self.tail(gamma)

    def _upper(self) -> float:
        # tail decays like exp(-pi^2 gamma / (2 sigma^2)); 1e-16 well before this
        return 8.0 * self.sigma2

    def moment(self, order: int) -> float:
        """``E[V^order]`` from the tail: ``order * int gamma^(order-1) tail(gamma)``."""
        f = lambda g: order * g ** (order - 1) * self._raw(g)
        val, _ = integrate.quad(f, 0.0, self._upper(), limit=400, epsabs=1e-12, epsrel=1e-10)
        return val

    def retransform(self, theta: float) -> float:
        """``1 - theta * int exp(-theta g) tail(g) dg``, which should equal :meth:`transform`."""
        f = lambda g: math.exp(-theta * g) * self._raw(g)
        val, _ = integrate.quad(f, 0.0, self._upper(), limit=400, epsabs=1e-13, epsrel=1e-11)
        return 1.0 - theta * val

    def _raw(self, g: float) -> float:
        if g <= 0:
            return 1.0
        return self.tail_with_error(g)[0]


def pakes_tail(gamma: float, sigma2: float) -> float:
    """Limit of ``P(S_n >= gamma n^2 | Z_n > 0)``."""
    return PakesLaw(sigma2).tail(gamma)


def chernoff_rhs(ex: float) -> float:
    """Bound ``exp(-E[X]/8)`` on ``P(X <= E[X]/2)`` for a sum of independent Bernoullis."""
    if ex < 0:
        raise ValueError("expectation must be nonnegative")
    return math.exp(-ex / 8.0)
