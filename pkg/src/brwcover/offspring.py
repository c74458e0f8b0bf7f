"""Offspring distributions for the branching random walk.

Every distribution carries an exact rational mean and variance so that
criticality of the thinned walk (mean exactly one) can be checked without
floating point slack. Sampling always goes through a caller-owned
``numpy.random.Generator``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from typing import Mapping, Union

import numpy as np

Number = Union[int, float, Fraction]

#: Largest count the exact integer samplers are allowed to produce.
INT_SAFE = 2**62

#: Tolerance on a user table's mean (decimal tables cannot be exact).
MEAN_TOL = 1e-9

#: Tolerance on a user table's total mass.
MASS_TOL = 1e-12


class Kind(str, Enum):
    DETERMINISTIC = "det"
    POISSON = "poisson"
    GEOMETRIC = "geom"
    TABLE = "table"


class DistributionError(ValueError):
    """Raised for invalid offspring laws or distribution spec strings."""


def _frac(x: Number) -> Fraction:
    if isinstance(x, Fraction):
        return x
    if isinstance(x, int):
        return Fraction(x)
    if isinstance(x, str):
        return Fraction(x)
    if not math.isfinite(x):
        raise DistributionError(f"non-finite parameter {x!r}")
    # floats such as 1/3 come back as the intended rational
    return Fraction(x).limit_denominator(10**12)


@dataclass(frozen=True)
class OffspringDist:
    """A law on the nonnegative integers with finite variance.

    ``param`` is the point mass location for ``det`` and the mean for
    ``poisson`` and ``geom``. ``table`` holds ``(j, mu(j))`` pairs with exact
    rational weights for the ``table`` kind and is empty otherwise.
    """

    kind: Kind
    param: Fraction = Fraction(0)
    table: tuple[tuple[int, Fraction], ...] = ()

    def __post_init__(self) -> None:
        if self.kind is Kind.TABLE:
            if not self.table:
                raise DistributionError("empty pmf table")
            for j, w in self.table:
                if j < 0:
                    raise DistributionError(f"negative support point {j}")
                if w < 0:
                    raise DistributionError(f"negative probability {w} at {j}")
            if abs(float(sum(w for _, w in self.table)) - 1.0) > MASS_TOL:
                raise DistributionError("pmf does not sum to 1")
        elif self.kind is Kind.DETERMINISTIC:
            if self.param.denominator != 1 or self.param < 0:
                raise DistributionError("point mass must sit on a nonnegative integer")
        elif self.param < 0:
            raise DistributionError("mean must be nonnegative")

    # -- constructors -------------------------------------------------------

    @classmethod
    def deterministic(cls, m: int) -> "OffspringDist":
        return cls(Kind.DETERMINISTIC, Fraction(m))

    @classmethod
    def poisson(cls, mean: Number) -> "OffspringDist":
        return cls(Kind.POISSON, _frac(mean))

    @classmethod
    def geometric(cls, mean: Number) -> "OffspringDist":
        """Geometric law on {0, 1, ...} with ``mu(j) = (1/(m+1)) (m/(m+1))^j``."""
        return cls(Kind.GEOMETRIC, _frac(mean))

    @classmethod
    def from_table(cls, pmf: Mapping[int, Number]) -> "OffspringDist":
        items = tuple(sorted((int(j), _frac(w)) for j, w in pmf.items() if _frac(w) != 0))
        return cls(Kind.TABLE, Fraction(0), items)

    # -- moments ------------------------------------------------------------

    @property
    def mean(self) -> Fraction:
        if self.kind is Kind.TABLE:
            return sum((j * w for j, w in self.table), Fraction(0))
        return self.param

    @property
    def variance(self) -> Fraction:
        if self.kind is Kind.DETERMINISTIC:
            return Fraction(0)
        if self.kind is Kind.POISSON:
            return self.param
        if self.kind is Kind.GEOMETRIC:
            return self.param * (self.param + 1)
        m = self.mean
        return sum((w * (j - m) ** 2 for j, w in self.table), Fraction(0))

    @property
    def max_support(self) -> float:
        if self.kind is Kind.DETERMINISTIC:
            return float(self.param)
        if self.kind is Kind.TABLE:
            return float(self.table[-1][0])
        return math.inf

    @property
    def zero_mass(self) -> float:
        return self.pmf(0)

    # -- pmf / pgf ----------------------------------------------------------

    def pmf(self, j: int) -> float:
        if j < 0:
            return 0.0
        if self.kind is Kind.DETERMINISTIC:
            return 1.0 if j == self.param else 0.0
        if self.kind is Kind.POISSON:
            lam = float(self.param)
            if lam == 0:
                return 1.0 if j == 0 else 0.0
            return math.exp(-lam + j * math.log(lam) - math.lgamma(j + 1))
        if self.kind is Kind.GEOMETRIC:
            m = float(self.param)
            return (1.0 / (m + 1.0)) * (m / (m + 1.0)) ** j
        return float(dict(self.table).get(j, 0))

    def pgf(self, s):
        """Probability generating function, vectorised over ``s``."""
        s = np.asarray(s, dtype=float)
        if self.kind is Kind.DETERMINISTIC:
            out = s ** int(self.param)
        elif self.kind is Kind.POISSON:
            out = np.exp(float(self.param) * (s - 1.0))
        elif self.kind is Kind.GEOMETRIC:
            q = 1.0 / (float(self.param) + 1.0)
            out = q / (1.0 - (1.0 - q) * s)
        else:
            out = sum(float(w) * s**j for j, w in self.table)
        return float(out) if out.ndim == 0 else out

    def one_minus_pgf_at_one_minus(self, q: float) -> float:
        """``1 - f(1 - q)`` without cancellation for small ``q``."""
        if self.kind is Kind.DETERMINISTIC:
            m = int(self.param)
            return -math.expm1(m * math.log1p(-q)) if q < 1 else 1.0
        if self.kind is Kind.POISSON:
            return -math.expm1(-float(self.param) * q)
        if self.kind is Kind.GEOMETRIC:
            m = float(self.param)
            return m * q / (1.0 + m * q)
        if q >= 1:
            return 1.0 - self.pmf(0)
        l1 = math.log1p(-q)
        return sum(float(w) * -math.expm1(j * l1) for j, w in self.table)

    # -- sampling -----------------------------------------------------------

    def sample(self, size, rng: np.random.Generator) -> np.ndarray:
        """Independent single draws (one per particle)."""
        if self.kind is Kind.DETERMINISTIC:
            return np.full(size, int(self.param), dtype=np.int64)
        if self.kind is Kind.POISSON:
            return rng.poisson(float(self.param), size=size).astype(np.int64)
        if self.kind is Kind.GEOMETRIC:
            q = 1.0 / (float(self.param) + 1.0)
            return rng.geometric(q, size=size).astype(np.int64) - 1
        support = np.array([j for j, _ in self.table], dtype=np.int64)
        probs = np.array([float(w) for _, w in self.table])
        return rng.choice(support, size=size, p=probs / probs.sum())

    # -- spec strings -------------------------------------------------------

    @property
    def spec(self) -> str:
        if self.kind is Kind.TABLE:
            body = ",".join(f"{j}={_fmt(w)}" for j, w in self.table)
            return f"table:{body}"
        return f"{self.kind.value}:{_fmt(self.param)}"

    def __str__(self) -> str:
        return self.spec


def _fmt(x: Fraction) -> str:
    if x.denominator == 1:
        return str(x.numerator)
    return f"{x.numerator}/{x.denominator}"


def parse_dist(spec: str) -> OffspringDist:
    """Parse ``det:3``, ``poisson:3``, ``geom:3`` or ``table:0=0.5,6=0.5``."""
    try:
        kind_s, body = spec.strip().split(":", 1)
        kind = Kind(kind_s.strip())
    except ValueError as exc:
        raise DistributionError(f"bad distribution spec {spec!r}") from exc
    try:
        if kind is Kind.TABLE:
            pmf = {}
            for item in body.split(","):
                j, w = item.split("=")
                pmf[int(j)] = pmf.get(int(j), 0) + Fraction(w.strip())
            return OffspringDist.from_table(pmf)
        value = Fraction(body.strip())
    except (ValueError, ZeroDivisionError) as exc:
        raise DistributionError(f"bad distribution spec {spec!r}") from exc
    if kind is Kind.DETERMINISTIC:
        return OffspringDist.deterministic(int(value)) if value.denominator == 1 else _bad(spec)
    if kind is Kind.POISSON:
        return OffspringDist.poisson(value)
    return OffspringDist.geometric(value)


def _bad(spec: str) -> OffspringDist:
    raise DistributionError(f"bad distribution spec {spec!r}")


def make_dist(kind: str | Kind, d: int, params: Mapping[int, Number] | None = None) -> OffspringDist:
    """Build an offspring law with mean ``d`` and validate it.

    Parametric kinds are parameterised to mean ``d``; a ``table`` kind takes
    ``params`` as its pmf and must have mean ``d`` within ``MEAN_TOL``.
    """
    if d < 2:
        raise DistributionError(f"need d >= 2, got {d}")
    kind = Kind(kind)
    if kind is Kind.DETERMINISTIC:
        dist = OffspringDist.deterministic(d)
    elif kind is Kind.POISSON:
        dist = OffspringDist.poisson(d)
    elif kind is Kind.GEOMETRIC:
        dist = OffspringDist.geometric(d)
    else:
        if not params:
            raise DistributionError("table kind needs a pmf")
        dist = OffspringDist.from_table(params)
    if abs(float(dist.mean) - d) > MEAN_TOL:
        raise DistributionError(f"mean {float(dist.mean)} differs from d={d}")
    return dist


def thin(dist: OffspringDist, p: Number) -> OffspringDist:
    """Law of ``Binomial(L, p)`` with ``L ~ dist``; pgf ``f(1 - p + p s)``."""
    p = _frac(p)
    if not 0 < p <= 1:
        raise DistributionError(f"thinning probability {p} not in (0, 1]")
    if p == 1:
        return dist
    if dist.kind is Kind.POISSON:
        return OffspringDist.poisson(dist.param * p)
    if dist.kind is Kind.GEOMETRIC:
        return OffspringDist.geometric(dist.param * p)
    base = ((int(dist.param), Fraction(1)),) if dist.kind is Kind.DETERMINISTIC else dist.table
    pmf: dict[int, Fraction] = {}
    for n, w in base:
        for j in range(n + 1):
            pmf[j] = pmf.get(j, Fraction(0)) + w * math.comb(n, j) * p**j * (1 - p) ** (n - j)
    return OffspringDist.from_table(pmf)


def pgf_eval(dist: OffspringDist, s: float) -> float:
    if not 0.0 <= s <= 1.0:
        raise ValueError(f"s={s} outside [0, 1]")
    return dist.pgf(s)


def kappa(dist: OffspringDist, d: int) -> float:
    """Probability that a particle has at least one child stepping away from a target."""
    return 1.0 - pgf_eval(dist, 1.0 / d)


def fits_exact(dist: OffspringDist, nmax: float) -> bool:
    if dist.kind is Kind.DETERMINISTIC or dist.kind is Kind.TABLE:
        return nmax * dist.max_support < INT_SAFE
    mean = float(dist.mean)
    sd = math.sqrt(float(dist.variance) * nmax)
    return nmax * mean + 50.0 * sd + 50.0 < INT_SAFE / 2


def sample_sum(dist: OffspringDist, n, rng: np.random.Generator, strict: bool = False):
    """Sum of ``n`` independent draws from ``dist``, elementwise over ``n``.

    Returns ``(total, approximate)``. Each kind has an exact sampler valid for
    any ``n`` (point mass and Poisson additivity, negative binomial for the
    geometric law, a multinomial over the support for tables). Only when the
    result could overflow int64 does the sum fall back to a Gaussian with
    matched mean and variance, rounded and floored at zero; the result is
    then float64 and ``approximate`` is True. ``strict=True`` raises instead.
    """
    scalar = np.ndim(n) == 0
    n_arr = np.asarray(n)
    if n_arr.size == 0:
        return (0 if scalar else n_arr.astype(np.int64)), False
    if n_arr.dtype.kind == "f":
        approx = True
    else:
        approx = not fits_exact(dist, float(n_arr.max()))
    if approx:
        if strict:
            raise OverflowError("exact offspring sum would overflow int64")
        nf = n_arr.astype(np.float64)
        mu = nf * float(dist.mean)
        sd = np.sqrt(nf * float(dist.variance))
        if dist.kind is Kind.DETERMINISTIC:
            out = mu
        else:
            out = np.maximum(np.rint(mu + sd * rng.standard_normal(nf.shape)), 0.0)
        return (float(out) if scalar else out), True

    n_arr = n_arr.astype(np.int64)
    if dist.kind is Kind.DETERMINISTIC:
        out = n_arr * int(dist.param)
    elif dist.kind is Kind.POISSON:
        out = np.asarray(rng.poisson(float(dist.param) * n_arr), dtype=np.int64)
    elif dist.kind is Kind.GEOMETRIC:
        q = 1.0 / (float(dist.param) + 1.0)
        out = np.zeros_like(n_arr)
        pos = n_arr > 0
        if pos.any():
            out[pos] = rng.negative_binomial(n_arr[pos], q)
    else:
        support = np.array([j for j, _ in dist.table], dtype=np.int64)
        probs = np.array([float(w) for _, w in dist.table])
        counts = rng.multinomial(n_arr, probs / probs.sum())
        out = counts @ support
    return (int(out) if scalar else out), False


def binomial_split(n, p: float, rng: np.random.Generator) -> np.ndarray:
    """Draw ``Binomial(n, p)`` elementwise; float (approximate) counts use a Gaussian."""
    n = np.asarray(n)
    if n.dtype.kind != "f":
        return rng.binomial(n, p)
    mu = n * p
    sd = np.sqrt(n * p * (1.0 - p))
    return np.clip(np.rint(mu + sd * rng.standard_normal(n.shape)), 0.0, n)
