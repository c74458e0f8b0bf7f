"""Scale sequences of the lower and upper bound constructions.

Lower bound, for ``M > 1`` and ``delta`` in ``(0, 1/4)``::

    n_k = M^((3/2 + delta)^k)
    p_k = M^(-delta (3/2 + delta)^(k-1) / 2)
    R_k = sum_{j<k} M^((1/2 + delta)(3/2 + delta)^j)

Upper bound, for ``a > 0`` and ``delta`` in ``(0, 1]``::

    N_k = exp((3/2)^k) / (delta^2 a^2)
    R_k = sum_{j=1}^{k-1} a N_j^(1/2)          (so R_1 = 0)

Since ``a N_j^(1/2) = exp((3/2)^j / 2) / delta`` the radii do not depend on
``a``, and neither does the chaining condition ``R_k + k <= 2 a N_{k-1}^(1/2)``.
Values are computed with mpmath; entries beyond double range are flagged.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import mpmath

_DPS = 50


@dataclass(frozen=True)
class ScaleEntry:
    k: int
    n: mpmath.mpf  # n_k (lower) or N_k (upper)
    R: mpmath.mpf
    p: mpmath.mpf | None = None  # lower only
    overflow: bool = False
    chain_ok: bool | None = None  # upper only

    def as_dict(self) -> dict:
        f = lambda x: None if x is None else _to_float(x)
        out = {"k": self.k, "n": f(self.n), "R": f(self.R), "overflow": self.overflow}
        if self.p is not None:
            out["p"] = f(self.p)
        if self.chain_ok is not None:
            out["chain_ok"] = self.chain_ok
        return out


@dataclass(frozen=True)
class ScaleTable:
    kind: str
    params: dict
    entries: tuple = field(default_factory=tuple)

    def entry(self, k: int) -> ScaleEntry:
        for e in self.entries:
            if e.k == k:
                return e
        raise KeyError(k)

    def as_dict(self) -> dict:
        return {"kind": self.kind, "params": dict(self.params), "entries": [e.as_dict() for e in self.entries]}


def _to_float(x) -> float:
    try:
        v = float(x)
    except OverflowError:
        return math.inf
    return v


def _too_big(*xs) -> bool:
    return any(not math.isfinite(_to_float(x)) or _to_float(x) == 0.0 and x != 0 for x in xs)


def lower_table(M: float, delta: float, k_max: int) -> ScaleTable:
    if not M > 1:
        raise ValueError("M must exceed 1")
    if not 0 < delta < 0.25:
        raise ValueError("delta must lie in (0, 1/4)")
    entries = []
    with mpmath.workdps(_DPS):
        Mm, dm = mpmath.mpf(M), mpmath.mpf(delta)
        g = mpmath.mpf(3) / 2 + dm
        R = mpmath.mpf(0)
        for k in range(0, k_max + 1):
            n = Mm ** (g**k)
            p = Mm ** (-dm * g ** (k - 1) / 2)
            entries.append(ScaleEntry(k, +n, +R, +p, _too_big(n, R, p)))
            R = R + Mm ** ((mpmath.mpf(1) / 2 + dm) * g**k)
    return ScaleTable("lower", {"M": M, "delta": delta}, tuple(entries))


def upper_table(a: float, delta: float, k_max: int) -> ScaleTable:
    if not a > 0:
        raise ValueError("a must be positive")
    if not 0 < delta <= 1:
        raise ValueError("delta must lie in (0, 1]")
    entries = []
    with mpmath.workdps(_DPS):
        am, dm = mpmath.mpf(a), mpmath.mpf(delta)
        N = lambda k: mpmath.exp(mpmath.mpf(1.5) ** k) / (dm**2 * am**2)
        for k in range(1, k_max + 1):
            R = mpmath.fsum(am * mpmath.sqrt(N(j)) for j in range(1, k))
            chain = bool(R + k <= 2 * am * mpmath.sqrt(N(k - 1)))
            entries.append(ScaleEntry(k, +N(k), +R, None, _too_big(N(k), R), chain))
    return ScaleTable("upper", {"a": a, "delta": delta}, tuple(entries))


def scale_table(kind: str, params: dict, k_max: int) -> ScaleTable:
    """``kind`` is ``lower`` (params M, delta) or ``upper`` (params a, delta)."""
    if k_max < 1:
        raise ValueError("k_max must be at least 1")
    if kind == "lower":
        return lower_table(params["M"], params["delta"], k_max)
    if kind == "upper":
        return upper_table(params["a"], params["delta"], k_max)
    raise ValueError(f"unknown scale table kind {kind!r}")


def chain_delta_limit(k: int) -> float:
    """Largest ``delta`` for which the upper chaining condition holds at ``k >= 2``.

    From ``sum_{j=1}^{k-1} e_j + delta k <= 2 e_{k-1}`` with
    ``e_j = exp((3/2)^j / 2)``; returns a negative number if no delta works.
    """
    if k < 2:
        raise ValueError("the condition is vacuous below k = 2")
    e = [math.exp(1.5**j / 2.0) for j in range(1, k)]
    return (2.0 * e[-1] - sum(e)) / k
