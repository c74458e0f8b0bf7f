"""Critical Galton-Watson processes: simulation and exact survival curves."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import mpmath
import numpy as np

from .offspring import Kind, OffspringDist, sample_sum

log = logging.getLogger(__name__)

#: Minimum number of surviving traces before a conditioned estimate is reported.
MIN_ACCEPTED = 100


class NotCriticalError(ValueError):
    pass


def _require_critical(dist: OffspringDist) -> None:
    if abs(float(dist.mean) - 1.0) > 1e-9:
        raise NotCriticalError(f"offspring mean {float(dist.mean)} is not 1")


@dataclass(frozen=True)
class GWTrace:
    """Generation sizes ``Z_0..Z_n`` of one run (zeros after absorption)."""

    sizes: np.ndarray

    @property
    def n_gen(self) -> int:
        return len(self.sizes) - 1

    @property
    def total(self) -> int:
        return int(self.sizes.sum())

    @property
    def survived(self) -> bool:
        return bool(self.sizes[-1] > 0)


def simulate_gw(dist: OffspringDist, n_gen: int, z0: int, rng: np.random.Generator) -> GWTrace:
    _require_critical(dist)
    if n_gen < 0 or z0 < 1:
        raise ValueError("need n_gen >= 0 and z0 >= 1")
    sizes = np.zeros(n_gen + 1, dtype=np.int64)
    sizes[0] = z0
    z = z0
    for i in range(1, n_gen + 1):
        z, _ = sample_sum(dist, z, rng, strict=True)
        if z == 0:
            break
        sizes[i] = z
    return GWTrace(sizes)


@dataclass(frozen=True)
class GWBatch:
    final: np.ndarray  # Z_n per replica
    total: np.ndarray  # S_n per replica
    paths: np.ndarray | None = None  # (reps, n+1) when requested

    @property
    def survived(self) -> np.ndarray:
        return self.final > 0


def simulate_gw_batch(
    dist: OffspringDist,
    n_gen: int,
    z0: int,
    reps: int,
    rng: np.random.Generator,
    keep_paths: bool = False,
) -> GWBatch:
    """``reps`` independent traces; dead traces are dropped from the working set."""
    _require_critical(dist)
    z = np.full(reps, z0, dtype=np.int64)
    total = z.copy()
    alive = np.arange(reps)
    paths = None
    if keep_paths:
        paths = np.zeros((reps, n_gen + 1), dtype=np.int64)
        paths[:, 0] = z0
    zc = z.copy()
    for i in range(1, n_gen + 1):
        if alive.size == 0:
            break
        zc, _ = sample_sum(dist, zc, rng, strict=True)
        total[alive] += zc
        if paths is not None:
            paths[alive, i] = zc
        keep = zc > 0
        alive, zc = alive[keep], zc[keep]
    final = np.zeros(reps, dtype=np.int64)
    if n_gen == 0:
        final[:] = z0
    else:
        final[alive] = zc
    return GWBatch(final, total, paths)


# -- exact survival -----------------------------------------------------------


def _h_mp(dist: OffspringDist, q):
    """``1 - f(1 - q)`` in multiprecision."""
    if dist.kind is Kind.DETERMINISTIC:
        return 1 - (1 - q) ** int(dist.param)
    if dist.kind is Kind.POISSON:
        return -mpmath.expm1(-mpmath.mpf(dist.param.numerator) / dist.param.denominator * q)
    if dist.kind is Kind.GEOMETRIC:
        m = mpmath.mpf(dist.param.numerator) / dist.param.denominator
        return m * q / (1 + m * q)
    return mpmath.fsum(
        (mpmath.mpf(w.numerator) / w.denominator) * (1 - (1 - q) ** j) for j, w in dist.table
    )


def survival_curve(dist: OffspringDist, n: int, dps: int = 40) -> np.ndarray:
    """``P(Z_m > 0)`` for ``m = 0..n`` from ``Z_0 = 1`` by pgf iteration.

    Iterates ``q_m = 1 - f(1 - q_{m-1})`` at ``dps`` decimal digits. A
    parallel double precision run of the cancellation-free recursion is kept
    as a monitor; a relative disagreement above 1e-8 is logged.
    """
    _require_critical(dist)
    out = np.empty(n + 1)
    worst = 0.0
    with mpmath.workdps(dps):
        q = mpmath.mpf(1)
        qf = 1.0
        out[0] = 1.0
        for m in range(1, n + 1):
            q = _h_mp(dist, q)
            qf = dist.one_minus_pgf_at_one_minus(qf)
            out[m] = float(q)
            if out[m] > 0:
                worst = max(worst, abs(qf - out[m]) / out[m])
    if worst > 1e-8:
        log.warning("pgf iteration: double precision drift %.3g", worst)
    return out


def pgf_survival_exact(dist: OffspringDist, n: int) -> float:
    """``P(Z_n > 0) = 1 - f^{(n)}(0)`` without Monte Carlo."""
    if n < 0:
        raise ValueError("n must be nonnegative")
    return float(survival_curve(dist, n)[-1])


# -- total progeny tails ------------------------------------------------------


@dataclass(frozen=True)
class TailEstimate:
    """Monte Carlo estimate of ``P(S_n >= gamma n^2 | Z_n > 0)`` per gamma."""

    gamma: np.ndarray
    estimate: np.ndarray
    stderr: np.ndarray
    accepted: int
    simulated: int
    #: ``n * P(S_n >= gamma n^2)`` without conditioning
    unconditional: np.ndarray


class InsufficientSamples(RuntimeError):
    pass


def total_progeny_tail_mc(
    dist: OffspringDist,
    n: int,
    gamma,
    reps: int,
    rng: np.random.Generator,
    chunk: int = 2_000_000,
    min_accepted: int = MIN_ACCEPTED,
) -> TailEstimate:
    """Conditioned total-progeny tails by rejection of extinct traces."""
    _require_critical(dist)
    gamma = np.atleast_1d(np.asarray(gamma, dtype=float))
    if np.any(gamma <= 0):
        raise ValueError("gamma must be positive")
    thresholds = gamma * float(n) ** 2
    hits_cond = np.zeros(len(gamma), dtype=np.int64)
    hits_all = np.zeros(len(gamma), dtype=np.int64)
    accepted = 0
    done = 0
    while done < reps:
        m = min(chunk, reps - done)
        batch = simulate_gw_batch(dist, n, 1, m, rng)
        big = batch.total[:, None] >= thresholds[None, :]
        surv = batch.survived
        hits_cond += big[surv].sum(axis=0)
        hits_all += big.sum(axis=0)
        accepted += int(surv.sum())
        done += m
    if accepted < min_accepted:
        raise InsufficientSamples(f"only {accepted} of {reps} traces survived {n} generations")
    p = hits_cond / accepted
    se = np.sqrt(np.maximum(p * (1 - p), 0.0) / accepted)
    return TailEstimate(gamma, p, se, accepted, reps, n * hits_all / reps)


def kolmogorov_limit(dist: OffspringDist) -> float:
    """``2 / sigma^2``, the limit of ``n P(Z_n > 0)``."""
    var = float(dist.variance)
    return math.inf if var == 0 else 2.0 / var
