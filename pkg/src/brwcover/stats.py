"""Small statistics toolkit shared by the experiments and the test-suite."""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Hashable, Iterable, Sequence

import numpy as np
from scipy import stats as sps

LIMIT_COEFFICIENT = 2.0 / math.log(1.5)
D2_COEFFICIENT = 2.0 / math.log(2.0)


def wilson_interval(successes: int, n: int, confidence: float = 0.95) -> tuple[float, float]:
    """Wilson score interval for a binomial proportion."""
    if n <= 0:
        raise ValueError("need at least one trial")
    z = sps.norm.ppf(0.5 + confidence / 2.0)
    p = successes / n
    denom = 1.0 + z * z / n
    centre = (p + z * z / (2 * n)) / denom
    half = z * math.sqrt(p * (1 - p) / n + z * z / (4 * n * n)) / denom
    # the bounds are exactly 0 at s = 0 and exactly 1 at s = n
    lo = 0.0 if successes == 0 else max(0.0, centre - half)
    hi = 1.0 if successes == n else min(1.0, centre + half)
    return float(lo), float(hi)


def _as_keys(sample: Iterable) -> list[Hashable]:
    out = []
    for s in sample:
        if isinstance(s, np.ndarray):
            out.append(tuple(s.tolist()))
        elif isinstance(s, (list, tuple)):
            out.append(tuple(s))
        else:
            out.append(s)
    return out


def pooled_table(a: Iterable, b: Iterable, min_count: int = 50) -> tuple[np.ndarray, list]:
    """2 x K contingency table of two samples of hashable outcomes.

    Outcomes whose combined count is below ``min_count`` are merged into one
    "rare" column, so sampling noise from a long tail of tiny cells does not
    dominate distance statistics.
    """
    ca, cb = Counter(_as_keys(a)), Counter(_as_keys(b))
    keys = sorted(set(ca) | set(cb), key=repr)
    big = [k for k in keys if ca[k] + cb[k] >= min_count]
    rare = [k for k in keys if ca[k] + cb[k] < min_count]
    cols = [[ca[k], cb[k]] for k in big]
    labels: list = list(big)
    if rare:
        cols.append([sum(ca[k] for k in rare), sum(cb[k] for k in rare)])
        labels.append("<rare>")
    return np.array(cols, dtype=float).T, labels


def tv_distance(a: Iterable, b: Iterable, min_count: int = 50) -> float:
    """Total variation distance between the empirical laws of two samples."""
    table, _ = pooled_table(a, b, min_count)
    pa = table[0] / table[0].sum()
    pb = table[1] / table[1].sum()
    return 0.5 * float(np.abs(pa - pb).sum())


def tv_binned(a: Iterable, b: Iterable, cells: int = 10) -> float:
    """TV distance on a partition of the pooled outcomes into ``cells`` near-equal-mass bins.

    Outcomes are sorted (tuples lexicographically) and cut into consecutive
    runs of about ``1/cells`` of the pooled mass. The plug-in TV over all
    distinct outcomes carries a sampling bias of order ``sqrt(K / n)`` for
    ``K`` cells; fixing ``K`` keeps that bias small and known, at the price
    of measuring distance on a coarser sigma-algebra (a lower bound on the
    true TV).
    """
    ca, cb = Counter(_as_keys(a)), Counter(_as_keys(b))
    na, nb = sum(ca.values()), sum(cb.values())
    if not na or not nb:
        raise ValueError("empty sample")
    keys = sorted(set(ca) | set(cb))
    total = na + nb
    bins_a, bins_b = [0] * cells, [0] * cells
    cum = 0
    for key in keys:
        i = min(cells - 1, int(cells * cum / total))
        bins_a[i] += ca[key]
        bins_b[i] += cb[key]
        cum += ca[key] + cb[key]
    return 0.5 * sum(abs(x / na - y / nb) for x, y in zip(bins_a, bins_b))


def homogeneity_pvalue(a: Iterable, b: Iterable, min_count: int = 50) -> float:
    """Chi-square test that two samples come from the same law."""
    table, _ = pooled_table(a, b, min_count)
    table = table[:, table.sum(axis=0) > 0]
    if table.shape[1] < 2:
        return 1.0
    return float(sps.chi2_contingency(table, correction=False)[1])


def tv_to_law(sample: Iterable, law: dict) -> float:
    """TV distance between an empirical law and an exact one."""
    keys = _as_keys(sample)
    c = Counter(keys)
    n = len(keys)
    support = set(c) | set(law)
    return 0.5 * sum(abs(c[k] / n - law.get(k, 0.0)) for k in support)


@dataclass
class Summary:
    n: int
    mean: float
    variance: float
    stderr: float
    histogram: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        return {
            "n": self.n,
            "mean": self.mean,
            "variance": self.variance,
            "stderr": self.stderr,
            "histogram": {str(k): v for k, v in sorted(self.histogram.items())},
        }


class AllCensoredError(ValueError):
    pass


def summarize(samples: Sequence, censored: Sequence[bool] | None = None) -> Summary:
    """Mean, unbiased variance and histogram of the non-censored samples."""
    x = np.asarray(samples, dtype=float)
    if censored is not None:
        x = x[~np.asarray(censored, dtype=bool)]
    if x.size == 0:
        raise AllCensoredError("every sample is censored")
    if x.size < 2:
        raise ValueError("need at least two non-censored samples")
    var = float(x.var(ddof=1))
    hist = Counter(int(v) if float(v).is_integer() else float(v) for v in x)
    return Summary(int(x.size), float(x.mean()), var, math.sqrt(var / x.size), dict(hist))


def coefficient(mean_cover: float, r: int) -> float:
    """Finite-size ratio ``(mean T_cov(r) - r) / log log r``."""
    if r <= math.e:
        raise ValueError("log log r needs r > e")
    return (mean_cover - r) / math.log(math.log(r))


def frequency(successes: int, n: int, confidence: float = 0.95) -> dict:
    lo, hi = wilson_interval(successes, n, confidence)
    return {"successes": successes, "n": n, "p": successes / n if n else float("nan"), "wilson": [lo, hi]}
