"""Experiment drivers.

Replicas are grouped into fixed-size blocks and block ``b`` of an
experiment draws from the stream keyed by ``(seed, tag, b)``. The block
size is part of the configuration (never derived from the worker count), so
the output is the same for any number of workers. Blocks are farmed out to
a process pool and results are reassembled in replica order.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from . import field as fld
from .freeze import freeze_1d_batch, freeze_tree_batch
from .genealogy import feed_moves, hit_times, replay_shell, simulate_genealogy
from .gw import pgf_survival_exact, simulate_gw_batch, total_progeny_tail_mc
from .offspring import OffspringDist, parse_dist
from .pakes import PakesLaw
from .rng import stream
from .scales import lower_table, upper_table
from .stats import coefficient, frequency, summarize, wilson_interval
from .tree import ROOT, ball_size, subtree_shell

# stream tags keep the experiments' random streams apart
TAG_COVER, TAG_HIT, TAG_FREEZE, TAG_CENSUS, TAG_GW, TAG_UPPER, TAG_GENEALOGY = range(1, 8)


def auto_block(r: int, d: int, cap: int = 1024) -> int:
    """Replicas per block for cover-type runs: about 2**18 ball cells per block."""
    return max(1, min(cap, 2**18 // ball_size(d, r)))


def plan_blocks(replicas: int, block: int) -> list[tuple[int, int, int]]:
    """``(block index, first replica, count)`` for ``replicas`` split into blocks."""
    if block < 1:
        raise ValueError("block size must be positive")
    return [(b, s, min(block, replicas - s)) for b, s in enumerate(range(0, replicas, block))]


def run_blocks(fn: Callable, tasks: Sequence, threads: int = 1) -> list:
    """Apply ``fn`` to every task; order of the results follows ``tasks``."""
    if threads <= 1 or len(tasks) <= 1:
        return [fn(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=threads) as ex:
        return list(ex.map(fn, tasks))


# -- cover ---------------------------------------------------------------------


def _cover_task(task):
    r, horizon, spec, d, seed, b, count, strict, lump = task
    batch = fld.simulate_block(r, horizon, parse_dist(spec), d, stream(seed, TAG_COVER, r, b), count, strict=strict, lump=lump)
    return batch.cover_time, batch.censored, batch.extinct, batch.approximate


@dataclass
class CoverResult:
    r: int
    cover_time: np.ndarray
    censored: np.ndarray
    extinct: np.ndarray
    approximate: np.ndarray
    seed: int

    def rows(self) -> list[dict]:
        return [
            {
                "replica": i,
                "r": self.r,
                "cover_time": "" if self.cover_time[i] < 0 else int(self.cover_time[i]),
                "censored": int(self.censored[i]),
                "extinct": int(self.extinct[i]),
                "approx_flag": int(self.approximate[i]),
                "seed": self.seed,
            }
            for i in range(len(self.cover_time))
        ]

    def summary(self) -> dict:
        ok = ~self.censored & ~self.extinct
        n = len(self.cover_time)
        out = {
            "r": self.r,
            "replicas": n,
            "censored": int(self.censored.sum()),
            "extinct": int(self.extinct.sum()),
            "approximate": int(self.approximate.sum()),
            "censoring_rate": float(self.censored.sum() / max(1, n - self.extinct.sum())),
        }
        if ok.sum() >= 2:
            s = summarize(self.cover_time[ok] - self.r)
            out["excess"] = s.as_dict()
            if self.r > math.e:
                out["coefficient_finite_size"] = coefficient(s.mean + self.r, self.r)
                out["coefficient_note"] = "finite-size ratio, not the limit"
        return out


def cover_experiment(
    r: int,
    dist: OffspringDist,
    d: int,
    seed: int,
    replicas: int,
    slack: int = fld.DEFAULT_SLACK,
    threads: int = 1,
    block: int = 0,
    strict: bool = False,
    lump: int | None = 4,
) -> CoverResult:
    block = block or auto_block(r, d)
    tasks = [(r, r + slack, dist.spec, d, seed, b, n, strict, lump) for b, _, n in plan_blocks(replicas, block)]
    parts = run_blocks(_cover_task, tasks, threads)
    cat = lambda i: np.concatenate([p[i] for p in parts])
    return CoverResult(r, cat(0), cat(1), cat(2), cat(3), seed)


# -- projected hitting ---------------------------------------------------------


def _hit_task(task):
    L, k_band, spec, d, seed, b, count = task
    return fld.hitting_single_block(L, k_band, parse_dist(spec), d, stream(seed, TAG_HIT, L, b), count)


def hit_experiment(L: int, k_band: int, dist: OffspringDist, d: int, seed: int, replicas: int, threads: int = 1, block: int = 4096) -> np.ndarray:
    tasks = [(L, k_band, dist.spec, d, seed, b, n) for b, _, n in plan_blocks(replicas, block)]
    return np.concatenate(run_blocks(_hit_task, tasks, threads))


# -- freezing --------------------------------------------------------------------


def _freeze_task(task):
    mode, L, k, n0, spec, d, seed, b, count = task
    dist = parse_dist(spec)
    rng = stream(seed, TAG_FREEZE, b)
    if mode == "1d":
        res = freeze_1d_batch(L, k, n0, dist, d, rng, count)
    else:
        target = next(iter(subtree_shell(ROOT, L, d)))
        res = freeze_tree_batch({ROOT: n0}, target, k, dist, rng, count, d)
    return res.Y, res.F, res.S


def freeze_experiment(
    L: int, k: int, n0: int, dist: OffspringDist, d: int, seed: int, replicas: int, mode: str = "1d", threads: int = 1, block: int = 10000
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    if mode not in ("1d", "tree"):
        raise ValueError("mode is '1d' or 'tree'")
    tasks = [(mode, L, k, n0, dist.spec, d, seed, b, n) for b, _, n in plan_blocks(replicas, block)]
    parts = run_blocks(_freeze_task, tasks, threads)
    return tuple(np.concatenate([p[i] for p in parts]) for i in range(3))


# -- census and the lower bound -------------------------------------------------


def _census_task(task):
    r, k_max, spec, d, seed, b, count, thresholds = task
    cb = fld.census_block(r, k_max, parse_dist(spec), d, stream(seed, TAG_CENSUS, r, b), count, radii=[r])
    return _slow_summary(cb, r, k_max, thresholds)


def _slow_summary(cb: fld.CensusBatch, r: int, k_max: int, thresholds) -> dict:
    any_slow = np.stack([cb.any_slow(k, r, thresholds[k]) for k in range(k_max + 1)], axis=1)
    any_y0 = np.stack([cb.Y0[(k, r)].any(axis=1) for k in range(k_max + 1)], axis=1)
    return {"any_slow": any_slow, "any_y0": any_y0, "cover_time": cb.cover.cover_time, "censored": cb.cover.censored}


def default_thresholds(k_max: int, M: float = 4.0, delta: float = 0.1) -> list[float]:
    """``n_k`` from the lower scale table, used as the F-threshold of slow vertices."""
    tab = lower_table(M, delta, max(k_max, 1))
    return [math.inf] + [float(tab.entry(k).n) for k in range(1, k_max + 1)]


def lower_bound_experiment(
    r_list: Sequence[int],
    k_max: int,
    dist: OffspringDist,
    d: int,
    reps: int,
    seed: int,
    thresholds: Sequence[float] | None = None,
    threads: int = 1,
    block: int = 500,
    M: float = 4.0,
    delta: float = 0.1,
) -> dict:
    """Frequencies of slow boundary vertices and the cover-time bound they force.

    A_k holds when some ``z`` on the boundary shell has ``Y^(k)_z = 0`` and
    ``F^(k)_z <= n_k``. Such a ``z`` is first visited at time ``r + 2k`` or
    later, so the cover time is at least ``r + 2k``; violations are counted.
    """
    thresholds = list(thresholds) if thresholds is not None else default_thresholds(k_max, M, delta)
    report = {"k_max": k_max, "thresholds": [t if math.isfinite(t) else None for t in thresholds],
              "scale_params": {"M": M, "delta": delta}, "note": "artifact-scale radii, not the asymptotic R_k", "radii": []}
    for r in r_list:
        tasks = [(r, k_max, dist.spec, d, seed, b, n, thresholds) for b, _, n in plan_blocks(reps, block)]
        parts = run_blocks(_census_task, tasks, threads)
        slow = np.concatenate([p["any_slow"] for p in parts])
        y0 = np.concatenate([p["any_y0"] for p in parts])
        cover = np.concatenate([p["cover_time"] for p in parts])
        cens = np.concatenate([p["censored"] for p in parts])
        rows = []
        for k in range(k_max + 1):
            a_k = slow[:, k]
            entry = {"k": k, "A_k": frequency(int(a_k.sum()), reps), "Y0": frequency(int(y0[:, k].sum()), reps)}
            if k >= 1:
                prev = slow[:, k - 1]
                both = int((a_k & prev).sum())
                entry["persistence"] = frequency(both, int(prev.sum())) if prev.any() else None
            known = cover >= 0
            entry["bound"] = r + 2 * k
            entry["violations"] = int((a_k & known & (cover < r + 2 * k)).sum())
            entry["checked"] = int((a_k & (known | cens)).sum())
            rows.append(entry)
        report["radii"].append({"r": r, "rows": rows, "slow_flags": slow})
    return report


def _genealogy_slow_task(task):
    r, k_max, spec, d, seed, b, count, thresholds, brute = task
    dist = parse_dist(spec)
    g = simulate_genealogy(dist, d, r + 2 * k_max, stream(seed, TAG_GENEALOGY, r, b), count)
    H = hit_times(g, r)[r]
    out = np.zeros((count, k_max + 1), dtype=bool)
    out[:, 0] = True
    if brute:
        for k in range(1, k_max + 1):
            Y, F = replay_shell(g, r, k)
            out[:, k] = ((Y == 0) & (F <= thresholds[k])).any(axis=1)
    else:
        acc = fld.CensusAccumulator(d, [r], k_max, count)
        feed_moves(g, r, acc)
        for k in range(1, k_max + 1):
            y0 = (H < 0) | (H >= r + 2 * k)
            out[:, k] = (y0 & (acc.F(k, r) <= thresholds[k])).any(axis=1)
    return out


def slow_frequency_genealogy(
    r: int, k_max: int, dist: OffspringDist, d: int, reps: int, seed: int,
    thresholds: Sequence[float] | None = None, brute: bool = False, block: int = 200, threads: int = 1,
) -> np.ndarray:
    """Per-replica A_k flags from per-particle simulations (independent of the field engine).

    ``brute=True`` replays every line of descent for every boundary vertex;
    otherwise the per-particle moves are fed to the census accounting.
    """
    thresholds = list(thresholds) if thresholds is not None else default_thresholds(k_max)
    tasks = [(r, k_max, dist.spec, d, seed, b, n, thresholds, brute) for b, _, n in plan_blocks(reps, block)]
    return np.concatenate(run_blocks(_genealogy_slow_task, tasks, threads))


# -- upper bound -------------------------------------------------------------------


def _upper_task(task):
    spec, d, N0, radii, N_k, seed, b, count = task
    dist = parse_dist(spec)
    k_max = len(radii)
    T = radii[-1] + 2 * k_max
    g = simulate_genealogy(dist, d, T, stream(seed, TAG_UPPER, b), count, n0=N0)
    Bk = np.zeros((count, k_max), dtype=bool)
    for i, (rho, Nk) in enumerate(zip(radii, N_k)):
        Y, F = replay_shell(g, rho, i + 1)
        Bk[:, i] = ((Y + F) >= Nk).all(axis=1)
    r = radii[-1]
    H = hit_times(g, r)
    hit_ok = np.ones(count, dtype=bool)
    cover = np.zeros(count, dtype=np.int64)
    for j, h in enumerate(H):
        hit_ok &= ((h >= 0) & (h <= j + 2 * k_max)).all(axis=1)
        cover = np.maximum(cover, np.where(h < 0, np.iinfo(np.int64).max, h).max(axis=1))
    return Bk, hit_ok, cover


def upper_bound_experiment(
    k_max: int,
    a: float,
    dist: OffspringDist,
    d: int,
    N0: int,
    reps: int,
    seed: int,
    delta: float = 1.0,
    threads: int = 1,
    block: int = 10,
    max_particles: int = 5_000_000,
) -> dict:
    """Frequencies of the B_k events from ``N0`` particles at the root.

    ``B_k`` holds when every ``x`` on the shell of radius ``floor(R_k)``
    has ``F^(k)_x + Y^(k)_x >= N_k``. ``k_max`` is cut back when the
    per-particle simulation would exceed ``max_particles`` per block.
    """
    tab = upper_table(a, delta, k_max)
    radii, N_k = [], []
    truncated = None
    for e in tab.entries:
        rho = int(math.floor(float(e.R)))
        T = rho + 2 * e.k
        est = block * N0 * sum(float(dist.mean) ** t for t in range(T + 1))
        if est > max_particles:
            truncated = e.k
            break
        radii.append(rho)
        N_k.append(float(e.n))
    if not radii:
        raise ValueError("no feasible k at this scale")
    tasks = [(dist.spec, d, N0, radii, N_k, seed, b, n) for b, _, n in plan_blocks(reps, block)]
    parts = run_blocks(_upper_task, tasks, threads)
    Bk = np.concatenate([p[0] for p in parts])
    hit_ok = np.concatenate([p[1] for p in parts])
    cover = np.concatenate([p[2] for p in parts])
    k_eff = len(radii)
    rows = []
    for i in range(k_eff):
        row = {"k": i + 1, "radius": radii[i], "N_k": N_k[i], "B_k": frequency(int(Bk[:, i].sum()), reps)}
        if i >= 1:
            fail = int((~Bk[:, i] & Bk[:, i - 1]).sum())
            row["fail_after_prev"] = frequency(fail, reps)
            _, hi = wilson_interval(fail, reps)
            pref = d * (d - 1) ** max(radii[i] - 1, 0)
            scale = math.sqrt(N_k[i - 1]) / a
            row["fitted_delta"] = a / math.sqrt(N_k[i - 1]) * math.log(pref / hi) if hi > 0 else None
            row["union_shape"] = {"prefactor": pref, "exponent_scale": scale}
        rows.append(row)
    r = radii[-1]
    all_B = Bk.all(axis=1)
    good = all_B & hit_ok
    return {
        "a": a, "delta": delta, "N0": N0, "k_max": k_eff, "truncated_at": truncated,
        "note": "artifact-scale constants, not the asymptotic regime",
        "rows": rows,
        "implication": {
            "r": r, "bound": r + 2 * k_eff, "runs": int(good.sum()),
            "violations": int((good & (cover > r + 2 * k_eff)).sum()),
        },
        "B_flags": Bk,
    }


# -- Galton-Watson and Pakes diagnostics ---------------------------------------------


def _gw_task(task):
    spec, n, seed, b, count = task
    batch = simulate_gw_batch(parse_dist(spec), n, 1, count, stream(seed, TAG_GW, n, b))
    return int(batch.survived.sum())


def gw_survival_mc(dist: OffspringDist, n: int, reps: int, seed: int, threads: int = 1, block: int = 1_000_000) -> int:
    tasks = [(dist.spec, n, seed, b, c) for b, _, c in plan_blocks(reps, block)]
    return sum(run_blocks(_gw_task, tasks, threads))


def gw_diagnostics(dist: OffspringDist, n: int, reps: int, seed: int, threads: int = 1) -> dict:
    exact = pgf_survival_exact(dist, n)
    hits = gw_survival_mc(dist, n, reps, seed, threads)
    lo, hi = wilson_interval(hits, reps, 0.99)
    return {
        "n": n, "exact": exact, "n_times_exact": n * exact, "kolmogorov": 2.0 / float(dist.variance),
        "mc": hits / reps, "wilson99": [lo, hi], "inside": lo <= exact <= hi, "reps": reps,
    }


def pakes_report(sigma2: float, gammas: Sequence[float]) -> dict:
    law = PakesLaw(sigma2)
    rows = []
    for g in gammas:
        val, err = law.tail_with_error(g)
        rows.append({"gamma": g, "tail": min(1.0, max(0.0, val)), "error_estimate": err})
    return {"sigma2": sigma2, "mean": law.moment(1), "second_moment": law.moment(2), "rows": rows}


def pakes_mc(dist: OffspringDist, n: int, gammas: Sequence[float], reps: int, seed: int) -> dict:
    est = total_progeny_tail_mc(dist, n, gammas, reps, stream(seed, TAG_GW, 0))
    law = PakesLaw(float(dist.variance))
    return {
        "n": n, "accepted": est.accepted, "simulated": est.simulated,
        "rows": [
            {"gamma": float(g), "mc": float(p), "stderr": float(s), "limit": law.tail(float(g))}
            for g, p, s in zip(est.gamma, est.estimate, est.stderr)
        ],
    }
