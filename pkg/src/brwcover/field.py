"""Count-field simulation of the branching random walk on the d-regular tree.

The field keeps one particle count per vertex of the ball ``B(R)`` in the
level layout of :class:`brwcover.tree.Levels`. Below each boundary vertex
``z`` (depth ``R``) counts are kept per depth only: from any vertex strictly
below ``z`` a child steps up with probability ``1/d`` and down otherwise,
and the only way back into the ball is through ``z``, so the per-depth
projection is an exact Markov chain for everything observed inside the ball.

When a subtree of the ball (rooted at depth ``q``) has had every vertex
visited, the same argument lets the cover engine collapse it to per-depth
counts as well ("block lumping"); nothing inside it can be hit for the
first time any more.

Pruning: a particle at depth ``r + l`` at time ``t`` needs ``l`` steps to
reach ``B(r)``, so with a horizon ``h`` it is removed once ``l > h - t``.

Census accounting relies on one identity. For a particle at ``u`` at time
``t`` that started at the root, the number of steps along its path that
increased the distance to a vertex ``z`` is ``(t + d(u, z) - |z|) / 2``,
whatever the path. Hence ``Y^(k)_z = 0`` exactly when ``H(z) >= |z| + 2k``,
and ``F^(k)_z`` is a sum of edge move counts over (time, edge) pairs that
satisfy a linear condition, computed for all ``z`` at once by range updates
over subtree blocks.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .offspring import OffspringDist, binomial_split, fits_exact, sample_sum
from .rng import as_generator
from .tree import Levels, VertexId, aggregate_up, ball_size, expand_down, shell_size

#: Largest radius accepted by the census.
R_CENSUS_MAX = 8
#: Default horizon slack (horizon = r + slack).
DEFAULT_SLACK = 60
#: Default memory budget for one block of replicas, in bytes.
DEFAULT_BUDGET = 2 * 2**30


class MemoryBudgetError(MemoryError):
    def __init__(self, required: int, budget: int):
        super().__init__(f"simulation needs about {required} bytes, budget is {budget}")
        self.required = required
        self.budget = budget


class CensusRangeError(ValueError):
    pass


# -- the particle field -------------------------------------------------------


@dataclass
class ParticleField:
    """Particle counts at time ``t`` for a batch of independent replicas.

    ``levels[j]`` has shape ``(B, shell_size(d, j))`` for ``j = 0..R``;
    ``outer[:, z, l-1]`` holds the particles ``l`` levels below boundary
    vertex ``z``. ``lumps[:, w, l]`` holds the particles ``l`` levels below
    (or at, for ``l = 0``) a collapsed block root ``w`` at depth ``q``.
    """

    t: int
    d: int
    levels: list
    outer: np.ndarray
    approximate: np.ndarray
    q: int | None = None
    lumps: np.ndarray | None = None
    covered: np.ndarray | None = None

    @classmethod
    def initial(cls, d: int, R: int, reps: int = 1, q: int | None = None, n0: int = 1) -> "ParticleField":
        levels = [np.zeros((reps, shell_size(d, j)), dtype=np.int64) for j in range(R + 1)]
        levels[0][:, 0] = n0
        outer = np.zeros((reps, shell_size(d, R), 0), dtype=np.int64)
        lumps = covered = None
        if q is not None:
            lumps = np.zeros((reps, shell_size(d, q), 1), dtype=np.int64)
            covered = np.zeros((reps, shell_size(d, q)), dtype=bool)
        return cls(0, d, levels, outer, np.zeros(reps, dtype=bool), q, lumps, covered)

    @property
    def R(self) -> int:
        return len(self.levels) - 1

    @property
    def B(self) -> int:
        return self.levels[0].shape[0]

    @property
    def is_float(self) -> bool:
        return self.levels[0].dtype.kind == "f"

    def arrays(self) -> list:
        out = list(self.levels) + [self.outer]
        if self.lumps is not None:
            out.append(self.lumps)
        return out

    def max_count(self) -> float:
        return max(float(a.max(initial=0)) for a in self.arrays())

    def totals(self) -> np.ndarray:
        """Total particles per replica (float64, exact below 2**53)."""
        tot = np.zeros(self.B)
        for a in self.arrays():
            tot += a.reshape(self.B, -1).sum(axis=1, dtype=np.float64)
        return tot

    def as_float(self) -> "ParticleField":
        f = lambda a: None if a is None else a.astype(np.float64)
        return ParticleField(
            self.t, self.d, [f(a) for a in self.levels], f(self.outer), np.ones(self.B, dtype=bool),
            self.q, f(self.lumps), self.covered,
        )

    def take(self, rows: np.ndarray) -> "ParticleField":
        g = lambda a: None if a is None else a[rows]
        return ParticleField(
            self.t, self.d, [a[rows] for a in self.levels], self.outer[rows], self.approximate[rows],
            self.q, g(self.lumps), g(self.covered),
        )

    def occupied_depths(self, row: int = 0) -> list[int]:
        out = [j for j, a in enumerate(self.levels) if a[row].any()]
        R = self.R
        out += [R + l + 1 for l in range(self.outer.shape[2]) if self.outer[row, :, l].any()]
        if self.lumps is not None:
            out += [self.q + l for l in range(self.lumps.shape[2]) if self.lumps[row, :, l].any()]
        return sorted(set(out))


def _binom(n, p: float, rng: np.random.Generator):
    return binomial_split(n, p, rng)


def _split(K: np.ndarray, m: int, rng: np.random.Generator) -> np.ndarray:
    """Uniform split of ``K`` over ``m`` categories by a chain of binomials."""
    out = np.empty(K.shape + (m,), dtype=K.dtype)
    rest = K
    for i in range(m - 1):
        x = _binom(rest, 1.0 / (m - i), rng)
        out[..., i] = x
        rest = rest - x
    out[..., m - 1] = rest
    return out


def _to_parent(up: np.ndarray, j: int, d: int) -> np.ndarray:
    """Sum counts at depth ``j >= 1`` onto their parents at depth ``j - 1``."""
    if j == 1:
        return up.sum(axis=-1, keepdims=True)
    return up.reshape(up.shape[:-1] + (-1, d - 1)).sum(axis=-1)


def _trim(a: np.ndarray, keep: int, floor: int = 0) -> np.ndarray:
    """Drop trailing all-zero depth slices, keep at most ``keep`` of them."""
    n = min(a.shape[-1], max(keep, 0))
    while n > floor and not a[..., n - 1].any():
        n -= 1
    return a[..., :n]


class MoveRecorder:
    """Receives per-step edge move counts; the base class ignores them."""

    def down(self, t: int, D: int, counts: np.ndarray, level: int) -> None:
        """``counts`` of moves arriving at depth ``D`` at time ``t``, indexed at ``level``."""

    def up(self, t: int, j: int, counts: np.ndarray) -> None:
        """Moves from depth-``j`` vertices to their parents arriving at time ``t``."""

    def total(self, t: int, totals: np.ndarray) -> None:
        """Total particles at time ``t`` before pruning."""


def step(
    fld: ParticleField,
    r: int,
    horizon: int,
    dist: OffspringDist,
    d: int,
    rng: np.random.Generator,
    prune: bool = True,
    strict: bool = False,
    recorder: MoveRecorder | None = None,
) -> ParticleField:
    """Advance the field by one generation.

    Each occupied cell draws its total number of children and splits them
    over the neighbours by binomial chains; particles that can no longer
    reach ``B(r)`` by ``horizon`` are removed afterwards when ``prune``.
    """
    if fld.t >= horizon:
        raise ValueError("field is already at the horizon")
    if fld.d != d:
        raise ValueError("field was built for a different d")
    if not fld.is_float and not fits_exact(dist, fld.max_count() * d):
        if strict:
            raise OverflowError("particle counts would overflow int64")
        fld = fld.as_float()
    rec = recorder or MoveRecorder()
    t, R, B, q = fld.t, fld.R, fld.B, fld.q
    t1 = t + 1
    dt = fld.levels[0].dtype
    new = [np.zeros_like(a) for a in fld.levels]
    Lo = fld.outer.shape[2]
    nR = fld.outer.shape[1]
    new_outer = np.zeros((B, nR, Lo + 1), dtype=dt)
    new_lumps = None
    if fld.lumps is not None:
        new_lumps = np.zeros(fld.lumps.shape[:2] + (fld.lumps.shape[2] + 1,), dtype=dt)

    for j in range(t % 2, R + 1, 2):
        c = fld.levels[j]
        if not c.any():
            continue
        K, _ = sample_sum(dist, c, rng, strict)
        if j == 0:
            if R == 0:
                new_outer[:, 0, 0] += K[:, 0]
                rec.down(t1, 1, K, 0)
            else:
                parts = _split(K[:, 0], d, rng)
                new[1] += parts
                rec.down(t1, 1, parts, 1)
            continue
        up = _binom(K, 1.0 / d, rng)
        down = K - up
        new[j - 1] += _to_parent(up, j, d)
        rec.up(t1, j, up)
        if j < R:
            ch = _split(down, d - 1, rng).reshape(B, -1)
            new[j + 1] += ch
            rec.down(t1, j + 1, ch, j + 1)
        else:
            new_outer[:, :, 0] += down
            rec.down(t1, R + 1, down, R)

    if Lo:
        l0 = 2 if (t - R) % 2 == 0 else 1
        sl = fld.outer[:, :, l0 - 1 :: 2]
        if sl.size and sl.any():
            K, _ = sample_sum(dist, sl, rng, strict)
            up = _binom(K, 1.0 / d, rng)
            down = K - up
            ls = np.arange(l0, Lo + 1, 2)
            new_outer[:, :, ls] += down  # depth l -> l + 1, stored at index l
            for i, l in enumerate(ls):
                rec.down(t1, R + l + 1, down[:, :, i], R)
            if l0 == 1:
                new[R] += up[:, :, 0]
                if len(ls) > 1:
                    new_outer[:, :, ls[1:] - 2] += up[:, :, 1:]
            else:
                new_outer[:, :, ls - 2] += up

    if fld.lumps is not None:
        L = fld.lumps.shape[2]
        l0 = (t - q) % 2
        sl = fld.lumps[:, :, l0::2]
        if sl.size and sl.any():
            K, _ = sample_sum(dist, sl, rng, strict)
            up = _binom(K, 1.0 / d, rng)
            down = K - up
            ls = np.arange(l0, L, 2)
            new_lumps[:, :, ls + 1] += down
            if l0 == 0:
                new[q - 1] += _to_parent(up[:, :, 0], q, d)
                if len(ls) > 1:
                    new_lumps[:, :, ls[1:] - 1] += up[:, :, 1:]
            else:
                new_lumps[:, :, ls - 1] += up
        cov = fld.covered
        if cov.any():
            new_lumps[:, :, 0][cov] += new[q][cov]
            new[q][cov] = 0

    out = ParticleField(t1, d, new, new_outer, fld.approximate.copy(), q, new_lumps, fld.covered)
    rec.total(t1, out.totals())
    if prune:
        room = r + horizon - t1  # deepest depth that can still reach B(r)
        for j in range(R + 1):
            if j > room:
                out.levels[j][:] = 0
        out.outer = _trim(out.outer, room - R)
        if out.lumps is not None:
            out.lumps = _trim(out.lumps, room - q + 1, floor=1)
    else:
        out.outer = _trim(out.outer, out.outer.shape[2])
        if out.lumps is not None:
            out.lumps = _trim(out.lumps, out.lumps.shape[2], floor=1)
    return out


# -- census accounting --------------------------------------------------------


class CensusAccumulator(MoveRecorder):
    """Accumulates ``F^(k)_z`` for every ``z`` on shells of the given radii.

    A move arriving at depth ``D`` at time ``t`` is the ``k``-th away step
    with respect to ``z`` exactly when the lowest common ancestor of its
    endpoint ``c`` and ``z`` sits at depth ``lam = (t + D - 2k) / 2`` with
    ``lam < D``. Those ``z`` form the subtree of ``c``'s depth-``lam``
    ancestor minus that of its depth-``lam+1`` ancestor. A move up from
    ``v`` at depth ``j`` is away from every ``z`` below ``v`` and is the
    ``k``-th one when ``t = 2k + j - 1``.

    The counts equal ``F^(k)_z`` whenever ``Y^(k)_z = 0``.
    """

    def __init__(self, d: int, radii: Sequence[int], k_max: int, reps: int, dtype=np.int64):
        self.d = d
        self.radii = sorted(set(int(x) for x in radii))
        self.k_max = k_max
        self.acc = {
            (k, rho): [np.zeros((reps, shell_size(d, lam)), dtype=dtype) for lam in range(rho + 1)]
            for k in range(1, k_max + 1)
            for rho in self.radii
        }

    def _ensure_float(self, counts: np.ndarray) -> None:
        if counts.dtype.kind == "f" and next(iter(self.acc.values()))[0].dtype.kind != "f":
            for key, arrs in self.acc.items():
                self.acc[key] = [a.astype(np.float64) for a in arrs]

    def down(self, t: int, D: int, counts: np.ndarray, level: int) -> None:
        if not self.acc:
            return
        self._ensure_float(counts)
        for (k, rho), arrs in self.acc.items():
            twice = t + D - 2 * k
            if twice < 0 or twice % 2:
                continue
            lam = twice // 2
            if lam > min(rho, D - 1):
                continue
            arrs[lam] += aggregate_up(counts, self.d, level, lam)
            if lam + 1 <= min(rho, D):
                arrs[lam + 1] -= aggregate_up(counts, self.d, level, lam + 1)

    def up(self, t: int, j: int, counts: np.ndarray) -> None:
        if not self.acc:
            return
        self._ensure_float(counts)
        for (k, rho), arrs in self.acc.items():
            if j <= rho and t == 2 * k + j - 1:
                arrs[j] += counts

    def F(self, k: int, rho: int) -> np.ndarray:
        arrs = self.acc[(k, rho)]
        return sum(expand_down(a, self.d, lam, rho) for lam, a in enumerate(arrs))

    def take(self, rows: np.ndarray) -> None:
        for key, arrs in self.acc.items():
            self.acc[key] = [a[rows] for a in arrs]


class _Trace(MoveRecorder):
    def __init__(self, reps: int, horizon: int):
        self.totals = np.full((reps, horizon + 1), np.nan)
        self.totals[:, 0] = 1.0
        self.rows = np.arange(reps)

    def total(self, t: int, totals: np.ndarray) -> None:
        self.totals[self.rows, t] = totals


class _Chain(MoveRecorder):
    def __init__(self, *parts: MoveRecorder):
        self.parts = [p for p in parts if p is not None]

    def down(self, *a):
        for p in self.parts:
            p.down(*a)

    def up(self, *a):
        for p in self.parts:
            p.up(*a)

    def total(self, *a):
        for p in self.parts:
            p.total(*a)


# -- cover engine -------------------------------------------------------------


@dataclass
class CoverBatch:
    """Results for a block of replicas, in replica order."""

    r: int
    horizon: int
    cover_time: np.ndarray  # -1 when censored or extinct
    censored: np.ndarray
    extinct: np.ndarray
    approximate: np.ndarray
    end_time: np.ndarray
    hits: list | None = None  # per depth, (B, shell size); -1 = not hit by the end
    totals: np.ndarray | None = None
    F: dict | None = None  # (k, rho) -> (B, shell size), valid where Y^(k) = 0
    radii: tuple = ()
    k_max: int = 0

    def __len__(self) -> int:
        return len(self.cover_time)

    def cover_time_at(self, r2: int) -> np.ndarray:
        """Cover time of the nested ball ``B(r2)``; -1 where some vertex is unhit."""
        if self.hits is None:
            raise ValueError("hit times were not kept")
        if r2 > self.r:
            raise ValueError("radius exceeds the recorded ball")
        h = np.concatenate([self.hits[j] for j in range(r2 + 1)], axis=1)
        out = h.max(axis=1)
        out[(h < 0).any(axis=1)] = -1
        return out

    def record(self, i: int) -> "HittingRecord":
        hits = None if self.hits is None else [h[i] for h in self.hits]
        ct = int(self.cover_time[i])
        return HittingRecord(
            horizon=self.horizon,
            cover_time=None if ct < 0 else ct,
            censored=bool(self.censored[i]),
            extinct=bool(self.extinct[i]),
            approximate=bool(self.approximate[i]),
            end_time=int(self.end_time[i]),
            hits=hits,
            d=None,
        )


@dataclass
class HittingRecord:
    horizon: int
    cover_time: int | None
    censored: bool
    extinct: bool
    approximate: bool
    end_time: int
    hits: list | None = None
    d: int | None = None

    def H(self, x: VertexId, d: int) -> int | None:
        """First visit time of ``x``; None if not visited by the end of the run."""
        if self.hits is None:
            raise ValueError("hit times were not kept")
        j, i = Levels(d, x.depth).index_of(x)
        h = int(self.hits[j][i])
        return None if h < 0 else h

    def unhit(self, d: int) -> list[VertexId]:
        lv = Levels(d, len(self.hits) - 1)
        return [lv.vertex_at(j, int(i)) for j, h in enumerate(self.hits) for i in np.nonzero(h < 0)[0]]


def block_depth(r: int, lump: int | None) -> int | None:
    """Depth of the collapsible block roots, or None when blocks are off."""
    if lump is None or lump <= 0 or r - lump < 1:
        return None
    return r - lump


def estimate_bytes(r: int, horizon: int, d: int, reps: int, dense_depth: int | None = None) -> int:
    """Rough peak memory of one block of ``reps`` replicas."""
    R = r if dense_depth is None else dense_depth
    deep = max(0, min(horizon - R, (horizon - r) // 2 + 2))
    cells = ball_size(d, R) + shell_size(d, R) * (deep + 1)
    return int(reps * (8 * 3 * cells + 4 * ball_size(d, min(r, R))))


def simulate_block(
    r: int,
    horizon: int,
    dist: OffspringDist,
    d: int,
    rng,
    reps: int = 1,
    *,
    prune: bool = True,
    dense_depth: int | None = None,
    lump: int | None = 4,
    radii: Sequence[int] = (),
    k_max: int = 0,
    t_min: int = 0,
    keep_hits: bool = False,
    trace: bool = False,
    strict: bool = False,
    budget: int = DEFAULT_BUDGET,
    n0: int = 1,
) -> CoverBatch:
    """Run ``reps`` replicas of the BRW from ``n0`` particles at the root.

    A replica stops once ``B(r)`` is covered and ``t >= t_min``, when the
    process dies out, or at ``horizon`` (censored). ``dense_depth`` larger
    than ``r`` keeps exact per-vertex counts deeper (used with
    ``prune=False`` for the full unpruned process). ``radii``/``k_max`` turn
    on census accounting, which disables block lumping.
    """
    rng = as_generator(rng)
    if r < 0:
        raise ValueError("r must be nonnegative")
    if d < 2:
        raise ValueError("d must be at least 2")
    R = r if dense_depth is None else dense_depth
    if R < r:
        raise ValueError("dense depth must be at least r")
    if prune and R > r:
        raise ValueError("deeper dense levels are only supported without pruning")
    census = bool(radii) and k_max > 0
    if census:
        if max(radii) > r:
            raise CensusRangeError("census radius exceeds r")
        if horizon < max(radii) + 2 * k_max:
            raise CensusRangeError("horizon too short for the requested k_max")
        lump = None
    q = block_depth(r, lump) if (prune and R == r) else None
    need = estimate_bytes(r, horizon, d, reps, R)
    if need > budget:
        raise MemoryBudgetError(need, budget)

    fld = ParticleField.initial(d, R, reps, q, n0)
    rows = np.arange(reps)
    H = [np.full((reps, shell_size(d, j)), -1, dtype=np.int32) for j in range(r + 1)]
    H[0][:] = 0
    unhit = np.full(reps, ball_size(d, r) - 1, dtype=np.int64)
    block_unhit = None
    if q is not None:
        per_block = sum((d - 1) ** i for i in range(r - q + 1))
        block_unhit = np.full((reps, shell_size(d, q)), per_block, dtype=np.int64)

    res_cover = np.full(reps, -1, dtype=np.int64)
    res_cens = np.zeros(reps, dtype=bool)
    res_ext = np.zeros(reps, dtype=bool)
    res_apx = np.zeros(reps, dtype=bool)
    res_end = np.zeros(reps, dtype=np.int64)
    res_hits = [np.full_like(h, -1) for h in H] if (keep_hits or census) else None
    acc = CensusAccumulator(d, radii, k_max, reps) if census else None
    tr = _Trace(reps, horizon) if trace else None
    res_F = None
    if census:
        res_F = {key: np.zeros((reps, shell_size(d, key[1])), dtype=np.float64) for key in acc.acc}
    cover = np.full(reps, -1, dtype=np.int64)
    if r == 0:
        cover[:] = 0

    def finish(mask: np.ndarray, t: int, censored: np.ndarray, extinct: np.ndarray) -> None:
        ids = rows[mask]
        res_cover[ids] = np.where(cover[mask] >= 0, cover[mask], -1)
        res_cens[ids] = censored[mask]
        res_ext[ids] = extinct[mask]
        res_apx[ids] = fld.approximate[mask]
        res_end[ids] = t
        if res_hits is not None:
            for j, h in enumerate(H):
                res_hits[j][ids] = h[mask]
        if census:
            for key in acc.acc:
                res_F[key][ids] = acc.F(*key)[mask]

    t = 0
    while True:
        alive = fld.totals() > 0
        done = (unhit == 0) & (t >= t_min)
        ext = ~alive & ~done
        cens = (t >= horizon) & ~done & ~ext
        stop = done | ext | cens
        if stop.any():
            finish(stop, t, cens, ext)
            keep = np.nonzero(~stop)[0]
            rows, fld = rows[keep], fld.take(keep)
            H = [h[keep] for h in H]
            unhit, cover = unhit[keep], cover[keep]
            if block_unhit is not None:
                block_unhit = block_unhit[keep]
            if acc is not None:
                acc.take(keep)
            if tr is not None:
                tr.rows = rows
        if rows.size == 0:
            break
        fld = step(fld, r, horizon, dist, d, rng, prune, strict, _Chain(acc, tr))
        t = fld.t
        for j in range(t % 2, r + 1, 2):
            newly = (H[j] < 0) & (fld.levels[j] > 0)
            if not newly.any():
                continue
            H[j][newly] = t
            unhit -= newly.sum(axis=1)
            if block_unhit is not None and j >= q:
                block_unhit -= aggregate_up(newly.astype(np.int64), d, j, q)
        cover[(unhit == 0) & (cover < 0)] = t
        if block_unhit is not None:
            _collapse(fld, block_unhit == 0, r, d)

    return CoverBatch(
        r, horizon, res_cover, res_cens, res_ext, res_apx, res_end,
        res_hits if keep_hits or census else None,
        None if tr is None else tr.totals,
        res_F, tuple(sorted(set(radii))), k_max,
    )


def _collapse(fld: ParticleField, full: np.ndarray, r: int, d: int) -> None:
    """Turn fully visited blocks into per-depth counts (in place)."""
    newly = full & ~fld.covered
    if not newly.any():
        return
    q = fld.q
    b, w = np.nonzero(newly)
    h = r - q
    Lo = fld.outer.shape[2]
    need = h + 1 + Lo
    if fld.lumps.shape[2] < need:
        pad = np.zeros(fld.lumps.shape[:2] + (need - fld.lumps.shape[2],), dtype=fld.lumps.dtype)
        fld.lumps = np.concatenate([fld.lumps, pad], axis=2)
    nq = fld.covered.shape[1]
    for j in range(q, r + 1):
        lv = fld.levels[j].reshape(fld.B, nq, -1)
        fld.lumps[b, w, j - q] += lv[b, w].sum(axis=-1)
        lv[b, w] = 0
    if Lo:
        ov = np.ascontiguousarray(fld.outer).reshape(fld.B, nq, -1, Lo)
        fld.lumps[b, w, h + 1 : h + 1 + Lo] += ov[b, w].sum(axis=1)
        ov[b, w] = 0
        fld.outer = ov.reshape(fld.B, -1, Lo)
    fld.covered[b, w] = True


def run_cover(
    r: int,
    horizon_slack: int,
    dist: OffspringDist,
    d: int,
    seed,
    *,
    keep_hits: bool = True,
    strict: bool = False,
    budget: int = DEFAULT_BUDGET,
    lump: int | None = 4,
) -> HittingRecord:
    """One replica from a single particle at the root; ``seed`` is an int or a Generator."""
    batch = simulate_block(
        r, r + horizon_slack, dist, d, seed, 1, keep_hits=keep_hits, strict=strict, budget=budget, lump=lump
    )
    rec = batch.record(0)
    rec.d = d
    return rec


# -- census -------------------------------------------------------------------


@dataclass
class CensusBatch:
    """Boundary records for ``rho`` in ``radii`` and ``k = 1..k_max``.

    ``H[rho]`` is (B, shell) with -1 for vertices not visited by the end of
    the run (which is never before ``rho + 2 k_max``). ``Y0[(k, rho)]`` flags
    ``Y^(k)_z = 0``; ``F[(k, rho)]`` is exact where ``Y0`` holds and NaN
    elsewhere.
    """

    r: int
    k_max: int
    radii: tuple
    H: dict
    Y0: dict
    F: dict
    cover: CoverBatch

    def min_away(self, rho: int) -> np.ndarray:
        """Away steps (w.r.t. z) of the first particle at ``z``; -1 if unvisited."""
        h = self.H[rho]
        return np.where(h >= 0, (h - rho) // 2, -1)

    def slow(self, k: int, rho: int, threshold: float = math.inf) -> np.ndarray:
        """(B, shell) flags of k-slow boundary vertices: ``Y = 0`` and ``F <= threshold``."""
        y0 = self.Y0[(k, rho)]
        if k == 0:
            return y0
        return y0 & (np.nan_to_num(self.F[(k, rho)], nan=np.inf) <= threshold)

    def any_slow(self, k: int, rho: int, threshold: float = math.inf) -> np.ndarray:
        return self.slow(k, rho, threshold).any(axis=1)


def census_block(
    r: int,
    k_max: int,
    dist: OffspringDist,
    d: int,
    rng,
    reps: int = 1,
    radii: Sequence[int] | None = None,
    horizon_slack: int = DEFAULT_SLACK,
    r_max: int = R_CENSUS_MAX,
    strict: bool = False,
) -> CensusBatch:
    """Census of the boundary shells of ``B(rho)`` for ``rho`` in ``radii`` (default ``[r]``)."""
    if r > r_max:
        raise CensusRangeError(f"census is limited to r <= {r_max}")
    if k_max < 0:
        raise ValueError("k_max must be nonnegative")
    radii = tuple(sorted(set(radii or [r])))
    if min(radii) < 0 or max(radii) > r:
        raise CensusRangeError("census radii must lie in [0, r]")
    horizon = r + max(horizon_slack, 2 * k_max)
    t_min = max(radii) + 2 * k_max
    if k_max == 0:
        cb = simulate_block(r, horizon, dist, d, rng, reps, keep_hits=True, t_min=t_min, lump=None, strict=strict)
    else:
        cb = simulate_block(
            r, horizon, dist, d, rng, reps, radii=radii, k_max=k_max, t_min=t_min, keep_hits=True, strict=strict
        )
    Hs = {rho: cb.hits[rho] for rho in radii}
    Y0, F = {}, {}
    for rho in radii:
        h = Hs[rho]
        for k in range(0, k_max + 1):
            y0 = (h < 0) | (h >= rho + 2 * k)
            Y0[(k, rho)] = y0
            if k >= 1:
                F[(k, rho)] = np.where(y0, cb.F[(k, rho)], np.nan)
    return CensusBatch(r, k_max, radii, Hs, Y0, F, cb)


def census(r: int, k_max: int, dist: OffspringDist, d: int, seed, radii=None) -> CensusBatch:
    """Single-replica census; ``seed`` is an int or a Generator."""
    return census_block(r, k_max, dist, d, seed, 1, radii)


# -- projected hitting time ---------------------------------------------------


def hitting_single_block(L: int, k_band: int, dist: OffspringDist, d: int, rng, reps: int = 1) -> np.ndarray:
    """First visit times of a vertex at distance ``L`` from the start; -1 if censored.

    Only particles whose number of steps away from the target stays at most
    ``k_band`` are followed. A particle that reaches the target at time
    ``t`` has made exactly ``(t - L) / 2`` away steps, so the result is exact
    on ``{H <= L + 2 k_band}`` and censored otherwise.
    """
    if L < 1:
        raise ValueError("L must be at least 1")
    if k_band < 0:
        raise ValueError("k_band must be nonnegative")
    rng = as_generator(rng)
    M = L + k_band + 2
    counts = np.zeros((reps, k_band + 1, M), dtype=np.int64)
    counts[:, 0, L] = 1
    out = np.full(reps, -1, dtype=np.int64)
    rows = np.arange(reps)
    for t in range(1, L + 2 * k_band + 1):
        K, _ = sample_sum(dist, counts, rng, strict=True)
        toward = rng.binomial(K, 1.0 / d)
        away = K - toward
        new = np.zeros_like(counts)
        new[:, :, :-1] += toward[:, :, 1:]
        new[:, 1:, 2:] += away[:, :-1, 1:-1]
        hit = new[:, :, 0].sum(axis=1) > 0
        new[:, :, 0] = 0
        out[rows[hit]] = t
        live = ~hit & (new.reshape(len(rows), -1).sum(axis=1) > 0)
        rows, counts = rows[live], new[live]
        if rows.size == 0:
            break
    return out


def run_hitting_single(L: int, k_band: int, dist: OffspringDist, d: int, seed) -> int | None:
    h = int(hitting_single_block(L, k_band, dist, d, seed, 1)[0])
    return None if h < 0 else h
