"""Per-particle branching random walk with full genealogy, for tiny scales.

Every particle of every generation is stored with its position and parent,
which makes brute-force replays possible: the (z, k)-freezing process of
any vertex ``z`` can be read off a realization by following each line of
descent. This is slow and memory hungry and exists to cross-check the
count-field census, which never sees individual particles.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .field import MoveRecorder
from .offspring import OffspringDist
from .rng import as_generator
from .tree import shell_size

#: Refuse realizations with more stored particles than this.
MAX_PARTICLES = 20_000_000


class GenealogyTooLarge(RuntimeError):
    pass


@dataclass
class Genealogy:
    """Generations ``0..T`` of a batch of replicas.

    ``depth[t]``, ``index[t]`` give the level-layout position of every
    particle alive at time ``t``; ``parent[t]`` points into generation
    ``t - 1``; ``rep[t]`` is the replica each particle belongs to.
    """

    d: int
    reps: int
    depth: list
    index: list
    parent: list
    rep: list

    @property
    def T(self) -> int:
        return len(self.depth) - 1

    def size(self) -> int:
        return sum(len(x) for x in self.depth)


def simulate_genealogy(
    dist: OffspringDist,
    d: int,
    T: int,
    rng,
    reps: int = 1,
    n0: int = 1,
    max_particles: int = MAX_PARTICLES,
) -> Genealogy:
    """Run ``T`` generations from ``n0`` particles at the root in each replica."""
    rng = as_generator(rng)
    depth = [np.zeros(reps * n0, dtype=np.int64)]
    index = [np.zeros(reps * n0, dtype=np.int64)]
    parent = [np.full(reps * n0, -1, dtype=np.int64)]
    rep = [np.repeat(np.arange(reps), n0)]
    total = reps * n0
    for _ in range(T):
        dp, ip, rp = depth[-1], index[-1], rep[-1]
        nc = dist.sample(len(dp), rng).astype(np.int64)
        par = np.repeat(np.arange(len(dp)), nc)
        total += len(par)
        if total > max_particles:
            raise GenealogyTooLarge(f"more than {max_particles} particles")
        slot = rng.integers(0, d, size=len(par))
        pd, pi = dp[par], ip[par]
        root = pd == 0
        up = ~root & (slot == 0)
        cd = np.where(up, pd - 1, pd + 1)
        lab = np.where(root, slot, slot - 1)
        ci = np.where(root, lab, np.where(up, pi // (d - 1), pi * (d - 1) + lab))
        ci = np.where(up & (pd == 1), 0, ci)
        depth.append(cd)
        index.append(ci)
        parent.append(par)
        rep.append(rp[par])
    return Genealogy(d, reps, depth, index, parent, rep)


def _ancestor(depth: np.ndarray, index: np.ndarray, lam: int, d: int) -> np.ndarray:
    if lam == 0:
        return np.zeros_like(index)
    return index // (d - 1) ** np.maximum(depth - lam, 0)


def distance_to(depth: np.ndarray, index: np.ndarray, zd: int, zi: int, d: int) -> np.ndarray:
    """Graph distance from level-layout positions to the vertex ``(zd, zi)``."""
    lca = np.zeros_like(depth)
    for lam in range(1, zd + 1):
        za = zi // (d - 1) ** (zd - lam)
        ok = (depth >= lam) & (_ancestor(depth, index, lam, d) == za)
        lca += ok
    return depth + zd - 2 * lca


def hit_times(g: Genealogy, r: int) -> list[np.ndarray]:
    """First visit times per depth ``0..r``, shape ``(reps, shell)``; -1 if never."""
    d = g.d
    out = [np.full((g.reps, shell_size(d, j)), -1, dtype=np.int64) for j in range(r + 1)]
    for t in range(g.T + 1):
        for j in range(t % 2, min(t, r) + 1, 2):
            m = g.depth[t] == j
            if not m.any():
                continue
            h = out[j]
            rr, ii = g.rep[t][m], g.index[t][m]
            fresh = h[rr, ii] < 0
            h[rr[fresh], ii[fresh]] = t
    return out


def feed_moves(g: Genealogy, R: int, recorder: MoveRecorder) -> None:
    """Send every generation's edge move counts to ``recorder`` in the field layout.

    Arrivals deeper than ``R`` are indexed by their depth-``R`` ancestor,
    as the field does below its boundary.
    """
    d, B = g.d, g.reps
    for t in range(1, g.T + 1):
        cd, ci, rp = g.depth[t], g.index[t], g.rep[t]
        pd, pi = g.depth[t - 1][g.parent[t]], g.index[t - 1][g.parent[t]]
        down = cd > pd
        for D in np.unique(cd[down]):
            m = down & (cd == D)
            lev = min(int(D), R)
            n = shell_size(d, lev)
            idx = _ancestor(cd[m], ci[m], lev, d) if D > R else ci[m]
            counts = np.bincount(rp[m] * n + idx, minlength=B * n).reshape(B, n)
            recorder.down(t, int(D), counts, lev)
        for j in np.unique(pd[~down]):
            if j > R:
                continue
            m = ~down & (pd == j)
            n = shell_size(d, int(j))
            counts = np.bincount(rp[m] * n + pi[m], minlength=B * n).reshape(B, n)
            recorder.up(t, int(j), counts)


def freeze_replay(g: Genealogy, zd: int, zi: int, k: int) -> tuple[np.ndarray, np.ndarray]:
    """``(Y^(k)_z, F^(k)_z)`` per replica by following every line of descent."""
    d, B = g.d, g.reps
    Y = np.zeros(B, dtype=np.int64)
    F = np.zeros(B, dtype=np.int64)
    at_z = (g.depth[0] == zd) & (g.index[0] == zi)
    np.add.at(Y, g.rep[0][at_z], 1)
    active = ~at_z
    away = np.zeros(len(g.depth[0]), dtype=np.int64)
    dist_prev = distance_to(g.depth[0], g.index[0], zd, zi, d)
    for t in range(1, g.T + 1):
        par = g.parent[t]
        pa = active[par]
        dist_now = distance_to(g.depth[t], g.index[t], zd, zi, d)
        a = away[par] + (dist_now > dist_prev[par])
        hit = pa & (dist_now == 0)
        froze = pa & ~hit & (a >= k)
        np.add.at(Y, g.rep[t][hit], 1)
        np.add.at(F, g.rep[t][froze], 1)
        active = pa & ~hit & ~froze
        away, dist_prev = a, dist_now
        if not active.any():
            break
    return Y, F


def replay_shell(g: Genealogy, rho: int, k: int) -> tuple[np.ndarray, np.ndarray]:
    """``(Y, F)`` of shape ``(reps, shell)`` for every ``z`` at depth ``rho``."""
    n = shell_size(g.d, rho)
    Y = np.zeros((g.reps, n), dtype=np.int64)
    F = np.zeros((g.reps, n), dtype=np.int64)
    for zi in range(n):
        Y[:, zi], F[:, zi] = freeze_replay(g, rho, zi, k)
    return Y, F
