"""(x, k)-freezing processes.

Every particle branches and its children step to uniform neighbours as in
the branching random walk, but a particle is frozen (no more moves or
children) once it reaches the target ``x`` or takes its ``k``-th step away
from ``x``. ``Y`` counts particles frozen at ``x``, ``F`` those frozen on an
away step and ``S`` every particle ever present.

Particles are aggregated per cell (vertex or projected distance, away-step
count); a cell's particles act independently, so drawing the total number of
children of a cell and splitting it multinomially over the ``d`` directions
is exact. All runs are vectorised over a leading replica axis.

On a tree a step changes the distance to ``x`` by exactly one, so a child
can never both step away and land on ``x``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .offspring import OffspringDist, binomial_split, sample_sum
from .tree import VertexId, distance, in_subtree, neighbors

#: Hard cap on the number of particles seen in one run.
EVENT_CAP = 10**9


class FreezeCapExceeded(RuntimeError):
    pass


class ChainError(ValueError):
    pass


@dataclass(frozen=True)
class FreezeOutcome:
    Y: int
    F: int
    S: int
    terminated: bool = True


@dataclass
class FrozenConfig:
    """Particles left frozen by an (x, k)-run.

    ``away`` maps each vertex to the number of particles frozen there on
    their ``k``-th away step; ``at_target`` counts those frozen at ``x``.
    """

    target: VertexId
    k: int
    away: dict[VertexId, int] = field(default_factory=dict)
    at_target: int = 0

    @property
    def size(self) -> int:
        return sum(self.away.values())


@dataclass
class FreezeBatch:
    """Per-replica outcomes of a vectorised freezing run."""

    Y: np.ndarray
    F: np.ndarray
    S: np.ndarray
    #: frozen-away counts per sink (columns follow ``sinks``)
    frozen: np.ndarray
    sinks: list
    #: total arrivals per transient cell, when recorded
    arrivals: np.ndarray | None = None
    cells: list = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.Y)

    def outcome(self, i: int) -> FreezeOutcome:
        return FreezeOutcome(int(self.Y[i]), int(self.F[i]), int(self.S[i]))

    def take(self, rows) -> "FreezeBatch":
        """Sub-batch of the selected replicas (boolean mask or indices)."""
        arr = None if self.arrivals is None else self.arrivals[rows]
        return FreezeBatch(self.Y[rows], self.F[rows], self.S[rows], self.frozen[rows], list(self.sinks), arr, list(self.cells))

    def frozen_config(self, i: int, target: VertexId, k: int) -> FrozenConfig:
        away = {pos: int(c) for pos, c in zip(self.sinks, self.frozen[i]) if c}
        return FrozenConfig(target, k, away, int(self.Y[i]))


def _split_uniform(K: np.ndarray, d: int, rng: np.random.Generator) -> np.ndarray:
    """Split counts uniformly over ``d`` directions; trailing axis of size ``d``."""
    if K.dtype.kind != "f":
        return rng.multinomial(K, np.full(d, 1.0 / d))
    out = np.empty(K.shape + (d,))
    rest = K
    for i in range(d - 1):
        out[..., i] = binomial_split(rest, 1.0 / (d - i), rng)
        rest = rest - out[..., i]
    out[..., d - 1] = rest
    return out


class TreeFreezeModel:
    """Finite cell graph of the (target, k)-freezing process on the d-regular tree.

    Cells are ``(vertex, away_steps)`` with ``away_steps < k``; sinks are the
    target and every vertex where a particle can take its ``k``-th away step.
    The potential ``distance - 2 * away_steps`` drops by one per move, so
    the cell graph is finite and acyclic.
    """

    def __init__(self, starts: Sequence[VertexId], target: VertexId, k: int, d: int):
        if k < 1:
            raise ValueError("k must be at least 1")
        self.target, self.k, self.d = target, k, d
        self.starts = list(starts)
        self.cells: list[tuple[VertexId, int]] = []
        index: dict[tuple[VertexId, int], int] = {}
        self.sinks: list[VertexId] = []
        sink_index: dict[VertexId, int] = {}
        edges: list[tuple[int, int, str, int]] = []  # (cell, direction, kind, dest)

        queue = []
        for v in self.starts:
            if v != target and (v, 0) not in index:
                index[(v, 0)] = len(self.cells)
                self.cells.append((v, 0))
                queue.append((v, 0))
        while queue:
            v, a = queue.pop()
            src = index[(v, a)]
            dv = distance(v, target)
            for slot, w in enumerate(neighbors(v, d)):
                if w == target:
                    edges.append((src, slot, "Y", 0))
                    continue
                away = distance(w, target) > dv
                na = a + 1 if away else a
                if na >= k:
                    if w not in sink_index:
                        sink_index[w] = len(self.sinks)
                        self.sinks.append(w)
                    edges.append((src, slot, "F", sink_index[w]))
                    continue
                if (w, na) not in index:
                    index[(w, na)] = len(self.cells)
                    self.cells.append((w, na))
                    queue.append((w, na))
                edges.append((src, slot, "C", index[(w, na)]))

        nc, ns = len(self.cells), len(self.sinks)
        # columns: cells, then Y, then sinks
        self.n_out = nc + 1 + ns
        route = np.zeros((nc * d, self.n_out))
        for src, slot, kind, dest in edges:
            col = dest if kind == "C" else (nc if kind == "Y" else nc + 1 + dest)
            route[src * d + slot, col] = 1.0
        self.route = route
        self.start_cells = [index.get((v, 0), -1) for v in self.starts]

    def run(
        self,
        init: np.ndarray,
        dist: OffspringDist,
        rng: np.random.Generator,
        record_arrivals: bool = False,
    ) -> FreezeBatch:
        """Run from ``init`` (replicas x len(starts)) initial counts."""
        init = np.asarray(init, dtype=np.int64)
        B = init.shape[0]
        nc, d = len(self.cells), self.d
        counts = np.zeros((B, nc), dtype=np.int64)
        Y = np.zeros(B, dtype=np.int64)
        for j, c in enumerate(self.start_cells):
            if c < 0:
                Y += init[:, j]
            else:
                counts[:, c] += init[:, j]
        S = init.sum(axis=1)
        frozen = np.zeros((B, len(self.sinks)), dtype=np.int64)
        arrivals = counts.copy() if record_arrivals else None
        while nc and counts.any():
            K, _ = sample_sum(dist, counts, rng)
            S = S + K.sum(axis=1)
            if np.any(S > EVENT_CAP):
                raise FreezeCapExceeded(f"more than {EVENT_CAP} particles in one run")
            moves = _split_uniform(K, d, rng).reshape(B, nc * d)
            if moves.max(initial=0) < 2**52:
                out = np.rint(moves.astype(float) @ self.route).astype(np.int64)
            else:
                out = np.zeros((B, self.n_out), dtype=np.int64)
                rows, cols = np.nonzero(self.route)
                for r_, c_ in zip(rows, cols):
                    out[:, c_] += moves[:, r_].astype(np.int64)
            counts = out[:, :nc]
            Y += out[:, nc]
            frozen += out[:, nc + 1 :]
            if arrivals is not None:
                arrivals += counts
        return FreezeBatch(Y, frozen.sum(axis=1), S, frozen, list(self.sinks), arrivals, list(self.cells))


def _starts(initial) -> tuple[list[VertexId], list[int]]:
    if isinstance(initial, Mapping):
        items = [(v, int(c)) for v, c in initial.items() if c]
    else:
        tally: dict[VertexId, int] = {}
        for v in initial:
            tally[v] = tally.get(v, 0) + 1
        items = list(tally.items())
    return [v for v, _ in items], [c for _, c in items]


def freeze_tree_batch(
    initial,
    target: VertexId,
    k: int,
    dist: OffspringDist,
    rng: np.random.Generator,
    reps: int,
    d: int | None = None,
    record_arrivals: bool = False,
) -> FreezeBatch:
    """``reps`` independent (target, k)-freezing runs from the same start."""
    d = int(dist.mean) if d is None else d
    starts, mult = _starts(initial)
    if not starts:
        raise ValueError("initial configuration is empty")
    model = TreeFreezeModel(starts, target, k, d)
    init = np.tile(np.array(mult, dtype=np.int64), (reps, 1))
    return model.run(init, dist, rng, record_arrivals)


def freeze_tree(
    initial,
    target: VertexId,
    k: int,
    dist: OffspringDist,
    rng: np.random.Generator,
    d: int | None = None,
) -> tuple[FreezeOutcome, FrozenConfig]:
    """One (target, k)-freezing run on the tree from a list (or tally) of start vertices."""
    batch = freeze_tree_batch(initial, target, k, dist, rng, 1, d)
    return batch.outcome(0), batch.frozen_config(0, target, k)


# -- projected (1-D) form -----------------------------------------------------


@dataclass
class Freeze1DBatch:
    Y: np.ndarray
    F: np.ndarray
    S: np.ndarray
    #: away-frozen counts by distance to the target
    frozen: np.ndarray

    def outcome(self, i: int) -> FreezeOutcome:
        return FreezeOutcome(int(self.Y[i]), int(self.F[i]), int(self.S[i]))


def freeze_1d_batch(
    L: int,
    k: int,
    n0: int,
    dist: OffspringDist,
    d: int,
    rng: np.random.Generator,
    reps: int,
) -> Freeze1DBatch:
    """The freezing process projected on (distance to target, away steps).

    From any vertex other than the target exactly one of the ``d`` neighbours
    is closer to it, so each child moves in with probability ``1/d`` and out
    otherwise. Cost scales with ``L * k`` cells, not with particle numbers.
    """
    if L < 0 or k < 1 or n0 < 1:
        raise ValueError("need L >= 0, k >= 1, n0 >= 1")
    M = L + k + 1
    Y = np.zeros(reps, dtype=np.int64)
    F = np.zeros(reps, dtype=np.int64)
    S = np.full(reps, n0, dtype=np.int64)
    frozen = np.zeros((reps, M + 1), dtype=np.int64)
    if L == 0:
        Y[:] = n0
        return Freeze1DBatch(Y, F, S, frozen)
    counts = np.zeros((reps, k, M), dtype=np.int64)
    counts[:, 0, L] = n0
    while counts.any():
        K, _ = sample_sum(dist, counts, rng)
        S += K.reshape(reps, -1).sum(axis=1)
        if np.any(S > EVENT_CAP):
            raise FreezeCapExceeded(f"more than {EVENT_CAP} particles in one run")
        toward = binomial_split(K, 1.0 / d, rng)
        away = K - toward
        new = np.zeros_like(counts)
        new[:, :, 1:-1] += toward[:, :, 2:]
        Y += toward[:, :, 1].sum(axis=1)
        new[:, 1:, 2:] += away[:, :-1, 1:-1]
        F += away[:, k - 1, :].sum(axis=1)
        frozen[:, 1:] += away[:, k - 1, :]
        counts = new
    return Freeze1DBatch(Y, F, S, frozen)


def freeze_1d(L: int, k: int, n0: int, dist: OffspringDist, d: int, rng: np.random.Generator) -> FreezeOutcome:
    return freeze_1d_batch(L, k, n0, dist, d, rng, 1).outcome(0)


# -- chaining -----------------------------------------------------------------


def _check_chain(frozen: FrozenConfig, new_target: VertexId) -> None:
    if frozen.at_target:
        raise ChainError("frozen configuration has particles at the old target")
    if not in_subtree(new_target, frozen.target):
        raise ChainError("new target is not in the subtree of the old target")


def freeze_chain(
    frozen: FrozenConfig,
    new_target: VertexId,
    dist: OffspringDist,
    rng: np.random.Generator,
    d: int | None = None,
) -> FreezeOutcome:
    """Continue an (x, k-1)-run with no particle at ``x`` as a (y, 1)-run.

    For ``y`` below ``x`` this has the law of the (y, k)-freezing process,
    because until a particle reaches ``x`` its steps toward/away from ``x``
    are steps toward/away from ``y``.
    """
    _check_chain(frozen, new_target)
    if frozen.size == 0:
        return FreezeOutcome(0, 0, 0)
    out, _ = freeze_tree(frozen.away, new_target, 1, dist, rng, d)
    return out


def freeze_chain_batch(
    first: FreezeBatch,
    new_target: VertexId,
    dist: OffspringDist,
    rng: np.random.Generator,
    d: int,
) -> FreezeBatch:
    """Vectorised :func:`freeze_chain` over the replicas of a first-stage batch.

    Replicas whose first stage put particles at the old target are not
    eligible; callers select them with ``first.Y == 0``.
    """
    if np.any(first.Y):
        raise ChainError("some replicas have particles at the old target")
    if not first.sinks:
        B = len(first)
        z = np.zeros(B, dtype=np.int64)
        return FreezeBatch(z, z.copy(), z.copy(), np.zeros((B, 0), dtype=np.int64), [])
    model = TreeFreezeModel(first.sinks, new_target, 1, d)
    out = model.run(first.frozen, dist, rng)
    # the chain's S counts particles from the frozen configuration onward
    return out
