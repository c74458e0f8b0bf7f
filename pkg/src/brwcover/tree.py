"""Geometry of the infinite d-regular tree.

A vertex is addressed by its label path from the root. The root has
children labelled ``0..d-1``; every other vertex has children labelled
``0..d-2`` (its remaining neighbour is the parent).

Simulations do not carry label paths around. They use the level layout of
:class:`Levels`, where the vertex at depth ``j`` with label path ``p`` gets a
dense index inside its shell such that the children of index ``i`` are the
contiguous block ``i*(d-1) .. i*(d-1)+d-2`` (the root's children are
``0..d-1``). Subtrees therefore occupy contiguous index ranges in every
deeper shell.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterator, Sequence

import numpy as np


class TreeError(ValueError):
    pass


@dataclass(frozen=True, order=True)
class VertexId:
    path: tuple[int, ...] = ()

    @property
    def depth(self) -> int:
        return len(self.path)

    @property
    def is_root(self) -> bool:
        return not self.path

    def parent(self) -> "VertexId":
        if self.is_root:
            raise TreeError("root has no parent")
        return VertexId(self.path[:-1])

    def child(self, label: int) -> "VertexId":
        return VertexId(self.path + (label,))

    def __str__(self) -> str:
        return "/" + "/".join(str(x) for x in self.path)

    @classmethod
    def parse(cls, text: str) -> "VertexId":
        text = text.strip()
        if not text.startswith("/"):
            raise TreeError(f"bad vertex string {text!r}")
        parts = [p for p in text.split("/") if p]
        return cls(tuple(int(p) for p in parts))


ROOT = VertexId()


def vertex(*labels: int) -> VertexId:
    return VertexId(tuple(labels))


def check_vertex(x: VertexId, d: int) -> None:
    for i, lab in enumerate(x.path):
        top = d if i == 0 else d - 1
        if not 0 <= lab < top:
            raise TreeError(f"label {lab} at position {i} invalid for d={d}")


def children(x: VertexId, d: int) -> list[VertexId]:
    n = d if x.is_root else d - 1
    return [x.child(c) for c in range(n)]


def neighbors(x: VertexId, d: int) -> list[VertexId]:
    """All ``d`` neighbours: the parent first (if any), then the children."""
    out = [] if x.is_root else [x.parent()]
    return out + children(x, d)


def lca_depth(x: VertexId, y: VertexId) -> int:
    n = 0
    for a, b in zip(x.path, y.path):
        if a != b:
            break
        n += 1
    return n


def distance(x: VertexId, y: VertexId) -> int:
    return x.depth + y.depth - 2 * lca_depth(x, y)


def in_subtree(y: VertexId, x: VertexId) -> bool:
    """True if every path from the root to ``y`` passes through ``x``."""
    return y.path[: x.depth] == x.path


def shell_size(d: int, r: float) -> int:
    """Number of vertices at distance ``floor(r)`` from the root."""
    r = math.floor(r)
    if r < 0:
        raise TreeError("negative radius")
    if r == 0:
        return 1
    if r > 4096:
        raise OverflowError(f"shell size for r={r} is not representable")
    return d * (d - 1) ** (r - 1)


def ball_size(d: int, r: float) -> int:
    return sum(shell_size(d, j) for j in range(math.floor(r) + 1))


def shell(d: int, r: float) -> Iterator[VertexId]:
    """Vertices of the sphere of radius ``floor(r)`` around the root."""
    return subtree_shell(ROOT, r, d)


def subtree_shell(x: VertexId, r: float, d: int) -> Iterator[VertexId]:
    """Vertices at distance ``floor(r)`` from ``x`` inside the subtree rooted at ``x``."""
    r = math.floor(r)
    if r < 0:
        raise TreeError("negative radius")
    frontier = [x]
    for _ in range(r):
        frontier = [c for v in frontier for c in children(v, d)]
    yield from frontier


def neighbor_toward(x: VertexId, y: VertexId) -> VertexId:
    """The unique neighbour of ``x`` one step closer to ``y``."""
    if x == y:
        raise TreeError("x and y coincide")
    k = lca_depth(x, y)
    if k < x.depth:
        return x.parent()
    return x.child(y.path[x.depth])


def is_away_step(src: VertexId, dst: VertexId, target: VertexId) -> bool:
    return distance(dst, target) > distance(src, target)


class Levels:
    """Dense level-indexed layout of the ball ``B(depth)``."""

    def __init__(self, d: int, depth: int) -> None:
        if d < 2:
            raise TreeError("d must be at least 2")
        self.d = d
        self.depth = depth
        self.sizes = [shell_size(d, j) for j in range(depth + 1)]
        self.offsets = np.concatenate([[0], np.cumsum(self.sizes)]).astype(np.int64)

    @property
    def total(self) -> int:
        return int(self.offsets[-1])

    def block(self, j: int, i: int, rho: int) -> tuple[int, int]:
        """Index range at depth ``rho`` of the subtree below vertex ``(j, i)``."""
        if rho < j:
            return (0, 0)
        if j == 0:
            return (0, self.sizes[rho])
        w = (self.d - 1) ** (rho - j)
        return (i * w, (i + 1) * w)

    def block_width(self, j: int, rho: int) -> int:
        """Width of a subtree block at depth ``rho`` for a vertex at depth ``j >= 1``."""
        return (self.d - 1) ** (rho - j)

    def ancestor_index(self, j: int, idx, anc_depth: int):
        """Index at depth ``anc_depth`` of the ancestor of vertices ``(j, idx)``."""
        if anc_depth == 0:
            return idx * 0
        return idx // (self.d - 1) ** (j - anc_depth)

    def index_of(self, x: VertexId) -> tuple[int, int]:
        """(depth, index) of a label path."""
        if x.is_root:
            return (0, 0)
        i = x.path[0]
        for lab in x.path[1:]:
            i = i * (self.d - 1) + lab
        return (x.depth, i)

    def vertex_at(self, j: int, i: int) -> VertexId:
        if j == 0:
            return ROOT
        labels = []
        for _ in range(j - 1):
            labels.append(i % (self.d - 1))
            i //= self.d - 1
        labels.append(i)
        return VertexId(tuple(reversed(labels)))

    def global_id(self, j: int, i):
        return self.offsets[j] + i

    def depth_of(self, g) -> np.ndarray:
        return np.searchsorted(self.offsets, np.asarray(g), side="right") - 1


def aggregate_up(arr: np.ndarray, d: int, from_depth: int, to_depth: int) -> np.ndarray:
    """Sum a level array (last axis) over subtrees, from ``from_depth`` to ``to_depth``."""
    if to_depth == from_depth:
        return arr
    if to_depth == 0:
        return arr.sum(axis=-1, keepdims=True)
    w = (d - 1) ** (from_depth - to_depth)
    return arr.reshape(arr.shape[:-1] + (-1, w)).sum(axis=-1)


def expand_down(arr: np.ndarray, d: int, from_depth: int, to_depth: int) -> np.ndarray:
    """Broadcast a level array to a deeper level (each vertex copied over its subtree)."""
    if to_depth == from_depth:
        return arr
    if from_depth == 0:
        size = shell_size(d, to_depth)
        return np.repeat(arr, size, axis=-1)
    w = (d - 1) ** (to_depth - from_depth)
    return np.repeat(arr, w, axis=-1)


def vertices_in_ball(d: int, r: int) -> list[VertexId]:
    out = []
    for j in range(r + 1):
        out.extend(shell(d, j))
    return out


def path_between(x: VertexId, y: VertexId) -> list[VertexId]:
    """Vertices on the geodesic from ``x`` to ``y`` inclusive."""
    out = [x]
    while out[-1] != y:
        out.append(neighbor_toward(out[-1], y))
    return out


def labels_valid(path: Sequence[int], d: int) -> bool:
    try:
        check_vertex(VertexId(tuple(path)), d)
    except TreeError:
        return False
    return True
