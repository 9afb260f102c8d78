"""Graphs the averaging process runs on.

Finite graphs are immutable :class:`Graph` objects with a canonical edge
order, so a seeded run is reproducible edge-for-edge. The infinite lattices
``Z`` and ``Z^2`` are represented by :class:`Lattice`; they have no edge list
and are only simulated support-locally by the fragmentation module.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import ConstructionError, ParameterError

GRAPH_KINDS = (
    "cycle",
    "path",
    "torus",
    "complete",
    "lattice_window_1d",
    "lattice_window_2d",
)
LATTICE_KINDS = ("lattice_1d", "lattice_2d")


def _frozen(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Graph:
    """Undirected simple connected graph with indexed vertices and edges.

    ``edges[i] = (u, v)`` is edge ``i``. Adjacency is stored in CSR form
    (``indptr``, ``nbr``, ``nbr_edge``); :attr:`adjacency` gives the
    per-vertex ``(neighbor, edge_index)`` lists.
    """

    vertex_count: int
    edges: np.ndarray
    kind: str
    shape: tuple = ()
    indptr: np.ndarray = field(init=False, repr=False)
    nbr: np.ndarray = field(init=False, repr=False)
    nbr_edge: np.ndarray = field(init=False, repr=False)
    eu: np.ndarray = field(init=False, repr=False)
    ev: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        n = self.vertex_count
        edges = np.ascontiguousarray(self.edges, dtype=np.int64).reshape(-1, 2)
        if n < 1:
            raise ConstructionError("vertex_count must be positive")
        if edges.size and (edges.min() < 0 or edges.max() >= n):
            raise ConstructionError("edge endpoint out of range")
        if np.any(edges[:, 0] == edges[:, 1]):
            raise ConstructionError("self-loops are not allowed")
        keys = np.minimum(edges[:, 0], edges[:, 1]) * n + np.maximum(edges[:, 0], edges[:, 1])
        if np.unique(keys).size != keys.size:
            raise ConstructionError("parallel edges are not allowed")

        m = edges.shape[0]
        ends = np.concatenate([edges[:, 0], edges[:, 1]])
        other = np.concatenate([edges[:, 1], edges[:, 0]])
        eidx = np.concatenate([np.arange(m), np.arange(m)])
        order = np.lexsort((eidx, ends))
        indptr = np.zeros(n + 1, dtype=np.int64)
        np.cumsum(np.bincount(ends, minlength=n), out=indptr[1:])
        object.__setattr__(self, "edges", _frozen(edges))
        object.__setattr__(self, "indptr", _frozen(indptr))
        object.__setattr__(self, "nbr", _frozen(np.ascontiguousarray(other[order])))
        object.__setattr__(self, "nbr_edge", _frozen(np.ascontiguousarray(eidx[order])))
        # contiguous endpoint columns for the compiled kernels
        object.__setattr__(self, "eu", _frozen(np.ascontiguousarray(edges[:, 0])))
        object.__setattr__(self, "ev", _frozen(np.ascontiguousarray(edges[:, 1])))
        if not self._connected():
            raise ConstructionError("graph must be connected")

    def _connected(self) -> bool:
        seen = np.zeros(self.vertex_count, dtype=bool)
        seen[0] = True
        stack = [0]
        while stack:
            u = stack.pop()
            for w in self.nbr[self.indptr[u]:self.indptr[u + 1]]:
                if not seen[w]:
                    seen[w] = True
                    stack.append(int(w))
        return bool(seen.all())

    @property
    def edge_count(self) -> int:
        return int(self.edges.shape[0])

    @property
    def n(self) -> int:
        return self.vertex_count

    @property
    def degrees(self) -> np.ndarray:
        return np.diff(self.indptr)

    def degree(self, v: int) -> int:
        return int(self.indptr[v + 1] - self.indptr[v])

    def neighbors(self, v: int) -> np.ndarray:
        return self.nbr[self.indptr[v]:self.indptr[v + 1]]

    @property
    def adjacency(self) -> list[list[tuple[int, int]]]:
        return [
            [(int(w), int(e)) for w, e in zip(self.neighbors(v), self.nbr_edge[self.indptr[v]:self.indptr[v + 1]])]
            for v in range(self.vertex_count)
        ]

    def distances_from(self, center: int, cutoff: float = np.inf) -> np.ndarray:
        """BFS distances from ``center``; vertices at distance >= cutoff stay -1."""
        dist = np.full(self.vertex_count, -1, dtype=np.int64)
        dist[center] = 0
        queue = deque([center])
        while queue:
            u = queue.popleft()
            du = dist[u] + 1
            if du >= cutoff:
                continue
            for w in self.neighbors(u):
                if dist[w] < 0:
                    dist[w] = du
                    queue.append(int(w))
        return dist

    def column_of(self, v) -> np.ndarray:
        """Horizontal position used by the stripes pattern."""
        v = np.asarray(v)
        if self.kind in ("torus", "lattice_window_2d"):
            return v % self.shape[0]
        return v


@dataclass(frozen=True)
class Lattice:
    """The infinite lattice Z (dim=1) or Z^2 (dim=2). Vertices are coordinates."""

    dim: int

    def __post_init__(self):
        if self.dim not in (1, 2):
            raise ConstructionError("dim must be 1 or 2")

    @property
    def kind(self) -> str:
        return LATTICE_KINDS[self.dim - 1]

    @property
    def vertex_count(self) -> float:
        return np.inf

    def degree(self, v=None) -> int:
        return 2 * self.dim

    def neighbors(self, v):
        if self.dim == 1:
            return (v - 1, v + 1)
        x, y = v
        return ((x - 1, y), (x + 1, y), (x, y - 1), (x, y + 1))

    def origin(self):
        return 0 if self.dim == 1 else (0, 0)

    def distance(self, coords, center) -> np.ndarray:
        """Graph (L1) distance from ``center`` to each coordinate."""
        coords = np.asarray(coords)
        if self.dim == 1:
            return np.abs(coords - center)
        c = np.asarray(center)
        return np.abs(coords - c).sum(axis=-1)


@dataclass(frozen=True)
class VertexSet:
    """Sorted, duplicate-free vertex indices (or Z coordinates)."""

    vertices: tuple

    def __post_init__(self):
        v = tuple(int(x) for x in self.vertices)
        if any(b <= a for a, b in zip(v, v[1:])):
            raise ParameterError("vertex set must be strictly increasing")
        object.__setattr__(self, "vertices", v)

    def __len__(self):
        return len(self.vertices)

    def __iter__(self):
        return iter(self.vertices)

    def __contains__(self, v):
        return int(v) in set(self.vertices)

    def as_array(self) -> np.ndarray:
        return np.asarray(self.vertices, dtype=np.int64)


def cycle(n: int) -> Graph:
    if n < 3:
        raise ConstructionError("cycle requires n ≥ 3")
    i = np.arange(n)
    return Graph(n, np.column_stack([i, (i + 1) % n]), "cycle", (n,))


def path(n: int) -> Graph:
    if n < 2:
        raise ConstructionError("path requires n ≥ 2")
    i = np.arange(n - 1)
    return Graph(n, np.column_stack([i, i + 1]), "path", (n,))


def torus(w: int, h: int) -> Graph:
    """w columns by h rows, vertex (x, y) at index y*w + x."""
    if w < 3:
        raise ConstructionError("torus requires w ≥ 3")
    if h < 3:
        raise ConstructionError("torus requires h ≥ 3")
    idx = np.arange(w * h)
    x, y = idx % w, idx // w
    right = y * w + (x + 1) % w
    down = ((y + 1) % h) * w + x
    edges = np.stack([np.column_stack([idx, right]), np.column_stack([idx, down])], axis=1).reshape(-1, 2)
    return Graph(w * h, edges, "torus", (w, h))


def complete(n: int) -> Graph:
    if n < 2:
        raise ConstructionError("complete requires n ≥ 2")
    u, v = np.triu_indices(n, k=1)
    return Graph(n, np.column_stack([u, v]), "complete", (n,))


def lattice_window_1d(radius: int) -> Graph:
    """Path on coordinates -radius..radius; coordinate z has index z + radius."""
    if radius < 1:
        raise ConstructionError("lattice_window_1d requires radius ≥ 1")
    g = path(2 * radius + 1)
    return Graph(g.vertex_count, g.edges, "lattice_window_1d", (2 * radius + 1,))


def lattice_window_2d(radius: int) -> Graph:
    """Grid on [-radius, radius]^2, row-major, free boundary."""
    if radius < 1:
        raise ConstructionError("lattice_window_2d requires radius ≥ 1")
    s = 2 * radius + 1
    idx = np.arange(s * s)
    x, y = idx % s, idx // s
    right = np.column_stack([idx[x < s - 1], idx[x < s - 1] + 1])
    down = np.column_stack([idx[y < s - 1], idx[y < s - 1] + s])
    edges = np.concatenate([right, down])
    edges = edges[np.lexsort((edges[:, 1], edges[:, 0]))]
    return Graph(s * s, edges, "lattice_window_2d", (s, s))


def build_graph(kind: str, n: int | None = None, w: int | None = None, h: int | None = None,
                radius: int | None = None) -> Graph | Lattice:
    """Build a graph (or infinite lattice) from its config description."""

    def need(name, value):
        if value is None:
            raise ConstructionError(f"{kind} requires parameter {name}")
        return int(value)

    if kind == "cycle":
        return cycle(need("n", n))
    if kind == "path":
        return path(need("n", n))
    if kind == "complete":
        return complete(need("n", n))
    if kind == "torus":
        return torus(need("w", w), need("h", h))
    if kind == "lattice_window_1d":
        return lattice_window_1d(need("radius", radius))
    if kind == "lattice_window_2d":
        return lattice_window_2d(need("radius", radius))
    if kind == "lattice_1d":
        return Lattice(1)
    if kind == "lattice_2d":
        return Lattice(2)
    raise ConstructionError(f"unknown graph kind {kind!r}")


def ball(g: Graph | Lattice, center, radius: float) -> VertexSet:
    """Vertices at graph distance strictly less than ``radius`` from ``center``.

    On Z the result is a set of coordinates. On a finite cycle whose diameter
    is below the radius the ball is simply the whole cycle.
    """
    if radius < 0:
        raise ParameterError("radius must be nonnegative")
    if isinstance(g, Lattice):
        if g.dim != 1:
            raise ParameterError("ball on Z^2 is not enumerated; use Lattice.distance")
        k = int(np.ceil(radius)) - 1
        return VertexSet(tuple(range(center - k, center + k + 1)) if k >= 0 else ())
    if not 0 <= center < g.vertex_count:
        raise ParameterError(f"center {center} out of range")
    if radius == 0:
        return VertexSet(())
    dist = g.distances_from(center, cutoff=radius)
    return VertexSet(tuple(np.flatnonzero(dist >= 0)))


def in_ball(g: Graph | Lattice, coords: Sequence | np.ndarray, center, radius: float) -> np.ndarray:
    """Boolean mask: which of ``coords`` lie strictly within ``radius`` of ``center``."""
    if isinstance(g, Lattice):
        return g.distance(coords, center) < radius
    dist = g.distances_from(center, cutoff=radius)
    return dist[np.asarray(coords, dtype=np.int64)] >= 0
