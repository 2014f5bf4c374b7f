"""Undirected graph container, geodesic neighborhoods and graph generators.

Graphs are immutable after construction: vertex ids are 0..n-1, neighbor
lists are sorted ascending, and connectivity is verified up front so that
every geodesic distance is finite.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "Graph",
    "HopNeighborhood",
    "GenerationError",
    "geodesic_distance",
    "ball",
    "random_geometric_graph",
    "knn_graph",
]

RGG_MAX_ATTEMPTS = 64


class GenerationError(RuntimeError):
    """A randomized generator exhausted its retry budget, or a deterministic
    generator produced a disconnected graph."""


@dataclass(frozen=True, eq=False)
class Graph:
    """Connected, undirected, unweighted graph.

    Attributes
    ----------
    n : int
        Vertex count; vertices are 0..n-1.
    adjacency : tuple of tuples
        adjacency[i] lists the neighbors of i, sorted ascending.
    coordinates : ndarray of shape (n, 2), optional
        Planar positions in [0, 1]^2 when the graph was built from points.
    generator_seed : (int, int), optional
        (entropy, attempt) pair accepted by a retrying random generator.
    """

    n: int
    adjacency: tuple[tuple[int, ...], ...]
    coordinates: np.ndarray | None = None
    generator_seed: tuple[int, int] | None = None
    _ball_cache: dict = field(default_factory=dict, repr=False, compare=False)

    @classmethod
    def from_edges(
        cls,
        n: int,
        edges,
        coordinates: np.ndarray | None = None,
        generator_seed: tuple[int, int] | None = None,
    ) -> "Graph":
        """Build and validate a graph from an iterable of undirected edges."""
        if n < 1:
            raise ValueError(f"vertex count must be >= 1, got {n}")
        neighbor_sets: list[set[int]] = [set() for _ in range(n)]
        for i, j in edges:
            i, j = int(i), int(j)
            if not (0 <= i < n and 0 <= j < n):
                raise ValueError(f"edge ({i},{j}) out of range for n={n}")
            if i == j:
                raise ValueError(f"self-loop at vertex {i}")
            neighbor_sets[i].add(j)
            neighbor_sets[j].add(i)
        adjacency = tuple(tuple(sorted(s)) for s in neighbor_sets)
        if coordinates is not None:
            coordinates = np.asarray(coordinates, dtype=np.float64)
            if coordinates.shape != (n, 2):
                raise ValueError(
                    f"coordinates must have shape ({n}, 2), got {coordinates.shape}"
                )
            coordinates = coordinates.copy()
            coordinates.setflags(write=False)
        g = cls(n=n, adjacency=adjacency, coordinates=coordinates,
                generator_seed=generator_seed)
        if not g.is_connected():
            raise GenerationError("graph is not connected")
        return g

    def degree(self, i: int) -> int:
        return len(self.adjacency[i])

    def degrees(self) -> np.ndarray:
        return np.array([len(a) for a in self.adjacency], dtype=np.int64)

    def edges(self):
        """Yield undirected edges as (i, j) with i < j, sorted."""
        for i, nbrs in enumerate(self.adjacency):
            for j in nbrs:
                if i < j:
                    yield (i, j)

    def num_edges(self) -> int:
        return sum(len(a) for a in self.adjacency) // 2

    def is_connected(self) -> bool:
        if self.n == 0:
            return False
        seen = bytearray(self.n)
        seen[0] = 1
        frontier = [0]
        count = 1
        while frontier:
            nxt = []
            for u in frontier:
                for w in self.adjacency[u]:
                    if not seen[w]:
                        seen[w] = 1
                        count += 1
                        nxt.append(w)
            frontier = nxt
        return count == self.n

    def validate_vertex(self, i: int) -> int:
        i = int(i)
        if not 0 <= i < self.n:
            raise ValueError(f"vertex id {i} out of range for n={self.n}")
        return i


@dataclass(frozen=True)
class HopNeighborhood:
    """All vertices within `radius` hops of `center`, sorted ascending."""

    center: int
    radius: int
    members: tuple[int, ...]

    def __contains__(self, j: int) -> bool:
        # members are sorted; linear scan is fine at the sizes we use
        return j in self.members

    def __len__(self) -> int:
        return len(self.members)


def geodesic_distance(g: Graph, i: int, j: int) -> int:
    """Number of edges in a shortest path between i and j (0 iff i == j)."""
    i = g.validate_vertex(i)
    j = g.validate_vertex(j)
    if i == j:
        return 0
    seen = bytearray(g.n)
    seen[i] = 1
    frontier = [i]
    depth = 0
    while frontier:
        depth += 1
        nxt = []
        for u in frontier:
            for w in g.adjacency[u]:
                if not seen[w]:
                    if w == j:
                        return depth
                    seen[w] = 1
                    nxt.append(w)
        frontier = nxt
    raise GenerationError(f"vertices {i} and {j} are not connected")


def ball(g: Graph, i: int, s: int) -> HopNeighborhood:
    """Truncated-depth BFS: the s-hop neighborhood of vertex i."""
    i = g.validate_vertex(i)
    s = int(s)
    if s < 0:
        raise ValueError(f"hop radius must be >= 0, got {s}")
    cached = g._ball_cache.get((i, s))
    if cached is not None:
        return cached
    reached = {i}
    frontier = [i]
    for _ in range(s):
        nxt = []
        for u in frontier:
            for w in g.adjacency[u]:
                if w not in reached:
                    reached.add(w)
                    nxt.append(w)
        if not nxt:
            break
        frontier = nxt
    hood = HopNeighborhood(center=i, radius=s, members=tuple(sorted(reached)))
    g._ball_cache[(i, s)] = hood
    return hood


def random_geometric_graph(n: int, radius: float, rng_seed: int) -> Graph:
    """Random geometric graph on [0,1]^2 with the closed edge rule
    dist(i, j) <= radius.

    Points are drawn i.i.d. uniform; disconnected draws are retried with
    sub-seeds derived from (rng_seed, attempt) up to RGG_MAX_ATTEMPTS, and
    the accepted (rng_seed, attempt) pair is recorded on the graph.
    """
    if n < 2:
        raise ValueError(f"need at least 2 vertices, got {n}")
    if radius <= 0:
        raise ValueError(f"radius must be > 0, got {radius}")
    for attempt in range(RGG_MAX_ATTEMPTS):
        rng = np.random.default_rng(
            np.random.SeedSequence(entropy=rng_seed, spawn_key=(attempt,))
        )
        pts = rng.random((n, 2))
        diff = pts[:, None, :] - pts[None, :, :]
        dist2 = np.einsum("ijk,ijk->ij", diff, diff)
        ii, jj = np.nonzero(dist2 <= radius * radius)
        edges = [(int(a), int(b)) for a, b in zip(ii, jj) if a < b]
        try:
            return Graph.from_edges(
                n, edges, coordinates=pts, generator_seed=(int(rng_seed), attempt)
            )
        except GenerationError:
            continue
    raise GenerationError(
        f"no connected random geometric graph with n={n}, radius={radius} "
        f"after {RGG_MAX_ATTEMPTS} attempts (seed {rng_seed})"
    )


def knn_graph(points, k: int) -> Graph:
    """Symmetrized k-nearest-neighbor graph of planar points.

    The directed k-NN relation is symmetrized by union: an undirected edge
    exists when either endpoint lists the other among its k nearest by
    Euclidean distance. Distance ties are broken by lower vertex id.
    """
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise ValueError(f"points must have shape (m, 2), got {pts.shape}")
    m = pts.shape[0]
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    if k >= m:
        raise ValueError(f"k-NN graph needs at least k+1={k + 1} points, got {m}")
    diff = pts[:, None, :] - pts[None, :, :]
    dist2 = np.einsum("ijk,ijk->ij", diff, diff)
    np.fill_diagonal(dist2, np.inf)
    ids = np.arange(m)
    edges = set()
    for i in range(m):
        # lexsort: primary key distance, secondary key vertex id
        order = np.lexsort((ids, dist2[i]))
        for j in order[:k]:
            edges.add((min(i, int(j)), max(i, int(j))))
    try:
        return Graph.from_edges(m, sorted(edges), coordinates=pts)
    except GenerationError:
        raise GenerationError(
            f"k-NN graph with k={k} is not connected; increase k"
        ) from None
