"""Shared builders for randomized test instances.

Dense oracles in the tests never go through the sparse code paths they
check: dense matrices come straight from entry dictionaries, eigenvalues
and solves from numpy.linalg.
"""

from __future__ import annotations

import numpy as np
import pytest

from sdnfilt.filters import GraphFilter
from sdnfilt.graphs import Graph, ball


def random_connected_graph(rng: np.random.Generator, n: int) -> Graph:
    """Random tree plus a few extra edges; always connected."""
    edges = set()
    for v in range(1, n):
        u = int(rng.integers(0, v))
        edges.add((u, v))
    extra = int(rng.integers(0, max(1, n // 2)))
    for _ in range(extra):
        u = int(rng.integers(0, n))
        v = int(rng.integers(0, n))
        if u != v:
            edges.add((min(u, v), max(u, v)))
    return Graph.from_edges(n, sorted(edges))


def random_filter(
    rng: np.random.Generator,
    g: Graph,
    width: int,
    symmetric: bool = False,
    keep_prob: float = 0.7,
) -> GraphFilter:
    """Random entries uniform on [-1, 1] over a random subset of vertex
    pairs within `width` hops. Diagonal entries always kept so rows are
    never empty."""
    entries = {}
    for i in range(g.n):
        for j in ball(g, i, width).members:
            if symmetric and j < i:
                continue
            if i != j and rng.random() > keep_prob:
                continue
            v = float(rng.uniform(-1.0, 1.0))
            entries[(i, j)] = v
            if symmetric:
                entries[(j, i)] = v
    return GraphFilter.from_entries(g, entries)


def dense_of(h: GraphFilter) -> np.ndarray:
    """Dense oracle reconstruction, independent of the CSR algebra paths."""
    n = h.graph.n
    out = np.zeros((n, n))
    for i, j, v in h.entries():
        out[i, j] = v
    return out


def make_invertible(rng: np.random.Generator, g: Graph, width: int,
                    margin: float = 0.5, symmetric: bool = False) -> GraphFilter:
    """Random filter made strictly diagonally dominant by an identity shift."""
    h = random_filter(rng, g, width, symmetric=symmetric)
    shift = float(np.abs(dense_of(h)).sum(axis=1).max()) + margin
    return h + GraphFilter.identity(g).scaled(shift)


def make_spd(rng: np.random.Generator, g: Graph, width: int,
             margin: float = 0.3) -> GraphFilter:
    """Random symmetric filter shifted to be positive definite."""
    h = random_filter(rng, g, width, symmetric=True)
    lam_min = float(np.linalg.eigvalsh(dense_of(h)).min())
    return h + GraphFilter.identity(g).scaled(abs(lam_min) + margin)


def make_well_conditioned_spd(rng: np.random.Generator, g: Graph,
                              width: int = 1, spread: float = 0.25) -> GraphFilter:
    """I plus a small symmetric perturbation: positive definite with
    condition number at most (1+spread)/(1-spread), and a row structure
    tight enough that every iteration method contracts quickly."""
    h = random_filter(rng, g, width, symmetric=True)
    s = float(np.abs(dense_of(h)).sum(axis=1).max())
    return GraphFilter.identity(g) + h.scaled(spread / s)


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
