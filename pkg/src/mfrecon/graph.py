"""Directed unweighted graphs without self-loops.

Vertices are numbered ``1..n`` at every public entry point. ``adjacency[i, j]``
is stored 0-based and is true when vertex ``i+1`` receives input from vertex
``j+1``, so the level set of ``q`` is the support of column ``q-1``.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from mfrecon.errors import InvalidLevelSetError, ParameterError


@dataclass(frozen=True, eq=False)
class Graph:
    """Dense boolean adjacency; ``A[i, j]`` means ``i`` receives from ``j``."""

    adjacency: np.ndarray
    directed: bool = True

    def __post_init__(self):
        a = np.asarray(self.adjacency)
        if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] < 1:
            raise ParameterError(f"adjacency must be a non-empty square matrix, got shape {a.shape}")
        if a.dtype != bool:
            if not np.isin(a, (0, 1)).all():
                raise ParameterError("adjacency entries must be 0 or 1")
            a = a.astype(bool)
        if a.diagonal().any():
            raise ParameterError("self-loops are not allowed")
        a = a.copy()
        a.setflags(write=False)
        object.__setattr__(self, "adjacency", a)

    @property
    def n(self) -> int:
        return self.adjacency.shape[0]

    @property
    def n_edges(self) -> int:
        """Number of directed edges (nonzero entries of the adjacency)."""
        return int(self.adjacency.sum())

    def out_degrees(self) -> np.ndarray:
        """Out-degree ``d_q`` of every vertex, in vertex order."""
        return self.adjacency.sum(axis=0)

    def __eq__(self, other):
        if not isinstance(other, Graph):
            return NotImplemented
        return np.array_equal(self.adjacency, other.adjacency)

    def __hash__(self):
        return hash(self.adjacency.tobytes())

    def __repr__(self):
        return f"Graph(n={self.n}, edges={self.n_edges}, directed={self.directed})"

    @classmethod
    def empty(cls, n: int) -> "Graph":
        return cls(np.zeros((n, n), dtype=bool), directed=False)

    @classmethod
    def complete(cls, n: int) -> "Graph":
        return cls(~np.eye(n, dtype=bool), directed=False)


def _check_probability(p: float) -> None:
    if not 0.0 <= p <= 1.0 or np.isnan(p):
        raise ParameterError(f"edge probability must lie in [0, 1], got {p}")


def generate_er(n: int, p: float, seed=None, directed: bool = False) -> Graph:
    """Sample an Erdős–Rényi graph G(n, p).

    The undirected model draws one uniform variate per unordered pair and keeps
    the pair when it falls below ``p``; the result is stored as a symmetric
    adjacency. With ``directed=True`` every ordered pair is drawn separately.

    Because edges are decided by thresholding a fixed uniform field, two calls
    with the same seed and ``p1 <= p2`` return nested graphs. The experiment
    sweeps rely on that coupling.
    """
    if n < 1:
        raise ParameterError(f"vertex count must be >= 1, got {n}")
    _check_probability(p)
    rng = np.random.default_rng(seed)
    u = rng.random((n, n))
    if directed:
        a = u < p
        np.fill_diagonal(a, False)
    else:
        upper = np.triu(u < p, k=1)
        a = upper | upper.T
    return Graph(a, directed=directed)


def _check_vertex(n: int, q: int) -> None:
    if not 1 <= q <= n:
        raise ParameterError(f"vertex {q} out of range 1..{n}")


def level_set(g: Graph, q: int) -> set[int]:
    """Vertices receiving an edge from ``q`` (1-based)."""
    _check_vertex(g.n, q)
    return {int(i) + 1 for i in np.flatnonzero(g.adjacency[:, q - 1])}


def level_sets(g: Graph) -> list[set[int]]:
    return [level_set(g, q) for q in range(1, g.n + 1)]


def max_out_degree(g: Graph) -> int:
    """Maximum out-degree Δ(G)."""
    return int(g.out_degrees().max())


def adjacency_from_level_sets(sets: Sequence[Iterable[int]], directed: bool = True) -> Graph:
    """Rebuild the graph whose column ``q`` has support ``sets[q-1]``."""
    n = len(sets)
    if n < 1:
        raise ParameterError("need at least one level set")
    a = np.zeros((n, n), dtype=bool)
    for q, members in enumerate(sets, start=1):
        for i in members:
            _check_vertex(n, i)
            if i == q:
                raise InvalidLevelSetError(f"level set of vertex {q} contains {q} (self-loop)")
            a[i - 1, q - 1] = True
    return Graph(a, directed=directed)


def write_graph(g: Graph, path) -> None:
    """Write the edge-list format: header ``n=<N> directed=<0|1>`` then ``i j`` lines.

    A line ``i j`` means ``A[i][j] = 1``. Undirected graphs list each pair once
    with ``i < j``.
    """
    a = g.adjacency
    if not g.directed:
        a = np.triu(a, k=1)
    rows, cols = np.nonzero(a)
    lines = [f"n={g.n} directed={int(g.directed)}"]
    lines.extend(f"{i + 1} {j + 1}" for i, j in zip(rows, cols))
    Path(path).write_text("\n".join(lines) + "\n")


def read_graph(path) -> Graph:
    text = Path(path).read_text().splitlines()
    if not text:
        raise ParameterError(f"{path}: empty graph file")
    fields = dict(tok.split("=", 1) for tok in text[0].split())
    try:
        n = int(fields["n"])
        directed = bool(int(fields["directed"]))
    except (KeyError, ValueError) as exc:
        raise ParameterError(f"{path}: bad header {text[0]!r}") from exc
    a = np.zeros((n, n), dtype=bool)
    for lineno, line in enumerate(text[1:], start=2):
        if not line.strip():
            continue
        i, j = (int(tok) for tok in line.split())
        _check_vertex(n, i)
        _check_vertex(n, j)
        a[i - 1, j - 1] = True
        if not directed:
            a[j - 1, i - 1] = True
    return Graph(a, directed=directed)
