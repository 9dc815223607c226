"""Communication topologies and doubly stochastic consensus matrices.

Graphs are undirected, simple and immutable. Random generators take an
explicit ``numpy.random.Generator``; nothing here touches global state.
"""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .exceptions import InvalidParam, NotConnected, NotDoublyStochastic

__all__ = [
    "Graph",
    "WeightMatrix",
    "gen_erdos_renyi",
    "gen_k_cycle",
    "gen_grid2d",
    "sample_time_varying",
    "laplacian_weights",
    "metropolis_weights",
    "second_singular",
    "parse_graph_spec",
]


@dataclass(frozen=True)
class Graph:
    """Undirected simple graph on nodes ``0 .. n-1``.

    Edges are stored as sorted ``(i, j)`` pairs with ``i < j``.
    """

    n: int
    edges: tuple[tuple[int, int], ...]

    def __post_init__(self):
        if self.n < 1:
            raise InvalidParam(f"graph needs at least one node, got n={self.n}")
        canon = set()
        for i, j in self.edges:
            i, j = int(i), int(j)
            if i == j:
                raise InvalidParam(f"self-loop at node {i}")
            if not (0 <= i < self.n and 0 <= j < self.n):
                raise InvalidParam(f"edge ({i}, {j}) out of range for n={self.n}")
            canon.add((min(i, j), max(i, j)))
        object.__setattr__(self, "edges", tuple(sorted(canon)))

    @classmethod
    def from_edges(cls, n, edges):
        return cls(int(n), tuple(edges))

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    def adjacency(self) -> np.ndarray:
        a = np.zeros((self.n, self.n))
        for i, j in self.edges:
            a[i, j] = a[j, i] = 1.0
        return a

    def degrees(self) -> np.ndarray:
        d = np.zeros(self.n, dtype=int)
        for i, j in self.edges:
            d[i] += 1
            d[j] += 1
        return d

    def neighbors(self) -> list[list[int]]:
        nbrs = [[] for _ in range(self.n)]
        for i, j in self.edges:
            nbrs[i].append(j)
            nbrs[j].append(i)
        return nbrs

    def is_connected(self) -> bool:
        nbrs = self.neighbors()
        seen = {0}
        queue = deque([0])
        while queue:
            u = queue.popleft()
            for w in nbrs[u]:
                if w not in seen:
                    seen.add(w)
                    queue.append(w)
        return len(seen) == self.n

    def to_edgelist(self) -> str:
        lines = [f"n {self.n}"]
        lines.extend(f"{i} {j}" for i, j in self.edges)
        return "\n".join(lines) + "\n"

    @classmethod
    def from_edgelist(cls, text: str) -> "Graph":
        rows = [ln.split() for ln in text.splitlines() if ln.strip() and not ln.startswith("#")]
        if not rows or rows[0][0] != "n" or len(rows[0]) != 2:
            raise InvalidParam("edge list must start with a 'n <count>' header")
        n = int(rows[0][1])
        return cls(n, tuple((int(a), int(b)) for a, b in rows[1:]))

    def save(self, path) -> None:
        Path(path).write_text(self.to_edgelist())

    @classmethod
    def load(cls, path) -> "Graph":
        return cls.from_edgelist(Path(path).read_text())


@dataclass(frozen=True)
class WeightMatrix:
    """Doubly stochastic consensus matrix with its cached averaging constant."""

    w: np.ndarray = field(repr=False)
    sigma: float

    def __post_init__(self):
        w = np.array(self.w, dtype=float)
        w.setflags(write=False)
        object.__setattr__(self, "w", w)

    @property
    def n(self) -> int:
        return self.w.shape[0]

    def to_csv(self, path) -> None:
        np.savetxt(path, self.w, delimiter=",", fmt="%.17g")

    @classmethod
    def from_csv(cls, path) -> "WeightMatrix":
        w = np.atleast_2d(np.loadtxt(path, delimiter=","))
        return cls(w, second_singular(w))


def gen_erdos_renyi(n: int, p: float, rng: np.random.Generator, max_retries: int = 100) -> Graph:
    """Connected G(n, p) sample; redraws up to ``max_retries`` times."""
    if n < 2:
        raise InvalidParam(f"need n >= 2, got {n}")
    if not 0.0 <= p <= 1.0:
        raise InvalidParam(f"p must lie in [0, 1], got {p}")
    if max_retries < 1:
        raise InvalidParam("max_retries must be positive")
    iu, ju = np.triu_indices(n, k=1)
    for _ in range(max_retries):
        keep = rng.random(iu.size) < p
        g = Graph(n, tuple(zip(iu[keep].tolist(), ju[keep].tolist())))
        if g.is_connected():
            return g
    raise NotConnected(f"no connected G({n}, {p}) sample in {max_retries} attempts")


def gen_k_cycle(n: int, k: int) -> Graph:
    """Ring where every node links to its ``k`` nearest nodes on each side."""
    if n < 3:
        raise InvalidParam(f"k-cycle needs n >= 3, got {n}")
    if k < 1:
        raise InvalidParam(f"k must be >= 1, got {k}")
    edges = set()
    for i in range(n):
        for d in range(1, k + 1):
            j = (i + d) % n
            if j != i:
                edges.add((min(i, j), max(i, j)))
    return Graph(n, tuple(edges))


def gen_grid2d(rows: int, cols: int) -> Graph:
    if rows < 1 or cols < 1 or rows * cols < 2:
        raise InvalidParam(f"grid must have at least two nodes, got {rows}x{cols}")
    edges = []
    for r in range(rows):
        for c in range(cols):
            u = r * cols + c
            if c + 1 < cols:
                edges.append((u, u + 1))
            if r + 1 < rows:
                edges.append((u, u + cols))
    return Graph(rows * cols, tuple(edges))


def sample_time_varying(ground: Graph, remove_fraction: float, rng: np.random.Generator) -> Graph:
    """Drop a uniformly random ``remove_fraction`` of the ground graph's edges.

    Exactly ``round((1 - remove_fraction) * |E|)`` edges survive (halves round
    up). The result may be disconnected.
    """
    if not 0.0 <= remove_fraction <= 1.0:
        raise InvalidParam(f"remove_fraction must lie in [0, 1], got {remove_fraction}")
    m = ground.n_edges
    if m == 0:
        raise InvalidParam("ground graph has no edges")
    keep = int(np.floor((1.0 - remove_fraction) * m + 0.5))
    idx = np.sort(rng.choice(m, size=keep, replace=False))
    return Graph(ground.n, tuple(ground.edges[k] for k in idx))


def laplacian_weights(g: Graph) -> WeightMatrix:
    """``W = I - Lap / (d_max + 1)`` for a connected graph."""
    if not g.is_connected():
        raise NotConnected("Laplacian weights need a connected graph")
    a = g.adjacency()
    deg = a.sum(axis=1)
    lap = np.diag(deg) - a
    w = np.eye(g.n) - lap / (deg.max() + 1.0)
    return WeightMatrix(w, second_singular(w))


def metropolis_weights(g: Graph) -> WeightMatrix:
    """Metropolis rule ``w_ij = 1 / (1 + max(d_i, d_j))``; isolated nodes keep weight 1."""
    deg = g.degrees()
    w = np.zeros((g.n, g.n))
    for i, j in g.edges:
        w[i, j] = w[j, i] = 1.0 / (1.0 + max(deg[i], deg[j]))
    w[np.diag_indices(g.n)] = 1.0 - w.sum(axis=1)
    return WeightMatrix(w, second_singular(w))


def second_singular(w, atol: float = 1e-10) -> float:
    """Spectral norm of ``W - 11^T/n``, i.e. the second largest singular value of ``W``."""
    w = np.asarray(w, dtype=float)
    if w.ndim != 2 or w.shape[0] != w.shape[1]:
        raise NotDoublyStochastic(f"expected a square matrix, got shape {w.shape}")
    if (np.abs(w.sum(axis=0) - 1.0).max() > atol
            or np.abs(w.sum(axis=1) - 1.0).max() > atol):
        raise NotDoublyStochastic("row or column sums deviate from 1")
    n = w.shape[0]
    sigma = float(np.linalg.norm(w - np.full((n, n), 1.0 / n), 2))
    # exact value never exceeds 1; trim rounding overshoot
    return min(sigma, 1.0)


def parse_graph_spec(spec: str, rng: np.random.Generator | None = None) -> Graph:
    """Build a graph from a compact string.

    Accepted forms: ``grid2d:5x5``, ``kcycle:100,20``, ``er:100,0.3[,seed]``,
    ``path:n``, ``complete:n``.
    """
    try:
        family, _, args = spec.partition(":")
        family = family.strip().lower()
        if family == "grid2d":
            r, c = args.lower().split("x")
            return gen_grid2d(int(r), int(c))
        if family in ("kcycle", "k_cycle"):
            n, k = args.split(",")
            return gen_k_cycle(int(n), int(k))
        if family in ("er", "erdos_renyi"):
            parts = args.split(",")
            n, p = int(parts[0]), float(parts[1])
            if len(parts) > 2:
                rng = np.random.default_rng(int(parts[2]))
            elif rng is None:
                rng = np.random.default_rng(0)
            return gen_erdos_renyi(n, p, rng)
        if family == "path":
            n = int(args)
            return Graph(n, tuple((i, i + 1) for i in range(n - 1)))
        if family == "complete":
            n = int(args)
            return Graph(n, tuple((i, j) for i in range(n) for j in range(i + 1, n)))
    except (ValueError, IndexError) as exc:
        raise InvalidParam(f"malformed graph spec {spec!r}: {exc}") from exc
    raise InvalidParam(f"unknown graph family in {spec!r}")
