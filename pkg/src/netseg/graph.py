"""Node-typed graphs, edge/wedge classification, and the integration metric.

A graph here is a simple graph (no self-loops, no duplicate edges) whose nodes
carry a type id in ``[0, K)``.  An edge is *monochromatic* when its endpoints
share a type and *bichromatic* otherwise; *integration* is the fraction of
bichromatic edges.  A *wedge* ``(i, h, j)`` is an unlinked pair ``{i, j}``
together with a common neighbor ``h``; a pair with several common neighbors
yields one wedge per mediator.  Directed graphs expose their underlying
undirected structure for all wedge and integration computations.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Iterable, Iterator

import numpy as np

from .errors import (
    NoMissingEdgeError,
    NoWedgeError,
    UndefinedIntegrationError,
)
from .rng import make_rng

MONO = "mono"
BI = "bi"

# Above this size, dense adjacency scratch matrices are not built.
_DENSE_LIMIT = 2048


@dataclass(frozen=True)
class EdgeStats:
    """Mono/bi edge counts and their bichromatic fraction."""

    mono_edges: int
    bi_edges: int
    integration: float


@dataclass(frozen=True)
class WedgeStats:
    """Wedge counts split by the outer pair's type match."""

    mono_wedges: int
    bi_wedges: int

    @property
    def total(self) -> int:
        return self.mono_wedges + self.bi_wedges


class TypedGraph:
    """A simple graph with typed nodes.

    Nodes are ``0..node_count-1``.  For undirected graphs an edge is an
    unordered pair; for directed graphs edges are ordered ``(src, dst)`` but
    neighborhood queries used by the metrics ignore orientation.
    """

    __slots__ = ("node_types", "directed", "K", "_out", "_und", "_n_edges",
                 "_mono", "_bi")

    def __init__(self, node_types, edges: Iterable[tuple[int, int]] = (),
                 directed: bool = False, K: int | None = None):
        types = np.asarray(node_types, dtype=np.int64)
        if types.ndim != 1:
            raise ValueError("node_types must be a 1-d sequence")
        if K is None:
            K = int(types.max()) + 1 if types.size else 1
        if K < 1:
            raise ValueError("K must be >= 1")
        if types.size and (types.min() < 0 or types.max() >= K):
            raise ValueError("every type id must lie in [0, K)")
        self.node_types = types
        self.directed = bool(directed)
        self.K = int(K)
        n = types.size
        self._out: list[set[int]] = [set() for _ in range(n)]
        self._und: list[set[int]] = [set() for _ in range(n)]
        self._n_edges = 0
        self._mono = 0
        self._bi = 0
        for i, j in edges:
            self.add_edge(int(i), int(j))

    @property
    def node_count(self) -> int:
        return self.node_types.size

    @property
    def edge_count(self) -> int:
        return self._n_edges

    def add_edge(self, i: int, j: int) -> None:
        n = self.node_count
        if not (0 <= i < n and 0 <= j < n):
            raise ValueError(f"edge ({i}, {j}) references an unknown node")
        if i == j:
            raise ValueError("self-loops are not allowed")
        if self.has_edge(i, j):
            raise ValueError(f"duplicate edge ({i}, {j})")
        self._out[i].add(j)
        if not self.directed:
            self._out[j].add(i)
        self._und[i].add(j)
        self._und[j].add(i)
        self._n_edges += 1
        if self.node_types[i] == self.node_types[j]:
            self._mono += 1
        else:
            self._bi += 1

    def has_edge(self, i: int, j: int) -> bool:
        """True if the pair is linked, ignoring orientation."""
        return j in self._und[i]

    def has_arc(self, i: int, j: int) -> bool:
        """True if a directed edge i -> j exists (== has_edge when undirected)."""
        return j in self._out[i]

    def neighbors(self, i: int) -> frozenset[int]:
        """Neighbors in the underlying undirected graph."""
        return frozenset(self._und[i])

    def out_neighbors(self, i: int) -> frozenset[int]:
        return frozenset(self._out[i])

    def degree(self, i: int) -> int:
        return len(self._und[i])

    def edges(self) -> Iterator[tuple[int, int]]:
        """Yield edges: ordered pairs if directed, else pairs with i < j."""
        if self.directed:
            for i, outs in enumerate(self._out):
                for j in sorted(outs):
                    yield (i, j)
        else:
            for i, nbrs in enumerate(self._und):
                for j in sorted(nbrs):
                    if i < j:
                        yield (i, j)

    def copy(self) -> "TypedGraph":
        g = TypedGraph(self.node_types.copy(), directed=self.directed, K=self.K)
        g._out = [set(s) for s in self._out]
        g._und = [set(s) for s in self._und]
        g._n_edges = self._n_edges
        g._mono = self._mono
        g._bi = self._bi
        return g

    def adjacency_matrix(self, dtype=np.float32) -> np.ndarray:
        """Dense symmetric adjacency of the underlying undirected graph."""
        n = self.node_count
        if n > _DENSE_LIMIT:
            raise ValueError(f"dense adjacency restricted to n <= {_DENSE_LIMIT}")
        a = np.zeros((n, n), dtype=dtype)
        for i, nbrs in enumerate(self._und):
            idx = np.fromiter(nbrs, dtype=np.int64, count=len(nbrs))
            a[i, idx] = 1
        return a

    def __repr__(self) -> str:
        kind = "directed" if self.directed else "undirected"
        return (f"TypedGraph({kind}, n={self.node_count}, "
                f"edges={self._n_edges}, K={self.K})")


def integration(g: TypedGraph) -> EdgeStats:
    """Exact mono/bi edge counts and the fraction of bichromatic edges.

    Raises ``UndefinedIntegrationError`` on an empty edge set.
    """
    if g.edge_count == 0:
        raise UndefinedIntegrationError("graph has no edges; integration undefined")
    return EdgeStats(g._mono, g._bi, g._bi / (g._mono + g._bi))


def enumerate_wedges(g: TypedGraph) -> list[tuple[int, int, int]]:
    """All wedges as (i, h, j) triples with i < j; one entry per mediator h."""
    out = []
    for h in range(g.node_count):
        nbrs = sorted(g._und[h])
        for a in range(len(nbrs)):
            for b in range(a + 1, len(nbrs)):
                i, j = nbrs[a], nbrs[b]
                if not g.has_edge(i, j):
                    out.append((i, h, j))
    return out


def count_wedges(g: TypedGraph) -> WedgeStats:
    """Count wedges split by outer-pair color.

    Uses a dense common-neighbor matrix when the graph fits, otherwise an
    explicit per-mediator pair scan.
    """
    n = g.node_count
    if n == 0:
        return WedgeStats(0, 0)
    if n <= _DENSE_LIMIT:
        a = g.adjacency_matrix()
        cn = a @ a  # counts <= n, exact in float32
        types = g.node_types
        same = types[:, None] == types[None, :]
        open_pair = (a == 0) & ~np.eye(n, dtype=bool) & (np.triu(np.ones((n, n), dtype=bool), 1))
        mono = int(cn[open_pair & same].sum())
        bi = int(cn[open_pair & ~same].sum())
        return WedgeStats(mono, bi)
    mono = bi = 0
    types = g.node_types
    for h in range(n):
        nbrs = sorted(g._und[h])
        for a_i in range(len(nbrs)):
            for b_i in range(a_i + 1, len(nbrs)):
                i, j = nbrs[a_i], nbrs[b_i]
                if not g.has_edge(i, j):
                    if types[i] == types[j]:
                        mono += 1
                    else:
                        bi += 1
    return WedgeStats(mono, bi)


def _exact_wedge_draw(g: TypedGraph, rng) -> tuple[int, int, int]:
    """Uniform wedge by explicit enumeration (slow path / rejection fallback)."""
    wedges = enumerate_wedges(g)
    if not wedges:
        raise NoWedgeError("graph contains no wedge")
    return wedges[int(rng.integers(len(wedges)))]


def sample_wedge(g: TypedGraph, rng) -> tuple[int, int, int]:
    """Draw one wedge uniformly over all (pair, mediator) wedges.

    Mediator h is drawn with probability proportional to its number of
    neighbor pairs, then a uniform neighbor pair is accepted iff unlinked.
    Conditioning on acceptance makes the draw uniform over wedges, with no
    need to count triangles; a bounded number of rejections falls back to
    exact enumeration.
    """
    degs = np.array([len(s) for s in g._und], dtype=np.float64)
    weights = degs * (degs - 1) / 2.0
    total = weights.sum()
    if total <= 0:
        raise NoWedgeError("graph contains no wedge")
    cum = np.cumsum(weights)
    for _ in range(256):
        h = int(np.searchsorted(cum, rng.random() * total, side="right"))
        nbrs = sorted(g._und[h])
        d = len(nbrs)
        ia = int(rng.integers(d))
        ib = int(rng.integers(d - 1))
        if ib >= ia:
            ib += 1
        i, j = nbrs[ia], nbrs[ib]
        if not g.has_edge(i, j):
            return (i, h, j) if i < j else (j, h, i)
    return _exact_wedge_draw(g, rng)


def close_random_wedge(g: TypedGraph, rng_seed) -> tuple[TypedGraph, str]:
    """Close one uniformly chosen wedge; returns (new graph, closed color).

    Uniform over wedges, not over unlinked endpoint pairs: a pair with
    several common neighbors is proportionally more likely to close.
    """
    rng = make_rng(rng_seed)
    i, _, j = sample_wedge(g, rng)
    out = g.copy()
    out.add_edge(i, j)
    color = MONO if g.node_types[i] == g.node_types[j] else BI
    return out, color


def _missing_pair_counts(g: TypedGraph) -> tuple[int, int]:
    """(mono, bi) counts of unlinked pairs."""
    sizes = np.bincount(g.node_types, minlength=g.K)
    mono_pairs = int((sizes * (sizes - 1) // 2).sum())
    n = g.node_count
    bi_pairs = n * (n - 1) // 2 - mono_pairs
    return mono_pairs - g._mono, bi_pairs - g._bi


def add_random_edge(g: TypedGraph, gamma: float, rng_seed) -> TypedGraph:
    """Add a gamma-homophilous random edge.

    A missing pair is selected with probability proportional to ``gamma`` if
    monochromatic and ``1`` if bichromatic; ``gamma=1`` is the uniform
    random-edge baseline.
    """
    if gamma < 0:
        raise ValueError("gamma must be >= 0")
    rng = make_rng(rng_seed)
    o_m, o_b = _missing_pair_counts(g)
    if o_m + o_b == 0:
        raise NoMissingEdgeError("graph is complete")
    w_m = gamma * o_m
    if w_m + o_b == 0:
        raise NoMissingEdgeError(
            "no selectable missing pair (gamma = 0 and only mono pairs remain)")
    want_mono = rng.random() * (w_m + o_b) < w_m
    i, j = _sample_missing_pair(g, want_mono, rng)
    out = g.copy()
    out.add_edge(i, j)
    return out


def _sample_missing_pair(g: TypedGraph, mono: bool, rng) -> tuple[int, int]:
    """Uniform missing pair of the requested color."""
    types = g.node_types
    by_type = [np.flatnonzero(types == k) for k in range(g.K)]
    sizes = np.array([len(b) for b in by_type], dtype=np.float64)
    if mono:
        w = sizes * (sizes - 1) / 2.0
    else:
        w = None  # cross pairs drawn by two-group choice below
    for _ in range(512):
        if mono:
            k = int(rng.choice(g.K, p=w / w.sum()))
            grp = by_type[k]
            ia = int(rng.integers(len(grp)))
            ib = int(rng.integers(len(grp) - 1))
            if ib >= ia:
                ib += 1
            i, j = int(grp[ia]), int(grp[ib])
        else:
            i = int(rng.integers(g.node_count))
            j = int(rng.integers(g.node_count))
            if i == j or types[i] == types[j]:
                continue
        if not g.has_edge(i, j):
            return (i, j) if i < j else (j, i)
    # Dense fallback: enumerate all missing pairs of the color.
    pairs = [(i, j) for i in range(g.node_count) for j in range(i + 1, g.node_count)
             if not g.has_edge(i, j) and (types[i] == types[j]) == mono]
    if not pairs:
        raise NoMissingEdgeError(f"no missing {'mono' if mono else 'bi'} pair")
    return pairs[int(rng.integers(len(pairs)))]


# ---------------------------------------------------------------------------
# File formats: plain edge-list text and a JSON equivalent.

def write_edge_list(g: TypedGraph, path) -> None:
    """Write the text format: header, `node <id> <type>`, `edge <src> <dst>`."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"{'directed' if g.directed else 'undirected'} K={g.K}\n")
        for i in range(g.node_count):
            fh.write(f"node {i} {int(g.node_types[i])}\n")
        for i, j in g.edges():
            fh.write(f"edge {i} {j}\n")


def read_edge_list(path) -> TypedGraph:
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().split()
        if len(header) != 2 or header[0] not in ("directed", "undirected") \
                or not header[1].startswith("K="):
            raise ValueError(f"bad header in {path!s}")
        directed = header[0] == "directed"
        k = int(header[1][2:])
        types: dict[int, int] = {}
        edges: list[tuple[int, int]] = []
        for line_no, line in enumerate(fh, start=2):
            parts = line.split()
            if not parts:
                continue
            if parts[0] == "node" and len(parts) == 3:
                types[int(parts[1])] = int(parts[2])
            elif parts[0] == "edge" and len(parts) == 3:
                edges.append((int(parts[1]), int(parts[2])))
            else:
                raise ValueError(f"bad line {line_no} in {path!s}: {line.rstrip()}")
    n = len(types)
    if sorted(types) != list(range(n)):
        raise ValueError("node ids must be 0..n-1")
    type_arr = [types[i] for i in range(n)]
    return TypedGraph(type_arr, edges, directed=directed, K=k)


def write_graph_json(g: TypedGraph, path) -> None:
    payload = {
        "schema_version": 1,
        "directed": g.directed,
        "K": g.K,
        "types": [int(t) for t in g.node_types],
        "edges": [[i, j] for i, j in g.edges()],
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh)
        fh.write("\n")


def read_graph_json(path) -> TypedGraph:
    with open(path, "r", encoding="utf-8") as fh:
        payload = json.load(fh)
    return TypedGraph(payload["types"], [tuple(e) for e in payload["edges"]],
                      directed=payload["directed"], K=payload["K"])


def complete_graph(node_types, directed: bool = False, K: int | None = None) -> TypedGraph:
    """Complete typed graph; directed variants orient each pair low -> high."""
    types = np.asarray(node_types)
    n = types.size
    edges = ((i, j) for i in range(n) for j in range(i + 1, n))
    return TypedGraph(types, edges, directed=directed, K=K)
