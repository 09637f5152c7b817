"""Connected cluster graphs: a vertex set plus a subset of its saturated edges."""
from __future__ import annotations

import math
from collections import deque

from .errors import DomainError
from .lattice import (
    Edge,
    Plot,
    Site,
    boundary_edge_count,
    canonical_edge,
    full_lattice,
    saturate,
    surface_and_frontier,
)


class ClusterGraph:
    """Vertex set ``C`` of a plot with open edges ``G`` inside ``satur C``.

    The counts ``e_open = e(G)``, ``e_sat = e(satur C)`` and ``w`` (plot edges
    leaving ``C``) are cached and kept current by the mutators. With
    ``open_edges=None`` the graph starts fully saturated.
    """

    def __init__(self, vertices, open_edges=None, plot: Plot | None = None, *, check=True):
        vertices = frozenset(tuple(v) for v in vertices)
        if not vertices:
            raise DomainError("a cluster graph needs at least one vertex")
        d = len(next(iter(vertices)))
        self.plot = plot if plot is not None else full_lattice(d)
        if check:
            outside = [v for v in vertices if not self.plot.contains(v)]
            if outside:
                raise DomainError(f"sites {sorted(outside)[:3]} are not in plot {self.plot.spec}")
        self.vertices = vertices
        self._saturated = sorted(saturate(vertices, self.plot))
        self._saturated_set = frozenset(self._saturated)
        if open_edges is None:
            edges = set(self._saturated)
        else:
            edges = {canonical_edge(tuple(a), tuple(b)) for a, b in open_edges}
            stray = edges - self._saturated_set
            if stray:
                raise DomainError(f"edges {sorted(stray)[:3]} are not inside the saturation")
        self.open_edges = edges
        self._adj = {v: set() for v in vertices}
        for a, b in edges:
            self._adj[a].add(b)
            self._adj[b].add(a)
        self.e_open = len(edges)
        self.e_sat = len(self._saturated)
        self.w = boundary_edge_count(vertices, self.plot)
        if check and not self.is_connected():
            raise DomainError("cluster graph is not connected")

    def __repr__(self):
        return (f"ClusterGraph(|C|={len(self.vertices)}, e_open={self.e_open}, "
                f"e_sat={self.e_sat}, w={self.w}, plot={self.plot.spec})")

    def __eq__(self, other):
        if not isinstance(other, ClusterGraph):
            return NotImplemented
        return (self.plot == other.plot and self.vertices == other.vertices
                and self.open_edges == other.open_edges)

    def __len__(self):
        return len(self.vertices)

    def stats(self) -> tuple[int, int, int]:
        return self.e_open, self.e_sat, self.w

    def log_prob(self, p: float) -> float:
        """``log P_p(G)`` for this exact open-edge configuration."""
        closed = self.e_sat - self.e_open + self.w
        out = 0.0
        if self.e_open:
            out += self.e_open * math.log(p)
        if closed:
            out += closed * math.log1p(-p)
        return out

    def saturated_edges(self) -> list[Edge]:
        """Edges of ``satur C`` in canonical order."""
        return list(self._saturated)

    def surface_and_frontier(self) -> tuple[set[Site], set[Site]]:
        return surface_and_frontier(self.vertices, self.plot)

    def frontier(self) -> set[Site]:
        return self.surface_and_frontier()[1]

    def degree(self, v: Site) -> int:
        """Number of open edges at ``v``."""
        return len(self._adj[v])

    def copy(self) -> "ClusterGraph":
        g = object.__new__(ClusterGraph)
        g.__dict__.update(self.__dict__)
        g.open_edges = set(self.open_edges)
        g._adj = {v: set(nb) for v, nb in self._adj.items()}
        return g

    def _reachable(self, start, skip: Edge | None = None, target=None) -> set[Site]:
        seen = {start}
        queue = deque([start])
        while queue:
            x = queue.popleft()
            for y in self._adj[x]:
                if y in seen or (skip is not None and canonical_edge(x, y) == skip):
                    continue
                if y == target:
                    seen.add(y)
                    return seen
                seen.add(y)
                queue.append(y)
        return seen

    def is_connected(self) -> bool:
        start = min(self.vertices)
        return len(self._reachable(start)) == len(self.vertices)

    def is_connected_after_removal(self, e: Edge) -> bool:
        """Whether removing open edge ``e`` keeps the graph connected."""
        e = canonical_edge(*e)
        if e not in self.open_edges:
            raise DomainError(f"edge {e} is not open")
        a, b = e
        return b in self._reachable(a, skip=e, target=b)

    def apply_edge_toggle(self, e: Edge, insert: bool) -> "ClusterGraph":
        """Insert or delete one edge in place and return ``self``.

        Deletions must keep the graph connected. ``e_sat`` and ``w`` do not
        change because the vertex set is fixed.
        """
        e = canonical_edge(*e)
        a, b = e
        if insert:
            if e not in self._saturated_set:
                raise DomainError(f"edge {e} is not in the saturation")
            if e in self.open_edges:
                raise DomainError(f"edge {e} is already open")
            self.open_edges.add(e)
            self._adj[a].add(b)
            self._adj[b].add(a)
            self.e_open += 1
        else:
            if not self.is_connected_after_removal(e):
                raise DomainError(f"removing {e} disconnects the graph")
            self.open_edges.discard(e)
            self._adj[a].discard(b)
            self._adj[b].discard(a)
            self.e_open -= 1
        return self

    def replace_vertex(self, u: Site, v: Site, new_edges_for_v) -> "ClusterGraph":
        """Candidate graph with ``u`` (and its edges) swapped for ``v``.

        ``new_edges_for_v`` must be non-empty and join ``v`` to vertices other
        than ``u``. Connectivity of the result is not checked.
        """
        u, v = tuple(u), tuple(v)
        if u not in self.vertices:
            raise DomainError(f"{u} is not a vertex")
        if v in self.vertices or v not in self.frontier():
            raise DomainError(f"{v} is not on the frontier")
        new_edges = {canonical_edge(tuple(a), tuple(b)) for a, b in new_edges_for_v}
        if not new_edges:
            raise DomainError("at least one edge must join the new vertex")
        keep = self.vertices - {u}
        for a, b in new_edges:
            other = b if a == v else a if b == v else None
            if other is None or other not in keep:
                raise DomainError(f"edge {(a, b)} must join {v} to a vertex other than {u}")
        edges = {e for e in self.open_edges if u not in e} | new_edges
        return ClusterGraph(keep | {v}, edges, self.plot, check=False)

    def recomputed_stats(self) -> tuple[int, int, int]:
        """Counts rebuilt from scratch, for consistency checks."""
        return (len(self.open_edges), len(saturate(self.vertices, self.plot)),
                boundary_edge_count(self.vertices, self.plot))
