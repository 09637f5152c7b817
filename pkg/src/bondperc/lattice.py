"""Cubic-lattice geometry: sites, plots and the edge sets they induce.

A site is a tuple of ints. A :class:`Plot` is a vertex set of Z^d (the whole
lattice, a centred box, or an inner-outer plot) with the nearest-neighbour
adjacency it induces. Undirected edges are stored as ``(a, b)`` with
``a < b`` in lexicographic site order.
"""
from __future__ import annotations

import functools
import re
from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .errors import DomainError

Site = tuple[int, ...]
Edge = tuple[Site, Site]

FULL = "full"
BOX = "box"
INNER_OUTER = "inner-outer"


def canonical_edge(a: Site, b: Site) -> Edge:
    return (a, b) if a < b else (b, a)


def removal_radii(m: int, r: int) -> tuple[int, ...]:
    """Sup-norm radii of the rings thinned in an inner-outer ``(m, r)`` plot.

    The inner ``m x m`` block has half-width ``(m - 1) / 2``; the thinned
    rings start just outside it and alternate with intact rings.
    """
    h = (m - 1) // 2
    return tuple(h + 2 * j + 1 for j in range(r))


@dataclass(frozen=True)
class Plot:
    """A subset of Z^d together with its induced nearest-neighbour graph.

    Use :func:`full_lattice`, :func:`make_box` or :func:`make_inner_outer`
    rather than the constructor.
    """

    dimension: int
    kind: str
    N: int | None = None
    m: int | None = None
    r: int | None = None

    @property
    def is_finite(self) -> bool:
        return self.kind != FULL

    @property
    def half_width(self) -> int:
        if not self.is_finite:
            raise DomainError("the full lattice has no bounding box")
        return (self.N - 1) // 2

    @property
    def spec(self) -> str:
        if self.kind == FULL:
            return f"full:{self.dimension}"
        if self.kind == BOX:
            return f"box:{self.dimension},{self.N}"
        return f"inner-outer:{self.dimension},{self.m},{self.r}"

    def __str__(self):
        return self.spec

    def contains(self, site: Site) -> bool:
        if len(site) != self.dimension:
            return False
        if self.kind == FULL:
            return True
        sup = max(abs(c) for c in site)
        if sup > self.half_width:
            return False
        if self.kind == INNER_OUTER and sup in self._radii:
            return sum(abs(c) for c in site) % 2 == 1
        return True

    @functools.cached_property
    def _radii(self) -> frozenset[int]:
        return frozenset(removal_radii(self.m, self.r or 0))

    def membership(self, coords: np.ndarray) -> np.ndarray:
        """Vectorised membership test for an ``(K, d)`` integer array."""
        coords = np.asarray(coords, dtype=np.int64)
        if self.kind == FULL:
            return np.ones(len(coords), dtype=bool)
        sup = np.abs(coords).max(axis=1) if coords.size else np.zeros(0, np.int64)
        inside = sup <= self.half_width
        if self.kind == INNER_OUTER and self.r:
            l1_even = np.abs(coords).sum(axis=1) % 2 == 0
            on_ring = np.isin(sup, removal_radii(self.m, self.r))
            inside &= ~(on_ring & l1_even)
        return inside

    @functools.cached_property
    def _sites(self) -> tuple[Site, ...]:
        h = self.half_width
        axis = np.arange(-h, h + 1)
        grid = np.stack(np.meshgrid(*([axis] * self.dimension), indexing="ij"), -1)
        coords = grid.reshape(-1, self.dimension)
        coords = coords[self.membership(coords)]
        return tuple(map(tuple, coords.tolist()))

    def sites(self) -> tuple[Site, ...]:
        """All member sites in lexicographic order (finite plots only)."""
        if not self.is_finite:
            raise DomainError("cannot enumerate the sites of the full lattice")
        return self._sites


def full_lattice(d: int = 2) -> Plot:
    if d < 1:
        raise DomainError(f"dimension must be positive, got {d}")
    return Plot(d, FULL)


def make_box(d: int, N: int) -> Plot:
    """The centred box ``[-(N-1)/2, (N-1)/2]^d``; ``N`` must be odd."""
    if d < 1:
        raise DomainError(f"dimension must be positive, got {d}")
    if N < 1 or N % 2 == 0:
        raise DomainError(f"box side must be a positive odd integer, got {N}")
    return Plot(d, BOX, N=N)


def make_inner_outer(d: int, m: int, r: int) -> Plot:
    """Inner-outer ``(m, r)`` plot centred at the origin.

    The bounding box has side ``N = m + 4r``. Each of the ``r`` thinned rings
    loses its sites with even L1 norm; ``r = 0`` gives the full box.
    """
    if d < 1:
        raise DomainError(f"dimension must be positive, got {d}")
    if m < 1 or m % 2 == 0:
        raise DomainError(f"m must be a positive odd integer, got {m}")
    if r < 0:
        raise DomainError(f"r must be non-negative, got {r}")
    return Plot(d, INNER_OUTER, N=m + 4 * r, m=m, r=r)


_SPEC_RE = re.compile(r"^(full|box|inner-outer):(\d+(?:,\d+)*)$")


def parse_plot_spec(spec: str) -> Plot:
    """Parse ``full:d``, ``box:d,N`` or ``inner-outer:d,m,r``."""
    match = _SPEC_RE.match(spec.strip())
    if not match:
        raise DomainError(f"malformed plot spec {spec!r}")
    kind, args = match.group(1), [int(a) for a in match.group(2).split(",")]
    arity = {FULL: 1, BOX: 2, INNER_OUTER: 3}[kind]
    if len(args) != arity:
        raise DomainError(f"plot spec {spec!r}: {kind} takes {arity} integer(s)")
    if kind == FULL:
        return full_lattice(*args)
    if kind == BOX:
        return make_box(*args)
    return make_inner_outer(*args)


def inner_outer_node_count(m: int, r: int) -> int:
    """Closed-form node count ``(m + 3r)^2 + r(3r + 2)`` of a planar plot."""
    return (m + 3 * r) ** 2 + r * (3 * r + 2)


def node_count(plot: Plot) -> int:
    if not plot.is_finite:
        raise DomainError("the full lattice is unbounded")
    return len(plot.sites())


def _check_member(s: Site, plot: Plot):
    if not plot.contains(s):
        raise DomainError(f"site {s} is not a member of plot {plot.spec}")


def _raw_neighbors(s: Site):
    for axis in range(len(s)):
        for step in (-1, 1):
            t = list(s)
            t[axis] += step
            yield tuple(t)


def neighbors(s: Site, plot: Plot) -> list[Site]:
    """Plot members at L1 distance one from ``s``.

    Ordered by axis, the negative step before the positive one.
    """
    s = tuple(s)
    _check_member(s, plot)
    return [t for t in _raw_neighbors(s) if plot.contains(t)]


def degree(s: Site, plot: Plot) -> int:
    return len(neighbors(s, plot))


def saturate(vertices: Iterable[Site], plot: Plot) -> set[Edge]:
    """All plot edges with both endpoints in ``vertices``."""
    vset = set(map(tuple, vertices))
    edges = set()
    for s in vset:
        for axis in range(len(s)):
            t = s[:axis] + (s[axis] + 1,) + s[axis + 1:]
            if t in vset:
                edges.add((s, t))
    return edges


def surface_and_frontier(vertices: Iterable[Site], plot: Plot) -> tuple[set[Site], set[Site]]:
    """Return ``(surface, frontier)`` of a vertex set relative to ``plot``.

    The surface holds members of ``vertices`` with a plot neighbour outside
    the set; the frontier holds outside plot members adjacent to the set.
    """
    vset = set(map(tuple, vertices))
    surface, frontier = set(), set()
    for s in vset:
        for t in neighbors(s, plot):
            if t not in vset:
                surface.add(s)
                frontier.add(t)
    return surface, frontier


def boundary_edge_count(vertices: Iterable[Site], plot: Plot) -> int:
    """Number of plot edges with exactly one endpoint in ``vertices``."""
    vset = set(map(tuple, vertices))
    return sum(1 for s in vset for t in neighbors(s, plot) if t not in vset)
