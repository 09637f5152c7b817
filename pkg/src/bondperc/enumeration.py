"""Exhaustive enumeration for small instances.

These give the exact beta-mixture posteriors the samplers are tested
against: the connected spanning subgraphs of a saturated cluster, and the
connected vertex sets ("lattice animals", placements distinguished) of a
given size containing the origin.
"""
from __future__ import annotations

from collections import Counter

import numpy as np

from .errors import CapacityError
from .lattice import Plot, Site, boundary_edge_count, neighbors, saturate

MAX_ENUM_EDGES = 20
MAX_ANIMAL_SIZE = 6


def spanning_subgraph_counts(n: int, ea, eb) -> Counter:
    """Count connected spanning subgraphs by edge number.

    ``ea``/``eb`` are local endpoint indices in ``range(n)``. Every edge
    subset is tested at once by propagating minimum component labels over
    all subsets in parallel.
    """
    ea = np.asarray(ea, dtype=np.int64)
    eb = np.asarray(eb, dtype=np.int64)
    n_edges = len(ea)
    if n_edges > MAX_ENUM_EDGES:
        raise CapacityError(f"{n_edges} edges exceed the enumeration guard of {MAX_ENUM_EDGES}")
    if n == 1:
        return Counter({0: 1})
    subsets = np.arange(1 << n_edges, dtype=np.int64)
    sizes = np.zeros(len(subsets), dtype=np.int64)
    for j in range(n_edges):
        sizes += (subsets >> j) & 1
    subsets = subsets[sizes >= n - 1]
    sizes = sizes[sizes >= n - 1]
    labels = np.tile(np.arange(n, dtype=np.int16), (len(subsets), 1))
    present = [((subsets >> j) & 1).astype(bool) for j in range(n_edges)]
    changed = True
    while changed:
        changed = False
        for j in range(n_edges):
            a, b = ea[j], eb[j]
            low = np.minimum(labels[:, a], labels[:, b])
            upd = present[j] & ((labels[:, a] != low) | (labels[:, b] != low))
            if upd.any():
                changed = True
                labels[upd, a] = low[upd]
                labels[upd, b] = low[upd]
    connected = (labels == 0).all(axis=1)
    return Counter(sizes[connected].tolist())


def vertex_set_table(vertices, plot: Plot) -> Counter:
    """``{(e_sat, k, w): count}`` over connected spanning subgraphs of ``satur C``."""
    verts = sorted(set(map(tuple, vertices)))
    pos = {v: i for i, v in enumerate(verts)}
    edges = sorted(saturate(verts, plot))
    ea = [pos[a] for a, _ in edges]
    eb = [pos[b] for _, b in edges]
    s = len(edges)
    w = boundary_edge_count(verts, plot)
    return Counter({(s, k, w): c for k, c in spanning_subgraph_counts(len(verts), ea, eb).items()})


def lattice_animals(n: int, plot: Plot, origin: Site | None = None) -> list[frozenset]:
    """All connected ``n``-site subsets of ``plot`` containing the origin.

    Translates and rotations are distinct; each set appears once.
    """
    if n > MAX_ANIMAL_SIZE:
        raise CapacityError(f"n = {n} exceeds the enumeration guard of {MAX_ANIMAL_SIZE}")
    if origin is None:
        origin = (0,) * plot.dimension
    level = {frozenset([origin])}
    for _ in range(n - 1):
        grown = set()
        for shape in level:
            for s in shape:
                for t in neighbors(s, plot):
                    if t not in shape:
                        grown.add(shape | {t})
        level = grown
    return sorted(level, key=sorted)


def size_table(n: int, plot: Plot) -> Counter:
    """``{(s, k, l): q}`` summed over every connected n-set with the origin."""
    table = Counter()
    for shape in lattice_animals(n, plot):
        table.update(vertex_set_table(shape, plot))
    return table
