"""Flat-index embedding of plots for the compiled and fallback kernels.

A :class:`Window` maps the cube ``[-half, half]^d`` onto a C-ordered flat
array padded by one layer of non-members, so a site's neighbours are always
at ``idx + offsets[k]`` without bounds checks. Sorting flat indices sorts
sites lexicographically, which keeps edge order identical to the
tuple-level code in :mod:`bondperc.lattice`.

Mask values: 0 non-member, 1 member, 2 member on the rim of a window cut
out of an unbounded plot (its outward neighbours are not represented).
"""
from __future__ import annotations

import functools
from dataclasses import dataclass

import numpy as np

from .errors import CapacityError, DomainError
from .lattice import Plot

MAX_WINDOW_CELLS = 1 << 27


@dataclass(frozen=True, eq=False)
class Window:
    plot: Plot
    half: int
    mask: np.ndarray
    strides: np.ndarray
    offsets: np.ndarray

    @property
    def dimension(self) -> int:
        return self.plot.dimension

    @property
    def side(self) -> int:
        return 2 * self.half + 3

    @property
    def origin(self) -> int:
        return int((self.half + 1) * self.strides.sum())

    def index(self, sites) -> np.ndarray:
        coords = np.asarray(sites, dtype=np.int64).reshape(-1, self.dimension)
        if coords.size and np.abs(coords).max() > self.half:
            raise DomainError(f"site outside window of half-width {self.half}")
        return (coords + self.half + 1) @ self.strides

    def sites(self, idx) -> np.ndarray:
        idx = np.asarray(idx, dtype=np.int64)
        coords = np.empty((len(idx), self.dimension), dtype=np.int64)
        rest = idx.copy()
        for k, stride in enumerate(self.strides):
            coords[:, k], rest = np.divmod(rest, stride)
        return coords - self.half - 1

    def degrees(self, idx) -> np.ndarray:
        idx = np.asarray(idx, dtype=np.int64)
        member = self.mask > 0
        return sum(member[idx + off] for off in self.offsets).astype(np.int64)


def window_cells(d: int, half: int) -> int:
    return (2 * half + 3) ** d


@functools.lru_cache(maxsize=64)
def make_window(plot: Plot, half: int | None = None) -> Window:
    """Window for ``plot``; ``half`` is required for the full lattice.

    Windows are cached and their arrays must be treated as read-only.
    """
    d = plot.dimension
    if half is None:
        half = plot.half_width
    if plot.is_finite:
        half = max(half, plot.half_width)
    if window_cells(d, half) > MAX_WINDOW_CELLS:
        raise CapacityError(f"window of half-width {half} in d={d} is too large")
    side = 2 * half + 3
    strides = np.array([side ** (d - 1 - k) for k in range(d)], dtype=np.int64)
    axis = np.arange(-half - 1, half + 2)
    grid = np.stack(np.meshgrid(*([axis] * d), indexing="ij"), -1).reshape(-1, d)
    sup = np.abs(grid).max(axis=1)
    mask = np.zeros(len(grid), dtype=np.uint8)
    inside = sup <= half
    mask[inside & plot.membership(grid)] = 1
    if not plot.is_finite:
        mask[sup == half] = 2
    mask.setflags(write=False)
    offsets = np.empty(2 * d, dtype=np.int64)
    offsets[0::2] = -strides
    offsets[1::2] = strides
    return Window(plot, half, mask, strides, offsets)


def window_for_sites(plot: Plot, sites) -> Window:
    """Smallest cached window holding ``sites`` and all their neighbours."""
    coords = np.asarray(sites, dtype=np.int64).reshape(-1, plot.dimension)
    reach = int(np.abs(coords).max()) + 1 if coords.size else 1
    if plot.is_finite:
        return make_window(plot)
    # round up so nearby requests share a cached window
    half = 8
    while half < reach + 1:
        half *= 2
    return make_window(plot, half)


def saturated_edges(window: Window, idx: np.ndarray):
    """Saturation of a vertex set given as sorted unique flat indices.

    Returns ``(ea, eb, w)``: local endpoint indices (positions in ``idx``)
    of each edge in canonical order, and the number of plot edges leaving
    the set.
    """
    idx = np.asarray(idx, dtype=np.int64)
    inset = np.zeros(window.mask.size, dtype=bool)
    inset[idx] = True
    heads, tails = [], []
    for stride in window.strides:
        nb = idx + stride
        sel = inset[nb]
        heads.append(idx[sel])
        tails.append(nb[sel])
    a = np.concatenate(heads)
    b = np.concatenate(tails)
    order = np.lexsort((b, a))
    a, b = a[order], b[order]
    ea = np.searchsorted(idx, a)
    eb = np.searchsorted(idx, b)
    w = int(window.degrees(idx).sum()) - 2 * len(a)
    return ea, eb, w
