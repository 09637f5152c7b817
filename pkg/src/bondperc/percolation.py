"""Forward simulation of bond percolation clusters and the cluster file format.

The open cluster of the origin is the final snapshot of a nearest-neighbour
SIR epidemic with constant infectious periods, so simulating one is a
breadth-first exploration that opens each edge with probability ``p``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import kernels
from .cluster_graph import ClusterGraph
from .errors import CapacityError, ClusterFormatError, DomainError
from .grid import MAX_WINDOW_CELLS, make_window, window_cells
from .lattice import Plot, canonical_edge
from .rng import make_rng

DEFAULT_CAP = 10**6
_FIRST_HALF = 16


def intensity_to_p(lam: float, tau: float) -> float:
    """Bond probability ``1 - exp(-lam * tau)`` for infection rate ``lam``
    and constant infectious lifetime ``tau``."""
    if lam < 0:
        raise DomainError(f"infection rate must be non-negative, got {lam}")
    if tau <= 0:
        raise DomainError(f"lifetime must be positive, got {tau}")
    return -math.expm1(-lam * tau)


@dataclass(frozen=True)
class PercolationParams:
    p: float
    lam: float | None = None
    tau: float | None = None

    def __post_init__(self):
        if not 0.0 <= self.p <= 1.0:
            raise DomainError(f"p must lie in [0, 1], got {self.p}")
        if self.lam is not None and self.tau is not None:
            if not math.isclose(self.p, intensity_to_p(self.lam, self.tau), rel_tol=1e-12, abs_tol=1e-15):
                raise DomainError("p is inconsistent with lam and tau")

    @classmethod
    def from_intensity(cls, lam: float, tau: float) -> "PercolationParams":
        return cls(intensity_to_p(lam, tau), lam, tau)


@dataclass(frozen=True)
class Truncated:
    """Exploration stopped after the cluster outgrew ``cap`` sites."""

    cap: int
    explored: int

    def __bool__(self):
        return False


def _run(plot: Plot, p: float, bit_generator, cap: int | None, backend=None):
    """Run the kernel, growing the window until the cluster fits.

    On unbounded plots the exploration is replayed from the saved generator
    state whenever the cluster touches the window rim, so the outcome equals
    that of an exploration on the unbounded lattice.
    """
    if not 0.0 <= p <= 1.0:
        raise DomainError(f"p must lie in [0, 1], got {p}")
    if plot.is_finite:
        window = make_window(plot)
        if window.mask[window.origin] == 0:
            raise DomainError(f"origin is not a member of plot {plot.spec}")
        limit = -1 if cap is None else int(cap)
        status, idx, ea, eb = kernels.simulate(window.mask, window.offsets, window.origin,
                                               float(p), limit, bit_generator, backend=backend)
        return window, status, idx, ea, eb
    limit = DEFAULT_CAP if cap is None else int(cap)
    half = _FIRST_HALF
    while True:
        if window_cells(plot.dimension, half) > MAX_WINDOW_CELLS:
            raise CapacityError(f"cluster outgrew the largest window (half-width {half // 2})")
        window = make_window(plot, half)
        saved = bit_generator.state
        status, idx, ea, eb = kernels.simulate(window.mask, window.offsets, window.origin,
                                               float(p), limit, bit_generator, backend=backend)
        if status != kernels.STATUS_RIM:
            return window, status, idx, ea, eb
        bit_generator.state = saved
        half *= 2


def simulate_cluster(plot: Plot, p: float, seed=0, cap: int | None = None, *,
                     backend=None) -> ClusterGraph | Truncated:
    """Open cluster of the origin with its realised open edges.

    ``seed`` may be an int or a ``numpy.random.Generator`` (consumed in
    place). ``cap`` defaults to 10**6 sites on the full lattice and to no
    cap on finite plots; exceeding it returns :class:`Truncated`.
    """
    rng = make_rng(seed)
    window, status, idx, ea, eb = _run(plot, p, rng.bit_generator, cap, backend)
    if status == kernels.STATUS_TRUNCATED:
        return Truncated(cap=DEFAULT_CAP if cap is None else int(cap), explored=len(idx))
    sites = [tuple(s) for s in window.sites(idx).tolist()]
    a = window.sites(ea).tolist()
    b = window.sites(eb).tolist()
    edges = [canonical_edge(tuple(x), tuple(y)) for x, y in zip(a, b)]
    return ClusterGraph(sites, edges, plot, check=False)


def simulate_indices(plot: Plot, p: float, rng: np.random.Generator, cap: int | None = None,
                     *, backend=None):
    """Low-level variant returning ``(window, sorted flat indices)``.

    Returns ``(window, None)`` on truncation.
    """
    window, status, idx, _, _ = _run(plot, p, rng.bit_generator, cap, backend)
    if status == kernels.STATUS_TRUNCATED:
        return window, None
    return window, np.sort(idx)


def simulate_sizes(plot: Plot, p: float, seed: int, replicates: int,
                   cap: int | None = None, *, backend=None) -> np.ndarray:
    """Cluster sizes of independent replicates; ``-1`` marks truncation.

    Replicate ``i`` uses stream ``(seed, i)``.
    """
    sizes = np.empty(replicates, dtype=np.int64)
    for i in range(replicates):
        rng = make_rng(seed, i)
        _, status, idx, _, _ = _run(plot, p, rng.bit_generator, cap, backend)
        sizes[i] = -1 if status == kernels.STATUS_TRUNCATED else len(idx)
    return sizes


# --- cluster files -------------------------------------------------------

EDGES_MARKER = "EDGES"


def _fmt_site(s) -> str:
    return ",".join(str(int(c)) for c in s)


def write_cluster(path, graph: ClusterGraph, *, edges: bool = True, header: str | None = None):
    """Write one site per line, then optionally ``EDGES`` and ``a;b`` lines."""
    lines = []
    if header:
        lines.append(f"# {header}")
    lines.extend(_fmt_site(s) for s in sorted(graph.vertices))
    if edges:
        lines.append(EDGES_MARKER)
        lines.extend(f"{_fmt_site(a)};{_fmt_site(b)}" for a, b in sorted(graph.open_edges))
    Path(path).write_text("\n".join(lines) + "\n", encoding="ascii", newline="\n")


def _parse_site(text: str, lineno: int, d: int | None):
    try:
        site = tuple(int(c) for c in text.split(","))
    except ValueError:
        raise ClusterFormatError(f"malformed coordinates {text!r}", lineno) from None
    if d is not None and len(site) != d:
        raise ClusterFormatError(f"expected {d} coordinates, got {len(site)}", lineno)
    return site


def read_cluster(path):
    """Parse a cluster file into ``(sites, edges)``; ``edges`` is ``None``
    when the file has no ``EDGES`` section. Lines starting with ``#`` and
    blank lines are ignored."""
    sites, edges = [], None
    d = None
    text = Path(path).read_text(encoding="ascii")
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if line == EDGES_MARKER:
            if edges is not None:
                raise ClusterFormatError("duplicate EDGES marker", lineno)
            edges = []
            continue
        if edges is None:
            site = _parse_site(line, lineno, d)
            d = len(site)
            sites.append(site)
        else:
            parts = line.split(";")
            if len(parts) != 2:
                raise ClusterFormatError(f"malformed edge {line!r}", lineno)
            a, b = (_parse_site(part, lineno, d) for part in parts)
            if sum(abs(x - y) for x, y in zip(a, b)) != 1:
                raise ClusterFormatError(f"edge {line!r} does not join neighbours", lineno)
            edges.append(canonical_edge(a, b))
    if not sites:
        raise ClusterFormatError("no sites in cluster file")
    if len(set(sites)) != len(sites):
        raise ClusterFormatError("duplicate sites in cluster file")
    return sites, edges


def metadata_path(path) -> Path:
    path = Path(path)
    return path.with_name(path.name + ".meta")


def write_metadata(path, record: dict):
    lines = [f"{k}={v}" for k, v in record.items()]
    metadata_path(path).write_text("\n".join(lines) + "\n", encoding="ascii", newline="\n")


def read_metadata(path) -> dict:
    meta = metadata_path(path)
    if not meta.exists():
        return {}
    out = {}
    for line in meta.read_text(encoding="ascii").splitlines():
        if "=" in line and not line.startswith("#"):
            key, value = line.split("=", 1)
            out[key.strip()] = value.strip()
    return out
