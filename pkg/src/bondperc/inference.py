"""Posterior inference on the bond probability ``p``.

Two Metropolis-within-Gibbs samplers are provided:

* scenario S1 (:func:`run_s1`): the vertex set of the cluster is observed.
  The chain walks over ``(p, G)`` with ``G`` a connected spanning subgraph of
  the saturated cluster, toggling one edge per step.
* scenario S2 (:func:`run_s2`): only the cluster size ``n`` is observed. The
  chain walks over connected ``n``-vertex graphs containing the origin,
  swapping one vertex for a frontier site per step.

In both, the Gibbs update draws ``p`` from
``Beta(e_open + a, e_sat - e_open + w + b)`` under a ``Beta(a, b)`` prior.

Exact answers for small instances come from :mod:`bondperc.enumeration`
and are wrapped in :class:`MixtureTable`.
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
from scipy import special
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from . import kernels
from .cluster_graph import ClusterGraph
from .enumeration import MAX_ANIMAL_SIZE, MAX_ENUM_EDGES, size_table, vertex_set_table
from .errors import CapacityError, DomainError
from .grid import make_window, saturated_edges, window_for_sites
from .lattice import Plot, canonical_edge, neighbors, saturate
from .rng import make_rng

P_CRITICAL_SQUARE = 0.5
P_EPS = 1e-12
MIN_MODE_DRAWS = 1000
MODE_GRID = 512

S1 = "S1"
S2 = "S2"


@dataclass(frozen=True)
class PriorSpec:
    """``Beta(a, b)`` prior on ``p``; the default is uniform on (0, 1)."""

    a: float = 1.0
    b: float = 1.0
    support: tuple[float, float] = (0.0, 1.0)

    def __post_init__(self):
        if not (self.a > 0 and self.b > 0 and math.isfinite(self.a) and math.isfinite(self.b)):
            raise DomainError(f"prior parameters must be positive and finite, got ({self.a}, {self.b})")
        lo, hi = self.support
        if not 0.0 <= lo < hi <= 1.0:
            raise DomainError(f"invalid prior support {self.support}")

    @property
    def is_uniform(self) -> bool:
        return self.a == 1.0 and self.b == 1.0 and self.has_full_support

    @property
    def has_full_support(self) -> bool:
        return tuple(self.support) == (0.0, 1.0)

    def logpdf(self, p):
        p = np.asarray(p, dtype=float)
        out = (self.a - 1) * np.log(p) + (self.b - 1) * np.log1p(-p) - special.betaln(self.a, self.b)
        return np.where((p > 0) & (p < 1), out, -np.inf)

    def sample(self, rng: np.random.Generator) -> float:
        return float(rng.beta(self.a, self.b))

    def require_full_support(self):
        if not self.has_full_support:
            raise DomainError("the samplers need a prior supported on all of (0, 1)")


UNIFORM = PriorSpec()


@dataclass(frozen=True)
class ChainConfig:
    """Run length and seeding for one chain.

    ``iterations`` counts Gibbs+MH pairs; every ``thin``-th pair after
    ``burn_in`` is kept.
    """

    iterations: int = 200_000
    burn_in: int = 20_000
    thin: int = 10
    seed: int = 0
    initial_graph: str = "default"

    def __post_init__(self):
        if self.iterations < 1:
            raise DomainError("iterations must be positive")
        if not 0 <= self.burn_in < self.iterations:
            raise DomainError("burn_in must satisfy 0 <= burn_in < iterations")
        if self.thin < 1:
            raise DomainError("thin must be positive")

    @property
    def n_draws(self) -> int:
        return (self.iterations - self.burn_in) // self.thin

    def with_seed(self, seed: int) -> "ChainConfig":
        return ChainConfig(self.iterations, self.burn_in, self.thin, int(seed), self.initial_graph)


@dataclass
class PosteriorSample:
    """Thinned draws of ``p`` with the graph statistics recorded alongside."""

    draws: np.ndarray
    e_open: np.ndarray
    e_sat: np.ndarray
    w: np.ndarray
    steps: np.ndarray
    meta: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.draws)

    def summary(self) -> dict:
        draws = self.draws
        out = {"n_draws": int(len(draws))}
        if len(draws):
            lo, hi = np.quantile(draws, [0.025, 0.975])
            out.update(mean=float(draws.mean()), sd=float(draws.std(ddof=1)) if len(draws) > 1 else 0.0,
                       ci95_low=float(lo), ci95_high=float(hi))
        if len(draws) >= MIN_MODE_DRAWS:
            mode, bandwidth = kde_mode(draws)
            out.update(mode=mode, mode_bandwidth=bandwidth,
                       mode_at_boundary=bool(mode < 2 * bandwidth or mode > 1 - 2 * bandwidth))
        out.update(self.meta)
        return out

    def to_csv(self, path, comment: str | None = None):
        with open(path, "w", newline="", encoding="ascii") as fh:
            if comment:
                fh.write(f"# {comment}\n")
            fh.write("step,p,e_open,e_sat,w\n")
            for row in zip(self.steps.tolist(), self.draws.tolist(), self.e_open.tolist(),
                           self.e_sat.tolist(), self.w.tolist()):
                fh.write(f"{row[0]},{row[1]:.12g},{row[2]},{row[3]},{row[4]}\n")

    @classmethod
    def from_csv(cls, path) -> "PosteriorSample":
        with open(path, encoding="ascii") as fh:
            rows = [line for line in fh if not line.startswith("#")]
        reader = csv.DictReader(rows)
        data = {k: [] for k in ("step", "p", "e_open", "e_sat", "w")}
        for row in reader:
            for k in data:
                data[k].append(row[k])
        ints = {k: np.array(data[k], dtype=np.int64) for k in ("step", "e_open", "e_sat", "w")}
        return cls(np.array(data["p"], dtype=float), ints["e_open"], ints["e_sat"], ints["w"], ints["step"])

    def write_summary(self, path, extra: dict | None = None):
        record = self.summary()
        if extra:
            record.update(extra)
        Path(path).write_text(json.dumps(record, indent=2, sort_keys=True, default=str) + "\n",
                              encoding="ascii")


@dataclass
class ChainState:
    """Joint state ``(p, G)`` of a chain. The graph is updated in place."""

    p: float
    graph: ClusterGraph
    scenario: str
    step: int = 0
    origin: tuple | None = None


@dataclass
class MixtureTable:
    """Exact posterior as a beta mixture: ``{(s, k, l): count}``.

    Under a ``Beta(a, b)`` prior each entry contributes a
    ``Beta(k + a, s - k + l + b)`` component with weight proportional to
    ``count * B(k + a, s - k + l + b)``.
    """

    entries: dict

    def rows(self) -> list[tuple[int, int, int, int]]:
        return [(s, k, l, c) for (s, k, l), c in sorted(self.entries.items())]

    @property
    def total(self) -> int:
        return int(sum(self.entries.values()))

    def components(self, prior: PriorSpec = UNIFORM):
        keys = sorted(self.entries)
        counts = np.array([self.entries[key] for key in keys], dtype=float)
        alpha = np.array([k + prior.a for _, k, _ in keys])
        beta = np.array([s - k + l + prior.b for s, k, l in keys])
        logw = np.log(counts) + special.betaln(alpha, beta)
        weights = np.exp(logw - logw.max())
        return alpha, beta, weights / weights.sum()

    def cdf(self, x, prior: PriorSpec = UNIFORM):
        alpha, beta, weights = self.components(prior)
        x = np.asarray(x, dtype=float)
        return (weights * special.betainc(alpha, beta, x[..., None])).sum(axis=-1)

    def pdf(self, x, prior: PriorSpec = UNIFORM):
        alpha, beta, weights = self.components(prior)
        x = np.asarray(x, dtype=float)[..., None]
        logpdf = (alpha - 1) * np.log(x) + (beta - 1) * np.log1p(-x) - special.betaln(alpha, beta)
        return (weights * np.exp(logpdf)).sum(axis=-1)

    def mean(self, prior: PriorSpec = UNIFORM) -> float:
        alpha, beta, weights = self.components(prior)
        return float((weights * alpha / (alpha + beta)).sum())

    def to_csv(self, path, comment: str | None = None):
        with open(path, "w", newline="", encoding="ascii") as fh:
            if comment:
                fh.write(f"# {comment}\n")
            fh.write("s,k,l,count\n")
            for row in self.rows():
                fh.write(",".join(map(str, row)) + "\n")


# --- single steps on ClusterGraph ----------------------------------------


def _clamp(p: float) -> float:
    return min(max(p, P_EPS), 1.0 - P_EPS)


def _uniform_index(rng: np.random.Generator, n: int) -> int:
    return min(int(rng.random() * n), n - 1)


def gibbs_beta_params(g: ClusterGraph, prior: PriorSpec = UNIFORM) -> tuple[float, float]:
    """Parameters of the full conditional of ``p`` given the graph."""
    e_open, e_sat, w = g.stats()
    return e_open + prior.a, e_sat - e_open + w + prior.b


def gibbs_step(state: ChainState, rng: np.random.Generator, prior: PriorSpec = UNIFORM) -> ChainState:
    a, b = gibbs_beta_params(state.graph, prior)
    return ChainState(float(rng.beta(a, b)), state.graph, state.scenario, state.step, state.origin)


def mh_edge_step(state: ChainState, rng: np.random.Generator) -> ChainState:
    """One edge-toggle Metropolis-Hastings update at fixed ``p`` (scenario S1).

    An edge of the saturated cluster is chosen uniformly; an open edge is
    removed with probability ``min(1, (1-p)/p)`` provided the graph stays
    connected, a closed one inserted with probability ``min(1, p/(1-p))``.
    Consumes the generator exactly like the compiled S1 kernel.
    """
    if state.scenario != S1:
        raise DomainError("edge moves apply to scenario S1 only")
    g = state.graph
    edges = g.saturated_edges()
    if edges:
        e = edges[_uniform_index(rng, len(edges))]
        u = rng.random()
        pc = _clamp(state.p)
        if e in g.open_edges:
            if u <= (1.0 - pc) / pc and g.is_connected_after_removal(e):
                g.apply_edge_toggle(e, insert=False)
        elif u <= pc / (1.0 - pc):
            g.apply_edge_toggle(e, insert=True)
    return ChainState(state.p, g, S1, state.step + 1, state.origin)


@dataclass
class VertexSwap:
    """A vertex-swap proposal and the quantities entering its acceptance."""

    g_tilde: ClusterGraph
    u: tuple
    v: tuple
    d_tilde_u: int
    d_tilde_v: int
    nu_u: int
    nu_v: int
    kappa: int
    frontier_old_size: int
    frontier_new_size: int


REJECTION_ATTEMPTS = 64


def sample_conditioned_edges(d: int, p: float, rng: np.random.Generator) -> list[int]:
    """Bernoulli(p) inclusion of ``d`` candidates given at least one success.

    Up to 64 plain attempts, then an exact draw: the first included
    candidate from its truncated geometric law, the rest independently.
    """
    for _ in range(REJECTION_ATTEMPTS):
        chosen = [i for i in range(d) if rng.random() < p]
        if chosen:
            return chosen
    lq = math.log1p(-_clamp(p))
    target = rng.random() * -math.expm1(d * lq)
    first = 0
    while first < d - 1 and -math.expm1((first + 1) * lq) < target:
        first += 1
    return [first] + [i for i in range(first + 1, d) if rng.random() < p]


def propose_vertex_swap(g: ClusterGraph, p: float, rng: np.random.Generator,
                        origin=None) -> VertexSwap | None:
    """Draw a vertex-swap proposal; ``None`` means the move is rejected.

    ``u`` is uniform over the vertices and ``v`` over the frontier. Edges
    from ``v`` to the remaining vertices are included independently with
    probability ``p``, conditioned on at least one. Proposals removing the
    origin, with no candidate edge for ``v``, or leaving the graph
    disconnected are rejected.
    """
    if origin is None:
        origin = (0,) * g.plot.dimension
    verts = sorted(g.vertices)
    front = sorted(g.frontier())
    u = verts[_uniform_index(rng, len(verts))]
    if not front:
        return None
    v = front[_uniform_index(rng, len(front))]
    if u == origin:
        return None
    rest = g.vertices - {u}
    cand = [z for z in neighbors(v, g.plot) if z in rest]
    if not cand:
        return None
    d_tilde_u = sum(1 for z in neighbors(u, g.plot) if z in rest)
    if d_tilde_u == 0:
        return None
    chosen = sample_conditioned_edges(len(cand), p, rng)
    g_tilde = g.replace_vertex(u, v, [(v, cand[i]) for i in chosen])
    if not g_tilde.is_connected():
        return None
    front_old = set(front)
    front_new = g_tilde.frontier()
    nu_u = sum(1 for x in neighbors(u, g.plot) if x in front_old)
    nu_v = sum(1 for x in neighbors(v, g.plot) if x in front_new)
    kappa = d_tilde_u - len(cand) + nu_v - nu_u
    return VertexSwap(g_tilde, u, v, d_tilde_u, len(cand), nu_u, nu_v, kappa,
                      len(front_old), len(front_new))


def acceptance_s2(prop: VertexSwap, p: float) -> float:
    """Metropolis-Hastings acceptance probability of a vertex swap.

    ``min(1, |F|/|F~| * (1-(1-p)^dv) / (1-(1-p)^du) * (1-p)^kappa)``,
    evaluated in log space.
    """
    if prop.d_tilde_u <= 0:
        raise DomainError("reverse move impossible: u has no neighbour among the kept vertices")
    if prop.d_tilde_v <= 0:
        raise DomainError("v has no candidate edge")
    lq = math.log1p(-_clamp(p))
    log_alpha = (math.log(prop.frontier_old_size) - math.log(prop.frontier_new_size)
                 + math.log(-math.expm1(prop.d_tilde_v * lq))
                 - math.log(-math.expm1(prop.d_tilde_u * lq))
                 + prop.kappa * lq)
    return math.exp(min(0.0, log_alpha))


def mh_vertex_step(state: ChainState, rng: np.random.Generator) -> ChainState:
    """One vertex-swap Metropolis-Hastings update at fixed ``p`` (scenario S2)."""
    if state.scenario != S2:
        raise DomainError("vertex moves apply to scenario S2 only")
    prop = propose_vertex_swap(state.graph, state.p, rng, state.origin)
    graph = state.graph
    if prop is not None and rng.random() <= acceptance_s2(prop, state.p):
        graph = prop.g_tilde
    return ChainState(state.p, graph, S2, state.step + 1, state.origin)


# --- full chains -----------------------------------------------------------


def _kept_steps(cfg: ChainConfig) -> np.ndarray:
    return cfg.burn_in + cfg.thin * np.arange(1, cfg.n_draws + 1) - 1


def _is_connected(n: int, ea, eb) -> bool:
    if n == 1:
        return True
    graph = coo_matrix((np.ones(len(ea)), (ea, eb)), shape=(n, n))
    return connected_components(graph, directed=False)[0] == 1


def s1_kernel_run(n: int, ea, eb, w: int, cfg: ChainConfig, prior: PriorSpec,
                  rng: np.random.Generator, is_open=None, backend=None):
    """Run the S1 kernel on a local edge list; returns ``(draws, e_open, accepted)``."""
    prior.require_full_support()
    ea = np.ascontiguousarray(ea, dtype=np.int64)
    eb = np.ascontiguousarray(eb, dtype=np.int64)
    state = np.ones(len(ea), dtype=np.uint8) if is_open is None else np.asarray(is_open, dtype=np.uint8).copy()
    draws, e_open, accepted = kernels.s1_chain(
        int(n), ea, eb, state, int(w), float(prior.a), float(prior.b),
        int(cfg.iterations), int(cfg.burn_in), int(cfg.thin), rng.bit_generator, backend=backend)
    return draws, e_open, accepted


def run_s1(cluster_sites, plot: Plot, cfg: ChainConfig = ChainConfig(), prior: PriorSpec = UNIFORM,
           *, backend=None) -> PosteriorSample:
    """Sample ``p`` given the observed vertex set of the cluster.

    The chain starts from the fully saturated cluster.
    """
    sites = sorted(set(map(tuple, cluster_sites)))
    if not sites:
        raise DomainError("empty cluster")
    outside = [s for s in sites if not plot.contains(s)]
    if outside:
        raise DomainError(f"sites {outside[:3]} are not in plot {plot.spec}")
    window = window_for_sites(plot, sites)
    idx = window.index(sites)
    order = np.argsort(idx)
    idx = idx[order]
    ea, eb, w = saturated_edges(window, idx)
    if not _is_connected(len(idx), ea, eb):
        raise DomainError("observed cluster is not connected")
    rng = make_rng(cfg.seed)
    draws, e_open, accepted = s1_kernel_run(len(idx), ea, eb, w, cfg, prior, rng, backend=backend)
    n_draws = len(draws)
    meta = dict(scenario=S1, n_sites=len(idx), e_sat=len(ea), w=w,
                iterations=cfg.iterations, burn_in=cfg.burn_in, thin=cfg.thin, seed=cfg.seed,
                prior_a=prior.a, prior_b=prior.b, plot=plot.spec,
                acceptance_rate=accepted / cfg.iterations, backend=backend or kernels.BACKEND)
    return PosteriorSample(draws, e_open, np.full(n_draws, len(ea), dtype=np.int64),
                           np.full(n_draws, w, dtype=np.int64), _kept_steps(cfg), meta)


def initial_graph_s2(n: int, plot: Plot, origin=None):
    """Starting graph for the S2 chain as ``(sites, edges)``.

    A straight line of ``n`` sites from the origin along the first axis if it
    fits in the plot, else the first ``n`` sites of a breadth-first fill
    with its search-tree edges.
    """
    d = plot.dimension
    if origin is None:
        origin = (0,) * d
    if n < 1:
        raise DomainError(f"cluster size must be positive, got {n}")
    if not plot.contains(origin):
        raise DomainError(f"origin is not a member of plot {plot.spec}")
    line = [(origin[0] + i,) + tuple(origin[1:]) for i in range(n)]
    if all(plot.contains(s) for s in line):
        return line, [(line[i], line[i + 1]) for i in range(n - 1)]
    sites, edges, seen = [origin], [], {origin}
    head = 0
    while len(sites) < n and head < len(sites):
        x = sites[head]
        head += 1
        for y in neighbors(x, plot):
            if y not in seen and len(sites) < n:
                seen.add(y)
                sites.append(y)
                edges.append(canonical_edge(x, y))
    if len(sites) < n:
        raise DomainError(f"plot {plot.spec} has no connected set of {n} sites containing the origin")
    return sites, edges


def _s2_window(n: int, plot: Plot):
    return make_window(plot) if plot.is_finite else make_window(plot, n + 2)


def run_s2(n: int, plot: Plot, cfg: ChainConfig = ChainConfig(), prior: PriorSpec = UNIFORM,
           *, backend=None, return_state: bool = False):
    """Sample ``p`` given only the cluster size ``n``.

    With ``return_state`` the final graph is returned as well, as
    ``(sample, ClusterGraph)``.
    """
    prior.require_full_support()
    sites, edges = initial_graph_s2(n, plot)
    window = _s2_window(n, plot)
    verts = window.index(sites)
    ea = window.index([a for a, _ in edges]) if edges else np.zeros(0, np.int64)
    eb = window.index([b for _, b in edges]) if edges else np.zeros(0, np.int64)
    rng = make_rng(cfg.seed)
    draws, tr_open, tr_sat, tr_w, final_verts, final_bits, accepted = kernels.s2_chain(
        window.mask, window.offsets, window.origin, np.ascontiguousarray(verts),
        np.ascontiguousarray(ea), np.ascontiguousarray(eb), float(prior.a), float(prior.b),
        int(cfg.iterations), int(cfg.burn_in), int(cfg.thin), rng.bit_generator, backend=backend)
    meta = dict(scenario=S2, n_sites=n, iterations=cfg.iterations, burn_in=cfg.burn_in,
                thin=cfg.thin, seed=cfg.seed, prior_a=prior.a, prior_b=prior.b, plot=plot.spec,
                acceptance_rate=accepted / cfg.iterations, backend=backend or kernels.BACKEND)
    sample = PosteriorSample(draws, tr_open, tr_sat, tr_w, _kept_steps(cfg), meta)
    if not return_state:
        return sample
    return sample, _graph_from_bits(window, plot, final_verts, final_bits)


def _graph_from_bits(window, plot, verts, bits) -> ClusterGraph:
    sites = [tuple(s) for s in window.sites(verts).tolist()]
    heads, tails = [], []
    for k in range(1, len(window.offsets), 2):
        sel = (np.asarray(bits) >> k) & 1 == 1
        heads.append(np.asarray(verts)[sel])
        tails.append(np.asarray(verts)[sel] + window.offsets[k])
    a = window.sites(np.concatenate(heads)).tolist()
    b = window.sites(np.concatenate(tails)).tolist()
    return ClusterGraph(sites, [(tuple(x), tuple(y)) for x, y in zip(a, b)], plot, check=False)


# --- exact posteriors --------------------------------------------------------


def exact_posterior_s1(cluster_sites, plot: Plot) -> MixtureTable:
    """Exact S1 mixture ``{(e_sat, k, w): r(k)}`` by enumerating edge subsets."""
    sites = set(map(tuple, cluster_sites))
    n_edges = len(saturate(sites, plot))
    if n_edges > MAX_ENUM_EDGES:
        raise CapacityError(f"saturated cluster has {n_edges} edges; the guard is {MAX_ENUM_EDGES}")
    table = vertex_set_table(sites, plot)
    if not table:
        raise DomainError("observed cluster is not connected")
    return MixtureTable(dict(table))


def exact_posterior_s2(n: int, plot: Plot) -> MixtureTable:
    """Exact S2 mixture ``{(s, k, l): q(s, k, l)}`` over all placements."""
    if n < 1:
        raise DomainError(f"cluster size must be positive, got {n}")
    if n > MAX_ANIMAL_SIZE:
        raise CapacityError(f"n = {n} exceeds the enumeration guard of {MAX_ANIMAL_SIZE}")
    table = size_table(n, plot)
    if not table:
        raise DomainError(f"plot {plot.spec} has no connected set of {n} sites containing the origin")
    return MixtureTable(dict(table))


# --- summaries -----------------------------------------------------------------


def silverman_bandwidth(x: np.ndarray) -> float:
    x = np.asarray(x, dtype=float)
    sd = x.std(ddof=1)
    q75, q25 = np.percentile(x, [75, 25])
    spread = min(sd, (q75 - q25) / 1.34) or sd
    return 0.9 * spread * len(x) ** -0.2


def mode_grid(grid_size: int = MODE_GRID) -> np.ndarray:
    """Midpoint grid on (0, 1) used for KDE modes."""
    return (np.arange(grid_size) + 0.5) / grid_size


def kde_density(draws, bandwidth: float, grid: np.ndarray) -> np.ndarray:
    """Unnormalised Gaussian KDE of ``draws`` evaluated on ``grid``."""
    x = np.asarray(draws, dtype=float)
    density = np.zeros(len(grid))
    for start in range(0, len(x), 4096):
        z = (grid[:, None] - x[None, start:start + 4096]) / bandwidth
        density += np.exp(-0.5 * z * z).sum(axis=1)
    return density


def kde_mode(draws, grid_size: int = MODE_GRID) -> tuple[float, float]:
    """Mode of a Gaussian KDE (Silverman bandwidth) on a midpoint grid over
    (0, 1); returns ``(mode, bandwidth)``."""
    x = np.asarray(draws, dtype=float)
    h = silverman_bandwidth(x)
    grid = mode_grid(grid_size)
    if h <= 0:
        return float(grid[np.abs(grid - x[0]).argmin()]), 0.0
    return float(grid[kde_density(x, h, grid).argmax()]), float(h)


def posterior_mode(sample) -> float:
    """Posterior mode of ``p`` from a KDE of the draws.

    Under the uniform prior this is the maximum likelihood estimate. The
    result lies strictly inside (0, 1); see ``PosteriorSample.summary`` for
    a boundary-proximity flag.
    """
    draws = sample.draws if isinstance(sample, PosteriorSample) else np.asarray(sample)
    if len(draws) < MIN_MODE_DRAWS:
        raise DomainError(f"need at least {MIN_MODE_DRAWS} draws for a mode, got {len(draws)}")
    return kde_mode(draws)[0]


def config_record(cfg: ChainConfig, prior: PriorSpec) -> dict:
    record = asdict(cfg)
    record.update(prior_a=prior.a, prior_b=prior.b)
    return record
