"""Bayesian optimal design over inner-outer plots with a KL utility.

The utility of an observed cluster ``y`` on design ``d`` is the
Kullback-Leibler divergence of the posterior of ``p`` from the prior. The
posterior is sampled with the S1 chain, a beta distribution is fitted by
moments, and the divergence of the fit is computed in closed form (uniform
prior) or by Gauss-Legendre quadrature (beta prior).

Sign convention: against the uniform prior the divergence equals *minus*
the differential entropy of the fitted beta, so it is non-negative and
larger for sharper posteriors.

Two estimators are provided:

* :func:`instructive_utility` and :func:`mc_expected_utility` average the
  utility over clusters simulated at a known ``p*`` or at prior draws.
* :func:`progressive_chain` samples the augmented density
  ``h(d, p, y) ∝ u(d, y) f_d(y | p) π(p)``, whose design marginal is
  proportional to the expected utility.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError
from .grid import make_window, saturated_edges
from .inference import UNIFORM, ChainConfig, PriorSpec, s1_kernel_run
from .lattice import Plot, make_inner_outer
from .percolation import simulate_indices
from .rng import child_seed, make_rng
from .special import beta_entropy_ab, beta_logpdf

MIN_FIT_DRAWS = 100
FIT_FLOOR = 1e-3
QUADRATURE_POINTS = 512
DEFAULT_INNER = ChainConfig(iterations=20_000, burn_in=2_000, thin=10)

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(QUADRATURE_POINTS)
_GL_X = 0.5 * (_GL_NODES + 1.0)
_GL_W = 0.5 * _GL_WEIGHTS


@dataclass(frozen=True, order=True)
class Design:
    """Inner-outer plot ``Π(m, r)`` in two dimensions, of side ``m + 4r``."""

    m: int
    r: int

    def __post_init__(self):
        if self.m < 1 or self.m % 2 == 0:
            raise DomainError(f"m must be a positive odd integer, got {self.m}")
        if self.r < 0:
            raise DomainError(f"r must be non-negative, got {self.r}")

    @property
    def N(self) -> int:
        return self.m + 4 * self.r

    @property
    def plot(self) -> Plot:
        return make_inner_outer(2, self.m, self.r)

    @property
    def label(self) -> str:
        return f"({self.m},{self.r})"


def design_space(N: int) -> list[Design]:
    """All inner-outer designs of side ``N``, by descending ``m``."""
    if N < 1 or N % 2 == 0:
        raise DomainError(f"N must be a positive odd integer, got {N}")
    return [Design(N - 4 * r, r) for r in range((N - 1) // 4 + 1)]


@dataclass(frozen=True)
class BetaParams:
    alpha: float
    beta: float

    def __post_init__(self):
        for name in ("alpha", "beta"):
            value = getattr(self, name)
            if not (value > 0 and math.isfinite(value)):
                raise DomainError(f"{name} must be positive and finite, got {value}")

    @property
    def mean(self) -> float:
        return self.alpha / (self.alpha + self.beta)


def fit_beta(draws) -> BetaParams:
    """Method-of-moments beta fit, with both parameters floored at ``1e-3``."""
    x = np.asarray(draws, dtype=float)
    if x.ndim != 1 or len(x) < MIN_FIT_DRAWS:
        raise DomainError(f"need at least {MIN_FIT_DRAWS} draws to fit a beta distribution")
    if np.any((x <= 0) | (x >= 1)):
        raise DomainError("draws must lie strictly inside (0, 1)")
    mean = x.mean()
    var = x.var(ddof=1)
    if not var > 1e-14 * mean * (1.0 - mean):
        raise DomainError("sample variance is zero; cannot fit a beta distribution")
    common = mean * (1.0 - mean) / var - 1.0
    return BetaParams(max(mean * common, FIT_FLOOR), max((1.0 - mean) * common, FIT_FLOOR))


def beta_entropy(bp: BetaParams) -> float:
    """Differential entropy of ``Beta(alpha, beta)`` in nats."""
    return beta_entropy_ab(bp.alpha, bp.beta)


def kl_posterior_vs_prior(posterior: BetaParams, prior: PriorSpec = UNIFORM) -> float:
    """``D_KL(posterior || prior)`` in nats.

    Closed form ``-entropy`` for the uniform prior; otherwise 512-point
    Gauss-Legendre quadrature of ``f log(f / π)`` over (0, 1).
    """
    if not prior.has_full_support:
        raise DomainError("the prior must be supported on all of (0, 1)")
    if prior.is_uniform:
        return max(0.0, -beta_entropy(posterior))
    logf = beta_logpdf(_GL_X, posterior.alpha, posterior.beta)
    logpi = beta_logpdf(_GL_X, prior.a, prior.b)
    value = float(np.sum(_GL_W * np.exp(logf) * (logf - logpi)))
    return max(0.0, value)


@dataclass
class UtilityEstimate:
    mean: float
    std_error: float | None
    M: int
    per_replicate: np.ndarray | None = field(default=None, repr=False)

    @classmethod
    def from_values(cls, values) -> "UtilityEstimate":
        values = np.asarray(values, dtype=float)
        M = len(values)
        se = float(values.std(ddof=1) / math.sqrt(M)) if M > 1 else None
        return cls(float(values.mean()), se, M, values)

    def interval(self, z: float = 1.96) -> tuple[float, float]:
        if self.std_error is None:
            return (self.mean, self.mean)
        return (self.mean - z * self.std_error, self.mean + z * self.std_error)


# --- utility of a single observation ---------------------------------------


def _cluster_utility(window, idx, chain_cfg: ChainConfig, prior: PriorSpec, rng) -> float:
    ea, eb, w = saturated_edges(window, idx)
    draws, _, _ = s1_kernel_run(len(idx), ea, eb, w, chain_cfg, prior, rng)
    return kl_posterior_vs_prior(fit_beta(draws), prior)


def _replicate(plot: Plot, p: float, chain_cfg, prior, seed, i) -> float:
    rng = make_rng(seed, i)
    window, idx = simulate_indices(plot, p, rng)
    return _cluster_utility(window, idx, chain_cfg, prior, rng)


def _fan_out(fn, M: int, threads: int) -> np.ndarray:
    if threads <= 1:
        return np.array([fn(i) for i in range(M)])
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return np.array(list(pool.map(fn, range(M))))


def instructive_utility(d: Design, p_star: float, M: int, chain_cfg: ChainConfig = DEFAULT_INNER,
                        seed: int = 0, *, prior: PriorSpec = UNIFORM, threads: int = 1) -> UtilityEstimate:
    """Monte Carlo estimate of the expected utility when ``p = p_star`` is known.

    Replicate ``i`` simulates a cluster on ``d`` at ``p_star`` from stream
    ``(seed, i)``, samples its S1 posterior under ``prior`` with the same
    stream, and scores it by the KL divergence of the beta fit.
    """
    if not 0.0 <= p_star <= 1.0:
        raise DomainError(f"p_star must lie in [0, 1], got {p_star}")
    if M < 1:
        raise DomainError("M must be positive")
    plot = d.plot
    make_window(plot)
    values = _fan_out(lambda i: _replicate(plot, p_star, chain_cfg, prior, seed, i), M, threads)
    return UtilityEstimate.from_values(values)


def mc_expected_utility(d: Design, prior: PriorSpec = UNIFORM, M: int = 300,
                        chain_cfg: ChainConfig = DEFAULT_INNER, seed: int = 0, *,
                        sampling_prior: PriorSpec | None = None, threads: int = 1) -> UtilityEstimate:
    """Plain Monte Carlo estimate of the progressive expected utility.

    ``p_i`` is drawn from ``sampling_prior`` (default: ``prior``), a cluster
    is simulated at ``p_i`` and scored against ``prior``. Passing a sharply
    peaked ``sampling_prior`` with a uniform ``prior`` approximates the
    instructive utility.
    """
    if M < 1:
        raise DomainError("M must be positive")
    sampler = prior if sampling_prior is None else sampling_prior
    plot = d.plot
    make_window(plot)

    def one(i):
        rng = make_rng(seed, i)
        p = sampler.sample(rng)
        window, idx = simulate_indices(plot, p, rng)
        return _cluster_utility(window, idx, chain_cfg, prior, rng)

    return UtilityEstimate.from_values(_fan_out(one, M, threads))


# --- progressive design by augmented sampling ------------------------------


@dataclass(frozen=True)
class ProgressiveConfig:
    """Outer chain settings for :func:`progressive_chain`."""

    iterations: int = 5_000
    burn_in: int = 500
    sigma: float = 0.05
    utility_floor: float = 1e-3
    utility_cap: float = 20.0
    inner: ChainConfig = DEFAULT_INNER

    def __post_init__(self):
        if self.iterations < 1 or not 0 <= self.burn_in < self.iterations:
            raise DomainError("need iterations >= 1 and 0 <= burn_in < iterations")
        if not self.sigma > 0:
            raise DomainError("sigma must be positive")
        if not self.utility_floor > 0:
            raise DomainError("utility_floor must be positive")
        if not self.utility_cap > self.utility_floor:
            raise DomainError("utility_cap must exceed utility_floor")


@dataclass
class ProgressiveResult:
    designs: list
    counts: np.ndarray
    acceptance_rate: float
    p_trace: np.ndarray = field(repr=False)
    d_trace: np.ndarray = field(repr=False)

    @property
    def frequencies(self) -> np.ndarray:
        return self.counts / self.counts.sum()

    @property
    def mode(self) -> Design:
        """Most visited design; ties go to the smaller ``r``."""
        best = max(range(len(self.designs)),
                   key=lambda i: (self.counts[i], -self.designs[i].r))
        return self.designs[best]

    def histogram(self) -> list[tuple[Design, float]]:
        return list(zip(self.designs, self.frequencies.tolist()))


def _reflect(x: float) -> float:
    """Fold ``x`` into (0, 1) by reflection at both ends."""
    x = math.fmod(abs(x), 2.0)
    return 2.0 - x if x > 1.0 else x


def _neighbours(k: int, n: int) -> list[int]:
    if n == 1:
        return [0]
    if k == 0:
        return [1]
    if k == n - 1:
        return [n - 2]
    return [k - 1, k + 1]


def progressive_chain(designs, cfg: ProgressiveConfig = ProgressiveConfig(), seed: int = 0, *,
                      prior: PriorSpec = UNIFORM) -> ProgressiveResult:
    """Metropolis-Hastings sampler of ``h(d, p, y) ∝ u(d, y) f_d(y | p) π(p)``.

    A move proposes a neighbouring design in list order (end points step
    inwards), a reflected Gaussian step for ``p`` and a fresh cluster
    ``y' ~ f_d'(. | p')``. Because ``y'`` is drawn from the likelihood, the
    acceptance ratio reduces to ``u' π(p') q(d | d') / (u π(p) q(d' | d))``.
    ``u`` is the KL utility clipped to ``[utility_floor, utility_cap]``;
    utilities are cached per (design, cluster) within a run.
    """
    designs = list(designs)
    if not designs:
        raise DomainError("the design list is empty")
    prior.require_full_support()
    rng = make_rng(seed)
    n = len(designs)
    plots = [d.plot for d in designs]
    cache: dict = {}

    def utility(k: int, p: float) -> float:
        window, idx = simulate_indices(plots[k], p, rng)
        key = (plots[k], idx.tobytes())
        if key not in cache:
            inner_rng = make_rng(child_seed(rng))
            raw = _cluster_utility(window, idx, cfg.inner, prior, inner_rng)
            cache[key] = min(max(raw, cfg.utility_floor), cfg.utility_cap)
        return cache[key]

    def log_prior(p: float) -> float:
        return 0.0 if prior.is_uniform else float(prior.logpdf(p))

    k = int(rng.integers(n))
    p = prior.sample(rng)
    u = utility(k, p)
    counts = np.zeros(n, dtype=np.int64)
    p_trace = np.empty(cfg.iterations - cfg.burn_in)
    d_trace = np.empty(cfg.iterations - cfg.burn_in, dtype=np.int64)
    accepted = 0
    for t in range(cfg.iterations):
        fwd = _neighbours(k, n)
        k_new = fwd[int(rng.integers(len(fwd)))]
        back = _neighbours(k_new, n)
        p_new = _reflect(p + cfg.sigma * rng.standard_normal())
        if 0.0 < p_new < 1.0:
            u_new = utility(k_new, p_new)
            log_ratio = (math.log(u_new) - math.log(u) + log_prior(p_new) - log_prior(p)
                         + math.log(len(fwd)) - math.log(len(back)))
            if math.log(rng.random() + 1e-300) <= log_ratio:
                k, p, u = k_new, p_new, u_new
                accepted += 1
        if t >= cfg.burn_in:
            counts[k] += 1
            p_trace[t - cfg.burn_in] = p
            d_trace[t - cfg.burn_in] = k
    return ProgressiveResult(designs, counts, accepted / cfg.iterations, p_trace, d_trace)


DESIGN_LABELS = {Design(3, 2): "A", Design(7, 1): "B", Design(11, 0): "C"}
