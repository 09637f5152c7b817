import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import integrate, stats

from bondperc.cluster_graph import ClusterGraph
from bondperc.errors import CapacityError, DomainError
from bondperc.inference import (
    S1,
    S2,
    ChainConfig,
    ChainState,
    MixtureTable,
    PosteriorSample,
    PriorSpec,
    VertexSwap,
    acceptance_s2,
    exact_posterior_s1,
    exact_posterior_s2,
    gibbs_beta_params,
    gibbs_step,
    initial_graph_s2,
    mh_edge_step,
    mh_vertex_step,
    posterior_mode,
    propose_vertex_swap,
    run_s1,
    run_s2,
    sample_conditioned_edges,
)
from bondperc.lattice import full_lattice, make_box, make_inner_outer
from bondperc.rng import make_rng

Z2 = full_lattice(2)
SHORT = ChainConfig(iterations=40_000, burn_in=4_000, thin=4, seed=3)


def ks_to(mixture, draws):
    return stats.kstest(draws, lambda x: mixture.cdf(x)).statistic


class TestConfig:
    def test_defaults(self):
        cfg = ChainConfig()
        assert (cfg.iterations, cfg.burn_in, cfg.thin) == (200_000, 20_000, 10)
        assert cfg.n_draws == 18_000

    @pytest.mark.parametrize("kw", [dict(iterations=0), dict(iterations=10, burn_in=10),
                                    dict(burn_in=-1), dict(thin=0)])
    def test_invalid(self, kw):
        with pytest.raises(DomainError):
            ChainConfig(**kw)

    @pytest.mark.parametrize("a,b,support", [(0, 1, (0, 1)), (1, -2, (0, 1)), (1, 1, (0.5, 0.2))])
    def test_invalid_prior(self, a, b, support):
        with pytest.raises(DomainError):
            PriorSpec(a, b, support)

    def test_restricted_support_rejected_by_sampler(self):
        with pytest.raises(DomainError):
            run_s1([(0, 0)], Z2, SHORT, PriorSpec(support=(0.2, 0.8)))


def test_single_site_posterior_is_beta_1_5():
    sample = run_s1([(0, 0)], Z2, SHORT)
    assert stats.kstest(sample.draws, stats.beta(1, 5).cdf).statistic < 0.02
    assert np.all(sample.e_open == 0)


def test_two_site_mean():
    sample = run_s1([(0, 0), (1, 0)], Z2, SHORT)
    assert sample.draws.mean() == pytest.approx(2 / 9, abs=0.01)


def test_beta_prior_shifts_posterior():
    prior = PriorSpec(3.0, 2.0)
    sample = run_s1([(0, 0), (1, 0)], Z2, SHORT, prior)
    # Beta(2 + 3 - 1, 7 + 2 - 1)
    assert sample.draws.mean() == pytest.approx(4 / 12, abs=0.01)
    exact = exact_posterior_s1([(0, 0), (1, 0)], Z2)
    assert exact.mean(prior) == pytest.approx(4 / 12)


def test_steps_column_and_csv_round_trip(tmp_path):
    cfg = ChainConfig(1000, 100, 7, seed=1)
    sample = run_s1([(0, 0), (0, 1)], Z2, cfg)
    assert len(sample) == cfg.n_draws
    assert sample.steps[0] == 106 and np.all(np.diff(sample.steps) == 7)
    path = tmp_path / "s.csv"
    sample.to_csv(path, comment="hello")
    assert path.read_text().startswith("# hello\nstep,p,e_open,e_sat,w\n")
    back = PosteriorSample.from_csv(path)
    assert np.allclose(back.draws, sample.draws, rtol=1e-11)
    assert np.array_equal(back.e_open, sample.e_open)


def test_run_s1_rejects_bad_clusters():
    with pytest.raises(DomainError):
        run_s1([(0, 0), (2, 0)], Z2, SHORT)
    with pytest.raises(DomainError):
        run_s1([], Z2, SHORT)
    with pytest.raises(DomainError):
        run_s1([(0, 0), (9, 0)], make_box(2, 5), SHORT)


def test_run_s1_deterministic(backend):
    sites = [(0, 0), (1, 0), (1, 1), (2, 1), (2, 0)]
    a = run_s1(sites, Z2, SHORT, backend=backend)
    b = run_s1(sites, Z2, SHORT, backend=backend)
    assert np.array_equal(a.draws, b.draws)


def test_step_functions_follow_kernel_stream():
    """gibbs_step + mh_edge_step replay the kernel chain draw for draw."""
    sites = [(0, 0), (0, 1), (1, 0), (1, 1), (2, 0)]
    cfg = ChainConfig(300, 0, 1, seed=9)
    sample = run_s1(sites, Z2, cfg)
    rng = make_rng(9)
    state = ChainState(0.5, ClusterGraph(sites), S1)
    draws, opens = [], []
    for _ in range(cfg.iterations):
        state = mh_edge_step(gibbs_step(state, rng), rng)
        draws.append(state.p)
        opens.append(state.graph.e_open)
    assert np.array_equal(sample.draws, draws)
    assert np.array_equal(sample.e_open, opens)


def test_gibbs_parameters():
    g = ClusterGraph([(0, 0), (1, 0)])
    assert gibbs_beta_params(g) == (2.0, 7.0)
    assert gibbs_beta_params(g, PriorSpec(2, 3)) == (3.0, 9.0)


def test_edge_step_requires_s1_state():
    state = ChainState(0.5, ClusterGraph([(0, 0)]), S2)
    with pytest.raises(DomainError):
        mh_edge_step(state, make_rng(0))
    with pytest.raises(DomainError):
        mh_vertex_step(ChainState(0.5, ClusterGraph([(0, 0)]), S1), make_rng(0))


class TestExact:
    def test_two_site_is_beta_2_7(self):
        mix = exact_posterior_s1([(0, 0), (1, 0)], Z2)
        assert mix.rows() == [(1, 1, 6, 1)]
        x = np.linspace(0.01, 0.99, 25)
        assert np.allclose(mix.cdf(x), stats.beta(2, 7).cdf(x))

    def test_weights_include_beta_function(self):
        mix = MixtureTable({(4, 3, 8): 4, (4, 4, 8): 1})
        direct = integrate.quad(lambda p: 4 * p**3 * (1 - p)**9 + p**4 * (1 - p)**8, 0, 1)[0]
        mean = integrate.quad(lambda p: p * (4 * p**3 * (1 - p)**9 + p**4 * (1 - p)**8), 0, 1)[0] / direct
        assert mix.mean() == pytest.approx(mean, rel=1e-10)
        assert integrate.quad(mix.pdf, 0, 1)[0] == pytest.approx(1.0, abs=1e-9)

    @given(st.lists(st.tuples(st.integers(1, 8), st.integers(0, 8), st.integers(0, 8), st.integers(1, 50)),
                    min_size=1, max_size=5))
    def test_mixture_cdf_is_a_cdf(self, rows):
        entries = {}
        for s, k, l, c in rows:
            entries[(s, min(k, s), l)] = c
        mix = MixtureTable(entries)
        x = np.linspace(0, 1, 41)
        c = mix.cdf(x)
        assert c[0] == pytest.approx(0, abs=1e-12) and c[-1] == pytest.approx(1)
        assert np.all(np.diff(c) >= -1e-12)

    def test_s2_guards(self):
        with pytest.raises(CapacityError):
            exact_posterior_s2(7, Z2)
        with pytest.raises(DomainError):
            exact_posterior_s2(0, Z2)
        with pytest.raises(DomainError):
            exact_posterior_s2(4, make_box(2, 1))

    def test_s1_guard(self):
        big = [(x, y) for x in range(4) for y in range(4)]
        with pytest.raises(CapacityError):
            exact_posterior_s1(big, Z2)

    def test_s2_n1(self):
        assert exact_posterior_s2(1, Z2).mean() == pytest.approx(1 / 6)


class TestS2:
    def test_n1_matches_beta_1_5(self):
        sample = run_s2(1, Z2, SHORT)
        assert stats.kstest(sample.draws, stats.beta(1, 5).cdf).statistic < 0.02

    @pytest.mark.parametrize("n", [2, 3])
    def test_small_n_against_exact(self, n):
        sample = run_s2(n, Z2, ChainConfig(200_000, 20_000, 10, seed=n))
        assert ks_to(exact_posterior_s2(n, Z2), sample.draws) < 0.03

    def test_finite_plot(self):
        plot = make_inner_outer(2, 3, 1)
        sample, g = run_s2(4, plot, ChainConfig(100_000, 10_000, 10, seed=2), return_state=True)
        assert ks_to(exact_posterior_s2(4, plot), sample.draws) < 0.03
        assert len(g) == 4 and g.is_connected() and (0, 0) in g.vertices
        assert all(plot.contains(v) for v in g.vertices)

    def test_final_graph_consistent(self):
        sample, g = run_s2(15, Z2, ChainConfig(5000, 100, 1, seed=4), return_state=True)
        assert len(g) == 15 and g.is_connected() and (0, 0) in g.vertices
        assert g.stats() == (sample.e_open[-1], sample.e_sat[-1], sample.w[-1])

    def test_impossible_sizes(self):
        with pytest.raises(DomainError):
            run_s2(0, Z2, SHORT)
        with pytest.raises(DomainError):
            run_s2(10, make_box(2, 3), SHORT)

    def test_initial_graph(self):
        sites, edges = initial_graph_s2(4, Z2)
        assert sites == [(0, 0), (1, 0), (2, 0), (3, 0)] and len(edges) == 3
        sites, edges = initial_graph_s2(9, make_box(2, 3))
        assert len(set(sites)) == 9 and len(edges) == 8

    def test_python_level_vertex_moves(self):
        """The ClusterGraph-level sampler targets the same posterior."""
        rng = make_rng(5)
        state = ChainState(0.5, ClusterGraph([(0, 0), (1, 0), (2, 0)]), S2, origin=(0, 0))
        draws = []
        for t in range(12_000):
            state = mh_vertex_step(gibbs_step(state, rng), rng)
            if t >= 1000 and t % 2 == 0:
                draws.append(state.p)
        assert ks_to(exact_posterior_s2(3, Z2), np.array(draws)) < 0.05


@given(st.integers(1, 4), st.floats(1e-6, 1 - 1e-6), st.integers(0, 2**31))
def test_conditioned_edges_nonempty(d, p, seed):
    chosen = sample_conditioned_edges(d, p, make_rng(seed))
    assert chosen and chosen == sorted(set(chosen)) and max(chosen) < d


def test_conditioned_edges_distribution():
    rng = make_rng(1)
    p, d = 0.3, 3
    counts = np.zeros(d)
    reps = 40_000
    for _ in range(reps):
        for i in sample_conditioned_edges(d, p, rng):
            counts[i] += 1
    assert np.allclose(counts / reps, p / (1 - (1 - p) ** d), atol=0.01)


def test_conditioned_edges_tiny_p_uses_exact_branch():
    rng = make_rng(2)
    firsts = [sample_conditioned_edges(3, 1e-9, rng)[0] for _ in range(3000)]
    assert np.allclose(np.bincount(firsts, minlength=3) / 3000, 1 / 3, atol=0.04)


@given(st.integers(0, 2**31), st.floats(0.05, 0.95))
def test_swap_proposals(seed, p):
    g = ClusterGraph([(0, 0), (1, 0), (1, 1), (2, 1)])
    prop = propose_vertex_swap(g, p, make_rng(seed))
    if prop is None:
        return
    assert prop.u != (0, 0)
    assert prop.g_tilde.is_connected() and len(prop.g_tilde) == 4
    assert prop.g_tilde.stats() == prop.g_tilde.recomputed_stats()
    assert 0.0 <= acceptance_s2(prop, p) <= 1.0


def test_acceptance_requires_reverse_move():
    g = ClusterGraph([(0, 0), (1, 0)])
    prop = VertexSwap(g, (1, 0), (0, 1), 0, 1, 0, 0, 0, 6, 6)
    with pytest.raises(DomainError):
        acceptance_s2(prop, 0.5)


def test_posterior_mode():
    draws = make_rng(0).beta(3, 5, size=20_000)
    assert posterior_mode(draws) == pytest.approx(2 / 6, abs=0.02)
    with pytest.raises(DomainError):
        posterior_mode(draws[:999])
    summary = PosteriorSample(draws, *(np.zeros(len(draws), int) for _ in range(4))).summary()
    assert not summary["mode_at_boundary"]
    assert summary["ci95_low"] < summary["mean"] < summary["ci95_high"]
