import math

import pytest
from hypothesis import given, strategies as st

from bondperc.cluster_graph import ClusterGraph
from bondperc.errors import DomainError
from bondperc.lattice import full_lattice, make_box
from bondperc.percolation import simulate_cluster

Z2 = full_lattice(2)
BLOCK = [(0, 0), (0, 1), (1, 0), (1, 1)]


def test_saturated_block_stats():
    g = ClusterGraph(BLOCK)
    assert g.stats() == (4, 4, 8)
    assert g.is_connected()


def test_disconnected_rejected():
    with pytest.raises(DomainError):
        ClusterGraph([(0, 0), (2, 0)])
    with pytest.raises(DomainError):
        ClusterGraph([(0, 0), (1, 0)], open_edges=[])


def test_edge_outside_saturation_rejected():
    with pytest.raises(DomainError):
        ClusterGraph([(0, 0), (1, 0)], open_edges=[((0, 0), (0, 1))])


def test_sites_outside_plot_rejected():
    with pytest.raises(DomainError):
        ClusterGraph([(0, 0), (2, 0), (1, 0)], plot=make_box(2, 3))


def test_log_prob_single_site():
    g = ClusterGraph([(0, 0)])
    assert g.log_prob(0.3) == pytest.approx(4 * math.log(0.7))


def test_bridge_cannot_be_removed():
    g = ClusterGraph([(0, 0), (1, 0), (2, 0)])
    e = ((0, 0), (1, 0))
    assert not g.is_connected_after_removal(e)
    with pytest.raises(DomainError):
        g.apply_edge_toggle(e, insert=False)


def test_toggle_round_trip_on_cycle():
    g = ClusterGraph(BLOCK)
    e = ((0, 0), (0, 1))
    assert g.is_connected_after_removal(e)
    g.apply_edge_toggle(e, insert=False)
    assert g.stats() == (3, 4, 8)
    with pytest.raises(DomainError):
        g.is_connected_after_removal(e)
    g.apply_edge_toggle(e, insert=True)
    assert g == ClusterGraph(BLOCK)
    with pytest.raises(DomainError):
        g.apply_edge_toggle(e, insert=True)


def test_replace_vertex():
    g = ClusterGraph([(0, 0), (1, 0), (2, 0)])
    h = g.replace_vertex((2, 0), (1, 1), [((1, 0), (1, 1))])
    assert h.vertices == {(0, 0), (1, 0), (1, 1)}
    assert h.is_connected()
    assert h.stats() == h.recomputed_stats()
    with pytest.raises(DomainError):
        g.replace_vertex((2, 0), (1, 1), [])
    with pytest.raises(DomainError):
        g.replace_vertex((2, 0), (5, 5), [((5, 5), (1, 0))])
    with pytest.raises(DomainError):
        g.replace_vertex((2, 0), (2, 1), [((2, 0), (2, 1))])


@given(st.integers(0, 10_000), st.floats(0.3, 0.6), st.data())
def test_random_toggles_keep_invariants(seed, p, data):
    g = simulate_cluster(Z2, p, seed=seed)
    if not g or len(g) > 200:
        return
    edges = g.saturated_edges()
    if not edges:
        return
    for _ in range(20):
        e = edges[data.draw(st.integers(0, len(edges) - 1))]
        if e in g.open_edges:
            if g.is_connected_after_removal(e):
                g.apply_edge_toggle(e, insert=False)
        else:
            g.apply_edge_toggle(e, insert=True)
        assert g.is_connected()
        assert g.stats() == g.recomputed_stats()
        assert len(g) - 1 <= g.e_open <= g.e_sat


def test_copy_is_independent():
    g = ClusterGraph(BLOCK)
    h = g.copy()
    h.apply_edge_toggle(((0, 0), (0, 1)), insert=False)
    assert g.e_open == 4 and h.e_open == 3
