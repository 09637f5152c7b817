import itertools

import pytest
from hypothesis import given, strategies as st

from bondperc.errors import DomainError
from bondperc.lattice import (
    boundary_edge_count,
    canonical_edge,
    degree,
    full_lattice,
    inner_outer_node_count,
    make_box,
    make_inner_outer,
    neighbors,
    node_count,
    parse_plot_spec,
    removal_radii,
    saturate,
    surface_and_frontier,
)

Z2 = full_lattice(2)
sites2 = st.tuples(st.integers(-6, 6), st.integers(-6, 6))


def brute_inner_outer(m, r):
    """Box of side m + 4r minus the even-parity sites on the thinned rings."""
    h = (m - 1) // 2 + 2 * r
    rings = {(m - 1) // 2 + 2 * j + 1 for j in range(r)}
    out = set()
    for x, y in itertools.product(range(-h, h + 1), repeat=2):
        if max(abs(x), abs(y)) in rings and (x + y) % 2 == 0:
            continue
        out.add((x, y))
    return out


@pytest.mark.parametrize("m,r,expected", [(9, 3, 357), (7, 1, 105), (3, 2, 97), (11, 0, 121), (1, 0, 1)])
def test_inner_outer_counts(m, r, expected):
    assert node_count(make_inner_outer(2, m, r)) == expected
    assert inner_outer_node_count(m, r) == expected


@pytest.mark.parametrize("m,r", [(m, r) for r in range(0, 6) for m in range(1, 22, 2)])
def test_inner_outer_matches_brute_force(m, r):
    plot = make_inner_outer(2, m, r)
    assert set(plot.sites()) == brute_inner_outer(m, r)
    assert plot.N == m + 4 * r


def test_removal_radii_alternate():
    assert removal_radii(7, 1) == (4,)
    assert removal_radii(3, 2) == (2, 4)
    assert removal_radii(5, 0) == ()


def test_origin_kept_and_inner_block_intact():
    plot = make_inner_outer(2, 3, 2)
    assert plot.contains((0, 0))
    assert all(plot.contains((x, y)) for x in (-1, 0, 1) for y in (-1, 0, 1))
    assert not plot.contains((2, 0))
    assert plot.contains((2, 1))
    assert not plot.contains((6, 0))


@pytest.mark.parametrize("spec", ["full:2", "full:3", "box:2,5", "box:3,7", "inner-outer:2,7,1"])
def test_spec_round_trip(spec):
    assert parse_plot_spec(spec).spec == spec


@pytest.mark.parametrize("spec", ["", "box:2", "box:2,4", "torus:2", "inner-outer:2,4,1", "full:0", "box:2,5,1"])
def test_bad_specs(spec):
    with pytest.raises(DomainError):
        parse_plot_spec(spec)


def test_full_lattice_has_no_node_count():
    with pytest.raises(DomainError):
        node_count(Z2)


def test_neighbors_order_and_membership():
    assert neighbors((0, 0), Z2) == [(-1, 0), (1, 0), (0, -1), (0, 1)]
    box = make_box(2, 3)
    assert neighbors((1, 1), box) == [(0, 1), (1, 0)]
    with pytest.raises(DomainError):
        neighbors((2, 0), box)


@given(sites2)
def test_degree_on_full_lattice(s):
    assert degree(s, Z2) == 4
    assert all(sum(abs(a - b) for a, b in zip(s, t)) == 1 for t in neighbors(s, Z2))


@given(st.sets(sites2, min_size=1, max_size=25))
def test_handshake_identity(verts):
    # every vertex has 4 incident lattice edges: internal ones counted twice
    assert 4 * len(verts) == 2 * len(saturate(verts, Z2)) + boundary_edge_count(verts, Z2)


@given(st.sets(sites2, min_size=1, max_size=25))
def test_surface_and_frontier(verts):
    surface, frontier = surface_and_frontier(verts, Z2)
    assert surface <= verts
    assert not (frontier & verts)
    for f in frontier:
        assert any(t in verts for t in neighbors(f, Z2))
    for s in verts:
        assert (s in surface) == any(t not in verts for t in neighbors(s, Z2))


@given(sites2, sites2)
def test_canonical_edge_symmetric(a, b):
    assert canonical_edge(a, b) == canonical_edge(b, a)
    lo, hi = canonical_edge(a, b)
    assert lo <= hi


@given(st.integers(0, 4), st.sampled_from([1, 3, 5, 7, 9]))
def test_membership_agrees_with_contains(r, m):
    import numpy as np

    plot = make_inner_outer(2, m, r)
    h = plot.half_width + 1
    coords = np.array(list(itertools.product(range(-h, h + 1), repeat=2)))
    mask = plot.membership(coords)
    assert [bool(v) for v in mask] == [plot.contains(tuple(c)) for c in coords.tolist()]
