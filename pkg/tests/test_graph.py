import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from edgeavg.errors import ConstructionError, ParameterError
from edgeavg.graph import (Graph, Lattice, VertexSet, ball, build_graph, complete, cycle, in_ball,
                           lattice_window_1d, lattice_window_2d, path, torus)


def test_cycle3_edges_and_degrees():
    g = cycle(3)
    assert g.vertex_count == 3
    assert [tuple(e) for e in g.edges] == [(0, 1), (1, 2), (2, 0)]
    assert list(g.degrees) == [2, 2, 2]


def test_torus_100_shape():
    g = torus(100, 100)
    assert g.vertex_count == 10_000
    assert g.edge_count == 20_000
    assert np.all(g.degrees == 4)


def test_cycle2_rejected_with_message():
    with pytest.raises(ConstructionError, match="cycle requires n ≥ 3"):
        cycle(2)


@pytest.mark.parametrize("build, arg", [(path, 1), (complete, 1), (lattice_window_1d, 0), (lattice_window_2d, 0)])
def test_minimum_sizes(build, arg):
    with pytest.raises(ConstructionError):
        build(arg)


def test_torus_minimum_names_parameter():
    with pytest.raises(ConstructionError, match="h ≥ 3"):
        torus(5, 2)
    with pytest.raises(ConstructionError, match="w ≥ 3"):
        torus(2, 5)


def test_graph_rejects_bad_edge_lists():
    with pytest.raises(ConstructionError, match="self-loops"):
        Graph(2, np.array([[0, 0], [0, 1]]), "path")
    with pytest.raises(ConstructionError, match="parallel"):
        Graph(2, np.array([[0, 1], [1, 0]]), "path")
    with pytest.raises(ConstructionError, match="connected"):
        Graph(4, np.array([[0, 1], [2, 3]]), "path")


def test_adjacency_consistent_with_edges():
    for g in (cycle(7), torus(4, 3), complete(5), lattice_window_2d(2)):
        seen = np.zeros(g.edge_count, dtype=int)
        for v, lst in enumerate(g.adjacency):
            for w, e in lst:
                assert {v, w} == set(g.edges[e].tolist())
                seen[e] += 1
        assert np.all(seen == 2)


def test_graph_is_read_only():
    g = cycle(5)
    with pytest.raises(ValueError):
        g.edges[0, 0] = 3


def test_ball_examples():
    assert ball(cycle(10), 0, 1).vertices == (0,)
    assert set(ball(cycle(10), 0, 3)) == {8, 9, 0, 1, 2}
    assert len(ball(path(2), 0, 0)) == 0


def _all_pairs(g):
    n = g.vertex_count
    d = np.full((n, n), np.inf)
    np.fill_diagonal(d, 0)
    for u, v in g.edges:
        d[u, v] = d[v, u] = 1
    for k in range(n):
        d = np.minimum(d, d[:, [k]] + d[[k], :])
    return d


@pytest.mark.parametrize("g", [cycle(11), path(9), torus(5, 4), complete(6), lattice_window_2d(2)])
def test_bfs_matches_floyd_warshall(g):
    d = _all_pairs(g)
    for c in range(g.vertex_count):
        assert np.array_equal(g.distances_from(c), d[c].astype(int))


@settings(max_examples=40, deadline=None)
@given(n=st.integers(3, 40), c=st.integers(0, 39), r1=st.floats(0, 30), r2=st.floats(0, 30))
def test_ball_monotone_and_saturates(n, c, r1, r2):
    g = cycle(n)
    c = c % n
    lo, hi = sorted((r1, r2))
    assert set(ball(g, c, lo)) <= set(ball(g, c, hi))
    assert len(ball(g, c, n)) == n


def test_ball_on_z_and_in_ball():
    assert ball(Lattice(1), 0, 3).vertices == (-2, -1, 0, 1, 2)
    assert ball(Lattice(1), 5, 0.5).vertices == (5,)
    assert len(ball(Lattice(1), 0, 0)) == 0
    mask = in_ball(Lattice(2), [(0, 0), (1, 1), (2, 0), (0, 3)], (0, 0), 2.5)
    assert mask.tolist() == [True, True, True, False]


def test_ball_range_checks():
    with pytest.raises(ParameterError):
        ball(cycle(5), 7, 1)
    with pytest.raises(ParameterError):
        ball(cycle(5), 0, -1)


def test_window_layouts():
    g = lattice_window_1d(3)
    assert g.vertex_count == 7 and g.edge_count == 6
    g2 = lattice_window_2d(1)
    assert g2.vertex_count == 9 and g2.edge_count == 12
    # interior vertex of the 3x3 grid is index 4 with degree 4
    assert g2.degree(4) == 4 and g2.degree(0) == 2


def test_torus_index_layout():
    g = torus(4, 3)
    # vertex (x=3, y=1) has index 7; right neighbour wraps to (0, 1) = 4
    assert 4 in g.neighbors(7).tolist()
    assert g.column_of(7) == 3


def test_build_graph_dispatch():
    assert build_graph("cycle", n=5).kind == "cycle"
    assert build_graph("torus", w=3, h=4).shape == (3, 4)
    assert isinstance(build_graph("lattice_2d"), Lattice)
    with pytest.raises(ConstructionError, match="requires parameter n"):
        build_graph("path")
    with pytest.raises(ConstructionError, match="unknown"):
        build_graph("hypercube", n=3)


def test_vertex_set_must_increase():
    with pytest.raises(ParameterError):
        VertexSet((3, 1))
    assert 2 in VertexSet((1, 2, 5))


def test_lattice_neighbors_and_distance():
    z2 = Lattice(2)
    assert set(z2.neighbors((0, 0))) == {(1, 0), (-1, 0), (0, 1), (0, -1)}
    assert z2.degree() == 4
    assert int(z2.distance(np.array([3, -4]), (0, 0))) == 7
    with pytest.raises(ConstructionError):
        Lattice(3)


def test_complete_graph_edge_count():
    for n in range(2, 8):
        g = complete(n)
        assert g.edge_count == n * (n - 1) // 2
        assert {tuple(sorted(e)) for e in g.edges.tolist()} == set(itertools.combinations(range(n), 2))
