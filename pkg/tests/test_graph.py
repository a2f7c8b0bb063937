import itertools

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import path, star, triangle
from regae.datasets import grid_graph
from regae.graph import (CanonicalGraph, Graph, canonical_order, extract_window_subgraph, graphs_isomorphic_by,
                         permute_graph, to_patch_grid)


@st.composite
def graphs(draw, max_n=12):
    n = draw(st.integers(1, max_n))
    pairs = list(itertools.combinations(range(n), 2))
    chosen = draw(st.lists(st.sampled_from(pairs), unique=True)) if pairs else []
    return Graph(n, frozenset(chosen))


def test_graph_rejects_self_loop_and_out_of_range():
    with pytest.raises(ValueError):
        Graph(3, frozenset({(1, 1)}))
    with pytest.raises(ValueError):
        Graph(3, frozenset({(0, 3)}))


def test_graph_normalizes_orientation():
    assert Graph(3, frozenset({(2, 0), (0, 2)})).edges == {(0, 2)}


def test_star_center_first():
    g = star(4).relabel([3, 0, 1, 2, 4])  # center now 3
    assert canonical_order(g).order[0] == 3


def test_single_vertex():
    assert canonical_order(Graph(1)).order == (0,)


def test_empty_graph_ordering():
    assert canonical_order(Graph(0)).order == ()


def test_path_order_hand_simulated():
    # degrees 1,2,2,2,1 -> start at 1; neighbours of 1 by (deg desc, index): 2 then 0
    # queue [2, 0] -> visit 2, enqueue 3 -> visit 0 -> visit 3, enqueue 4 -> visit 4
    assert canonical_order(path(5)).order == (1, 2, 0, 3, 4)


def test_disconnected_restart_from_best_unvisited():
    # component {0,1} and star centred at 4 with leaves 2,3,5
    g = Graph(6, frozenset({(0, 1), (4, 2), (4, 3), (4, 5)}))
    assert canonical_order(g).order == (4, 2, 3, 5, 0, 1)


@given(graphs())
def test_canonical_order_invariants(g):
    cg = canonical_order(g)
    assert sorted(cg.order) == list(range(g.n))
    deg = g.degrees()
    assert deg[cg.order[0]] == deg.max()
    position = np.empty(g.n, dtype=int)
    position[list(cg.order)] = np.arange(g.n)
    assert graphs_isomorphic_by(g, cg.graph, position)


def test_permute_identity_keeps_edges():
    g = grid_graph(2, 3)
    assert g.relabel(range(g.n)).edges == g.edges


@given(graphs(), st.integers(0, 2**32 - 1))
def test_permute_preserves_degrees_and_canonical_isomorphism(g, seed):
    h = permute_graph(g, seed)
    assert sorted(h.degrees()) == sorted(g.degrees())
    assert h.num_edges == g.num_edges
    cg, ch = canonical_order(g), canonical_order(h)
    # canonical(g)[k] -> g vertex -> h vertex (via the same permutation) -> canonical(h) position
    perm = np.random.default_rng(seed).permutation(g.n)
    pos_h = np.empty(g.n, dtype=int)
    pos_h[list(ch.order)] = np.arange(g.n)
    mapping = [pos_h[perm[v]] for v in cg.order]
    assert graphs_isomorphic_by(cg.graph, ch.graph, mapping)


def test_permute_deterministic():
    g = grid_graph(3, 3)
    assert permute_graph(g, 7) == permute_graph(g, 7)


def test_window_whole_graph():
    cg = canonical_order(grid_graph(2, 3))
    w = extract_window_subgraph(cg, 0, cg.n)
    assert w.graph == cg.graph


def test_window_path_middle_edge():
    cg = CanonicalGraph(path(4), (0, 1, 2, 3))
    w = extract_window_subgraph(cg, 1, 2)
    assert w.graph == Graph(2, frozenset({(0, 1)}))


def test_window_out_of_range():
    cg = canonical_order(path(4))
    with pytest.raises(ValueError):
        extract_window_subgraph(cg, 3, 2)
    with pytest.raises(ValueError):
        extract_window_subgraph(cg, 0, 0)


@pytest.mark.parametrize("start", range(6))
def test_window_edge_count_brute_force(start):
    cg = canonical_order(grid_graph(3, 3))
    A = cg.adjacency()
    verts = range(start, start + 4)
    expected = sum(A[u, v] for u in verts for v in verts if u < v)
    assert extract_window_subgraph(cg, start, 4).graph.num_edges == expected


def test_patch_grid_l1_has_ten_blocks_with_constant_diagonal():
    grid = to_patch_grid(grid_graph(2, 2), 1)
    assert len(grid.blocks) == 10
    for K in range(1, 5):
        assert grid.block(K, K).tolist() == [[-1]]


def test_patch_grid_n5_l4():
    g = Graph(5, frozenset({(4, 0), (4, 2), (1, 2)}))
    grid = to_patch_grid(g, 4)
    assert grid.n_blocks == 2
    assert (grid.block(2, 2) == -1).all()
    low = grid.block(2, 1)
    # only global row 5 (first row of the block) is a real vertex
    assert low[0].tolist() == [1, 0, 1, 0]
    assert (low[1:] == -1).all()


def test_patch_grid_triangle_l2():
    grid = to_patch_grid(triangle(), 2)
    assert grid.block(1, 1).tolist() == [[-1, -1], [1, -1]]
    assert grid.block(2, 1).tolist() == [[1, 1], [-1, -1]]
    assert (grid.block(2, 2) == -1).all()


@given(graphs(max_n=15), st.integers(1, 5))
def test_patch_grid_round_trip(g, l):
    grid = to_patch_grid(g, l)
    N = grid.n_blocks
    assert len(grid.blocks) == N * (N + 1) // 2
    A = g.adjacency()
    for (I, J), blk in grid.blocks.items():
        for a, b in itertools.product(range(l), range(l)):
            i, j = (I - 1) * l + a, (J - 1) * l + b
            if i > j and i < g.n and j < g.n:
                assert blk[a, b] == A[i, j]
            else:
                assert blk[a, b] == -1
    assert (grid.adjacency() == A).all()


def test_layer_matches_blocks():
    grid = to_patch_grid(grid_graph(3, 3), 2)
    for d in range(grid.n_blocks):
        layer = grid.layer(d)
        for k in range(grid.n_blocks - d):
            assert (layer[k] == grid.block(k + 1 + d, k + 1).reshape(-1)).all()
