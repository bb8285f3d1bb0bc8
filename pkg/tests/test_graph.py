import itertools

import networkx as nx
import numpy as np
import pytest

from attitude_consensus.graph import (
    CommGraph,
    GraphError,
    degree,
    in_degree,
    is_connected_tree,
    is_directed_out_tree,
    leaves,
    out_degree,
    path_graph,
    reference_chain,
    tree_center,
)


def test_path_graph_degrees_and_leaves():
    g = path_graph(4)
    assert [degree(g, i) for i in range(4)] == [1, 2, 2, 1]
    assert is_connected_tree(g)
    assert leaves(g) == [0, 3]
    assert tree_center(g) == 1
    assert g.edge_count() == 3


def test_star_leaves_and_centre():
    g = CommGraph.from_edges(4, [(0, 1), (0, 2), (0, 3)])
    assert leaves(g) == [1, 2, 3]
    assert tree_center(g) == 0


def test_isolated_node_has_degree_zero():
    g = CommGraph.from_edges(3, [(0, 1)])
    assert degree(g, 2) == 0
    assert not is_connected_tree(g)


def test_cycle_is_not_a_tree():
    g = CommGraph.from_edges(4, [(0, 1), (1, 2), (2, 3), (3, 0)])
    assert not is_connected_tree(g)


def test_reference_chain():
    g = reference_chain(2)
    assert g.reference == 2
    assert in_degree(g, 0) == 1 and in_degree(g, 2) == 0
    assert out_degree(g, 2) == 1
    assert g.neighbors(1) == [0]
    assert is_directed_out_tree(g)


def test_in_degree_two_is_not_out_tree():
    # r -> 1, r -> 2, 1 -> 2
    g = CommGraph.from_edges(2, [(2, 0), (2, 1), (0, 1)], directed=True, with_reference=True)
    assert not is_directed_out_tree(g)


def test_constructor_validation():
    with pytest.raises(GraphError):
        CommGraph(2, False, np.array([[0, 1], [0, 0]]))
    with pytest.raises(GraphError):
        CommGraph(2, False, np.eye(2))
    with pytest.raises(GraphError):
        CommGraph(2, True, np.array([[0, 2], [0, 0]]))
    with pytest.raises(GraphError):
        CommGraph(2, True, np.zeros((3, 3)))
    with pytest.raises(GraphError):
        CommGraph.from_edges(2, [(0, 5)])
    with pytest.raises(GraphError):
        CommGraph.from_edges(2, [(1, 1)])
    # reference may not receive
    A = np.zeros((3, 3), dtype=int)
    A[2, 0] = 1
    with pytest.raises(GraphError):
        CommGraph(2, True, A, reference=2)
    with pytest.raises(IndexError):
        degree(path_graph(3), 3)
    with pytest.raises(GraphError):
        is_connected_tree(reference_chain(2))
    with pytest.raises(GraphError):
        tree_center(CommGraph.from_edges(3, [(0, 1)]))


def _undirected_graphs(size):
    pairs = list(itertools.combinations(range(size), 2))
    for mask in range(2 ** len(pairs)):
        yield [p for k, p in enumerate(pairs) if mask >> k & 1]


def test_tree_validator_matches_networkx_exhaustively():
    for size in range(1, 6):
        for edges in _undirected_graphs(size):
            g = CommGraph.from_edges(size, edges)
            G = nx.Graph()
            G.add_nodes_from(range(size))
            G.add_edges_from(edges)
            assert is_connected_tree(g) == nx.is_tree(G)
            if nx.is_tree(G):
                assert sum(degree(g, i) for i in range(size)) == 2 * (size - 1)
                if size >= 2:
                    assert leaves(g) == sorted(k for k, d in G.degree() if d == 1)
                    assert len(leaves(g)) >= 2
                centre = nx.center(G)
                assert tree_center(g) == min(centre)


def test_out_tree_validator_matches_networkx_small(rng):
    # exhaustive up to 4 nodes here; 5 nodes is covered in the acceptance suite
    for size in range(1, 5):
        pairs = [(a, b) for a in range(size) for b in range(size) if a != b]
        for mask in range(2 ** len(pairs)):
            edges = [p for k, p in enumerate(pairs) if mask >> k & 1]
            g = CommGraph.from_edges(size, edges, directed=True)
            G = nx.DiGraph()
            G.add_nodes_from(range(size))
            G.add_edges_from(edges)
            expected = nx.is_arborescence(G) and G.in_degree(0) == 0
            assert is_directed_out_tree(g, root=0) == expected
