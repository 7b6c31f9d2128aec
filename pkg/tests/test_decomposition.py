import itertools

import networkx as nx
import pytest
from hypothesis import given, settings, strategies as st

from conclust import _pykernels
from conclust.center_dp import subtree_masks
from conclust.decomposition import (FORGET, INTRODUCE_EDGE, INTRODUCE_VERTEX, LEAF, NICE_SIZE_CONSTANT,
                                    TreeDecomposition, check_nice, enumerate_partitions, heuristic_decomposition,
                                    join_partitions, make_nice, nice_decomposition, partition_blocks,
                                    rgs_from_blocks, validate_decomposition)
from conclust.instances import gen_partial_ktree, gen_random_geometric, gen_random_tree
from conclust.model import InputError, Instance


def _graph_instance(G, k=1):
    n = G.number_of_nodes()
    return Instance.from_coords([[i] for i in range(n)], "l1", list(G.edges()), k)


# -- partitions ---------------------------------------------------------------

def test_join_examples():
    assert join_partitions((0, 1), (0, 0)) == (0, 0)
    assert join_partitions((0, 0, 1), (0, 1, 1)) == (0, 0, 0)
    assert join_partitions((0, 1, 0), (0, 1, 0)) == (0, 1, 0)
    with pytest.raises(InputError):
        join_partitions((0,), (0, 1))


@pytest.mark.parametrize("size,count", [(0, 1), (1, 1), (2, 2), (3, 5), (4, 15), (5, 52)])
def test_enumerate_partitions_bell(size, count):
    parts = list(enumerate_partitions(size))
    assert len(parts) == count == len(set(parts))
    assert all(_pykernels.rgs_canonical(p) == p for p in parts)


def test_enumerate_partitions_limit():
    with pytest.raises(InputError):
        next(enumerate_partitions(13))


def test_blocks_round_trip():
    bag = (3, 5, 8)
    blocks = partition_blocks(bag, (0, 1, 0))
    assert blocks == [frozenset({3, 8}), frozenset({5})]
    assert rgs_from_blocks(bag, blocks) == (0, 1, 0)


same_size = st.integers(0, 7).flatmap(
    lambda m: st.tuples(*[st.lists(st.integers(0, m), min_size=m, max_size=m).map(_pykernels.rgs_canonical)] * 3))


def _coarsening_oracle(p, q):
    # independent route: connected components of the "same block in p or q" graph
    G = nx.Graph()
    G.add_nodes_from(range(len(p)))
    for part in (p, q):
        for i, j in itertools.combinations(range(len(p)), 2):
            if part[i] == part[j]:
                G.add_edge(i, j)
    lab = [0] * len(p)
    for c, comp in enumerate(nx.connected_components(G)):
        for i in comp:
            lab[i] = c
    return _pykernels.rgs_canonical(lab)


@settings(max_examples=300)
@given(same_size)
def test_join_algebra(triple):
    p, q, r = triple
    assert join_partitions(p, q) == join_partitions(q, p)
    assert join_partitions(join_partitions(p, q), r) == join_partitions(p, join_partitions(q, r))
    assert join_partitions(p, p) == p
    assert join_partitions(p, tuple(range(len(p)))) == p
    assert join_partitions(p, q) == _coarsening_oracle(p, q)


# -- tree decompositions ------------------------------------------------------

def test_validate_examples(path4):
    td = TreeDecomposition.make([[0, 1], [1, 2], [2, 3]], [(0, 1), (1, 2)])
    rep = validate_decomposition(path4, td)
    assert rep.ok and rep.width == 1
    broken = TreeDecomposition.make([[0, 1], [2, 3], [1, 2], [1]], [(0, 1), (1, 2), (2, 3)])
    rep = validate_decomposition(path4, broken)
    assert any("vertex 1" in p for p in rep.problems)
    tri = Instance.from_coords([[0], [1], [2]], "l1", [(0, 1), (1, 2), (0, 2)], 1)
    rep = validate_decomposition(tri, TreeDecomposition.make([[0, 1], [1, 2]], [(0, 1)]))
    assert "edge (0,2) uncovered" in rep.problems
    cyc = TreeDecomposition.make([[0, 1], [1, 2], [2, 3]], [(0, 1), (1, 2), (0, 2)])
    assert not validate_decomposition(path4, cyc).ok


def test_heuristic_widths():
    assert heuristic_decomposition(gen_random_tree(12, 2, 3)).width == 1
    assert heuristic_decomposition(_graph_instance(nx.complete_graph(4))).width == 3
    grid = _graph_instance(nx.convert_node_labels_to_integers(nx.grid_2d_graph(3, 3)))
    td = heuristic_decomposition(grid)
    assert validate_decomposition(grid, td).ok
    assert 3 <= td.width <= 4


def test_make_nice_single_vertex():
    inst = Instance.from_coords([[0]], "l1", [], 1)
    nice = nice_decomposition(inst)
    assert nice.kinds == (LEAF, INTRODUCE_VERTEX, FORGET)
    assert nice.width == 0 and nice.bags[nice.root] == ()


def test_make_nice_path_counts(path4):
    td = TreeDecomposition.make([[0, 1], [1, 2], [2, 3]], [(0, 1), (1, 2)])
    counts = make_nice(td, path4).counts()
    assert counts[INTRODUCE_EDGE] == 3
    assert counts[FORGET] == 4
    assert counts[INTRODUCE_VERTEX] == 4


def test_make_nice_rejects_invalid(path4):
    with pytest.raises(InputError):
        make_nice(TreeDecomposition.make([[0, 1], [2, 3]], [(0, 1)]), path4)


def _random_case(seed):
    kind = seed % 3
    if kind == 0:
        inst = gen_random_tree(6 + seed % 7, 2, seed)
        return inst, heuristic_decomposition(inst)
    if kind == 1:
        return gen_partial_ktree(5 + seed % 8, 2, 2 + seed % 2, seed)
    inst = gen_random_geometric(5 + seed % 6, 2, seed, edge_prob=0.4)
    return inst, heuristic_decomposition(inst)


def _replay(nice):
    """Per node: (V_t, E_t) rebuilt from introduce events below it."""
    V, E = [], []
    for x, kind in enumerate(nice.kinds):
        v, e = set(), set()
        for c in nice.children[x]:
            v |= V[c]
            e |= E[c]
        if kind == INTRODUCE_VERTEX:
            v.add(nice.vertex[x])
        elif kind == INTRODUCE_EDGE:
            e.add(nice.edge[x])
        V.append(v)
        E.append(e)
    return V, E


@pytest.mark.parametrize("seed", range(60))
def test_nice_invariants(seed):
    inst, td = _random_case(seed)
    nice = make_nice(td, inst)
    assert check_nice(nice, inst) == []
    assert nice.width == td.width or nice.width < td.width
    assert len(nice) <= NICE_SIZE_CONSTANT * (nice.width + 1) * inst.n
    V, E = _replay(nice)
    masks = subtree_masks(nice)
    assert V[nice.root] == set(range(inst.n)) and E[nice.root] == set(inst.edges)
    for x in range(len(nice)):
        assert masks[x] == sum(1 << v for v in V[x])
        bag = set(nice.bags[x])
        assert bag <= V[x]
        # edges below t stay inside V_t
        assert all(u in V[x] and w in V[x] for u, w in E[x])
        # bag separates V_t \ bag from the rest of the graph
        inner = V[x] - bag
        for u, w in inst.edges:
            assert not ((u in inner and w not in V[x]) or (w in inner and u not in V[x]))
        # edges between inner vertices and anything are already introduced
        for u, w in inst.edges:
            if u in inner or w in inner:
                assert (u, w) in E[x]


def test_nice_deterministic():
    inst, td = gen_partial_ktree(9, 2, 2, 5)
    assert make_nice(td, inst) == make_nice(td, inst)
