import pytest
from hypothesis import given, settings, strategies as st

from conclust.instances import gen_random_geometric
from conclust.model import InfeasibleError, Instance, validate_solution
from conclust.oracle import (OracleConfig, OracleLimitError, assignment_feasible, enumerate_connected_partitions,
                             oracle_assignment, oracle_solve)

from conftest import path_instance


def _partitions_by_filter(inst, k):
    """Independent route: filter all set partitions for connected blocks."""
    from conclust.decomposition import enumerate_partitions
    from conclust.model import is_connected

    out = set()
    for rgs in enumerate_partitions(inst.n):
        if max(rgs) + 1 > k:
            continue
        blocks = [tuple(v for v in range(inst.n) if rgs[v] == b) for b in range(max(rgs) + 1)]
        if all(is_connected(inst.adj, b) for b in blocks):
            out.add(tuple(sorted(blocks)))
    return out


def test_path3_partitions():
    inst = path_instance(3, 2)
    got = sorted(map(tuple, enumerate_connected_partitions(inst)))
    assert got == [((0,), (1, 2)), ((0, 1), (2,)), ((0, 1, 2),)]


def test_trivial_partitions():
    edgeless = Instance.from_coords([[0], [1]], "l1", [], 2)
    assert list(enumerate_connected_partitions(edgeless)) == [[(0,), (1,)]]
    assert len(list(enumerate_connected_partitions(path_instance(5, 1)))) == 1


@settings(max_examples=40)
@given(st.integers(0, 10**6), st.integers(1, 4), st.integers(3, 7))
def test_partitions_match_filtered_bell(seed, k, n):
    inst = gen_random_geometric(n, min(k, n), seed, edge_prob=0.35, connect=False)
    got = [tuple(sorted(p)) for p in enumerate_connected_partitions(inst)]
    assert len(got) == len(set(got))
    assert set(got) == _partitions_by_filter(inst, inst.k)


def test_limits():
    with pytest.raises(OracleLimitError):
        list(enumerate_connected_partitions(path_instance(12, 2)))
    with pytest.raises(OracleLimitError):
        oracle_solve(path_instance(6, 6), "center", config=OracleConfig(max_n=10, max_partitions=3))
    with pytest.raises(ValueError):
        OracleConfig(max_n=0)


def test_oracle_examples(path4):
    assert oracle_solve(path4, "center").value == 1
    assert oracle_solve(path4, "msr").value == 1
    assert oracle_solve(path4, "msd").value == 2
    assert oracle_solve(path4, "median").value == 2
    for tag in ("center", "median", "means", "msr", "msd"):
        assert oracle_solve(path4.with_k(4), tag).value == 0


def test_oracle_infeasible():
    with pytest.raises(InfeasibleError):
        oracle_solve(Instance.from_coords([[0], [1], [2]], "l1", [], 2), "center")
    with pytest.raises(ValueError):
        oracle_solve(path_instance(), "radius")


@pytest.mark.parametrize("seed", range(10))
def test_oracle_monotone_in_k(seed):
    inst = gen_random_geometric(7, 1, seed, edge_prob=0.4)
    for tag in ("center", "median", "msr", "msd"):
        values = [oracle_solve(inst.with_k(k), tag).value for k in range(1, 5)]
        assert all(a >= b - 1e-12 for a, b in zip(values, values[1:]))
        sol = oracle_solve(inst.with_k(3), tag)
        assert validate_solution(inst.with_k(3), sol) == []


def test_facility_oracle_relaxes_containment(path4):
    sol = oracle_solve(path4.with_k(1), "center", facilities=[1])
    assert sol.facility_relaxed and sol.value == 2 and sol.centers == (1,)
    sol = oracle_solve(path4, "median", facilities=[0])
    assert sol.value == 6


def test_assignment_oracle(path4):
    assert assignment_feasible(path4, [0, 3], 0.5) is None
    assert assignment_feasible(path4, [0, 3], 1) in ([0, 0, 3, 3],)
    sol = oracle_assignment(path4, [0, 3])
    assert sol.value == 1 and sol.clusters == ((0, 1), (2, 3))
    # the centre far from its only reachable vertices forces a large radius
    star = Instance.from_coords([[0], [10], [1], [2]], "l1", [(0, 1), (1, 2), (1, 3)], 2)
    assert oracle_assignment(star, [0, 1]).value == 9


def test_assignment_matches_partition_oracle():
    for seed in range(15):
        inst = gen_random_geometric(7, 2, seed, edge_prob=0.4)
        centers = [seed % 7, (seed + 3) % 7]
        best = float("inf")
        for part in enumerate_connected_partitions(inst.with_k(2)):
            if len(part) != 2:
                continue
            for a, b in ((0, 1), (1, 0)):
                if centers[0] in part[a] and centers[1] in part[b]:
                    r = max(max(inst.dist[v, centers[0]] for v in part[a]),
                            max(inst.dist[v, centers[1]] for v in part[b]))
                    best = min(best, r)
        assert oracle_assignment(inst, centers).value == best
