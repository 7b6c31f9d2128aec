"""Connected k-median / k-means with facilities over a nice tree decomposition.

Keys are ``(budget, assignment, partition)``: ``budget`` counts finished
clusters below the node, ``assignment`` maps bag vertices to facilities.
Each vertex is charged cost(v, facility) when it is forgotten.
"""

from __future__ import annotations

from bisect import bisect_left

import numpy as np

from . import kernels
from .center_dp import backtrack_clusters, recover_centers, select_center_facilities
from .decomposition import FORGET, INTRODUCE_EDGE, INTRODUCE_VERTEX, JOIN, LEAF, NiceDecomposition, nice_decomposition
from .model import ClusteringSolution, InfeasibleError, Instance, evaluate_objective

SWAP_DELTA = 1e-4
LOCAL_SEARCH_ALPHA = {"median": 5.0, "means": 25.0}


def approximation_bound(objective: str, alpha: float) -> float:
    """End-to-end guarantee of the facility pipeline for a given alpha."""
    if objective == "median":
        return 2 * alpha + 4
    if objective == "means":
        return 8 * alpha + 32
    raise ValueError(objective)


def cost_matrix(inst: Instance, objective: str) -> np.ndarray:
    if objective == "median":
        return inst.dist
    if objective == "means":
        return inst.dist**2
    raise ValueError(f"objective must be median or means, not {objective!r}")


def _better(cur, value, back):
    return cur is None or value < cur[0] or (value == cur[0] and back < cur[1])


def m_transition_leaf() -> dict:
    return {(0, (), ()): (0.0, None)}


def m_transition_introduce_vertex(child, bag, v, facilities):
    pos = bisect_left(bag, v)
    out = {}
    for key, (val, _) in child.items():
        b, a, p = key
        np_ = kernels.rgs_insert(p, pos)
        for f in facilities:
            out[(b, a[:pos] + (f,) + a[pos:], np_)] = (val, key)
    return out


def m_transition_introduce_edge(child, bag, u, v):
    iu, iv = bag.index(u), bag.index(v)
    out = {key: (val, key) for key, (val, _) in child.items()}
    for key, (val, _) in child.items():
        b, a, p = key
        if a[iu] == a[iv] and p[iu] != p[iv]:
            nk = (b, a, kernels.rgs_merge(p, iu, iv))
            if _better(out.get(nk), val, key):
                out[nk] = (val, key)
    return out


def m_transition_join(left, right, kmax):
    return kernels.join_budget(left, right, kmax)


def m_transition_forget(child, bag, v, cost, kmax):
    """``cost`` is the cost matrix (distances for median, squared for means)."""
    i = bag.index(v)
    row = cost[v]
    out = {}
    for key, (val, _) in child.items():
        b, a, p = key
        if kernels.rgs_is_singleton(p, i):
            b += 1
            if b > kmax:
                continue
        nk = (b, a[:i] + a[i + 1:], kernels.rgs_remove(p, i))
        nv = val + float(row[a[i]])
        if _better(out.get(nk), nv, key):
            out[nk] = (nv, key)
    return out


def run_cost_tables(inst, nice, facilities, cost, kmax, keep=False):
    F = sorted(set(int(f) for f in facilities))
    tables = [None] * len(nice)
    for x, kind in enumerate(nice.kinds):
        ch = nice.children[x]
        if kind == LEAF:
            t = m_transition_leaf()
        elif kind == INTRODUCE_VERTEX:
            t = m_transition_introduce_vertex(tables[ch[0]], nice.bags[ch[0]], nice.vertex[x], F)
        elif kind == INTRODUCE_EDGE:
            t = m_transition_introduce_edge(tables[ch[0]], nice.bags[x], *nice.edge[x])
        elif kind == FORGET:
            t = m_transition_forget(tables[ch[0]], nice.bags[ch[0]], nice.vertex[x], cost, kmax)
        elif kind == JOIN:
            t = m_transition_join(tables[ch[0]], tables[ch[1]], kmax)
        else:
            raise ValueError(f"unknown node kind {kind}")
        tables[x] = t
        if not keep:
            for c in ch:
                tables[c] = None
    return tables


def root_costs(inst, nice, facilities, objective="median") -> dict:
    """Optimal facility-restricted cost for every exact finished-cluster count."""
    cost = cost_matrix(inst, objective)
    root = run_cost_tables(inst, nice, facilities, cost, inst.k)[nice.root]
    return {key[0]: val for key, (val, _) in root.items()}


def solve_median_facilities(inst: Instance, nice: NiceDecomposition | None, facilities,
                            objective: str = "median") -> ClusteringSolution:
    """Optimal connected clustering with facility centres (containment waived)."""
    nice = nice or nice_decomposition(inst)
    if not len(facilities):
        raise ValueError("facility set is empty")
    cost = cost_matrix(inst, objective)
    tables = run_cost_tables(inst, nice, facilities, cost, inst.k, keep=True)
    root = tables[nice.root]
    if not root:
        raise InfeasibleError(f"no connected clustering with at most {inst.k} clusters")
    # fewer clusters never cost more once facilities may repeat; take the best budget
    key = min(root, key=lambda kk: (root[kk][0], kk[0]))
    clusters, target = backtrack_clusters(nice, tables, inst.n, key)
    centers = [target[c[0]] for c in clusters]
    sol = ClusteringSolution.make(clusters, centers, objective, 0.0, facility_relaxed=True)
    return ClusteringSolution.make(clusters, centers, objective, evaluate_objective(inst, sol),
                                   facility_relaxed=True)


def facility_cost(cost: np.ndarray, F) -> float:
    return float(cost[:, list(F)].min(axis=1).sum())


def select_facilities_median(inst: Instance, objective: str = "median", k: int | None = None,
                             delta: float = SWAP_DELTA):
    """Single-swap local search for unconstrained k-median / k-means.

    Starts from farthest-first and applies the best swap while it improves
    the cost by a factor better than (1 - delta).  Returns (F, alpha).
    """
    k = inst.k if k is None else k
    cost = cost_matrix(inst, objective)
    alpha = LOCAL_SEARCH_ALPHA[objective]
    if k >= inst.n:
        return list(range(inst.n)), alpha
    F = select_center_facilities(inst, k)
    cur = facility_cost(cost, F)
    while cur > 0:
        best = None
        for i in range(k):
            others = F[:i] + F[i + 1:]
            base = cost[:, others].min(axis=1) if others else np.full(inst.n, np.inf)
            totals = np.minimum(base[:, None], cost).sum(axis=0)
            totals[F] = np.inf
            j = int(np.argmin(totals))
            if best is None or totals[j] < best[0]:
                best = (float(totals[j]), i, j)
        if best is None or not best[0] < (1 - delta) * cur:
            break
        _, i, j = best
        F = F[:i] + [j] + F[i + 1:]
        cur = facility_cost(cost, F)
    return sorted(F), alpha


def _solve_fpt(inst, nice, objective):
    nice = nice or nice_decomposition(inst)
    F, _ = select_facilities_median(inst, objective)
    return recover_centers(inst, solve_median_facilities(inst, nice, F, objective), objective)


def solve_median_fpt(inst: Instance, nice: NiceDecomposition | None = None) -> ClusteringSolution:
    return _solve_fpt(inst, nice, "median")


def solve_means_fpt(inst: Instance, nice: NiceDecomposition | None = None) -> ClusteringSolution:
    return _solve_fpt(inst, nice, "means")
