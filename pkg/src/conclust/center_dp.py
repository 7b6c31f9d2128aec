"""Connected k-center over a nice tree decomposition.

A table entry is keyed by ``(assignment, partition)`` over the sorted bag:
``assignment[i]`` is the centre (exact mode) or facility (facility mode)
of the i-th bag vertex, and ``partition`` is a restricted growth string
grouping bag vertices that are already connected below.  The value is
the number of finished clusters.  Absent keys are infeasible.
"""

from __future__ import annotations

import math
from bisect import bisect_left

import numpy as np

from . import kernels
from .decomposition import FORGET, INTRODUCE_EDGE, INTRODUCE_VERTEX, JOIN, LEAF, NiceDecomposition, nice_decomposition
from .model import ClusteringSolution, InfeasibleError, Instance, evaluate_objective

EXACT, FACILITY = "exact", "facility"


def _better(cur, value, back):
    return cur is None or value < cur[0] or (value == cur[0] and back < cur[1])


def subtree_masks(nice: NiceDecomposition) -> list[int]:
    """Bitmask of V_t (vertices introduced at or below t) for every node."""
    masks = [0] * len(nice)
    for x, kind in enumerate(nice.kinds):
        m = 0
        for c in nice.children[x]:
            m |= masks[c]
        if kind == INTRODUCE_VERTEX:
            m |= 1 << nice.vertex[x]
        masks[x] = m
    return masks


def transition_leaf() -> dict:
    return {((), ()): (0, None)}


def transition_introduce_vertex(child, bag, v, r, dist, mode=EXACT, vt_mask=0, facilities=None):
    """``bag`` is the child bag; ``vt_mask`` is V_t of the new node (it contains v)."""
    pos = bisect_left(bag, v)
    row = dist[v]
    out = {}
    if mode == FACILITY:
        fixed = [f for f in sorted(facilities) if row[f] <= r]
    else:
        outside = [u for u in range(len(row)) if not (vt_mask >> u) & 1 and row[u] <= r]
    for key in child:
        a, p = key
        if mode == FACILITY:
            targets = fixed
        elif v in a:
            targets = (v,)
        else:
            targets = {u for u in a if row[u] <= r}
            targets.add(v)
            targets.update(outside)
            targets = sorted(targets)
        if not targets:
            continue
        val = child[key][0]
        np_ = kernels.rgs_insert(p, pos)
        for u in targets:
            out[(a[:pos] + (u,) + a[pos:], np_)] = (val, key)
    return out


def transition_introduce_edge(child, bag, u, v):
    iu, iv = bag.index(u), bag.index(v)
    out = {key: (val, key) for key, (val, _) in child.items()}
    for key, (val, _) in child.items():
        a, p = key
        if a[iu] == a[iv] and p[iu] != p[iv]:
            nk = (a, kernels.rgs_merge(p, iu, iv))
            if _better(out.get(nk), val, key):
                out[nk] = (val, key)
    return out


def transition_join(left, right, cap=math.inf):
    return kernels.join_center(left, right, cap)


def transition_forget(child, bag, v, mode=EXACT, vt_mask=0, cap=math.inf):
    i = bag.index(v)
    out = {}
    for key, (val, _) in child.items():
        a, p = key
        if kernels.rgs_is_singleton(p, i):
            if mode == EXACT:
                c = a[i]
                if not (vt_mask >> c) & 1:
                    continue
                if any(a[j] == c for j in range(len(a)) if j != i):
                    continue
            val = val + 1
            if val > cap:
                continue
        nk = (a[:i] + a[i + 1:], kernels.rgs_remove(p, i))
        if _better(out.get(nk), val, key):
            out[nk] = (val, key)
    return out


def run_tables(inst, nice, r, mode=EXACT, facilities=None, cap=math.inf, keep=False):
    """Bottom-up pass.  Returns the list of node tables (only the root's unless ``keep``)."""
    masks = subtree_masks(nice)
    dist = inst.dist
    tables = [None] * len(nice)
    for x, kind in enumerate(nice.kinds):
        ch = nice.children[x]
        if kind == LEAF:
            t = transition_leaf()
        elif kind == INTRODUCE_VERTEX:
            t = transition_introduce_vertex(tables[ch[0]], nice.bags[ch[0]], nice.vertex[x], r, dist,
                                            mode, masks[x], facilities)
        elif kind == INTRODUCE_EDGE:
            t = transition_introduce_edge(tables[ch[0]], nice.bags[x], *nice.edge[x])
        elif kind == FORGET:
            t = transition_forget(tables[ch[0]], nice.bags[ch[0]], nice.vertex[x], mode, masks[x], cap)
        elif kind == JOIN:
            t = transition_join(tables[ch[0]], tables[ch[1]], cap)
        else:
            raise ValueError(f"unknown node kind {kind}")
        tables[x] = t
        if not keep:
            for c in ch:
                tables[c] = None
    return tables


def feasible_cluster_count(inst, nice, r, mode=EXACT, facilities=None, cap=math.inf):
    """Fewest connected clusters of radius <= r covering the graph (inf if none)."""
    root = run_tables(inst, nice, r, mode, facilities, cap)[nice.root]
    entry = root.get(((), ()))
    return math.inf if entry is None else entry[0]


def candidate_radii(inst, mode=EXACT, facilities=None) -> np.ndarray:
    if mode == FACILITY:
        vals = inst.dist[:, sorted(facilities)].ravel()
    else:
        vals = inst.dist.ravel()
    return np.unique(np.concatenate([vals, [0.0]]))


def backtrack_clusters(nice, tables, n, root_key):
    """Follow backpointers from the root; returns (clusters, per-vertex target)."""
    parent = list(range(n))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    target = [-1] * n
    stack = [(nice.root, root_key)]
    while stack:
        x, key = stack.pop()
        back = tables[x][key][1]
        kind = nice.kinds[x]
        ch = nice.children[x]
        if kind == JOIN:
            stack.append((ch[0], back[0]))
            stack.append((ch[1], back[1]))
        elif kind == INTRODUCE_EDGE:
            if back[-1] != key[-1]:
                u, v = nice.edge[x]
                ru, rv = find(u), find(v)
                parent[max(ru, rv)] = min(ru, rv)
            stack.append((ch[0], back))
        elif kind == FORGET:
            v = nice.vertex[x]
            target[v] = back[-2][nice.bags[ch[0]].index(v)]
            stack.append((ch[0], back))
        elif kind == INTRODUCE_VERTEX:
            stack.append((ch[0], back))
    groups = {}
    for v in range(n):
        groups.setdefault(find(v), []).append(v)
    clusters = sorted(groups.values())
    return clusters, target


def _search(inst, nice, mode, facilities):
    radii = candidate_radii(inst, mode, facilities)
    k = inst.k
    hi = len(radii) - 1
    if feasible_cluster_count(inst, nice, radii[hi], mode, facilities, cap=k) > k:
        raise InfeasibleError(f"no connected clustering with at most {k} clusters")
    lo = 0
    while lo < hi:
        mid = (lo + hi) // 2
        if feasible_cluster_count(inst, nice, radii[mid], mode, facilities, cap=k) <= k:
            hi = mid
        else:
            lo = mid + 1
    r = radii[hi]
    tables = run_tables(inst, nice, r, mode, facilities, cap=k, keep=True)
    clusters, target = backtrack_clusters(nice, tables, inst.n, ((), ()))
    centers = [target[c[0]] for c in clusters]
    return clusters, centers, r


def solve_center_exact(inst: Instance, nice: NiceDecomposition | None = None) -> ClusteringSolution:
    """Optimal connected k-center via binary search over candidate radii."""
    nice = nice or nice_decomposition(inst)
    clusters, centers, _ = _search(inst, nice, EXACT, None)
    sol = ClusteringSolution.make(clusters, centers, "center", 0.0)
    return ClusteringSolution.make(clusters, centers, "center", evaluate_objective(inst, sol))


def solve_center_facilities(inst: Instance, nice: NiceDecomposition | None, facilities) -> ClusteringSolution:
    """Optimal connected k-center when centres must come from ``facilities`` (containment waived)."""
    nice = nice or nice_decomposition(inst)
    F = sorted(set(int(f) for f in facilities))
    if not F:
        raise ValueError("facility set is empty")
    clusters, centers, _ = _search(inst, nice, FACILITY, F)
    sol = ClusteringSolution.make(clusters, centers, "center", 0.0, facility_relaxed=True)
    return ClusteringSolution.make(clusters, centers, "center", evaluate_objective(inst, sol),
                                   facility_relaxed=True)


def select_center_facilities(inst: Instance, k: int | None = None) -> list[int]:
    """Farthest-first traversal from vertex 0 (a 2-approximate unconstrained k-center)."""
    k = inst.k if k is None else k
    chosen = [0]
    mind = inst.dist[0].copy()
    mind[0] = -1.0
    while len(chosen) < min(k, inst.n):
        nxt = int(np.argmax(mind))
        chosen.append(nxt)
        mind = np.minimum(mind, inst.dist[nxt])
        mind[chosen] = -1.0
    return chosen


def recover_centers(inst: Instance, facility_sol: ClusteringSolution, objective="center") -> ClusteringSolution:
    """Move each cluster's centre to its member closest to the cluster facility."""
    centers = []
    for cl, f in zip(facility_sol.clusters, facility_sol.centers):
        if not cl:
            raise ValueError("empty cluster")
        centers.append(min(cl, key=lambda v: (inst.dist[v, f], v)))
    sol = ClusteringSolution.make(facility_sol.clusters, centers, objective, 0.0)
    return ClusteringSolution.make(sol.clusters, centers, objective, evaluate_objective(inst, sol, objective))


def solve_center_fpt(inst: Instance, nice: NiceDecomposition | None = None) -> ClusteringSolution:
    """Farthest-first facilities, facility DP, then centre recovery (at most 6x optimal)."""
    nice = nice or nice_decomposition(inst)
    F = select_center_facilities(inst)
    return recover_centers(inst, solve_center_facilities(inst, nice, F))
