"""Brute-force reference solvers for small instances."""

from __future__ import annotations

import os
from collections import deque
from dataclasses import dataclass

import numpy as np

from .model import OBJECTIVES, ClusteringSolution, InfeasibleError, Instance


class OracleLimitError(RuntimeError):
    pass


@dataclass(frozen=True)
class OracleConfig:
    max_n: int = int(os.environ.get("CONCLUST_ORACLE_MAX_N", 10))
    max_partitions: int = int(os.environ.get("CONCLUST_ORACLE_MAX_PARTITIONS", 10**7))

    def __post_init__(self):
        if self.max_n < 1 or self.max_partitions < 1:
            raise ValueError("oracle limits must be positive")


def _adj_masks(inst):
    return [sum(1 << w for w in inst.adj[v]) for v in range(inst.n)]


def _bits(mask):
    out = []
    while mask:
        low = mask & -mask
        out.append(low.bit_length() - 1)
        mask ^= low
    return out


def _component_count(adj, mask):
    count = 0
    while mask:
        low = mask & -mask
        seen = low
        frontier = low
        while frontier:
            u = (frontier & -frontier).bit_length() - 1
            frontier &= frontier - 1
            new = adj[u] & mask & ~seen
            seen |= new
            frontier |= new
        mask &= ~seen
        count += 1
    return count


def connected_sets(adj, root, allowed):
    """Every connected vertex set containing ``root`` inside ``allowed`` (bitmasks), once each."""

    def rec(S, frontier, excluded):
        if not frontier:
            yield S
            return
        u = (frontier & -frontier).bit_length() - 1
        rest = frontier & ~(1 << u)
        yield from rec(S, rest, excluded | (1 << u))
        S2 = S | (1 << u)
        yield from rec(S2, (rest | (adj[u] & allowed)) & ~S2 & ~excluded, excluded)

    start = 1 << root
    yield from rec(start, adj[root] & allowed & ~start, 0)


def _partitions(adj, full, k, limit):
    count = 0

    def rec(remaining, blocks):
        nonlocal count
        if not remaining:
            count += 1
            if count > limit:
                raise OracleLimitError(f"more than {limit} partitions")
            yield blocks
            return
        if len(blocks) >= k or _component_count(adj, remaining) > k - len(blocks):
            return
        v = (remaining & -remaining).bit_length() - 1
        for S in connected_sets(adj, v, remaining):
            yield from rec(remaining & ~S, blocks + (S,))

    yield from rec(full, ())


def _check(inst, config):
    config = config or OracleConfig()
    if inst.n > config.max_n:
        raise OracleLimitError(f"n={inst.n} exceeds oracle limit {config.max_n}")
    return config


def enumerate_connected_partitions(inst: Instance, k: int | None = None, config: OracleConfig | None = None):
    """Partitions into at most k connected blocks; blocks ordered by their minimum vertex."""
    config = _check(inst, config)
    k = inst.k if k is None else k
    for blocks in _partitions(_adj_masks(inst), (1 << inst.n) - 1, k, config.max_partitions):
        yield [tuple(_bits(b)) for b in blocks]


def _block_cost(dist, members, tag, facilities):
    idx = np.asarray(members)
    if tag == "msd":
        return float(dist[np.ix_(idx, idx)].max()), None
    cand = idx if facilities is None else np.asarray(facilities)
    sub = dist[np.ix_(cand, idx)]
    if tag in ("center", "msr"):
        per = sub.max(axis=1)
    elif tag == "median":
        per = sub.sum(axis=1)
    else:
        per = (sub**2).sum(axis=1)
    j = int(np.argmin(per))
    return float(per[j]), int(cand[j])


def oracle_solve(inst: Instance, tag: str, facilities=None, config: OracleConfig | None = None) -> ClusteringSolution:
    """Exact optimum of ``tag`` over connected partitions into at most k blocks."""
    if tag not in OBJECTIVES:
        raise ValueError(f"unknown objective {tag!r}")
    config = _check(inst, config)
    F = None if facilities is None else sorted(set(int(f) for f in facilities))
    adj = _adj_masks(inst)
    cache = {}
    best = None
    for blocks in _partitions(adj, (1 << inst.n) - 1, inst.k, config.max_partitions):
        costs = []
        for b in blocks:
            c = cache.get(b)
            if c is None:
                c = cache[b] = _block_cost(inst.dist, _bits(b), tag, F)
            costs.append(c[0])
        value = max(costs) if tag == "center" else sum(costs)
        if best is None or value < best[0]:
            best = (value, blocks)
    if best is None:
        raise InfeasibleError(f"no connected clustering with at most {inst.k} clusters")
    value, blocks = best
    clusters = [_bits(b) for b in blocks]
    centers = None if tag == "msd" else [cache[b][1] for b in blocks]
    return ClusteringSolution.make(clusters, centers, tag, value, facility_relaxed=F is not None)


def assignment_feasible(inst: Instance, centers, r):
    """Connected assignment of every vertex to a centre within distance r, or None."""
    C = sorted(set(int(c) for c in centers))
    d = inst.dist
    label = [-1] * inst.n
    for c in C:
        label[c] = c
    options = {}
    for v in range(inst.n):
        if label[v] < 0:
            options[v] = [c for c in C if d[v, c] <= r]
            if not options[v]:
                return None
    # visit vertices in multi-source BFS order from the centres
    order = []
    seen = set(C)
    queue = deque(C)
    while queue:
        u = queue.popleft()
        for w in inst.adj[u]:
            if w not in seen:
                seen.add(w)
                order.append(w)
                queue.append(w)
    if len(seen) < inst.n:
        return None
    adj = inst.adj

    Cset = set(C)

    def dead(w):
        # a non-centre whose neighbours are all labelled needs one with its own label
        if label[w] < 0 or w in Cset:
            return False
        if any(label[x] < 0 for x in adj[w]):
            return False
        return all(label[x] != label[w] for x in adj[w])

    def connected():
        for c in C:
            reach = {c}
            stack = [c]
            while stack:
                u = stack.pop()
                for w in adj[u]:
                    if w not in reach and label[w] == c:
                        reach.add(w)
                        stack.append(w)
            if any(label[v] == c and v not in reach for v in range(inst.n)):
                return False
        return True

    def rec(i):
        if i == len(order):
            return connected()
        v = order[i]
        for c in options[v]:
            label[v] = c
            if not dead(v) and not any(dead(x) for x in adj[v]):
                if rec(i + 1):
                    return True
        label[v] = -1
        return False

    return list(label) if rec(0) else None


def oracle_assignment(inst: Instance, centers, config: OracleConfig | None = None) -> ClusteringSolution:
    """Optimal connected assignment to fixed centres (minimum radius)."""
    C = sorted(set(int(c) for c in centers))
    radii = np.unique(np.concatenate([inst.dist[:, C].ravel(), [0.0]]))
    lo, hi = 0, len(radii) - 1
    best = assignment_feasible(inst, C, radii[hi])
    if best is None:
        raise InfeasibleError("no connected assignment to the given centres")
    while lo < hi:
        mid = (lo + hi) // 2
        lab = assignment_feasible(inst, C, radii[mid])
        if lab is None:
            lo = mid + 1
        else:
            hi, best = mid, lab
    clusters = [[v for v in range(inst.n) if best[v] == c] for c in C]
    value = max(float(inst.dist[v, best[v]]) for v in range(inst.n))
    return ClusteringSolution.make(clusters, C, "center", value)
