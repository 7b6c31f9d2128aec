"""Brute-force DP table values, computed by enumerating connected partitions of V_t."""

import math

from conclust import _pykernels
from conclust.center_dp import EXACT, subtree_masks
from conclust.decomposition import INTRODUCE_EDGE
from conclust.oracle import _bits, _partitions


def _edges_below(nice):
    E = []
    for x, kind in enumerate(nice.kinds):
        e = set()
        for c in nice.children[x]:
            e |= E[c]
        if kind == INTRODUCE_EDGE:
            e.add(nice.edge[x])
        E.append(e)
    return E


def brute_pt(inst, nice, r, mode, facilities=None):
    """Minimum finished-cluster count per specification, by enumerating partitions of V_t."""
    d = inst.dist
    masks = subtree_masks(nice)
    E = _edges_below(nice)
    F = sorted(facilities) if facilities is not None else None
    out = []
    for x in range(len(nice)):
        bag = nice.bags[x]
        Vt = _bits(masks[x])
        adj = [0] * inst.n
        for u, w in E[x]:
            adj[u] |= 1 << w
            adj[w] |= 1 << u
        best = {}
        for blocks in _partitions(adj, masks[x], inst.n, 10**7) if Vt else [()]:
            parts = [_bits(b) for b in blocks]
            open_parts = [p for p in parts if set(p) & set(bag)]
            done = [p for p in parts if not set(p) & set(bag)]
            pool = range(inst.n) if mode == EXACT else F
            if any(not any(all(d[v, c] <= r for v in p) for c in (p if mode == EXACT else F)) for p in done):
                continue
            options = [[c for c in pool if all(d[v, c] <= r for v in p)] for p in open_parts]
            for choice in _product(options):
                if mode == EXACT:
                    ok = True
                    for c in set(choice):
                        if (masks[x] >> c) & 1 and not any(c == ch and c in p
                                                           for ch, p in zip(choice, open_parts)):
                            ok = False
                    if not ok:
                        continue
                where = {}
                for i, p in enumerate(open_parts):
                    for v in p:
                        where[v] = i
                a = tuple(choice[where[v]] for v in bag)
                key = (a, _pykernels.rgs_canonical([where[v] for v in bag]))
                best[key] = min(best.get(key, math.inf), len(done))
        out.append(best)
    return out


def _product(options):
    if not options:
        yield ()
        return
    for c in options[0]:
        for rest in _product(options[1:]):
            yield (c,) + rest


def brute_costs(inst, nice, F, cost, kmax):
    """Cheapest cost of forgotten vertices per budgeted specification, by enumeration."""
    masks = subtree_masks(nice)
    E = _edges_below(nice)
    out = []
    for x in range(len(nice)):
        bag = nice.bags[x]
        adj = [0] * inst.n
        for u, w in E[x]:
            adj[u] |= 1 << w
            adj[w] |= 1 << u
        best = {}
        for blocks in _partitions(adj, masks[x], inst.n, 10**7) if masks[x] else [()]:
            parts = [_bits(b) for b in blocks]
            open_parts = [p for p in parts if set(p) & set(bag)]
            done = [p for p in parts if not set(p) & set(bag)]
            if len(done) > kmax:
                continue
            closed = sum(min(sum(cost[v, f] for v in p) for f in F) for p in done)
            where = {v: i for i, p in enumerate(open_parts) for v in p}
            rgs = _pykernels.rgs_canonical([where[v] for v in bag])
            for choice in _product([list(F)] * len(open_parts)):
                c = closed + sum(cost[v, choice[i]] for i, p in enumerate(open_parts) for v in p if v not in bag)
                key = (len(done), tuple(choice[where[v]] for v in bag), rgs)
                best[key] = min(best.get(key, math.inf), c)
        out.append(best)
    return out
