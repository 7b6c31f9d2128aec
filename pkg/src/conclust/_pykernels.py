"""Pure-Python kernels. ``_ckernels.pyx`` implements the same functions.

Bag partitions are restricted growth strings (tuples of block labels over
the sorted bag).  DP tables map keys to ``(value, backpointer)`` pairs.
"""

import numpy as np


def rgs_canonical(labels):
    seen = {}
    out = []
    for x in labels:
        if x not in seen:
            seen[x] = len(seen)
        out.append(seen[x])
    return tuple(out)


def rgs_join(p, q):
    """Finest common coarsening of two partitions of the same bag."""
    if not p:
        return ()
    parent = list(range(max(p) + 1))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    first = {}
    for a, b in zip(p, q):
        if b in first:
            ra, rb = find(a), find(first[b])
            if ra != rb:
                parent[max(ra, rb)] = min(ra, rb)
        else:
            first[b] = a
    return rgs_canonical([find(a) for a in p])


def rgs_insert(p, i):
    """Insert a new singleton block at position i."""
    labels = list(p)
    labels.insert(i, len(p) + 1)
    return rgs_canonical(labels)


def rgs_remove(p, i):
    return rgs_canonical(p[:i] + p[i + 1:])


def rgs_merge(p, i, j):
    a, b = p[i], p[j]
    if a == b:
        return p
    lo, hi = min(a, b), max(a, b)
    return rgs_canonical([lo if x == hi else x for x in p])


def rgs_is_singleton(p, i):
    return p.count(p[i]) == 1


def _better(cur, value, back):
    return cur is None or value < cur[0] or (value == cur[0] and back < cur[1])


def join_center(left, right, cap):
    """Join two k-center tables keyed by (assignment, partition)."""
    by_a = {}
    for key, (val, _) in right.items():
        by_a.setdefault(key[0], []).append((key[1], val, key))
    out = {}
    for lkey, (lval, _) in left.items():
        rows = by_a.get(lkey[0])
        if rows is None:
            continue
        a, p1 = lkey
        for p2, rval, rkey in rows:
            v = lval + rval
            if v > cap:
                continue
            key = (a, rgs_join(p1, p2))
            back = (lkey, rkey)
            cur = out.get(key)
            if _better(cur, v, back):
                out[key] = (v, back)
    return out


def join_budget(left, right, kmax):
    """Join two cost tables keyed by (budget, assignment, partition)."""
    by_a = {}
    for key, (val, _) in right.items():
        by_a.setdefault(key[1], []).append((key[0], key[2], val, key))
    out = {}
    for lkey, (lval, _) in left.items():
        rows = by_a.get(lkey[1])
        if rows is None:
            continue
        b1, a, p1 = lkey
        for b2, p2, rval, rkey in rows:
            b = b1 + b2
            if b > kmax:
                continue
            v = lval + rval
            key = (b, a, rgs_join(p1, p2))
            back = (lkey, rkey)
            cur = out.get(key)
            if _better(cur, v, back):
                out[key] = (v, back)
    return out


def connected_balls(indptr, indices, dist, centers, radii):
    """Membership matrix of connected balls B(v, r) for every (v, r) pair.

    B(v, r) is the set of vertices reachable from v along paths whose
    vertices all lie within distance r of v.
    """
    n = dist.shape[0]
    out = np.zeros((len(centers), n), dtype=np.uint8)
    for p in range(len(centers)):
        v = centers[p]
        r = radii[p]
        row = out[p]
        row[v] = 1
        stack = [v]
        while stack:
            u = stack.pop()
            for j in range(indptr[u], indptr[u + 1]):
                w = indices[j]
                if not row[w] and dist[v, w] <= r:
                    row[w] = 1
                    stack.append(w)
    return out


def grow_duals(member, cap, tol):
    """Uniform dual growth with event-driven tightening.

    member: (P, m) 0/1 matrix of pair balls restricted to the uncovered
    vertices.  cap: r + lambda per pair.  All active duals rise together;
    when a pair's sum reaches its cap it is recorded as tight and the
    vertices of its ball stop rising.  Returns (alpha, tight pair order),
    or (alpha, None) if some vertex can never be covered.
    """
    member = np.asarray(member, dtype=bool)
    P, m = member.shape
    alpha = np.zeros(m)
    active = np.ones(m, dtype=bool)
    sums = np.zeros(P)
    cnt = member.sum(axis=1).astype(float)
    is_tight = np.zeros(P, dtype=bool)
    order = []
    remaining = m
    while remaining:
        live = (cnt > 0) & ~is_tight
        if not live.any():
            return alpha, None
        ids = np.flatnonzero(live)
        steps = (cap[ids] - sums[ids]) / cnt[ids]
        first = int(ids[np.argmin(steps)])
        dt = max(float(steps.min()), 0.0)
        alpha[active] += dt
        sums += cnt * dt
        reached = live & (sums >= cap - tol)
        reached[first] = True
        hit = np.flatnonzero(reached)
        for p in hit:
            is_tight[p] = True
            order.append(int(p))
            newly = member[p] & active
            if newly.any():
                active &= ~newly
                remaining -= int(newly.sum())
                cnt -= member[:, newly].sum(axis=1)
    return alpha, order
