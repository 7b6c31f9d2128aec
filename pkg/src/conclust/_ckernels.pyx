# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels; same API as ``_pykernels``."""

import numpy as np
cimport numpy as cnp
from cpython.ref cimport Py_INCREF
from cpython.tuple cimport PyTuple_New, PyTuple_SET_ITEM

cnp.import_array()

cdef enum:
    MAXB = 128


cdef inline tuple _pack(int* lab, int m):
    cdef tuple t = PyTuple_New(m)
    cdef object o
    cdef int i
    for i in range(m):
        o = lab[i]
        Py_INCREF(o)
        PyTuple_SET_ITEM(t, i, o)
    return t


cdef inline int _load(tuple p, int* lab) except -1:
    cdef Py_ssize_t m = len(p)
    cdef Py_ssize_t i
    if m > MAXB - 2:
        raise ValueError("bag too large for compiled kernels")
    for i in range(m):
        lab[i] = <int>p[i]
    return <int>m


cdef inline void _canon(int* lab, int m):
    # labels are assumed to lie in [0, 2*MAXB)
    cdef int seen[2 * MAXB]
    cdef int i, nxt = 0
    for i in range(2 * MAXB):
        seen[i] = -1
    for i in range(m):
        if seen[lab[i]] < 0:
            seen[lab[i]] = nxt
            nxt += 1
        lab[i] = seen[lab[i]]


def rgs_canonical(labels):
    seen = {}
    out = []
    for x in labels:
        if x not in seen:
            seen[x] = len(seen)
        out.append(seen[x])
    return tuple(out)


cdef inline int _find(int* parent, int x):
    while parent[x] != x:
        parent[x] = parent[parent[x]]
        x = parent[x]
    return x


cdef tuple _join(tuple p, tuple q):
    cdef int a[MAXB]
    cdef int b[MAXB]
    cdef int parent[MAXB]
    cdef int first[MAXB]
    cdef int m = _load(p, a)
    cdef int i, ra, rb
    if _load(q, b) != m:
        raise ValueError("partitions of different bags")
    for i in range(m):
        parent[i] = i
        first[i] = -1
    for i in range(m):
        if first[b[i]] >= 0:
            ra = _find(parent, a[i])
            rb = _find(parent, first[b[i]])
            if ra != rb:
                if ra < rb:
                    parent[rb] = ra
                else:
                    parent[ra] = rb
        else:
            first[b[i]] = a[i]
    for i in range(m):
        a[i] = _find(parent, a[i])
    _canon(a, m)
    return _pack(a, m)


def rgs_join(tuple p, tuple q):
    return _join(p, q)


def rgs_insert(tuple p, int i):
    cdef int a[MAXB]
    cdef int out[MAXB]
    cdef int m = _load(p, a)
    cdef int j, o = 0
    for j in range(m + 1):
        if j == i:
            out[j] = m + 1
        else:
            out[j] = a[o]
            o += 1
    _canon(out, m + 1)
    return _pack(out, m + 1)


def rgs_remove(tuple p, int i):
    cdef int a[MAXB]
    cdef int m = _load(p, a)
    cdef int j
    for j in range(i, m - 1):
        a[j] = a[j + 1]
    _canon(a, m - 1)
    return _pack(a, m - 1)


def rgs_merge(tuple p, int i, int j):
    cdef int a[MAXB]
    cdef int m = _load(p, a)
    cdef int x, lo, hi
    if a[i] == a[j]:
        return p
    lo = a[i] if a[i] < a[j] else a[j]
    hi = a[i] + a[j] - lo
    for x in range(m):
        if a[x] == hi:
            a[x] = lo
    _canon(a, m)
    return _pack(a, m)


def rgs_is_singleton(tuple p, int i):
    cdef int a[MAXB]
    cdef int m = _load(p, a)
    cdef int j, c = 0
    for j in range(m):
        if a[j] == a[i]:
            c += 1
    return c == 1


cdef inline bint _better(object cur, object value, object back):
    if cur is None:
        return True
    if value < cur[0]:
        return True
    return value == cur[0] and back < cur[1]


def join_center(dict left, dict right, cap):
    cdef dict by_a = {}
    cdef dict out = {}
    cdef tuple key, lkey, rkey, a, p1, p2, back, row
    cdef list rows
    for key, entry in right.items():
        rows = by_a.get(key[0])
        if rows is None:
            rows = []
            by_a[key[0]] = rows
        rows.append((key[1], entry[0], key))
    for lkey, entry in left.items():
        rows = by_a.get(lkey[0])
        if rows is None:
            continue
        lval = entry[0]
        a = lkey[0]
        p1 = lkey[1]
        for row in rows:
            v = lval + row[1]
            if v > cap:
                continue
            p2 = row[0]
            rkey = row[2]
            key = (a, _join(p1, p2))
            back = (lkey, rkey)
            cur = out.get(key)
            if _better(cur, v, back):
                out[key] = (v, back)
    return out


def join_budget(dict left, dict right, int kmax):
    cdef dict by_a = {}
    cdef dict out = {}
    cdef tuple key, lkey, rkey, a, p1, back, row
    cdef list rows
    cdef int b1, b
    for key, entry in right.items():
        rows = by_a.get(key[1])
        if rows is None:
            rows = []
            by_a[key[1]] = rows
        rows.append((key[0], key[2], entry[0], key))
    for lkey, entry in left.items():
        rows = by_a.get(lkey[1])
        if rows is None:
            continue
        lval = entry[0]
        b1 = lkey[0]
        a = lkey[1]
        p1 = lkey[2]
        for row in rows:
            b = b1 + <int>row[0]
            if b > kmax:
                continue
            v = lval + row[2]
            rkey = row[3]
            key = (b, a, _join(p1, row[1]))
            back = (lkey, rkey)
            cur = out.get(key)
            if _better(cur, v, back):
                out[key] = (v, back)
    return out


def connected_balls(indptr_in, indices_in, dist_in, centers_in, radii_in):
    cdef long[::1] indptr = np.ascontiguousarray(indptr_in, dtype=np.int64).astype(np.int_)
    cdef long[::1] indices = np.ascontiguousarray(indices_in, dtype=np.int64).astype(np.int_)
    cdef const double[:, ::1] dist = np.ascontiguousarray(dist_in, dtype=np.float64)
    cdef long[::1] centers = np.ascontiguousarray(centers_in, dtype=np.int64).astype(np.int_)
    cdef const double[::1] radii = np.ascontiguousarray(radii_in, dtype=np.float64)
    cdef Py_ssize_t n = dist.shape[0]
    cdef Py_ssize_t P = centers.shape[0]
    out_arr = np.zeros((P, n), dtype=np.uint8)
    cdef cnp.uint8_t[:, ::1] out = out_arr
    cdef long[::1] stack = np.empty(max(n, 1), dtype=np.int_)
    cdef Py_ssize_t p, top, j
    cdef long v, u, w
    cdef double r
    for p in range(P):
        v = centers[p]
        r = radii[p]
        out[p, v] = 1
        stack[0] = v
        top = 1
        while top:
            top -= 1
            u = stack[top]
            for j in range(indptr[u], indptr[u + 1]):
                w = indices[j]
                if not out[p, w] and dist[v, w] <= r:
                    out[p, w] = 1
                    stack[top] = w
                    top += 1
    return out_arr


def grow_duals(member_in, cap_in, double tol):
    cdef const cnp.uint8_t[:, ::1] member = np.ascontiguousarray(member_in, dtype=np.uint8)
    cdef const double[::1] cap = np.ascontiguousarray(cap_in, dtype=np.float64)
    cdef Py_ssize_t P = member.shape[0]
    cdef Py_ssize_t m = member.shape[1]
    alpha_arr = np.zeros(m)
    cdef double[::1] alpha = alpha_arr
    cdef cnp.uint8_t[::1] active = np.ones(m, dtype=np.uint8)
    cdef double[::1] sums = np.zeros(P)
    cdef long[::1] cnt = np.zeros(P, dtype=np.int_)
    cdef cnp.uint8_t[::1] tight = np.zeros(P, dtype=np.uint8)
    cdef list order = []
    cdef list hits
    cdef Py_ssize_t p, q, u, remaining = m
    cdef long first
    cdef double step, best
    for p in range(P):
        for u in range(m):
            cnt[p] += member[p, u]
    while remaining:
        first = -1
        best = 0.0
        for p in range(P):
            if cnt[p] > 0 and not tight[p]:
                step = (cap[p] - sums[p]) / cnt[p]
                if first < 0 or step < best:
                    best = step
                    first = p
        if first < 0:
            return alpha_arr, None
        if best < 0.0:
            best = 0.0
        for u in range(m):
            if active[u]:
                alpha[u] += best
        for p in range(P):
            sums[p] += cnt[p] * best
        hits = []
        for p in range(P):
            if cnt[p] > 0 and not tight[p] and (p == first or sums[p] >= cap[p] - tol):
                hits.append(p)
        for p in hits:
            tight[p] = 1
            order.append(p)
            for u in range(m):
                if member[p, u] and active[u]:
                    active[u] = 0
                    remaining -= 1
                    for q in range(P):
                        if member[q, u]:
                            cnt[q] -= 1
    return alpha_arr, order
