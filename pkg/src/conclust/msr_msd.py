"""Connected min-sum-radii and min-sum-diameter by primal-dual ball covering.

The largest few clusters are guessed as (centre, radius) pairs.  The rest
of the graph is covered by connected balls that are (almost) tight for a
dual solution of the covering LP, with the Lagrangian price ``lam`` per
ball tuned so the overlap structure has about ``k'`` components.  Balls of
one overlap component are merged into one cluster.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field
from itertools import combinations

import numpy as np

from . import kernels
from .model import ClusteringSolution, InfeasibleError, InputError, Instance, best_center, diameter

DSR_EXACT_LIMIT = 20
MAX_GUESSES = int(os.environ.get("CONCLUST_MSR_MAX_GUESSES", 3))
FEASIBILITY_TOL = 1e-9
MAX_BISECTIONS = 60

# report flags
EXTRA_NOT_ALMOST_TIGHT = "extra_pair_not_almost_tight"
EXTRA_OUTSIDE_HIGH = "extra_pair_outside_high_tight_set"
MULTI_EXTRA = "multiple_extra_pairs"
LAMBDA_CAP = "lambda_cap_reached"
DSR_INEXACT = "dsr_not_exact"


@dataclass(frozen=True, order=True)
class Pair:
    center: int
    radius: float


def _mask(row) -> int:
    m = 0
    for i in np.flatnonzero(row):
        m |= 1 << int(i)
    return m


def _bits(mask: int) -> list[int]:
    out = []
    while mask:
        low = mask & -mask
        out.append(low.bit_length() - 1)
        mask ^= low
    return out


def _csr(inst: Instance):
    indptr = np.zeros(inst.n + 1, dtype=np.int64)
    indptr[1:] = np.cumsum([len(a) for a in inst.adj])
    indices = np.array([w for a in inst.adj for w in a], dtype=np.int64)
    return indptr, indices


def connected_ball(inst: Instance, v: int, r: float) -> frozenset:
    """Vertices reachable from v through vertices within distance r of v."""
    indptr, indices = _csr(inst)
    row = kernels.connected_balls(indptr, indices, inst.dist, np.array([v]), np.array([float(r)]))[0]
    return frozenset(int(i) for i in np.flatnonzero(row))


def enumerate_pairs(inst: Instance) -> list[Pair]:
    """Every (v, d(v, w)) with radii deduplicated per centre."""
    return [Pair(v, float(r)) for v in range(inst.n) for r in np.unique(inst.dist[v])]


class PairTable:
    """All pairs of an instance with their connected balls as bitmasks."""

    def __init__(self, inst: Instance, pairs: list[Pair] | None = None):
        self.inst = inst
        self.pairs = enumerate_pairs(inst) if pairs is None else list(pairs)
        self.centers = np.array([p.center for p in self.pairs], dtype=np.int64)
        self.radii = np.array([p.radius for p in self.pairs], dtype=float)
        indptr, indices = _csr(inst)
        self.member = kernels.connected_balls(indptr, indices, inst.dist, self.centers, self.radii)
        self.masks = [_mask(row) for row in self.member]

    def __len__(self):
        return len(self.pairs)


def components(masks) -> list[list[int]]:
    """Indices of ``masks`` grouped by connected components of the overlap graph."""
    m = len(masks)
    parent = list(range(m))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for i in range(m):
        for j in range(i + 1, m):
            if masks[i] & masks[j]:
                ri, rj = find(i), find(j)
                if ri != rj:
                    parent[max(ri, rj)] = min(ri, rj)
    groups = {}
    for i in range(m):
        groups.setdefault(find(i), []).append(i)
    return list(groups.values())


def _unions(masks) -> list[int]:
    """Vertex unions of the overlap components of ``masks``."""
    unions = []
    for m in masks:
        for i in [i for i, u in enumerate(unions) if u & m][::-1]:
            m |= unions.pop(i)
        unions.append(m)
    return unions


def _count_components(masks) -> int:
    return len(_unions(masks))


def dsr(radii, masks, limit: int = DSR_EXACT_LIMIT) -> tuple[float, bool]:
    """Largest radius sum over pairs with pairwise disjoint balls.

    Exact branch and bound up to ``limit`` pairs; beyond that a greedy
    lower bound is returned.  Second value says whether it is exact.
    """
    order = sorted(range(len(radii)), key=lambda i: (-radii[i], i))
    r = [float(radii[i]) for i in order]
    b = [masks[i] for i in order]
    if len(r) > limit:
        used, total = 0, 0.0
        for ri, bi in zip(r, b):
            if not used & bi:
                used |= bi
                total += ri
        return total, False
    suffix = [0.0] * (len(r) + 1)
    for i in range(len(r) - 1, -1, -1):
        suffix[i] = suffix[i + 1] + r[i]
    best = 0.0

    def rec(i, used, total):
        nonlocal best
        if total > best:
            best = total
        if i == len(r) or total + suffix[i] <= best:
            return
        if not used & b[i]:
            rec(i + 1, used | b[i], total + r[i])
        rec(i + 1, used, total)

    rec(0, 0, 0.0)
    return best, True


def grow_duals(table: PairTable, vprime: list[int], pair_ids, lam: float, tol: float = FEASIBILITY_TOL):
    """Uniform dual growth over V' for the given pairs at price ``lam``.

    Returns (alpha over V' in order, tight pair ids in tightening order).
    Raises InfeasibleError if the pairs cannot cover V'.
    """
    ids = np.asarray(pair_ids, dtype=np.int64)
    if not len(vprime):
        return np.zeros(0), []
    sub = np.ascontiguousarray(table.member[np.ix_(ids, np.asarray(vprime))])
    cap = table.radii[ids] + lam
    alpha, order = kernels.grow_duals(sub, cap, tol * max(1.0, float(cap.max(initial=0.0))))
    if order is None:
        raise InfeasibleError("pairs do not cover V'")
    seen, tight = set(), []
    for p in order:
        if p not in seen:
            seen.add(p)
            tight.append(int(ids[p]))
    return alpha, tight


def dual_sums(table: PairTable, vprime: list[int], pair_ids, alpha) -> np.ndarray:
    if not len(vprime):
        return np.zeros(len(pair_ids))
    sub = table.member[np.ix_(np.asarray(pair_ids, dtype=np.int64), np.asarray(vprime))]
    return sub.astype(float) @ np.asarray(alpha, dtype=float)


@dataclass
class StructuredPairs:
    lam: float
    alpha: np.ndarray
    vprime: list
    bprime: list
    extra: tuple
    mu: float
    components: int
    flags: list = field(default_factory=list)

    @property
    def sentinel(self) -> bool:
        """True when the cover alone already has at most k' components."""
        return not self.extra


def find_structured_pairs(table: PairTable, vprime: list[int], pair_ids, kprime: int, mu: float) -> StructuredPairs:
    """Search the price so the tight cover has >= k' components and one more pair brings it to <= k'."""
    pair_ids = list(pair_ids)
    if not vprime:
        return StructuredPairs(0.0, np.zeros(0), [], [], (), mu, 0)
    n = table.inst.n

    def probe(lam):
        alpha, tight = grow_duals(table, vprime, pair_ids, lam)
        return alpha, tight, _count_components([table.masks[i] for i in tight])

    def done(lam, res, flags=()):
        return StructuredPairs(lam, res[0], list(vprime), sorted(res[1]), (), mu, res[2], list(flags))

    lo, lo_res = 0.0, probe(0.0)
    if lo_res[2] <= kprime:
        return done(lo, lo_res)
    rmax = float(table.radii[pair_ids].max())
    hi = rmax if rmax > 0 else 1.0
    limit = max(rmax, 1.0) * 4 * n * n
    flags = []
    while True:
        hi_res = probe(hi)
        if hi_res[2] == kprime:
            return done(hi, hi_res)
        if hi_res[2] < kprime:
            break
        lo, lo_res = hi, hi_res
        if hi > limit:
            flags.append(LAMBDA_CAP)
            break
        hi *= 2
    if LAMBDA_CAP not in flags:
        prec = mu / (n * n)
        for _ in range(MAX_BISECTIONS):
            if hi - lo <= prec:
                break
            mid = (lo + hi) / 2
            if mid <= lo or mid >= hi:
                break
            res = probe(mid)
            if res[2] == kprime:
                return done(mid, res)
            if res[2] > kprime:
                lo, lo_res = mid, res
            else:
                hi, hi_res = mid, res

    alpha, bprime, ncomp = lo_res
    inside = set(bprime)

    def pick(unions, cands, taken=()):
        # a pair touching j unions leaves len(unions) - j + 1 of them
        scored = []
        for c in cands:
            if c in inside or c in taken:
                continue
            m = table.masks[c]
            touched = sum(1 for u in unions if u & m)
            scored.append((len(unions) - max(touched, 1) + 1, table.radii[c], c))
        return min(scored) if scored else None

    unions = _unions([table.masks[i] for i in bprime])
    high = [] if LAMBDA_CAP in flags else hi_res[1]
    best = pick(unions, high)
    if best is None or best[0] > kprime:
        best = pick(unions, pair_ids)
        if best is not None and best[0] <= kprime:
            flags.append(EXTRA_OUTSIDE_HIGH)
    if best is not None and best[0] <= kprime:
        extras = (best[2],)
    else:
        flags.append(MULTI_EXTRA)
        extras = ()
        pool = list(dict.fromkeys(list(high) + pair_ids))
        while len(unions) > kprime:
            best = pick(unions, pool, extras)
            if best is None:
                raise InfeasibleError(f"cannot reach {kprime} components")
            extras = extras + (best[2],)
            unions = _unions(unions + [table.masks[best[2]]])
    sums = dual_sums(table, vprime, extras, alpha)
    if np.any(sums < table.radii[list(extras)] + lo - mu):
        flags.append(EXTRA_NOT_ALMOST_TIGHT)
    return StructuredPairs(lo, alpha, list(vprime), sorted(bprime), extras, mu, ncomp, flags)


@dataclass
class Component:
    pairs: list
    vertices: list
    rad: float
    diam: float
    sr: float
    dsr: float
    dsr_exact: bool
    center: int

    def to_dict(self) -> dict:
        return {
            "pairs": [[p.center, p.radius] for p in self.pairs],
            "vertices": self.vertices,
            "rad": self.rad, "diam": self.diam, "sr": self.sr, "dsr": self.dsr,
            "dsr_exact": self.dsr_exact, "center": self.center,
        }


def merge_and_evaluate(inst: Instance, pairs, masks, with_dsr: bool = True) -> list[Component]:
    """Merge overlapping balls into clusters; report rad, diam, sr and dsr per cluster."""
    out = []
    for grp in components(masks):
        union = 0
        for i in grp:
            union |= masks[i]
        verts = _bits(union)
        c, rad = best_center(inst.dist, verts)
        radii = [pairs[i].radius for i in grp]
        d, exact = dsr(radii, [masks[i] for i in grp]) if with_dsr else (math.nan, False)
        out.append(Component([pairs[i] for i in grp], verts, float(rad), float(diameter(inst.dist, verts)),
                             float(sum(radii)), d, exact, int(c)))
    seen = 0
    for comp in out:
        m = sum(1 << v for v in comp.vertices)
        if m & seen:
            raise RuntimeError("merged clusters overlap")
        seen |= m
    return sorted(out, key=lambda c: c.vertices)


def bound_violations(comps: list[Component], tol: float = 1e-9) -> list[str]:
    """Clusters breaking rad <= 3 dsr or diam <= 4 dsr (exact dsr only)."""
    bad = []
    for c in comps:
        if not c.dsr_exact:
            continue
        slack = tol * max(1.0, c.dsr)
        if c.rad > 3 * c.dsr + slack:
            bad.append(f"rad {c.rad} > 3*dsr {c.dsr} for {c.vertices}")
        if c.diam > 4 * c.dsr + slack:
            bad.append(f"diam {c.diam} > 4*dsr {c.dsr} for {c.vertices}")
    return bad


def guess_count(eps: float, max_guesses: int = MAX_GUESSES) -> int:
    if not eps > 0:
        raise InputError("eps must be positive")
    g = math.ceil(1 / eps - 1e-12)
    if g > max_guesses:
        raise InputError(f"eps={eps} needs {g} guessed clusters, above the limit {max_guesses}")
    return g


@dataclass
class _Candidate:
    value: float
    comps: list
    guess: tuple
    sp: StructuredPairs
    kprime: int
    pairs: list
    masks: list


def _search(inst: Instance, eps: float, objectives, verify=False, max_guesses=MAX_GUESSES):
    g = guess_count(eps, max_guesses)
    if inst.component_count() > inst.k:
        raise InfeasibleError(f"graph has {inst.component_count()} components, more than k={inst.k}")
    table = PairTable(inst)
    n, k = inst.n, inst.k
    full = (1 << n) - 1
    order = sorted(range(len(table)), key=lambda i: (-table.radii[i], table.centers[i]))
    maxr = float(table.radii.max())
    sp_cache, eval_cache = {}, {}
    best = dict.fromkeys(objectives)
    stats = {"guesses": 0, "skipped": 0, "bound_checks": 0, "bound_violations": []}
    for t in range(min(g, k) + 1):
        for guess in combinations(order, t):
            thr = float(table.radii[guess[-1]]) if t else math.inf
            covered = 0
            for i in guess:
                covered |= table.masks[i]
            vprime = _bits(full & ~covered)
            kprime = k - t
            if kprime == 0 and vprime:
                continue
            stats["guesses"] += 1
            key = (covered, thr, kprime)
            if key not in sp_cache:
                B = [i for i in range(len(table)) if table.radii[i] <= thr]
                mu = (thr if t else maxr) / (n * n)
                try:
                    sp_cache[key] = find_structured_pairs(table, vprime, B, kprime, mu)
                except InfeasibleError:
                    sp_cache[key] = None
            sp = sp_cache[key]
            if sp is None:
                stats["skipped"] += 1
                continue
            chosen = list(dict.fromkeys(list(sp.bprime) + list(sp.extra) + list(guess)))
            ekey = tuple(sorted(set(table.masks[i] for i in chosen)))
            if ekey not in eval_cache:
                pairs = [table.pairs[i] for i in chosen]
                masks = [table.masks[i] for i in chosen]
                comps = merge_and_evaluate(inst, pairs, masks, with_dsr=verify)
                if verify:
                    stats["bound_checks"] += len(comps)
                    stats["bound_violations"] += bound_violations(comps)
                eval_cache[ekey] = (comps, pairs, masks)
            comps, pairs, masks = eval_cache[ekey]
            if len(comps) > k:
                stats["skipped"] += 1
                continue
            for obj in objectives:
                value = sum(c.rad if obj == "msr" else c.diam for c in comps)
                if best[obj] is None or value < best[obj].value:
                    best[obj] = _Candidate(value, comps, tuple(table.pairs[i] for i in guess), sp, kprime,
                                           pairs, masks)
    if any(b is None for b in best.values()):
        raise InfeasibleError("no guess produced a feasible clustering")
    return best, stats


def _finish(inst, eps, obj, cand: _Candidate, stats) -> tuple[ClusteringSolution, dict]:
    comps = cand.comps
    if any(math.isnan(c.dsr) for c in comps):
        comps = merge_and_evaluate(inst, cand.pairs, cand.masks)
    clusters = [c.vertices for c in comps]
    centers = None if obj == "msd" else [c.center for c in comps]
    sol = ClusteringSolution.make(clusters, centers, obj, cand.value)
    flags = list(cand.sp.flags)
    if any(not c.dsr_exact for c in comps):
        flags.append(DSR_INEXACT)
    report = {
        "objective": obj,
        "eps": eps,
        "value": cand.value,
        "guess": [[p.center, p.radius] for p in cand.guess],
        "kprime": cand.kprime,
        "lambda": cand.sp.lam,
        "mu": cand.sp.mu,
        "cover_components": cand.sp.components,
        "extra_pairs": len(cand.sp.extra),
        "components": [c.to_dict() for c in comps],
        "flags": flags,
        "guarantee_degraded": MULTI_EXTRA in flags,
        "bound_violations": bound_violations(comps),
        "search": {k: v for k, v in stats.items()},
    }
    return sol, report


def solve_msr_msd(inst: Instance, eps: float, verify: bool = False, max_guesses: int = MAX_GUESSES):
    """Run the search once and return {"msr": (sol, report), "msd": (sol, report)}."""
    best, stats = _search(inst, eps, ("msr", "msd"), verify, max_guesses)
    return {obj: _finish(inst, eps, obj, best[obj], stats) for obj in ("msr", "msd")}


def solve_msr(inst: Instance, eps: float = 0.5, verify: bool = False, report: bool = False):
    best, stats = _search(inst, eps, ("msr",), verify)
    sol, rep = _finish(inst, eps, "msr", best["msr"], stats)
    return (sol, rep) if report else sol


def solve_msd(inst: Instance, eps: float = 0.5, verify: bool = False, report: bool = False):
    best, stats = _search(inst, eps, ("msd",), verify)
    sol, rep = _finish(inst, eps, "msd", best["msd"], stats)
    return (sol, rep) if report else sol


def solve_msd_unconstrained(inst: Instance, eps: float = 0.5, verify: bool = False, report: bool = False):
    """Min-sum-diameter ignoring the connectivity graph."""
    return solve_msd(inst.complete(), eps, verify, report)
