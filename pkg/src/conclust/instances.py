"""Instance generators: random families, bounded-treewidth graphs, the
layered SAT gadget for fixed-centre assignment, and the reduction from
fixed-centre assignment to free-centre k-center."""

from __future__ import annotations

import itertools
import math
import os
import re
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .decomposition import TreeDecomposition
from .model import ClusteringSolution, InputError, Instance, induced_components

HARDNESS_BUDGET = int(os.environ.get("CONCLUST_HARDNESS_BUDGET", 20000))


# -- bundles --------------------------------------------------------------

@dataclass
class Bundle:
    instance: Instance
    decomposition: TreeDecomposition | None = None
    centers: list | None = None
    meta: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        out = {"instance": self.instance.to_dict(), "meta": dict(self.meta)}
        if self.decomposition is not None:
            out["decomposition"] = self.decomposition.to_dict()
        if self.centers is not None:
            out["centers"] = [int(c) for c in self.centers]
        return out

    @classmethod
    def from_dict(cls, data: dict, *, check_triangle=True) -> "Bundle":
        if "instance" not in data:
            return cls(Instance.from_dict(data, check_triangle=check_triangle))
        td = data.get("decomposition")
        return cls(
            Instance.from_dict(data["instance"], check_triangle=check_triangle),
            None if td is None else TreeDecomposition.from_dict(td),
            data.get("centers"),
            data.get("meta", {}),
        )


# -- random families ------------------------------------------------------

def _points(rng, n, dim, grid):
    if grid:
        return rng.integers(0, grid, size=(n, dim)).astype(float)
    return rng.random((n, dim))


def _relabel(n, edges, rng):
    perm = rng.permutation(n)
    return [(int(perm[u]), int(perm[v])) for u, v in edges], perm


def gen_random_tree(n, k, seed, *, norm="l2", grid=None, dim=2) -> Instance:
    rng = np.random.default_rng(seed)
    edges = [(v, int(rng.integers(0, v))) for v in range(1, n)]
    edges, _ = _relabel(n, edges, rng)
    return Instance.from_coords(_points(rng, n, dim, grid), norm, edges, k)


def gen_random_geometric(n, k, seed, *, radius=None, edge_prob=None, connect=True,
                         norm="l2", grid=None, dim=2) -> Instance:
    """Random points; edges between points within ``radius`` or with probability ``edge_prob``."""
    rng = np.random.default_rng(seed)
    pts = _points(rng, n, dim, grid)
    inst = Instance.from_coords(pts, norm, [], k)
    edges = set()
    for u in range(n):
        for v in range(u + 1, n):
            if radius is not None and inst.dist[u, v] <= radius:
                edges.add((u, v))
            elif edge_prob is not None and rng.random() < edge_prob:
                edges.add((u, v))
    if connect:
        # chain the components together through their smallest vertices
        tmp = inst.with_edges(sorted(edges))
        comps = induced_components(tmp.adj, range(n))
        for a, b in zip(comps, comps[1:]):
            edges.add((a[0], b[0]))
    return inst.with_edges(sorted(edges))


def gen_partial_ktree(n, k, w, seed, *, norm="l2", grid=None, dim=2):
    """Random partial w-tree and its width-w decomposition.

    Builds a w-tree by repeatedly attaching a vertex to a w-clique, then
    drops every edge outside a spanning tree with probability 1/2.
    """
    rng = np.random.default_rng(seed)
    base = min(n, w + 1)
    edges = {(u, v) for u in range(base) for v in range(u + 1, base)}
    spanning = {(u, u + 1) for u in range(base - 1)}
    bags = [tuple(range(base))]
    tree_edges = []
    cliques = [(c, 0) for c in itertools.combinations(range(base), w)] if n > base else []
    for v in range(base, n):
        clique, owner = cliques[int(rng.integers(0, len(cliques)))]
        edges.update((u, v) for u in clique)
        if clique:
            spanning.add((clique[int(rng.integers(0, len(clique)))], v))
        bags.append(clique + (v,))
        b = len(bags) - 1
        tree_edges.append((owner, b))
        for drop in range(len(clique)):
            cliques.append((clique[:drop] + clique[drop + 1:] + (v,), b))
    kept = sorted(e for e in sorted(edges) if e in spanning or rng.random() < 0.5)
    kept, perm = _relabel(n, kept, rng)
    bags = [[int(perm[u]) for u in b] for b in bags]
    inst = Instance.from_coords(_points(rng, n, dim, grid), norm, kept, k)
    return inst, TreeDecomposition.make(bags, tree_edges)


# -- CNF formulas ---------------------------------------------------------

def parse_formula(text: str) -> tuple:
    """Parse ``"(x1 | ~x2) & (x3)"`` into clauses of signed variable indices."""
    clauses = []
    for part in text.split("&"):
        part = part.strip().strip("()").strip()
        if not part:
            raise InputError(f"empty clause in formula {text!r}")
        lits = []
        for tok in part.split("|"):
            m = re.fullmatch(r"\s*([~!-]?)\s*x(\d+)\s*", tok)
            if not m or int(m.group(2)) < 1:
                raise InputError(f"cannot parse literal {tok.strip()!r}")
            lits.append(-int(m.group(2)) if m.group(1) else int(m.group(2)))
        if not lits:
            raise InputError(f"empty clause in formula {text!r}")
        clauses.append(tuple(lits))
    return tuple(clauses)


def format_formula(clauses) -> str:
    return " & ".join("(" + " | ".join(("~" if l < 0 else "") + f"x{abs(l)}" for l in c) + ")" for c in clauses)


def formula_vars(clauses) -> int:
    return max(abs(l) for c in clauses for l in c)


def is_satisfiable(clauses) -> bool:
    nv = formula_vars(clauses)
    for bits in itertools.product((False, True), repeat=nv):
        if all(any(bits[abs(l) - 1] == (l > 0) for l in c) for c in clauses):
            return True
    return False


def random_cnf(nvars, nclauses, seed, max_width=3) -> tuple:
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(nclauses):
        width = int(rng.integers(1, min(max_width, nvars) + 1))
        vs = rng.choice(np.arange(1, nvars + 1), size=width, replace=False)
        out.append(tuple(int(v) if rng.random() < 0.5 else -int(v) for v in sorted(vs)))
    return tuple(out)


# -- layered gadget -------------------------------------------------------

BOTTOM = None


def layered_distance(p, q) -> int:
    if len(p) != len(q):
        raise ValueError("positions of different length")
    total = 0
    for a, b in zip(p, q):
        if a == b:
            continue
        total += 1 if (a is BOTTOM) != (b is BOTTOM) else 2
    return total


def compute_S(L: int) -> list[int]:
    if L < 1:
        raise ValueError("L must be at least 1")
    S = [2]
    for l in range(1, L):
        prod = 1
        for i in range(1, l):
            prod *= math.comb(S[i], S[i - 1])
        S.append((S[l - 1] - 1) * 2 * prod + 1)
    return S


def hardness_size(L, nvars, nclauses) -> int:
    """Exact vertex count of the L-layer gadget."""
    S = compute_S(L)
    N = 1
    for h in range(1, L + 1):
        eps = math.prod(S[1:h])
        choices = math.prod(math.comb(S[g], S[g - 1]) for g in range(1, h))
        u = math.prod(S[: h - 1])
        N = 2 * (nvars + 1) * eps + choices * (nclauses**u + nvars**u) * N
    return N


@dataclass
class HardnessParams:
    L: int
    formula: tuple
    budget: int = HARDNESS_BUDGET

    def __post_init__(self):
        if self.L < 1:
            raise InputError("L must be at least 1")
        if not self.formula:
            raise InputError("formula must have at least one clause")
        if any(len(c) == 0 or len(c) > 3 for c in self.formula):
            raise InputError("clauses need one to three literals")


def gen_hardness(params: HardnessParams):
    """Layered SAT gadget.  Returns (instance, centres, vertex labels).

    Satisfiable formulas admit a connected assignment to the centres of
    radius 1; unsatisfiable ones force radius 2L.
    """
    L, clauses = params.L, params.formula
    nv, m = formula_vars(clauses), len(clauses)
    size = hardness_size(L, nv, m)
    if size > params.budget:
        raise InputError(f"gadget would have {size} vertices, above budget {params.budget}")
    S = compute_S(L)
    pos, labels, edges = [], [], []

    def vertex(p, label):
        pos.append(tuple(p))
        labels.append(label)
        return len(pos) - 1

    def build(l, pi, psi, tag):
        """Instance I(l, pi, psi); returns {delta: vertex} for its Q vertices."""
        if l == L:
            return {(): vertex(pi, f"Q{tag}")}
        t, f = sorted(psi[0])
        Q = {}
        lit = {}
        for eps in itertools.product(*[sorted(s) for s in psi[1:]]):
            T = Q[(t,) + eps] = vertex(pi + (t,) + eps, f"T{tag}{eps}")
            Fv = Q[(f,) + eps] = vertex(pi + (f,) + eps, f"F{tag}{eps}")
            for i in range(1, nv + 1):
                for sign in (1, -1):
                    x = lit[(sign * i, eps)] = vertex(pi + (BOTTOM,) + eps,
                                                      f"{'' if sign > 0 else '~'}x{i}{tag}{eps}")
                    edges.append((x, T))
                    edges.append((x, Fv))
        subsets = [list(itertools.combinations(sorted(psi[g + 1]), S[g])) for g in range(len(psi) - 1)]
        for choice in itertools.product(*subsets):
            sub = tuple(frozenset(c) for c in choice)
            deltas = list(itertools.product(*[sorted(s) for s in sub]))
            u = len(deltas)
            for js in itertools.product(range(m), repeat=u):
                q = build(l + 1, pi + (t,), sub, f"{tag}t{js}")
                for h, delta in enumerate(deltas):
                    for lit_ in clauses[js[h]]:
                        edges.append((q[delta], lit[(lit_, delta)]))
            for js in itertools.product(range(1, nv + 1), repeat=u):
                q = build(l + 1, pi + (f,), sub, f"{tag}f{js}")
                for h, delta in enumerate(deltas):
                    edges.append((q[delta], lit[(js[h], delta)]))
                    edges.append((q[delta], lit[(-js[h], delta)]))
        return Q

    top = build(0, (), tuple(frozenset(range(1, s + 1)) for s in S), "")
    centers = [top[d] for d in sorted(top)]
    n = len(pos)
    dist = np.zeros((n, n))
    for a in range(n):
        for b in range(a + 1, n):
            dist[a, b] = dist[b, a] = layered_distance(pos[a], pos[b])
    uniq = sorted({(min(a, b), max(a, b)) for a, b in edges})
    inst = Instance.build(n, uniq, dist, len(centers))
    return inst, centers, labels


# -- fixed-centre assignment -> free-centre k-center -----------------------

@dataclass
class Reduction:
    original: Instance
    centers: list          # centres in the original instance
    instance: Instance     # reduced instance
    copy_of: list          # reduced vertex -> original vertex
    layer: list            # reduced vertex -> copy index, -1 for centres

    def map_back(self, sol: ClusteringSolution) -> ClusteringSolution:
        """Turn a free-centre solution of the reduced instance into a connected assignment."""
        red = self.instance
        k = len(self.centers)
        used = {self.layer[c] for c in sol.centers}
        j = min(x for x in range(k + 1) if x not in used)
        keep = {v for v in range(red.n) if self.layer[v] in (-1, j)}
        center_ids = {v for v in range(red.n) if self.layer[v] == -1}
        owner = {}
        for cl in sol.clusters:
            part = [v for v in cl if v in keep]
            for comp in induced_components(red.adj, part):
                comp_set = set(comp)
                seeds = sorted(v for v in comp if v in center_ids)
                if not seeds:
                    raise RuntimeError("component without an original centre")
                queue = deque(seeds)
                for s in seeds:
                    owner[s] = s
                while queue:
                    x = queue.popleft()
                    for y in red.adj[x]:
                        if y in comp_set and y not in owner:
                            owner[y] = owner[x]
                            queue.append(y)
        groups = {c: [] for c in self.centers}
        for v, o in owner.items():
            groups[self.copy_of[o]].append(self.copy_of[v])
        clusters = [groups[c] for c in self.centers]
        value = max(float(self.original.dist[v, c]) for c in self.centers for v in groups[c])
        return ClusteringSolution.make(clusters, self.centers, "center", value)


def assignment_to_free_reduction(inst: Instance, centers) -> Reduction:
    C = sorted(set(int(c) for c in centers))
    k = len(C)
    Cset = set(C)
    rest = [v for v in range(inst.n) if v not in Cset]
    copy_of = list(C)
    layer = [-1] * k
    idx = {}
    for j in range(k + 1):
        for v in rest:
            idx[(v, j)] = len(copy_of)
            copy_of.append(v)
            layer.append(j)
    cid = {c: i for i, c in enumerate(C)}
    edges = []
    for u, v in inst.edges:
        if u in Cset and v in Cset:
            continue
        if u in Cset or v in Cset:
            c, x = (u, v) if u in Cset else (v, u)
            edges.extend((cid[c], idx[(x, j)]) for j in range(k + 1))
        else:
            edges.extend((idx[(u, j)], idx[(v, j)]) for j in range(k + 1))
    orig = np.asarray(copy_of)
    dist = inst.dist[np.ix_(orig, orig)]
    red = Instance.build(len(copy_of), edges, dist, k, check_triangle=False)
    return Reduction(inst, C, red, copy_of, layer)
