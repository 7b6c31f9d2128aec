"""Tree decompositions, nice decompositions and the bag-partition algebra."""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass, field
from typing import Iterator

import networkx as nx
from networkx.algorithms.approximation import treewidth_min_fill_in

from . import kernels
from .model import InputError, Instance

LEAF, INTRODUCE_VERTEX, INTRODUCE_EDGE, FORGET, JOIN = "leaf", "introduce_vertex", "introduce_edge", "forget", "join"
NICE_SIZE_CONSTANT = 16
PARTITION_LIMIT = 12


# -- bag partitions -------------------------------------------------------

def join_partitions(p1: tuple, p2: tuple) -> tuple:
    """Finest common coarsening of two restricted growth strings over one bag."""
    if len(p1) != len(p2):
        raise InputError("partitions are over different ground sets")
    return kernels.rgs_join(tuple(p1), tuple(p2))


def enumerate_partitions(size: int, limit: int = PARTITION_LIMIT) -> Iterator[tuple]:
    """All set partitions of an ordered bag of ``size`` elements, as restricted growth strings."""
    if size > limit:
        raise InputError(f"bag of size {size} exceeds partition limit {limit}")
    if size == 0:
        yield ()
        return
    labels = [0] * size

    def rec(i, top):
        if i == size:
            yield tuple(labels)
            return
        for x in range(top + 2):
            labels[i] = x
            yield from rec(i + 1, max(top, x))

    yield from rec(1, 0)


def partition_blocks(bag, rgs) -> list[frozenset]:
    blocks = defaultdict(set)
    for v, lab in zip(bag, rgs):
        blocks[lab].add(v)
    return [frozenset(blocks[i]) for i in sorted(blocks)]


def rgs_from_blocks(bag, blocks) -> tuple:
    where = {}
    for i, b in enumerate(blocks):
        for v in b:
            where[v] = i
    return kernels.rgs_canonical([where[v] for v in bag])


# -- tree decompositions --------------------------------------------------

@dataclass(frozen=True)
class TreeDecomposition:
    bags: tuple
    tree_edges: tuple

    @classmethod
    def make(cls, bags, tree_edges):
        b = tuple(tuple(sorted(int(v) for v in bag)) for bag in bags)
        e = tuple(sorted((min(int(i), int(j)), max(int(i), int(j))) for i, j in tree_edges))
        return cls(b, e)

    @property
    def width(self) -> int:
        return max((len(b) for b in self.bags), default=0) - 1

    def to_dict(self) -> dict:
        return {"bags": [list(b) for b in self.bags], "tree_edges": [list(e) for e in self.tree_edges]}

    @classmethod
    def from_dict(cls, data) -> "TreeDecomposition":
        try:
            return cls.make(data["bags"], data.get("tree_edges", []))
        except (KeyError, TypeError, ValueError) as exc:
            raise InputError(f"malformed decomposition: {exc}") from None


@dataclass
class DecompositionReport:
    problems: list = field(default_factory=list)
    width: int = -1

    @property
    def ok(self) -> bool:
        return not self.problems


def validate_decomposition(inst: Instance, td: TreeDecomposition) -> DecompositionReport:
    rep = DecompositionReport(width=td.width)
    nb = len(td.bags)
    if nb == 0:
        rep.problems.append("decomposition has no bags")
        return rep
    for i, j in td.tree_edges:
        if not (0 <= i < nb and 0 <= j < nb) or i == j:
            rep.problems.append(f"tree edge ({i},{j}) is invalid")
            return rep
    T = nx.Graph()
    T.add_nodes_from(range(nb))
    T.add_edges_from(td.tree_edges)
    if not nx.is_tree(T):
        rep.problems.append("bag graph is not a tree")
        return rep
    where = defaultdict(list)
    for i, bag in enumerate(td.bags):
        for v in bag:
            if not 0 <= v < inst.n:
                rep.problems.append(f"bag {i} contains unknown vertex {v}")
            where[v].append(i)
    for v in range(inst.n):
        if not where[v]:
            rep.problems.append(f"vertex {v} is in no bag")
        elif not nx.is_connected(T.subgraph(where[v])):
            rep.problems.append(f"bags containing vertex {v} are not connected")
    bagsets = [set(b) for b in td.bags]
    for u, v in inst.edges:
        if not any(u in b and v in b for b in bagsets):
            rep.problems.append(f"edge ({u},{v}) uncovered")
    return rep


def heuristic_decomposition(inst: Instance) -> TreeDecomposition:
    """Min-fill elimination ordering decomposition (no optimality claim)."""
    G = nx.Graph()
    G.add_nodes_from(range(inst.n))
    G.add_edges_from(inst.edges)
    _, T = treewidth_min_fill_in(G)
    nodes = sorted(T.nodes(), key=lambda b: (-len(b), sorted(b)))
    index = {b: i for i, b in enumerate(nodes)}
    edges = [(index[a], index[b]) for a, b in T.edges()]
    return TreeDecomposition.make(nodes, edges)


def _simplify(td: TreeDecomposition):
    """Contract tree edges whose bags are nested; afterwards no bag is a subset of a neighbour."""
    bags = {i: frozenset(b) for i, b in enumerate(td.bags)}
    nbr = {i: set() for i in bags}
    for i, j in td.tree_edges:
        nbr[i].add(j)
        nbr[j].add(i)
    changed = True
    while changed:
        changed = False
        for i in sorted(bags):
            if i not in bags:
                continue
            for j in sorted(nbr[i]):
                if bags[i] <= bags[j]:
                    # fold i into j
                    for x in nbr[i]:
                        if x != j:
                            nbr[x].discard(i)
                            nbr[x].add(j)
                            nbr[j].add(x)
                    nbr[j].discard(i)
                    del bags[i], nbr[i]
                    changed = True
                    break
    return bags, nbr


@dataclass(frozen=True)
class NiceDecomposition:
    """Rooted nice decomposition; node ids are in post-order (children first)."""

    kinds: tuple
    bags: tuple
    children: tuple
    vertex: tuple
    edge: tuple
    root: int
    width: int

    def __len__(self):
        return len(self.kinds)

    def counts(self) -> dict:
        out = defaultdict(int)
        for k in self.kinds:
            out[k] += 1
        return dict(out)


def make_nice(td: TreeDecomposition, inst: Instance) -> NiceDecomposition:
    rep = validate_decomposition(inst, td)
    if not rep.ok:
        raise InputError("invalid decomposition: " + "; ".join(rep.problems))
    bags, nbr = _simplify(td)
    root_bag = min(bags)

    kinds, nbag, kids, vert = [], [], [], []

    def new(kind, bag, children=(), v=-1):
        kinds.append(kind)
        nbag.append(tuple(sorted(bag)))
        kids.append(list(children))
        vert.append(v)
        return len(kinds) - 1

    def chain_to(node, have, want):
        for v in sorted(have - want):
            have = have - {v}
            node = new(FORGET, have, [node], v)
        for v in sorted(want - have):
            have = have | {v}
            node = new(INTRODUCE_VERTEX, have, [node], v)
        return node

    # iterative post-order over the simplified bag tree
    parent = {root_bag: None}
    order = []
    stack = [root_bag]
    while stack:
        t = stack.pop()
        order.append(t)
        for c in sorted(nbr[t], reverse=True):
            if c != parent[t]:
                parent[c] = t
                stack.append(c)
    top = {}
    for t in reversed(order):
        want = bags[t]
        cs = sorted(c for c in nbr[t] if c != parent[t])
        if cs:
            branches = [chain_to(top[c], bags[c], want) for c in cs]
        else:
            branches = [chain_to(new(LEAF, ()), frozenset(), want)]
        node = branches[0]
        for b in branches[1:]:
            node = new(JOIN, want, [node, b])
        top[t] = node
    root = chain_to(top[root_bag], bags[root_bag], frozenset())

    # each edge sits just below the forget node of whichever endpoint is forgotten first
    depth = [0] * len(kinds)
    up = [-1] * len(kinds)
    for x in range(len(kinds) - 1, -1, -1):
        for c in kids[x]:
            up[c] = x
            depth[c] = depth[x] + 1
    forget_at = {vert[x]: x for x in range(len(kinds)) if kinds[x] == FORGET}
    below = defaultdict(list)
    for u, v in inst.edges:
        fu, fv = forget_at[u], forget_at[v]
        below[fu if depth[fu] >= depth[fv] else fv].append((u, v))
    edge_of = {}
    for f in sorted(below):
        child = kids[f][0]
        for e in sorted(below[f]):
            child = new(INTRODUCE_EDGE, nbag[kids[f][0]], [child])
            edge_of[child] = e
        kids[f] = [child]

    # renumber in post-order
    ids = {}
    seq = []
    stack = [(root, False)]
    while stack:
        x, done = stack.pop()
        if done:
            ids[x] = len(seq)
            seq.append(x)
            continue
        stack.append((x, True))
        for c in reversed(kids[x]):
            stack.append((c, False))
    nice = NiceDecomposition(
        kinds=tuple(kinds[x] for x in seq),
        bags=tuple(nbag[x] for x in seq),
        children=tuple(tuple(ids[c] for c in kids[x]) for x in seq),
        vertex=tuple(vert[x] for x in seq),
        edge=tuple(edge_of.get(x) for x in seq),
        root=ids[root],
        width=max(len(b) for b in nbag) - 1,
    )
    bound = NICE_SIZE_CONSTANT * (nice.width + 1) * inst.n
    if len(nice) > bound:
        raise RuntimeError(f"nice decomposition has {len(nice)} nodes, above {bound}")
    return nice


def nice_decomposition(inst: Instance, td: TreeDecomposition | None = None) -> NiceDecomposition:
    """Nice form of ``td``, or of the min-fill decomposition when none is given."""
    return make_nice(td if td is not None else heuristic_decomposition(inst), inst)


def check_nice(nice: NiceDecomposition, inst: Instance) -> list[str]:
    """Structural problems of a nice decomposition (empty when sound)."""
    problems = []
    if nice.bags[nice.root]:
        problems.append("root bag not empty")
    seen_edges = defaultdict(int)
    forgotten = defaultdict(int)
    for x, kind in enumerate(nice.kinds):
        bag = set(nice.bags[x])
        ch = nice.children[x]
        if any(c >= x for c in ch):
            problems.append(f"node {x} is not in post-order")
        if kind == LEAF:
            if ch or bag:
                problems.append(f"leaf {x} malformed")
        elif kind == JOIN:
            if len(ch) != 2 or any(set(nice.bags[c]) != bag for c in ch):
                problems.append(f"join {x} malformed")
        else:
            if len(ch) != 1:
                problems.append(f"node {x} should have one child")
                continue
            cb = set(nice.bags[ch[0]])
            v = nice.vertex[x]
            if kind == INTRODUCE_VERTEX and not (v not in cb and bag == cb | {v}):
                problems.append(f"introduce {x} malformed")
            elif kind == FORGET:
                forgotten[v] += 1
                if not (v in cb and bag == cb - {v}):
                    problems.append(f"forget {x} malformed")
            elif kind == INTRODUCE_EDGE:
                u, w = nice.edge[x]
                seen_edges[(u, w)] += 1
                if bag != cb or u not in bag or w not in bag:
                    problems.append(f"introduce-edge {x} malformed")
    for e in inst.edges:
        if seen_edges[e] != 1:
            problems.append(f"edge {e} introduced {seen_edges[e]} times")
    if len(seen_edges) != len(inst.edges):
        problems.append("unknown edge introduced")
    for v in range(inst.n):
        if forgotten[v] != 1:
            problems.append(f"vertex {v} forgotten {forgotten[v]} times")
    return problems
