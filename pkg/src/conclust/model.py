"""Instances, solutions, objective evaluation and feasibility checks."""

from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np

OBJECTIVES = ("center", "median", "means", "msr", "msd")
NORMS = ("l1", "l2", "linf")
METRIC_TOL = 1e-9


class InputError(ValueError):
    """Malformed or inconsistent input data."""


class InfeasibleError(RuntimeError):
    """No solution exists (for example more components than clusters)."""


def metric_from_coords(points, norm: str = "l2") -> np.ndarray:
    try:
        pts = np.asarray(points, dtype=float)
    except ValueError:
        raise InputError("points must all have the same dimension") from None
    if pts.ndim == 1:
        pts = pts.reshape(-1, 1)
    if pts.ndim != 2:
        raise InputError("points must all have the same dimension")
    diff = np.abs(pts[:, None, :] - pts[None, :, :])
    if norm == "l1":
        d = diff.sum(axis=2)
    elif norm == "l2":
        d = np.sqrt((diff**2).sum(axis=2))
    elif norm == "linf":
        d = diff.max(axis=2) if pts.shape[1] else np.zeros((len(pts), len(pts)))
    else:
        raise InputError(f"unknown norm {norm!r}")
    return d


def check_metric(d: np.ndarray, triangle: bool = True, tol: float = METRIC_TOL) -> list[str]:
    problems = []
    n = d.shape[0]
    if d.shape != (n, n):
        return ["distance matrix is not square"]
    if not np.all(np.isfinite(d)):
        problems.append("distance matrix has non-finite entries")
        return problems
    if np.any(d < 0):
        problems.append("negative distance")
    if np.any(np.abs(np.diag(d)) > 0):
        problems.append("nonzero diagonal")
    if not np.allclose(d, d.T, rtol=0, atol=tol):
        problems.append("distance matrix is not symmetric")
    if triangle and n:
        for m in range(n):
            # d[i,j] <= d[i,m] + d[m,j] for every i,j
            if np.any(d > d[:, m : m + 1] + d[m : m + 1, :] + tol):
                problems.append(f"triangle inequality violated through vertex {m}")
                break
    return problems


@dataclass(frozen=True)
class Instance:
    """Connectivity graph on vertices 0..n-1, a distance matrix and a cluster budget k."""

    n: int
    edges: tuple
    dist: np.ndarray = field(repr=False)
    k: int
    coords: tuple | None = field(default=None, repr=False, compare=False)
    norm: str | None = field(default=None, compare=False)

    @classmethod
    def build(cls, n, edges, dist, k, *, check_triangle=True, coords=None, norm=None):
        n = int(n)
        k = int(k)
        if n < 1:
            raise InputError("instance needs at least one vertex")
        if not 1 <= k <= n:
            raise InputError(f"k={k} must satisfy 1 <= k <= n={n}")
        seen = set()
        for e in edges:
            if len(e) != 2:
                raise InputError(f"malformed edge {e!r}")
            u, v = int(e[0]), int(e[1])
            if not (0 <= u < n and 0 <= v < n):
                raise InputError(f"edge {e!r} references a missing vertex")
            if u == v:
                raise InputError(f"self-loop at {u}")
            key = (min(u, v), max(u, v))
            if key in seen:
                raise InputError(f"duplicate edge {key}")
            seen.add(key)
        d = np.array(dist, dtype=float)
        if d.shape != (n, n):
            raise InputError(f"distance matrix must be {n}x{n}, got {d.shape}")
        problems = check_metric(d, triangle=check_triangle)
        if problems:
            raise InputError("; ".join(problems))
        d = np.minimum(d, d.T)
        d.setflags(write=False)
        return cls(n, tuple(sorted(seen)), d, k, coords, norm)

    @classmethod
    def from_coords(cls, points, norm, edges, k):
        d = metric_from_coords(points, norm)
        coords = tuple(tuple(float(x) for x in np.atleast_1d(p)) for p in points)
        return cls.build(len(d), edges, d, k, coords=coords, norm=norm)

    @cached_property
    def adj(self) -> tuple:
        nb = [[] for _ in range(self.n)]
        for u, v in self.edges:
            nb[u].append(v)
            nb[v].append(u)
        return tuple(tuple(sorted(x)) for x in nb)

    def with_k(self, k: int) -> "Instance":
        return Instance.build(self.n, self.edges, self.dist, k, check_triangle=False,
                              coords=self.coords, norm=self.norm)

    def with_edges(self, edges) -> "Instance":
        return Instance.build(self.n, edges, self.dist, self.k, check_triangle=False,
                              coords=self.coords, norm=self.norm)

    def complete(self) -> "Instance":
        """Same metric and k, complete connectivity graph."""
        edges = [(u, v) for u in range(self.n) for v in range(u + 1, self.n)]
        return self.with_edges(edges)

    def component_count(self, vertices: Iterable[int] | None = None) -> int:
        return len(induced_components(self.adj, range(self.n) if vertices is None else vertices))

    def to_dict(self) -> dict:
        if self.coords is not None and self.norm is not None:
            metric = {"coords": [list(p) for p in self.coords], "norm": self.norm}
        else:
            metric = {"matrix": self.dist.tolist()}
        return {"n": self.n, "k": self.k, "edges": [list(e) for e in self.edges], "metric": metric}

    @classmethod
    def from_dict(cls, data: dict, *, check_triangle=True) -> "Instance":
        try:
            n, k, edges, metric = data["n"], data["k"], data.get("edges", []), data["metric"]
        except (KeyError, TypeError) as exc:
            raise InputError(f"instance is missing field {exc}") from None
        if "matrix" in metric:
            return cls.build(n, edges, metric["matrix"], k, check_triangle=check_triangle)
        if "coords" in metric:
            pts = metric["coords"]
            if len(pts) != n:
                raise InputError("coordinate count differs from n")
            if len({len(np.atleast_1d(p)) for p in pts}) > 1:
                raise InputError("points must all have the same dimension")
            inst = cls.from_coords(pts, metric.get("norm", "l2"), edges, k)
            return inst
        raise InputError("metric needs 'matrix' or 'coords'")


def induced_components(adj, vertices) -> list[list[int]]:
    """Connected components of the subgraph induced by ``vertices``."""
    inside = set(vertices)
    seen = set()
    comps = []
    for s in sorted(inside):
        if s in seen:
            continue
        seen.add(s)
        comp = [s]
        queue = deque([s])
        while queue:
            u = queue.popleft()
            for w in adj[u]:
                if w in inside and w not in seen:
                    seen.add(w)
                    comp.append(w)
                    queue.append(w)
        comps.append(sorted(comp))
    return comps


def is_connected(adj, vertices) -> bool:
    vertices = list(vertices)
    return len(vertices) > 0 and len(induced_components(adj, vertices)) == 1


@dataclass(frozen=True)
class ClusteringSolution:
    clusters: tuple
    centers: tuple | None
    objective: str
    value: float
    facility_relaxed: bool = False

    @classmethod
    def make(cls, clusters, centers, objective, value, facility_relaxed=False):
        cl = tuple(tuple(sorted(int(v) for v in c)) for c in clusters)
        ce = None if centers is None else tuple(int(c) for c in centers)
        return cls(cl, ce, objective, float(value), facility_relaxed)

    def labels(self, n: int) -> list[int]:
        lab = [-1] * n
        for i, c in enumerate(self.clusters):
            for v in c:
                lab[v] = i
        return lab

    def to_dict(self) -> dict:
        out = {
            "objective": self.objective,
            "value": self.value,
            "clusters": [list(c) for c in self.clusters],
            "centers": None if self.centers is None else list(self.centers),
        }
        if self.facility_relaxed:
            out["facility_relaxed"] = True
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "ClusteringSolution":
        try:
            return cls.make(data["clusters"], data.get("centers"), data["objective"],
                            data.get("value", 0.0), data.get("facility_relaxed", False))
        except (KeyError, TypeError, ValueError) as exc:
            raise InputError(f"malformed solution: {exc}") from None


def best_center(dist: np.ndarray, cluster: Sequence[int]) -> tuple[int, float]:
    """In-cluster vertex minimising the maximum distance to the cluster, and that radius."""
    idx = np.asarray(cluster)
    sub = dist[np.ix_(idx, idx)]
    ecc = sub.max(axis=1)
    i = int(np.argmin(ecc))
    return int(idx[i]), float(ecc[i])


def diameter(dist: np.ndarray, cluster: Sequence[int]) -> float:
    idx = np.asarray(cluster)
    return float(dist[np.ix_(idx, idx)].max()) if len(idx) else 0.0


def evaluate_objective(inst: Instance, sol: ClusteringSolution, tag: str | None = None) -> float:
    tag = tag or sol.objective
    if tag not in OBJECTIVES:
        raise InputError(f"unknown objective {tag!r}")
    d = inst.dist
    if tag == "msd":
        return float(sum(diameter(d, c) for c in sol.clusters))
    if sol.centers is None:
        raise InputError(f"objective {tag} needs centers")
    if len(sol.centers) != len(sol.clusters):
        raise InputError("centers and clusters are not aligned")
    per = []
    for c, cen in zip(sol.clusters, sol.centers):
        row = d[cen, list(c)]
        if tag == "center" or tag == "msr":
            per.append(float(row.max()) if len(row) else 0.0)
        elif tag == "median":
            per.append(float(row.sum()))
        else:
            per.append(float((row**2).sum()))
    if tag == "center":
        return max(per, default=0.0)
    return float(sum(per))


def validate_solution(inst: Instance, sol: ClusteringSolution) -> list[str]:
    """List every violated feasibility condition; an empty list means feasible."""
    problems = []
    count = [0] * inst.n
    for i, c in enumerate(sol.clusters):
        if not c:
            problems.append(f"cluster {i} is empty")
        for v in c:
            if not 0 <= v < inst.n:
                problems.append(f"cluster {i} contains unknown vertex {v}")
            else:
                count[v] += 1
    if any(x != 1 for x in count):
        missing = [v for v, x in enumerate(count) if x == 0]
        repeated = [v for v, x in enumerate(count) if x > 1]
        problems.append(f"not a partition (missing {missing}, repeated {repeated})")
    if len(sol.clusters) > inst.k:
        problems.append(f"{len(sol.clusters)} clusters exceed k={inst.k}")
    for i, c in enumerate(sol.clusters):
        if c and all(0 <= v < inst.n for v in c) and not is_connected(inst.adj, c):
            problems.append(f"cluster {i} disconnected")
    if sol.centers is not None:
        if len(sol.centers) != len(sol.clusters):
            problems.append("centers and clusters are not aligned")
        else:
            for i, (c, cen) in enumerate(zip(sol.clusters, sol.centers)):
                if not 0 <= cen < inst.n:
                    problems.append(f"center of cluster {i} is not a vertex")
                elif not sol.facility_relaxed and cen not in c:
                    problems.append(f"center {cen} outside cluster {i}")
    elif sol.objective != "msd":
        problems.append(f"objective {sol.objective} needs centers")
    return problems


def load_json(path) -> dict:
    try:
        with open(path) as fh:
            return json.load(fh)
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise InputError(f"{path} is not valid JSON: {exc}") from None


def dump_json(data, path) -> None:
    with open(path, "w") as fh:
        json.dump(data, fh, indent=1, sort_keys=True)
        fh.write("\n")
