"""Metrics, closed-ball intersection tests, and the conflict hypergraph.

Under the 0-inf perturbation cost, a tuple of points from distinct classes
produces a packing constraint exactly when their closed eps-balls share a
common point. :func:`build_hypergraph` enumerates those tuples, keeps only
inclusion-maximal ones, and assembles the sparse 0/1 incidence matrix.
"""

from __future__ import annotations

import csv
import itertools
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.spatial.distance import cdist

from .dataset_io import LabeledDataset

METRICS = ("euclidean", "chebyshev")

# ties resolve toward inclusion: radius <= eps * (1 + REL) + ABS
TIE_REL = 1e-12
TIE_ABS = 1e-12
DEFAULT_EDGE_LIMIT = 10**7


class ResourceLimitError(RuntimeError):
    """Raised when hypergraph enumeration exceeds its edge budget."""


def _slack(eps: float) -> float:
    return eps * (1.0 + TIE_REL) + TIE_ABS


@dataclass(frozen=True)
class Metric:
    kind: str = "euclidean"

    def __post_init__(self):
        if self.kind not in METRICS:
            raise ValueError(f"unknown metric {self.kind!r}; expected one of {METRICS}")

    def pairwise(self, A, B) -> np.ndarray:
        A = np.atleast_2d(np.asarray(A, dtype=float))
        B = np.atleast_2d(np.asarray(B, dtype=float))
        if A.shape[1] != B.shape[1]:
            raise ValueError(f"dimension mismatch: {A.shape[1]} vs {B.shape[1]}")
        return cdist(A, B, metric=self.kind)


def as_metric(metric) -> Metric:
    return metric if isinstance(metric, Metric) else Metric(str(metric))


def distance(metric, x, y) -> float:
    x = np.asarray(x, dtype=float).ravel()
    y = np.asarray(y, dtype=float).ravel()
    if x.shape != y.shape:
        raise ValueError(f"dimension mismatch: {x.size} vs {y.size}")
    diff = np.abs(x - y)
    if as_metric(metric).kind == "chebyshev":
        return float(diff.max(initial=0.0))
    return float(np.sqrt(np.dot(diff, diff)))


# -- minimum enclosing ball -------------------------------------------------


def _circumball(R: list[np.ndarray]):
    """Smallest ball with every point of ``R`` on its boundary."""
    if not R:
        return None, -1.0
    p0 = R[0]
    if len(R) == 1:
        return p0.copy(), 0.0
    A = np.array([p - p0 for p in R[1:]])
    G = A @ A.T
    rhs = 0.5 * np.diag(G)
    y, *_ = np.linalg.lstsq(G, rhs, rcond=None)
    center = p0 + A.T @ y
    radius = max(float(np.linalg.norm(p - center)) for p in R)
    return center, radius


def _welzl(P: list[np.ndarray], R: list[np.ndarray], dim: int):
    if not P or len(R) == dim + 1:
        return _circumball(R)
    p, rest = P[0], P[1:]
    center, radius = _welzl(rest, R, dim)
    if center is not None and np.linalg.norm(p - center) <= radius * (1 + 1e-14) + 1e-15:
        return center, radius
    return _welzl(rest, R + [p], dim)


def min_enclosing_ball(points) -> tuple[np.ndarray, float]:
    """Exact Euclidean minimum enclosing ball of a handful of points.

    Uses closed forms for one to three points and Welzl's recursion with a
    fixed point order beyond that.
    """
    P = np.atleast_2d(np.asarray(points, dtype=float))
    n = P.shape[0]
    if n == 0:
        raise ValueError("need at least one point")
    if n == 1:
        return P[0].copy(), 0.0
    if n == 2:
        return 0.5 * (P[0] + P[1]), 0.5 * float(np.linalg.norm(P[0] - P[1]))
    if n == 3:
        r = float(meb_radius3(P[0:1], P[1:2], P[2:3])[0])
        center, _ = _welzl([P[0], P[1], P[2]], [], P.shape[1])
        return center, r
    return _welzl(list(P), [], P.shape[1])


def meb_radius3(a: np.ndarray, b: np.ndarray, c: np.ndarray) -> np.ndarray:
    """Vectorized minimum-enclosing-ball radius of point triples (rows of a, b, c)."""
    u = b - a
    v = c - a
    w = c - b
    uu = np.einsum("ij,ij->i", u, u)
    vv = np.einsum("ij,ij->i", v, v)
    ww = np.einsum("ij,ij->i", w, w)
    uv = np.einsum("ij,ij->i", u, v)
    longest = np.maximum(np.maximum(uu, vv), ww)
    # non-acute (or degenerate) triangle: the longest side is a diameter
    non_acute = 2.0 * longest >= uu + vv + ww
    gram = np.maximum(uu * vv - uv * uv, 0.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        circum = np.sqrt(uu * vv * ww) / (2.0 * np.sqrt(gram))
    return np.where(non_acute | (gram <= 0), 0.5 * np.sqrt(longest), circum)


def balls_intersect(metric, points, epsilon: float) -> bool:
    """True iff the closed eps-balls around ``points`` have a common point."""
    P = np.atleast_2d(np.asarray(points, dtype=float))
    if P.shape[0] == 0:
        raise ValueError("need at least one point")
    if epsilon < 0:
        raise ValueError("epsilon must be >= 0")
    kind = as_metric(metric).kind
    if kind == "chebyshev":
        span = P.max(axis=0) - P.min(axis=0)
        return bool(np.all(span <= 2.0 * _slack(epsilon)))
    _, radius = min_enclosing_ball(P)
    return radius <= _slack(epsilon)


# -- conflict hypergraph ----------------------------------------------------


@dataclass(frozen=True, eq=False)
class ConflictHypergraph:
    """Maximal intersecting cross-class tuples plus uncovered singletons.

    ``edges[r]`` is a sorted tuple of variable ids; variable ``l`` is dataset
    row ``l`` and ``members[l]`` is its ``(class, index-in-class)`` key.
    """

    edges: list[tuple[int, ...]]
    members: list[tuple[int, int]]
    epsilon: float
    metric: str
    cap: int
    incidence: sp.csr_matrix = field(repr=False)

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    @property
    def n_vars(self) -> int:
        return len(self.members)

    def edge_members(self, r: int) -> list[tuple[int, int]]:
        return [self.members[l] for l in self.edges[r]]

    def size_counts(self) -> dict[int, int]:
        counts: dict[int, int] = {}
        for e in self.edges:
            counts[len(e)] = counts.get(len(e), 0) + 1
        return counts

    def dump_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["edge_id", "size", "members"])
            for r, e in enumerate(self.edges):
                writer.writerow([r, len(e), ";".join(f"{c}:{i}" for c, i in self.edge_members(r))])


def incidence_matrix(edges: list[tuple[int, ...]], n_vars: int) -> sp.csr_matrix:
    indptr = np.zeros(len(edges) + 1, dtype=np.int64)
    np.cumsum([len(e) for e in edges], out=indptr[1:])
    indices = np.fromiter(itertools.chain.from_iterable(edges), dtype=np.int64, count=int(indptr[-1]))
    data = np.ones(indices.size, dtype=float)
    return sp.csr_matrix((data, indices, indptr), shape=(len(edges), n_vars))


def _extend(tuples: np.ndarray, adj_cols: list[np.ndarray], n_next: int) -> np.ndarray:
    """Append one class to every tuple, keeping pairwise-compatible choices.

    ``adj_cols[i]`` is the boolean adjacency between the class in tuple column i
    and the new class (rows indexed by local point index in the earlier class).
    """
    mask = np.ones((tuples.shape[0], n_next), dtype=bool)
    for i, adj in enumerate(adj_cols):
        mask &= adj[tuples[:, i]]
    rows, cols = np.nonzero(mask)
    return np.column_stack([tuples[rows], cols])


def _intersecting_tuples(subset, local, adj, data, metric, eps):
    """All intersecting tuples (local indices per class) for one class subset."""
    first = subset[0]
    tuples = np.arange(local[first].size)[:, None]
    for j in range(1, len(subset)):
        cj = subset[j]
        tuples = _extend(tuples, [adj[(subset[i], cj)] for i in range(j)], local[cj].size)
        if tuples.shape[0] == 0:
            return tuples
    if metric.kind == "chebyshev" or len(subset) == 2:
        # pairwise suffices: Helly for boxes, and the pair test is exact
        return tuples
    pts = [data.points[local[c][tuples[:, k]]] for k, c in enumerate(subset)]
    if len(subset) == 3:
        keep = meb_radius3(*pts) <= _slack(eps)
    else:
        keep = np.array([min_enclosing_ball(np.array([p[t] for p in pts]))[1] <= _slack(eps)
                         for t in range(tuples.shape[0])], dtype=bool)
    return tuples[keep]


def build_hypergraph(data: LabeledDataset, metric, epsilon: float, cap: int,
                     edge_limit: int = DEFAULT_EDGE_LIMIT) -> ConflictHypergraph:
    """Enumerate the packing constraints for budget ``epsilon``.

    Tuples take one atom from each class of a subset of 2..cap classes and are
    kept when their closed balls intersect. Only inclusion-maximal tuples are
    stored; atoms covered by no stored tuple get a singleton edge.
    """
    metric = as_metric(metric)
    if epsilon < 0:
        raise ValueError("epsilon must be >= 0")
    k = data.class_count
    if cap < 2:
        raise ValueError("cap must be >= 2")
    if k >= 2 and cap > k:
        raise ValueError(f"cap {cap} exceeds the number of classes {k}")
    local = [data.class_members(c) for c in range(k)]
    li = data.local_index()
    members = [(int(c), int(i)) for c, i in zip(data.labels, li)]

    pair_bound = 2.0 * _slack(epsilon)
    adj = {}
    for a, b in itertools.combinations(range(k), 2):
        ok = metric.pairwise(data.points[local[a]], data.points[local[b]]) <= pair_bound
        adj[(a, b)] = ok
        adj[(b, a)] = ok.T

    stored: list[tuple[int, ...]] = []
    covered: set[tuple[int, ...]] = set()
    for size in range(min(cap, k), 1, -1):
        new_edges = []
        for subset in itertools.combinations(range(k), size):
            tuples = _intersecting_tuples(subset, local, adj, data, metric, epsilon)
            if tuples.shape[0] == 0:
                continue
            ids = np.column_stack([local[c][tuples[:, j]] for j, c in enumerate(subset)])
            ids.sort(axis=1)
            for row in map(tuple, ids.tolist()):
                if row not in covered:
                    new_edges.append(row)
            if len(stored) + len(new_edges) > edge_limit:
                raise ResourceLimitError(
                    f"hypergraph exceeds {edge_limit} edges at eps={epsilon}, cap={cap}")
        if size > 2:
            for e in new_edges:
                for r in range(2, size):
                    covered.update(itertools.combinations(e, r))
        stored.extend(new_edges)

    in_edge = np.zeros(data.n_points, dtype=bool)
    for e in stored:
        in_edge[list(e)] = True
    stored.extend((int(l),) for l in np.flatnonzero(~in_edge))
    if len(stored) > edge_limit:
        raise ResourceLimitError(f"hypergraph exceeds {edge_limit} edges")
    stored.sort()
    return ConflictHypergraph(
        edges=stored,
        members=members,
        epsilon=float(epsilon),
        metric=metric.kind,
        cap=int(cap),
        incidence=incidence_matrix(stored, data.n_points),
    )
