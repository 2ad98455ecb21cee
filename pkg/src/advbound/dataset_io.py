"""Labeled point clouds, run configuration, and on-disk formats.

Datasets come in as CSV rows ``label,x1,...,xd[,weight]``. Solutions are
written as versioned JSON and risk curves as CSV.
"""

from __future__ import annotations

import csv
import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import TYPE_CHECKING, Sequence

import numpy as np

if TYPE_CHECKING:
    from .packing_solver import DualSolution
    from .risk_harness import RiskCurve

logger = logging.getLogger(__name__)

SCHEMA_VERSION = 1
CURVE_COLUMNS = ("epsilon", "alpha", "value", "kkt_residual", "newton_iters")


class DatasetError(ValueError):
    """Base class for dataset validation failures."""

    def __init__(self, message: str, row: int | None = None):
        self.row = row
        super().__init__(f"row {row}: {message}" if row is not None else message)


class MalformedRowError(DatasetError):
    pass


class DimensionMismatchError(DatasetError):
    pass


class EmptyClassError(DatasetError):
    pass


class NonPositiveWeightError(DatasetError):
    pass


@dataclass(frozen=True, eq=False)
class LabeledDataset:
    """Per-class weighted atoms in R^d.

    Row ``l`` of ``points`` carries label ``labels[l]`` and mass ``weights[l]``.
    Construct through :meth:`from_arrays` to get duplicate merging and
    normalization; the plain constructor only validates.
    """

    points: np.ndarray
    labels: np.ndarray
    weights: np.ndarray
    class_names: tuple = field(default=())

    def __post_init__(self):
        pts = np.ascontiguousarray(self.points, dtype=float)
        if pts.ndim != 2 or pts.shape[1] < 1:
            raise DimensionMismatchError("points must be an (n, d) array with d >= 1")
        labels = np.asarray(self.labels, dtype=np.int64)
        w = np.asarray(self.weights, dtype=float)
        if labels.shape != (pts.shape[0],) or w.shape != (pts.shape[0],):
            raise DatasetError("points, labels and weights must have matching length")
        if not np.all(np.isfinite(pts)):
            raise DatasetError("points must be finite")
        if np.any(w <= 0) or not np.all(np.isfinite(w)):
            raise NonPositiveWeightError("weights must be strictly positive")
        if abs(w.sum() - 1.0) > 1e-9:
            raise DatasetError(f"weights must sum to 1, got {w.sum()!r}")
        k = int(labels.max()) + 1 if labels.size else 0
        counts = np.bincount(labels, minlength=k) if labels.size else np.zeros(0)
        if labels.size == 0 or labels.min() < 0 or np.any(counts == 0):
            raise EmptyClassError("every class in 0..K-1 needs at least one point")
        for c in range(k):
            sub = pts[labels == c]
            if np.unique(sub, axis=0).shape[0] != sub.shape[0]:
                raise DatasetError(f"class {c} has duplicate atoms; merge them first")
        for name, arr in (("points", pts), ("labels", labels), ("weights", w)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        if not self.class_names:
            object.__setattr__(self, "class_names", tuple(range(k)))

    @property
    def n_points(self) -> int:
        return self.points.shape[0]

    @property
    def class_count(self) -> int:
        return len(self.class_names)

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    def class_members(self, c: int) -> np.ndarray:
        """Global row indices of the atoms of class ``c``, in row order."""
        return np.flatnonzero(self.labels == c)

    def local_index(self) -> np.ndarray:
        """Position of each row inside its own class."""
        out = np.empty(self.n_points, dtype=np.int64)
        for c in range(self.class_count):
            rows = self.class_members(c)
            out[rows] = np.arange(rows.size)
        return out

    def class_masses(self) -> np.ndarray:
        return np.bincount(self.labels, weights=self.weights, minlength=self.class_count)

    @classmethod
    def from_arrays(cls, X, y, sample_weight=None) -> "LabeledDataset":
        """Build a dataset from raw arrays.

        Labels are remapped to ``0..K-1`` in sorted order, same-class duplicates
        merged by summing their weights, zero-weight atoms dropped, and the
        weights renormalized to sum to one.
        """
        X = np.asarray(X, dtype=float)
        if X.ndim == 1:
            X = X[:, None]
        y = np.asarray(y)
        n = X.shape[0]
        w = np.full(n, 1.0 / n) if sample_weight is None else np.asarray(sample_weight, dtype=float)
        if np.any(w < 0):
            bad = int(np.flatnonzero(w < 0)[0])
            raise NonPositiveWeightError("negative weight", row=bad + 1)
        names, codes = np.unique(y, return_inverse=True)
        points, labels, weights = _merge_atoms(X, codes.astype(np.int64), w)
        keep = weights > 0
        if not np.all(keep):
            logger.warning("dropping %d zero-weight atom(s)", int((~keep).sum()))
            points, labels, weights = points[keep], labels[keep], weights[keep]
        missing = sorted(set(range(len(names))) - set(labels.tolist()))
        if missing:
            raise EmptyClassError(f"class {names[missing[0]]!r} has no positive-weight atom")
        total = weights.sum()
        if abs(total - 1.0) > 1e-9:
            logger.warning("weights sum to %r; renormalizing", total)
        weights = weights / total
        return cls(points, labels, weights, tuple(names.tolist()))


def _merge_atoms(X: np.ndarray, y: np.ndarray, w: np.ndarray):
    # first occurrence fixes the row order of the merged atom
    order: dict[tuple, int] = {}
    pts, labs, ws = [], [], []
    for row, label, weight in zip(X, y, w):
        key = (int(label), row.tobytes())
        idx = order.get(key)
        if idx is None:
            order[key] = len(pts)
            pts.append(row)
            labs.append(int(label))
            ws.append(float(weight))
        else:
            ws[idx] += float(weight)
    return (np.array(pts, dtype=float).reshape(len(pts), X.shape[1]),
            np.array(labs, dtype=np.int64), np.array(ws, dtype=float))


def load_dataset(path, format: str = "csv", weighted: bool | None = None) -> LabeledDataset:
    """Read a labeled dataset from CSV.

    Each row is ``label,x1,...,xd`` or ``label,x1,...,xd,weight``. An optional
    header row is recognized by a non-numeric first cell; a header column named
    ``weight`` switches weights on. Without a header, pass ``weighted=True`` if
    the last column holds weights. Missing weights mean uniform ``1/n``.
    """
    if format != "csv":
        raise ValueError(f"unsupported format {format!r}")
    with open(path, newline="") as fh:
        rows = [(i + 1, r) for i, r in enumerate(csv.reader(fh))]
    rows = [(i, [c.strip() for c in r]) for i, r in rows if r and any(c.strip() for c in r)]
    if rows and not _is_number(rows[0][1][0]):
        header = [h.lower() for h in rows[0][1]]
        if weighted is None:
            weighted = header[-1] == "weight"
        rows = rows[1:]
    weighted = bool(weighted)
    if not rows:
        raise DatasetError("no data rows")

    min_cols = 3 if weighted else 2
    labels, points, weights = [], [], []
    dim = None
    for lineno, cells in rows:
        if len(cells) < min_cols:
            raise MalformedRowError(f"expected at least {min_cols} columns, got {len(cells)}", lineno)
        try:
            label = int(cells[0])
            values = [float(c) for c in cells[1:]]
        except ValueError:
            raise MalformedRowError(f"non-numeric cell in {cells!r}", lineno) from None
        if label < 0:
            raise MalformedRowError("labels must be nonnegative integers", lineno)
        if not all(math.isfinite(v) for v in values):
            raise MalformedRowError("non-finite value", lineno)
        if weighted:
            weight = values.pop()
            if weight < 0:
                raise NonPositiveWeightError(f"weight {weight} is negative", lineno)
            if weight == 0:
                logger.warning("row %d has zero weight and is dropped", lineno)
        else:
            weight = None
        if dim is None:
            dim = len(values)
        elif len(values) != dim:
            raise DimensionMismatchError(f"expected {dim} coordinates, got {len(values)}", lineno)
        labels.append(label)
        points.append(values)
        weights.append(weight)

    w = None if not weighted else np.array(weights, dtype=float)
    return LabeledDataset.from_arrays(np.array(points, dtype=float), np.array(labels), w)


def _is_number(text: str) -> bool:
    try:
        float(text)
    except ValueError:
        return False
    return True


def load_queries(path) -> np.ndarray:
    """Read query vectors, one per CSV row; a non-numeric first row is a header."""
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(fh) if r and any(c.strip() for c in r)]
    if rows and not _is_number(rows[0][0]):
        rows = rows[1:]
    try:
        arr = np.array([[float(c) for c in r] for r in rows], dtype=float)
    except ValueError as exc:
        raise MalformedRowError(f"bad query row: {exc}") from None
    if arr.ndim != 2:
        raise DimensionMismatchError("query rows have inconsistent length")
    return arr


def save_dataset(data: LabeledDataset, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["label"] + [f"x{j + 1}" for j in range(data.dim)] + ["weight"])
        for x, y, w in zip(data.points, data.labels, data.weights):
            writer.writerow([int(y)] + [repr(float(v)) for v in x] + [repr(float(w))])


def write_solution(sol: "DualSolution", path) -> None:
    """Serialize a solved dual to JSON (``"schema": 1``)."""
    z = np.asarray(sol.z, dtype=float)
    if not np.all(np.isfinite(z)) or not math.isfinite(sol.objective):
        raise ValueError("solution has non-finite entries")
    if sol.members is None:
        members = [(0, l) for l in range(z.size)]
    else:
        members = sol.members
    doc = {
        "schema": SCHEMA_VERSION,
        "alpha": sol.alpha,
        "epsilon": sol.epsilon,
        "metric": sol.metric,
        "cap": sol.cap,
        "objective": sol.objective,
        "risk_lower_bound": sol.risk_lower_bound,
        "kkt_residual": sol.kkt_residual,
        "newton_iters": sol.newton_iters,
        "outer_iters": sol.outer_iters,
        "psi": [
            {"class": int(c), "index": int(i), "value": float(v), "rounded_to_zero": bool(r)}
            for (c, i), v, r in zip(members, z, sol.zeroed)
        ],
        "lambda": [float(v) for v in sol.lam],
    }
    Path(path).write_text(json.dumps(doc, indent=1))


def read_solution(path) -> "DualSolution":
    from .packing_solver import DualSolution

    doc = json.loads(Path(path).read_text())
    if doc.get("schema") != SCHEMA_VERSION:
        raise ValueError(f"unsupported solution schema {doc.get('schema')!r}")
    psi = doc["psi"]
    return DualSolution(
        z=np.array([p["value"] for p in psi], dtype=float),
        lam=np.array(doc["lambda"], dtype=float),
        objective=doc["objective"],
        risk_lower_bound=doc["risk_lower_bound"],
        kkt_residual=doc["kkt_residual"],
        newton_iters=doc["newton_iters"],
        outer_iters=doc.get("outer_iters", 0),
        alpha=doc["alpha"],
        zeroed=np.array([p.get("rounded_to_zero", False) for p in psi], dtype=bool),
        members=[(p["class"], p["index"]) for p in psi],
        epsilon=doc.get("epsilon"),
        metric=doc.get("metric"),
        cap=doc.get("cap"),
    )


def write_curve(curve: "RiskCurve", path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CURVE_COLUMNS)
        for row in curve.rows:
            writer.writerow([repr(row.epsilon), repr(row.alpha), repr(row.risk_lower_bound),
                             repr(row.kkt_residual), row.newton_iters])


def read_curve(path) -> list[dict]:
    with open(path, newline="") as fh:
        return [
            {k: (int(v) if k == "newton_iters" else float(v)) for k, v in r.items()}
            for r in csv.DictReader(fh)
        ]


_ALPHA_TOKENS = {"CE": 1.0, "ZERO_ONE": 0.0}


def parse_alpha(token) -> float:
    if isinstance(token, str):
        t = token.strip()
        if t.upper() in _ALPHA_TOKENS:
            return _ALPHA_TOKENS[t.upper()]
        token = float(t)
    value = float(token)
    if not value >= 0 or not math.isfinite(value):
        raise ValueError(f"alpha must be >= 0, got {token!r}")
    return value


def parse_grid(text: str) -> list[float]:
    """``"0:4:0.5"`` (inclusive start:stop:step) or a comma list."""
    text = text.strip()
    if ":" in text:
        start, stop, step = (float(p) for p in text.split(":"))
        if step <= 0:
            raise ValueError("grid step must be positive")
        count = int(math.floor((stop - start) / step + 1e-9)) + 1
        return [round(start + k * step, 12) for k in range(count)]
    return [float(p) for p in text.split(",") if p.strip()]


@dataclass
class SolverTolerances:
    kkt_tol: float = 1e-6
    gap_tol: float = 1e-8
    max_newton_iters: int = 200
    barrier_growth: float = 10.0

    def __post_init__(self):
        if self.kkt_tol <= 0 or self.gap_tol <= 0:
            raise ValueError("tolerances must be positive")
        if self.max_newton_iters < 1:
            raise ValueError("max_newton_iters must be >= 1")
        if self.barrier_growth <= 1:
            raise ValueError("barrier_growth must exceed 1")


@dataclass
class RunConfig:
    metric: str = "euclidean"
    epsilon_grid: Sequence[float] = (0.0,)
    alpha_list: Sequence = (1.0,)
    interaction_cap: int | None = None
    solver_tolerances: SolverTolerances = field(default_factory=SolverTolerances)
    warm_start_theta: float = 0.01
    edge_limit: int = 10**7

    def __post_init__(self):
        if self.metric not in ("euclidean", "chebyshev"):
            raise ValueError(f"unknown metric {self.metric!r}")
        eps = [float(e) for e in self.epsilon_grid]
        if not eps or any(e < 0 or not math.isfinite(e) for e in eps):
            raise ValueError("epsilon values must be finite and >= 0")
        if any(b <= a for a, b in zip(eps, eps[1:])):
            raise ValueError("epsilon_grid must be strictly increasing")
        self.epsilon_grid = tuple(eps)
        alphas = [parse_alpha(a) for a in self.alpha_list]
        if not alphas:
            raise ValueError("alpha_list is empty")
        self.alpha_list = tuple(alphas)
        if not 0 < self.warm_start_theta < 1:
            raise ValueError("warm_start_theta must lie in (0, 1)")
        if self.interaction_cap is not None and self.interaction_cap < 2:
            raise ValueError("interaction_cap must be >= 2")

    def cap_for(self, class_count: int) -> int:
        """Effective cap for a dataset with ``class_count`` classes."""
        if self.interaction_cap is None:
            return max(class_count, 2)
        if class_count >= 2 and self.interaction_cap > class_count:
            raise ValueError(f"interaction_cap {self.interaction_cap} exceeds K={class_count}")
        return self.interaction_cap
