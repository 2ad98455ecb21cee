"""Optimal robust classifiers built from dual potentials.

Potentials live on the support atoms of each class. A query is scored by the
c-transform of every class's potential, and the transforms are turned into a
probability vector by a loss-specific rule (softmax for cross-entropy, a
clamped alpha-exponential for alpha-log losses, a sort/threshold rule for the
quadratic loss).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .alpha_calculus import LossSpec, exp_alpha, find_normalizer, log_alpha, loss_value
from .dataset_io import LabeledDataset
from .geometry import as_metric


class UnreachableQueryError(ValueError):
    """The query is farther than epsilon from every support atom."""


@dataclass(frozen=True)
class ZeroInfinityCost:
    epsilon: float
    metric: str = "euclidean"

    def __post_init__(self):
        if self.epsilon < 0:
            raise ValueError("epsilon must be >= 0")
        as_metric(self.metric)


@dataclass(frozen=True)
class ScaledDistanceCost:
    tau: float
    metric: str = "euclidean"

    def __post_init__(self):
        if not self.tau > 0:
            raise ValueError("tau must be > 0")
        as_metric(self.metric)


@dataclass(frozen=True, eq=False)
class PotentialSet:
    data: LabeledDataset
    phi: np.ndarray
    cost: ZeroInfinityCost | ScaledDistanceCost

    def __post_init__(self):
        phi = np.asarray(self.phi, dtype=float)
        if phi.shape != (self.data.n_points,):
            raise ValueError("need one potential per support atom")
        if not np.all(np.isfinite(phi)):
            raise ValueError("potentials must be finite")
        object.__setattr__(self, "phi", phi)

    @classmethod
    def from_solution(cls, data: LabeledDataset, solution, cost=None) -> "PotentialSet":
        """Potentials ``log_alpha(psi)`` of a solved dual.

        ``cost`` defaults to the 0-inf cost the solution was computed for.
        """
        if cost is None:
            if solution.epsilon is None:
                raise ValueError("solution carries no epsilon; pass cost explicitly")
            cost = ZeroInfinityCost(solution.epsilon, solution.metric or "euclidean")
        if solution.z.shape != (data.n_points,):
            raise ValueError("solution does not match the dataset")
        return cls(data, log_alpha(solution.alpha, solution.z), cost)

    def transforms(self, queries) -> np.ndarray:
        """c-transforms of every class at every query, shape ``(n_queries, K)``."""
        Q = np.atleast_2d(np.asarray(queries, dtype=float))
        if Q.shape[1] != self.data.dim:
            raise ValueError(f"query dimension {Q.shape[1]} != dataset dimension {self.data.dim}")
        dist = as_metric(self.cost.metric).pairwise(Q, self.data.points)
        out = np.empty((Q.shape[0], self.data.class_count))
        for c in range(self.data.class_count):
            cols = self.data.class_members(c)
            if isinstance(self.cost, ZeroInfinityCost):
                vals = np.where(dist[:, cols] <= self.cost.epsilon, -self.phi[cols], np.inf)
            else:
                vals = dist[:, cols] / self.cost.tau - self.phi[cols]
            out[:, c] = vals.min(axis=1)
        return out


def c_transform(potentials: PotentialSet, i: int, query) -> float:
    """``min_x [c(x, query) - phi_i(x)]`` over the class-``i`` atoms."""
    return float(potentials.transforms(np.asarray(query, dtype=float)[None, :])[0, i])


@dataclass
class ClassifierOutput:
    f: np.ndarray
    transforms: np.ndarray
    Z: float | None = None


def _softmax_neg(a: np.ndarray) -> tuple[np.ndarray, float]:
    finite = np.isfinite(a)
    m = a[finite].min()
    e = np.where(finite, np.exp(-(np.where(finite, a, m) - m)), 0.0)
    total = e.sum()
    return e / total, float(-m + math.log(total))


def quadratic_rule(a: np.ndarray) -> tuple[np.ndarray, int, float]:
    """Optimal quadratic-loss prediction for transforms ``a``; returns (f, i*, c*)."""
    order = np.argsort(a, kind="stable")
    srt = a[order]
    n_finite = int(np.isfinite(srt).sum())
    prefix = np.cumsum(srt[:n_finite])
    i_star = n_finite
    for i in range(1, n_finite):
        if i * srt[i] - prefix[i - 1] > 2:
            i_star = i
            break
    c_star = (2.0 + prefix[i_star - 1]) / i_star
    f = np.zeros(a.size)
    f[order[:i_star]] = np.maximum(0.5 * (c_star - srt[:i_star]), 0.0)
    return f, i_star, float(c_star)


def classify_transforms(loss: LossSpec, a) -> ClassifierOutput:
    """Optimal prediction given the vector of c-transforms at one query."""
    a = np.asarray(a, dtype=float)
    if not np.any(np.isfinite(a)):
        raise UnreachableQueryError("query is out of reach of every class")
    if loss.kind == "cross_entropy":
        f, Z = _softmax_neg(a)
        return ClassifierOutput(f, a, Z)
    if loss.kind == "quadratic":
        f, _, _ = quadratic_rule(a)
        return ClassifierOutput(f / f.sum(), a, None)
    alpha = loss.alpha
    Z = find_normalizer(alpha, a)
    finite = np.isfinite(a)
    s = np.where(finite, -np.where(finite, a, 0.0) - Z, -np.inf)
    f = np.zeros(a.size)
    if alpha < 1:
        f[finite] = exp_alpha(alpha, np.maximum(s[finite], -1.0 / (1.0 - alpha)))
    else:
        f[finite] = exp_alpha(alpha, s[finite])
    return ClassifierOutput(f / f.sum(), a, Z)


def classify(potentials: PotentialSet, loss: LossSpec, query) -> ClassifierOutput:
    a = potentials.transforms(np.asarray(query, dtype=float)[None, :])[0]
    return classify_transforms(loss, a)


@dataclass
class SaddleReport:
    feasibility: float
    multipliers: float
    max_violation: float
    ok: bool


def saddle_violation(loss: LossSpec, transforms, f, tol: float = 1e-6) -> SaddleReport:
    """Check ``loss(f, i) <= transform_i`` for every reachable class.

    For the quadratic loss the multipliers of the inner max problem are also
    rebuilt from ``f`` (support classes share a common loss-minus-transform
    level; off-support classes must sit above it) and their sign and
    complementarity conditions checked.
    """
    a = np.asarray(transforms, dtype=float)
    f = np.asarray(f, dtype=float)
    finite = np.isfinite(a)
    gaps = np.array([loss_value(loss, f, i) - a[i] for i in range(a.size) if finite[i]])
    feas = float(gaps.max()) if gaps.size else -math.inf
    mult = 0.0
    if loss.kind == "quadratic":
        losses = np.array([loss_value(loss, f, i) for i in range(a.size)])
        level = losses - a
        support = (f > tol) & finite
        if np.any(support):
            lam_m = -float(level[support].mean())
            stationarity = np.abs(level[support] + lam_m).max()
            gamma = -(level + lam_m)
            off = finite & ~support
            neg_gamma = float(np.max(-gamma[off], initial=0.0))
            comp = float(np.max(np.abs(gamma[off] * f[off]), initial=0.0))
            mult = max(float(stationarity), neg_gamma, comp)
    worst = max(feas, mult) if loss.kind == "quadratic" else feas
    return SaddleReport(feas, mult, worst, worst <= tol)


def verify_saddle(potentials: PotentialSet, loss: LossSpec, query, f, tol: float = 1e-6) -> SaddleReport:
    a = potentials.transforms(np.asarray(query, dtype=float)[None, :])[0]
    return saddle_violation(loss, a, f, tol)
