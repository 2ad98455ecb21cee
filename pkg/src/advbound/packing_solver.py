"""Weighted alpha-fair packing: maximize sum_l w_l log_alpha(z_l) s.t. Dz <= 1, z >= 0.

The optimal value, negated, is the learner-agnostic adversarial risk for the
alpha-logarithmic loss (alpha = 1: cross-entropy, alpha = 0: 0-1 loss) once D
is the incidence matrix of the conflict hypergraph.

:func:`solve` is a log-barrier path-following method with damped Newton
centering. :func:`oracle_solve` (grid refinement) and
:func:`zero_one_dual_solve` (LP on the unpruned 0-1 dual) are independent
checks on it.
"""

from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
import scipy.sparse as sp
from scipy.optimize import linprog

from .alpha_calculus import _check_alpha, is_ce, log_alpha
from .dataset_io import SolverTolerances

logger = logging.getLogger(__name__)

ZERO_FLOOR = 1e-9
STALL_DECREMENT = 1e-6


class SolverError(RuntimeError):
    """The barrier method failed to produce a certified solution."""


class NewtonFailure(SolverError):
    pass


class IterationLimitError(SolverError):
    pass


@dataclass(eq=False)
class PackingProblem:
    weights: np.ndarray
    incidence: sp.csr_matrix
    alpha: float

    def __post_init__(self):
        _check_alpha(self.alpha)
        self.weights = np.asarray(self.weights, dtype=float)
        self.incidence = sp.csr_matrix(self.incidence, dtype=float)
        m, n = self.incidence.shape
        if self.weights.shape != (n,):
            raise ValueError("weights must have one entry per column of the incidence matrix")
        if np.any(self.weights <= 0):
            raise ValueError("weights must be strictly positive")
        if n and np.any(np.diff(self.incidence.tocsc().indptr) == 0):
            raise ValueError("every variable must appear in at least one constraint row")
        if self.incidence.nnz and np.any(self.incidence.data != 1.0):
            raise ValueError("incidence must be a 0/1 matrix")

    @property
    def n_vars(self) -> int:
        return self.incidence.shape[1]

    @property
    def n_rows(self) -> int:
        return self.incidence.shape[0]

    def objective(self, z) -> float:
        """``sum_l w_l log_alpha(z_l)`` (the quantity being maximized)."""
        return float(np.dot(self.weights, log_alpha(self.alpha, np.asarray(z, dtype=float))))

    def interior_point(self) -> np.ndarray:
        """A strictly feasible point: every row sums to less than one."""
        row_sizes = np.diff(self.incidence.indptr)
        widest = int(row_sizes.max()) if row_sizes.size else 1
        return np.full(self.n_vars, 1.0 / (widest + 1))

    @classmethod
    def from_hypergraph(cls, data, hypergraph, alpha: float) -> "PackingProblem":
        return cls(data.weights, hypergraph.incidence, alpha)


@dataclass(eq=False)
class DualSolution:
    """Optimal dual variables and their certificate.

    ``z[l]`` is psi for support atom ``members[l]``; ``lam`` holds one
    multiplier per constraint row.
    """

    z: np.ndarray
    lam: np.ndarray
    objective: float
    risk_lower_bound: float
    kkt_residual: float
    newton_iters: int
    alpha: float
    outer_iters: int = 0
    zeroed: np.ndarray = field(default=None)
    members: list | None = None
    epsilon: float | None = None
    metric: str | None = None
    cap: int | None = None

    def __post_init__(self):
        self.z = np.asarray(self.z, dtype=float)
        self.lam = np.asarray(self.lam, dtype=float)
        if self.zeroed is None:
            self.zeroed = np.zeros(self.z.shape, dtype=bool)

    def potentials(self) -> np.ndarray:
        """phi = log_alpha(psi) for every support atom."""
        return log_alpha(self.alpha, self.z)


# -- KKT certificate ---------------------------------------------------------


def _utility_grad(alpha: float, w: np.ndarray, z: np.ndarray) -> np.ndarray:
    if alpha == 0:
        return w.copy()
    with np.errstate(divide="ignore"):
        if is_ce(alpha):
            return w / z
        return w * np.power(z, -alpha)


def kkt_components(problem: PackingProblem, z, lam) -> dict[str, float]:
    """Individual KKT violations of ``(z, lam)``.

    The multiplier for ``z >= 0`` is taken as the nonnegative part of
    ``D^T lam - w * z**-alpha``, so stationarity only measures the positive
    part of the reduced gradient and the remainder shows up as complementarity
    on ``z``.
    """
    z = np.asarray(z, dtype=float)
    lam = np.asarray(lam, dtype=float)
    D = problem.incidence
    g = _utility_grad(problem.alpha, problem.weights, z)
    reduced = g - D.T @ lam
    nu = np.maximum(-reduced, 0.0)
    with np.errstate(invalid="ignore"):
        comp_z = np.where(nu > 0, nu * z, 0.0)
    slack = 1.0 - D @ z
    return {
        "stationarity": float(np.max(np.maximum(reduced, 0.0), initial=0.0)),
        "primal": float(max(np.max(-slack, initial=0.0), np.max(-z, initial=0.0), 0.0)),
        "dual": float(max(np.max(-lam, initial=0.0), 0.0)),
        "complementarity": float(max(np.max(np.abs(lam * slack), initial=0.0),
                                     np.max(comp_z, initial=0.0))),
    }


def kkt_residual(problem: PackingProblem, z, lam) -> float:
    return max(kkt_components(problem, z, lam).values())


# -- barrier method ----------------------------------------------------------


def _log_alpha_delta(alpha: float, z: np.ndarray, dz: np.ndarray) -> np.ndarray:
    """log_alpha(z + dz) - log_alpha(z), without cancellation."""
    r = np.log1p(dz / z)
    if is_ce(alpha):
        return r
    if alpha == 0:
        return dz
    return np.power(z, 1.0 - alpha) * np.expm1((1.0 - alpha) * r) / (1.0 - alpha)


class _Barrier:
    """t * F(z) - sum log(1 - Dz) - sum log(z) with F = -sum w log_alpha(z)."""

    def __init__(self, problem: PackingProblem):
        self.p = problem
        self.D = problem.incidence
        self.DT = problem.incidence.T.tocsr()
        self.w = problem.weights
        self.alpha = problem.alpha

    def slack(self, z):
        return 1.0 - self.D @ z

    def grad_parts(self, z, s):
        a = self.alpha
        g_obj = -_utility_grad(a, self.w, z)
        g_bar = self.DT @ (1.0 / s) - 1.0 / z
        return g_obj, g_bar

    def hessian(self, z, s, t):
        a = self.alpha
        if a == 0:
            h_obj = np.zeros_like(z)
        else:
            h_obj = a * self.w * np.power(z, -a - 1.0)
        Ds = sp.diags(1.0 / s) @ self.D
        H = (Ds.T @ Ds).toarray()
        H[np.diag_indices_from(H)] += t * h_obj + 1.0 / (z * z)
        return H

    def delta(self, z, s, dz, ds, step, t) -> float:
        """phi_t(z + step*dz) - phi_t(z), summed from well-conditioned pieces."""
        d_obj = -np.dot(self.w, _log_alpha_delta(self.alpha, z, step * dz))
        d_bar = -np.sum(np.log1p(step * ds / s)) - np.sum(np.log1p(step * dz / z))
        return t * d_obj + d_bar


def _newton_direction(H: np.ndarray, g: np.ndarray) -> np.ndarray:
    scale = 1.0 / np.sqrt(np.diag(H))
    Hs = H * scale[:, None] * scale[None, :]
    try:
        factor = scipy.linalg.cho_factor(Hs, lower=True, check_finite=False)
    except np.linalg.LinAlgError:
        Hs[np.diag_indices_from(Hs)] += 1e-10
        try:
            factor = scipy.linalg.cho_factor(Hs, lower=True, check_finite=False)
        except np.linalg.LinAlgError as exc:
            cond = np.linalg.cond(Hs)
            raise NewtonFailure(f"Hessian factorization failed (cond ~ {cond:.3e})") from exc
    return -scale * scipy.linalg.cho_solve(factor, scale * g, check_finite=False)


def _max_step(z, dz, s, ds) -> float:
    step = 1.0
    neg = dz < 0
    if np.any(neg):
        step = min(step, float(np.min(-z[neg] / dz[neg])))
    shrink = ds < 0
    if np.any(shrink):
        step = min(step, float(np.min(-s[shrink] / ds[shrink])))
    return step


def _center(bar: _Barrier, z, s, t, max_iters, decrement_tol=1e-10):
    """Damped Newton minimization of phi_t from the strictly feasible ``z``.

    Slacks are carried along as ``s <- s - step * D dz`` instead of being
    recomputed from ``1 - Dz``; near the boundary the recomputed value has too
    few correct digits to drive the Newton decrement down.
    """
    dec2 = math.inf
    for iters in range(max_iters):
        g_obj, g_bar = bar.grad_parts(z, s)
        g = t * g_obj + g_bar
        dz = _newton_direction(bar.hessian(z, s, t), g)
        dec2 = -float(np.dot(g, dz))
        if dec2 <= 2 * decrement_tol:
            return z, s, iters, dec2
        ds = -(bar.D @ dz)
        step = min(1.0, 0.99 * _max_step(z, dz, s, ds))
        while bar.delta(z, s, dz, ds, step, t) > -0.25 * step * dec2:
            step *= 0.5
            if step < 1e-14:
                if dec2 < STALL_DECREMENT:
                    # rounding floor reached close to the center
                    return z, s, iters, dec2
                raise NewtonFailure(
                    f"line search stalled at t={t:.3e} (Newton decrement^2 {dec2:.3e})")
        z = z + step * dz
        s = s + step * ds
        if np.any(z <= 0) or np.any(s <= 0):
            raise NewtonFailure("iterate left the interior")
    if dec2 < STALL_DECREMENT:
        logger.debug("centering hit the step cap at t=%.3e with decrement^2 %.2e", t, dec2)
        return z, s, max_iters, dec2
    raise IterationLimitError(
        f"centering did not converge within {max_iters} Newton steps at t={t:.3e}")


def _initial_t(bar: _Barrier, z) -> float:
    s = bar.slack(z)
    g_obj, g_bar = bar.grad_parts(z, s)
    denom = float(np.dot(g_obj, g_obj))
    if denom == 0:
        return 1.0
    t = -float(np.dot(g_obj, g_bar)) / denom
    return float(min(max(t, 1.0), 1e6))


def fill(problem: PackingProblem, z) -> np.ndarray:
    """Raise each coordinate, in order, until one of its rows is tight.

    Every move keeps ``Dz <= 1`` and can only increase the (monotone)
    objective, so it never undoes the barrier's work; it just lands exactly on
    constraints the barrier approaches asymptotically.
    """
    z = np.array(z, dtype=float)
    D = problem.incidence
    csc = D.tocsc()
    slack = 1.0 - D @ z
    for l in range(z.size):
        rows = csc.indices[csc.indptr[l]:csc.indptr[l + 1]]
        room = float(slack[rows].min())
        if room > 0:
            z[l] += room
            slack[rows] -= room
    return z


def start_point(problem: PackingProblem, warm_start=None, theta: float = 0.01) -> np.ndarray:
    """Strictly feasible initial iterate.

    A warm start is first scaled down if it violates the current rows (the
    hypergraph may have grown since it was computed), then blended with the
    interior point as ``(1 - theta) * z0 + theta * u``.
    """
    u = problem.interior_point()
    if warm_start is None:
        return u
    if not 0 < theta < 1:
        raise ValueError("theta must lie in (0, 1)")
    z0 = np.clip(np.asarray(warm_start, dtype=float), 0.0, None)
    if z0.shape != u.shape:
        raise ValueError("warm start has the wrong length")
    worst = float(np.max(problem.incidence @ z0, initial=0.0))
    if worst > 1.0:
        z0 = z0 / worst
    z = (1.0 - theta) * z0 + theta * u
    assert np.all(z > 0) and np.all(problem.incidence @ z < 1.0), "warm start not interior"
    return z


def solve(problem: PackingProblem, tolerances: SolverTolerances | None = None,
          warm_start=None, theta: float = 0.01) -> DualSolution:
    """Solve the packing dual to the requested duality-gap and KKT tolerances."""
    tol = tolerances or SolverTolerances()
    n, m = problem.n_vars, problem.n_rows
    if n == 0:
        raise ValueError("empty problem")
    bar = _Barrier(problem)
    z = start_point(problem, warm_start, theta)
    s = bar.slack(z)
    t = _initial_t(bar, z)
    total = 0
    outer = 0
    n_barriers = m + n
    extra_rounds = 0
    while True:
        outer += 1
        z, s, it, _ = _center(bar, z, s, t, tol.max_newton_iters)
        total += it
        if n_barriers / t <= tol.gap_tol:
            lam = 1.0 / (t * s)
            res = kkt_residual(problem, z, lam)
            if res <= tol.kkt_tol:
                break
            extra_rounds += 1
            if extra_rounds > 3:
                raise SolverError(f"KKT residual {res:.3e} above tolerance {tol.kkt_tol:.1e}")
        t *= tol.barrier_growth
        if outer > 200:
            raise IterationLimitError("barrier parameter schedule did not terminate")

    lam = 1.0 / (t * s)
    z = fill(problem, z)
    zeroed = np.zeros(n, dtype=bool)
    if problem.alpha < 1:
        zeroed = z < ZERO_FLOOR
        z = np.where(zeroed, 0.0, z)
    obj = problem.objective(z)
    res = kkt_residual(problem, z, lam)
    logger.debug("solved n=%d m=%d alpha=%g in %d Newton steps (kkt %.2e)",
                 n, m, problem.alpha, total, res)
    return DualSolution(z=z, lam=lam, objective=obj, risk_lower_bound=-obj,
                        kkt_residual=res, newton_iters=total, outer_iters=outer,
                        alpha=problem.alpha, zeroed=zeroed)


# -- independent checks ------------------------------------------------------


def oracle_solve(problem: PackingProblem, rounds: int = 6, points: int = 21,
                 shrink: float = 5.0) -> float:
    """Best objective found by successive grid refinement (n <= 4 only).

    Each round lays ``points`` samples per axis over the current box (clipped
    to [1e-6, 1]), keeps the best feasible one, and shrinks the box around it.
    """
    n = problem.n_vars
    if n > 4:
        raise ValueError("oracle_solve handles at most 4 variables")
    D = problem.incidence.toarray()
    lo_lim, hi_lim = 1e-6, 1.0
    center = np.full(n, 0.5)
    width = 1.0
    best_val, best_z = -math.inf, None
    for _ in range(rounds):
        lo = np.maximum(lo_lim, center - width / 2)
        hi = np.minimum(hi_lim, center + width / 2)
        axes = [np.linspace(lo[i], hi[i], points) for i in range(n)]
        grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, n)
        feasible = np.all(grid @ D.T <= 1.0 + 1e-12, axis=1)
        grid = grid[feasible]
        if grid.shape[0]:
            vals = log_alpha(problem.alpha, grid) @ problem.weights
            k = int(np.argmax(vals))
            if vals[k] > best_val:
                best_val, best_z = float(vals[k]), grid[k]
        if best_z is not None:
            center = best_z
        width /= shrink
    if best_z is None:
        raise SolverError("oracle found no feasible grid point")
    return best_val


def zero_one_dual_solve(problem: PackingProblem) -> float:
    """Adversarial 0-1 risk via the classical 0-1 dual in the g-variables.

    Solves max sum_l w_l g_l subject to sum_{l in A} g_l <= 1 for every stored
    row and every one of its sub-tuples, with g unrestricted in sign, and
    returns one minus the optimum. The LP is handed to HiGHS, so this route
    shares neither the dominance pruning nor the barrier code with :func:`solve`.
    """
    if problem.alpha != 0:
        raise ValueError("zero_one_dual_solve requires alpha == 0")
    D = problem.incidence
    rows: set[tuple[int, ...]] = set()
    for r in range(D.shape[0]):
        members = tuple(D.indices[D.indptr[r]:D.indptr[r + 1]].tolist())
        for size in range(1, len(members) + 1):
            rows.update(itertools.combinations(sorted(members), size))
    ordered = sorted(rows)
    A = _rows_to_matrix(ordered, problem.n_vars)
    res = linprog(-problem.weights, A_ub=A, b_ub=np.ones(len(ordered)),
                  bounds=[(None, None)] * problem.n_vars, method="highs")
    if res.status != 0:
        raise SolverError(f"0-1 dual LP failed: {res.message}")
    return 1.0 - float(-res.fun)


def _rows_to_matrix(rows, n):
    indptr = np.zeros(len(rows) + 1, dtype=np.int64)
    np.cumsum([len(r) for r in rows], out=indptr[1:])
    indices = np.fromiter(itertools.chain.from_iterable(rows), dtype=np.int64)
    return sp.csr_matrix((np.ones(indices.size), indices, indptr), shape=(len(rows), n))
