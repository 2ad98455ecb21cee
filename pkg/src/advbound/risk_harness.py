"""(epsilon, alpha) sweeps producing certified risk-lower-bound curves."""

from __future__ import annotations

import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .alpha_calculus import log_alpha
from .dataset_io import LabeledDataset, RunConfig
from .geometry import ConflictHypergraph, build_hypergraph
from .packing_solver import DualSolution, PackingProblem, solve

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class CurveRow:
    epsilon: float
    alpha: float
    risk_lower_bound: float
    kkt_residual: float
    newton_iters: int
    edge_count: int
    wall_time_ms: float


@dataclass
class RiskCurve:
    rows: list[CurveRow]
    solutions: dict = field(default_factory=dict, repr=False)

    def slice(self, alpha: float) -> list[CurveRow]:
        return [r for r in self.rows if r.alpha == alpha]

    def values(self, alpha: float) -> np.ndarray:
        return np.array([r.risk_lower_bound for r in self.slice(alpha)])

    def value(self, epsilon: float, alpha: float) -> float:
        for r in self.rows:
            if r.alpha == alpha and r.epsilon == epsilon:
                return r.risk_lower_bound
        raise KeyError((epsilon, alpha))


def _annotate(exc: Exception, epsilon: float, alpha: float) -> Exception:
    exc.args = (f"[epsilon={epsilon:g}, alpha={alpha:g}] {exc.args[0] if exc.args else ''}",
                *exc.args[1:])
    return exc


def attach_metadata(sol: DualSolution, hg: ConflictHypergraph) -> DualSolution:
    sol.members = hg.members
    sol.epsilon = hg.epsilon
    sol.metric = hg.metric
    sol.cap = hg.cap
    return sol


def solve_cell(data: LabeledDataset, hg: ConflictHypergraph, alpha: float, config: RunConfig,
               warm_start=None) -> DualSolution:
    problem = PackingProblem.from_hypergraph(data, hg, alpha)
    sol = solve(problem, config.solver_tolerances, warm_start=warm_start,
                theta=config.warm_start_theta)
    return attach_metadata(sol, hg)


def _run_slice(data, config, alpha, hypergraphs, neighbours=None):
    """One alpha-slice; warm starts chain along epsilon."""
    rows, sols = [], {}
    prev_sol, prev_edges = None, None
    for eps in config.epsilon_grid:
        hg = hypergraphs[eps]
        start = time.perf_counter()
        if prev_sol is not None and hg.edges == prev_edges:
            # identical constraint system: the optimum is unchanged
            sol = attach_metadata(DualSolution(
                z=prev_sol.z, lam=prev_sol.lam, objective=prev_sol.objective,
                risk_lower_bound=prev_sol.risk_lower_bound, kkt_residual=prev_sol.kkt_residual,
                newton_iters=0, alpha=alpha, outer_iters=0, zeroed=prev_sol.zeroed), hg)
        else:
            warm = prev_sol.z if prev_sol is not None else None
            if warm is None and neighbours is not None and eps in neighbours:
                warm = neighbours[eps].z
            try:
                sol = solve_cell(data, hg, alpha, config, warm_start=warm)
            except Exception as exc:
                raise _annotate(exc, eps, alpha)
        elapsed = 1000.0 * (time.perf_counter() - start)
        rows.append(CurveRow(eps, alpha, sol.risk_lower_bound, sol.kkt_residual,
                             sol.newton_iters, hg.n_edges, elapsed))
        sols[eps] = sol
        prev_sol, prev_edges = sol, hg.edges
    return rows, sols


def sweep(data: LabeledDataset, config: RunConfig, parallel: bool = False) -> RiskCurve:
    """Certified lower bounds on every (epsilon, alpha) cell of the config grid.

    Alphas run in ascending order, epsilons ascending within each alpha. A cell
    is warm-started from the previous epsilon of the same alpha, or, for the
    first epsilon, from the previous alpha. With ``parallel=True`` the alpha
    slices run concurrently and only the epsilon chain is used.
    """
    cap = config.cap_for(data.class_count)
    hypergraphs = {}
    for eps in config.epsilon_grid:
        try:
            hypergraphs[eps] = build_hypergraph(data, config.metric, eps, cap, config.edge_limit)
        except Exception as exc:
            raise _annotate(exc, eps, float("nan"))
    alphas = sorted(set(config.alpha_list))

    results: dict[float, tuple] = {}
    if parallel and len(alphas) > 1:
        with ThreadPoolExecutor(max_workers=len(alphas)) as pool:
            futures = {a: pool.submit(_run_slice, data, config, a, hypergraphs) for a in alphas}
            results = {a: fut.result() for a, fut in futures.items()}
    else:
        previous = None
        for a in alphas:
            results[a] = _run_slice(data, config, a, hypergraphs, previous)
            previous = results[a][1]

    rows, solutions = [], {}
    for a in alphas:
        slice_rows, slice_sols = results[a]
        rows.extend(slice_rows)
        solutions.update({(a, eps): s for eps, s in slice_sols.items()})
    return RiskCurve(rows, solutions)


def full_confusion_value(alpha: float, K: int, class_masses=None) -> float:
    """Bound once every cross-class tuple interacts.

    Equal masses give ``-log_alpha(1/K)``; otherwise a single all-class
    constraint over one atom per class is solved.
    """
    if K < 1:
        raise ValueError("K must be >= 1")
    masses = np.full(K, 1.0 / K) if class_masses is None else np.asarray(class_masses, dtype=float)
    if masses.shape != (K,) or abs(masses.sum() - 1.0) > 1e-9 or np.any(masses <= 0):
        raise ValueError("class_masses must be K positive numbers summing to 1")
    if np.allclose(masses, masses[0], rtol=0, atol=1e-15):
        return float(-log_alpha(alpha, 1.0 / K))
    problem = PackingProblem(masses, sp.csr_matrix(np.ones((1, K))), alpha)
    return solve(problem).risk_lower_bound
