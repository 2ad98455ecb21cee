import math

import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from advbound.alpha_calculus import log_alpha
from advbound.dataset_io import LabeledDataset, SolverTolerances
from advbound.geometry import build_hypergraph
from advbound.packing_solver import (
    PackingProblem,
    SolverError,
    kkt_residual,
    oracle_solve,
    solve,
    start_point,
    zero_one_dual_solve,
)


def problem(rows, n, alpha, weights=None):
    D = np.zeros((len(rows), n))
    for r, row in enumerate(rows):
        D[r, list(row)] = 1.0
    w = np.full(n, 1.0 / n) if weights is None else np.asarray(weights, dtype=float)
    return PackingProblem(w, sp.csr_matrix(D), alpha)


PAIR = dict(rows=[(0, 1)], n=2)
TRIPLE = dict(rows=[(0, 1, 2)], n=3)
SINGLETONS = dict(rows=[(0,), (1,), (2,)], n=3)


def random_instance(seed, k=3, n=9, d=2, eps=None, cap=None):
    rng = np.random.default_rng(seed)
    X = rng.uniform(-2, 2, size=(n, d))
    y = np.arange(n) % k
    w = rng.uniform(0.5, 1.5, size=n)
    data = LabeledDataset.from_arrays(X, y, w)
    eps = rng.uniform(0.2, 2.0) if eps is None else eps
    hg = build_hypergraph(data, "euclidean", eps, cap or k)
    return data, hg


class TestExamples:
    def test_pair_ce(self):
        sol = solve(problem(**PAIR, alpha=1.0))
        np.testing.assert_allclose(sol.z, [0.5, 0.5], atol=1e-8)
        assert sol.risk_lower_bound == pytest.approx(math.log(2), abs=1e-8)

    def test_pair_zero_one(self):
        sol = solve(problem(**PAIR, alpha=0.0))
        assert sol.z.sum() == pytest.approx(1.0, abs=1e-8)
        assert sol.risk_lower_bound == pytest.approx(0.5, abs=1e-8)

    @pytest.mark.parametrize("alpha", [0.0, 0.5, 1.0, 2.0])
    def test_singletons_exact_zero(self, alpha):
        sol = solve(problem(**SINGLETONS, alpha=alpha))
        np.testing.assert_array_equal(sol.z, [1.0, 1.0, 1.0])
        assert sol.risk_lower_bound == 0.0

    def test_triple_ce(self):
        sol = solve(problem(**TRIPLE, alpha=1.0))
        np.testing.assert_allclose(sol.z, [1 / 3] * 3, atol=1e-8)
        assert sol.risk_lower_bound == pytest.approx(math.log(3), abs=1e-8)

    def test_unequal_weights_closed_form(self):
        # maximize sum w log z s.t. z0 + z1 <= 1 has z = w / sum(w)
        sol = solve(problem(**PAIR, alpha=1.0, weights=[0.2, 0.8]))
        np.testing.assert_allclose(sol.z, [0.2, 0.8], atol=1e-8)

    def test_rejects_bad_incidence(self):
        with pytest.raises(ValueError):
            PackingProblem(np.array([0.5, 0.5]), sp.csr_matrix(np.array([[1.0, 0.0]])), 1.0)
        with pytest.raises(ValueError):
            PackingProblem(np.array([0.5, 0.5]), sp.csr_matrix(np.array([[2.0, 1.0]])), 1.0)


class TestKKT:
    def test_optimal_pair(self):
        p = problem(**PAIR, alpha=1.0)
        assert kkt_residual(p, [0.5, 0.5], [1.0]) <= 1e-15

    def test_zero_multipliers(self):
        p = problem(**TRIPLE, alpha=1.0)
        z = np.array([0.2, 0.3, 0.1])
        assert kkt_residual(p, z, [0.0]) == pytest.approx(np.max(p.weights / z))

    def test_grows_with_perturbation(self):
        p = problem(**PAIR, alpha=1.0)
        res = [kkt_residual(p, [0.5 + h, 0.5], [1.0]) for h in (0.0, 1e-4, 1e-3, 1e-2)]
        assert all(a < b for a, b in zip(res, res[1:]))


class TestOracle:
    def test_pair(self):
        assert -oracle_solve(problem(**PAIR, alpha=1.0)) == pytest.approx(math.log(2), abs=1e-3)

    def test_singletons(self):
        assert oracle_solve(problem(**SINGLETONS, alpha=1.0)) == pytest.approx(0.0, abs=1e-9)

    def test_triple_half(self):
        expected = 2 * (1 - math.sqrt(1 / 3))
        assert -oracle_solve(problem(**TRIPLE, alpha=0.5)) == pytest.approx(expected, abs=1e-3)

    def test_too_large(self):
        with pytest.raises(ValueError):
            oracle_solve(problem(rows=[(0, 1, 2, 3, 4)], n=5, alpha=1.0))


class TestZeroOneDual:
    def test_pair(self):
        assert zero_one_dual_solve(problem(**PAIR, alpha=0.0)) == pytest.approx(0.5, abs=1e-9)

    def test_singletons(self):
        assert zero_one_dual_solve(problem(**SINGLETONS, alpha=0.0)) == pytest.approx(0.0, abs=1e-9)

    def test_triple(self):
        assert zero_one_dual_solve(problem(**TRIPLE, alpha=0.0)) == pytest.approx(2 / 3, abs=1e-9)

    def test_requires_alpha_zero(self):
        with pytest.raises(ValueError):
            zero_one_dual_solve(problem(**PAIR, alpha=0.5))


def test_alpha_below_one_rounds_to_zero():
    # the heavy atom shares a row with two light ones; at alpha=0 the light ones are zeroed
    p = problem(rows=[(0, 1), (0, 2)], n=3, alpha=0.0, weights=[0.6, 0.2, 0.2])
    sol = solve(p)
    assert sol.risk_lower_bound == pytest.approx(0.4, abs=1e-8)
    assert sol.kkt_residual <= 1e-6


def test_iteration_budget_surfaces_as_solver_error():
    data, hg = random_instance(5, eps=1.5)
    p = PackingProblem.from_hypergraph(data, hg, 1.0)
    with pytest.raises(SolverError):
        solve(p, SolverTolerances(max_newton_iters=1))


def test_warm_start_infeasible_is_rescaled():
    p = problem(**TRIPLE, alpha=1.0)
    z = start_point(p, warm_start=[0.9, 0.9, 0.9], theta=0.01)
    assert np.all(z > 0) and np.all(p.incidence @ z < 1)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 10**6), alpha=st.sampled_from([0.0, 0.5, 0.75, 1.0, 2.0]))
def test_feasible_and_certified(seed, alpha):
    data, hg = random_instance(seed)
    p = PackingProblem.from_hypergraph(data, hg, alpha)
    sol = solve(p)
    assert np.all(sol.z >= 0)
    assert np.all(p.incidence @ sol.z <= 1 + 1e-9)
    assert np.all(sol.lam >= 0)
    assert sol.kkt_residual <= 1e-6
    assert sol.risk_lower_bound >= -1e-12


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 10**6))
def test_zero_one_equivalence(seed):
    data, hg = random_instance(seed)
    p = PackingProblem.from_hypergraph(data, hg, 0.0)
    assert solve(p).risk_lower_bound == pytest.approx(zero_one_dual_solve(p), abs=1e-6)


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 10**6), alpha=st.sampled_from([0.0, 0.5, 1.0, 2.0]))
def test_oracle_agreement(seed, alpha):
    data, hg = random_instance(seed, k=2, n=4, eps=np.random.default_rng(seed).uniform(0.2, 3))
    p = PackingProblem.from_hypergraph(data, hg, alpha)
    assert solve(p).risk_lower_bound == pytest.approx(-oracle_solve(p), abs=1e-3)


@settings(max_examples=15, deadline=None)
@given(seed=st.integers(0, 10**6))
def test_monotone_in_epsilon_and_alpha(seed):
    rng = np.random.default_rng(seed)
    X = rng.uniform(-2, 2, size=(9, 2))
    data = LabeledDataset.from_arrays(X, np.arange(9) % 3)
    grid = np.sort(rng.uniform(0, 2, size=3))
    alphas = [0.0, 0.5, 0.75, 1.0]
    table = np.array([[solve(PackingProblem.from_hypergraph(
        data, build_hypergraph(data, "euclidean", e, 3), a)).risk_lower_bound for e in grid]
        for a in alphas])
    assert np.all(np.diff(table, axis=1) >= -1e-8)
    assert np.all(np.diff(table, axis=0) >= -1e-8)


@settings(max_examples=15, deadline=None)
@given(seed=st.integers(0, 10**6), alpha=st.sampled_from([0.0, 0.75, 1.0]))
def test_cap_monotone(seed, alpha):
    rng = np.random.default_rng(seed)
    data = LabeledDataset.from_arrays(rng.uniform(-2, 2, size=(9, 2)), np.arange(9) % 3)
    eps = rng.uniform(0.3, 2.0)
    v2, v3 = (solve(PackingProblem.from_hypergraph(data, build_hypergraph(data, "euclidean", eps, c),
                                                   alpha)).risk_lower_bound for c in (2, 3))
    assert v2 <= v3 + 1e-8


def test_deterministic_bitwise():
    data, hg = random_instance(11, n=15)
    p = PackingProblem.from_hypergraph(data, hg, 0.75)
    a, b = solve(p), solve(p)
    assert a.z.tobytes() == b.z.tobytes()


@settings(max_examples=15, deadline=None)
@given(seed=st.integers(0, 10**6), alpha=st.sampled_from([0.0, 0.5, 1.0, 2.0]))
def test_warm_start_agrees_with_cold(seed, alpha):
    data, hg = random_instance(seed)
    _, hg_small = random_instance(seed, eps=0.1)
    p = PackingProblem.from_hypergraph(data, hg, alpha)
    warm = solve(PackingProblem.from_hypergraph(data, hg_small, alpha)).z
    assert solve(p, warm_start=warm).risk_lower_bound == pytest.approx(
        solve(p).risk_lower_bound, abs=1e-7)


def test_objective_matches_log_alpha():
    p = problem(**TRIPLE, alpha=0.5)
    z = np.array([0.2, 0.3, 0.4])
    assert p.objective(z) == pytest.approx(float(log_alpha(0.5, z) @ p.weights))
