"""scikit-learn front end: fitting solves the dual, predicting applies f*."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from .alpha_calculus import LossSpec
from .classifier import PotentialSet, classify_transforms
from .dataset_io import LabeledDataset, SolverTolerances
from .geometry import DEFAULT_EDGE_LIMIT, build_hypergraph
from .packing_solver import PackingProblem, solve
from .risk_harness import attach_metadata


class RobustBoundClassifier(ClassifierMixin, BaseEstimator):
    """Learner-agnostic adversarial risk bound and its optimal robust classifier.

    ``fit`` treats the training set as an empirical measure, solves the
    alpha-fair packing dual for budget ``epsilon`` and stores the certified
    lower bound in ``risk_lower_bound_``. ``predict_proba`` evaluates the
    optimal robust classifier built from the fitted potentials.

    Parameters
    ----------
    epsilon : float
        Adversarial budget (radius of the closed perturbation ball).
    alpha : float
        Loss exponent; 0 is the 0-1 loss, 1 the cross-entropy.
    metric : {"euclidean", "chebyshev"}
    cap : int or None
        Largest number of classes allowed to interact in one constraint.
        ``None`` means all classes (sharp bound).
    loss : str or LossSpec or None
        Loss used by ``predict_proba``; defaults to the alpha-log loss being
        bounded. Other losses reuse the same potentials, which are then not
        dual-optimal for them.
    """

    def __init__(self, epsilon=1.0, alpha=1.0, metric="euclidean", cap=None, loss=None,
                 kkt_tol=1e-6, gap_tol=1e-8, max_newton_iters=200, barrier_growth=10.0,
                 edge_limit=DEFAULT_EDGE_LIMIT):
        self.epsilon = epsilon
        self.alpha = alpha
        self.metric = metric
        self.cap = cap
        self.loss = loss
        self.kkt_tol = kkt_tol
        self.gap_tol = gap_tol
        self.max_newton_iters = max_newton_iters
        self.barrier_growth = barrier_growth
        self.edge_limit = edge_limit

    def _loss_spec(self) -> LossSpec:
        if self.loss is None:
            return LossSpec.alpha_log(self.alpha)
        if isinstance(self.loss, LossSpec):
            return self.loss
        return LossSpec.parse(str(self.loss))

    def fit(self, X, y, sample_weight=None):
        X, y = check_X_y(X, y)
        if self.epsilon < 0:
            raise ValueError("epsilon must be >= 0")
        data = LabeledDataset.from_arrays(X, y, sample_weight)
        k = data.class_count
        cap = self.cap if self.cap is not None else max(k, 2)
        tol = SolverTolerances(self.kkt_tol, self.gap_tol, self.max_newton_iters, self.barrier_growth)
        hg = build_hypergraph(data, self.metric, self.epsilon, cap, self.edge_limit)
        sol = attach_metadata(solve(PackingProblem.from_hypergraph(data, hg, self.alpha), tol), hg)

        self.classes_ = np.asarray(data.class_names)
        self.n_features_in_ = X.shape[1]
        self.dataset_ = data
        self.hypergraph_ = hg
        self.solution_ = sol
        self.potentials_ = PotentialSet.from_solution(data, sol)
        self.risk_lower_bound_ = sol.risk_lower_bound
        return self

    def transform(self, X):
        """c-transforms of each class potential at each row (``inf`` = out of reach)."""
        check_is_fitted(self, "potentials_")
        X = check_array(X)
        return self.potentials_.transforms(X)

    def predict_proba(self, X):
        a = self.transform(X)
        loss = self._loss_spec()
        return np.vstack([classify_transforms(loss, row).f for row in a])

    def predict(self, X):
        check_is_fitted(self, "classes_")
        return self.classes_[np.argmax(self.predict_proba(X), axis=1)]
