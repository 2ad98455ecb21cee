"""Sharp learner-agnostic lower bounds on multiclass adversarial risk.

Covers cross-entropy, alpha-logarithmic and 0-1 losses under the 0-inf
perturbation cost, along with the optimal robust classifiers that attain them.
"""

from .alpha_calculus import LossSpec, exp_alpha, find_normalizer, log_alpha, loss_value
from .classifier import (
    ClassifierOutput,
    PotentialSet,
    ScaledDistanceCost,
    UnreachableQueryError,
    ZeroInfinityCost,
    c_transform,
    classify,
    verify_saddle,
)
from .dataset_io import LabeledDataset, RunConfig, SolverTolerances, load_dataset, read_solution, write_solution
from .estimator import RobustBoundClassifier
from .geometry import ConflictHypergraph, Metric, balls_intersect, build_hypergraph, distance
from .packing_solver import DualSolution, PackingProblem, kkt_residual, oracle_solve, solve, zero_one_dual_solve
from .risk_harness import RiskCurve, full_confusion_value, sweep

__version__ = "0.1.0"

__all__ = [
    "ClassifierOutput", "ConflictHypergraph", "DualSolution", "LabeledDataset", "LossSpec",
    "Metric", "PackingProblem", "PotentialSet", "RiskCurve", "RobustBoundClassifier", "RunConfig",
    "ScaledDistanceCost", "SolverTolerances", "UnreachableQueryError", "ZeroInfinityCost",
    "balls_intersect", "build_hypergraph", "c_transform", "classify", "distance", "exp_alpha",
    "find_normalizer", "full_confusion_value", "kkt_residual", "load_dataset", "log_alpha",
    "loss_value", "oracle_solve", "read_solution", "solve", "sweep", "verify_saddle",
    "write_solution", "zero_one_dual_solve",
]
