"""Markov transition-matrix estimation with detection of equal transition probabilities."""

__version__ = "0.1.0"

from .chain import (
    EqualityPartition,
    Mode,
    StateSequence,
    StationaryDistribution,
    TransitionCounts,
    TransitionMatrix,
    count_transitions,
    extract_equality_classes,
    sequence_from_counts,
    simulate_sequence,
    stationary_distribution,
    validate_matrix,
)
from .estimators import LrtResult, bootstrap_mle, constrained_mle, log_likelihood, lrt, mle
from .metrics import asymptotic_covariance, frobenius_distance, purity, selection_accuracy
from .penalized import (
    PairSet,
    PairWeights,
    PenalizedFit,
    SolverOptions,
    adaptive_weights,
    fit,
    objective,
    pair_differences,
    pair_set,
    refit,
    solve,
    unit_weights,
)
from .selection import CvReport, cv_score, log_grid, select_lambda
from .experiments import StudyConfig, StudySummary, difference_histogram, run_study

__all__ = [
    "EqualityPartition", "Mode", "StateSequence", "StationaryDistribution", "TransitionCounts",
    "TransitionMatrix", "count_transitions", "extract_equality_classes", "sequence_from_counts",
    "simulate_sequence", "stationary_distribution", "validate_matrix",
    "LrtResult", "bootstrap_mle", "constrained_mle", "log_likelihood", "lrt", "mle",
    "asymptotic_covariance", "frobenius_distance", "purity", "selection_accuracy",
    "PairSet", "PairWeights", "PenalizedFit", "SolverOptions", "adaptive_weights", "fit", "objective",
    "pair_differences", "pair_set", "refit", "solve", "unit_weights",
    "CvReport", "cv_score", "log_grid", "select_lambda",
    "StudyConfig", "StudySummary", "difference_histogram", "run_study",
]
