"""Scores for an estimate against a known truth, and the MLE's asymptotic covariance."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .chain import (
    EqualityPartition,
    StationaryDistribution,
    TransitionMatrix,
    cell_index,
    extract_equality_classes,
    stationary_distribution,
)
from .errors import MismatchError, ShapeError
from .penalized import PairSet, PenalizedFit, pair_differences

__all__ = [
    "CovarianceBlocks",
    "purity",
    "frobenius_distance",
    "selection_accuracy",
    "exact_partition",
    "fused_mask",
    "asymptotic_covariance",
    "difference_variance",
]


def exact_partition(P: TransitionMatrix) -> EqualityPartition:
    """Classes of cells with bit-identical values."""
    return extract_equality_classes(P, 0.0)


def purity(truth: EqualityPartition, estimate: EqualityPartition) -> float:
    """Sum over estimated classes of the best overlap with a true class, over ``m**2``."""
    if truth.m != estimate.m:
        raise MismatchError(f"partitions cover {truth.m}x{truth.m} and {estimate.m}x{estimate.m} cells")
    total = 0
    for est in estimate.classes:
        total += max(len(est & tru) for tru in truth.classes)
    return total / truth.m**2


def frobenius_distance(truth: TransitionMatrix, estimate: TransitionMatrix) -> float:
    if truth.m != estimate.m:
        raise ShapeError(f"{truth.m}-state truth against {estimate.m}-state estimate")
    return float(np.sqrt(((truth.entries - estimate.entries) ** 2).sum()))


def fused_mask(estimate, pairs: PairSet) -> np.ndarray:
    """Boolean fused status per pair for a fit, a partition, or a matrix (exact ties)."""
    if isinstance(estimate, PenalizedFit):
        return estimate.fused_pairs()
    if isinstance(estimate, TransitionMatrix):
        estimate = exact_partition(estimate)
    labels = estimate.labels
    return labels[pairs.first] == labels[pairs.second]


def selection_accuracy(truth: TransitionMatrix, fit, pairs: PairSet) -> float:
    """Share of pairs whose fused/unfused status matches exact equality in ``truth``."""
    if truth.m != pairs.m:
        raise ShapeError("truth and pair set differ in size")
    truth_equal = pair_differences(truth, pairs) == 0
    return float(np.mean(fused_mask(fit, pairs) == truth_equal))


@dataclass(frozen=True)
class CovarianceBlocks:
    """Per-row multinomial covariances ``Z_i`` and the assembled ``m**2 x m**2`` matrix."""

    m: int
    blocks: np.ndarray
    pi: StationaryDistribution
    assembled: np.ndarray


def asymptotic_covariance(P: TransitionMatrix) -> CovarianceBlocks:
    """Limit covariance of ``sqrt(N) (P_hat - P)``: block diagonal with blocks ``Z_i / pi_i``."""
    pi = stationary_distribution(P)
    m = P.m
    blocks = np.empty((m, m, m))
    assembled = np.zeros((m * m, m * m))
    for i in range(m):
        row = P.entries[i]
        Z = np.diag(row) - np.outer(row, row)
        blocks[i] = Z
        assembled[i * m:(i + 1) * m, i * m:(i + 1) * m] = Z / pi.pi[i]
    blocks.setflags(write=False)
    assembled.setflags(write=False)
    return CovarianceBlocks(m, blocks, pi, assembled)


def difference_variance(P: TransitionMatrix, a: tuple[int, int], b: tuple[int, int], N: int) -> float:
    """Plug-in variance of ``p_hat_a - p_hat_b`` for a length-``N`` sequence."""
    cov = asymptotic_covariance(P).assembled
    v = np.zeros(P.m * P.m)
    v[cell_index(a, P.m)] += 1.0
    v[cell_index(b, P.m)] -= 1.0
    return float(v @ cov @ v) / N
