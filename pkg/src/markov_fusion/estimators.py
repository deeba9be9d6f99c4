"""Likelihood-based estimators and the likelihood-ratio test of equality classes."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import linprog
from scipy.stats import chi2

from . import _newton
from .chain import EqualityPartition, Mode, TransitionCounts, TransitionMatrix, validate_matrix
from .errors import (
    ConvergenceError,
    DegenerateError,
    DomainError,
    InfeasibleError,
    PositivityError,
    ShapeError,
    ValidationError,
    ZeroRowError,
)

__all__ = [
    "LrtResult",
    "log_likelihood",
    "mle",
    "bootstrap_mle",
    "constrained_mle",
    "lrt",
    "EPS",
]

EPS = 1e-9


def _check_shapes(P: TransitionMatrix, counts: TransitionCounts) -> None:
    if P.m != counts.m:
        raise ShapeError(f"{P.m}-state matrix against {counts.m}-state counts")


def log_likelihood(P: TransitionMatrix, counts: TransitionCounts) -> float:
    """``sum n_ij log p_ij``; cells with zero count contribute nothing."""
    _check_shapes(P, counts)
    n = counts.counts
    p = P.entries
    seen = n > 0
    if np.any(p[seen] <= 0):
        raise DomainError("a transition with positive count has zero probability")
    return float((n[seen] * np.log(p[seen])).sum())


def mle(counts: TransitionCounts, zero_row_policy: str = "error") -> TransitionMatrix:
    """Closed-form maximum likelihood estimate ``n_ij / n_i.``.

    Rows never left (``n_i. = 0``) raise :class:`ZeroRowError`, or become
    uniform with ``zero_row_policy="uniform"``.
    """
    if zero_row_policy not in ("error", "uniform"):
        raise ValidationError(f"unknown zero-row policy {zero_row_policy!r}")
    n = counts.counts.astype(float)
    rows = n.sum(axis=1)
    empty = rows == 0
    if np.any(empty) and zero_row_policy == "error":
        raise ZeroRowError(f"state {int(np.flatnonzero(empty)[0]) + 1} is never left")
    p = np.empty_like(n)
    p[~empty] = n[~empty] / rows[~empty, None]
    p[empty] = 1.0 / counts.m
    return validate_matrix(p, Mode.STOCHASTIC)


def bootstrap_mle(counts: TransitionCounts, Q: TransitionMatrix, alpha_smooth: float) -> TransitionMatrix:
    """Shrink count ratios toward an ergodic reference ``Q``:
    ``(alpha * q_ij + n_ij) / (alpha + n_i.)``."""
    _check_shapes(Q, counts)
    if alpha_smooth < 0:
        raise ValidationError("smoothing strength must be nonnegative")
    if np.any(Q.entries <= 0):
        raise PositivityError("reference matrix Q must be strictly positive")
    n = counts.counts.astype(float)
    rows = n.sum(axis=1)
    if alpha_smooth == 0:
        return mle(counts)
    p = (alpha_smooth * Q.entries + n) / (alpha_smooth + rows)[:, None]
    return validate_matrix(p, Mode.STRICT_ERGODIC)


def _interior_point(C: np.ndarray, eps: float, rhs: np.ndarray | None = None) -> np.ndarray:
    """A point with ``C v = rhs`` (default all ones) maximizing its smallest coordinate."""
    G = C.shape[1]
    rhs = np.ones(C.shape[0]) if rhs is None else rhs
    # variables (v, t): maximize t subject to v >= t, C v = rhs, v <= 1
    cost = np.zeros(G + 1)
    cost[-1] = -1.0
    A_ub = np.hstack([-np.eye(G), np.ones((G, 1))])
    A_eq = np.hstack([C, np.zeros((C.shape[0], 1))])
    res = linprog(cost, A_ub=A_ub, b_ub=np.zeros(G), A_eq=A_eq, b_eq=rhs,
                  bounds=[(0, 1)] * G + [(None, 1)], method="highs")
    if res.status != 0 or res.x[-1] <= eps:
        raise InfeasibleError("no strictly positive row-stochastic matrix satisfies these equality classes")
    return res.x[:G]


def constrained_mle(counts: TransitionCounts, partition: EqualityPartition, eps: float = EPS,
                    max_iter: int = 200) -> TransitionMatrix:
    """Maximize the likelihood with all cells of each class sharing one value."""
    m = counts.m
    if partition.m != m:
        raise ShapeError(f"{partition.m}-state partition against {m}-state counts")
    labels = partition.labels
    G = len(partition)
    B = np.zeros((m * m, G))
    B[np.arange(m * m), labels] = 1.0
    n = counts.counts.ravel().astype(float)
    N_g = B.T @ n
    k_g = B.sum(axis=0)
    C = np.kron(np.eye(m), np.ones(m)) @ B
    ones = np.ones(m)
    _interior_point(C, eps)
    # tiny barrier only matters for classes without counts, which it parks at ~eps
    barrier = 1e-12 * (1.0 + n.sum())
    pinned = np.zeros(G, dtype=bool)
    for _ in range(G + 1):
        free = np.flatnonzero(~pinned)
        rhs = ones - C[:, pinned].sum(axis=1) * eps
        Cf, Nf, kf = C[:, free], N_g[free], k_g[free]
        pos = Nf > 0

        def f(v):
            return float(-(Nf[pos] * np.log(v[pos])).sum() - barrier * (kf * np.log(v - eps)).sum())

        def fgh(v):
            gap = v - eps
            g = -Nf / v - barrier * kf / gap
            H = np.diag(Nf / v**2 + barrier * kf / gap**2)
            return f(v), g, H

        try:
            v0 = _interior_point(Cf, eps, rhs)
        except InfeasibleError:
            break
        res = _newton.newton_eq(v0, fgh, f, Cf, rhs, eps, max_iter=max_iter, rtol=1e-24)
        v = np.full(G, eps)
        v[free] = res.x
        # classes without counts that the barrier holds at the bound are pinned there and re-solved
        pin = ~pinned & (N_g == 0) & (v - eps < 1e-7)
        if not pin.any():
            break
        pinned |= pin
    violation = float(np.max(np.abs(C @ v - 1)))
    if not res.converged or violation > 1e-10:
        raise ConvergenceError(f"constrained MLE did not converge (row-sum violation {violation:.2e})")
    return validate_matrix((B @ v).reshape(m, m), Mode.STOCHASTIC)


@dataclass(frozen=True)
class LrtResult:
    gamma: float
    df: int
    critical: float
    level: float
    reject: bool
    null_fit: TransitionMatrix
    alt_fit: TransitionMatrix

    @property
    def p_value(self) -> float:
        return float(chi2.sf(self.gamma, self.df))

    def to_dict(self) -> dict:
        return {
            "gamma": self.gamma,
            "df": self.df,
            "critical": self.critical,
            "level": self.level,
            "reject": self.reject,
            "p_value": self.p_value,
            "null_fit": self.null_fit.entries.tolist(),
            "alt_fit": self.alt_fit.entries.tolist(),
        }


def lrt(counts: TransitionCounts, null_partition: EqualityPartition, level: float = 0.05) -> LrtResult:
    """Likelihood-ratio test of ``null_partition`` against all cells distinct.

    ``df = m**2 - (number of null classes)``; the statistic is compared with
    the chi-square ``1 - level`` quantile.
    """
    if not 0 < level < 1:
        raise ValidationError("test level must lie in (0, 1)")
    m = counts.m
    df = m * m - len(null_partition)
    if df <= 0:
        raise DegenerateError("null partition has no fused cells; the test has zero degrees of freedom")
    alt = mle(counts, zero_row_policy="uniform")
    null = constrained_mle(counts, null_partition)
    gamma = -2.0 * (log_likelihood(null, counts) - log_likelihood(alt, counts))
    if gamma < -1e-9 * (1 + counts.total):
        raise ConvergenceError(f"negative likelihood-ratio statistic {gamma!r}")
    gamma = max(gamma, 0.0)
    critical = float(chi2.ppf(1 - level, df))
    return LrtResult(float(gamma), int(df), critical, float(level), bool(gamma > critical), null, alt)
