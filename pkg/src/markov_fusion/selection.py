"""Ordered k-fold cross-validation of the penalty level."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, replace

import numpy as np

from .chain import StateSequence, TransitionCounts, count_transitions
from .errors import TooShortError, ValidationError
from .penalized import PairSet, SolverOptions, fit, pair_set

__all__ = [
    "CvReport",
    "split_folds",
    "fold_counts",
    "held_out_nll",
    "cv_score",
    "cv_path",
    "select_lambda",
    "log_grid",
    "HELD_OUT_FLOOR",
]

HELD_OUT_FLOOR = 1e-9
# scores this close (relative) count as tied; summation order alone moves the last bits
SCORE_TIE_RTOL = 1e-12
METHODS = ("mclasso", "mcalasso")


def split_folds(seq: StateSequence, k: int = 5) -> list[StateSequence]:
    """Cut the sequence into ``k`` contiguous blocks; earlier blocks take the remainder."""
    if k < 2:
        raise ValidationError("need at least 2 folds")
    if seq.N < 2 * k:
        raise TooShortError(f"a length-{seq.N} sequence cannot be cut into {k} folds of at least 2 states")
    return [StateSequence(block, seq.m) for block in np.array_split(seq.states, k)]


def fold_counts(seq: StateSequence, k: int = 5) -> list[TransitionCounts]:
    """Per-block transition counts; transitions across block boundaries are dropped."""
    return [count_transitions(block) for block in split_folds(seq, k)]


def held_out_nll(p: np.ndarray, test: TransitionCounts, floor: float = HELD_OUT_FLOOR) -> float:
    n = test.counts
    seen = n > 0
    return float(-(n[seen] * np.log(np.maximum(p[seen], floor))).sum())


@dataclass(frozen=True)
class CvReport:
    grid: tuple[float, ...]
    scores: tuple[float, ...]
    best_lambda: float
    k: int
    method: str
    per_fold: np.ndarray
    gamma: float = 1.0

    @property
    def best_index(self) -> int:
        return self.grid.index(self.best_lambda)

    @property
    def interior(self) -> bool:
        """True when the minimizer is not at either end of the sorted grid."""
        return min(self.grid) < self.best_lambda < max(self.grid)

    def to_dict(self) -> dict:
        return {
            "method": self.method,
            "k": self.k,
            "gamma": self.gamma,
            "best_lambda": self.best_lambda,
            "interior": self.interior,
            "grid": list(self.grid),
            "scores": list(self.scores),
        }

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["lambda", "cv_score"] + [f"fold_{i + 1}" for i in range(self.k)])
        for j, lam in enumerate(self.grid):
            w.writerow([repr(lam), repr(self.scores[j])] + [repr(float(v)) for v in self.per_fold[:, j]])
        return buf.getvalue()


def _cv_opts(opts: SolverOptions | None) -> SolverOptions:
    # short training blocks may leave a state unvisited; fit them rather than abort the path
    return replace(opts or SolverOptions(), zero_row_policy="allow", strict=False)


def cv_path(seq: StateSequence, grid, k: int = 5, method: str = "mcalasso", gamma: float = 1.0,
            opts: SolverOptions | None = None) -> np.ndarray:
    """Held-out negative log-likelihood, shape ``(k, len(grid))``.

    Fold ``kappa`` is scored with the fit on the pooled counts of the other
    blocks; the adaptive weights come from that training MLE.  Fits along
    the ascending grid are warm-started from the previous penalty level.
    """
    if method not in METHODS:
        raise ValidationError(f"unknown penalized method {method!r}")
    grid = [float(g) for g in grid]
    if not grid or any(g < 0 or not np.isfinite(g) for g in grid):
        raise ValidationError("the grid needs at least one finite nonnegative value")
    blocks = fold_counts(seq, k)
    pairs = pair_set(seq.m)
    opts = _cv_opts(opts)
    order = np.argsort(grid, kind="stable")
    out = np.empty((k, len(grid)))
    for kappa in range(k):
        train = _pooled(blocks, kappa)
        test = blocks[kappa]
        x0 = None
        for j in order:
            res = fit(train, grid[j], method, gamma, opts, pairs, x0=x0)
            x0 = res.estimate
            out[kappa, j] = held_out_nll(res.estimate.entries, test)
    return out


def _pooled(blocks: list[TransitionCounts], skip: int) -> TransitionCounts:
    total = sum(b.counts for i, b in enumerate(blocks) if i != skip)
    return TransitionCounts(total)


def cv_score(seq: StateSequence, lam: float, k: int = 5, method: str = "mcalasso", gamma: float = 1.0,
             opts: SolverOptions | None = None) -> float:
    """Summed held-out negative log-likelihood over the ``k`` ordered folds."""
    return float(cv_path(seq, [lam], k, method, gamma, opts).sum())


def select_lambda(seq: StateSequence, grid, k: int = 5, method: str = "mcalasso", gamma: float = 1.0,
                  opts: SolverOptions | None = None) -> CvReport:
    """Evaluate every grid point and keep the minimizer (smallest lambda on ties)."""
    grid = tuple(float(g) for g in grid)
    per_fold = cv_path(seq, grid, k, method, gamma, opts)
    scores = per_fold.sum(axis=0)
    if not np.all(np.isfinite(scores)):
        raise ValidationError("cross-validation produced non-finite scores")
    best = scores.min()
    tied = scores <= best + SCORE_TIE_RTOL * abs(best)
    best_lambda = min(lam for lam, t in zip(grid, tied) if t)
    return CvReport(grid, tuple(float(s) for s in scores), best_lambda, k, method, per_fold, float(gamma))


def log_grid(lo: float, hi: float, n: int = 30) -> list[float]:
    if not 0 < lo <= hi:
        raise ValidationError("grid bounds must satisfy 0 < lo <= hi")
    return np.geomspace(lo, hi, n).tolist()
