"""Seeded Monte Carlo studies: simulate, fit, score, aggregate.

Every replicate is keyed by ``seed_base + r`` and results are aggregated in
replicate order, so a study is a pure function of its config.
"""

from __future__ import annotations

import csv
import io
import os
from dataclasses import dataclass, field

import numpy as np

from .chain import (
    EqualityPartition,
    StateSequence,
    TransitionCounts,
    TransitionMatrix,
    cell_index,
    count_transitions,
    sequence_from_counts,
    simulate_sequence,
)
from .errors import MarkovFusionError, ValidationError
from .estimators import mle
from .metrics import frobenius_distance, purity, selection_accuracy
from .penalized import PairSet, PenalizedFit, SolverOptions, fit, pair_differences, pair_set
from .selection import CvReport, log_grid, select_lambda

__all__ = [
    "StudyConfig",
    "MetricSummary",
    "EqualityDetection",
    "StudySummary",
    "DESK_GRID",
    "FULL_GRID",
    "desk_config",
    "full_config",
    "mle_tie_partition",
    "run_study",
    "difference_histogram",
    "counts_workflow",
    "write_study",
    "histogram_csv",
]

METHODS = ("mle", "mclasso", "mcalasso")
METRICS = ("purity", "frobenius", "selection_accuracy")
DESK_GRID = tuple(log_grid(1e-2, 1e2, 15))
FULL_GRID = tuple(log_grid(1e-3, 1e3, 49))


@dataclass(frozen=True)
class StudyConfig:
    truth: TransitionMatrix
    n_reps: int = 20
    N: int = 20_000
    seed_base: int = 0
    grid: tuple[float, ...] = DESK_GRID
    k: int = 5
    methods: tuple[str, ...] = METHODS
    gamma: float = 1.0
    # set to skip CV and fit every replicate at this penalty
    fixed_lambda: float | None = None
    opts: SolverOptions | None = field(default=None, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "grid", tuple(float(g) for g in self.grid))
        object.__setattr__(self, "methods", tuple(self.methods))
        if self.n_reps < 1:
            raise ValidationError("n_reps must be at least 1")
        if self.N < 2 * self.k:
            raise ValidationError(f"N={self.N} is too short for {self.k} folds")
        unknown = set(self.methods) - set(METHODS)
        if unknown or not self.methods:
            raise ValidationError(f"methods must be a nonempty subset of {METHODS}")
        penalized = any(m != "mle" for m in self.methods)
        if penalized and self.fixed_lambda is None and not self.grid:
            raise ValidationError("penalized methods need a nonempty lambda grid")


def desk_config(truth: TransitionMatrix, **kw) -> StudyConfig:
    return StudyConfig(truth, **kw)


def full_config(truth: TransitionMatrix, **kw) -> StudyConfig:
    kw.setdefault("n_reps", 100)
    kw.setdefault("N", 50_000)
    kw.setdefault("grid", FULL_GRID)
    return StudyConfig(truth, **kw)


@dataclass(frozen=True)
class MetricSummary:
    min: float
    q1: float
    median: float
    mean: float
    q3: float
    max: float
    n: int

    @classmethod
    def of(cls, values) -> "MetricSummary":
        v = np.asarray(values, dtype=float)
        if v.size == 0:
            nan = float("nan")
            return cls(nan, nan, nan, nan, nan, nan, 0)
        q1, med, q3 = np.quantile(v, [0.25, 0.5, 0.75])
        mean = float(np.clip(v.mean(), v.min(), v.max()))
        return cls(float(v.min()), float(q1), float(med), mean, float(q3), float(v.max()), int(v.size))

    def to_dict(self) -> dict:
        return dict(self.__dict__)


@dataclass(frozen=True)
class EqualityDetection:
    """Exact fusions over all replicates: ``total`` truly equal pairs seen,
    ``true`` of them fused, and ``false`` fusions of unequal pairs."""

    total: int
    true: int
    false: int


@dataclass(frozen=True)
class StudySummary:
    config: StudyConfig
    summaries: dict
    detection: dict
    raw: tuple
    failures: tuple

    def mean(self, method: str, metric: str) -> float:
        return self.summaries[method][metric].mean

    def to_dict(self) -> dict:
        return {
            "n_reps": self.config.n_reps,
            "N": self.config.N,
            "seed_base": self.config.seed_base,
            "summaries": {m: {k: s.to_dict() for k, s in d.items()} for m, d in self.summaries.items()},
            "detection": {m: d.__dict__ for m, d in self.detection.items()},
            "failures": [list(f) for f in self.failures],
        }

    def summary_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["method", "metric", "min", "q1", "median", "mean", "q3", "max", "n"])
        for method, per in self.summaries.items():
            for metric, s in per.items():
                w.writerow([method, metric] + [repr(getattr(s, f)) for f in ("min", "q1", "median", "mean", "q3", "max")] + [s.n])
        for method, d in self.detection.items():
            w.writerow([method, "equality_detection_total", "", "", "", d.total, "", "", ""])
            w.writerow([method, "equality_detection_true", "", "", "", d.true, "", "", ""])
            w.writerow([method, "equality_detection_false", "", "", "", d.false, "", "", ""])
        return buf.getvalue()

    def raw_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["replicate", "seed", "method", "metric", "value"])
        for rep, seed, method, metric, value in self.raw:
            w.writerow([rep, seed, method, metric, repr(value)])
        return buf.getvalue()


def mle_tie_partition(counts: TransitionCounts) -> EqualityPartition:
    """Classes of cells whose count ratios are exactly equal.

    ``n_ij / n_i. == n_kl / n_k.`` is decided by integer cross-multiplication,
    so no floating-point tie is ever missed or invented.
    """
    m = counts.m
    n = [[int(v) for v in row] for row in counts.counts]
    rows = [sum(r) for r in n]
    labels = [-1] * (m * m)
    reps: list[tuple[int, int]] = []
    for i in range(m):
        for j in range(m):
            num, den = n[i][j], rows[i]
            if den == 0:
                num, den = 1, m
            for g, (a, b) in enumerate(reps):
                if num * b == a * den:
                    labels[i * m + j] = g
                    break
            else:
                labels[i * m + j] = len(reps)
                reps.append((num, den))
    return EqualityPartition.from_labels(m, labels)


def _partition_mask(partition: EqualityPartition, pairs: PairSet) -> np.ndarray:
    labels = partition.labels
    return labels[pairs.first] == labels[pairs.second]


def _fit_replicate(counts: TransitionCounts, seq: StateSequence, method: str, config: StudyConfig,
                   pairs: PairSet) -> tuple[TransitionMatrix, EqualityPartition, float | None]:
    if method == "mle":
        return mle(counts), mle_tie_partition(counts), None
    if config.fixed_lambda is None:
        lam = select_lambda(seq, config.grid, config.k, method, config.gamma, config.opts).best_lambda
    else:
        lam = config.fixed_lambda
    res = fit(counts, lam, method, config.gamma, config.opts, pairs)
    return res.estimate, res.fused_partition, lam


def run_study(config: StudyConfig) -> StudySummary:
    """Simulate ``n_reps`` sequences from the truth and score every method on each."""
    truth = config.truth
    pairs = pair_set(truth.m)
    truth_partition = EqualityPartition.from_labels(truth.m, _exact_labels(truth))
    truth_equal = pair_differences(truth, pairs) == 0
    raw = []
    failures = []
    values = {m: {k: [] for k in METRICS} for m in config.methods}
    detect = {m: [0, 0, 0] for m in config.methods}
    for r in range(config.n_reps):
        seed = config.seed_base + r
        seq = simulate_sequence(truth, config.N, seed)
        counts = count_transitions(seq)
        for method in config.methods:
            try:
                est, part, lam = _fit_replicate(counts, seq, method, config, pairs)
            except MarkovFusionError as exc:
                failures.append((r, seed, method, f"{exc.code}: {exc}"))
                continue
            fused = _partition_mask(part, pairs)
            scores = {
                "purity": purity(truth_partition, part),
                "frobenius": frobenius_distance(truth, est),
                "selection_accuracy": selection_accuracy(truth, part, pairs),
            }
            for metric in METRICS:
                values[method][metric].append(scores[metric])
                raw.append((r, seed, method, metric, float(scores[metric])))
            if lam is not None:
                raw.append((r, seed, method, "lambda", float(lam)))
            d = detect[method]
            d[0] += int(truth_equal.sum())
            d[1] += int((fused & truth_equal).sum())
            d[2] += int((fused & ~truth_equal).sum())
    summaries = {m: {k: MetricSummary.of(v) for k, v in per.items()} for m, per in values.items()}
    detection = {m: EqualityDetection(*d) for m, d in detect.items()}
    return StudySummary(config, summaries, detection, tuple(raw), tuple(failures))


def _exact_labels(P: TransitionMatrix) -> list[int]:
    flat = P.entries.ravel()
    seen: dict[float, int] = {}
    return [seen.setdefault(float(v), len(seen)) for v in flat]


def difference_histogram(truth: TransitionMatrix, cell_a: tuple[int, int], cell_b: tuple[int, int], N: int,
                         n_reps: int, seed_base: int = 0) -> list[float]:
    """MLE differences ``p_hat_a - p_hat_b`` over ``n_reps`` seeded replicates."""
    m = truth.m
    a, b = cell_index(cell_a, m), cell_index(cell_b, m)
    out = []
    for r in range(n_reps):
        counts = count_transitions(simulate_sequence(truth, N, seed_base + r))
        p = mle(counts, zero_row_policy="uniform").entries.ravel()
        out.append(float(p[a] - p[b]))
    return out


def histogram_csv(diffs, seed_base: int = 0) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["replicate", "seed", "difference"])
    for r, d in enumerate(diffs):
        w.writerow([r, seed_base + r, repr(float(d))])
    return buf.getvalue()


@dataclass(frozen=True)
class CountsWorkflow:
    report: CvReport
    fit: PenalizedFit
    sequence: StateSequence


def counts_workflow(counts: TransitionCounts, grid=None, k: int = 5, method: str = "mcalasso",
                    gamma: float = 1.0, seed: int = 0, opts: SolverOptions | None = None) -> CountsWorkflow:
    """Cross-validate and fit when only a count table is available.

    Ordered folds need a sequence, so one is synthesized whose transition
    counts equal ``counts`` exactly (a random Eulerian trail through the
    count multigraph).  The final fit uses the given counts.
    """
    grid = DESK_GRID if grid is None else grid
    seq = sequence_from_counts(counts, seed)
    report = select_lambda(seq, grid, k, method, gamma, opts)
    res = fit(counts, report.best_lambda, method, gamma, opts)
    return CountsWorkflow(report, res, seq)


def write_study(summary: StudySummary, outdir: str, hist: list[float] | None = None) -> list[str]:
    """Write ``summary.csv``, ``raw.csv`` and optionally ``hist.csv``; return the paths."""
    os.makedirs(outdir, exist_ok=True)
    written = []
    files = [("summary.csv", summary.summary_csv()), ("raw.csv", summary.raw_csv())]
    if hist is not None:
        files.append(("hist.csv", histogram_csv(hist, summary.config.seed_base)))
    for name, text in files:
        path = os.path.join(outdir, name)
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        written.append(path)
    return written
