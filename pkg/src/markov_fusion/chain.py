"""Core chain types: transition matrices, sequences, counts and partitions.

States and cells are 1-based at the public surface (state ``1..m``, cell
``(i, j)``) and 0-based inside numpy arrays.  Cell ``(i, j)`` has the flat
row-major index ``(i - 1) * m + (j - 1)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Sequence

import numpy as np

from .errors import (
    ConvergenceError,
    PositivityError,
    RowSumError,
    ShapeError,
    ValidationError,
)

__all__ = [
    "Mode",
    "TransitionMatrix",
    "StateSequence",
    "TransitionCounts",
    "EqualityPartition",
    "StationaryDistribution",
    "validate_matrix",
    "simulate_sequence",
    "count_transitions",
    "stationary_distribution",
    "extract_equality_classes",
    "sequence_from_counts",
    "cell_index",
    "cell_of",
]

ROW_SUM_TOL = 1e-8


class Mode(str, Enum):
    STRICT_ERGODIC = "strict-ergodic"
    STOCHASTIC = "stochastic"


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, copy=True)
    a.setflags(write=False)
    return a


def cell_index(cell: tuple[int, int], m: int) -> int:
    i, j = cell
    if not (1 <= i <= m and 1 <= j <= m):
        raise ValidationError(f"cell {cell} outside a {m}-state matrix")
    return (i - 1) * m + (j - 1)


def cell_of(index: int, m: int) -> tuple[int, int]:
    return (index // m + 1, index % m + 1)


@dataclass(frozen=True)
class TransitionMatrix:
    """A validated row-stochastic matrix.  Build it with :func:`validate_matrix`."""

    entries: np.ndarray
    mode: Mode = Mode.STOCHASTIC

    @property
    def m(self) -> int:
        return self.entries.shape[0]

    def __getitem__(self, cell: tuple[int, int]) -> float:
        i, j = cell
        return float(self.entries[i - 1, j - 1])

    def to_dict(self) -> dict:
        return {"m": self.m, "rows": self.entries.tolist()}


@dataclass(frozen=True)
class StateSequence:
    """An observed realization ``X_1..X_N`` with states in ``1..m``."""

    states: np.ndarray
    m: int

    def __post_init__(self):
        states = np.asarray(self.states)
        if states.ndim != 1:
            raise ShapeError("a state sequence must be one-dimensional")
        if self.m < 2:
            raise ValidationError("state count m must be at least 2")
        if states.size < 2:
            raise ValidationError("a state sequence needs at least 2 states")
        if not np.issubdtype(states.dtype, np.integer):
            if not np.all(np.equal(np.mod(states, 1), 0)):
                raise ValidationError("states must be integers")
        states = states.astype(np.int64)
        if states.min() < 1 or states.max() > self.m:
            raise ValidationError(f"states must lie in [1, {self.m}]")
        object.__setattr__(self, "states", _frozen(states))

    @property
    def N(self) -> int:
        return int(self.states.size)

    def __len__(self) -> int:
        return self.N

    def tolist(self) -> list[int]:
        return self.states.tolist()


@dataclass(frozen=True)
class TransitionCounts:
    """Transition count matrix with its row sums."""

    counts: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.counts)
        if c.ndim != 2 or c.shape[0] != c.shape[1]:
            raise ShapeError(f"counts must be square, got shape {c.shape}")
        if c.shape[0] < 2:
            raise ValidationError("state count m must be at least 2")
        if np.any(c < 0) or not np.all(np.equal(np.mod(c, 1), 0)):
            raise ValidationError("counts must be nonnegative integers")
        object.__setattr__(self, "counts", _frozen(c.astype(np.int64)))

    @property
    def m(self) -> int:
        return self.counts.shape[0]

    @property
    def row_sums(self) -> np.ndarray:
        return self.counts.sum(axis=1)

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def __add__(self, other: "TransitionCounts") -> "TransitionCounts":
        if other.m != self.m:
            raise ShapeError("cannot add counts of different sizes")
        return TransitionCounts(self.counts + other.counts)


@dataclass(frozen=True)
class EqualityPartition:
    """Partition of the ``m * m`` cells into classes of equal probability."""

    m: int
    classes: tuple[frozenset, ...]
    values: tuple[float, ...] | None = None
    _labels: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        m = self.m
        classes = tuple(frozenset((int(i), int(j)) for i, j in c) for c in self.classes)
        labels = np.full(m * m, -1, dtype=np.int64)
        for k, cls in enumerate(classes):
            if not cls:
                raise ValidationError("equality classes must be nonempty")
            for cell in cls:
                idx = cell_index(cell, m)
                if labels[idx] != -1:
                    raise ValidationError(f"cell {cell} appears in more than one class")
                labels[idx] = k
        if np.any(labels < 0):
            missing = [cell_of(int(k), m) for k in np.flatnonzero(labels < 0)]
            raise ValidationError(f"partition does not cover cells {missing}")
        if self.values is not None and len(self.values) != len(classes):
            raise ValidationError("one value per class is required")
        object.__setattr__(self, "classes", classes)
        if self.values is not None:
            object.__setattr__(self, "values", tuple(float(v) for v in self.values))
        object.__setattr__(self, "_labels", _frozen(labels))

    @classmethod
    def from_labels(cls, m: int, labels: Sequence[int], values=None) -> "EqualityPartition":
        """Build from one label per flat cell index; classes are renumbered by first cell."""
        labels = np.asarray(labels)
        if labels.shape != (m * m,):
            raise ShapeError(f"expected {m * m} labels, got {labels.shape}")
        order: dict[int, list[tuple[int, int]]] = {}
        for idx, lab in enumerate(labels.tolist()):
            order.setdefault(lab, []).append(cell_of(idx, m))
        vals = None
        if values is not None:
            vals = tuple(float(values[lab]) for lab in order)
        return cls(m, tuple(frozenset(cells) for cells in order.values()), vals)

    @classmethod
    def singletons(cls, m: int) -> "EqualityPartition":
        return cls.from_labels(m, np.arange(m * m))

    @classmethod
    def from_groups(cls, m: int, groups: Iterable[Iterable[tuple[int, int]]]) -> "EqualityPartition":
        """Fuse the listed groups of cells; every other cell stays a singleton."""
        labels = np.arange(m * m)
        used: set[int] = set()
        for g in groups:
            idx = [cell_index(c, m) for c in g]
            if len(set(idx)) != len(idx):
                raise ValidationError(f"repeated cell in group {list(g)}")
            for k in idx:
                if k in used:
                    raise ValidationError(f"cell {cell_of(k, m)} appears in more than one group")
                used.add(k)
                labels[k] = idx[0]
        return cls.from_labels(m, labels)

    @property
    def labels(self) -> np.ndarray:
        return self._labels

    def __len__(self) -> int:
        return len(self.classes)

    def same_class(self, a: tuple[int, int], b: tuple[int, int]) -> bool:
        return self._labels[cell_index(a, self.m)] == self._labels[cell_index(b, self.m)]

    def nontrivial(self) -> list[frozenset]:
        return [c for c in self.classes if len(c) > 1]

    def to_dict(self) -> dict:
        out = []
        for k, cls in enumerate(self.classes):
            entry = {"cells": sorted([list(c) for c in cls])}
            if self.values is not None:
                entry["value"] = self.values[k]
            out.append(entry)
        return {"m": self.m, "classes": out}


@dataclass(frozen=True)
class StationaryDistribution:
    pi: np.ndarray

    @property
    def m(self) -> int:
        return self.pi.size


def validate_matrix(entries, mode: Mode | str = Mode.STRICT_ERGODIC) -> TransitionMatrix:
    """Check shape, bounds and row sums and return an immutable matrix.

    Rows whose sum is within ``1e-8`` of one are renormalized; larger
    deviations raise :class:`RowSumError`.  Rows already equal to one up to
    round-off are kept bit for bit, so validation is idempotent.
    """
    mode = Mode(mode)
    p = np.array(entries, dtype=float)
    if p.ndim != 2 or p.shape[0] != p.shape[1]:
        raise ShapeError(f"transition matrix must be square, got shape {p.shape}")
    if p.shape[0] < 2:
        raise ValidationError("state count m must be at least 2")
    if not np.all(np.isfinite(p)):
        raise ValidationError("transition matrix has non-finite entries")
    if mode is Mode.STRICT_ERGODIC and np.any(p <= 0):
        raise PositivityError("strict-ergodic mode requires every entry > 0")
    if np.any(p < 0):
        raise PositivityError("transition probabilities must be nonnegative")
    if np.any(p > 1 + ROW_SUM_TOL):
        raise ValidationError("transition probabilities must not exceed 1")
    sums = p.sum(axis=1)
    bad = np.flatnonzero(np.abs(sums - 1.0) >= ROW_SUM_TOL)
    if bad.size:
        i = int(bad[0])
        raise RowSumError(f"row {i + 1} sums to {sums[i]!r}, not 1")
    drift = np.abs(sums - 1.0) > 4 * p.shape[0] * np.finfo(float).eps
    p[drift] /= sums[drift, None]
    return TransitionMatrix(_frozen(p), mode)


def _cumulative_rows(p: np.ndarray) -> np.ndarray:
    cdf = np.cumsum(p, axis=1)
    cdf[:, -1] = 1.0
    return cdf


def simulate_sequence(P: TransitionMatrix, N: int, seed: int, initial="stationary") -> StateSequence:
    """Draw a length-``N`` realization of the chain.

    ``initial`` is ``"stationary"``, ``"uniform"`` or a fixed state in ``1..m``.
    The output depends only on ``(P, N, seed, initial)``.
    """
    if N < 2:
        raise ValidationError("sequence length N must be at least 2")
    m = P.m
    rng = np.random.default_rng(seed)
    if isinstance(initial, str):
        if initial == "stationary":
            pi = _stationary_any(P.entries)
            x0 = int(rng.choice(m, p=pi))
        elif initial == "uniform":
            x0 = int(rng.integers(m))
        else:
            raise ValidationError(f"unknown initial law {initial!r}")
    else:
        if not 1 <= int(initial) <= m:
            raise ValidationError(f"initial state must lie in [1, {m}]")
        x0 = int(initial) - 1

    # One uniform per step, inverted through the current row's CDF.
    cdf = _cumulative_rows(P.entries)
    u = rng.random(N - 1)
    out = np.empty(N, dtype=np.int64)
    out[0] = x0
    x = x0
    rows = [cdf[i] for i in range(m)]
    search = np.searchsorted
    for s in range(N - 1):
        x = int(search(rows[x], u[s], side="right"))
        out[s + 1] = x
    return StateSequence(out + 1, m)


def count_transitions(seq: StateSequence) -> TransitionCounts:
    m = seq.m
    idx = seq.states - 1
    flat = idx[:-1] * m + idx[1:]
    counts = np.bincount(flat, minlength=m * m).reshape(m, m)
    return TransitionCounts(counts)


def _stationary_any(p: np.ndarray) -> np.ndarray:
    m = p.shape[0]
    a = np.vstack([p.T - np.eye(m), np.ones(m)])
    b = np.zeros(m + 1)
    b[-1] = 1.0
    pi = np.linalg.lstsq(a, b, rcond=None)[0]
    pi = np.clip(pi, 0.0, None)
    return pi / pi.sum()


def stationary_distribution(
    P: TransitionMatrix, tol: float = 1e-12, max_iter: int = 100_000
) -> StationaryDistribution:
    """Solve ``pi P = pi`` with ``sum(pi) = 1``.

    A least-squares solve is tried first; power iteration is the fallback
    when its residual misses ``tol``.
    """
    if np.any(P.entries <= 0):
        raise PositivityError("stationary distribution requires a strict-ergodic matrix")
    p = P.entries
    pi = _stationary_any(p)
    if np.max(np.abs(pi @ p - pi)) < tol:
        return StationaryDistribution(_frozen(pi))
    for _ in range(max_iter):
        pi = pi @ p
        pi /= pi.sum()
        if np.max(np.abs(pi @ p - pi)) < tol:
            return StationaryDistribution(_frozen(pi))
    raise ConvergenceError(f"stationary distribution residual above {tol} after {max_iter} iterations")


def extract_equality_classes(P: TransitionMatrix | np.ndarray, tol: float = 1e-4) -> EqualityPartition:
    """Group cells whose values are within ``tol``, closed transitively.

    Equivalent to union-find over all cell pairs with ``|p_a - p_b| <= tol``:
    on a line those components are the runs of sorted values whose
    consecutive gaps are at most ``tol``.  Class values are member means.
    """
    if tol < 0:
        raise ValidationError("tolerance must be nonnegative")
    p = P.entries if isinstance(P, TransitionMatrix) else np.asarray(P, dtype=float)
    if p.ndim != 2 or p.shape[0] != p.shape[1]:
        raise ShapeError(f"expected a square matrix, got shape {p.shape}")
    flat = p.ravel()
    labels = cluster_labels(flat, tol)
    means = np.array([flat[labels == k].mean() for k in range(labels.max() + 1)])
    return EqualityPartition.from_labels(p.shape[0], labels, means)


def cluster_labels(values: np.ndarray, tol: float) -> np.ndarray:
    """Single-linkage labels of 1-D ``values`` at gap ``tol``, numbered by ascending value."""
    values = np.asarray(values, dtype=float)
    order = np.argsort(values, kind="stable")
    labels = np.empty(values.size, dtype=np.int64)
    breaks = np.concatenate([[0], np.cumsum(np.diff(values[order]) > tol)])
    labels[order] = breaks
    return labels


def sequence_from_counts(counts: TransitionCounts, seed: int, start: int | None = None) -> StateSequence:
    """Draw a random sequence whose transition counts equal ``counts`` exactly.

    This is the dinucleotide-preserving shuffle (random Eulerian trail):
    a random arborescence of last exits toward the end state is drawn with
    Wilson's algorithm, the remaining exits of each state are permuted,
    and the trail is walked from the start state.  Used when only counts
    are available but a sequence is needed, e.g. for ordered folds.
    """
    c = np.array(counts.counts, dtype=np.int64)
    m = counts.m
    rng = np.random.default_rng(seed)
    out_deg = c.sum(axis=1)
    in_deg = c.sum(axis=0)
    diff = out_deg - in_deg
    if counts.total == 0:
        raise ValidationError("cannot build a sequence from all-zero counts")
    starts = np.flatnonzero(diff == 1)
    ends = np.flatnonzero(diff == -1)
    if np.any(np.abs(diff) > 1) or starts.size > 1 or ends.size > 1 or starts.size != ends.size:
        raise ValidationError("counts are not the transition counts of any single sequence")
    if starts.size:
        s = int(starts[0])
        e = int(ends[0])
        if start is not None and start - 1 != s:
            raise ValidationError(f"these counts force the sequence to start at state {s + 1}")
    else:
        active = np.flatnonzero(out_deg > 0)
        if start is None:
            s = int(rng.choice(active, p=out_deg[active] / out_deg[active].sum()))
        else:
            s = start - 1
            if out_deg[s] == 0:
                raise ValidationError(f"state {start} has no outgoing transitions")
        e = s

    verts = [v for v in range(m) if out_deg[v] > 0 or in_deg[v] > 0]
    reach = {e}
    frontier = [e]
    while frontier:
        u = frontier.pop()
        for w in np.flatnonzero(c[:, u] > 0).tolist():
            if w not in reach:
                reach.add(w)
                frontier.append(w)
    if any(v not in reach for v in verts):
        raise ValidationError("transition graph is not connected")

    # Wilson's algorithm: loop-erased walks toward e, stepping along count-weighted exits.
    in_tree = {e: True}
    nxt: dict[int, int] = {}
    for v in verts:
        u = v
        while u not in in_tree:
            nxt[u] = int(rng.choice(m, p=c[u] / out_deg[u]))
            u = nxt[u]
        u = v
        while u not in in_tree:
            in_tree[u] = True
            u = nxt[u]

    exits: list[list[int]] = []
    for v in range(m):
        pool = np.repeat(np.arange(m), c[v])
        if v != e and out_deg[v] > 0:
            last = nxt[v]
            k = int(np.flatnonzero(pool == last)[0])
            pool = np.delete(pool, k)
            rng.shuffle(pool)
            exits.append(pool.tolist() + [last])
        else:
            rng.shuffle(pool)
            exits.append(pool.tolist())

    pos = [0] * m
    seq = [s]
    x = s
    for _ in range(counts.total):
        y = exits[x][pos[x]]
        pos[x] += 1
        seq.append(y)
        x = y
    return StateSequence(np.array(seq) + 1, m)
