"""Fused-lasso penalized likelihood for transition matrices.

The estimator minimizes

    sum_ij -n_ij log p_ij + lam * sum_t w_t |p_a(t) - p_b(t)|

over row-stochastic matrices with entries in ``[eps, 1]``, where ``t``
ranges over every unordered pair of distinct cells.  Unit weights give the
plain fused lasso (McLasso); weights ``1 / |pilot difference|**gamma`` from
an MLE pilot give the adaptive variant (McALasso).

Solver outline:

1. smoothing continuation: ``|d|`` is replaced by ``sqrt(d**2 + mu**2)``
   and the bound ``p > eps`` by a small log barrier; each smooth problem is
   solved by equality-constrained Newton, warm-started as ``mu`` shrinks;
2. polish: cells are clustered at the smoothed optimum and the problem is
   re-solved exactly on that fusion pattern, where it is smooth;
3. certificate: a bounded least-squares fit of subgradient multipliers
   gives a KKT residual, which bounds the optimality gap.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from functools import cached_property
from itertools import combinations

import numpy as np
from scipy.optimize import lsq_linear

from . import _newton
from .chain import (
    EqualityPartition,
    Mode,
    TransitionCounts,
    TransitionMatrix,
    _frozen,
    cell_of,
    cluster_labels,
    extract_equality_classes,
    validate_matrix,
)
from .errors import ConvergenceError, DomainError, ShapeError, ValidationError, ZeroRowError

__all__ = [
    "PairSet",
    "PairWeights",
    "SolverOptions",
    "SolverDiagnostics",
    "PenalizedFit",
    "pair_set",
    "pair_differences",
    "unit_weights",
    "adaptive_weights",
    "objective",
    "smoothed_objective",
    "solve",
    "fit",
    "refit",
    "kkt_certificate",
]

W_MAX = 1e8


@dataclass(frozen=True)
class PairSet:
    """All unordered pairs of distinct cells, lexicographic in flat index."""

    m: int
    first: np.ndarray
    second: np.ndarray

    def __len__(self) -> int:
        return int(self.first.size)

    @property
    def pairs(self) -> tuple[tuple[tuple[int, int], tuple[int, int]], ...]:
        m = self.m
        return tuple((cell_of(a, m), cell_of(b, m)) for a, b in zip(self.first.tolist(), self.second.tolist()))

    @cached_property
    def matrix(self) -> np.ndarray:
        """Difference operator ``D`` with ``(D p)_t = p_a(t) - p_b(t)``."""
        D = np.zeros((len(self), self.m * self.m))
        rows = np.arange(len(self))
        D[rows, self.first] = 1.0
        D[rows, self.second] = -1.0
        D.setflags(write=False)
        return D

    def index(self, a: tuple[int, int], b: tuple[int, int]) -> int:
        """Position of the pair ``{a, b}`` regardless of orientation."""
        m = self.m
        ka, kb = sorted(((a[0] - 1) * m + a[1] - 1, (b[0] - 1) * m + b[1] - 1))
        hit = np.flatnonzero((self.first == ka) & (self.second == kb))
        if hit.size != 1:
            raise ValidationError(f"no pair {a}, {b} in a {m}-state pair set")
        return int(hit[0])


def pair_set(m: int) -> PairSet:
    if m < 2:
        raise ValidationError("state count m must be at least 2")
    idx = np.array(list(combinations(range(m * m), 2)), dtype=np.int64)
    return PairSet(m, _frozen(idx[:, 0]), _frozen(idx[:, 1]))


def _entries(P) -> np.ndarray:
    return P.entries if isinstance(P, TransitionMatrix) else np.asarray(P, dtype=float)


def pair_differences(P, pairs: PairSet) -> np.ndarray:
    p = _entries(P)
    if p.shape != (pairs.m, pairs.m):
        raise ShapeError(f"matrix shape {p.shape} does not match a {pairs.m}-state pair set")
    flat = p.ravel()
    return flat[pairs.first] - flat[pairs.second]


@dataclass(frozen=True)
class PairWeights:
    weights: np.ndarray
    gamma: float | None = None
    w_max: float = W_MAX

    @property
    def adaptive(self) -> bool:
        return self.gamma is not None

    def __len__(self) -> int:
        return int(self.weights.size)


def unit_weights(pairs: PairSet) -> PairWeights:
    return PairWeights(_frozen(np.ones(len(pairs))), None, W_MAX)


def adaptive_weights(pilot, pairs: PairSet, gamma: float = 1.0, w_max: float = W_MAX) -> PairWeights:
    """``w_t = min(1 / |pilot difference_t|**gamma, w_max)``."""
    if gamma <= 0:
        raise ValidationError("gamma must be positive")
    if w_max <= 0:
        raise ValidationError("w_max must be positive")
    d = np.abs(pair_differences(pilot, pairs))
    with np.errstate(divide="ignore", over="ignore"):
        w = np.where(d > 0, 1.0 / d**gamma, np.inf)
    return PairWeights(_frozen(np.minimum(w, w_max)), float(gamma), float(w_max))


def _counts_flat(counts: TransitionCounts) -> np.ndarray:
    return counts.counts.ravel().astype(float)


def _nll(x: np.ndarray, n: np.ndarray) -> float:
    pos = n > 0
    return float(-(n[pos] * np.log(x[pos])).sum())


def objective(P, counts: TransitionCounts, lam: float, weights: PairWeights, pairs: PairSet) -> float:
    """Penalized negative log-likelihood at ``P``."""
    p = _entries(P)
    if p.shape != (counts.m, counts.m):
        raise ShapeError("matrix and counts differ in size")
    if np.any(p <= 0):
        raise DomainError("objective needs strictly positive entries")
    x = p.ravel()
    n = _counts_flat(counts)
    d = x[pairs.first] - x[pairs.second]
    return _nll(x, n) + lam * float(weights.weights @ np.abs(d))


def smoothed_objective(x: np.ndarray, n: np.ndarray, lam: float, w: np.ndarray, pairs: PairSet, mu: float,
                       barrier: float = 0.0, eps: float = 0.0):
    """Smoothed objective, gradient and Hessian in flat cell coordinates."""
    D = pairs.matrix
    d = x[pairs.first] - x[pairs.second]
    s = np.sqrt(d * d + mu * mu)
    f = _nll(x, n) + lam * float(w @ (s - mu))
    g = -n / x + lam * (D.T @ (w * d / s))
    h = n / (x * x)
    if barrier:
        gap = x - eps
        f -= barrier * float(np.log(gap).sum())
        g = g - barrier / gap
        h = h + barrier / (gap * gap)
    H = np.diag(h) + lam * (D.T * (w * mu * mu / s**3)) @ D
    return f, g, H


@dataclass(frozen=True)
class SolverOptions:
    mu_start: float = 1e-2
    mu_end: float = 1e-8
    mu_factor: float = 10.0
    eps: float = 1e-9
    fuse_tol: float = 1e-4
    tol_obj: float = 1e-9
    barrier_scale: float = 1e-2
    max_newton: int = 200
    zero_row_policy: str = "error"
    polish: bool = True
    strict: bool = True

    def mu_schedule(self) -> list[float]:
        mus = []
        mu = self.mu_start
        while mu > self.mu_end * (1 + 1e-9):
            mus.append(mu)
            mu /= self.mu_factor
        mus.append(self.mu_end)
        return mus


@dataclass(frozen=True)
class SolverDiagnostics:
    iterations: int
    constraint_violation: float
    mu_final: float
    polished: bool
    kkt_residual: float
    gap_bound: float
    relative_gap: float
    certified: bool

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


@dataclass(frozen=True)
class PenalizedFit:
    estimate: TransitionMatrix
    lam: float
    weights: PairWeights
    objective_value: float
    active_set: frozenset
    fused_partition: EqualityPartition
    diagnostics: SolverDiagnostics
    pairs: PairSet = field(repr=False)

    @property
    def method(self) -> str:
        return "mcalasso" if self.weights.adaptive else "mclasso"

    def fused_pairs(self) -> np.ndarray:
        """Boolean mask over the pair set: True where the pair is fused."""
        labels = self.fused_partition.labels
        return labels[self.pairs.first] == labels[self.pairs.second]

    def to_dict(self) -> dict:
        pairs = self.pairs.pairs
        return {
            "method": self.method,
            "lambda": self.lam,
            "gamma": self.weights.gamma,
            "estimate": self.estimate.entries.tolist(),
            "objective": self.objective_value,
            "active_pairs": [[list(a), list(b)] for k, (a, b) in enumerate(pairs) if k in self.active_set],
            "fused_classes": [sorted(list(c) for c in cls) for cls in self.fused_partition.nontrivial()],
            "diagnostics": self.diagnostics.to_dict(),
        }


def _row_matrix(m: int) -> np.ndarray:
    return np.kron(np.eye(m), np.ones(m))


def kkt_certificate(x: np.ndarray, counts: TransitionCounts, lam: float, w: np.ndarray, pairs: PairSet,
                    eps: float, tie_tol: float = 0.0, bound_tol: float = 1e-8) -> tuple[float, float]:
    """Return ``(residual, gap_bound)`` for a feasible flat point ``x``.

    Pairs with ``|d| <= tie_tol`` get a free subgradient in ``[-1, 1]``,
    cells within ``bound_tol`` of ``eps`` get a nonnegative bound
    multiplier, rows get free multipliers.  For any feasible ``y``,
    ``F(x) - F(y) <= |r| * sqrt(2m) + sum eta (x - eps) + 2 lam sum_tied w |d|``.
    """
    m = counts.m
    n = _counts_flat(counts)
    D = pairs.matrix
    d = x[pairs.first] - x[pairs.second]
    tied = np.abs(d) <= tie_tol
    g = np.where(n > 0, -n / x, 0.0)
    g = g + lam * (D[~tied].T @ (w[~tied] * np.sign(d[~tied])))
    at_bound = np.flatnonzero(x - eps <= bound_tol)

    cols = [lam * (D[tied].T * w[tied]), _row_matrix(m).T, -np.eye(m * m)[:, at_bound]]
    A = np.hstack(cols)
    nt = int(tied.sum())
    lo = np.concatenate([-np.ones(nt), np.full(m, -np.inf), np.zeros(at_bound.size)])
    hi = np.concatenate([np.ones(nt), np.full(m, np.inf), np.full(at_bound.size, np.inf)])
    # Column scaling keeps lsq_linear well conditioned when lam * w spans many decades.
    scale = np.maximum(np.linalg.norm(A, axis=0), 1e-300)
    res = lsq_linear(A / scale, -g, bounds=(lo * scale, hi * scale), method="bvls", tol=1e-14, max_iter=10_000)
    coef = res.x / scale
    r = A @ coef + g
    eta = coef[nt + m:]
    residual = float(np.linalg.norm(r))
    gap = residual * math.sqrt(2 * m) + float(eta @ (x[at_bound] - eps))
    gap += 2 * lam * float(w[tied] @ np.abs(d[tied]))
    return residual, gap


def _group_problem(labels: np.ndarray, fixed: np.ndarray, x_ref: np.ndarray, n: np.ndarray, lam: float,
                   w: np.ndarray, pairs: PairSet, eps: float, m: int):
    """Reduce to one variable per fusion group with pair signs taken from ``x_ref``.

    ``labels`` assigns each free cell a group id ``0..G-1``; fixed cells sit at ``eps``.
    """
    G = int(labels[~fixed].max()) + 1
    B = np.zeros((m * m, G))
    free = np.flatnonzero(~fixed)
    B[free, labels[free]] = 1.0
    N_g = B.T @ n
    k_g = B.sum(axis=0)
    ref = np.array([x_ref[labels == g_].mean() for g_ in range(G)])

    c = np.zeros(G)
    a, b = pairs.first, pairs.second
    for t in range(len(pairs)):
        fa, fb = fixed[a[t]], fixed[b[t]]
        if fa and fb:
            continue
        if fa or fb:
            c[labels[b[t] if fa else a[t]]] += lam * w[t]
            continue
        ga, gb = labels[a[t]], labels[b[t]]
        if ga == gb:
            continue
        s = 1.0 if ref[ga] > ref[gb] else -1.0
        c[ga] += lam * w[t] * s
        c[gb] -= lam * w[t] * s
    R = _row_matrix(m)
    C = R @ B
    rhs = 1.0 - eps * (R @ fixed.astype(float))
    return B, N_g, k_g, c, C, rhs, ref


def _polish(x_s, counts, lam, w, pairs, opts: SolverOptions, barrier: float, cluster_tol: float,
            fix_tol: float = 1e-8):
    m = counts.m
    n = _counts_flat(counts)
    eps = opts.eps
    # zero-count cells this close to the bound are pinned to it
    fixed = (x_s - eps <= fix_tol) & (n == 0)
    free = np.flatnonzero(~fixed)
    if free.size == 0:
        return None
    labels = np.full(m * m, -1, dtype=np.int64)
    labels[free] = cluster_labels(x_s[free], cluster_tol)
    x_ref = x_s
    iters = 0
    for _ in range(5):
        B, N_g, k_g, c, C, rhs, ref = _group_problem(labels, fixed, x_ref, n, lam, w, pairs, eps, m)
        if np.any(np.all(C == 0, axis=1)):
            return None

        def f(v):
            pos = N_g > 0
            return float(-(N_g[pos] * np.log(v[pos])).sum() + c @ v - barrier * (k_g * np.log(v - eps)).sum())

        def fgh(v):
            gap = v - eps
            g = -N_g / v + c - barrier * k_g / gap
            H = np.diag(N_g / v**2 + barrier * k_g / gap**2)
            return f(v), g, H

        res = _newton.newton_eq(np.maximum(ref, 2 * eps), fgh, f, C, rhs, eps, max_iter=opts.max_newton,
                                rtol=1e-24)
        iters += res.iterations
        v = res.x
        x = np.full(m * m, eps)
        x[free] = v[labels[free]]
        # groups the barrier holds just off the bound are pinned to it and re-solved
        pin = (x - eps < eps) & (n == 0) & ~fixed
        if pin.any():
            fixed = fixed | pin
            free = np.flatnonzero(~fixed)
            if free.size == 0:
                return None
            labels = np.full(m * m, -1, dtype=np.int64)
            labels[free] = cluster_labels(x[free], cluster_tol)
            x_ref = x
            continue
        # Re-solve if the assumed ordering of group values flipped.
        flipped = False
        for g_a in range(v.size):
            for g_b in range(g_a + 1, v.size):
                if (ref[g_a] - ref[g_b]) * (v[g_a] - v[g_b]) < 0 and abs(v[g_a] - v[g_b]) > 1e-13:
                    flipped = True
        if not flipped:
            return x, iters
        x_ref = x
    return None


def _initial_point(counts: TransitionCounts) -> np.ndarray:
    c = counts.counts.astype(float) + 0.5
    return (c / c.sum(axis=1, keepdims=True)).ravel()


def solve(counts: TransitionCounts, lam: float, weights: PairWeights, pairs: PairSet | None = None,
          opts: SolverOptions | None = None, x0=None) -> PenalizedFit:
    """Minimize the penalized negative log-likelihood; see the module docstring."""
    opts = opts or SolverOptions()
    m = counts.m
    pairs = pairs or pair_set(m)
    if pairs.m != m or len(weights) != len(pairs):
        raise ShapeError("counts, pairs and weights disagree in size")
    if lam < 0 or not np.isfinite(lam):
        raise ValidationError("lambda must be a finite nonnegative number")
    if np.any(counts.row_sums == 0) and opts.zero_row_policy == "error":
        i = int(np.flatnonzero(counts.row_sums == 0)[0])
        raise ZeroRowError(f"state {i + 1} is never left; set zero_row_policy='allow' to fit anyway")

    n = _counts_flat(counts)
    w = np.asarray(weights.weights, dtype=float)
    R = _row_matrix(m)
    ones = np.ones(m)
    eps = opts.eps
    x = _initial_point(counts) if x0 is None else np.clip(_entries(x0).ravel(), 10 * eps, None)
    x = x / (R @ x).repeat(m)

    def good(x_, gap_):
        return gap_ <= opts.tol_obj * (1 + abs(_objective_flat(x_, n, lam, w, pairs)))

    total_iters = 0
    best = None
    schedule = opts.mu_schedule()
    for mu in schedule:
        barrier = opts.barrier_scale * mu

        def fgh(z, mu=mu, barrier=barrier):
            return smoothed_objective(z, n, lam, w, pairs, mu, barrier, eps)

        def f(z, mu=mu, barrier=barrier):
            return smoothed_objective(z, n, lam, w, pairs, mu, barrier, eps)[0]

        final = mu == schedule[-1]
        res = _newton.newton_eq(x, fgh, f, R, ones, eps, max_iter=opts.max_newton,
                                rtol=1e-24 if final else 1e-12)
        total_iters += res.iterations
        x = res.x

        if opts.polish:
            # An exact solve on the current fusion pattern; stop early once certified.
            # Flat objectives can stall zero-count cells just above the bound; the
            # last attempt pins them there.
            attempts = ((mu / 10, 1e-8), (opts.fuse_tol, 1e-8), (opts.fuse_tol, opts.fuse_tol))
            for cluster_tol, fix_tol in attempts:
                out = _polish(x, counts, lam, w, pairs, opts, opts.barrier_scale * schedule[-1], cluster_tol,
                              fix_tol)
                if out is None:
                    continue
                xp, it = out
                total_iters += it
                residual, gap = kkt_certificate(xp, counts, lam, w, pairs, eps, tie_tol=0.0)
                if best is None or gap < best[2]:
                    best = (xp, residual, gap, True)
                if good(xp, gap):
                    break
            if best is not None and good(best[0], best[2]):
                break

    residual, gap = kkt_certificate(x, counts, lam, w, pairs, eps, tie_tol=opts.fuse_tol)
    if best is None or gap < best[2]:
        best = (x, residual, gap, False)

    x, residual, gap, polished = best
    obj = _objective_flat(x, n, lam, w, pairs)
    rel = gap / (1 + abs(obj))
    certified = rel <= opts.tol_obj
    if opts.strict and not certified and rel > 1e3 * opts.tol_obj:
        raise ConvergenceError(f"penalized solve not certified: relative gap bound {rel:.3g}")

    P = validate_matrix(x.reshape(m, m), Mode.STOCHASTIC)
    partition = extract_equality_classes(P, opts.fuse_tol)
    labels = partition.labels
    active = frozenset(np.flatnonzero(labels[pairs.first] != labels[pairs.second]).tolist())
    diag = SolverDiagnostics(
        iterations=total_iters,
        constraint_violation=float(np.max(np.abs(R @ x - 1))),
        mu_final=mu,
        polished=polished,
        kkt_residual=residual,
        gap_bound=gap,
        relative_gap=rel,
        certified=certified,
    )
    return PenalizedFit(P, float(lam), weights, obj, active, partition, diag, pairs)


def _objective_flat(x, n, lam, w, pairs) -> float:
    d = x[pairs.first] - x[pairs.second]
    return _nll(x, n) + lam * float(w @ np.abs(d))


def fit(counts: TransitionCounts, lam: float, method: str = "mcalasso", gamma: float = 1.0,
        opts: SolverOptions | None = None, pairs: PairSet | None = None, x0=None) -> PenalizedFit:
    """Fit McLasso (``method="mclasso"``) or McALasso with an MLE pilot."""
    from .estimators import mle

    pairs = pairs or pair_set(counts.m)
    if method == "mclasso":
        weights = unit_weights(pairs)
    elif method == "mcalasso":
        pilot = mle(counts, zero_row_policy="uniform")
        weights = adaptive_weights(pilot, pairs, gamma)
    else:
        raise ValidationError(f"unknown penalized method {method!r}")
    return solve(counts, lam, weights, pairs, opts, x0)


def refit(fit_: PenalizedFit, counts: TransitionCounts) -> TransitionMatrix:
    """Equality-constrained MLE on the fused partition of a penalized fit."""
    from .estimators import constrained_mle

    return constrained_mle(counts, fit_.fused_partition)


def with_options(opts: SolverOptions | None, **kw) -> SolverOptions:
    return replace(opts or SolverOptions(), **kw)
