"""Equality-constrained damped Newton iterations on an open box ``x > lower``.

Shared by the penalized solver (smoothed and reduced problems) and by the
equality-constrained MLE.  The start may violate ``C x = r``; the first
full step restores feasibility (infeasible-start Newton).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

FGH = Callable[[np.ndarray], tuple[float, np.ndarray, np.ndarray]]
F = Callable[[np.ndarray], float]

_ARMIJO = 0.25
_BACKTRACK = 0.5
_FRACTION_TO_BOUNDARY = 0.99


@dataclass
class NewtonResult:
    x: np.ndarray
    nu: np.ndarray
    iterations: int
    decrement: float
    converged: bool


def _kkt_solve(H: np.ndarray, C: np.ndarray, g: np.ndarray, rp: np.ndarray):
    n, k = H.shape[0], C.shape[0]
    K = np.zeros((n + k, n + k))
    K[:n, :n] = H
    K[:n, n:] = C.T
    K[n:, :n] = C
    rhs = -np.concatenate([g, rp])
    try:
        sol = np.linalg.solve(K, rhs)
        if not np.all(np.isfinite(sol)):
            raise np.linalg.LinAlgError
    except np.linalg.LinAlgError:
        sol = np.linalg.lstsq(K, rhs, rcond=None)[0]
    return sol[:n], sol[n:]


def newton_eq(
    x0: np.ndarray,
    fgh: FGH,
    f: F,
    C: np.ndarray,
    r: np.ndarray,
    lower: float,
    max_iter: int = 100,
    rtol: float = 1e-14,
) -> NewtonResult:
    """Minimize a convex ``f`` subject to ``C x = r`` and ``x > lower``.

    Stops when half the squared Newton decrement drops below
    ``rtol * (1 + |f|)`` at a feasible point, or when no step can be taken.
    """
    x = np.array(x0, dtype=float)
    # Redundant rows (e.g. two states whose rows share every class) make the
    # KKT matrix singular; keep an orthonormal basis of the row space instead.
    U, sv, _ = np.linalg.svd(C, full_matrices=False)
    rank = int(np.sum(sv > sv[0] * 1e-12)) if sv.size else 0
    if rank < C.shape[0]:
        C, r = U[:, :rank].T @ C, U[:, :rank].T @ r
    nu = np.zeros(C.shape[0])
    dec = np.inf
    it = 0
    # Projector onto null(C); removes constraint drift from ill-conditioned solves.
    null_proj = np.eye(x.size) - np.linalg.pinv(C) @ C
    for it in range(1, max_iter + 1):
        fx, g, H = fgh(x)
        rp = C @ x - r
        feasible = np.max(np.abs(rp), initial=0.0) <= 1e-12
        dx, nu = _kkt_solve(H, C, g, rp)
        if feasible:
            dx = null_proj @ dx
        dec = float(dx @ H @ dx)
        if feasible and dec / 2 <= rtol * (1 + abs(fx)):
            return NewtonResult(x, nu, it, dec, True)

        neg = dx < 0
        t = 1.0
        if np.any(neg):
            t = min(1.0, _FRACTION_TO_BOUNDARY * float(np.min((x[neg] - lower) / -dx[neg])))
        slope = float(g @ dx)
        while True:
            xt = x + t * dx
            if np.all(xt > lower):
                ft = f(xt)
                if not feasible:
                    if np.isfinite(ft):
                        break
                elif np.isfinite(ft) and ft <= fx + _ARMIJO * t * slope:
                    break
            t *= _BACKTRACK
            if t < 1e-16:
                return NewtonResult(x, nu, it, dec, feasible and dec / 2 <= 1e-8 * (1 + abs(fx)))
        if feasible and ft >= fx and t * np.max(np.abs(dx)) < 1e-15:
            return NewtonResult(xt, nu, it, dec, True)
        x = xt
    fx, g, H = fgh(x)
    return NewtonResult(x, nu, it, dec, False)
