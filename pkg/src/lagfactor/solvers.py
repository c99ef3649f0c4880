"""Proximal operators and the row-wise Lasso solver.

The estimators alternate between two building blocks implemented here:

* singular-value thresholding, soft (``svt_soft``, the proximal map of the
  nuclear norm) and hard (``svt_hard``, best rank-r approximation), and

* an l1-penalized least-squares solver (``lasso_coordinate_descent``)
  minimizing (1/2n)||y - X beta||_2^2 + lam * ||beta||_1 by cyclic
  coordinate descent on the Gram system, with the coordinate update
  beta_j <- soft((1/n) x_j'(y - X beta_{-j}), lam) / ((1/n)||x_j||^2).

All SVDs go through :func:`deterministic_svd`, which fixes the sign of each
left singular vector so repeated runs produce identical factors.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
from numba import njit, prange

from .core import DimensionError, NumericError

# relative cut used everywhere a numerical rank is extracted
RANK_RTOL = 1e-8


def soft_threshold(z, tau: float):
    """Elementwise shrinkage sign(z) * max(|z| - tau, 0)."""
    if tau < 0:
        raise ValueError(f"threshold must be >= 0, got {tau}")
    z = np.asarray(z, dtype=float)
    out = np.sign(z) * np.maximum(np.abs(z) - tau, 0.0)
    if out.ndim == 0:
        return float(out)
    return out


def deterministic_svd(m: np.ndarray):
    """Thin SVD with each left singular vector's first nonzero entry >= 0."""
    u, s, vt = np.linalg.svd(np.asarray(m, dtype=float), full_matrices=False)
    for j in range(u.shape[1]):
        col = u[:, j]
        nz = np.flatnonzero(col)
        if nz.size and col[nz[0]] < 0:
            u[:, j] = -col
            vt[j] = -vt[j]
    return u, s, vt


def numerical_rank(singular_values: np.ndarray, rtol: float = RANK_RTOL) -> int:
    """Count singular values above rtol times the largest."""
    s = np.asarray(singular_values, dtype=float)
    if s.size == 0 or s[0] <= 0.0:
        return 0
    return int(np.sum(s > rtol * s[0]))


def svt_soft(m: np.ndarray, tau: float):
    """Soft singular-value thresholding.

    Returns the reconstruction with every singular value shrunk by tau
    (floored at zero) together with the shrunk singular values. This is the
    proximal map of tau * nuclear norm.
    """
    if tau < 0:
        raise ValueError(f"threshold must be >= 0, got {tau}")
    m = np.asarray(m, dtype=float)
    if m.ndim != 2:
        raise DimensionError("svt_soft expects a 2-d matrix")
    u, s, vt = deterministic_svd(m)
    shrunk = np.maximum(s - tau, 0.0)
    out = (u * shrunk) @ vt
    return out, shrunk


def svt_hard(m: np.ndarray, r: int):
    """Best rank-r approximation via truncated SVD.

    Returns the truncation and the r retained singular values.
    """
    m = np.asarray(m, dtype=float)
    if m.ndim != 2:
        raise DimensionError("svt_hard expects a 2-d matrix")
    if not (1 <= r <= min(m.shape)):
        raise DimensionError(
            f"rank must be in [1, {min(m.shape)}], got {r}")
    u, s, vt = deterministic_svd(m)
    out = (u[:, :r] * s[:r]) @ vt[:r]
    return out, s[:r].copy()


def project_box(m: np.ndarray, bound: float) -> np.ndarray:
    """Entrywise projection onto the sup-norm ball of the given radius."""
    if bound < 0:
        raise ValueError(f"bound must be >= 0, got {bound}")
    return np.clip(np.asarray(m, dtype=float), -bound, bound)


@dataclass(frozen=True)
class LassoProblem:
    """One l1-penalized regression: design (n, q), target (n,), lam >= 0."""

    design: np.ndarray
    target: np.ndarray
    lam: float

    def __post_init__(self):
        design = np.asarray(self.design, dtype=float)
        target = np.asarray(self.target, dtype=float)
        if design.ndim != 2:
            raise DimensionError("design must be 2-d")
        if target.ndim != 1 or target.shape[0] != design.shape[0]:
            raise DimensionError(
                f"target length {target.shape} does not match design rows "
                f"{design.shape[0]}")
        if self.lam < 0:
            raise ValueError(f"lam must be >= 0, got {self.lam}")
        object.__setattr__(self, "design", design)
        object.__setattr__(self, "target", target)


@dataclass(frozen=True)
class LassoSolution:
    """Solver output: coefficients, KKT residual, and per-cycle objectives."""

    beta: np.ndarray
    kkt_residual: float
    n_cycles: int
    converged: bool
    objective_trace: tuple


@njit(cache=True)
def _kkt_from_gram(g, c, beta, gb, lam):
    worst = 0.0
    for j in range(beta.shape[0]):
        grad = c[j] - gb[j]
        if beta[j] > 0.0:
            v = abs(grad - lam)
        elif beta[j] < 0.0:
            v = abs(grad + lam)
        else:
            v = abs(grad) - lam
            if v < 0.0:
                v = 0.0
        if v > worst:
            worst = v
    return worst


@njit(cache=True)
def _cd_gram(g, c, beta, lam, tol, kkt_tol, max_cycles, half_yty, obj_out):
    """Cyclic coordinate descent on the Gram system.

    g = X'X/n, c = X'y/n. beta is updated in place. Records the penalized
    objective after every full cycle in obj_out. Stops once the largest
    coordinate change in a cycle drops below tol and (when kkt_tol is
    finite) the KKT residual is at or below kkt_tol.

    Returns (cycles, kkt_residual, converged, ok).
    """
    k = beta.shape[0]
    gb = g @ beta
    cycles = 0
    converged = False
    kkt = np.inf
    for it in range(max_cycles):
        max_change = 0.0
        for j in range(k):
            gjj = g[j, j]
            bj = beta[j]
            if gjj <= 0.0:
                # all-zero column: coefficient is pinned at zero
                if bj != 0.0:
                    beta[j] = 0.0
                    grow = g[j]
                    for i in range(k):
                        gb[i] -= grow[i] * bj
                    if abs(bj) > max_change:
                        max_change = abs(bj)
                continue
            rho = c[j] - gb[j] + gjj * bj
            if rho > lam:
                new = (rho - lam) / gjj
            elif rho < -lam:
                new = (rho + lam) / gjj
            else:
                new = 0.0
            delta = new - bj
            if delta != 0.0:
                beta[j] = new
                grow = g[j]
                for i in range(k):
                    gb[i] += grow[i] * delta
                ad = abs(delta)
                if ad > max_change:
                    max_change = ad
        cycles = it + 1
        lin = 0.0
        quad = 0.0
        l1 = 0.0
        for j in range(k):
            lin += c[j] * beta[j]
            quad += beta[j] * gb[j]
            l1 += abs(beta[j])
        obj = half_yty - lin + 0.5 * quad + lam * l1
        obj_out[it] = obj
        if not np.isfinite(obj):
            return cycles, kkt, False, False
        if max_change < tol:
            gb = g @ beta  # refresh accumulated products before the check
            kkt = _kkt_from_gram(g, c, beta, gb, lam)
            if kkt <= kkt_tol:
                converged = True
                break
    if not converged:
        gb = g @ beta
        kkt = _kkt_from_gram(g, c, beta, gb, lam)
    return cycles, kkt, converged, True


@njit(cache=True, parallel=True)
def _cd_gram_rows(g, c_rows, b, lam, tol, kkt_tol, max_cycles):
    """Row-parallel driver: one Lasso per row of b, all sharing g.

    c_rows[j] is the c vector of row j's problem; b[j] is updated in place.
    Returns per-row (cycles, kkt, converged, ok) as a float array.
    """
    p = b.shape[0]
    info = np.empty((p, 4))
    for j in prange(p):
        scratch = np.empty(max_cycles)
        cycles, kkt, conv, ok = _cd_gram(
            g, c_rows[j], b[j], lam, tol, kkt_tol, max_cycles, 0.0, scratch)
        info[j, 0] = cycles
        info[j, 1] = kkt
        info[j, 2] = 1.0 if conv else 0.0
        info[j, 3] = 1.0 if ok else 0.0
    return info


def lasso_coordinate_descent(problem: LassoProblem,
                             init: Optional[np.ndarray] = None,
                             tol: float = 1e-7,
                             max_cycles: int = 10_000,
                             kkt_tol: Optional[float] = None) -> LassoSolution:
    """Solve one Lasso problem by cyclic coordinate descent.

    Coordinates are visited in fixed ascending order. Termination is on the
    largest coordinate change in a full cycle falling below tol (plus an
    optional KKT-residual refinement when kkt_tol is given). The KKT
    residual of the returned iterate is always reported.
    """
    x = problem.design
    y = problem.target
    n = x.shape[0]
    g = np.ascontiguousarray(x.T @ x / n)
    c = x.T @ y / n
    half_yty = float(y @ y) / (2.0 * n)
    if init is None:
        beta = np.zeros(x.shape[1])
    else:
        beta = np.array(init, dtype=float, copy=True)
        if beta.shape != (x.shape[1],):
            raise DimensionError(
                f"init must have shape ({x.shape[1]},), got {beta.shape}")
    obj_out = np.empty(max_cycles)
    cycles, kkt, converged, ok = _cd_gram(
        g, c, beta, problem.lam, tol,
        np.inf if kkt_tol is None else kkt_tol,
        max_cycles, half_yty, obj_out)
    if not ok:
        raise NumericError("coordinate descent produced non-finite values")
    return LassoSolution(beta=beta, kkt_residual=float(kkt),
                         n_cycles=int(cycles), converged=bool(converged),
                         objective_trace=tuple(obj_out[:cycles]))


def lasso_rows(gram: np.ndarray, c_rows: np.ndarray, b_init: np.ndarray,
               lam: float, tol: float, max_cycles: int,
               kkt_tol: float) -> tuple:
    """Solve one Lasso per row of b_init against a shared Gram matrix.

    Rows are independent problems, so the parallel schedule cannot change
    the result. Returns (b, max_kkt, max_cycles_used).
    """
    b = np.array(b_init, dtype=float, copy=True)
    info = _cd_gram_rows(np.ascontiguousarray(gram),
                         np.ascontiguousarray(c_rows), b, lam, tol,
                         kkt_tol, max_cycles)
    if not np.all(info[:, 3] > 0.0):
        raise NumericError("coordinate descent produced non-finite values")
    return b, float(info[:, 1].max()), int(info[:, 0].max())
