"""Joint estimation of a low-rank common component and a sparse transition.

Three fitting programs over a lag design (response X, predictors Z, n
effective rows, p series):

* ``fit_lagrangian`` minimizes the doubly penalized objective

      (1/2n) ||X - Theta - Z B'||_F^2
          + lambda_b ||B||_1 + lambda_theta ||Theta / sqrt(n)||_*

  by exact alternation: the Theta-subproblem has the closed form
  svt_soft(X - Z B', lambda_theta * sqrt(n)), and each row of B solves an
  l1-penalized regression of the de-factored residual on Z. The problem is
  jointly convex, so the alternation reaches the global optimum from any
  start.

* ``fit_empirical`` replaces the nuclear penalty by a hard rank constraint:
  Theta starts at the best rank-r approximation of X, then B-updates
  (row-wise Lasso) alternate with hard singular-value truncations of
  X - Z B'. The recorded objective (1/2n)||X - Theta - Z B'||_F^2
  + lambda_b ||B||_1 never increases along the iterations.

* ``fit_box`` keeps the nuclear penalty but constrains ||Theta||_inf to a
  data-scaled box; its Theta-update runs composite gradient steps
  (gradient step, soft singular-value thresholding, box projection).
"""

from __future__ import annotations

import math
from typing import Optional

import numpy as np

from .core import (
    DimensionError,
    LagDesign,
    ModelFit,
    NumericError,
    RegularizationConfig,
)
from .solvers import (
    deterministic_svd,
    lasso_rows,
    numerical_rank,
    project_box,
    svt_hard,
    svt_soft,
)

_MONOTONE_SLACK = 1e-10


def _gram_of(design: LagDesign) -> np.ndarray:
    z = design.predictors
    return np.ascontiguousarray(z.T @ z / design.t_eff)


def _is_degenerate(design: LagDesign) -> bool:
    return design.t_eff <= 2 or design.n_series == 1


def _b_update(design: LagDesign, gram: np.ndarray, theta: np.ndarray,
              b: np.ndarray, lambda_b: float,
              cfg: RegularizationConfig) -> np.ndarray:
    resid = design.response - theta
    c_rows = resid.T @ design.predictors / design.t_eff
    b_new, _, _ = lasso_rows(gram, c_rows, b, lambda_b, cfg.lasso_tol,
                             cfg.lasso_max_iters, 5.0 * cfg.lasso_tol)
    return b_new


def _quadratic_loss(design: LagDesign, b: np.ndarray,
                    theta: np.ndarray) -> float:
    resid = design.response - theta - design.predictors @ b.T
    return float(np.sum(resid * resid)) / (2.0 * design.t_eff)


def _finalize(design: LagDesign, b: np.ndarray, theta: np.ndarray,
              trace: list, converged: bool, iterations: int) -> ModelFit:
    u, s, vt = deterministic_svd(theta)
    rank = numerical_rank(s)
    return ModelFit(
        b_hat=b,
        theta_hat=theta,
        singular_values=s[:rank].copy(),
        right_basis=vt[:rank].T.copy(),
        rank=rank,
        objective_trace=tuple(float(v) for v in trace),
        converged=converged,
        iterations=iterations,
        degenerate=_is_degenerate(design),
    )


def _check_monotone(trace: list) -> None:
    prev, new = trace[-2], trace[-1]
    if new > prev + _MONOTONE_SLACK * abs(prev):
        raise NumericError(
            f"objective increased from {prev!r} to {new!r}")


def _converged(trace: list, tol: float) -> bool:
    prev, new = trace[-2], trace[-1]
    return (prev - new) <= tol * max(abs(prev), 1e-300)


def objective_lagrangian(design: LagDesign, b: np.ndarray, theta: np.ndarray,
                         cfg: RegularizationConfig) -> float:
    """Quadratic loss + l1 transition penalty + scaled nuclear penalty."""
    if cfg.lambda_theta is None:
        raise ValueError("cfg.lambda_theta is required")
    nuclear = float(np.sum(np.linalg.svd(theta, compute_uv=False)))
    return (_quadratic_loss(design, b, theta)
            + cfg.lambda_b * float(np.sum(np.abs(b)))
            + cfg.lambda_theta * nuclear / math.sqrt(design.t_eff))


def fit_lagrangian(design: LagDesign, cfg: RegularizationConfig,
                   b_init: Optional[np.ndarray] = None,
                   gram: Optional[np.ndarray] = None) -> ModelFit:
    """Alternating minimization of the doubly penalized convex program."""
    if cfg.lambda_theta is None:
        raise ValueError("fit_lagrangian requires cfg.lambda_theta")
    n, p = design.t_eff, design.n_series
    dp = design.predictors.shape[1]
    if gram is None:
        gram = _gram_of(design)
    if b_init is None:
        b = np.zeros((p, dp))
    else:
        b = np.array(b_init, dtype=float, copy=True)
        if b.shape != (p, dp):
            raise DimensionError(
                f"b_init must have shape ({p}, {dp}), got {b.shape}")
    tau = cfg.lambda_theta * math.sqrt(n)
    theta = np.zeros((n, p))
    trace = [objective_lagrangian(design, b, theta, cfg)]
    converged = False
    iters = 0
    for _ in range(cfg.max_outer_iters):
        theta, shrunk = svt_soft(
            design.response - design.predictors @ b.T, tau)
        b = _b_update(design, gram, theta, b, cfg.lambda_b, cfg)
        obj = (_quadratic_loss(design, b, theta)
               + cfg.lambda_b * float(np.sum(np.abs(b)))
               + cfg.lambda_theta * float(np.sum(shrunk)) / math.sqrt(n))
        trace.append(obj)
        iters += 1
        _check_monotone(trace)
        if _converged(trace, cfg.outer_tol):
            converged = True
            break
    return _finalize(design, b, theta, trace, converged, iters)


def objective_empirical(design: LagDesign, b: np.ndarray, theta: np.ndarray,
                        lambda_b: float) -> float:
    """Quadratic loss + l1 transition penalty (rank held by the constraint)."""
    return (_quadratic_loss(design, b, theta)
            + lambda_b * float(np.sum(np.abs(b))))


def fit_empirical(design: LagDesign, lambda_b: float, r: int,
                  cfg: Optional[RegularizationConfig] = None,
                  gram: Optional[np.ndarray] = None) -> ModelFit:
    """Rank-constrained alternation: row-wise Lasso then hard truncation.

    Theta is initialized at the best rank-r approximation of the response;
    each pass updates B first (against the current Theta) and then Theta by
    hard thresholding of the lag-adjusted residual. After the objective
    settles, one trailing B-update aligns B with the final Theta so the
    returned rows satisfy their Lasso optimality conditions exactly against
    the returned Theta.
    """
    if cfg is None:
        cfg = RegularizationConfig()
    if lambda_b < 0:
        raise ValueError(f"lambda_b must be >= 0, got {lambda_b}")
    n, p = design.t_eff, design.n_series
    if not (1 <= r <= min(n, p)):
        raise DimensionError(
            f"rank must be in [1, {min(n, p)}], got {r}")
    if gram is None:
        gram = _gram_of(design)
    dp = design.predictors.shape[1]
    b = np.zeros((p, dp))
    theta, _ = svt_hard(design.response, r)
    trace = [objective_empirical(design, b, theta, lambda_b)]
    converged = False
    iters = 0
    for _ in range(cfg.max_outer_iters):
        b = _b_update(design, gram, theta, b, lambda_b, cfg)
        theta, _ = svt_hard(design.response - design.predictors @ b.T, r)
        trace.append(objective_empirical(design, b, theta, lambda_b))
        iters += 1
        _check_monotone(trace)
        if _converged(trace, cfg.outer_tol):
            converged = True
            break
    b = _b_update(design, gram, theta, b, lambda_b, cfg)
    trace.append(objective_empirical(design, b, theta, lambda_b))
    _check_monotone(trace)
    return _finalize(design, b, theta, trace, converged, iters)


def box_bound(design: LagDesign, phi: float) -> float:
    """Sup-norm radius phi / (sqrt(n p) * opnorm(Z / sqrt(n)))."""
    if phi < 0:
        raise ValueError(f"phi must be >= 0, got {phi}")
    n, p = design.t_eff, design.n_series
    opnorm = float(np.linalg.svd(design.predictors,
                                 compute_uv=False)[0]) / math.sqrt(n)
    if opnorm == 0.0:
        return math.inf
    return phi / (math.sqrt(n * p) * opnorm)


def fit_box(design: LagDesign, cfg: RegularizationConfig,
            gram: Optional[np.ndarray] = None) -> ModelFit:
    """Box-constrained variant of the Lagrangian program.

    The Theta-update iterates composite gradient steps: a gradient step on
    the quadratic with stepsize equal to the inverse Lipschitz constant
    (which lands on the lag-adjusted residual), soft singular-value
    thresholding, then projection onto the box, until the relative change
    falls below cfg.inner_tol.
    """
    if cfg.lambda_theta is None or cfg.phi is None:
        raise ValueError("fit_box requires cfg.lambda_theta and cfg.phi")
    n, p = design.t_eff, design.n_series
    if gram is None:
        gram = _gram_of(design)
    bound = box_bound(design, cfg.phi)
    tau = cfg.lambda_theta * math.sqrt(n)
    b = np.zeros((p, design.predictors.shape[1]))
    theta = np.zeros((n, p))
    trace = [objective_lagrangian(design, b, theta, cfg)]
    converged = False
    iters = 0
    for _ in range(cfg.max_outer_iters):
        resid = design.response - design.predictors @ b.T
        for _ in range(cfg.max_inner_iters):
            # gradient step from theta with stepsize n lands on resid
            cand, _ = svt_soft(resid, tau)
            cand = project_box(cand, bound)
            change = np.linalg.norm(cand - theta, "fro")
            scale = max(np.linalg.norm(theta, "fro"), 1.0)
            theta = cand
            if change <= cfg.inner_tol * scale:
                break
        b = _b_update(design, gram, theta, b, cfg.lambda_b, cfg)
        trace.append(objective_lagrangian(design, b, theta, cfg))
        iters += 1
        if abs(trace[-2] - trace[-1]) <= cfg.outer_tol * max(
                abs(trace[-2]), 1e-300):
            converged = True
            break
    return _finalize(design, b, theta, trace, converged, iters)
