"""Information-criterion tuning of the rank-constrained estimator.

The criterion charges a fit by its in-sample noise level plus penalties on
the transition support size and on the rank:

    pic  = sigma2 + sigma2 * [ (log n / (n p)) * ||B||_0
                               + r * (n + p)/(n p) * log(n p) ]
    pic* = log(sigma2) + (log n / (n p)) * ||B||_0
                               + r * (n + p)/(n p) * log(n p)

with sigma2 the mean squared residual (1/(n p)) ||X - Theta - Z B'||_F^2,
n the effective sample size, and p the series count. Both penalties are
deflated by the full panel observation count n p: the support term is the
average of per-equation BIC charges (each of the p equations sees n
samples), which keeps it commensurate with the rank term. Deflating by n
alone makes the support charge so heavy that the search always returns an
empty transition matrix once p is in the hundreds.

``select_two_step`` minimizes the criterion over a (lambda, r) lattice,
then inflates the selected rank to (d + 1) * r (the stationary dimension a
lag-d system spreads a K-factor space over) and re-searches the lambda grid
at that fixed rank. Ties prefer the sparser fit: larger lambda, then
smaller rank.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .core import LagDesign, ModelFit, RegularizationConfig
from .estimator import _gram_of, fit_empirical


class TuningError(RuntimeError):
    """Raised when the lattice search has no usable point."""

    def __init__(self, message: str, failures=None):
        super().__init__(message)
        self.failures = tuple(failures or ())


class DegeneratePerfectFit(Exception):
    """Zero-residual fit: the log-scale criterion is minus infinity."""


@dataclass(frozen=True)
class TuningGrid:
    """Search lattice: lambda values and candidate ranks, stored ascending."""

    lambda_values: tuple
    rank_values: tuple

    def __post_init__(self):
        lams = tuple(float(v) for v in self.lambda_values)
        ranks = tuple(int(r) for r in self.rank_values)
        if not lams or not ranks:
            raise ValueError("grid must contain at least one point")
        if any(v < 0 for v in lams):
            raise ValueError("lambda values must be >= 0")
        if any(r < 1 for r in ranks):
            raise ValueError("rank values must be >= 1")
        if len(set(lams)) != len(lams) or len(set(ranks)) != len(ranks):
            raise ValueError("grid values must be unique")
        object.__setattr__(self, "lambda_values", tuple(sorted(lams)))
        object.__setattr__(self, "rank_values", tuple(sorted(ranks)))


@dataclass(frozen=True)
class TuningResult:
    """Two-step search outcome.

    criterion_table maps (stage, lambda, rank) to the criterion value;
    stage 1 covers the full lattice, stage 2 the lambda re-search at the
    inflated rank.
    """

    lambda_opt: float
    rank_opt: int
    step1_lambda: float
    step1_rank: int
    criterion_table: dict
    criterion: str
    d: int
    rank_clamped: bool = False

    @property
    def k_hat(self) -> int:
        """Factor count implied by the selected rank."""
        return self.rank_opt // (self.d + 1)


def _sigma2(design: LagDesign, fit: ModelFit) -> float:
    resid = (design.response - fit.theta_hat
             - design.predictors @ fit.b_hat.T)
    return float(np.sum(resid * resid)) / (
        design.t_eff * design.n_series)


def _penalty(design: LagDesign, df_b: int, r: int) -> float:
    n, p = design.t_eff, design.n_series
    return ((math.log(n) / (n * p)) * df_b
            + r * (n + p) / (n * p) * math.log(n * p))


def pic(design: LagDesign, fit: ModelFit, lambda_b: float, r: int) -> float:
    """Penalized information criterion of a rank-r fit."""
    sigma2 = _sigma2(design, fit)
    df_b = int(np.count_nonzero(fit.b_hat))
    return sigma2 + sigma2 * _penalty(design, df_b, r)


def pic_star(design: LagDesign, fit: ModelFit, r: int) -> float:
    """Log-scale variant; raises DegeneratePerfectFit on zero residual."""
    sigma2 = _sigma2(design, fit)
    if sigma2 <= 0.0:
        raise DegeneratePerfectFit(
            "zero residual: criterion is minus infinity")
    df_b = int(np.count_nonzero(fit.b_hat))
    return math.log(sigma2) + _penalty(design, df_b, r)


def default_grid(design: LagDesign, n_lambda: int = 20,
                 max_rank: int = 10) -> TuningGrid:
    """Log-spaced lambdas from 0.01 * lambda_max up to lambda_max, ranks
    1 .. min(max_rank, min(n, p) // 2)."""
    lam_max = float(np.max(np.abs(
        design.predictors.T @ design.response / design.t_eff)))
    if lam_max > 0:
        lams = tuple(np.geomspace(lam_max, 0.01 * lam_max, n_lambda))
    else:
        lams = (0.0,)
    top = max(1, min(max_rank, min(design.t_eff, design.n_series) // 2))
    return TuningGrid(lambda_values=lams,
                      rank_values=tuple(range(1, top + 1)))


def _argbest(entries) -> tuple:
    """Pick (value, lam, r) minimizing value; ties prefer larger lam, then
    smaller r."""
    best = None
    for value, lam, r in entries:
        key = (value, -lam, r)
        if best is None or key < best[0]:
            best = (key, (value, lam, r))
    if best is None:
        raise ValueError("no entries")
    return best[1]


def _evaluate(design, fit, criterion, lambda_b, r):
    if criterion == "pic":
        return pic(design, fit, lambda_b, r)
    if criterion == "pic_star":
        try:
            return pic_star(design, fit, r)
        except DegeneratePerfectFit:
            return -math.inf
    raise ValueError(f"unknown criterion {criterion!r}")


def select_two_step(design: LagDesign, grid: Optional[TuningGrid] = None,
                    cfg: Optional[RegularizationConfig] = None,
                    criterion: str = "pic") -> TuningResult:
    """Minimize the criterion over the lattice, then re-search lambda at
    the inflated rank (d + 1) times the step-1 choice."""
    if criterion not in ("pic", "pic_star"):
        raise ValueError(f"unknown criterion {criterion!r}")
    if cfg is None:
        cfg = RegularizationConfig()
    if grid is None:
        grid = default_grid(design)
    gram = _gram_of(design)
    table = {}
    failures = []
    entries = []
    for lam in grid.lambda_values:
        for r in grid.rank_values:
            try:
                fit = fit_empirical(design, lam, r, cfg, gram=gram)
                value = _evaluate(design, fit, criterion, lam, r)
            except Exception as exc:  # noqa: BLE001 - grid point failure
                failures.append((lam, r, repr(exc)))
                value = math.inf
            table[(1, lam, r)] = value
            if math.isfinite(value) or value == -math.inf:
                entries.append((value, lam, r))
    if not entries:
        raise TuningError("all grid fits failed", failures)
    _, lam0, r0 = _argbest(entries)

    rank2 = (design.d + 1) * r0
    cap = min(design.t_eff, design.n_series)
    clamped = rank2 > cap
    if clamped:
        rank2 = cap
    entries2 = []
    for lam in grid.lambda_values:
        try:
            fit = fit_empirical(design, lam, rank2, cfg, gram=gram)
            value = _evaluate(design, fit, criterion, lam, rank2)
        except Exception as exc:  # noqa: BLE001
            failures.append((lam, rank2, repr(exc)))
            value = math.inf
        table[(2, lam, rank2)] = value
        if math.isfinite(value) or value == -math.inf:
            entries2.append((value, lam, rank2))
    if not entries2:
        raise TuningError("all rank-fixed refits failed", failures)
    _, lam_opt, _ = _argbest(entries2)
    return TuningResult(lambda_opt=lam_opt, rank_opt=rank2,
                        step1_lambda=lam0, step1_rank=r0,
                        criterion_table=table, criterion=criterion,
                        d=design.d, rank_clamped=clamped)
