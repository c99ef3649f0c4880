"""Static principal-components factor baseline.

The baseline fits a pure factor model by rank-r truncated SVD of the
response block and carries a zero transition matrix, so its forecasts
project raw observations instead of lag-filtered ones. The rank search
evaluates a window of candidate ranks and reports each error metric at
its own best rank, which is the most favorable reading for the baseline.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import (
    DimensionError,
    ModelFit,
    TimeSeriesPanel,
    build_lag_design,
)
from .evaluate import common_space_error, forecast_error_vs_oracle
from .forecast import ForecastResult, forecast_h
from .simulate import GroundTruth
from .solvers import deterministic_svd, numerical_rank, svt_hard


def sw_pc_fit(panel: TimeSeriesPanel, r: int, d: int = 1) -> ModelFit:
    """Rank-r principal-components fit with a zero transition matrix.

    The estimated hyperplane is the best rank-r approximation of the
    response block of the order-d lag design, so its rows align with
    those of the lag-adjusted estimators for comparison.
    """
    design = build_lag_design(panel, d)
    n, p = design.t_eff, design.n_series
    if not 1 <= r <= min(n, p):
        raise DimensionError(
            f"rank must be in [1, {min(n, p)}], got {r}")
    theta, _ = svt_hard(design.response, r)
    _, s, vt = deterministic_svd(theta)
    rank = numerical_rank(s)
    resid = design.response - theta
    loss = float(np.sum(resid * resid)) / (2.0 * n)
    return ModelFit(
        b_hat=np.zeros((p, d * p)),
        theta_hat=theta,
        singular_values=s[:rank].copy(),
        right_basis=vt[:rank].T.copy(),
        rank=rank,
        objective_trace=(loss,),
        converged=True,
        iterations=0,
        degenerate=(n <= 2 or p == 1),
    )


def sw_forecast(panel: TimeSeriesPanel, fit: ModelFit,
                h: int) -> ForecastResult:
    """Multi-horizon forecast from a principal-components fit.

    Delegates to the shared projection forecaster; with a zero
    transition matrix the filtered process is the raw panel.
    """
    return forecast_h(panel, fit, h)


@dataclass(frozen=True)
class SwRankReport:
    """Per-metric minima of the baseline over a window of ranks."""

    common_error: float
    common_rank: int
    forecast_error: float
    forecast_rank: int
    ranks_searched: tuple


def sw_rank_search(panel: TimeSeriesPanel, truth: GroundTruth,
                   k_range) -> SwRankReport:
    """Evaluate the baseline at each rank and keep each metric's best.

    The lag order is read off the shape of the true transition matrix so
    the evaluation rows line up with the truth.
    """
    ranks = tuple(int(r) for r in k_range)
    if not ranks:
        raise ValueError("empty rank range")
    p = truth.b_true.shape[0]
    d = truth.b_true.shape[1] // p
    design = build_lag_design(panel, d)
    best_common = best_forecast = np.inf
    common_rank = forecast_rank = ranks[0]
    for r in ranks:
        fit = sw_pc_fit(panel, r, d=d)
        ce = common_space_error(fit.theta_hat, design, truth)
        fe = forecast_error_vs_oracle(
            sw_forecast(panel, fit, 1).x_hat[0], truth)
        if ce < best_common:
            best_common, common_rank = ce, r
        if fe < best_forecast:
            best_forecast, forecast_rank = fe, r
    return SwRankReport(
        common_error=float(best_common),
        common_rank=common_rank,
        forecast_error=float(best_forecast),
        forecast_rank=forecast_rank,
        ranks_searched=ranks,
    )
