"""Multi-step forecasting via projection of the lag-filtered process.

Removing the fitted lag contribution from each observation leaves a series
living (up to noise) on the estimated factor hyperplane. Forecasts project
the last filtered observation onto that basis, propagate it forward with
sample cross-covariances, and re-add the lag recursion:

    z_t        = x_t - sum_k B_k x_{t-k}
    z_{T+i}    = Gamma_z(i) V (V' Gamma_z(0) V)^{-1} V' z_T
    x_{T+i}    = z_{T+i} + sum_k B_k x_{T+i-k}

with future x values on the right-hand side replaced by their forecasts.
Every horizon anchors at the same z_T rather than chaining through the
previous filtered forecast.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import (
    DimensionError,
    ModelFit,
    NumericError,
    TimeSeriesPanel,
    build_lag_design,
    split_blocks,
)

# condition-number ceiling for the projected Gram matrix, and the relative
# ridge applied once when it is exceeded
_COND_LIMIT = 1e12
_RIDGE_SCALE = 1e-10


@dataclass(frozen=True)
class ForecastResult:
    """Forecasts for horizons 1..h.

    x_hat holds the observable forecasts, z_hat the filtered-process
    forecasts; row i - 1 is horizon i. z_hat is stored as x_hat minus the
    lag contribution, so the decomposition identity holds bitwise.
    gram_ridged records whether the projection Gram matrix needed the
    stabilizing ridge.
    """

    x_hat: np.ndarray
    z_hat: np.ndarray
    horizon: int
    gram_ridged: bool = False

    def __post_init__(self):
        x = np.asarray(self.x_hat, dtype=np.float64)
        z = np.asarray(self.z_hat, dtype=np.float64)
        if self.horizon < 1:
            raise DimensionError("horizon must be >= 1")
        if x.shape != z.shape or x.ndim != 2 or x.shape[0] != self.horizon:
            raise DimensionError(
                f"forecast arrays must be {self.horizon} x p, got "
                f"{x.shape} and {z.shape}")
        if not (np.isfinite(x).all() and np.isfinite(z).all()):
            raise NumericError("non-finite forecast values")
        object.__setattr__(self, "x_hat", x)
        object.__setattr__(self, "z_hat", z)


def filtered_process(panel: TimeSeriesPanel, b_hat: np.ndarray,
                     d: int) -> np.ndarray:
    """Remove the fitted lag contribution: row t is x_t - sum_k B_k x_{t-k}.

    Returns the (n_rows - d) x p matrix of filtered values, aligned with
    the response rows of the lag design.
    """
    b_hat = np.asarray(b_hat, dtype=np.float64)
    p = panel.n_series
    if b_hat.shape != (p, d * p):
        raise DimensionError(
            f"b_hat must be {p} x {d * p} for d={d}, got {b_hat.shape}")
    design = build_lag_design(panel, d)
    return design.response - design.predictors @ b_hat.T


def sample_cross_cov(z: np.ndarray, h: int) -> np.ndarray:
    """Lag-h cross-covariance (1/(T-h)) sum_{t>h} z_t z_{t-h}', without
    mean subtraction."""
    z = np.asarray(z, dtype=np.float64)
    if z.ndim != 2:
        raise DimensionError("z must be a 2-d array")
    t_len = z.shape[0]
    if h < 0 or h >= t_len:
        raise DimensionError(
            f"lag h={h} out of range for {t_len} filtered rows")
    return z[h:].T @ z[:t_len - h] / (t_len - h)


def _projection_weights(gram: np.ndarray):
    """Solve the r x r projected Gram system, ridging once if needed.

    Returns (solver matrix factor inputs, ridged flag). Raises NumericError
    when the matrix stays numerically singular after the ridge.
    """
    m = gram
    ridged = False
    s = np.linalg.svd(m, compute_uv=False)
    bad = (not np.all(np.isfinite(s))) or s[-1] <= 0 \
        or s[0] / s[-1] > _COND_LIMIT
    if bad:
        ridge = _RIDGE_SCALE * np.trace(m) / m.shape[0]
        m = m + ridge * np.eye(m.shape[0])
        ridged = True
        s = np.linalg.svd(m, compute_uv=False)
        bad = (not np.all(np.isfinite(s))) or s[-1] <= 0 \
            or s[0] / s[-1] > _COND_LIMIT
        if bad:
            raise NumericError(
                "projected Gram matrix V' Gamma_z(0) V is numerically "
                "singular (condition number exceeds 1e12 even after ridge)")
    return m, ridged


def forecast_h(panel: TimeSeriesPanel, fit: ModelFit,
               h: int) -> ForecastResult:
    """Forecast horizons 1..h from a fitted model.

    The filtered history is rebuilt from the panel and fit.b_hat; each
    filtered forecast projects z_T onto the estimated right basis and
    propagates it with the lag-i cross-covariance; the observable forecast
    re-adds the lag recursion, feeding forecasts back in as lagged values
    once the horizon passes the sample end.
    """
    if h < 1:
        raise DimensionError("horizon must be >= 1")
    if fit.rank < 1:
        raise DimensionError("fit must extract at least one direction "
                             "(rank >= 1)")
    p = panel.n_series
    if fit.b_hat.shape[0] != p or fit.b_hat.shape[1] % p != 0:
        raise DimensionError(
            f"b_hat shape {fit.b_hat.shape} incompatible with p={p}")
    d = fit.b_hat.shape[1] // p
    v = fit.right_basis
    if v.shape[0] != p:
        raise DimensionError(
            f"right basis has {v.shape[0]} rows, expected {p}")

    z = filtered_process(panel, fit.b_hat, d)
    if h >= z.shape[0]:
        raise DimensionError(
            f"horizon {h} needs lag-{h} cross-covariance but only "
            f"{z.shape[0]} filtered rows exist")
    gram = v.T @ sample_cross_cov(z, 0) @ v
    gram, ridged = _projection_weights(gram)
    # weights shared by every horizon: (V' G0 V)^{-1} V' z_T
    w = np.linalg.solve(gram, v.T @ z[-1])

    blocks = split_blocks(fit.b_hat, d)
    # most-recent-first tail of observed values, extended by forecasts
    tail = [panel.values[-k] for k in range(1, d + 1)]
    x_hat = np.empty((h, p))
    z_hat = np.empty((h, p))
    for i in range(1, h + 1):
        z_proj = sample_cross_cov(z, i) @ (v @ w)
        contrib = np.zeros(p)
        for k in range(d):
            contrib = contrib + blocks[k] @ tail[k]
        x_next = z_proj + contrib
        x_hat[i - 1] = x_next
        z_hat[i - 1] = x_next - contrib
        tail.insert(0, x_next)
    return ForecastResult(x_hat=x_hat, z_hat=z_hat, horizon=h,
                          gram_ridged=ridged)
