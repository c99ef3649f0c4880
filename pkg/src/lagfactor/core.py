"""Panel containers, lag stacking, and stability utilities.

Data layout convention: a panel holds raw observations x_0, .., x_T as rows
(n = T + 1 rows, p columns). A lag design of order d pairs the response block
[x_d, ..., x_T] with stacked predictors whose row for time t is
[x_{t-1} | x_{t-2} | .. | x_{t-d}], giving t_eff = T - d + 1 usable rows.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np


class DimensionError(ValueError):
    """Shape or length mismatch in user-supplied data."""


class NumericError(RuntimeError):
    """Numerical failure (non-finite intermediates, singular systems)."""


def _readonly_float(a, name: str) -> np.ndarray:
    out = np.array(a, dtype=float, copy=True)
    if not np.all(np.isfinite(out)):
        raise ValueError(f"{name} contains non-finite entries")
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class TimeSeriesPanel:
    """Immutable multivariate time series panel.

    Parameters
    ----------
    values : (n, p) ndarray
        Observations, rows are time points ordered oldest first.
    column_ids : sequence of str
        Unique identifier per series.
    timestamps : sequence of str, optional
        One label per row when the source data carries a time index.
    """

    values: np.ndarray
    column_ids: tuple
    timestamps: Optional[tuple] = None

    def __post_init__(self):
        values = _readonly_float(self.values, "values")
        if values.ndim != 2:
            raise DimensionError("values must be a 2-d array")
        n, p = values.shape
        if n < 2:
            raise DimensionError(f"panel needs at least 2 rows, got {n}")
        if p < 1:
            raise DimensionError("panel needs at least 1 column")
        ids = tuple(str(c) for c in self.column_ids)
        if len(ids) != p:
            raise DimensionError(
                f"{len(ids)} column ids for {p} columns")
        if len(set(ids)) != len(ids):
            raise ValueError("column ids must be unique")
        ts = self.timestamps
        if ts is not None:
            ts = tuple(str(t) for t in ts)
            if len(ts) != n:
                raise DimensionError(
                    f"{len(ts)} timestamps for {n} rows")
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "column_ids", ids)
        object.__setattr__(self, "timestamps", ts)

    @property
    def n_rows(self) -> int:
        return self.values.shape[0]

    @property
    def n_series(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True)
class LagDesign:
    """Response/predictor pair produced by :func:`build_lag_design`.

    response is (t_eff, p); predictors is (t_eff, d*p) with row t equal to
    the d most recent observations, newest lag first.
    """

    response: np.ndarray
    predictors: np.ndarray
    d: int
    t_eff: int

    def __post_init__(self):
        response = _readonly_float(self.response, "response")
        predictors = _readonly_float(self.predictors, "predictors")
        if response.ndim != 2 or predictors.ndim != 2:
            raise DimensionError("response and predictors must be 2-d")
        if self.d < 1:
            raise DimensionError(f"lag order must be >= 1, got {self.d}")
        t_eff, p = response.shape
        if t_eff != self.t_eff or t_eff != predictors.shape[0]:
            raise DimensionError("row counts disagree with t_eff")
        if predictors.shape[1] != self.d * p:
            raise DimensionError(
                f"predictors must have d*p = {self.d * p} columns, "
                f"got {predictors.shape[1]}")
        object.__setattr__(self, "response", response)
        object.__setattr__(self, "predictors", predictors)

    @property
    def n_series(self) -> int:
        return self.response.shape[1]


@dataclass(frozen=True)
class ModelFit:
    """Joint fit of a factor hyperplane and a sparse transition matrix.

    Fields
    ------
    b_hat : (p, d*p) ndarray
        Estimated transition blocks [B_1 | .. | B_d].
    theta_hat : (t_eff, p) ndarray
        Estimated common-component matrix.
    singular_values : 1-d ndarray
        Singular values of theta_hat above the numerical-rank cut.
    right_basis : (p, rank) ndarray
        Right singular vectors of theta_hat spanning the factor loading space.
    rank : int
        Numerical rank of theta_hat.
    objective_trace : tuple of float
        Objective value at initialization and after each outer pass.
    converged : bool
    iterations : int
        Number of completed outer passes.
    degenerate : bool
        True when the design was accepted but too small to be meaningful
        (t_eff <= 2 or a single series).
    """

    b_hat: np.ndarray
    theta_hat: np.ndarray
    singular_values: np.ndarray
    right_basis: np.ndarray
    rank: int
    objective_trace: tuple
    converged: bool
    iterations: int
    degenerate: bool = False


@dataclass(frozen=True)
class RegularizationConfig:
    """Penalty levels and solver tolerances for the estimators.

    Exactly one of lambda_theta (Lagrangian / box mode) and rank_r
    (rank-constrained mode) governs the common-component update; phi is the
    box radius used only by the box-constrained program.
    """

    lambda_b: float = 0.0
    lambda_theta: Optional[float] = None
    rank_r: Optional[int] = None
    phi: Optional[float] = None
    d: int = 1
    outer_tol: float = 1e-6
    max_outer_iters: int = 200
    lasso_tol: float = 1e-7
    lasso_max_iters: int = 10_000
    inner_tol: float = 1e-8
    max_inner_iters: int = 100

    def __post_init__(self):
        if self.lambda_b < 0:
            raise ValueError("lambda_b must be >= 0")
        if self.lambda_theta is not None and self.lambda_theta < 0:
            raise ValueError("lambda_theta must be >= 0")
        if self.rank_r is not None and self.rank_r < 1:
            raise ValueError("rank_r must be a positive integer")
        if self.phi is not None and self.phi < 0:
            raise ValueError("phi must be >= 0")
        if self.d < 1:
            raise ValueError("d must be >= 1")
        for name in ("outer_tol", "lasso_tol", "inner_tol"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be > 0")
        for name in ("max_outer_iters", "lasso_max_iters",
                     "max_inner_iters"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")


def build_lag_design(panel: TimeSeriesPanel, d: int) -> LagDesign:
    """Stack a panel into response and lagged-predictor matrices.

    Row t of the predictors is [x_{t-1} | x_{t-2} | .. | x_{t-d}] aligned
    with response row x_t, for t = d .. n-1.
    """
    if d < 1:
        raise DimensionError(f"lag order must be >= 1, got {d}")
    n = panel.n_rows
    if n < d + 1:
        raise DimensionError(
            f"panel has {n} rows, need at least d+1 = {d + 1}")
    x = panel.values
    response = x[d:]
    predictors = np.concatenate([x[d - k : n - k] for k in range(1, d + 1)],
                                axis=1)
    return LagDesign(response=response, predictors=predictors, d=d,
                     t_eff=n - d)


def spectral_radius(m: np.ndarray) -> float:
    """Largest eigenvalue modulus of a square matrix."""
    m = np.asarray(m, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise DimensionError(f"matrix must be square, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise NumericError("matrix contains non-finite entries")
    return float(np.max(np.abs(np.linalg.eigvals(m))))


def companion_matrix(blocks: Sequence[np.ndarray]) -> np.ndarray:
    """Companion form of transition blocks [B_1, .., B_d].

    Top block row holds the blocks in order; identity blocks sit on the
    first subdiagonal. For d = 1 the single block is returned unchanged.
    """
    mats = [np.asarray(b, dtype=float) for b in blocks]
    if len(mats) == 0:
        raise DimensionError("need at least one block")
    p = mats[0].shape[0]
    for b in mats:
        if b.ndim != 2 or b.shape != (p, p):
            raise DimensionError(
                f"all blocks must be ({p}, {p}), got {b.shape}")
    d = len(mats)
    if d == 1:
        return mats[0].copy()
    comp = np.zeros((d * p, d * p))
    comp[:p] = np.concatenate(mats, axis=1)
    idx = np.arange((d - 1) * p)
    comp[p + idx, idx] = 1.0
    return comp


def split_blocks(b: np.ndarray, d: int) -> list:
    """Split a (p, d*p) stacked transition matrix into d (p, p) blocks."""
    b = np.asarray(b, dtype=float)
    p = b.shape[0]
    if b.ndim != 2 or b.shape[1] != d * p:
        raise DimensionError(
            f"expected shape ({p}, {d * p}), got {b.shape}")
    return [b[:, k * p : (k + 1) * p] for k in range(d)]
