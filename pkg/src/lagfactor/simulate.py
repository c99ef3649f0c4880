"""Synthetic panel generators for benchmarking.

Two data-generating processes:

* ``gen_lagadj_dgp`` draws from the model this package estimates: a static
  K-factor structure whose idiosyncratic part follows a sparse VAR, so
  that the observable panel admits the lag-adjusted representation with a
  rank-(d+1)K hyperplane and a sparse transition matrix.
* ``gen_forni_dgp`` draws from a state-space factor model with i.i.d.
  idiosyncratic noise and no lag term, used to check behavior when the
  posited transition structure is absent.

Strength calibration: the relative signal strength between the factor
hyperplane and the lag term is controlled by a single scalar multiplier on
the loading matrix. Because the transition matrix is rescaled to a fixed
spectral radius after drawing, scaling its entry magnitudes cannot move
the realized strength ratio; the loading multiplier can, and admits a
closed form. Writing theta = w * theta0 and lag = w * m + nn for the
factor-dependent and noise-dependent parts of the lag term, the realized
ratio is

    ratio(w) = w^2 ||theta0||^2 / (w^2 ||m||^2 + 2 w <m, nn> + ||nn||^2)

and setting ratio(w) = target is a scalar quadratic solved exactly. Draws
for which the target exceeds the saturation limit ||theta0||^2 / ||m||^2
are redrawn.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import (
    DimensionError,
    NumericError,
    TimeSeriesPanel,
    companion_matrix,
    spectral_radius,
    split_blocks,
)

BURN_IN = 200
_MAX_DRAW_ATTEMPTS = 100
_MAX_CALIBRATION_ATTEMPTS = 20


class CalibrationError(RuntimeError):
    """Raised when no draw satisfies the strength-ratio target."""


@dataclass(frozen=True)
class SimulationSetting:
    """Full description of one synthetic benchmark configuration.

    strength_ratio is (factor, lag): (3, 2) asks the factor hyperplane to
    carry 1.5x the energy of the lag term. noise_df applies only when
    noise_law is "student_t"; noise_param is the decay of the "toeplitz"
    noise covariance.
    """

    name: str
    n_series: int
    n_obs: int
    n_factors: int
    factor_order: int = 1
    lag_order: int = 1
    row_density: float = 0.02
    sparsity: str = "exact"
    rho_transition: float = 0.7
    factor_rho_range: tuple = (0.6, 0.8)
    noise_law: str = "gaussian"
    noise_df: float = 4.0
    noise_structure: str = "diagonal"
    noise_param: float = 0.2
    strength_ratio: tuple = (3.0, 2.0)
    seed: int = 0

    def __post_init__(self):
        if self.n_series < 1 or self.n_obs < self.lag_order + 2:
            raise DimensionError("panel dimensions too small")
        if self.n_factors < 1 or self.factor_order < 1 or self.lag_order < 1:
            raise DimensionError("orders must be >= 1")
        if not 0.0 < self.rho_transition < 1.0:
            raise ValueError("transition spectral radius must be in (0, 1)")
        if not 0.0 < self.row_density <= 1.0:
            raise ValueError("row_density must be in (0, 1]")
        if round(self.row_density * self.n_series) < 1:
            raise ValueError("row_density too small: no entries per row")
        if self.sparsity not in ("exact", "weak"):
            raise ValueError(f"unknown sparsity kind {self.sparsity!r}")
        if self.noise_law not in ("gaussian", "student_t"):
            raise ValueError(f"unknown noise law {self.noise_law!r}")
        if self.noise_law == "student_t" and self.noise_df <= 2.0:
            raise ValueError("student_t needs df > 2 for finite covariance")
        if self.noise_structure not in ("diagonal", "toeplitz"):
            raise ValueError(
                f"unknown noise structure {self.noise_structure!r}")
        if not 0.0 <= self.noise_param < 1.0:
            raise ValueError("toeplitz decay must be in [0, 1)")
        lo, hi = self.factor_rho_range
        if not 0.0 < lo <= hi < 1.0:
            raise ValueError("factor_rho_range must be within (0, 1)")
        f_str, l_str = self.strength_ratio
        if f_str <= 0 or l_str <= 0:
            raise ValueError("strength_ratio parts must be positive")


# benchmark rows: (p, sparsity kind, strong entries per row, rho(B), K, q,
#                  noise structure, noise law, df, strength ratio)
_TABLE_SETTINGS = {
    "S0": (100, "exact", 2, 0.7, 2, 1, "diagonal", "gaussian", 4.0, (3, 2)),
    "S1": (100, "weak", 5, 0.7, 2, 1, "toeplitz", "gaussian", 4.0, (2, 1)),
    "S2": (300, "weak", 2, 0.7, 5, 1, "diagonal", "gaussian", 4.0, (2, 1)),
    "S3": (200, "exact", 2, 0.9, 5, 2, "diagonal", "gaussian", 4.0, (2, 3)),
    "S4": (200, "weak", 2, 0.7, 5, 4, "toeplitz", "gaussian", 4.0, (3, 2)),
    "S5": (100, "exact", 2, 0.7, 5, 1, "diagonal", "student_t", 4.0, (3, 2)),
    "S6": (200, "weak", 2, 0.7, 5, 1, "toeplitz", "student_t", 8.0, (1, 1)),
}

# state-space benchmark rows: (p, shock dimension, state dimension)
FORNI_TABLE_ROWS = ((100, 2, 4), (100, 4, 4), (200, 4, 6), (300, 6, 6))


@dataclass(frozen=True)
class ForniSetting:
    """Configuration of the state-space benchmark DGP (no lag term)."""

    name: str
    n_series: int
    dim_shock: int
    dim_state: int
    n_obs: int = 200
    seed: int = 0

    def __post_init__(self):
        if not 1 <= self.dim_shock <= self.dim_state <= self.n_series:
            raise DimensionError(
                "need 1 <= shock dim <= state dim <= series count")
        if self.n_obs < 3:
            raise DimensionError("n_obs too small")

    @property
    def n_factors(self) -> int:
        return self.dim_state

    @property
    def lag_order(self) -> int:
        return 1


def forni_setting(n_series: int, dim_shock: int, dim_state: int,
                  n_obs: int = 200, seed: int = 0) -> ForniSetting:
    """Preset for one state-space benchmark row."""
    return ForniSetting(
        name=f"forni_p{n_series}_u{dim_shock}_f{dim_state}",
        n_series=n_series, dim_shock=dim_shock, dim_state=dim_state,
        n_obs=n_obs, seed=seed)


def generate(setting):
    """Draw (panel, truth) from whichever DGP the setting describes."""
    if isinstance(setting, ForniSetting):
        rng = np.random.default_rng(setting.seed)
        return gen_forni_dgp(setting.n_series, setting.dim_shock,
                             setting.dim_state, setting.n_obs, rng)
    return gen_lagadj_dgp(setting)


def table_setting(name: str, seed: int = 0, n_obs: int = 200,
                  **overrides) -> SimulationSetting:
    """Preset benchmark setting by row name (S0 .. S6)."""
    if name not in _TABLE_SETTINGS:
        raise KeyError(f"unknown setting {name!r}; have "
                       f"{sorted(_TABLE_SETTINGS)}")
    (p, kind, per_row, rho, k, q, structure, law, df,
     ratio) = _TABLE_SETTINGS[name]
    params = dict(
        name=name, n_series=p, n_obs=n_obs, n_factors=k, factor_order=q,
        lag_order=1, row_density=per_row / p, sparsity=kind,
        rho_transition=rho, noise_law=law, noise_df=df,
        noise_structure=structure, noise_param=0.2,
        strength_ratio=(float(ratio[0]), float(ratio[1])), seed=seed,
    )
    params.update(overrides)
    return SimulationSetting(**params)


@dataclass(frozen=True)
class GroundTruth:
    """Everything the generator knows that an estimator must recover.

    strong_mask marks the planted (strong) support of b_true; weak_mask
    marks small nonzero entries that evaluation treats as zeros. For
    exactly-sparse draws weak_mask is all-False. factor_next is the factor
    state one step beyond the panel, used by oracle_next.
    """

    b_true: np.ndarray
    strong_mask: np.ndarray
    weak_mask: np.ndarray
    lambda_true: np.ndarray
    factor_path: np.ndarray
    factor_next: np.ndarray
    stacked_factors: np.ndarray
    theta_true: np.ndarray
    oracle_next: np.ndarray

    def __post_init__(self):
        b = np.asarray(self.b_true, dtype=np.float64)
        strong = np.asarray(self.strong_mask, dtype=bool)
        weak = np.asarray(self.weak_mask, dtype=bool)
        if strong.shape != b.shape or weak.shape != b.shape:
            raise DimensionError("masks must match b_true's shape")
        if np.any(strong & weak):
            raise ValueError("an entry cannot be both strong and weak")
        for name in ("lambda_true", "factor_path", "factor_next",
                     "stacked_factors", "theta_true", "oracle_next"):
            arr = np.asarray(getattr(self, name), dtype=np.float64)
            if not np.isfinite(arr).all():
                raise NumericError(f"non-finite values in {name}")
            object.__setattr__(self, name, arr)
        object.__setattr__(self, "b_true", b)
        object.__setattr__(self, "strong_mask", strong)
        object.__setattr__(self, "weak_mask", weak)


def gen_sparse_b(p: int, row_density: float, sparsity_kind: str,
                 m_b: float, rho_target: float, rng,
                 d: int = 1, return_mask: bool = False):
    """Sparse transition matrix with prescribed row support and spectral
    radius.

    Each row receives round(row_density * p) strong entries at uniformly
    random positions among its d*p stacked-lag coefficients, drawn from
    +/- Unif[m_b - 0.1, m_b + 0.1]. The weak kind fills the complement
    with Unif[-0.1 m_b, 0.1 m_b]. The draw is then rescaled so the
    companion spectral radius hits rho_target: a single scalar for d = 1,
    and the scalar's k-th power on lag block k for d > 1, either way
    moving every companion eigenvalue by the same factor.
    """
    if m_b <= 0.1:
        raise ValueError("m_b must exceed 0.1 to keep strong entries "
                         "sign-definite")
    if sparsity_kind not in ("exact", "weak"):
        raise ValueError(f"unknown sparsity kind {sparsity_kind!r}")
    if not 0.0 < row_density <= 1.0:
        raise ValueError("row_density must be in (0, 1]")
    n_strong = int(round(row_density * p))
    if n_strong < 1:
        raise ValueError("row_density too small: no entries per row")
    width = d * p
    for _ in range(_MAX_DRAW_ATTEMPTS):
        b = np.zeros((p, width))
        strong = np.zeros((p, width), dtype=bool)
        for i in range(p):
            cols = rng.choice(width, size=n_strong, replace=False)
            signs = rng.choice((-1.0, 1.0), size=n_strong)
            b[i, cols] = signs * rng.uniform(m_b - 0.1, m_b + 0.1, n_strong)
            strong[i, cols] = True
        if sparsity_kind == "weak":
            weak = ~strong
            b[weak] = rng.uniform(-0.1 * m_b, 0.1 * m_b,
                                  int(weak.sum()))
        else:
            weak = np.zeros_like(strong)
        rho0 = spectral_radius(companion_matrix(split_blocks(b, d)))
        if rho0 <= 0.0:
            continue
        s = rho_target / rho0
        for k in range(d):
            b[:, k * p:(k + 1) * p] *= s ** (k + 1)
        if return_mask:
            return b, strong, weak
        return b
    raise NumericError(
        f"transition draw produced zero spectral radius "
        f"{_MAX_DRAW_ATTEMPTS} times")


def gen_factor_path(k: int, q: int, t_len: int, rho_range, sigma_eta: float,
                    rng) -> np.ndarray:
    """Simulate t_len rows of a K-dimensional order-q autoregressive
    factor, after a discarded burn-in from a zero start.

    The coefficient blocks are drawn Unif[-1, 1] and rescaled (block k by
    the k-th power of one scalar, which scales every companion eigenvalue
    linearly) so the companion spectral radius equals a draw from
    rho_range.
    """
    if k < 1 or q < 1 or t_len < 1:
        raise DimensionError("k, q, t_len must all be >= 1")
    target = float(rng.uniform(*rho_range))
    for _ in range(_MAX_DRAW_ATTEMPTS):
        blocks = rng.uniform(-1.0, 1.0, size=(k, q * k))
        rho0 = spectral_radius(companion_matrix(split_blocks(blocks, q)))
        if rho0 > 0.0:
            break
    else:
        raise NumericError("factor coefficient draw degenerate")
    s = target / rho0
    for j in range(q):
        blocks[:, j * k:(j + 1) * k] *= s ** (j + 1)
    split = [blocks[:, j * k:(j + 1) * k] for j in range(q)]
    total = BURN_IN + t_len
    path = np.zeros((total + q, k))
    noise = sigma_eta * rng.standard_normal((total, k))
    for t in range(q, total + q):
        acc = noise[t - q]
        for j, phi in enumerate(split):
            acc = acc + phi @ path[t - 1 - j]
        path[t] = acc
    return path[q + BURN_IN:]


def gen_noise(t_len: int, p: int, structure: str, law: str, rng,
              toeplitz_decay: float = 0.2, df: float = 4.0) -> np.ndarray:
    """t_len i.i.d. noise rows with covariance Sigma.

    Sigma is the identity ("diagonal") or Sigma_ij = decay^|i-j|
    ("toeplitz"). The "student_t" law divides gaussian rows by a per-row
    chi-square factor and rescales by sqrt((df-2)/df) so the covariance
    still equals Sigma exactly.
    """
    if structure not in ("diagonal", "toeplitz"):
        raise ValueError(f"unknown noise structure {structure!r}")
    if law not in ("gaussian", "student_t"):
        raise ValueError(f"unknown noise law {law!r}")
    if not 0.0 <= toeplitz_decay < 1.0:
        raise ValueError("toeplitz decay must be in [0, 1)")
    g = rng.standard_normal((t_len, p))
    if structure == "toeplitz" and toeplitz_decay > 0.0:
        idx = np.arange(p)
        sigma = toeplitz_decay ** np.abs(np.subtract.outer(idx, idx))
        g = g @ np.linalg.cholesky(sigma).T
    if law == "student_t":
        if df <= 2.0:
            raise ValueError("student_t needs df > 2")
        scale = np.sqrt(rng.chisquare(df, size=t_len) / df)
        g = g / scale[:, None] * np.sqrt((df - 2.0) / df)
    return g


def _stack_factor_rows(f: np.ndarray, d: int, rows) -> np.ndarray:
    """Rows (f_t, f_{t-1}, .., f_{t-d}) for the requested t values."""
    return np.concatenate([f[rows - k] for k in range(d + 1)], axis=1)


def _lagadj_truth(b, strong, weak, lam_til, f, f_next, d,
                  omega, panel_values):
    p, k = lam_til.shape
    # loading over (f_t, f_{t-1}, ..., f_{t-d}): the lag blocks enter
    # negatively because the lag term re-adds them through B x_{t-1}
    blocks = [omega * lam_til]
    for j in range(d):
        bj = b[:, j * p:(j + 1) * p]
        blocks.append(-omega * (bj @ lam_til))
    lambda_true = np.concatenate(blocks, axis=1)
    n_rows = panel_values.shape[0]
    rows = np.arange(d, n_rows)
    stacked = _stack_factor_rows(f, d, rows)
    theta_true = stacked @ lambda_true.T
    # oracle: lag recursion on observed values plus the noiseless factor
    # contribution at the next step
    next_stack = np.concatenate(
        [f_next] + [f[n_rows - 1 - j] for j in range(d)])
    lag_vec = np.concatenate([panel_values[n_rows - 1 - j]
                              for j in range(d)])
    oracle = lambda_true @ next_stack + b @ lag_vec
    return GroundTruth(
        b_true=b, strong_mask=strong, weak_mask=weak,
        lambda_true=lambda_true, factor_path=f, factor_next=f_next,
        stacked_factors=stacked, theta_true=theta_true, oracle_next=oracle)


def gen_lagadj_dgp(setting: SimulationSetting, zero_transition: bool = False):
    """Draw one panel plus ground truth from the lag-adjusted factor DGP.

    Returns (TimeSeriesPanel, GroundTruth). The loading scale is
    calibrated in closed form to the setting's strength ratio (see module
    docstring); infeasible draws are retried, and persistent infeasibility
    raises CalibrationError. With zero_transition the lag term is dropped
    entirely (B = 0, pure static factor model) and no calibration runs.
    """
    rng = np.random.default_rng(setting.seed)
    p = setting.n_series
    d = setting.lag_order
    n_rows = setting.n_obs + d
    target = setting.strength_ratio[0] / setting.strength_ratio[1]

    for _ in range(_MAX_CALIBRATION_ATTEMPTS):
        if zero_transition:
            b = np.zeros((p, d * p))
            strong = np.zeros((p, d * p), dtype=bool)
            weak = np.zeros((p, d * p), dtype=bool)
        else:
            b, strong, weak = gen_sparse_b(
                p, setting.row_density, setting.sparsity, 0.5,
                setting.rho_transition, rng, d=d, return_mask=True)
        lam_til = (rng.choice((-1.0, 1.0), size=(p, setting.n_factors))
                   * rng.uniform(0.9, 1.1, size=(p, setting.n_factors)))
        f_full = gen_factor_path(
            setting.n_factors, setting.factor_order, n_rows + 1,
            setting.factor_rho_range, 1.0, rng)
        f, f_next = f_full[:n_rows], f_full[n_rows]
        eps = gen_noise(BURN_IN + n_rows, p, setting.noise_structure,
                        setting.noise_law, rng,
                        toeplitz_decay=setting.noise_param,
                        df=setting.noise_df)
        u = np.zeros((BURN_IN + n_rows, p))
        if zero_transition:
            u = eps
        else:
            for t in range(BURN_IN + n_rows):
                acc = eps[t]
                for j in range(d):
                    if t - 1 - j >= 0:
                        acc = acc + b[:, j * p:(j + 1) * p] @ u[t - 1 - j]
                u[t] = acc
        u = u[BURN_IN:]

        if zero_transition:
            omega = 1.0
        else:
            # energy decomposition over the response rows (see module
            # docstring): theta scales with omega, the lag term is affine
            rows = np.arange(d, n_rows)
            theta0 = f[rows] @ lam_til.T
            m = np.zeros((rows.size, p))
            nn = np.zeros((rows.size, p))
            for j in range(d):
                bj = b[:, j * p:(j + 1) * p]
                theta0 = theta0 - f[rows - 1 - j] @ (bj @ lam_til).T
                m = m + f[rows - 1 - j] @ (bj @ lam_til).T
                nn = nn + u[rows - 1 - j] @ bj.T
            a_coef = float(np.sum(theta0 * theta0))
            alpha = float(np.sum(m * m))
            beta = float(np.sum(m * nn))
            gamma = float(np.sum(nn * nn))
            qa = a_coef - target * alpha
            disc = (target * beta) ** 2 + qa * target * gamma
            if qa <= 0.0 or disc < 0.0:
                continue
            omega = (target * beta + np.sqrt(disc)) / qa
            if not np.isfinite(omega) or omega <= 0.0:
                continue

        x = omega * (f @ lam_til.T) + u
        panel = TimeSeriesPanel(x, [f"series_{j}" for j in range(p)])
        truth = _lagadj_truth(b, strong, weak, lam_til, f, f_next,
                              d, omega, x)

        if not zero_transition:
            rows = np.arange(d, n_rows)
            lag_term = np.zeros((rows.size, p))
            for j in range(d):
                bj = b[:, j * p:(j + 1) * p]
                lag_term = lag_term + x[rows - 1 - j] @ bj.T
            lag_energy = float(np.sum(lag_term * lag_term))
            factor_energy = float(np.sum(truth.theta_true ** 2))
            realized = factor_energy / lag_energy
            if abs(realized - target) > 0.15 * target:
                continue
        return panel, truth
    raise CalibrationError(
        f"no draw met the strength ratio {setting.strength_ratio} in "
        f"{_MAX_CALIBRATION_ATTEMPTS} attempts")


def gen_forni_dgp(p: int, dim_shock: int, dim_state: int, t_len: int,
                  rng) -> tuple:
    """Draw one panel plus ground truth from the state-space DGP.

    Observation rows are Lambda F_t plus standard normal noise; the state
    follows a first-order recursion driven by dim_shock structural shocks,
    its coefficient matrix rescaled so its spectral norm (largest singular
    value) hits a Unif[0.4, 0.9] draw. The truth carries b_true = 0: this
    DGP has no lag term.
    """
    if not 1 <= dim_shock <= dim_state <= p:
        raise DimensionError(
            "need 1 <= shock dim <= state dim <= series count")
    if t_len < 3:
        raise DimensionError("t_len too small")
    lam = rng.uniform(-1.0, 1.0, size=(p, dim_state))
    k_mat = rng.uniform(-1.0, 1.0, size=(dim_state, dim_shock))
    d_mat = rng.uniform(-1.0, 1.0, size=(dim_state, dim_state))
    norm_target = float(rng.uniform(0.4, 0.9))
    d_mat *= norm_target / np.linalg.norm(d_mat, 2)

    n_rows = t_len + 1
    total = BURN_IN + n_rows
    shocks = rng.standard_normal((total + 1, dim_shock))
    states = np.zeros((total + 1, dim_state))
    for t in range(1, total + 1):
        states[t] = d_mat @ states[t - 1] + k_mat @ shocks[t]
    f = states[BURN_IN:total]
    f_next = states[total]
    xi = rng.standard_normal((n_rows, p))
    x = f @ lam.T + xi
    panel = TimeSeriesPanel(x, [f"series_{j}" for j in range(p)])
    truth = GroundTruth(
        b_true=np.zeros((p, p)),
        strong_mask=np.zeros((p, p), dtype=bool),
        weak_mask=np.zeros((p, p), dtype=bool),
        lambda_true=lam,
        factor_path=f,
        factor_next=f_next,
        stacked_factors=f[1:],
        theta_true=f[1:] @ lam.T,
        oracle_next=lam @ f_next,
    )
    return panel, truth
