"""Approximate factor models with sparse vector-autoregressive errors.

Joint estimation of a low-rank common component and a sparse transition
matrix by alternating convex minimization, with information-criterion
tuning, subspace-projection forecasting, synthetic benchmarks, and a
principal-components baseline.
"""

from .core import (
    DimensionError,
    LagDesign,
    ModelFit,
    NumericError,
    RegularizationConfig,
    TimeSeriesPanel,
    build_lag_design,
    companion_matrix,
    spectral_radius,
    split_blocks,
)
from .estimator import (
    box_bound,
    fit_box,
    fit_empirical,
    fit_lagrangian,
    objective_empirical,
    objective_lagrangian,
)
from .forecast import ForecastResult, filtered_process, forecast_h, sample_cross_cov
from .baselines import SwRankReport, sw_forecast, sw_pc_fit, sw_rank_search
from .evaluate import (
    BenchmarkError,
    BenchmarkResult,
    EvaluationReport,
    benchmark_grid,
    common_space_error,
    evaluate_fit,
    forecast_error_vs_oracle,
    projection_error,
    relative_frobenius,
    run_benchmark,
    sin_theta_check,
    support_metrics,
)
from .simulate import (
    CalibrationError,
    ForniSetting,
    forni_setting,
    generate,
    FORNI_TABLE_ROWS,
    GroundTruth,
    SimulationSetting,
    gen_factor_path,
    gen_forni_dgp,
    gen_lagadj_dgp,
    gen_noise,
    gen_sparse_b,
    table_setting,
)
from .solvers import (
    LassoProblem,
    LassoSolution,
    lasso_coordinate_descent,
    numerical_rank,
    project_box,
    soft_threshold,
    svt_hard,
    svt_soft,
)
from .tuning import (
    DegeneratePerfectFit,
    TuningError,
    TuningGrid,
    TuningResult,
    default_grid,
    pic,
    pic_star,
    select_two_step,
)
from .cli import (
    IngestError,
    RollingConfig,
    RollingRow,
    ingest_csv,
    main,
    roll_windows,
    write_panel_csv,
)

__version__ = "0.1.0"

__all__ = [
    "BenchmarkError",
    "BenchmarkResult",
    "CalibrationError",
    "DegeneratePerfectFit",
    "DimensionError",
    "EvaluationReport",
    "FORNI_TABLE_ROWS",
    "ForniSetting",
    "GroundTruth",
    "IngestError",
    "RollingConfig",
    "RollingRow",
    "SimulationSetting",
    "SwRankReport",
    "ForecastResult",
    "LagDesign",
    "LassoProblem",
    "LassoSolution",
    "ModelFit",
    "NumericError",
    "RegularizationConfig",
    "TimeSeriesPanel",
    "TuningError",
    "TuningGrid",
    "TuningResult",
    "box_bound",
    "build_lag_design",
    "companion_matrix",
    "default_grid",
    "filtered_process",
    "fit_box",
    "fit_empirical",
    "benchmark_grid",
    "common_space_error",
    "evaluate_fit",
    "fit_lagrangian",
    "forecast_error_vs_oracle",
    "forecast_h",
    "forni_setting",
    "gen_factor_path",
    "generate",
    "gen_forni_dgp",
    "gen_lagadj_dgp",
    "gen_noise",
    "gen_sparse_b",
    "ingest_csv",
    "lasso_coordinate_descent",
    "main",
    "numerical_rank",
    "objective_empirical",
    "objective_lagrangian",
    "pic",
    "pic_star",
    "project_box",
    "sample_cross_cov",
    "select_two_step",
    "soft_threshold",
    "spectral_radius",
    "split_blocks",
    "projection_error",
    "relative_frobenius",
    "roll_windows",
    "run_benchmark",
    "sin_theta_check",
    "support_metrics",
    "svt_hard",
    "svt_soft",
    "sw_forecast",
    "sw_pc_fit",
    "sw_rank_search",
    "table_setting",
    "write_panel_csv",
    "__version__",
]
