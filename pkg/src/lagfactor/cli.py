"""Command-line surface: ingestion, fitting, tuning, forecasting,
simulation, benchmarking, and rolling-window analysis.

Artifacts are plain CSV and JSON files in --out-dir. Every file re-parses
into the structure that produced it; floats are written in shortest
round-trip form. Exit codes: 0 success, 2 invalid input or configuration,
3 numeric failure, 4 I/O failure. On failure a machine-readable error
object is printed to stderr.

The config file (--config) is INI-style with one section per subcommand;
keys use the long flag names with underscores (e.g. lambda_b). Explicit
command-line flags override config values.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import dataclasses
import json
import os
import sys
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .core import (
    DimensionError,
    ModelFit,
    NumericError,
    RegularizationConfig,
    TimeSeriesPanel,
    build_lag_design,
)
from .estimator import fit_empirical, fit_lagrangian
from .evaluate import BenchmarkError, benchmark_grid, run_benchmark
from .forecast import ForecastResult, forecast_h
from .simulate import (
    CalibrationError,
    FORNI_TABLE_ROWS,
    forni_setting,
    generate,
    table_setting,
)
from .tuning import TuningError, TuningGrid, default_grid, select_two_step

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_NUMERIC = 3
EXIT_IO = 4

_R2_SLACK = 1e-10


class IngestError(ValueError):
    """Malformed input data, with a row/column location in the message."""


def _fmt(x: float) -> str:
    return repr(float(x))


def ingest_csv(path: str) -> TimeSeriesPanel:
    """Read a panel from CSV: header row, optional leading date/time
    column, decimal floats, rows in time order."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise IngestError("empty file: no header row") from None
        header = [h.strip() for h in header]
        has_time = bool(header) and header[0].lower() in ("date", "time")
        ids = header[1:] if has_time else header
        if not ids:
            raise IngestError("header row has no series columns")
        dupes = {c for c in ids if ids.count(c) > 1}
        if dupes:
            raise IngestError(
                f"duplicate header column(s): {sorted(dupes)}")
        rows, stamps = [], []
        for i, cells in enumerate(reader, start=1):
            if len(cells) != len(header):
                raise IngestError(
                    f"row {i} has {len(cells)} cells, expected "
                    f"{len(header)}")
            body = cells[1:] if has_time else cells
            if has_time:
                stamps.append(cells[0].strip())
            parsed = []
            for name, cell in zip(ids, body):
                try:
                    parsed.append(float(cell))
                except ValueError:
                    raise IngestError(
                        f"non-numeric value {cell!r} at row {i}, "
                        f"column {name!r}") from None
            rows.append(parsed)
    if len(rows) < 2:
        raise IngestError(f"need at least 2 data rows, got {len(rows)}")
    return TimeSeriesPanel(np.array(rows, dtype=float), ids,
                           tuple(stamps) if has_time else None)


def write_panel_csv(path: str, panel: TimeSeriesPanel) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        if panel.timestamps is not None:
            writer.writerow(["date", *panel.column_ids])
            for stamp, row in zip(panel.timestamps, panel.values):
                writer.writerow([stamp, *(_fmt(v) for v in row)])
        else:
            writer.writerow(list(panel.column_ids))
            for row in panel.values:
                writer.writerow([_fmt(v) for v in row])


def fit_to_dict(fit: ModelFit, config_echo: dict) -> dict:
    """JSON-ready view of a fit: sparse transition triplets plus the
    singular system of the hyperplane."""
    i_idx, j_idx = np.nonzero(fit.b_hat)
    return {
        "b_triplets": [[int(i), int(j), float(fit.b_hat[i, j])]
                       for i, j in zip(i_idx, j_idx)],
        "b_shape": list(fit.b_hat.shape),
        "singular_values": [float(v) for v in fit.singular_values],
        "right_basis": [[float(v) for v in row]
                        for row in fit.right_basis],
        "rank": int(fit.rank),
        "objective_trace": [float(v) for v in fit.objective_trace],
        "converged": bool(fit.converged),
        "iterations": int(fit.iterations),
        "config_echo": config_echo,
    }


def b_hat_from_dict(payload: dict) -> np.ndarray:
    """Reassemble the dense transition matrix from a fit JSON object."""
    b = np.zeros(tuple(payload["b_shape"]))
    for i, j, v in payload["b_triplets"]:
        b[i, j] = v
    return b


def forecast_to_rows(result: ForecastResult, column_ids) -> list:
    rows = [["horizon", "kind", *column_ids]]
    for i in range(result.horizon):
        rows.append([i + 1, "x_hat", *(_fmt(v) for v in result.x_hat[i])])
        rows.append([i + 1, "z_hat", *(_fmt(v) for v in result.z_hat[i])])
    return rows


@dataclass(frozen=True)
class RollingConfig:
    """Rolling-window analysis parameters."""

    window_length: int
    stride: int = 1
    d: int = 1
    criterion: str = "pic_star"
    grid: Optional[TuningGrid] = None

    def __post_init__(self):
        if self.window_length < self.d + 2:
            raise DimensionError(
                f"window_length must be >= d+2 = {self.d + 2}")
        if self.stride < 1:
            raise DimensionError("stride must be >= 1")
        if self.criterion not in ("pic", "pic_star"):
            raise ValueError(f"unknown criterion {self.criterion!r}")


@dataclass(frozen=True)
class RollingRow:
    """One window's summary: factor count, transition density, fit R2.

    Metric fields are None for windows that were flagged and skipped
    (constant columns). flags records flooring and skip events.
    """

    window_start: int
    midpoint_label: str
    k_hat: Optional[int]
    b_density: Optional[float]
    r2_total: Optional[float]
    r2_factor: Optional[float]
    flags: tuple = ()

    def __post_init__(self):
        for name in ("b_density", "r2_total", "r2_factor"):
            v = getattr(self, name)
            if v is not None and not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must be in [0, 1], got {v}")


def _window_row(panel: TimeSeriesPanel, start: int,
                cfg: RollingConfig) -> RollingRow:
    stop = start + cfg.window_length
    mid = start + cfg.window_length // 2
    label = (panel.timestamps[mid] if panel.timestamps is not None
             else str(mid))
    values = panel.values[start:stop]
    flags = []
    if np.any(values.max(axis=0) == values.min(axis=0)):
        return RollingRow(window_start=start, midpoint_label=label,
                          k_hat=None, b_density=None, r2_total=None,
                          r2_factor=None, flags=("constant_column_skipped",))
    window = TimeSeriesPanel(values, panel.column_ids)
    design = build_lag_design(window, cfg.d)
    grid = cfg.grid if cfg.grid is not None else benchmark_grid(design)
    tune = select_two_step(design, grid=grid, criterion=cfg.criterion)
    fit = fit_empirical(design, tune.lambda_opt, tune.rank_opt)
    x = design.response
    total_energy = float(np.sum(x * x))
    resid_full = x - fit.theta_hat - design.predictors @ fit.b_hat.T
    resid_factor = x - fit.theta_hat
    full_energy = float(np.sum(resid_full * resid_full))
    factor_energy = float(np.sum(resid_factor * resid_factor))
    if full_energy > factor_energy * (1.0 + _R2_SLACK) + _R2_SLACK:
        raise NumericError(
            "lag term increased the residual against the fitted "
            "transition matrix")
    r2_total = 1.0 - full_energy / total_energy
    r2_factor = 1.0 - factor_energy / total_energy
    if r2_total < 0.0:
        r2_total = 0.0
        flags.append("r2_total_floored")
    if r2_factor < 0.0:
        r2_factor = 0.0
        flags.append("r2_factor_floored")
    return RollingRow(
        window_start=start,
        midpoint_label=label,
        k_hat=tune.k_hat,
        b_density=float(np.count_nonzero(fit.b_hat) / fit.b_hat.size),
        r2_total=r2_total,
        r2_factor=r2_factor,
        flags=tuple(flags),
    )


def roll_windows(panel: TimeSeriesPanel, cfg: RollingConfig) -> list:
    """Tune and fit on each rolling window; one row per window.

    Produces exactly floor((n_rows - window_length)/stride) + 1 rows,
    ordered by window start.
    """
    if panel.n_rows < cfg.window_length:
        raise DimensionError(
            f"panel has {panel.n_rows} rows, window needs "
            f"{cfg.window_length}")
    starts = range(0, panel.n_rows - cfg.window_length + 1, cfg.stride)
    return [_window_row(panel, s, cfg) for s in starts]


def rolling_to_rows(rows) -> list:
    out = [["window_start", "midpoint", "k_hat", "b_density", "r2_total",
            "r2_factor", "flags"]]
    for r in rows:
        out.append([
            r.window_start,
            r.midpoint_label,
            "" if r.k_hat is None else r.k_hat,
            "" if r.b_density is None else _fmt(r.b_density),
            "" if r.r2_total is None else _fmt(r.r2_total),
            "" if r.r2_factor is None else _fmt(r.r2_factor),
            ";".join(r.flags),
        ])
    return out


def _write_csv(path: str, rows) -> None:
    with open(path, "w", newline="") as fh:
        csv.writer(fh).writerows(rows)


def _write_json(path: str, payload: dict) -> None:
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _resolve_setting(name: Optional[str], seed: int):
    if name is None:
        raise ValueError("--setting is required")
    if name.startswith("forni"):
        for p, du, df in FORNI_TABLE_ROWS:
            built = forni_setting(p, du, df, seed=seed)
            if built.name == name:
                return built
        raise ValueError(
            f"unknown setting {name!r}; forni settings: "
            f"{[forni_setting(*row).name for row in FORNI_TABLE_ROWS]}")
    return table_setting(name, seed=seed)


def _fit_from_args(design, args) -> tuple:
    """Dispatch on the penalty flags: nuclear-norm route needs
    lambda_theta, rank-constrained route needs rank."""
    if (args.lambda_theta is None) == (args.rank is None):
        raise ValueError(
            "exactly one of --lambda-theta and --rank is required")
    lambda_b = args.lambda_b if args.lambda_b is not None else 0.0
    if args.rank is not None:
        bound = min(design.t_eff, design.n_series)
        if not 1 <= args.rank <= bound:
            raise DimensionError(
                f"rank must be in [1, {bound}], got {args.rank}")
        fit = fit_empirical(design, lambda_b, args.rank)
        echo = {"mode": "rank", "lambda_b": lambda_b, "rank": args.rank,
                "d": design.d}
    else:
        cfg = RegularizationConfig(lambda_b=lambda_b,
                                   lambda_theta=args.lambda_theta,
                                   d=design.d)
        fit = fit_lagrangian(design, cfg)
        echo = {"mode": "nuclear", "lambda_b": lambda_b,
                "lambda_theta": args.lambda_theta, "d": design.d}
    return fit, echo


def _load_panel(args) -> TimeSeriesPanel:
    if args.input is None:
        raise ValueError("--input is required")
    panel = ingest_csv(args.input)
    if getattr(args, "center", False):
        centered = panel.values - panel.values.mean(axis=0)
        panel = TimeSeriesPanel(centered, panel.column_ids,
                                panel.timestamps)
    return panel


def cmd_fit(args) -> int:
    panel = _load_panel(args)
    design = build_lag_design(panel, args.d)
    fit, echo = _fit_from_args(design, args)
    echo["input"] = args.input
    echo["centered"] = bool(getattr(args, "center", False))
    _write_json(os.path.join(args.out_dir, "fit.json"),
                fit_to_dict(fit, echo))
    return EXIT_OK


def cmd_tune(args) -> int:
    panel = _load_panel(args)
    design = build_lag_design(panel, args.d)
    result = select_two_step(design, grid=default_grid(design),
                             criterion=args.criterion)
    table_rows = [["stage", "lambda_b", "rank", "criterion"]]
    for (stage, lam, r), value in sorted(result.criterion_table.items()):
        table_rows.append([stage, _fmt(lam), r, _fmt(value)])
    _write_csv(os.path.join(args.out_dir, "criterion_table.csv"),
               table_rows)
    _write_json(os.path.join(args.out_dir, "tuning.json"), {
        "lambda_opt": result.lambda_opt,
        "rank_opt": result.rank_opt,
        "k_hat": result.k_hat,
        "step1_lambda": result.step1_lambda,
        "step1_rank": result.step1_rank,
        "criterion": result.criterion,
        "d": result.d,
        "rank_clamped": result.rank_clamped,
    })
    return EXIT_OK


def cmd_forecast(args) -> int:
    panel = _load_panel(args)
    design = build_lag_design(panel, args.d)
    fit, echo = _fit_from_args(design, args)
    result = forecast_h(panel, fit, args.horizon)
    _write_csv(os.path.join(args.out_dir, "forecast.csv"),
               forecast_to_rows(result, panel.column_ids))
    echo["horizon"] = args.horizon
    _write_json(os.path.join(args.out_dir, "forecast_meta.json"), {
        "config_echo": echo, "gram_ridged": result.gram_ridged})
    return EXIT_OK


def cmd_simulate(args) -> int:
    setting = _resolve_setting(args.setting, args.seed)
    panel, truth = generate(setting)
    write_panel_csv(os.path.join(args.out_dir, "panel.csv"), panel)
    i_idx, j_idx = np.nonzero(truth.b_true)
    _write_json(os.path.join(args.out_dir, "truth.json"), {
        "setting": dataclasses.asdict(setting),
        "b_triplets": [[int(i), int(j), float(truth.b_true[i, j])]
                       for i, j in zip(i_idx, j_idx)],
        "b_shape": list(truth.b_true.shape),
        "theta_rank": int(np.linalg.matrix_rank(truth.theta_true)),
        "oracle_next": [float(v) for v in truth.oracle_next],
    })
    return EXIT_OK


def cmd_bench(args) -> int:
    setting = _resolve_setting(args.setting, args.seed)
    result = run_benchmark(setting, args.reps, criterion=args.criterion)
    rows = [["method", "rep", "sen", "spc", "rerr_b", "rerr_theta",
             "projerr_theta", "rerr_common", "forecast_err", "k_hat",
             "b_density"]]
    for method in result.methods:
        for r in result.reports[method]:
            rows.append([
                method, r.rep, _fmt(r.sen), _fmt(r.spc),
                "" if r.rerr_b is None else _fmt(r.rerr_b),
                _fmt(r.rerr_theta),
                "" if r.projerr_theta is None else _fmt(r.projerr_theta),
                _fmt(r.rerr_common), _fmt(r.forecast_err), r.k_hat,
                _fmt(r.b_density),
            ])
    _write_csv(os.path.join(args.out_dir, "bench_reports.csv"), rows)
    _write_json(os.path.join(args.out_dir, "bench_summary.json"), {
        "setting": result.setting_name,
        "n_reps": result.n_reps,
        "summary": result.summary(),
    })
    return EXIT_OK


def cmd_rolling(args) -> int:
    panel = _load_panel(args)
    if args.window is None:
        raise ValueError("--window is required")
    cfg = RollingConfig(window_length=args.window, stride=args.stride,
                        d=args.d, criterion=args.criterion)
    rows = roll_windows(panel, cfg)
    _write_csv(os.path.join(args.out_dir, "rolling.csv"),
               rolling_to_rows(rows))
    return EXIT_OK


_COMMANDS = {
    "fit": cmd_fit,
    "tune": cmd_tune,
    "forecast": cmd_forecast,
    "simulate": cmd_simulate,
    "bench": cmd_bench,
    "rolling": cmd_rolling,
}

def _parse_bool(raw: str) -> bool:
    lowered = raw.strip().lower()
    if lowered in ("1", "true", "yes", "on"):
        return True
    if lowered in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {raw!r}")


_CONFIG_KEYS = {
    "input": str, "seed": int, "reps": int, "setting": str,
    "lambda_b": float, "lambda_theta": float, "rank": int, "d": int,
    "horizon": int, "window": int, "stride": int, "criterion": str,
    "out_dir": str, "threads": int, "center": _parse_bool,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lagfactor",
        description="Factor models with lag-adjusted idiosyncratic "
                    "dynamics: fit, tune, forecast, simulate, benchmark, "
                    "rolling analysis.")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, **flags):
        p = sub.add_parser(name)
        p.add_argument("--config", default=None)
        p.add_argument("--out-dir", dest="out_dir", default=None)
        p.add_argument("--threads", type=int, default=None)
        for flag, kwargs in flags.items():
            p.add_argument(flag, **kwargs)
        return p

    num = {"type": float, "default": None}
    intf = {"type": int, "default": None}
    add("fit", **{"--input": {"default": None},
                  "--d": intf, "--lambda-b": dict(num, dest="lambda_b"),
                  "--lambda-theta": dict(num, dest="lambda_theta"),
                  "--rank": intf,
                  "--center": {"action": "store_const", "const": True,
                               "default": None}})
    add("tune", **{"--input": {"default": None}, "--d": intf,
                   "--criterion": {"default": None},
                   "--center": {"action": "store_const", "const": True,
                               "default": None}})
    add("forecast", **{"--input": {"default": None}, "--d": intf,
                       "--lambda-b": dict(num, dest="lambda_b"),
                       "--lambda-theta": dict(num, dest="lambda_theta"),
                       "--rank": intf, "--horizon": intf,
                       "--center": {"action": "store_const", "const": True,
                               "default": None}})
    add("simulate", **{"--setting": {"default": None}, "--seed": intf})
    add("bench", **{"--setting": {"default": None}, "--seed": intf,
                    "--reps": intf, "--criterion": {"default": None}})
    add("rolling", **{"--input": {"default": None}, "--d": intf,
                      "--window": intf, "--stride": intf,
                      "--criterion": {"default": None},
                      "--center": {"action": "store_const", "const": True,
                               "default": None}})
    return parser


_DEFAULTS = {"d": 1, "seed": 0, "reps": 20, "horizon": 1, "stride": 1,
             "criterion": None, "out_dir": "."}


def _apply_config(args: argparse.Namespace) -> None:
    """Fill unset flags from the config file section, then defaults.

    Per-command criterion defaults differ: tuning and benchmarking use
    the residual-scale criterion, rolling uses its log-scale variant.
    """
    if args.config is not None:
        parser = configparser.ConfigParser()
        read = parser.read(args.config)
        if not read:
            raise OSError(f"config file not found: {args.config}")
        if parser.has_section(args.command):
            for key, raw in parser.items(args.command):
                if key not in _CONFIG_KEYS:
                    raise ValueError(
                        f"unknown config key {key!r} in section "
                        f"[{args.command}]")
                if getattr(args, key, None) is None:
                    setattr(args, key, _CONFIG_KEYS[key](raw))
    for key, value in _DEFAULTS.items():
        if getattr(args, key, "missing") is None:
            setattr(args, key, value)
    if getattr(args, "criterion", "missing") is None:
        args.criterion = ("pic_star" if args.command == "rolling"
                          else "pic")


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        _apply_config(args)
        if args.threads is not None:
            if args.threads < 1:
                raise ValueError("--threads must be >= 1")
            import numba

            numba.set_num_threads(args.threads)
        os.makedirs(args.out_dir, exist_ok=True)
        return _COMMANDS[args.command](args)
    except (OSError, IngestError) as exc:
        _emit_error(exc, EXIT_IO if isinstance(exc, OSError)
                    else EXIT_VALIDATION)
        return EXIT_IO if isinstance(exc, OSError) else EXIT_VALIDATION
    except (NumericError, TuningError, CalibrationError, BenchmarkError,
            np.linalg.LinAlgError) as exc:
        _emit_error(exc, EXIT_NUMERIC)
        return EXIT_NUMERIC
    except (ValueError, KeyError) as exc:
        _emit_error(exc, EXIT_VALIDATION)
        return EXIT_VALIDATION


def _emit_error(exc: Exception, code: int) -> None:
    payload = {"error": type(exc).__name__, "message": str(exc),
               "exit_code": code}
    print(json.dumps(payload), file=sys.stderr)


if __name__ == "__main__":
    sys.exit(main())
