"""Tests for information-criterion tuning and the two-step lattice search."""

import math

import numpy as np
import pytest

from lagfactor.core import ModelFit, TimeSeriesPanel, build_lag_design
from lagfactor.estimator import fit_empirical
from lagfactor.tuning import (
    DegeneratePerfectFit,
    TuningError,
    TuningGrid,
    default_grid,
    pic,
    pic_star,
    select_two_step,
)


def make_design(x, d=1):
    panel = TimeSeriesPanel(x, [f"s{j}" for j in range(x.shape[1])])
    return build_lag_design(panel, d)


def make_fit(design, b_hat, theta_hat):
    """Wrap raw (B, Theta) matrices in a ModelFit for criterion evaluation."""
    u, s, vt = np.linalg.svd(theta_hat, full_matrices=False)
    rank = int(np.sum(s > 1e-12))
    return ModelFit(
        b_hat=np.asarray(b_hat, dtype=np.float64),
        theta_hat=np.asarray(theta_hat, dtype=np.float64),
        singular_values=s[:rank],
        right_basis=vt[:rank].T,
        rank=rank,
        objective_trace=(0.0,),
        converged=True,
        iterations=1,
    )


def fit_with_residual(design, resid, n_nonzero_b):
    """Build a fit whose residual equals `resid` and whose B has the
    requested support size."""
    n, p = design.response.shape
    b = np.zeros((p, design.predictors.shape[1]))
    flat = b.ravel()
    flat[:n_nonzero_b] = 0.5
    b = flat.reshape(b.shape)
    theta = design.response - design.predictors @ b.T - resid
    return make_fit(design, b, theta)


class TestPic:
    def test_arithmetic_example(self):
        # t_eff = 4, p = 2, all-ones residual, three nonzero B entries,
        # r = 1. sigma2 = 1 so the criterion is 1 plus the raw penalty.
        rng = np.random.default_rng(0)
        design = make_design(rng.standard_normal((5, 2)))
        assert design.t_eff == 4
        fit = fit_with_residual(design, np.ones((4, 2)), 3)
        got = pic(design, fit, lambda_b=0.1, r=1)
        expected = 1.0 + (math.log(4) / 8) * 3 + 1 * (6 / 8) * math.log(8)
        assert got == pytest.approx(expected, rel=1e-12)

    def test_zero_fit_reduces_to_response_energy(self):
        rng = np.random.default_rng(1)
        design = make_design(rng.standard_normal((7, 3)))
        n, p = design.response.shape
        fit = make_fit(design, np.zeros((p, p)), np.zeros((n, p)))
        for r in (1, 2, 5):
            got = pic(design, fit, lambda_b=0.0, r=r)
            sigma2 = np.sum(design.response**2) / (n * p)
            pen = r * (n + p) / (n * p) * math.log(n * p)
            assert got == pytest.approx(sigma2 * (1.0 + pen), rel=1e-12)

    def test_perfect_fit_is_zero(self):
        rng = np.random.default_rng(2)
        design = make_design(rng.standard_normal((6, 3)))
        p = design.n_series
        # theta = response bitwise, B = 0: residual is exactly zero
        fit = make_fit(design, np.zeros((p, p)), design.response.copy())
        assert pic(design, fit, lambda_b=0.3, r=2) == 0.0
        # with active B the cancellation leaves only rounding noise, and
        # the multiplicative penalty cannot resurrect it
        fit2 = fit_with_residual(design, np.zeros_like(design.response), 4)
        assert pic(design, fit2, lambda_b=0.3, r=2) == pytest.approx(
            0.0, abs=1e-20)

    def test_penalty_decomposition_oracle(self):
        rng = np.random.default_rng(3)
        design = make_design(rng.standard_normal((9, 4)))
        fit = fit_empirical(design, 0.05, 2)
        n, p = design.response.shape
        resid = (design.response - fit.theta_hat
                 - design.predictors @ fit.b_hat.T)
        sigma2 = np.sum(resid**2) / (n * p)
        nnz = np.count_nonzero(fit.b_hat)
        pen = (math.log(n) / (n * p)) * nnz + 2 * (n + p) / (n * p) * math.log(n * p)
        assert pic(design, fit, 0.05, 2) == pytest.approx(
            sigma2 * (1.0 + pen), rel=1e-12)

    def test_column_permutation_invariance(self):
        rng = np.random.default_rng(4)
        x = rng.standard_normal((12, 5))
        design = make_design(x)
        fit = fit_empirical(design, 0.08, 2)
        perm = rng.permutation(5)
        design_p = make_design(x[:, perm])
        fit_p = make_fit(design_p, fit.b_hat[np.ix_(perm, perm)],
                         fit.theta_hat[:, perm])
        a = pic(design, fit, 0.08, 2)
        b = pic(design_p, fit_p, 0.08, 2)
        assert a == pytest.approx(b, rel=1e-13)


class TestPicStar:
    def test_unit_sigma_zero_support_is_zero(self):
        rng = np.random.default_rng(5)
        design = make_design(rng.standard_normal((5, 2)))
        fit = fit_with_residual(design, np.ones((4, 2)), 0)
        # r = 0 zeroes the rank penalty; log sigma2 = log 1 = 0.
        assert pic_star(design, fit, r=0) == pytest.approx(0.0, abs=1e-14)

    def test_doubling_sigma2_adds_log2(self):
        rng = np.random.default_rng(6)
        design = make_design(rng.standard_normal((8, 3)))
        resid = rng.standard_normal(design.response.shape)
        fit1 = fit_with_residual(design, resid, 2)
        fit2 = fit_with_residual(design, math.sqrt(2.0) * resid, 2)
        v1 = pic_star(design, fit1, r=1)
        v2 = pic_star(design, fit2, r=1)
        assert v2 - v1 == pytest.approx(math.log(2.0), rel=1e-12)

    def test_small_instance_arithmetic(self):
        rng = np.random.default_rng(7)
        design = make_design(rng.standard_normal((5, 2)))
        resid = np.full((4, 2), 0.5)
        fit = fit_with_residual(design, resid, 3)
        sigma2 = 0.25
        expected = (math.log(sigma2) + (math.log(4) / 8) * 3
                    + 2 * (6 / 8) * math.log(8))
        assert pic_star(design, fit, r=2) == pytest.approx(expected, rel=1e-12)

    def test_zero_residual_raises(self):
        rng = np.random.default_rng(8)
        design = make_design(rng.standard_normal((6, 3)))
        p = design.n_series
        fit = make_fit(design, np.zeros((p, p)), design.response.copy())
        with pytest.raises(DegeneratePerfectFit):
            pic_star(design, fit, r=1)


class TestGrid:
    def test_default_grid_shape(self):
        rng = np.random.default_rng(9)
        design = make_design(rng.standard_normal((41, 8)))
        grid = default_grid(design)
        lam_max = np.max(np.abs(
            design.predictors.T @ design.response / design.t_eff))
        assert len(grid.lambda_values) == 20
        assert grid.lambda_values == tuple(sorted(grid.lambda_values))
        assert grid.lambda_values[-1] == pytest.approx(lam_max, rel=1e-12)
        assert grid.lambda_values[0] == pytest.approx(0.01 * lam_max, rel=1e-12)
        assert grid.rank_values == tuple(range(1, 5))  # min(40, 8) // 2

    def test_values_sorted_ascending(self):
        grid = TuningGrid((3.0, 1.0, 2.0), (5, 1, 3))
        assert grid.lambda_values == (1.0, 2.0, 3.0)
        assert grid.rank_values == (1, 3, 5)

    @pytest.mark.parametrize("lams,ranks", [
        ((), (1,)),
        ((1.0,), ()),
        ((-0.5,), (1,)),
        ((1.0,), (0,)),
        ((1.0, 1.0), (1,)),
        ((1.0,), (2, 2)),
    ])
    def test_invalid_grids_rejected(self, lams, ranks):
        with pytest.raises(ValueError):
            TuningGrid(lams, ranks)


class TestSelectTwoStep:
    def test_single_point_grid(self):
        rng = np.random.default_rng(10)
        design = make_design(rng.standard_normal((13, 4)))
        grid = TuningGrid((0.2,), (1,))
        res = select_two_step(design, grid)
        assert res.step1_lambda == 0.2
        assert res.step1_rank == 1
        assert res.lambda_opt == 0.2
        assert res.rank_opt == 2  # (d + 1) * 1
        assert res.k_hat == 1
        assert len(res.criterion_table) == 2  # 1 lattice + 1 line entry
        assert not res.rank_clamped

    def test_table_size_and_stage_optimality(self):
        rng = np.random.default_rng(11)
        design = make_design(rng.standard_normal((21, 5)))
        grid = TuningGrid((0.05, 0.2, 0.6), (1, 2))
        res = select_two_step(design, grid)
        assert len(res.criterion_table) == 3 * 2 + 3
        stage1 = {k: v for k, v in res.criterion_table.items() if k[0] == 1}
        stage2 = {k: v for k, v in res.criterion_table.items() if k[0] == 2}
        assert len(stage1) == 6 and len(stage2) == 3
        best1 = res.criterion_table[(1, res.step1_lambda, res.step1_rank)]
        assert all(best1 <= v for v in stage1.values())
        best2 = res.criterion_table[(2, res.lambda_opt, res.rank_opt)]
        assert all(best2 <= v for v in stage2.values())

    def test_planted_zero_residual_point_wins(self):
        # Exact rank-2 response: the r = 2 lattice point fits perfectly
        # (criterion 0) while r = 1 leaves energy on the table.
        rng = np.random.default_rng(12)
        x = rng.standard_normal((9, 2)) @ rng.standard_normal((2, 4))
        design = make_design(x)
        lam_huge = 1e6
        res = select_two_step(design, TuningGrid((lam_huge,), (1, 2)))
        assert res.step1_rank == 2
        # rank-2 truncation reproduces the rank-2 response up to rounding
        assert res.criterion_table[(1, lam_huge, 2)] < 1e-25
        assert res.criterion_table[(1, lam_huge, 1)] > 1e-3
        assert res.rank_opt == 4

    def test_tie_prefers_larger_lambda(self):
        # Two lambdas both above lambda_max produce the same all-zero B
        # and identical criteria; the sparser (larger) lambda must win.
        rng = np.random.default_rng(13)
        design = make_design(rng.standard_normal((11, 3)))
        res = select_two_step(design, TuningGrid((1e5, 1e6), (1,)))
        assert res.step1_lambda == 1e6
        assert res.lambda_opt == 1e6

    def test_tie_prefers_smaller_rank(self):
        # All-zero panel: every grid point fits perfectly with criterion
        # exactly 0, so both tie rules fire: largest lambda, smallest rank.
        design = make_design(np.zeros((8, 3)))
        res = select_two_step(design, TuningGrid((0.5, 1.0), (1, 2)))
        assert res.step1_rank == 1
        assert res.step1_lambda == 1.0
        assert res.lambda_opt == 1.0
        assert all(v == 0.0 for v in res.criterion_table.values())

    def test_degenerate_perfect_fit_maps_to_minus_inf(self):
        # All-zero panel under the log-scale criterion: the degenerate
        # perfect fit is recorded as -inf and still wins the search.
        design = make_design(np.zeros((7, 3)))
        res = select_two_step(design, TuningGrid((0.5, 1.0), (1,)),
                              criterion="pic_star")
        assert res.criterion_table[(1, 1.0, 1)] == -math.inf
        assert res.step1_rank == 1
        assert res.lambda_opt == 1.0

    def test_rank_clamped_when_inflation_overflows(self):
        rng = np.random.default_rng(16)
        design = make_design(rng.standard_normal((40, 3)))
        res = select_two_step(design, TuningGrid((1e6,), (2,)))
        assert res.step1_rank == 2
        assert res.rank_opt == 3  # (d + 1) * 2 = 4 clamped to min(39, 3)
        assert res.rank_clamped

    def test_infeasible_rank_recorded_as_inf(self):
        rng = np.random.default_rng(17)
        design = make_design(rng.standard_normal((9, 3)))
        grid = TuningGrid((0.5,), (1, 7))  # rank 7 > min(8, 3)
        res = select_two_step(design, grid)
        assert res.criterion_table[(1, 0.5, 7)] == math.inf
        assert res.step1_rank == 1

    def test_all_failures_raise_tuning_error(self, monkeypatch):
        rng = np.random.default_rng(18)
        design = make_design(rng.standard_normal((9, 3)))

        def boom(*args, **kwargs):
            raise RuntimeError("synthetic failure")

        monkeypatch.setattr("lagfactor.tuning.fit_empirical", boom)
        with pytest.raises(TuningError) as exc_info:
            select_two_step(design, TuningGrid((0.1, 0.2), (1, 2)))
        assert len(exc_info.value.failures) == 4

    def test_unknown_criterion_rejected(self):
        rng = np.random.default_rng(19)
        design = make_design(rng.standard_normal((9, 3)))
        with pytest.raises(ValueError):
            select_two_step(design, TuningGrid((0.1,), (1,)), criterion="aic")

    def test_deterministic(self):
        rng = np.random.default_rng(20)
        x = rng.standard_normal((15, 4))
        design = make_design(x)
        grid = TuningGrid((0.05, 0.3), (1, 2))
        r1 = select_two_step(design, grid)
        r2 = select_two_step(design, grid)
        assert r1.lambda_opt == r2.lambda_opt
        assert r1.rank_opt == r2.rank_opt
        assert r1.criterion_table == r2.criterion_table

    def test_d2_inflation_factor(self):
        rng = np.random.default_rng(21)
        design = make_design(rng.standard_normal((30, 4)), d=2)
        res = select_two_step(design, TuningGrid((1e6,), (1,)))
        assert res.rank_opt == 3  # (d + 1) * 1
        assert res.d == 2
        assert res.k_hat == 1
