"""Tests for the synthetic panel generators."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose, assert_array_equal

from lagfactor import (
    CalibrationError,
    DimensionError,
    SimulationSetting,
    gen_factor_path,
    gen_forni_dgp,
    gen_lagadj_dgp,
    gen_noise,
    gen_sparse_b,
    table_setting,
)
from lagfactor.core import companion_matrix, spectral_radius, split_blocks


def realized_strength_ratio(panel, truth, d):
    x = panel.values
    rows = np.arange(d, x.shape[0])
    blocks = split_blocks(truth.b_true, d)
    lag = np.zeros((rows.size, x.shape[1]))
    for j, bj in enumerate(blocks):
        lag += x[rows - 1 - j] @ bj.T
    return float(np.sum(truth.theta_true ** 2) / np.sum(lag ** 2))


class TestSimulationSetting:
    def test_presets_construct(self):
        for name in ("S0", "S1", "S2", "S3", "S4", "S5", "S6"):
            s = table_setting(name, seed=3)
            assert s.name == name
            assert s.seed == 3

    def test_s0_fields(self):
        s = table_setting("S0")
        assert s.n_series == 100
        assert s.n_obs == 200
        assert s.n_factors == 2
        assert s.factor_order == 1
        assert s.lag_order == 1
        assert s.row_density == pytest.approx(0.02)
        assert s.sparsity == "exact"
        assert s.rho_transition == pytest.approx(0.7)
        assert s.noise_law == "gaussian"
        assert s.noise_structure == "diagonal"
        assert s.strength_ratio == (3.0, 2.0)

    def test_s6_student_df8(self):
        s = table_setting("S6")
        assert s.noise_law == "student_t"
        assert s.noise_df == pytest.approx(8.0)
        assert s.noise_structure == "toeplitz"
        assert s.strength_ratio == (1.0, 1.0)

    def test_unknown_name(self):
        with pytest.raises(KeyError, match="S99"):
            table_setting("S99")

    def test_overrides(self):
        s = table_setting("S0", n_obs=80, seed=11)
        assert s.n_obs == 80 and s.seed == 11

    @pytest.mark.parametrize("bad", [
        dict(rho_transition=0.0),
        dict(rho_transition=1.0),
        dict(row_density=0.0),
        dict(row_density=0.001),
        dict(sparsity="soft"),
        dict(noise_law="cauchy"),
        dict(noise_law="student_t", noise_df=2.0),
        dict(noise_structure="banded"),
        dict(noise_param=1.0),
        dict(factor_rho_range=(0.8, 0.6)),
        dict(factor_rho_range=(0.0, 0.5)),
        dict(strength_ratio=(0.0, 1.0)),
    ])
    def test_invalid_settings(self, bad):
        base = dict(name="x", n_series=50, n_obs=100, n_factors=2)
        base.update(bad)
        with pytest.raises((ValueError, DimensionError)):
            SimulationSetting(**base)

    def test_too_few_rows(self):
        with pytest.raises(DimensionError):
            SimulationSetting(name="x", n_series=5, n_obs=2, n_factors=1)


class TestGenSparseB:
    def test_exact_row_counts(self):
        rng = np.random.default_rng(0)
        b, strong, weak = gen_sparse_b(50, 3 / 50, "exact", 0.5, 0.7, rng,
                                       return_mask=True)
        assert b.shape == (50, 50)
        assert_array_equal(np.count_nonzero(b, axis=1), np.full(50, 3))
        assert_array_equal(strong, b != 0)
        assert not weak.any()

    def test_weak_kind_partition(self):
        rng = np.random.default_rng(1)
        b, strong, weak = gen_sparse_b(40, 2 / 40, "weak", 0.5, 0.7, rng,
                                       return_mask=True)
        assert_array_equal(strong.sum(axis=1), np.full(40, 2))
        assert_array_equal(strong | weak, np.ones_like(strong))
        assert not (strong & weak).any()
        # scaling preserves the planted strong/weak magnitude separation
        assert np.abs(b[weak]).max() < np.abs(b[strong]).min()

    @pytest.mark.parametrize("d", [1, 2, 3])
    def test_spectral_radius_exact(self, d):
        rng = np.random.default_rng(2)
        b = gen_sparse_b(20, 0.1, "exact", 0.5, 0.65, rng, d=d)
        assert b.shape == (20, 20 * d)
        rho = spectral_radius(companion_matrix(split_blocks(b, d)))
        assert rho == pytest.approx(0.65, abs=1e-6)

    def test_weak_kind_radius(self):
        rng = np.random.default_rng(3)
        b = gen_sparse_b(30, 0.1, "weak", 0.5, 0.9, rng)
        rho = spectral_radius(companion_matrix(split_blocks(b, 1)))
        assert rho == pytest.approx(0.9, abs=1e-6)

    def test_default_returns_bare_matrix(self):
        rng = np.random.default_rng(4)
        out = gen_sparse_b(10, 0.2, "exact", 0.5, 0.5, rng)
        assert isinstance(out, np.ndarray)

    def test_deterministic(self):
        b1 = gen_sparse_b(25, 0.1, "weak", 0.5, 0.7,
                          np.random.default_rng(9))
        b2 = gen_sparse_b(25, 0.1, "weak", 0.5, 0.7,
                          np.random.default_rng(9))
        assert_array_equal(b1, b2)

    @pytest.mark.parametrize("kwargs", [
        dict(sparsity_kind="banded"),
        dict(row_density=0.0),
        dict(row_density=0.001),
        dict(m_b=0.05),
    ])
    def test_invalid_args(self, kwargs):
        args = dict(p=30, row_density=0.1, sparsity_kind="exact", m_b=0.5,
                    rho_target=0.7, rng=np.random.default_rng(0))
        args.update(kwargs)
        with pytest.raises(ValueError):
            gen_sparse_b(**args)

    @settings(max_examples=15, deadline=None)
    @given(
        p=st.integers(6, 14),
        d=st.integers(1, 2),
        kind=st.sampled_from(["exact", "weak"]),
        rho=st.floats(0.3, 0.95),
        seed=st.integers(0, 100),
    )
    def test_property_counts_and_radius(self, p, d, kind, rho, seed):
        rng = np.random.default_rng(seed)
        b, strong, _ = gen_sparse_b(p, 2 / p, kind, 0.5, rho, rng, d=d,
                                    return_mask=True)
        assert_array_equal(strong.sum(axis=1), np.full(p, 2))
        got = spectral_radius(companion_matrix(split_blocks(b, d)))
        assert got == pytest.approx(rho, abs=1e-6)


class TestGenFactorPath:
    def test_shape(self):
        f = gen_factor_path(3, 2, 150, (0.6, 0.8), 1.0,
                            np.random.default_rng(0))
        assert f.shape == (150, 3)
        assert np.isfinite(f).all()

    def test_zero_innovations_zero_path(self):
        f = gen_factor_path(2, 1, 50, (0.6, 0.8), 0.0,
                            np.random.default_rng(1))
        assert_array_equal(f, np.zeros((50, 2)))

    def test_ar1_autocorrelation(self):
        # pinned radius 0.7 on a scalar factor: |lag-1 autocorr| -> 0.7
        f = gen_factor_path(1, 1, 60000, (0.7, 0.7), 1.0,
                            np.random.default_rng(2)).ravel()
        acf1 = np.corrcoef(f[1:], f[:-1])[0, 1]
        assert abs(acf1) == pytest.approx(0.7, abs=0.03)

    def test_stationary_long_run(self):
        f = gen_factor_path(4, 3, 4000, (0.6, 0.8), 1.0,
                            np.random.default_rng(3))
        assert np.isfinite(f).all()
        # halves should have comparable energy if the path is stable
        e1 = np.sum(f[:2000] ** 2)
        e2 = np.sum(f[2000:] ** 2)
        assert 0.5 < e1 / e2 < 2.0

    def test_deterministic(self):
        a = gen_factor_path(2, 2, 100, (0.6, 0.8), 1.0,
                            np.random.default_rng(7))
        b = gen_factor_path(2, 2, 100, (0.6, 0.8), 1.0,
                            np.random.default_rng(7))
        assert_array_equal(a, b)

    def test_invalid_dims(self):
        with pytest.raises(DimensionError):
            gen_factor_path(0, 1, 10, (0.6, 0.8), 1.0,
                            np.random.default_rng(0))


class TestGenNoise:
    def test_gaussian_identity_cov(self):
        rng = np.random.default_rng(0)
        e = gen_noise(100000, 3, "diagonal", "gaussian", rng)
        cov = e.T @ e / e.shape[0]
        assert_allclose(cov, np.eye(3), atol=0.05)

    def test_toeplitz_correlation(self):
        rng = np.random.default_rng(1)
        e = gen_noise(100000, 4, "toeplitz", "gaussian", rng,
                      toeplitz_decay=0.2)
        cov = e.T @ e / e.shape[0]
        idx = np.arange(4)
        expect = 0.2 ** np.abs(np.subtract.outer(idx, idx))
        assert_allclose(cov, expect, atol=0.05)

    def test_student_t_unit_cov_df8(self):
        # df = 8 keeps fourth moments finite so the sample covariance
        # concentrates; the (df-2)/df rescale must land it on Sigma
        rng = np.random.default_rng(2)
        e = gen_noise(200000, 3, "diagonal", "student_t", rng, df=8.0)
        cov = e.T @ e / e.shape[0]
        assert_allclose(cov, np.eye(3), atol=0.05)

    def test_student_t_construction_pinned(self):
        # one chi-square divisor per row, shared across columns
        out = gen_noise(50, 3, "diagonal", "student_t",
                        np.random.default_rng(7), df=4.0)
        rng = np.random.default_rng(7)
        g = rng.standard_normal((50, 3))
        scale = np.sqrt(rng.chisquare(4.0, size=50) / 4.0)
        expect = g / scale[:, None] * np.sqrt(2.0 / 4.0)
        assert_array_equal(out, expect)

    def test_student_t_heavier_tails(self):
        rng = np.random.default_rng(3)
        e = gen_noise(100000, 1, "diagonal", "student_t", rng,
                      df=4.0).ravel()
        tail = np.mean(np.abs(e) > 3.0)
        # standard normal P(|Z| > 3) ~ 0.0027; scaled t4 is far above
        assert tail > 0.006

    @pytest.mark.parametrize("kwargs", [
        dict(structure="banded"),
        dict(law="cauchy"),
        dict(law="student_t", df=2.0),
        dict(toeplitz_decay=1.0),
    ])
    def test_invalid_args(self, kwargs):
        args = dict(t_len=10, p=3, structure="diagonal", law="gaussian",
                    rng=np.random.default_rng(0))
        args.update(kwargs)
        with pytest.raises(ValueError):
            gen_noise(**args)


@pytest.fixture(scope="module")
def s0_draw():
    setting = table_setting("S0", seed=0)
    return setting, *gen_lagadj_dgp(setting)


@pytest.fixture(scope="module")
def forni_draw():
    rng = np.random.default_rng(3)
    return gen_forni_dgp(100, 4, 4, 200, rng)


class TestGenLagadjDgp:
    def test_shapes(self, s0_draw):
        setting, panel, truth = s0_draw
        assert panel.values.shape == (201, 100)
        assert truth.b_true.shape == (100, 100)
        assert truth.lambda_true.shape == (100, 4)
        assert truth.theta_true.shape == (200, 100)
        assert truth.factor_path.shape == (201, 2)
        assert truth.stacked_factors.shape == (200, 4)
        assert truth.oracle_next.shape == (100,)

    def test_theta_rank(self, s0_draw):
        _, _, truth = s0_draw
        assert np.linalg.matrix_rank(truth.theta_true) == 4

    def test_row_support(self, s0_draw):
        _, _, truth = s0_draw
        assert_array_equal(np.count_nonzero(truth.b_true, axis=1),
                           np.full(100, 2))
        assert not truth.weak_mask.any()

    def test_transition_radius(self, s0_draw):
        _, _, truth = s0_draw
        rho = spectral_radius(companion_matrix(
            split_blocks(truth.b_true, 1)))
        assert rho == pytest.approx(0.7, abs=1e-6)

    def test_strength_ratio(self, s0_draw):
        setting, panel, truth = s0_draw
        got = realized_strength_ratio(panel, truth, 1)
        assert got == pytest.approx(1.5, rel=1e-10)

    def test_theta_matches_factor_product(self, s0_draw):
        _, _, truth = s0_draw
        assert_allclose(truth.theta_true,
                        truth.stacked_factors @ truth.lambda_true.T,
                        rtol=0, atol=1e-12)
        # stacked rows really are (f_t, f_{t-1}) slices of the path
        t = 37
        expect = np.concatenate([truth.factor_path[t + 1],
                                 truth.factor_path[t]])
        assert_array_equal(truth.stacked_factors[t], expect)

    def test_residual_is_unit_noise(self, s0_draw):
        setting, panel, truth = s0_draw
        x = panel.values
        resid = x[1:] - x[:-1] @ truth.b_true.T - truth.theta_true
        assert resid.var() == pytest.approx(1.0, rel=0.15)

    def test_oracle_next_recomputed(self, s0_draw):
        _, panel, truth = s0_draw
        stack_next = np.concatenate([truth.factor_next,
                                     truth.factor_path[-1]])
        expect = (truth.lambda_true @ stack_next
                  + truth.b_true @ panel.values[-1])
        assert_allclose(truth.oracle_next, expect, rtol=0, atol=1e-12)

    def test_deterministic(self, s0_draw):
        setting, panel, truth = s0_draw
        panel2, truth2 = gen_lagadj_dgp(setting)
        assert_array_equal(panel.values, panel2.values)
        assert_array_equal(truth.b_true, truth2.b_true)
        assert_array_equal(truth.theta_true, truth2.theta_true)

    def test_seed_changes_draw(self, s0_draw):
        setting, panel, _ = s0_draw
        other, _ = gen_lagadj_dgp(table_setting("S0", seed=1))
        assert not np.array_equal(panel.values, other.values)

    def test_zero_transition(self):
        setting = table_setting("S0", seed=2, n_obs=120)
        panel, truth = gen_lagadj_dgp(setting, zero_transition=True)
        assert not truth.b_true.any()
        assert not truth.strong_mask.any()
        # pure static factor model: x_t minus the hyperplane is the noise
        resid = panel.values[1:] - truth.theta_true
        assert resid.var() == pytest.approx(1.0, rel=0.15)
        assert truth.oracle_next == pytest.approx(
            truth.lambda_true @ np.concatenate(
                [truth.factor_next, truth.factor_path[-1]]))

    def test_weak_setting_draw(self):
        setting = table_setting("S1", seed=0, n_obs=120)
        panel, truth = gen_lagadj_dgp(setting)
        assert truth.weak_mask.any()
        assert np.count_nonzero(truth.b_true) == truth.b_true.size
        got = realized_strength_ratio(panel, truth, 1)
        assert got == pytest.approx(2.0, rel=1e-10)

    def test_lag_order_two(self):
        setting = SimulationSetting(
            name="d2", n_series=30, n_obs=150, n_factors=2, lag_order=2,
            row_density=2 / 30, seed=5)
        panel, truth = gen_lagadj_dgp(setting)
        assert panel.values.shape == (152, 30)
        assert truth.b_true.shape == (30, 60)
        assert truth.lambda_true.shape == (30, 6)
        assert truth.theta_true.shape == (150, 30)
        rho = spectral_radius(companion_matrix(
            split_blocks(truth.b_true, 2)))
        assert rho == pytest.approx(0.7, abs=1e-6)
        got = realized_strength_ratio(panel, truth, 2)
        assert got == pytest.approx(1.5, rel=1e-10)
        assert np.linalg.matrix_rank(truth.theta_true) == 6

    def test_student_toeplitz_setting(self):
        setting = table_setting("S6", seed=0, n_obs=100)
        panel, truth = gen_lagadj_dgp(setting)
        assert np.isfinite(panel.values).all()
        got = realized_strength_ratio(panel, truth, 1)
        assert got == pytest.approx(1.0, rel=1e-10)


class TestGenForniDgp:
    def test_shapes(self, forni_draw):
        panel, truth = forni_draw
        assert panel.values.shape == (201, 100)
        assert truth.b_true.shape == (100, 100)
        assert truth.lambda_true.shape == (100, 4)
        assert truth.factor_path.shape == (201, 4)
        assert truth.theta_true.shape == (200, 100)

    def test_no_lag_term(self, forni_draw):
        _, truth = forni_draw
        assert not truth.b_true.any()
        assert not truth.strong_mask.any()
        assert not truth.weak_mask.any()

    def test_theta_identity(self, forni_draw):
        _, truth = forni_draw
        assert_array_equal(truth.theta_true,
                           truth.factor_path[1:] @ truth.lambda_true.T)
        assert np.linalg.matrix_rank(truth.theta_true) == 4

    def test_oracle(self, forni_draw):
        _, truth = forni_draw
        assert_array_equal(truth.oracle_next,
                           truth.lambda_true @ truth.factor_next)

    def test_noise_is_unit_iid(self, forni_draw):
        panel, truth = forni_draw
        xi = panel.values - truth.factor_path @ truth.lambda_true.T
        assert xi.var() == pytest.approx(1.0, rel=0.1)

    def test_deterministic(self):
        a, _ = gen_forni_dgp(20, 2, 3, 50, np.random.default_rng(11))
        b, _ = gen_forni_dgp(20, 2, 3, 50, np.random.default_rng(11))
        assert_array_equal(a.values, b.values)

    def test_invalid_dims(self):
        rng = np.random.default_rng(0)
        with pytest.raises(DimensionError):
            gen_forni_dgp(10, 5, 3, 50, rng)
        with pytest.raises(DimensionError):
            gen_forni_dgp(10, 0, 3, 50, rng)
        with pytest.raises(DimensionError):
            gen_forni_dgp(10, 2, 3, 2, rng)
