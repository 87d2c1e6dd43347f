"""Weighted linear association model."""
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from ipwvar import AnalysisDataset, fit_weighted_linear
from ipwvar.errors import DimensionMismatch, SingularGram

from conftest import random_instance
from oracles import loop_gram, loop_sigma2, wls_two_by_two


class TestFitWeightedLinear:
    def test_equal_weight_mean(self):
        ds = AnalysisDataset(X=np.ones((4, 1)), Z=np.ones((4, 1)),
                             y=[1.0, 2.0, 3.0, 4.0], r=[1, 1, 1, 1])
        fit = fit_weighted_linear(ds, np.ones(4))
        assert fit.beta_hat == pytest.approx([2.5])

    def test_weighted_mean_hand_computed(self):
        # weights 1/0.5 = 2 and 1/0.25 = 4: (2*1 + 4*4) / 6 = 3
        ds = AnalysisDataset(X=np.ones((3, 1)), Z=np.ones((3, 1)),
                             y=[1.0, 4.0, np.nan], r=[1, 1, 0])
        fit = fit_weighted_linear(ds, np.array([0.5, 0.25, 0.9]))
        assert fit.beta_hat == pytest.approx([3.0])

    def test_six_row_instance_matches_cramer_oracle(self, six_row_instance):
        ds, p_hat = six_row_instance
        fit = fit_weighted_linear(ds, p_hat)
        weights = np.where(ds.r == 1.0, 1.0 / (p_hat * ds.v), 0.0)
        oracle = wls_two_by_two(ds.Z, ds.y_filled(), weights)
        np.testing.assert_allclose(fit.beta_hat, oracle, rtol=1e-12)
        # frozen from the oracle
        np.testing.assert_allclose(fit.beta_hat, [0.7448130747727693, 0.9899975153868269], atol=1e-12)

    def test_sigma2_matches_loop_oracle(self, six_row_instance):
        ds, p_hat = six_row_instance
        fit = fit_weighted_linear(ds, p_hat)
        oracle = loop_sigma2(ds.Z, ds.y_filled(), fit.beta_hat, ds.r, p_hat, ds.v)
        assert fit.sigma2_hat == pytest.approx(oracle, rel=1e-12)

    def test_gram_matches_loop_oracle(self, six_row_instance):
        ds, p_hat = six_row_instance
        fit = fit_weighted_linear(ds, p_hat)
        np.testing.assert_allclose(fit.gram, loop_gram(ds.Z, ds.r, p_hat, ds.v), rtol=1e-12)

    def test_exact_fit_recovers_coefficients(self):
        rng = np.random.default_rng(5)
        Z = np.column_stack([np.ones(10), rng.standard_normal(10)])
        b = np.array([1.5, -2.0])
        r = np.array([1, 1, 1, 0, 1, 1, 1, 1, 0, 1], dtype=float)
        y = np.where(r == 1.0, Z @ b, np.nan)
        ds = AnalysisDataset(X=np.ones((10, 1)), Z=Z, y=y, r=r)
        fit = fit_weighted_linear(ds, rng.uniform(0.2, 0.9, 10))
        np.testing.assert_allclose(fit.beta_hat, b, rtol=1e-12)
        np.testing.assert_allclose(fit.residuals, np.zeros(10), atol=1e-12)
        assert fit.sigma2_hat == pytest.approx(0.0, abs=1e-24)

    def test_residuals_zero_for_nonrespondents(self, six_row_instance):
        ds, p_hat = six_row_instance
        fit = fit_weighted_linear(ds, p_hat)
        assert fit.residuals[2] == 0.0

    def test_rank_deficient_respondent_design(self):
        Z = np.column_stack([np.ones(5), np.ones(5)])
        ds = AnalysisDataset(X=np.ones((5, 1)), Z=Z, y=np.ones(5), r=[1, 1, 1, 1, 0])
        with pytest.raises(SingularGram):
            fit_weighted_linear(ds, np.full(5, 0.8))

    def test_p_hat_length_checked(self):
        ds = AnalysisDataset(X=np.ones((3, 1)), Z=np.ones((3, 1)), y=np.ones(3), r=[1, 1, 0])
        with pytest.raises(DimensionMismatch):
            fit_weighted_linear(ds, np.array([0.5, 0.5]))

    def test_p_hat_must_be_positive(self):
        ds = AnalysisDataset(X=np.ones((3, 1)), Z=np.ones((3, 1)), y=np.ones(3), r=[1, 1, 0])
        with pytest.raises(ValueError):
            fit_weighted_linear(ds, np.array([0.5, -0.5, 0.5]))


class TestNormalEquationProperties:
    @given(st.integers(0, 300))
    def test_weighted_normal_equations_hold(self, seed):
        ds, p_resp = random_instance(seed)
        fit = fit_weighted_linear(ds, p_resp)
        w = ds.r / (p_resp * ds.v)
        residual = ds.z_filled().T @ (w * fit.residuals)
        scale = np.max(np.abs(ds.z_filled().T @ (w * ds.y_filled()))) + 1e-12
        assert np.max(np.abs(residual)) <= 1e-8 * scale

    @given(st.integers(0, 300))
    def test_weight_scale_invariance_exact_for_power_of_two(self, seed):
        # scaling all weights by 4 (p_hat by 1/4) moves every float by an
        # exact power of two, so the solve commutes bit for bit
        ds, p_resp = random_instance(seed)
        base = fit_weighted_linear(ds, p_resp)
        scaled = fit_weighted_linear(ds, p_resp / 4.0)
        assert base.beta_hat.tobytes() == scaled.beta_hat.tobytes()

    @given(st.integers(0, 300), st.floats(0.1, 10.0))
    def test_weight_scale_invariance_general(self, seed, c):
        ds, p_resp = random_instance(seed)
        base = fit_weighted_linear(ds, p_resp)
        scaled = fit_weighted_linear(ds, np.clip(p_resp / c, 1e-12, None))
        np.testing.assert_allclose(scaled.beta_hat, base.beta_hat, rtol=1e-9)
