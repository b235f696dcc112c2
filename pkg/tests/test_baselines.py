#!/usr/bin/env python
# -*- coding: utf-8 -*-

import numpy as np
import pytest

from utils.baselines import (KernelRatioModel, kernel_estimators, median_bandwidth,
                             rulsif_fit, rulsif_pe_divergence, rulsif_predict, ulsif_fit)
from utils.episodes import DatasetSample
from utils.errors import DataError
from utils.evalkit import GaussianSpec, true_relative_ratio
from utils.rng import make_rng


class TestMedianBandwidth:
    def test_three_points(self):
        assert median_bandwidth(np.array([[0.0], [1.0], [3.0]])) == pytest.approx(2.0)

    def test_two_points(self):
        assert median_bandwidth(np.array([[0.0]]), np.array([[5.0]])) == pytest.approx(5.0)

    def test_translation_invariant(self, rng):
        x = rng.normal(size=(20, 3))
        assert median_bandwidth(x + 7.5) == pytest.approx(median_bandwidth(x), rel=1e-12)

    def test_accepts_samples(self, rng):
        a = DatasetSample("a", rng.normal(size=(5, 2)))
        b = DatasetSample("b", rng.normal(size=(4, 2)))
        assert median_bandwidth(a, b) == pytest.approx(median_bandwidth(np.vstack([a.features, b.features])))

    def test_degenerate(self):
        with pytest.raises(DataError):
            median_bandwidth(np.ones((4, 2)))
        with pytest.raises(DataError):
            median_bandwidth(np.zeros((1, 2)))


def _direct_ulsif(x_nu, x_de, lam, sigma):
    """逐项写出的 uLSIF: θ = max(0, (H + λI)⁻¹h)，中心为全部分子实例"""
    phi_nu = np.exp(-((x_nu[:, None, :] - x_nu[None, :, :]) ** 2).sum(-1) / (2 * sigma ** 2))
    phi_de = np.exp(-((x_de[:, None, :] - x_nu[None, :, :]) ** 2).sum(-1) / (2 * sigma ** 2))
    H = phi_de.T @ phi_de / len(x_de)
    h = phi_nu.mean(axis=0)
    return np.maximum(0.0, np.linalg.solve(H + lam * np.eye(len(h)), h))


class TestRulsifFit:
    def test_alpha_zero_matches_direct_ulsif(self, rng):
        for _ in range(5):
            x_nu = rng.normal(size=(12, 2))
            x_de = rng.normal(0.5, 1.3, size=(15, 2))
            model = rulsif_fit(x_nu, x_de, 0.0, 0.01, 1.2)
            np.testing.assert_allclose(model.theta, _direct_ulsif(x_nu, x_de, 0.01, 1.2), atol=1e-10)
            np.testing.assert_array_equal(ulsif_fit(x_nu, x_de, 0.01, 1.2).theta, model.theta)

    def test_zero_theta_predicts_zero(self, rng):
        centers = rng.normal(size=(4, 2))
        model = KernelRatioModel(centers, np.zeros(4), 1.0, 0.5, 0.1)
        np.testing.assert_array_equal(rulsif_predict(model, rng.normal(size=(6, 2))), np.zeros(6))

    def test_one_hot_theta_at_its_center(self):
        model = KernelRatioModel(np.array([[0.0], [100.0]]), np.array([1.0, 0.0]), 1.0, 0.5, 0.1)
        assert rulsif_predict(model, np.array([[0.0]]))[0] == pytest.approx(1.0, abs=1e-12)

    def test_predictions_nonnegative(self, rng):
        model = rulsif_fit(rng.normal(size=(30, 1)), rng.normal(2.0, 0.5, size=(30, 1)), 0.5, 1e-4, 0.8)
        assert np.all(model.theta >= 0)
        assert np.all(rulsif_predict(model, np.linspace(-5, 5, 101)) >= 0)

    def test_center_subsampling(self, rng):
        x_nu = rng.normal(size=(150, 2))
        model = rulsif_fit(x_nu, rng.normal(size=(40, 2)), 0.5, 0.1, 1.0, max_centers=100, rng=make_rng(3))
        assert model.centers.shape == (100, 2)
        rows = {tuple(r) for r in x_nu}
        assert all(tuple(c) in rows for c in model.centers)

    def test_invalid_arguments(self, rng):
        x = rng.normal(size=(5, 1))
        with pytest.raises(DataError):
            rulsif_fit(x, x, 0.5, 0.0, 1.0)
        with pytest.raises(DataError):
            rulsif_fit(x, x, 0.5, 0.1, -1.0)
        with pytest.raises(DataError):
            rulsif_predict(rulsif_fit(x, x, 0.5, 0.1, 1.0), np.zeros((2, 3)))

    def test_self_ratio_close_to_one(self, rng):
        x = rng.normal(size=(500, 1))
        model = rulsif_fit(x, x, 0.5, 1e-3, median_bandwidth(x))
        assert np.mean(np.abs(rulsif_predict(model, x) - 1.0)) < 0.2
        assert abs(rulsif_pe_divergence(model, x, x)) < 0.1


class TestKernelEstimators:
    def test_names_follow_grid(self):
        names = list(kernel_estimators(0.5, (1e-4, 1.0)))
        assert names == ["rulsif_lam0.0001", "rulsif_lam1"]
        assert list(kernel_estimators(0.0, (0.01,))) == ["ulsif_lam0.01"]

    def test_fitted_ratio_carries_alpha(self, rng):
        fit = kernel_estimators(0.3, (0.1,))["rulsif_lam0.1"]
        fitted = fit(DatasetSample("a", rng.normal(size=(10, 1))), DatasetSample("b", rng.normal(size=(10, 1))))
        assert fitted.alpha == 0.3 and fitted.name == "rulsif_lam0.1"
        assert fitted.predict(np.zeros((3, 1))).shape == (3,)

    def test_gaussian_sanity_on_grid(self):
        rng = make_rng(2024)
        s_nu = DatasetSample("nu", rng.normal(0.0, 1.0, size=(1000, 1)))
        s_de = DatasetSample("de", rng.normal(0.5, 1.0, size=(1000, 1)))
        grid = np.linspace(-3.0, 3.0, 61)
        truth = true_relative_ratio(grid, GaussianSpec(0.0, 1.0), GaussianSpec(0.5, 1.0), 0.5)
        deviations = [np.mean((fit(s_nu, s_de).predict(grid.reshape(-1, 1)) - truth) ** 2)
                      for fit in kernel_estimators(0.5).values()]
        assert min(deviations) < 0.05
