#!/usr/bin/env python
# -*- coding: utf-8 -*-

import itertools

import numpy as np
import pandas as pd
import pytest

from commands import harness
from utils.baselines import kernel_estimators
from utils.episodes import (ROLE_NORMAL, ROLE_UNLABELED, DatasetSample, gen_synthetic_gaussian_suite,
                            gen_synthetic_outlier_suite)
from utils.errors import DataError
from utils.evalkit import compare_datasets, outlier_scores
from utils.model import init_params
from utils.rng import make_rng
from utils.trainer import TrainConfig, meta_train


@pytest.fixture
def outlier_target():
    _, _, targets, _ = gen_synthetic_outlier_suite(1, 1, 1, 20, 40, 0.1, make_rng(3))
    return targets[0]


@pytest.fixture
def recorded_scoring(monkeypatch):
    """记录 detect_sweep 传给 outlier_scores 的正常集、未标注集和分数"""
    calls = []

    def recording(params, normal, unlabeled):
        scores = outlier_scores(params, normal, unlabeled)
        calls.append((normal, unlabeled, scores))
        return scores

    monkeypatch.setattr(harness, "outlier_scores", recording)
    return calls


def _contains_row(features, row):
    return bool(np.any(np.all(features == row, axis=1)))


class TestDetectSweep:
    def test_scores_every_instance_outside_the_support(self, tiny_params, outlier_target, recorded_scoring):
        frame = harness.detect_sweep([outlier_target], [2], 1, 0, params=tiny_params)
        assert len(frame) == 1 and frame["model"].between(0, 1).all()

        (normal, unlabeled, scores), = recorded_scoring
        assert normal.n_instances == 2 and unlabeled.n_instances == 60 - 2
        assert scores.shape == (58,)
        assert set(normal.roles) == {ROLE_NORMAL}
        assert list(unlabeled.roles).count(ROLE_NORMAL) == 18
        assert list(unlabeled.roles).count(ROLE_UNLABELED) == 40
        assert not any(_contains_row(unlabeled.features, row) for row in normal.features)
        assert all(_contains_row(np.vstack([normal.features, unlabeled.features]), row)
                   for row in outlier_target.features)

    def test_kernels_use_the_same_unlabeled_set(self, outlier_target):
        sizes = []
        fit = kernel_estimators(0.5, lambdas=(0.1,))["rulsif_lam0.1"]

        def recording_fit(s_nu, s_de):
            sizes.append((s_nu.n_instances, s_de.n_instances))
            return fit(s_nu, s_de)

        harness.detect_sweep([outlier_target], [3], 2, 0, kernels={"rulsif": recording_fit})
        assert sizes == [(3, 57), (3, 57)]

    def test_labels_do_not_change_scores(self, tiny_params, outlier_target, recorded_scoring):
        flipped = DatasetSample(outlier_target.id, outlier_target.features, 1 - outlier_target.labels,
                                outlier_target.roles)
        first = harness.detect_sweep([outlier_target], [4], 1, 9, params=tiny_params)
        second = harness.detect_sweep([flipped], [4], 1, 9, params=tiny_params)
        (_, _, scores_a), (_, _, scores_b) = recorded_scoring
        assert scores_a.tobytes() == scores_b.tobytes()
        assert second["model"][0] == pytest.approx(1.0 - first["model"][0])

    def test_trials_are_reproducible(self, tiny_params, outlier_target):
        a = harness.detect_sweep([outlier_target], [1, 2], 2, 4, params=tiny_params)
        b = harness.detect_sweep([outlier_target], [1, 2], 2, 4, params=tiny_params)
        assert a.equals(b)
        assert list(a["n_support"]) == [1, 1, 2, 2]

    def test_rejects_bad_inputs(self, tiny_params, outlier_target, rng):
        plain = DatasetSample("plain", rng.normal(size=(10, 2)))
        with pytest.raises(DataError):
            harness.detect_sweep([outlier_target], [2], 1, 0)
        with pytest.raises(DataError):
            harness.detect_sweep([plain], [2], 1, 0, params=tiny_params)
        with pytest.raises(DataError):
            harness.detect_sweep([outlier_target], [21], 1, 0, params=tiny_params)


class TestSummarize:
    def test_kernel_best_by_support_size(self):
        frame = pd.DataFrame({"n_support": [1, 1, 2], "model": [0.2, 0.4, 0.1],
                              "k_a": [0.5, 0.7, 0.0], "k_b": [0.4, 0.4, 0.9]})
        summary = harness.summarize(frame, ["model", "k_a", "k_b"], ["k_a", "k_b"], best="min")
        assert list(summary["n_support"]) == [1, 2]
        np.testing.assert_allclose(summary["model"], [0.3, 0.1])
        assert list(summary["kernel_best_name"]) == ["k_b", "k_a"]
        np.testing.assert_allclose(summary["kernel_best"], [0.4, 0.0])


DESK_SEEDS = (0, 1, 2)


@pytest.fixture(scope="module")
def desk_runs():
    """每个种子一套 100/3/20 一维高斯数据（每个数据集 300 个实例）及其训练好的模型"""
    runs = {}
    for seed in DESK_SEEDS:
        src, val, targets, records = gen_synthetic_gaussian_suite(100, 3, 20, 300, make_rng(seed))
        params, _ = meta_train(src, val, TrainConfig(alpha=0.5, max_iters=10000, seed=seed))
        runs[seed] = (params, targets, records)
    return runs


@pytest.mark.slow
class TestDeskAcceptance:
    def test_model_beats_grid_best_rulsif(self, desk_runs):
        model, kernel = [], []
        for seed, (params, targets, _) in desk_runs.items():
            pairs = list(itertools.permutations(range(len(targets)), 2))
            kernels = kernel_estimators(0.5, seed=seed)
            frame = harness.dre_sweep(targets, pairs, [10], 0.5, seed, params=params, kernels=kernels)
            model.append(frame["model"].mean())
            kernel.append(frame[list(kernels)].mean().min())
        model_error, kernel_error = np.mean(model), np.mean(kernel)
        assert -0.80 <= model_error <= -0.45
        assert model_error <= kernel_error - 0.02

    def test_trained_model_beats_untrained(self, desk_runs):
        for seed, (params, targets, _) in desk_runs.items():
            untrained = init_params(seed, input_dim=1, alpha=0.5)
            pairs = list(itertools.permutations(range(len(targets)), 2))
            trained = harness.dre_sweep(targets, pairs, [10], 0.5, seed, params=params)
            initial = harness.dre_sweep(targets, pairs, [10], 0.5, seed, params=untrained)
            assert trained["model"].mean() < initial["model"].mean()

    def test_comparison_auc_at_five_instances(self, desk_runs):
        aucs = []
        for seed, (params, targets, _) in desk_runs.items():
            subset = targets[:10]
            pairs = list(itertools.product(range(len(subset)), repeat=2))
            scores, auc_table = harness.compare_sweep(subset, pairs, [2, 5], seed, params=params)
            assert int((scores["n_support"] == 5).sum()) == 100
            assert int(scores[scores["n_support"] == 5]["different"].sum()) == 90
            aucs.append(float(auc_table.set_index("n_support").loc[5, "model"]))
        assert np.mean(aucs) >= 0.85

    def test_shifted_pairs_score_higher_than_same_distribution(self, desk_runs):
        params = desk_runs[0][0]
        rng = make_rng(77)
        same, shifted = [], []
        for _ in range(20):
            a = DatasetSample("a", rng.normal(0.0, 1.0, size=(10, 1)))
            a2 = DatasetSample("a2", rng.normal(0.0, 1.0, size=(10, 1)))
            b = DatasetSample("b", rng.normal(2.0, 1.0, size=(10, 1)))
            scored = compare_datasets(params, [(a, a2), (a, b)])
            same.append(scored[0].score)
            shifted.append(scored[1].score)
        assert np.mean(same) < np.mean(shifted)
