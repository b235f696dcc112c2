#!/usr/bin/env python
# -*- coding: utf-8 -*-

import json
import os

import pandas as pd
import pytest

from commands import COMMANDS
from commands import train as train_command
from commands.base import BaseCommand
from commands.train import CHECKPOINT_FILE, TRAINING_LOG_FILE
from main_app import main, parse_overrides
from utils.config_manager import RESOLVED_CONFIG_FILE
from utils.errors import ConfigError, NumericalError
from utils.trainer import meta_train

GAUSSIAN_DATA = ["--synth-preset", "custom", "--n-source", "4", "--n-val", "2", "--n-target", "3",
                 "--n-per-dataset", "40", "--seed", "5"]
OUTLIER_DATA = ["--synth-kind", "outlier", "--synth-preset", "custom", "--n-source", "3", "--n-val", "1",
                "--n-target", "2", "--n-normal", "20", "--n-unlabeled", "40", "--outlier-rate", "0.1", "--seed", "5"]
SMALL_TRAINING = ["--max-iters", "4", "--check-interval", "2", "--n-val-episodes", "2", "--n-query", "8",
                  "--support-max", "3", "--latent-dim", "4", "--embed-dim", "8", "--hidden-dim", "8", "--seed", "5"]


def _run(*args):
    return main([str(a) for a in args])


@pytest.fixture(scope="module")
def gaussian_run(tmp_path_factory):
    root = tmp_path_factory.mktemp("gaussian")
    data, model = root / "data", root / "model"
    assert _run("gen-synth", "--out", data, *GAUSSIAN_DATA) == 0
    assert _run("train", "--out", model, "--data-dir", data, *SMALL_TRAINING) == 0
    return root, data, model / CHECKPOINT_FILE


class TestParseOverrides:
    def test_forms(self):
        assert parse_overrides(["--alpha", "0.3", "--max-iters=5"]) == {"alpha": "0.3", "max_iters": "5"}

    @pytest.mark.parametrize("tokens", [["alpha", "0.3"], ["--alpha"], ["--alpha", "--seed", "1"]])
    def test_malformed(self, tokens):
        with pytest.raises(ConfigError):
            parse_overrides(tokens)


class TestExitCodes:
    def test_unknown_key(self, tmp_path):
        assert _run("gen-synth", "--out", tmp_path, "--no-such-key", "1") == 2

    def test_missing_out(self):
        assert _run("gen-synth") == 2

    def test_missing_data_dir(self, tmp_path):
        assert _run("train", "--out", tmp_path) == 2

    def test_missing_data(self, tmp_path):
        assert _run("train", "--out", tmp_path / "out", "--data-dir", tmp_path / "absent") == 3

    def test_outlier_mode_without_roles(self, gaussian_run, tmp_path, monkeypatch):
        _, data, _ = gaussian_run
        modes = []

        def recording_meta_train(sources, validation, config, **kwargs):
            modes.append(config.mode)
            return meta_train(sources, validation, config, **kwargs)

        monkeypatch.setattr(train_command, "meta_train", recording_meta_train)
        out = tmp_path / "out"
        assert _run("train", "--out", out, "--data-dir", data, "--mode", "outlier", *SMALL_TRAINING) == 3
        assert modes == ["outlier"]
        assert not (out / CHECKPOINT_FILE).exists()

    def test_corrupt_checkpoint(self, gaussian_run, tmp_path):
        _, data, checkpoint = gaussian_run
        broken = tmp_path / "broken.mrdr"
        blob = bytearray(checkpoint.read_bytes())
        blob[-1] ^= 0xFF
        broken.write_bytes(bytes(blob))
        assert _run("eval", "--out", tmp_path / "out", "--data-dir", data / "target", "--checkpoint", broken) == 3

    def test_numerical_error(self, tmp_path, monkeypatch):
        class Failing(BaseCommand):
            def run(self):
                raise NumericalError("损失出现NaN")

        monkeypatch.setitem(COMMANDS, "train", Failing)
        assert _run("train", "--out", tmp_path) == 4

    def test_unexpected_error(self, tmp_path, monkeypatch):
        class Broken(BaseCommand):
            def run(self):
                raise RuntimeError("boom")

        monkeypatch.setitem(COMMANDS, "train", Broken)
        assert _run("train", "--out", tmp_path) == 1


class TestPipeline:
    def test_gen_synth_layout(self, gaussian_run):
        _, data, _ = gaussian_run
        for name, count in (("source", 4), ("validation", 2), ("target", 3)):
            assert len(os.listdir(data / name)) == count
        manifest = json.loads((data / "manifest.json").read_text(encoding="utf-8"))
        assert manifest["kind"] == "gaussian" and len(manifest["datasets"]) == 9
        assert (data / RESOLVED_CONFIG_FILE).exists()

    def test_train_outputs(self, gaussian_run):
        root, _, checkpoint = gaussian_run
        assert checkpoint.exists()
        log = pd.read_csv(root / "model" / TRAINING_LOG_FILE)
        assert list(log.columns) == ["iteration", "train_loss", "val_loss", "n_support"]
        assert log["iteration"].max() == 4

    def test_training_is_reproducible(self, gaussian_run, tmp_path):
        _, data, checkpoint = gaussian_run
        assert _run("train", "--out", tmp_path, "--data-dir", data, *SMALL_TRAINING) == 0
        assert (tmp_path / CHECKPOINT_FILE).read_bytes() == checkpoint.read_bytes()

    def test_eval(self, gaussian_run, tmp_path):
        _, data, checkpoint = gaussian_run
        code = _run("eval", "--out", tmp_path, "--data-dir", data, "--checkpoint", checkpoint,
                    "--eval-support-sizes", "5", "--run-baselines", "true", "--lambda-grid", "0.1,1",
                    "--grid-points", "10", "--grid-pairs", "1")
        assert code == 0
        pairs = pd.read_csv(tmp_path / "pairs.csv")
        assert len(pairs) == 9
        assert {"model", "oracle", "rulsif_lam0.1", "rulsif_lam1"} <= set(pairs.columns)
        summary = pd.read_csv(tmp_path / "summary.csv")
        assert summary["kernel_best_name"].iloc[0] in ("rulsif_lam0.1", "rulsif_lam1")
        assert len(pd.read_csv(tmp_path / "ratio_grid.csv")) == 10
        assert (tmp_path / "eval_summary.txt").exists()

    def test_eval_without_self_pairs(self, gaussian_run, tmp_path):
        _, data, checkpoint = gaussian_run
        assert _run("eval", "--out", tmp_path, "--data-dir", data, "--checkpoint", checkpoint,
                    "--eval-support-sizes", "3", "--include-self-pairs", "false", "--grid-pairs", "0") == 0
        pairs = pd.read_csv(tmp_path / "pairs.csv")
        assert len(pairs) == 6 and "oracle" in pairs.columns
        assert not (tmp_path / "ratio_grid.csv").exists()

    def test_compare(self, gaussian_run, tmp_path):
        _, data, checkpoint = gaussian_run
        assert _run("compare", "--out", tmp_path, "--data-dir", data, "--checkpoint", checkpoint,
                    "--compare-support-sizes", "1,2") == 0
        scores = pd.read_csv(tmp_path / "pair_scores.csv")
        assert len(scores) == 18
        assert scores["different"].sum() == 12
        aucs = pd.read_csv(tmp_path / "auc.csv")
        assert list(aucs["n_support"]) == [1, 2]
        assert aucs["model"].between(0, 1).all()

    def test_baseline_without_checkpoint(self, gaussian_run, tmp_path):
        _, data, _ = gaussian_run
        assert _run("baseline", "--out", tmp_path, "--data-dir", data, "--baseline-task", "dre",
                    "--eval-support-sizes", "5", "--lambda-grid", "0.01,1", "--grid-pairs", "0") == 0
        pairs = pd.read_csv(tmp_path / "pairs.csv")
        assert "model" not in pairs.columns and "oracle" in pairs.columns
        assert (tmp_path / "baseline_dre_summary.txt").exists()

    def test_outlier_detection(self, tmp_path):
        data, model = tmp_path / "data", tmp_path / "model"
        assert _run("gen-synth", "--out", data, *OUTLIER_DATA) == 0
        assert _run("train", "--out", model, "--data-dir", data, "--mode", "outlier", "--n-support-un", "10",
                    *SMALL_TRAINING) == 0
        assert _run("detect", "--out", tmp_path / "detect", "--data-dir", data, "--checkpoint",
                    model / CHECKPOINT_FILE, "--detect-support-sizes", "1,2", "--detect-trials", "2",
                    "--run-baselines", "true", "--lambda-grid", "0.1") == 0
        trials = pd.read_csv(tmp_path / "detect" / "trials.csv")
        assert len(trials) == 2 * 2 * 2
        assert {"model", "rulsif_lam0.1", "ulsif_lam0.1"} <= set(trials.columns)
        assert trials["model"].between(0, 1).all()

        assert _run("baseline", "--out", tmp_path / "kernels", "--data-dir", data, "--baseline-task", "detect",
                    "--detect-support-sizes", "2", "--detect-trials", "1", "--lambda-grid", "0.1") == 0
        assert (tmp_path / "kernels" / "baseline_detect_summary.txt").exists()

    def test_detect_needs_roles(self, gaussian_run, tmp_path):
        _, data, checkpoint = gaussian_run
        assert _run("detect", "--out", tmp_path, "--data-dir", data, "--checkpoint", checkpoint) == 3


@pytest.mark.slow
def test_desk_outlier_detection_auc(tmp_path):
    aucs = []
    for seed in ("0", "1", "2"):
        data, model, detect = tmp_path / f"data{seed}", tmp_path / f"model{seed}", tmp_path / f"detect{seed}"
        assert _run("gen-synth", "--out", data, "--synth-kind", "outlier", "--seed", seed) == 0
        assert _run("train", "--out", model, "--data-dir", data, "--mode", "outlier", "--max-iters", "2000",
                    "--latent-dim", "16", "--seed", seed) == 0
        assert _run("detect", "--out", detect, "--data-dir", data, "--checkpoint", model / CHECKPOINT_FILE,
                    "--detect-support-sizes", "5", "--seed", seed) == 0
        summary = pd.read_csv(detect / "summary.csv")
        assert list(summary["n_support"]) == [5]
        aucs.append(float(summary["model"].iloc[0]))
    assert sum(aucs) / len(aucs) >= 0.9
