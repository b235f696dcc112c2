#!/usr/bin/env python
# -*- coding: utf-8 -*-

"""
合成数据生成命令
写出 source/validation/target 三个CSV目录，以及记录每个数据集 (μ, σ) 的清单
"""

import json
import os

from utils.episodes import gen_synthetic_gaussian_suite, gen_synthetic_outlier_suite, write_dataset_dir
from utils.rng import STREAM_SYNTH, make_rng

from .base import MANIFEST_FILE, SPLIT_DIRS, BaseCommand


class GenSynthCommand(BaseCommand):
    """生成合成基准数据"""

    name = "gen-synth"

    def run(self):
        cfg = self.config
        kind = cfg.get("synth_kind")
        n_source, n_val, n_target = cfg.synth_counts()
        rng = make_rng(cfg.get("seed"), STREAM_SYNTH)

        if kind == "outlier":
            *splits, records = gen_synthetic_outlier_suite(
                n_source, n_val, n_target, cfg.get("n_normal"), cfg.get("n_unlabeled"), cfg.get("outlier_rate"),
                rng, dim=cfg.get("synth_dim"), shift=cfg.get("outlier_shift"),
                outlier_variance=cfg.get("outlier_variance"))
        else:
            *splits, records = gen_synthetic_gaussian_suite(n_source, n_val, n_target, cfg.get("n_per_dataset"), rng)

        for name, datasets in zip(SPLIT_DIRS, splits):
            write_dataset_dir(datasets, os.path.join(self.out_dir, name))

        manifest_path = os.path.join(self.out_dir, MANIFEST_FILE)
        with open(manifest_path, 'w', encoding='utf-8') as f:
            json.dump({"kind": kind, "seed": cfg.get("seed"), "datasets": records}, f, indent=2, sort_keys=True)
        self.logger.info(f"合成数据已写入 {self.out_dir}: {n_source + n_val + n_target} 个数据集，清单 {manifest_path}")
        return self.out_dir
