#!/usr/bin/env python
# -*- coding: utf-8 -*-

"""
元训练命令
读取源/验证数据集，运行元训练，写出最佳检查点和训练日志
"""

import os

from utils.log_handler import ProgressReporter
from utils.checkpoint import save_checkpoint
from utils.trainer import TrainConfig, meta_train

from .base import BaseCommand

CHECKPOINT_FILE = "model.mrdr"
TRAINING_LOG_FILE = "training_log.csv"


class TrainCommand(BaseCommand):
    """元训练"""

    name = "train"

    def run(self):
        cfg = self.config
        train_config = TrainConfig.from_config(cfg)
        data = self.load_collections(("source", "validation"))
        sources, validation = data["source"], data["validation"]

        self.logger.info(f"开始元训练: 源 {len(sources)} 个, 验证 {len(validation)} 个, 模式 {train_config.mode}, "
                         f"变体 {cfg.get('variant')}")
        with ProgressReporter("元训练") as progress:
            params, log = meta_train(sources, validation, train_config, progress_callback=progress,
                                     latent_dim=cfg.get("latent_dim"), embed_dim=cfg.get("embed_dim"),
                                     hidden_dim=cfg.get("hidden_dim"), variant=cfg.get("variant"))

        checkpoint_path = save_checkpoint(params, os.path.join(self.out_dir, CHECKPOINT_FILE))
        log.to_csv(os.path.join(self.out_dir, TRAINING_LOG_FILE))
        self.logger.info(f"训练日志已保存: {os.path.join(self.out_dir, TRAINING_LOG_FILE)}")
        return checkpoint_path, log
