#!/usr/bin/env python
# -*- coding: utf-8 -*-

"""
子命令基类
负责数据目录解析、清单与检查点读取、目标数据对枚举等各命令共用的步骤
"""

import json
import logging
import os

from utils.baselines import kernel_estimators
from utils.checkpoint import load_checkpoint
from utils.episodes import load_dataset_dir, split_sources
from utils.errors import ConfigError, DataError
from utils.evalkit import EvalReport
from utils.log_handler import ProgressReporter
from utils.rng import STREAM_SPLIT, make_rng
from utils.worker_pool import WorkerPool

from .harness import compare_sweep, detect_sweep, dre_grid, dre_sweep, summarize

SPLIT_DIRS = ("source", "validation", "target")
MANIFEST_FILE = "manifest.json"


class BaseCommand:
    """
    子命令基类

    参数:
        config (ConfigManager): 已校验的运行配置
        out_dir (str): 输出目录
    """

    name = ""

    def __init__(self, config, out_dir):
        self.config = config
        self.out_dir = out_dir
        self.logger = logging.getLogger(type(self).__name__)
        self.pool = WorkerPool(config.get("threads"))

    def run(self):
        raise NotImplementedError

    # ------------------------------------------------------------------
    # 数据
    # ------------------------------------------------------------------

    def data_dir(self):
        path = self.config.get("data_dir")
        if not path:
            raise ConfigError(f"{self.name} 需要配置 data_dir")
        if not os.path.isdir(path):
            raise DataError(f"数据目录不存在: {path}")
        return path

    def load_collections(self, needed=SPLIT_DIRS):
        """
        读取源/验证/目标数据集

        数据目录含 source/validation/target 子目录时按子目录读取；否则读取平铺目录，
        配置了 split_counts 时按运行种子划分，未配置时全部视为目标数据集

        参数:
            needed (tuple): 需要的集合名称

        返回:
            dict: {集合名: list[DatasetSample]}
        """
        root = self.data_dir()
        threads = self.config.get("threads")
        if all(os.path.isdir(os.path.join(root, name)) for name in needed):
            return {name: load_dataset_dir(os.path.join(root, name), threads) for name in needed}

        datasets = load_dataset_dir(root, threads)
        counts = self.config.get("split_counts")
        if counts:
            parts = dict(zip(SPLIT_DIRS, split_sources(datasets, counts, make_rng(self.config.get("seed"), STREAM_SPLIT))))
            self.logger.info(f"平铺数据目录已划分: 源 {len(parts['source'])} / 验证 {len(parts['validation'])} "
                             f"/ 目标 {len(parts['target'])}")
        elif set(needed) == {"target"}:
            parts = {"target": datasets}
        else:
            raise ConfigError(f"数据目录 {root} 没有 {'/'.join(needed)} 子目录，需要配置 split_counts")

        for name in needed:
            if not parts[name]:
                raise DataError(f"{name} 集合为空")
        return {name: parts[name] for name in needed}

    def load_targets(self):
        return self.load_collections(("target",))["target"]

    def load_manifest(self):
        """读取合成数据清单 {数据集id: {"mu": [...], "sigma": [...]}}，不存在时返回 None"""
        path = self.config.get("manifest")
        if not path and self.config.get("data_dir"):
            path = os.path.join(self.config.get("data_dir"), MANIFEST_FILE)
            if not os.path.exists(path):
                return None
        if not path:
            return None
        if not os.path.exists(path):
            raise DataError(f"清单文件不存在: {path}")
        with open(path, 'r', encoding='utf-8') as f:
            manifest = json.load(f)
        records = manifest.get("datasets", manifest)
        self.logger.info(f"读取清单: {path} ({len(records)} 个数据集)")
        return records

    def load_params(self, datasets):
        """读取检查点并检查特征维度与数据一致"""
        path = self.config.get("checkpoint")
        if not path:
            raise ConfigError(f"{self.name} 需要配置 checkpoint")
        params = load_checkpoint(path)
        dim = datasets[0].dim
        if params.input_dim != dim:
            raise DataError(f"检查点特征维度 M={params.input_dim} 与数据维度 M={dim} 不一致")
        return params

    def target_pairs(self, targets):
        """有序目标数据对的下标，是否包含自配对由 include_self_pairs 决定"""
        include_self = self.config.get("include_self_pairs")
        return [(i, j) for i in range(len(targets)) for j in range(len(targets)) if include_self or i != j]

    def write_report(self, report):
        report.write(self.out_dir)
        return report


class TargetCommand(BaseCommand):
    """
    目标数据评估命令的公共部分：组装核方法估计器，并把扫描结果整理成评估报告
    """

    def relative_alpha(self, params):
        alpha = self.config.get("alpha")
        if params is not None and params.alpha != alpha:
            self.logger.warning(f"配置中的 alpha={alpha} 与检查点的 alpha={params.alpha} 不同，使用检查点的值")
            return params.alpha
        return alpha

    def kernels(self, alpha, with_ulsif=False):
        """λ 网格上的 RuLSIF 估计器；with_ulsif 时再加上 α = 0 的 uLSIF"""
        cfg = self.config
        kernels = kernel_estimators(alpha, cfg.get("lambda_grid"), cfg.get("rulsif_max_centers"), cfg.get("seed"))
        if with_ulsif and alpha != 0:
            kernels.update(kernel_estimators(0.0, cfg.get("lambda_grid"), cfg.get("rulsif_max_centers"), cfg.get("seed")))
        return kernels

    def _summary_lines(self, report, summary, columns, metric):
        for _, row in summary.iterrows():
            parts = [f"{name}={row[name]:.4f}" for name in columns]
            if "kernel_best" in summary.columns:
                parts.append(f"kernel_best={row['kernel_best']:.4f} ({row['kernel_best_name']})")
            report.add_line(f"N_S={int(row['n_support'])} {metric}: " + ", ".join(parts))

    def dre_report(self, name, targets, params=None, kernels=None, records=None):
        """密度比估计：逐对测试平方误差、按 N_S 汇总，一维数据另附比值曲线"""
        cfg = self.config
        kernels = kernels or {}
        alpha = self.relative_alpha(params)
        pairs = self.target_pairs(targets)
        sizes = cfg.get("eval_support_sizes")
        with ProgressReporter("密度比评估") as progress:
            frame = dre_sweep(targets, pairs, sizes, alpha, cfg.get("seed"), params=params, kernels=kernels,
                              records=records, pool=self.pool, progress_callback=progress)

        columns = [c for c in frame.columns if c not in ("n_support", "nu_id", "de_id")]
        summary = summarize(frame, columns, list(kernels), best="min")
        report = EvalReport(name)
        report.notes.append(f"测试平方误差省略常数项，越小越好；α={alpha}；目标数据对 {len(pairs)} 个"
                            f"（{'含' if cfg.get('include_self_pairs') else '不含'}自配对）")
        if kernels:
            report.notes.append("kernel_best 为 λ 网格上测试结果最好的核方法，属于按测试结果挑选")
        report.add_table("pairs", frame)
        report.add_table("summary", summary)
        self._summary_lines(report, summary, columns, "测试平方误差")

        if targets[0].dim == 1 and cfg.get("grid_pairs") > 0:
            first = summary.iloc[0]
            grid_kernels = {first["kernel_best_name"]: kernels[first["kernel_best_name"]]} if kernels else None
            report.add_table("ratio_grid", dre_grid(targets, pairs, int(first["n_support"]), alpha, cfg.get("seed"),
                                                    cfg.get("grid_points"), cfg.get("grid_pairs"), params=params,
                                                    kernels=grid_kernels, records=records))
        return self.write_report(report)

    def compare_report(self, name, targets, params=None, kernels=None, records=None):
        """数据集比较：逐对相对PE散度分数与每个 N_S 的AUC"""
        cfg = self.config
        kernels = kernels or {}
        pairs = self.target_pairs(targets)
        with ProgressReporter("数据集比较") as progress:
            scores, aucs = compare_sweep(targets, pairs, cfg.get("compare_support_sizes"), cfg.get("seed"),
                                         params=params, kernels=kernels, records=records, pool=self.pool,
                                         progress_callback=progress)
        columns = [c for c in aucs.columns if c != "n_support"]
        summary = summarize(aucs, columns, list(kernels), best="max")
        report = EvalReport(name)
        basis = "(μ, σ) 记录" if records is not None else "数据集id"
        report.notes.append(f"AUC 以“来自不同分布”为正类，同/异按{basis}判定；分数为相对PE散度，越大越不同")
        report.add_table("pair_scores", scores)
        report.add_table("auc", summary)
        self._summary_lines(report, summary, columns, "AUC")
        return self.write_report(report)

    def detect_report(self, name, targets, params=None, kernels=None):
        """离群检测：每个目标、每次重复、每个 N_S 的AUC及其平均"""
        cfg = self.config
        kernels = kernels or {}
        with ProgressReporter("离群检测") as progress:
            frame = detect_sweep(targets, cfg.get("detect_support_sizes"), cfg.get("detect_trials"), cfg.get("seed"),
                                 params=params, kernels=kernels, pool=self.pool, progress_callback=progress)
        columns = [c for c in frame.columns if c not in ("n_support", "target", "trial")]
        summary = summarize(frame, columns, list(kernels), best="max")
        report = EvalReport(name)
        report.notes.append("支持集以外的全部实例参与适配与打分（剩余正常实例计为 label=0）；"
                            "AUC 以离群实例（label=1）为正类；分数为负的相对密度比，越大越异常")
        report.add_table("trials", frame)
        report.add_table("summary", summary)
        self._summary_lines(report, summary, columns, "平均AUC")
        return self.write_report(report)
