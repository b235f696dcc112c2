#!/usr/bin/env python
# -*- coding: utf-8 -*-

"""
评估模块
平方误差评估、AUC、高斯真值相对密度比，以及数据集比较与离群打分
"""

import logging
import os
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import pandas as pd
from scipy.stats import norm, rankdata

from .adapt import adapt_to_support, pe_divergence
from .errors import DataError, NumericalError

logger = logging.getLogger("EvalKit")


@dataclass(frozen=True, eq=False)
class GaussianSpec:
    """各向同性（标量 sigma）或按维（向量 sigma）的高斯分布"""

    mu: np.ndarray
    sigma: np.ndarray

    def __post_init__(self):
        mu = np.atleast_1d(np.asarray(self.mu, dtype=np.float64))
        sigma = np.broadcast_to(np.asarray(self.sigma, dtype=np.float64), mu.shape).copy()
        if np.any(sigma <= 0):
            raise DataError(f"sigma 必须为正，实际 {sigma}")
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "sigma", sigma)

    @classmethod
    def from_record(cls, record):
        return cls(record["mu"], record["sigma"])

    def logpdf(self, x):
        x = np.asarray(x, dtype=np.float64)
        x = x.reshape(-1, self.mu.shape[0])
        return norm.logpdf(x, loc=self.mu, scale=self.sigma).sum(axis=1)


def true_relative_ratio(x, nu, de, alpha):
    """
    解析的相对密度比 r_α(x) = p_nu / (α·p_nu + (1−α)·p_de)，在对数空间计算

    参数:
        x (float | np.ndarray): 单点或 n×M 点集（一维时可为长度 n 的向量）
        nu (GaussianSpec): 分子分布
        de (GaussianSpec): 分母分布
        alpha (float): 相对参数 α ∈ [0, 1)

    返回:
        np.ndarray: 长度 n 的比值
    """
    if not 0.0 <= alpha < 1.0:
        raise DataError(f"alpha 必须在 [0, 1) 内，实际 {alpha}")
    log_nu = nu.logpdf(x)
    log_de = de.logpdf(x)
    if alpha == 0.0:
        if np.any(np.isneginf(log_de)):
            raise NumericalError("alpha=0 时分母密度在某些点上为零")
        return np.exp(log_nu - log_de)
    # 1 / (α + (1−α)·p_de/p_nu)
    with np.errstate(over="ignore"):
        return 1.0 / (alpha + (1.0 - alpha) * np.exp(log_de - log_nu))


def squared_error_objective(r_nu, r_de, alpha):
    """
    α/2·mean(r_nu²) + (1−α)/2·mean(r_de²) − mean(r_nu)，即省略常数项的平方误差

    参数:
        r_nu (np.ndarray): 分子侧实例上的比值
        r_de (np.ndarray): 分母侧实例上的比值
        alpha (float): 相对参数

    返回:
        float: 目标值
    """
    r_nu = np.asarray(r_nu, dtype=np.float64)
    r_de = np.asarray(r_de, dtype=np.float64)
    if r_nu.size == 0 or r_de.size == 0:
        raise DataError("评估集合不能为空")
    return float(alpha / 2.0 * np.mean(r_nu ** 2) + (1.0 - alpha) / 2.0 * np.mean(r_de ** 2) - np.mean(r_nu))


def pe_from_ratios(r_nu, r_de, alpha):
    """由比值计算相对PE散度 −J̃ − 1/2"""
    return -squared_error_objective(r_nu, r_de, alpha) - 0.5


def _as_rows(sample):
    return np.asarray(getattr(sample, "features", sample), dtype=np.float64)


def test_squared_error(ratio_fn, t_nu, t_de, alpha):
    """
    在测试实例上评估平方误差（省略常数项），适用于元模型、基线或解析真值

    参数:
        ratio_fn (callable): n×M 数组 → 长度 n 的比值
        t_nu (DatasetSample): 分子测试集
        t_de (DatasetSample): 分母测试集
        alpha (float): 相对参数

    返回:
        float: 测试平方误差
    """
    x_nu, x_de = _as_rows(t_nu), _as_rows(t_de)
    if len(x_nu) == 0 or len(x_de) == 0:
        raise DataError("测试集不能为空")
    return squared_error_objective(ratio_fn(x_nu), ratio_fn(x_de), alpha)


# 让 pytest 不把它当作测试函数收集
test_squared_error.__test__ = False


def auc(scores, labels):
    """
    ROC曲线下面积（Mann–Whitney U 统计量 / (n_pos·n_neg)），并列按 0.5 计

    参数:
        scores (list[float]): 分数，越大越倾向正类
        labels (list[int]): 0/1 标签

    返回:
        float: AUC ∈ [0, 1]
    """
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels).astype(int)
    if scores.shape != labels.shape:
        raise DataError(f"分数与标签长度不一致: {scores.shape} / {labels.shape}")
    n_pos = int(np.sum(labels == 1))
    n_neg = int(np.sum(labels == 0))
    if n_pos == 0 or n_neg == 0:
        raise DataError("AUC 需要正负两类样本")
    ranks = rankdata(scores)
    u = ranks[labels == 1].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


@dataclass(frozen=True)
class ScoredPair:
    nu_id: str
    de_id: str
    score: float


def compare_datasets(params, pairs):
    """
    数据集比较：对每个有序对 (A, B) 以 A 为分子、B 为分母适配，输出相对PE散度作为差异分数

    参数:
        params (ModelParams): 训练好的参数
        pairs (list[tuple]): [(A, B), ...]，A、B 为非空 DatasetSample

    返回:
        list[ScoredPair]: 与输入顺序一致的打分结果
    """
    scored = []
    for a, b in pairs:
        adapted = adapt_to_support(a, b, params)
        scored.append(ScoredPair(a.id, b.id, pe_divergence(a, b, adapted)))
    return scored


def comparison_auc(scores, different):
    """以"来自不同分布"为正类计算比较AUC"""
    return auc(scores, np.asarray(different, dtype=int))


def outlier_scores(params, normal, unlabeled):
    """
    基于正常实例的离群打分：以正常集为分子、未标注集为分母适配，分数为 −r̂*(x)

    参数:
        params (ModelParams): 训练好的参数（离群检测模式）
        normal (DatasetSample): 正常实例
        unlabeled (DatasetSample): 未标注实例

    返回:
        np.ndarray: 每个未标注实例的分数（越大越异常，恒 ≤ 0）
    """
    adapted = adapt_to_support(normal, unlabeled, params)
    return -adapted.predict(_as_rows(unlabeled))


# ---------------------------------------------------------------------------
# 估计器抽象与报告
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FittedRatio:
    """某个估计器在一对支持集上拟合后的比值函数"""

    name: str
    alpha: float
    predict: Callable[[np.ndarray], np.ndarray]


def meta_estimator(params, name="model"):
    """把元模型包装为 (S_nu, S_de) → FittedRatio 的估计器"""

    def fit(s_nu, s_de):
        adapted = adapt_to_support(s_nu, s_de, params)
        return FittedRatio(name, params.alpha, adapted.predict)

    return fit


def oracle_estimator(nu, de, alpha):
    """解析真值作为一个"估计器"，用于对照"""
    return FittedRatio("oracle", alpha, lambda x: true_relative_ratio(x, nu, de, alpha))


def ratio_grid(fitted, low, high, n_points=200):
    """
    一维数据的比值曲线表（横轴为均匀网格）

    参数:
        fitted (list[FittedRatio]): 需要绘制的估计器
        low (float): 网格下界
        high (float): 网格上界
        n_points (int): 网格点数

    返回:
        pd.DataFrame: 列为 x 与各估计器名称
    """
    x = np.linspace(low, high, n_points)
    table = {"x": x}
    for fr in fitted:
        table[fr.name] = fr.predict(x.reshape(-1, 1))
    return pd.DataFrame(table)


@dataclass
class EvalReport:
    """
    评估报告：若干CSV表格加一段纯文本摘要

    notes 写在摘要开头，用于记录标签方向等约定
    """

    name: str
    tables: dict = field(default_factory=dict)
    summary: list = field(default_factory=list)
    notes: list = field(default_factory=list)

    def add_table(self, key, frame):
        self.tables[key] = frame

    def add_line(self, line):
        self.summary.append(line)
        logger.info(line)

    def write(self, out_dir):
        """写出 <key>.csv 以及 <name>_summary.txt"""
        os.makedirs(out_dir, exist_ok=True)
        for key, frame in self.tables.items():
            frame.to_csv(os.path.join(out_dir, f"{key}.csv"), index=False)
        with open(os.path.join(out_dir, f"{self.name}_summary.txt"), 'w', encoding='utf-8') as f:
            f.write(f"# {self.name}\n\n")
            for note in self.notes:
                f.write(f"* {note}\n")
            if self.notes:
                f.write("\n")
            for line in self.summary:
                f.write(line + "\n")
        logger.info(f"评估报告已保存至: {out_dir}")
