#!/usr/bin/env python
# -*- coding: utf-8 -*-

"""
目标数据评估流程
密度比估计、数据集比较、离群检测三类扫描，由 eval/compare/detect/baseline 命令共用

元模型（params）与核方法基线（kernels: {名称: 估计器}）走同一套支持集抽取，
每个数据对的随机流由 (种子, 流, N_S, 下标) 派生，结果与线程调度无关
"""

import logging

import numpy as np
import pandas as pd

from utils.episodes import ROLE_NORMAL, draw_pair_supports
from utils.errors import DataError
from utils.evalkit import (GaussianSpec, auc, compare_datasets, comparison_auc, meta_estimator,
                           oracle_estimator, outlier_scores, pe_from_ratios, ratio_grid,
                           test_squared_error)
from utils.rng import STREAM_COMPARE, STREAM_DETECT, STREAM_EVAL, make_rng
from utils.worker_pool import WorkerPool

MODEL_COLUMN = "model"
ORACLE_COLUMN = "oracle"

logger = logging.getLogger("Harness")


def _estimators(params, kernels):
    estimators = {}
    if params is not None:
        estimators[MODEL_COLUMN] = meta_estimator(params, MODEL_COLUMN)
    estimators.update(kernels or {})
    if not estimators:
        raise DataError("没有可评估的估计器")
    return estimators


def _spec(records, dataset_id):
    if dataset_id not in records:
        raise DataError(f"清单中没有数据集 {dataset_id}")
    return GaussianSpec.from_record(records[dataset_id])


def summarize(frame, value_columns, kernel_columns, best="min"):
    """
    按支持集大小求各估计器的平均值，并给出核方法在 λ 网格上的最佳值（按测试结果挑选）

    参数:
        frame (pd.DataFrame): 逐对/逐次结果，含 n_support 列
        value_columns (list[str]): 需要汇总的列
        kernel_columns (list[str]): 核方法各 λ 的列
        best (str): "min"（平方误差）或 "max"（AUC）

    返回:
        pd.DataFrame: 每个支持集大小一行
    """
    summary = frame.groupby("n_support", sort=True)[value_columns].mean()
    if kernel_columns:
        means = summary[kernel_columns]
        pick = means.idxmin(axis=1) if best == "min" else means.idxmax(axis=1)
        summary["kernel_best"] = means.min(axis=1) if best == "min" else means.max(axis=1)
        summary["kernel_best_name"] = pick
    return summary.reset_index()


# ---------------------------------------------------------------------------
# 密度比估计
# ---------------------------------------------------------------------------

def dre_sweep(targets, pairs, support_sizes, alpha, seed, params=None, kernels=None, records=None,
              pool=None, progress_callback=None):
    """
    对每个有序目标数据对和每个支持集大小，用支持集适配并在其余实例上计算测试平方误差

    参数:
        targets (list[DatasetSample]): 目标数据集
        pairs (list[tuple]): 有序数据对下标 (i, j)
        support_sizes (list[int]): 支持集大小
        alpha (float): 相对参数
        seed (int): 运行种子
        params (ModelParams, optional): 元模型参数
        kernels (dict, optional): 核方法估计器
        records (dict, optional): 清单，提供时增加解析真值列
        pool (WorkerPool, optional): 线程池
        progress_callback (callable, optional): 进度回调函数

    返回:
        pd.DataFrame: 列为 n_support, nu_id, de_id 以及各估计器的测试平方误差
    """
    estimators = _estimators(params, kernels)
    pool = pool or WorkerPool(1)
    rows = []
    for n_support in support_sizes:
        def task(k):
            i, j = pairs[k]
            a, b = targets[i], targets[j]
            s_nu, s_de, t_nu, t_de = draw_pair_supports(a, b, n_support, make_rng(seed, STREAM_EVAL, n_support, k),
                                                        same=(i == j))
            if t_nu is None or t_de is None:
                raise DataError(f"数据对 ({a.id}, {b.id}) 在 N_S={n_support} 时没有剩余的测试实例")
            row = {"n_support": n_support, "nu_id": a.id, "de_id": b.id}
            for name, fit in estimators.items():
                row[name] = test_squared_error(fit(s_nu, s_de).predict, t_nu, t_de, alpha)
            if records is not None:
                oracle = oracle_estimator(_spec(records, a.id), _spec(records, b.id), alpha)
                row[ORACLE_COLUMN] = test_squared_error(oracle.predict, t_nu, t_de, alpha)
            return row

        rows.extend(pool.map(task, range(len(pairs)), progress_callback, f"N_S={n_support}"))
        logger.info(f"N_S={n_support}: 已评估 {len(pairs)} 个数据对")
    return pd.DataFrame(rows)


def dre_grid(targets, pairs, n_support, alpha, seed, n_points, n_pairs, params=None, kernels=None, records=None):
    """
    一维数据前若干数据对的比值曲线，支持集与 dre_sweep 中对应数据对相同

    返回:
        pd.DataFrame: 长表，列为 pair, nu_id, de_id, x 以及各估计器
    """
    estimators = _estimators(params, kernels)
    tables = []
    for k in range(min(n_pairs, len(pairs))):
        i, j = pairs[k]
        a, b = targets[i], targets[j]
        if a.dim != 1:
            raise DataError("比值曲线只适用于一维数据")
        s_nu, s_de, _, _ = draw_pair_supports(a, b, n_support, make_rng(seed, STREAM_EVAL, n_support, k), same=(i == j))
        fitted = [fit(s_nu, s_de) for fit in estimators.values()]
        if records is not None:
            fitted.append(oracle_estimator(_spec(records, a.id), _spec(records, b.id), alpha))
        both = np.concatenate([a.features[:, 0], b.features[:, 0]])
        table = ratio_grid(fitted, float(both.min()), float(both.max()), n_points)
        table.insert(0, "de_id", b.id)
        table.insert(0, "nu_id", a.id)
        table.insert(0, "pair", k)
        tables.append(table)
    return pd.concat(tables, ignore_index=True)


# ---------------------------------------------------------------------------
# 数据集比较
# ---------------------------------------------------------------------------

def is_different(a, b, records=None):
    """有清单时 (μ, σ) 记录不同即为不同分布，否则按数据集id判断"""
    if records is not None:
        return records.get(a.id) != records.get(b.id)
    return a.id != b.id


def compare_sweep(targets, pairs, support_sizes, seed, params=None, kernels=None, records=None,
                  pool=None, progress_callback=None):
    """
    数据集比较：每个有序数据对只用支持集适配，输出相对PE散度作为差异分数

    返回:
        tuple: (逐对分数表, 每个支持集大小一行的AUC表)
    """
    kernels = kernels or {}
    pool = pool or WorkerPool(1)
    rows = []
    for n_support in support_sizes:
        def task(k):
            i, j = pairs[k]
            a, b = targets[i], targets[j]
            s_nu, s_de, _, _ = draw_pair_supports(a, b, n_support, make_rng(seed, STREAM_COMPARE, n_support, k),
                                                  same=(i == j))
            row = {"n_support": n_support, "nu_id": a.id, "de_id": b.id,
                   "different": int(is_different(a, b, records))}
            if params is not None:
                row[MODEL_COLUMN] = compare_datasets(params, [(s_nu, s_de)])[0].score
            for name, fit in kernels.items():
                fitted = fit(s_nu, s_de)
                row[name] = pe_from_ratios(fitted.predict(s_nu.features), fitted.predict(s_de.features), fitted.alpha)
            return row

        rows.extend(pool.map(task, range(len(pairs)), progress_callback, f"N_S={n_support}"))
    scores = pd.DataFrame(rows)

    columns = ([MODEL_COLUMN] if params is not None else []) + list(kernels)
    auc_rows = []
    for n_support, group in scores.groupby("n_support", sort=True):
        row = {"n_support": n_support}
        for name in columns:
            row[name] = comparison_auc(group[name].to_numpy(), group["different"].to_numpy())
        auc_rows.append(row)
        logger.info(f"N_S={n_support}: " + ", ".join(f"{name} AUC={row[name]:.4f}" for name in columns))
    return scores, pd.DataFrame(auc_rows)


# ---------------------------------------------------------------------------
# 离群检测
# ---------------------------------------------------------------------------

def detect_sweep(targets, support_sizes, trials, seed, params=None, kernels=None, pool=None, progress_callback=None):
    """
    基于正常实例的离群检测：从正常池抽取支持集，支持集以外的全部实例（剩余正常实例与
    未标注池）既是分母支持集也是被打分的集合（−比值，越大越异常），按标签（1 为离群）计算AUC

    返回:
        pd.DataFrame: 列为 n_support, target, trial 以及各估计器的AUC
    """
    kernels = kernels or {}
    if params is None and not kernels:
        raise DataError("没有可评估的估计器")
    for sample in targets:
        if not sample.has_roles or sample.labels is None:
            raise DataError(f"离群检测需要 role 与 label 列，数据集 {sample.id} 缺少")

    pool = pool or WorkerPool(1)
    jobs = [(t, trial) for t in range(len(targets)) for trial in range(trials)]
    rows = []
    for n_support in support_sizes:
        def task(job):
            t, trial = job
            sample = targets[t]
            normal_pool = sample.pool(ROLE_NORMAL)
            if len(normal_pool) < n_support:
                raise DataError(f"数据集 {sample.id} 的正常池只有 {len(normal_pool)} 个实例，不足 {n_support}")
            rng = make_rng(seed, STREAM_DETECT, n_support, t, trial)
            support_idx = rng.permutation(normal_pool)[:n_support]
            s_nor = sample.take(support_idx)
            unlabeled = sample.take(np.setdiff1d(np.arange(sample.n_instances), support_idx))
            row = {"n_support": n_support, "target": sample.id, "trial": trial}
            if params is not None:
                row[MODEL_COLUMN] = auc(outlier_scores(params, s_nor, unlabeled), unlabeled.labels)
            for name, fit in kernels.items():
                fitted = fit(s_nor, unlabeled)
                row[name] = auc(-fitted.predict(unlabeled.features), unlabeled.labels)
            return row

        rows.extend(pool.map(task, jobs, progress_callback, f"N_S={n_support}"))
        logger.info(f"N_S={n_support}: 已评估 {len(targets)} 个目标数据集 × {trials} 次")
    return pd.DataFrame(rows)
