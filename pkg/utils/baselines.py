#!/usr/bin/env python
# -*- coding: utf-8 -*-

"""
核方法基线模块
只用目标支持集从零拟合的 RuLSIF / uLSIF（高斯核，带宽由中位数启发式确定）
"""

import logging
from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist, pdist

from . import numgrad as ng
from .adapt import build_quadratic
from .errors import DataError
from .evalkit import FittedRatio, pe_from_ratios
from .rng import STREAM_BASELINE, make_rng

logger = logging.getLogger("Baselines")

LAMBDA_GRID = (1e-4, 1e-3, 1e-2, 1e-1, 1.0)
MAX_CENTERS = 100


@dataclass(frozen=True, eq=False)
class KernelRatioModel:
    """
    核比值模型 r(x) = θᵀφ(x)，φ_b(x) = exp(−‖x − c_b‖²/(2σ²))
    """

    centers: np.ndarray
    theta: np.ndarray
    sigma: float
    alpha: float
    lam: float


def _rows(sample):
    arr = np.asarray(getattr(sample, "features", sample), dtype=np.float64)
    return arr.reshape(-1, 1) if arr.ndim == 1 else arr


def median_bandwidth(*samples):
    """
    中位数启发式：所有实例两两欧氏距离的中位数（偶数个时取中间两个的平均）

    参数:
        *samples (DatasetSample | np.ndarray): 一个或多个实例集合，合并后计算

    返回:
        float: 高斯核宽度
    """
    x = np.vstack([_rows(s) for s in samples])
    if x.shape[0] < 2:
        raise DataError("中位数启发式至少需要两个实例")
    sigma = float(np.median(pdist(x)))
    if sigma <= 0:
        raise DataError("所有实例相同，无法确定核宽度")
    return sigma


def gaussian_kernel(x, centers, sigma):
    return np.exp(-cdist(_rows(x), centers, "sqeuclidean") / (2.0 * sigma ** 2))


def rulsif_fit(s_nu, s_de, alpha, lam, sigma, max_centers=MAX_CENTERS, rng=None):
    """
    拟合 RuLSIF 核模型：θ = max(0, (K + λI)⁻¹k)，K、k 的构造与元模型相同

    参数:
        s_nu (DatasetSample): 分子支持集
        s_de (DatasetSample): 分母支持集
        alpha (float): 相对参数（0 即 uLSIF）
        lam (float): 正则化系数
        sigma (float): 高斯核宽度
        max_centers (int): 核中心数上限 B
        rng (numpy.random.Generator, optional): 中心子采样的随机数生成器

    返回:
        KernelRatioModel: 拟合结果
    """
    x_nu, x_de = _rows(s_nu), _rows(s_de)
    if len(x_nu) == 0 or len(x_de) == 0:
        raise DataError("支持集不能为空")
    if sigma <= 0 or lam <= 0:
        raise DataError(f"sigma 和 λ 必须为正 (sigma={sigma}, λ={lam})")

    centers = x_nu
    if len(x_nu) > max_centers:
        rng = rng if rng is not None else make_rng(0, STREAM_BASELINE)
        centers = x_nu[np.sort(rng.choice(len(x_nu), size=max_centers, replace=False))]

    K, k = build_quadratic(gaussian_kernel(x_nu, centers, sigma), gaussian_kernel(x_de, centers, sigma), alpha)
    theta = np.maximum(0.0, ng.solve_spd(K.numpy(), k.numpy(), lam))
    return KernelRatioModel(centers, theta, float(sigma), float(alpha), float(lam))


def ulsif_fit(s_nu, s_de, lam, sigma, max_centers=MAX_CENTERS, rng=None):
    """uLSIF 即 α = 0 的 RuLSIF"""
    return rulsif_fit(s_nu, s_de, 0.0, lam, sigma, max_centers, rng)


def rulsif_predict(model, x):
    """θᵀφ(x)，逐行计算，非负"""
    x = _rows(x)
    if x.shape[1] != model.centers.shape[1]:
        raise DataError(f"特征维度 {x.shape[1]} 与核中心维度 {model.centers.shape[1]} 不一致")
    return gaussian_kernel(x, model.centers, model.sigma) @ model.theta


def rulsif_pe_divergence(model, s_nu, s_de):
    """核模型在支持集上的（相对）PE散度估计 −J̃ − 1/2"""
    return pe_from_ratios(rulsif_predict(model, s_nu), rulsif_predict(model, s_de), model.alpha)


def _estimator_name(alpha, lam):
    return f"{'ulsif' if alpha == 0 else 'rulsif'}_lam{lam:g}"


def kernel_estimator(alpha, lam, max_centers=MAX_CENTERS, seed=0):
    """
    把 RuLSIF/uLSIF 包装为 (S_nu, S_de) → FittedRatio 的估计器，带宽按两侧支持集的并集取中位数
    """
    name = _estimator_name(alpha, lam)

    def fit(s_nu, s_de):
        sigma = median_bandwidth(s_nu, s_de)
        model = rulsif_fit(s_nu, s_de, alpha, lam, sigma, max_centers, make_rng(seed, STREAM_BASELINE))
        return FittedRatio(name, alpha, lambda x: rulsif_predict(model, x))

    return fit


def kernel_estimators(alpha, lambdas=LAMBDA_GRID, max_centers=MAX_CENTERS, seed=0):
    """λ 网格上的一组核估计器，按名称索引（保持网格顺序）"""
    return {_estimator_name(alpha, lam): kernel_estimator(alpha, lam, max_centers, seed) for lam in lambdas}
