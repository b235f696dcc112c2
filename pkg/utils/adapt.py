#!/usr/bin/env python
# -*- coding: utf-8 -*-

"""
任务适配模块
由支持集嵌入构造二次问题，闭式求解、截断为非负，并计算相对密度比与相对PE散度
"""

import logging
from dataclasses import dataclass

import numpy as np

from . import numgrad as ng
from .errors import ShapeError
from .model import LatentPair, ModelParams, embed, encode_pair

logger = logging.getLogger("Adapt")


@dataclass(frozen=True)
class AdaptedRatio:
    """
    针对一对支持集冻结的相对密度比估计器

    w_hat 为截断后的非负权重，w_tilde 为截断前的闭式解（训练时用于传递梯度）
    """

    latents: LatentPair
    w_hat: ng.Tensor
    w_tilde: ng.Tensor
    alpha: float
    params: ModelParams

    def predict(self, x):
        """不记录梯度的比值预测，返回 numpy 数组"""
        return estimate_ratio(x, self).numpy()


def _rows(sample):
    data = getattr(sample, "features", sample)
    if isinstance(data, ng.Tensor):
        return data
    return ng.Tensor(np.asarray(data, dtype=np.float64))


def build_quadratic(phi_nu, phi_de, alpha):
    """
    构造岭回归目标中的 K 与 k

    k = 分子嵌入的行均值
    K = (α/N_nu)·Φ_nuᵀΦ_nu + ((1−α)/N_de)·Φ_deᵀΦ_de

    参数:
        phi_nu (Tensor): N_nu×T 分子支持集嵌入
        phi_de (Tensor): N_de×T 分母支持集嵌入
        alpha (float): 相对参数

    返回:
        tuple: (K, k)
    """
    phi_nu, phi_de = ng.as_tensor(phi_nu), ng.as_tensor(phi_de)
    if phi_nu.ndim != 2 or phi_de.ndim != 2 or phi_nu.shape[1] != phi_de.shape[1]:
        raise ShapeError(f"嵌入形状不一致: {phi_nu.shape} / {phi_de.shape}")
    n_nu, n_de = phi_nu.shape[0], phi_de.shape[0]
    if n_nu < 1 or n_de < 1:
        raise ShapeError("支持集嵌入不能为空")
    k = ng.mean_rows(phi_nu)
    K = ng.linear_combination(
        [ng.weighted_gram(phi_nu, alpha / n_nu), ng.weighted_gram(phi_de, (1.0 - alpha) / n_de)],
        [1.0, 1.0],
    )
    return K, k


def adapt_to_support(s_nu, s_de, params):
    """
    用支持集适配模型：潜变量 → 嵌入 → 二次问题 → 闭式解 → 非负截断

    整条计算链在活动 Tape 上可微（截断在 w̃ ≤ 0 处梯度为零）

    参数:
        s_nu (DatasetSample | np.ndarray): 分子支持集
        s_de (DatasetSample | np.ndarray): 分母支持集
        params (ModelParams): 模型参数

    返回:
        AdaptedRatio: 适配后的估计器
    """
    x_nu, x_de = _rows(s_nu), _rows(s_de)
    if x_nu.shape[0] == 0 or x_de.shape[0] == 0:
        raise ShapeError("支持集不能为空")

    latents = encode_pair(x_nu, x_de, params)
    if params.variant == "nosadapt":
        w = ng.softplus(params.tensors["w_raw"])
        return AdaptedRatio(latents, w, w, params.alpha, params)

    phi_nu = embed(x_nu, latents, params)
    phi_de = embed(x_de, latents, params)
    K, k = build_quadratic(phi_nu, phi_de, params.alpha)
    lam = ng.exp(params.tensors["rho"])
    w_tilde = ng.ridge_solve(K, k, lam)
    w_hat = ng.relu(w_tilde)
    return AdaptedRatio(latents, w_hat, w_tilde, params.alpha, params)


def estimate_ratio(x, adapted):
    """
    相对密度比 r̂*(x) = ŵᵀh([x, z_nu, z_de])，逐行计算，结果非负

    返回:
        Tensor: 长度 n 的比值
    """
    phi = embed(_rows(x), adapted.latents, adapted.params)
    return ng.matvec(phi, adapted.w_hat)


def query_loss(q_nu, q_de, adapted):
    """
    查询集上的平方误差近似（省略常数项，可为负）

    J̃ = α/(2|Q_nu|)Σ r̂² + (1−α)/(2|Q_de|)Σ r̂² − 1/|Q_nu| Σ r̂

    返回:
        Tensor: 标量损失
    """
    x_nu, x_de = _rows(q_nu), _rows(q_de)
    n_nu, n_de = x_nu.shape[0], x_de.shape[0]
    if n_nu == 0 or n_de == 0:
        raise ShapeError("查询集不能为空")
    r_nu = estimate_ratio(x_nu, adapted)
    r_de = estimate_ratio(x_de, adapted)
    alpha = adapted.alpha
    return ng.linear_combination(
        [ng.sum_squares(r_nu), ng.sum_squares(r_de), ng.total(r_nu)],
        [alpha / (2.0 * n_nu), (1.0 - alpha) / (2.0 * n_de), -1.0 / n_nu],
    )


def pe_divergence(a, b, adapted):
    """
    相对PE散度估计 P̂E = −J̃(A, B) − 1/2

    分布相同且估计完美 (r̂ ≡ 1) 时恰好为 0

    参数:
        a (DatasetSample): 分子侧实例（通常即分子支持集）
        b (DatasetSample): 分母侧实例
        adapted (AdaptedRatio): 以 (a, b) 适配得到的估计器

    返回:
        float: 散度估计
    """
    return -float(query_loss(a, b, adapted)) - 0.5
