#!/usr/bin/env python
# -*- coding: utf-8 -*-

"""
模型结构模块
数据集编码器 f、g（置换不变的均值池化）、嵌入网络 h 以及参数初始化
"""

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from . import numgrad as ng
from .errors import ConfigError, ShapeError
from .rng import STREAM_INIT, make_rng

logger = logging.getLogger("Model")

DEFAULT_LATENT_DIM = 64
DEFAULT_HIDDEN_DIM = 100
DEFAULT_EMBED_DIM = 100
LATENT_DIM_GRID = (4, 8, 16, 32, 64, 128, 256)

# full: 完整方法; nolatent: 不使用数据集潜变量; nosadapt: 不做闭式适配，使用与数据集无关的权重
VARIANTS = ("full", "nolatent", "nosadapt")


def _layer_plan(input_dim, latent_dim, embed_dim, hidden_dim):
    """
    各网络的层尺寸

    返回:
        dict: {网络名: [(fan_in, fan_out), ...]}
    """
    return {
        "f": [(input_dim, hidden_dim), (hidden_dim, hidden_dim), (hidden_dim, hidden_dim)],
        "g": [(hidden_dim, hidden_dim), (hidden_dim, latent_dim)],
        "h": [(input_dim + 2 * latent_dim, hidden_dim), (hidden_dim, hidden_dim), (hidden_dim, embed_dim)],
    }


@dataclass
class ModelParams:
    """
    全部可训练状态

    tensors 按固定顺序保存 f/g/h 各层的权重和偏置、rho（λ = exp(rho)），
    nosadapt 变体另有 w_raw（w = softplus(w_raw)）
    """

    tensors: dict
    alpha: float
    input_dim: int
    latent_dim: int
    embed_dim: int = DEFAULT_EMBED_DIM
    hidden_dim: int = DEFAULT_HIDDEN_DIM
    variant: str = "full"
    plan: dict = field(init=False, repr=False)

    def __post_init__(self):
        if not 0.0 <= self.alpha < 1.0:
            raise ConfigError(f"alpha 必须在 [0, 1) 内，实际 {self.alpha}")
        if self.variant not in VARIANTS:
            raise ConfigError(f"未知的模型变体: {self.variant}")
        self.plan = _layer_plan(self.input_dim, self.latent_dim, self.embed_dim, self.hidden_dim)

    @property
    def dims(self):
        return self.input_dim, self.latent_dim, self.embed_dim

    @property
    def rho(self):
        return float(self.tensors["rho"])

    @property
    def lam(self):
        return math.exp(self.rho)

    def names(self):
        return list(self.tensors)

    def layer(self, net, index):
        return self.tensors[f"{net}.{index}.W"], self.tensors[f"{net}.{index}.b"]

    def copy(self):
        # 张量不可变，浅拷贝字典即可得到独立的参数集合
        return ModelParams(dict(self.tensors), self.alpha, self.input_dim, self.latent_dim,
                           self.embed_dim, self.hidden_dim, self.variant)

    def replace(self, name, array):
        self.tensors[name] = ng.Tensor(array)


@dataclass(frozen=True)
class LatentPair:
    """分子、分母数据集的潜变量 z_nu、z_de"""

    z_nu: ng.Tensor
    z_de: ng.Tensor


def init_params(seed, input_dim, latent_dim=DEFAULT_LATENT_DIM, alpha=0.5,
                embed_dim=DEFAULT_EMBED_DIM, hidden_dim=DEFAULT_HIDDEN_DIM, variant="full"):
    """
    初始化模型参数

    ReLU 前的层使用 He 正态初始化 (std=√(2/fan_in))，g、h 的输出层使用 std=√(1/fan_in)，
    偏置为零，rho = ln(0.1)

    参数:
        seed (int): 随机种子
        input_dim (int): 特征维度 M
        latent_dim (int): 潜变量维度 K
        alpha (float): 相对参数 α ∈ [0, 1)
        embed_dim (int): 嵌入维度 T
        hidden_dim (int): 隐藏层宽度
        variant (str): 模型变体

    返回:
        ModelParams: 初始化后的参数
    """
    for name, value in (("input_dim", input_dim), ("latent_dim", latent_dim),
                        ("embed_dim", embed_dim), ("hidden_dim", hidden_dim)):
        if int(value) != value or value < 1:
            raise ConfigError(f"{name} 必须是正整数，实际 {value}")
    if not 0.0 <= alpha < 1.0:
        raise ConfigError(f"alpha 必须在 [0, 1) 内，实际 {alpha}")
    if variant not in VARIANTS:
        raise ConfigError(f"未知的模型变体: {variant}")

    rng = make_rng(seed, STREAM_INIT)
    plan = _layer_plan(input_dim, latent_dim, embed_dim, hidden_dim)
    tensors = {}
    for net, layers in plan.items():
        for i, (fan_in, fan_out) in enumerate(layers):
            is_output = net in ("g", "h") and i == len(layers) - 1
            std = math.sqrt((1.0 if is_output else 2.0) / fan_in)
            tensors[f"{net}.{i}.W"] = ng.Tensor(rng.normal(0.0, std, size=(fan_in, fan_out)))
            tensors[f"{net}.{i}.b"] = ng.Tensor(np.zeros(fan_out))
    tensors["rho"] = ng.Tensor(math.log(0.1))
    if variant == "nosadapt":
        # softplus(w_raw) = 1/T，初始比值约为嵌入均值
        tensors["w_raw"] = ng.Tensor(np.full(embed_dim, math.log(math.expm1(1.0 / embed_dim))))

    params = ModelParams(tensors, float(alpha), int(input_dim), int(latent_dim),
                         int(embed_dim), int(hidden_dim), variant)
    logger.debug(f"初始化参数: M={input_dim}, K={latent_dim}, T={embed_dim}, 变体={variant}")
    return params


def _features(sample):
    """从 DatasetSample 或数组中取出 n×M 特征矩阵"""
    data = getattr(sample, "features", sample)
    if isinstance(data, ng.Tensor):
        return data
    arr = np.asarray(data, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr.reshape(1, -1)
    return ng.Tensor(arr)


def _mlp(x, params, net, final=None):
    layers = params.plan[net]
    for i in range(len(layers)):
        W, b = params.layer(net, i)
        x = ng.affine(x, W, b)
        if i < len(layers) - 1:
            x = ng.relu(x)
    if final is not None:
        x = final(x)
    return x


def encode_set(sample, params):
    """
    置换不变的数据集编码 z = g(1/|S| Σ f(x))

    参数:
        sample (DatasetSample | np.ndarray): 非空实例集合
        params (ModelParams): 模型参数

    返回:
        Tensor: 长度 K 的潜变量
    """
    x = _features(sample)
    if x.shape[0] == 0:
        raise ShapeError("不能对空集合编码")
    if x.shape[1] != params.input_dim:
        raise ShapeError(f"特征维度 {x.shape[1]} 与模型输入维度 {params.input_dim} 不一致")
    pooled = ng.mean_rows(_mlp(x, params, "f"))
    return _mlp(pooled, params, "g")


def encode_pair(s_nu, s_de, params):
    """计算支持集的潜变量对；nolatent 变体返回零向量"""
    if params.variant == "nolatent":
        zero = ng.Tensor(np.zeros(params.latent_dim))
        return LatentPair(zero, zero)
    return LatentPair(encode_set(s_nu, params), encode_set(s_de, params))


def embed(x, latents, params):
    """
    实例嵌入 h([x, z_nu, z_de])，输出层为 Softplus，严格为正

    参数:
        x (np.ndarray | Tensor | DatasetSample): n×M 或长度 M
        latents (LatentPair): 潜变量对
        params (ModelParams): 模型参数

    返回:
        Tensor: n×T（输入为单个向量时返回长度 T）
    """
    single = not isinstance(x, ng.Tensor) and np.ndim(getattr(x, "features", x)) == 1
    xt = _features(x)
    if xt.shape[1] != params.input_dim:
        raise ShapeError(f"特征维度 {xt.shape[1]} 与模型输入维度 {params.input_dim} 不一致")
    if latents.z_nu.shape != (params.latent_dim,) or latents.z_de.shape != (params.latent_dim,):
        raise ShapeError("潜变量维度与模型不一致")
    joined = ng.concat_broadcast(xt, latents.z_nu, latents.z_de)
    phi = _mlp(joined, params, "h", final=ng.softplus)
    if single:
        # 单行均值即该行本身，保持可微
        return ng.mean_rows(phi)
    return phi
