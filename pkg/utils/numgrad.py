#!/usr/bin/env python
# -*- coding: utf-8 -*-

"""
最小反向模式自动微分模块
只提供模型需要的原语：仿射层、ReLU、Softplus、按行均值、岭回归闭式解等，
每个原语在计算时把反向传播所需的输入记录到当前线程的 Tape 上
"""

import logging
import threading
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy import linalg
from scipy.special import expit

from .errors import IllConditionedError, NumericalError, ShapeError

logger = logging.getLogger("NumGrad")

# Cholesky 失败后的对角抖动系数（乘以 trace(K)/T）
JITTER_SCALE = 1e-10

_local = threading.local()


def _tape_stack():
    if not hasattr(_local, "stack"):
        _local.stack = []
    return _local.stack


def active_tape():
    """返回当前线程正在记录的 Tape，没有时返回 None"""
    stack = _tape_stack()
    return stack[-1] if stack else None


class Tensor:
    """
    不可变的双精度张量

    数据在构造时复制并设为只读，构造时检查所有元素有限
    """

    __slots__ = ("data",)

    def __init__(self, data):
        arr = np.array(data, dtype=np.float64)
        if not np.all(np.isfinite(arr)):
            raise NumericalError(f"张量包含非有限值 (shape={arr.shape})")
        arr.setflags(write=False)
        self.data = arr

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    @property
    def size(self):
        return self.data.size

    def numpy(self):
        return self.data

    def __float__(self):
        if self.data.size != 1:
            raise ShapeError(f"只有单元素张量可以转换为浮点数 (shape={self.shape})")
        return float(self.data.reshape(()))

    def __len__(self):
        return self.data.shape[0]

    def __repr__(self):
        return f"Tensor(shape={self.shape})"


def as_tensor(value):
    """把数组或标量包装为常量张量，已是张量时原样返回"""
    return value if isinstance(value, Tensor) else Tensor(value)


@dataclass
class _Record:
    op: str
    inputs: tuple
    output: Tensor
    backward: Callable


class Tape:
    """
    按执行顺序记录原语运算的磁带

    用法:
        with Tape() as tape:
            loss = ...
        grads = tape.gradient(loss, [W, b])
    """

    def __init__(self):
        self.records = []
        self.backward_order = []

    def __enter__(self):
        _tape_stack().append(self)
        return self

    def __exit__(self, exc_type, exc, tb):
        _tape_stack().pop()
        return False

    def record(self, op, inputs, output, backward):
        self.records.append(_Record(op, tuple(inputs), output, backward))

    def gradient(self, loss, sources):
        """
        反向传播，计算标量损失对各叶子张量的梯度

        参数:
            loss (Tensor): 单元素损失
            sources (list[Tensor]): 需要梯度的张量

        返回:
            list[np.ndarray]: 与 sources 一一对应、形状相同的梯度；未参与计算的为零
        """
        if loss.size != 1:
            raise ShapeError(f"损失必须是标量 (shape={loss.shape})")

        grads = {id(loss): np.ones(loss.shape)}
        self.backward_order = []
        for rec in reversed(self.records):
            upstream = grads.get(id(rec.output))
            if upstream is None:
                continue
            self.backward_order.append(rec.op)
            input_grads = rec.backward(upstream)
            for tensor, g in zip(rec.inputs, input_grads):
                if g is None:
                    continue
                key = id(tensor)
                if key in grads:
                    grads[key] = grads[key] + g
                else:
                    grads[key] = g

        result = []
        for src in sources:
            g = grads.get(id(src))
            result.append(np.zeros(src.shape) if g is None else np.asarray(g).reshape(src.shape))
        return result


def _emit(op, inputs, out, backward):
    """构造输出张量并在有活动磁带时记录反向函数"""
    if not np.all(np.isfinite(out)):
        raise NumericalError(f"{op} 的输出包含非有限值")
    output = Tensor(out)
    tape = active_tape()
    if tape is not None:
        tape.record(op, inputs, output, backward)
    return output


# ---------------------------------------------------------------------------
# 原语
# ---------------------------------------------------------------------------

def affine(x, W, b):
    """
    仿射变换 y = xW + b（偏置按行广播）

    参数:
        x (Tensor): n×a 矩阵或长度 a 的向量
        W (Tensor): a×b 权重
        b (Tensor): 长度 b 的偏置

    返回:
        Tensor: n×b 矩阵（x 为向量时返回长度 b 的向量）
    """
    x, W, b = as_tensor(x), as_tensor(W), as_tensor(b)
    if W.ndim != 2 or b.ndim != 1 or x.ndim not in (1, 2):
        raise ShapeError(f"affine 维度不合法: x{x.shape} W{W.shape} b{b.shape}")
    if x.shape[-1] != W.shape[0] or W.shape[1] != b.shape[0]:
        raise ShapeError(f"affine 形状不匹配: x{x.shape} W{W.shape} b{b.shape}")

    xv, Wv = x.data, W.data

    def backward(g):
        if xv.ndim == 1:
            return g @ Wv.T, np.outer(xv, g), g
        return g @ Wv.T, xv.T @ g, g.sum(axis=0)

    return _emit("affine", (x, W, b), xv @ Wv + b.data, backward)


def relu(x):
    """逐元素 max(0, x)，x=0 处次梯度取 0"""
    x = as_tensor(x)
    mask = x.data > 0

    def backward(g):
        return (g * mask,)

    return _emit("relu", (x,), np.where(mask, x.data, 0.0), backward)


def softplus(x):
    """逐元素 ln(1+e^x)，按 max(x,0)+ln(1+e^{-|x|}) 计算避免溢出"""
    x = as_tensor(x)
    xv = x.data
    out = np.maximum(xv, 0.0) + np.log1p(np.exp(-np.abs(xv)))

    def backward(g):
        return (g * expit(xv),)

    return _emit("softplus", (x,), out, backward)


def mean_rows(x):
    """n×a 矩阵的列均值（对所有行求平均），返回长度 a 的向量"""
    x = as_tensor(x)
    if x.ndim != 2:
        raise ShapeError(f"mean_rows 需要二维输入，实际 {x.shape}")
    n = x.shape[0]
    if n == 0:
        raise ShapeError("mean_rows 的输入不能为空集合")

    def backward(g):
        return (np.broadcast_to(g / n, (n, g.shape[0])).copy(),)

    return _emit("mean_rows", (x,), x.data.mean(axis=0), backward)


def concat_broadcast(x, *vectors):
    """
    把若干向量广播到 x 的每一行后按列拼接: [x, v1, v2, ...]

    参数:
        x (Tensor): n×a 矩阵
        *vectors (Tensor): 一维向量

    返回:
        Tensor: n×(a+Σ|v|) 矩阵
    """
    x = as_tensor(x)
    vectors = tuple(as_tensor(v) for v in vectors)
    if x.ndim != 2 or any(v.ndim != 1 for v in vectors):
        raise ShapeError("concat_broadcast 需要一个矩阵和若干向量")
    n = x.shape[0]
    blocks = [x.data] + [np.broadcast_to(v.data, (n, v.shape[0])) for v in vectors]
    widths = [b.shape[1] for b in blocks]
    offsets = np.cumsum([0] + widths)

    def backward(g):
        grads = [g[:, offsets[0]:offsets[1]]]
        for i in range(1, len(blocks)):
            grads.append(g[:, offsets[i]:offsets[i + 1]].sum(axis=0))
        return tuple(grads)

    return _emit("concat_broadcast", (x,) + vectors, np.concatenate(blocks, axis=1), backward)


def weighted_gram(phi, weight):
    """c·ΦᵀΦ，其中 c 为常数权重"""
    phi = as_tensor(phi)
    if phi.ndim != 2:
        raise ShapeError(f"weighted_gram 需要二维输入，实际 {phi.shape}")
    c = float(weight)
    pv = phi.data

    def backward(g):
        return (c * pv @ (g + g.T),)

    return _emit("weighted_gram", (phi,), c * (pv.T @ pv), backward)


def linear_combination(tensors, coeffs):
    """Σ c_i·t_i，所有张量形状相同，系数为常数"""
    tensors = tuple(as_tensor(t) for t in tensors)
    coeffs = [float(c) for c in coeffs]
    if len(tensors) != len(coeffs) or not tensors:
        raise ShapeError("linear_combination 的张量与系数数量不一致")
    shape = tensors[0].shape
    if any(t.shape != shape for t in tensors):
        raise ShapeError("linear_combination 的张量形状不一致")
    out = np.zeros(shape)
    for t, c in zip(tensors, coeffs):
        out = out + c * t.data

    def backward(g):
        return tuple(c * g for c in coeffs)

    return _emit("linear_combination", tensors, out, backward)


def matvec(phi, w):
    """Φw：n×T 矩阵乘长度 T 的向量"""
    phi, w = as_tensor(phi), as_tensor(w)
    if phi.ndim != 2 or w.ndim != 1 or phi.shape[1] != w.shape[0]:
        raise ShapeError(f"matvec 形状不匹配: Φ{phi.shape} w{w.shape}")
    pv, wv = phi.data, w.data

    def backward(g):
        return np.outer(g, wv), pv.T @ g

    return _emit("matvec", (phi, w), pv @ wv, backward)


def exp(x):
    """逐元素指数"""
    x = as_tensor(x)
    out = np.exp(x.data)

    def backward(g):
        return (g * out,)

    return _emit("exp", (x,), out, backward)


def total(x):
    """所有元素求和，返回标量"""
    x = as_tensor(x)
    shape = x.shape

    def backward(g):
        return (np.full(shape, float(g)),)

    return _emit("total", (x,), np.asarray(x.data.sum()), backward)


def sum_squares(x):
    """所有元素平方和，返回标量"""
    x = as_tensor(x)
    xv = x.data

    def backward(g):
        return (2.0 * float(g) * xv,)

    return _emit("sum_squares", (x,), np.asarray(np.dot(xv.ravel(), xv.ravel())), backward)


# ---------------------------------------------------------------------------
# 岭回归闭式解
# ---------------------------------------------------------------------------

def cholesky_factor(K, lam):
    """
    对 A = K + λI 做 Cholesky 分解，失败时在对角线加一次抖动后重试

    参数:
        K (np.ndarray): T×T 对称半正定矩阵
        lam (float): 正则化系数 λ > 0

    返回:
        tuple: scipy.linalg.cho_factor 的分解结果
    """
    T = K.shape[0]
    A = K + lam * np.eye(T)
    try:
        return linalg.cho_factor(A, lower=True, check_finite=False)
    except linalg.LinAlgError:
        jitter = JITTER_SCALE * np.trace(K) / T
        logger.warning(f"Cholesky分解失败，对角线加抖动 {jitter:.3e} 后重试")
        try:
            return linalg.cho_factor(A + jitter * np.eye(T), lower=True, check_finite=False)
        except linalg.LinAlgError as e:
            raise IllConditionedError(f"K+λI 在抖动重试后仍非正定 (T={T}, λ={lam:.3e})") from e


def solve_spd(K, k, lam):
    """不记录梯度地求解 (K + λI)w = k，供核方法基线使用"""
    K = np.asarray(K, dtype=np.float64)
    k = np.asarray(k, dtype=np.float64)
    if lam <= 0:
        raise NumericalError(f"λ 必须为正，实际 {lam}")
    factor = cholesky_factor(K, lam)
    return linalg.cho_solve(factor, k, check_finite=False)


def ridge_solve(K, k, lam):
    """
    w̃ = (K + λI)⁻¹k，反向传播使用隐函数形式的伴随

    参数:
        K (Tensor): T×T 对称半正定矩阵
        k (Tensor): 长度 T 的向量
        lam (Tensor | float): 正则化系数 λ（标量张量时可对其求导）

    返回:
        Tensor: 长度 T 的解向量
    """
    K, k, lam = as_tensor(K), as_tensor(k), as_tensor(lam)
    if K.ndim != 2 or K.shape[0] != K.shape[1] or k.shape != (K.shape[0],):
        raise ShapeError(f"ridge_solve 形状不匹配: K{K.shape} k{k.shape}")
    if lam.size != 1:
        raise ShapeError("λ 必须是标量")
    lam_value = float(lam)
    if lam_value <= 0:
        raise NumericalError(f"λ 必须为正，实际 {lam_value}")

    factor = cholesky_factor(K.data, lam_value)
    w = linalg.cho_solve(factor, k.data, check_finite=False)

    residual = np.max(np.abs(K.data @ w + lam_value * w - k.data))
    if residual >= 1e-8 * (1.0 + np.max(np.abs(k.data))):
        logger.warning(f"ridge_solve 残差偏大: {residual:.3e}，K+λI 可能接近奇异")

    def backward(g):
        s = linalg.cho_solve(factor, g, check_finite=False)
        return -np.outer(s, w), s, np.asarray(-np.dot(s, w)).reshape(lam.shape)

    return _emit("ridge_solve", (K, k, lam), w, backward)


def numeric_gradient(func: Callable[[], float], arrays: Sequence[np.ndarray], step=1e-5):
    """
    中心差分数值梯度，用于校验伴随

    参数:
        func (callable): 无参函数，读取 arrays 的当前值返回标量
        arrays (list[np.ndarray]): 可写数组，逐元素扰动后恢复
        step (float): 差分步长

    返回:
        list[np.ndarray]: 与 arrays 对应的数值梯度
    """
    grads = []
    for arr in arrays:
        g = np.zeros_like(arr)
        it = np.nditer(arr, flags=["multi_index"])
        for _ in it:
            idx = it.multi_index
            orig = arr[idx]
            arr[idx] = orig + step
            plus = func()
            arr[idx] = orig - step
            minus = func()
            arr[idx] = orig
            g[idx] = (plus - minus) / (2 * step)
        grads.append(g)
    return grads
