#!/usr/bin/env python
# -*- coding: utf-8 -*-

"""
检查点读写模块
小端二进制格式：魔数 MRDR、版本、维度、变体、alpha、rho、按固定顺序排列的命名张量，末尾为 SHA-256 校验和
"""

import hashlib
import logging
import os
import struct

import numpy as np

from . import numgrad as ng
from .errors import CheckpointError
from .model import VARIANTS, ModelParams, _layer_plan

MAGIC = b"MRDR"
FORMAT_VERSION = 1
DIGEST_SIZE = 32

_HEADER = struct.Struct("<4sIIIIIBdd")
_COUNT = struct.Struct("<I")
_NAME_LEN = struct.Struct("<H")
_NDIM = struct.Struct("<B")

logger = logging.getLogger("CheckpointIO")


def _tensor_order(params):
    """各层权重/偏置按网络顺序排列，w_raw（若存在）在最后；rho 写在头部"""
    names = [f"{net}.{i}.{kind}" for net, layers in params.plan.items()
             for i in range(len(layers)) for kind in ("W", "b")]
    if "w_raw" in params.tensors:
        names.append("w_raw")
    return names


def params_to_bytes(params):
    """
    序列化模型参数

    参数:
        params (ModelParams): 模型参数

    返回:
        bytes: 检查点内容（含校验和）
    """
    parts = [_HEADER.pack(MAGIC, FORMAT_VERSION, params.input_dim, params.latent_dim,
                          params.embed_dim, params.hidden_dim, VARIANTS.index(params.variant),
                          float(params.alpha), params.rho)]
    names = _tensor_order(params)
    parts.append(_COUNT.pack(len(names)))
    for name in names:
        data = params.tensors[name].data
        encoded = name.encode("utf-8")
        parts.append(_NAME_LEN.pack(len(encoded)))
        parts.append(encoded)
        parts.append(_NDIM.pack(data.ndim))
        parts.append(struct.pack(f"<{data.ndim}I", *data.shape))
        parts.append(np.ascontiguousarray(data, dtype="<f8").tobytes())
    body = b"".join(parts)
    return body + hashlib.sha256(body).digest()


class _Reader:
    """带越界检查的顺序读取器"""

    def __init__(self, buf):
        self.buf = buf
        self.pos = 0

    def take(self, n):
        if self.pos + n > len(self.buf):
            raise CheckpointError(f"检查点被截断（偏移 {self.pos} 处需要 {n} 字节）")
        chunk = self.buf[self.pos:self.pos + n]
        self.pos += n
        return chunk

    def unpack(self, fmt):
        return fmt.unpack(self.take(fmt.size))


def params_from_bytes(blob):
    """
    反序列化并校验模型参数

    参数:
        blob (bytes): 检查点内容

    返回:
        ModelParams: 模型参数
    """
    if len(blob) < _HEADER.size + DIGEST_SIZE:
        raise CheckpointError("检查点被截断（长度不足）")
    if blob[:4] != MAGIC:
        raise CheckpointError(f"不是检查点文件（魔数 {blob[:4]!r}）")
    version = struct.unpack_from("<I", blob, 4)[0]
    if version != FORMAT_VERSION:
        raise CheckpointError(f"检查点格式版本 {version} 不受支持（当前版本 {FORMAT_VERSION}）")

    body, digest = blob[:-DIGEST_SIZE], blob[-DIGEST_SIZE:]
    if hashlib.sha256(body).digest() != digest:
        raise CheckpointError("检查点校验和不匹配，文件已损坏或被截断")

    reader = _Reader(body)
    _, _, input_dim, latent_dim, embed_dim, hidden_dim, variant_code, alpha, rho = reader.unpack(_HEADER)
    if variant_code >= len(VARIANTS):
        raise CheckpointError(f"未知的模型变体编码: {variant_code}")
    variant = VARIANTS[variant_code]

    (count,) = reader.unpack(_COUNT)
    tensors = {}
    for _ in range(count):
        (name_len,) = reader.unpack(_NAME_LEN)
        name = reader.take(name_len).decode("utf-8")
        (ndim,) = reader.unpack(_NDIM)
        shape = struct.unpack(f"<{ndim}I", reader.take(4 * ndim))
        n = int(np.prod(shape)) if shape else 1
        data = np.frombuffer(reader.take(8 * n), dtype="<f8").astype(np.float64).reshape(shape)
        tensors[name] = ng.Tensor(data)
    if reader.pos != len(body):
        raise CheckpointError(f"检查点末尾有 {len(body) - reader.pos} 字节多余数据")

    plan = _layer_plan(input_dim, latent_dim, embed_dim, hidden_dim)
    ordered = {}
    for net, layers in plan.items():
        for i, (fan_in, fan_out) in enumerate(layers):
            for kind, shape in (("W", (fan_in, fan_out)), ("b", (fan_out,))):
                name = f"{net}.{i}.{kind}"
                if name not in tensors:
                    raise CheckpointError(f"检查点缺少张量 {name}")
                if tensors[name].shape != shape:
                    raise CheckpointError(f"张量 {name} 形状 {tensors[name].shape} 与维度记录 {shape} 不一致")
                ordered[name] = tensors.pop(name)
    ordered["rho"] = ng.Tensor(rho)
    if variant == "nosadapt":
        if "w_raw" not in tensors:
            raise CheckpointError("nosadapt 检查点缺少 w_raw")
        ordered["w_raw"] = tensors.pop("w_raw")
    if tensors:
        raise CheckpointError(f"检查点包含未知张量: {', '.join(tensors)}")

    return ModelParams(ordered, alpha, input_dim, latent_dim, embed_dim, hidden_dim, variant)


def save_checkpoint(params, path):
    """写出检查点文件"""
    blob = params_to_bytes(params)
    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)
    with open(path, "wb") as f:
        f.write(blob)
    logger.info(f"检查点已保存: {path} ({len(blob)} 字节)")
    return path


def load_checkpoint(path):
    """读取并校验检查点文件"""
    if not os.path.exists(path):
        raise CheckpointError(f"检查点文件不存在: {path}")
    with open(path, "rb") as f:
        blob = f.read()
    params = params_from_bytes(blob)
    logger.info(f"检查点已加载: {path} (M={params.input_dim}, K={params.latent_dim}, "
                f"T={params.embed_dim}, 变体={params.variant})")
    return params
