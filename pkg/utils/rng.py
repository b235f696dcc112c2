#!/usr/bin/env python
# -*- coding: utf-8 -*-

"""
随机数模块
基于计数器的Philox生成器，按 (种子, 流编号...) 派生互不相关的子流
"""

import numpy as np

# 命名的随机流，保证训练/验证/评估互不干扰
STREAM_INIT = 1
STREAM_TRAIN = 2
STREAM_VALIDATION = 3
STREAM_EVAL = 4
STREAM_COMPARE = 5
STREAM_DETECT = 6
STREAM_SYNTH = 7
STREAM_SPLIT = 8
STREAM_BASELINE = 9


def make_rng(seed, *stream):
    """
    创建可复现的随机数生成器

    参数:
        seed (int): 运行种子
        *stream (int): 子流编号，例如 (STREAM_EVAL, 支持集大小, 数据对序号)

    返回:
        numpy.random.Generator: Philox生成器
    """
    seq = np.random.SeedSequence(int(seed), spawn_key=tuple(int(s) for s in stream))
    return np.random.Generator(np.random.Philox(seq))
