#!/usr/bin/env python
# -*- coding: utf-8 -*-

"""
异常定义模块
工具包内所有可预期的错误类型，命令行入口据此映射退出码
"""


class MetaRdreError(Exception):
    """工具包错误基类"""

    exit_code = 1


class ConfigError(MetaRdreError, ValueError):
    """配置文件或命令行参数错误"""

    exit_code = 2


class DataError(MetaRdreError, ValueError):
    """数据集、清单文件或采样条件不满足"""

    exit_code = 3


class CheckpointError(DataError):
    """检查点文件损坏、截断或版本不匹配"""


class NumericalError(MetaRdreError, ArithmeticError):
    """数值计算失败（出现NaN/Inf等）"""

    exit_code = 4


class ShapeError(NumericalError, ValueError):
    """张量形状不匹配"""


class IllConditionedError(NumericalError):
    """Cholesky分解在抖动重试后仍失败，任务病态"""
