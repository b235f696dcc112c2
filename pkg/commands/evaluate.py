#!/usr/bin/env python
# -*- coding: utf-8 -*-

"""
相对密度比估计评估命令
"""

from .base import TargetCommand


class EvalCommand(TargetCommand):
    """在目标数据对上评估测试平方误差；有清单时附带解析真值，可选运行核方法基线"""

    name = "eval"

    def run(self):
        targets = self.load_targets()
        params = self.load_params(targets)
        records = self.load_manifest()
        kernels = self.kernels(self.relative_alpha(params)) if self.config.get("run_baselines") else None
        return self.dre_report("eval", targets, params=params, kernels=kernels, records=records)
