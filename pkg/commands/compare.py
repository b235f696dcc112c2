#!/usr/bin/env python
# -*- coding: utf-8 -*-

"""
数据集比较命令
"""

from .base import TargetCommand


class CompareCommand(TargetCommand):
    """用相对PE散度判断两个目标数据集是否来自同一分布"""

    name = "compare"

    def run(self):
        targets = self.load_targets()
        params = self.load_params(targets)
        records = self.load_manifest()
        kernels = None
        if self.config.get("run_baselines"):
            kernels = self.kernels(self.relative_alpha(params), with_ulsif=True)
        return self.compare_report("compare", targets, params=params, kernels=kernels, records=records)
