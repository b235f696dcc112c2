#!/usr/bin/env python
# -*- coding: utf-8 -*-

"""
基于正常实例的离群检测命令
"""

from .base import TargetCommand


class DetectCommand(TargetCommand):
    """以少量正常实例为分子、未标注池为分母适配，按负比值给未标注实例打分"""

    name = "detect"

    def run(self):
        targets = self.load_targets()
        params = self.load_params(targets)
        kernels = None
        if self.config.get("run_baselines"):
            kernels = self.kernels(self.relative_alpha(params), with_ulsif=True)
        return self.detect_report("detect", targets, params=params, kernels=kernels)
