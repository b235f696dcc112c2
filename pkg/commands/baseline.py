#!/usr/bin/env python
# -*- coding: utf-8 -*-

"""
核方法基线命令
不需要检查点，只用目标支持集从零拟合 RuLSIF/uLSIF，任务由 baseline_task 决定
"""

from .base import TargetCommand


class BaselineCommand(TargetCommand):
    """单独运行核方法基线"""

    name = "baseline"

    def run(self):
        task = self.config.get("baseline_task")
        alpha = self.relative_alpha(None)
        targets = self.load_targets()
        report_name = f"baseline_{task}"
        self.logger.info(f"运行核方法基线: 任务 {task}, α={alpha}, λ 网格 {self.config.get('lambda_grid')}")

        if task == "compare":
            return self.compare_report(report_name, targets, kernels=self.kernels(alpha, with_ulsif=True),
                                       records=self.load_manifest())
        if task == "detect":
            return self.detect_report(report_name, targets, kernels=self.kernels(alpha, with_ulsif=True))
        return self.dre_report(report_name, targets, kernels=self.kernels(alpha), records=self.load_manifest())
