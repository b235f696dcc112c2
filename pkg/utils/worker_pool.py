#!/usr/bin/env python
# -*- coding: utf-8 -*-

"""
工作线程池模块
在后台线程中并行执行相互独立的任务，结果按输入顺序返回以保证归约确定
"""

import logging
import os
import traceback
from concurrent.futures import ThreadPoolExecutor, as_completed

from .errors import ConfigError

THREADS_ENV = "META_RDRE_THREADS"


def resolve_thread_count(requested=0):
    """
    确定工作线程数

    参数:
        requested (int): 配置中的线程数，0 表示读取环境变量 META_RDRE_THREADS（缺省为1）

    返回:
        int: 线程数上限
    """
    cap = os.environ.get(THREADS_ENV)
    if cap is not None:
        try:
            cap = int(cap)
        except ValueError:
            raise ConfigError(f"环境变量 {THREADS_ENV} 不是整数: {cap!r}")
        if cap < 1:
            raise ConfigError(f"环境变量 {THREADS_ENV} 必须为正整数")
    if requested and requested > 0:
        return min(requested, cap) if cap else requested
    return cap or 1


class WorkerPool:
    """
    通用工作线程池

    task_func 在各线程中执行；progress_callback(百分比, 状态消息) 按完成顺序回调，
    返回的结果列表始终与输入顺序一致
    """

    def __init__(self, max_workers=0):
        self.max_workers = resolve_thread_count(max_workers)
        self.logger = logging.getLogger("WorkerPool")

    def map(self, task_func, items, progress_callback=None, description="任务"):
        """
        对每个元素执行任务函数

        参数:
            task_func (callable): 接受单个元素的函数
            items (iterable): 任务输入
            progress_callback (callable, optional): 进度回调函数
            description (str): 进度消息前缀

        返回:
            list: 与 items 顺序一致的结果
        """
        items = list(items)
        total = len(items)
        results = [None] * total
        if total == 0:
            return results

        def report(done):
            if progress_callback:
                progress_callback(int(done * 100 / total), f"{description} {done}/{total}")

        if self.max_workers <= 1 or total == 1:
            for i, item in enumerate(items):
                results[i] = self._run(task_func, item, i)
                report(i + 1)
            return results

        with ThreadPoolExecutor(max_workers=self.max_workers) as executor:
            futures = {executor.submit(self._run, task_func, item, i): i for i, item in enumerate(items)}
            for done, future in enumerate(as_completed(futures), start=1):
                results[futures[future]] = future.result()
                report(done)
        return results

    def _run(self, task_func, item, index):
        try:
            return task_func(item)
        except Exception:
            self.logger.error(f"任务 {index} 执行出错")
            self.logger.debug(f"详细错误信息: {traceback.format_exc()}")
            raise
