#!/usr/bin/env python
# -*- coding: utf-8 -*-

"""
日志处理器模块
提供与 tqdm 进度条兼容的控制台日志处理器，以及进度回调适配器
"""

import logging
import os
import sys

from tqdm import tqdm

LOG_FORMAT = '%(asctime)s - %(levelname)s - %(message)s'
LOG_FILE_NAME = "meta_rdre.log"


class TqdmLogHandler(logging.Handler):
    """通过 tqdm.write 输出日志，避免打断进度条"""

    # 不同日志级别的终端颜色
    level_colors = {
        logging.DEBUG: "\033[90m",     # 灰色
        logging.INFO: "",              # 默认
        logging.WARNING: "\033[33m",   # 黄色
        logging.ERROR: "\033[31m",     # 红色
        logging.CRITICAL: "\033[1;31m" # 亮红色
    }

    def __init__(self, stream=None, use_color=None):
        super().__init__()
        self.stream = stream or sys.stderr
        if use_color is None:
            use_color = hasattr(self.stream, "isatty") and self.stream.isatty()
        self.use_color = use_color
        self.setFormatter(logging.Formatter(LOG_FORMAT))

    def emit(self, record):
        try:
            msg = self.format(record)
            color = self.level_colors.get(record.levelno, "") if self.use_color else ""
            if color:
                msg = f"{color}{msg}\033[0m"
            tqdm.write(msg, file=self.stream)
        except Exception:
            self.handleError(record)


class ProgressReporter:
    """
    把 progress_callback(百分比, 消息) 形式的回调映射到 tqdm 进度条

    参数:
        description (str): 进度条标题
        disable (bool): 是否禁用进度条（非交互环境）
    """

    def __init__(self, description, disable=None):
        if disable is None:
            disable = not sys.stderr.isatty()
        self.bar = tqdm(total=100, desc=description, disable=disable, leave=False)
        self.last = 0

    def __call__(self, progress, message=""):
        progress = max(0, min(100, int(progress)))
        if progress > self.last:
            self.bar.update(progress - self.last)
            self.last = progress
        if message:
            self.bar.set_postfix_str(message, refresh=False)

    def close(self):
        self.bar.close()

    def __enter__(self):
        return self

    def __exit__(self, exc_type, exc, tb):
        self.close()
        return False


def setup_logging(out_dir=None, level=logging.INFO):
    """
    配置根日志器：输出目录下的日志文件 + 控制台

    参数:
        out_dir (str, optional): 输出目录，为None时只输出到控制台
        level (int | str): 日志级别

    返回:
        logger: 根日志器
    """
    if isinstance(level, str):
        level = logging.getLevelName(level.upper())
        if not isinstance(level, int):
            level = logging.INFO

    root = logging.getLogger()
    for handler in root.handlers[:]:
        root.removeHandler(handler)
        handler.close()

    console = TqdmLogHandler()
    console.setLevel(level)
    root.addHandler(console)

    if out_dir:
        os.makedirs(out_dir, exist_ok=True)
        file_handler = logging.FileHandler(os.path.join(out_dir, LOG_FILE_NAME), encoding="utf-8")
        file_handler.setFormatter(logging.Formatter(LOG_FORMAT))
        file_handler.setLevel(level)
        root.addHandler(file_handler)

    root.setLevel(level)
    return root
