#!/usr/bin/env python
# -*- coding: utf-8 -*-

"""
meta-rdre - 主程序
从大量小数据集元学习相对密度比估计器，并用于少样本密度比估计、数据集比较和离群检测

用法:
    meta-rdre <gen-synth|train|eval|compare|detect|baseline> --config <file> [--key value ...] --out <dir>
"""

import argparse
import logging
import sys
import traceback

from commands import COMMANDS
from utils.config_manager import ConfigManager
from utils.errors import ConfigError, MetaRdreError
from utils.log_handler import setup_logging

logger = logging.getLogger("MetaRdre")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="meta-rdre",
        allow_abbrev=False,
        description="元学习相对密度比估计工具",
        epilog="其余 --key value 参数按名称覆盖配置项（键中的 - 视为 _）",
    )
    parser.add_argument("command", choices=list(COMMANDS), help="子命令")
    parser.add_argument("--config", default=None, help="JSON配置文件")
    parser.add_argument("--out", default=None, help="输出目录")
    return parser


def parse_overrides(tokens):
    """
    解析 --key value / --key=value 形式的覆盖项

    参数:
        tokens (list[str]): argparse 未识别的参数

    返回:
        dict: {配置键: 字符串值}
    """
    overrides = {}
    i = 0
    while i < len(tokens):
        token = tokens[i]
        if not token.startswith("--") or token == "--":
            raise ConfigError(f"无法识别的参数: {token}")
        key = token[2:]
        if "=" in key:
            key, value = key.split("=", 1)
            i += 1
        else:
            if i + 1 >= len(tokens) or tokens[i + 1].startswith("--"):
                raise ConfigError(f"参数 {token} 缺少取值")
            value = tokens[i + 1]
            i += 2
        overrides[key.replace("-", "_")] = value
    return overrides


def main(argv=None):
    """命令行入口，返回退出码"""
    args, extra = build_parser().parse_known_args(argv)
    setup_logging()

    try:
        config = ConfigManager(args.config, parse_overrides(extra)).validate()
        out_dir = args.out or config.get("out_dir")
        if not out_dir:
            raise ConfigError("需要通过 --out 或配置项 out_dir 指定输出目录")
        config.set("out_dir", out_dir)

        setup_logging(out_dir, config.get("log_level"))
        config.save_config(out_dir)
        logger.info(f"执行命令 {args.command}，输出目录 {out_dir}")

        COMMANDS[args.command](config, out_dir).run()
        logger.info(f"命令 {args.command} 完成")
        return 0
    except MetaRdreError as e:
        logger.error(f"{type(e).__name__}: {e}")
        logger.debug(f"详细错误信息: {traceback.format_exc()}")
        return e.exit_code
    except Exception as e:
        logger.error(f"未预期的错误: {e}")
        logger.error(traceback.format_exc())
        return 1


if __name__ == "__main__":
    sys.exit(main())
