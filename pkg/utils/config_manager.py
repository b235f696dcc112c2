#!/usr/bin/env python
# -*- coding: utf-8 -*-

"""
配置管理器
管理运行配置：默认值、JSON配置文件、命令行覆盖项，以及写入输出目录的最终配置
"""

import os
import json
import logging

from .errors import ConfigError
from .model import VARIANTS

# 输出目录中保存的最终配置
RESOLVED_CONFIG_FILE = "resolved_config.json"

# 合成数据规模预设: (源, 验证, 目标)
SYNTH_PRESETS = {
    "gaussian": {"desk": (100, 3, 20), "full": (600, 3, 20)},
    "outlier": {"desk": (20, 3, 5), "full": (20, 3, 5)},
}

# 默认配置
DEFAULT_CONFIG = {
    # 通用配置
    "seed": 0,                  # 随机种子，所有随机流都由它派生
    "out_dir": "",              # 输出目录（命令行 --out 优先）
    "data_dir": "",             # 数据目录（含 source/validation/target 子目录或平铺的CSV）
    "checkpoint": "",           # 检查点路径（eval/compare/detect 必需）
    "log_level": "INFO",        # 日志级别
    "threads": 0,               # 工作线程数，0 表示读取 META_RDRE_THREADS（缺省为1）

    # 合成数据配置
    "synth_kind": "gaussian",   # gaussian: 一维高斯密度比数据; outlier: 离群检测数据
    "synth_preset": "desk",     # desk / full / custom（custom 时使用下面的数量）
    "n_source": 100,            # 源数据集数量
    "n_val": 3,                 # 验证数据集数量
    "n_target": 20,             # 目标数据集数量
    "n_per_dataset": 300,       # 高斯数据每个数据集的实例数
    "n_normal": 200,            # 离群数据的正常池大小
    "n_unlabeled": 300,         # 离群数据的未标注池大小
    "outlier_rate": 0.05,       # 未标注池中离群实例比例
    "outlier_shift": 5.0,       # 离群实例均值偏移
    "outlier_variance": 0.1,    # 离群实例方差
    "synth_dim": 2,             # 离群数据的特征维度

    # 模型配置
    "latent_dim": 64,           # 数据集潜变量维度，候选 {4,8,16,32,64,128,256}
    "hidden_dim": 100,          # 隐藏层宽度
    "embed_dim": 100,           # 嵌入维度 T
    "variant": "full",          # full / nolatent / nosadapt

    # 训练配置
    "mode": "pair",             # pair: 密度比/数据集比较; outlier: 离群检测
    "alpha": 0.5,               # 相对参数 α ∈ [0, 1)
    "learning_rate": 0.001,     # Adam 学习率
    "max_iters": 10000,         # 最大迭代次数
    "n_query": 128,             # 每侧查询实例数（支持集之外）
    "support_min": 1,           # 训练时支持集大小下限
    "support_max": 10,          # 训练时支持集大小上限
    "n_support_un": 100,        # 离群模式下未标注支持集大小
    "check_interval": 100,      # 验证检查间隔（迭代）
    "patience": 10,             # 早停耐心（检查次数）
    "n_val_episodes": 100,      # 冻结验证任务数
    "grad_clip": 10.0,          # 梯度全局范数上限，0 表示不裁剪

    # 评估配置
    "eval_support_sizes": [10],             # 密度比评估的支持集大小
    "compare_support_sizes": [1, 2, 3, 4, 5],  # 数据集比较的支持集大小
    "detect_support_sizes": [1, 2, 3, 4, 5],   # 离群检测的正常支持集大小
    "include_self_pairs": True,             # 目标数据对是否包含自配对
    "run_baselines": False,                 # eval/compare/detect 时是否同时运行核方法基线
    "lambda_grid": [0.0001, 0.001, 0.01, 0.1, 1.0],  # 核方法的 λ 网格
    "rulsif_max_centers": 100,              # 核中心数上限
    "detect_trials": 5,                     # 离群检测重复次数
    "manifest": "",                         # 合成数据清单路径，为空时尝试 <data_dir>/manifest.json
    "baseline_task": "dre",                 # baseline 命令的任务: dre / compare / detect
    "grid_points": 200,                     # 一维比值曲线的网格点数
    "grid_pairs": 4,                        # 输出比值曲线的数据对数量
    "split_counts": [],                     # 平铺数据目录的 (源, 验证, 目标) 划分，可为数量或比例
}

CHOICES = {
    "synth_kind": tuple(SYNTH_PRESETS),
    "synth_preset": ("desk", "full", "custom"),
    "variant": VARIANTS,
    "mode": ("pair", "outlier"),
    "baseline_task": ("dre", "compare", "detect"),
    "log_level": ("DEBUG", "INFO", "WARNING", "ERROR"),
}


def _coerce(key, value, default):
    """把覆盖值转换为默认值的类型；列表项以逗号分隔"""
    if isinstance(default, bool):
        if isinstance(value, bool):
            return value
        text = str(value).strip().lower()
        if text in ("1", "true", "yes", "on"):
            return True
        if text in ("0", "false", "no", "off"):
            return False
        raise ConfigError(f"配置项 {key} 需要布尔值，实际 {value!r}")
    try:
        if isinstance(default, int):
            number = float(value)
            if not number.is_integer():
                raise ValueError
            return int(number)
        if isinstance(default, float):
            return float(value)
        if isinstance(default, list):
            if isinstance(value, str):
                value = [v for v in value.replace("[", "").replace("]", "").split(",") if v.strip()]
            return [_number(v) for v in value]
    except (TypeError, ValueError):
        raise ConfigError(f"配置项 {key} 的值 {value!r} 无法转换为 {type(default).__name__}")
    return str(value)


def _number(value):
    if isinstance(value, (int, float)):
        return value
    text = str(value).strip()
    number = float(text)
    return int(number) if number.is_integer() and "." not in text and "e" not in text.lower() else number


class ConfigManager:
    """
    配置管理类，负责加载、校验、保存运行配置

    参数:
        config_file (str, optional): JSON配置文件，为None时使用默认配置
        overrides (dict, optional): 命令行覆盖项 {键: 字符串值}
    """

    # 类常量，便于其他模块访问
    DEFAULT_CONFIG = DEFAULT_CONFIG

    def __init__(self, config_file=None, overrides=None):
        self.logger = logging.getLogger("ConfigManager")
        self.config = json.loads(json.dumps(DEFAULT_CONFIG))
        self.config_file = config_file
        if config_file:
            self.load_config(config_file)
        if overrides:
            self.apply_overrides(overrides)

    def load_config(self, path):
        """从JSON文件加载配置，未知键视为错误"""
        if not os.path.exists(path):
            raise ConfigError(f"配置文件不存在: {path}")
        try:
            with open(path, 'r', encoding='utf-8') as f:
                loaded_config = json.load(f)
        except json.JSONDecodeError as e:
            raise ConfigError(f"配置文件 {path} 不是合法的JSON: {e}")
        if not isinstance(loaded_config, dict):
            raise ConfigError(f"配置文件 {path} 顶层必须是对象")
        self.update(loaded_config)
        self.logger.info(f"配置文件加载成功: {path}")
        return self

    def apply_overrides(self, overrides):
        """应用命令行覆盖项（值为字符串，按默认值类型转换）"""
        for key, value in overrides.items():
            self.set(key, value)
            self.logger.debug(f"覆盖配置项 {key} = {self.config[key]!r}")
        return self

    def validate(self):
        """检查取值范围与选项"""
        for key, choices in CHOICES.items():
            if self.config[key] not in choices:
                raise ConfigError(f"配置项 {key} 的取值 {self.config[key]!r} 不在 {choices} 中")
        if not 0.0 <= self.config["alpha"] < 1.0:
            raise ConfigError(f"alpha 必须在 [0, 1) 内，实际 {self.config['alpha']}")
        for key in ("latent_dim", "hidden_dim", "embed_dim", "n_per_dataset", "n_normal",
                    "n_unlabeled", "synth_dim", "rulsif_max_centers", "detect_trials", "grid_points"):
            if self.config[key] < 1:
                raise ConfigError(f"配置项 {key} 必须为正整数")
        for key in ("eval_support_sizes", "compare_support_sizes", "detect_support_sizes"):
            sizes = self.config[key]
            if not sizes or any(int(s) != s or s < 1 for s in sizes):
                raise ConfigError(f"配置项 {key} 必须是非空的正整数列表")
        if not self.config["lambda_grid"] or any(lam <= 0 for lam in self.config["lambda_grid"]):
            raise ConfigError("lambda_grid 必须是非空的正数列表")
        if self.config["split_counts"] and len(self.config["split_counts"]) != 3:
            raise ConfigError("split_counts 需要三个值: 源, 验证, 目标")
        return self

    def synth_counts(self):
        """按预设返回 (源, 验证, 目标) 数据集数量"""
        preset = self.config["synth_preset"]
        if preset == "custom":
            return self.config["n_source"], self.config["n_val"], self.config["n_target"]
        return SYNTH_PRESETS[self.config["synth_kind"]][preset]

    def save_config(self, out_dir):
        """把最终配置写入输出目录"""
        os.makedirs(out_dir, exist_ok=True)
        path = os.path.join(out_dir, RESOLVED_CONFIG_FILE)
        with open(path, 'w', encoding='utf-8') as f:
            json.dump(self.config, f, ensure_ascii=False, indent=2, sort_keys=True)
        self.logger.info(f"最终配置已保存: {path}")
        return path

    def get(self, key, default=None):
        """获取配置项"""
        return self.config.get(key, default)

    def set(self, key, value):
        """设置配置项"""
        if key not in DEFAULT_CONFIG:
            raise ConfigError(f"未知的配置项: {key}")
        self.config[key] = _coerce(key, value, DEFAULT_CONFIG[key])
        return self

    def update(self, config_dict):
        """批量更新配置"""
        for key, value in config_dict.items():
            self.set(key, value)
        return self
