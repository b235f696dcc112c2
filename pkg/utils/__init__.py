"""
工具模块
自动微分、模型、适配、任务采样、训练、基线与评估等核心组件
"""

from .config_manager import ConfigManager
from .worker_pool import WorkerPool
from .log_handler import setup_logging, ProgressReporter
from .errors import MetaRdreError, ConfigError, DataError, CheckpointError, NumericalError
from .model import ModelParams, init_params
from .trainer import MetaTrainer, TrainConfig
from .checkpoint import save_checkpoint, load_checkpoint
