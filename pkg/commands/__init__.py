"""
子命令模块
每个子命令一个模块，COMMANDS 按命令名索引
"""

from .gen_synth import GenSynthCommand
from .train import TrainCommand
from .evaluate import EvalCommand
from .compare import CompareCommand
from .detect import DetectCommand
from .baseline import BaselineCommand

COMMANDS = {
    command.name: command
    for command in (GenSynthCommand, TrainCommand, EvalCommand, CompareCommand, DetectCommand, BaselineCommand)
}
