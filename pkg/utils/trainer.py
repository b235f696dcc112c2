#!/usr/bin/env python
# -*- coding: utf-8 -*-

"""
元训练模块
按任务（episode）循环：采样 → 支持集适配 → 查询损失 → 反向传播 → Adam 更新，
并用冻结的验证任务集做早停
"""

import logging
import math
from dataclasses import dataclass, field

import numpy as np
import pandas as pd

from . import numgrad as ng
from .adapt import adapt_to_support, query_loss
from .episodes import sample_outlier_episode, sample_pair_episode
from .errors import ConfigError, DataError, NumericalError
from .model import init_params
from .rng import STREAM_TRAIN, STREAM_VALIDATION, make_rng
from .worker_pool import WorkerPool

MODES = ("pair", "outlier")


@dataclass
class TrainConfig:
    """元训练配置，字段默认值与 DEFAULT_CONFIG 保持一致"""

    alpha: float = 0.5
    learning_rate: float = 0.001
    max_iters: int = 10000
    n_query: int = 128
    support_min: int = 1
    support_max: int = 10
    n_support_un: int = 100
    check_interval: int = 100
    patience: int = 10
    n_val_episodes: int = 100
    grad_clip: float = 10.0
    seed: int = 0
    mode: str = "pair"
    threads: int = 0

    def __post_init__(self):
        if not 0.0 <= self.alpha < 1.0:
            raise ConfigError(f"alpha 必须在 [0, 1) 内，实际 {self.alpha}")
        if self.mode not in MODES:
            raise ConfigError(f"未知的训练模式: {self.mode}")
        if self.learning_rate <= 0:
            raise ConfigError("learning_rate 必须为正")
        if self.max_iters < 0:
            raise ConfigError("max_iters 不能为负")
        for name in ("n_query", "support_min", "n_support_un", "check_interval", "patience", "n_val_episodes"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} 必须为正整数")
        if self.support_max < self.support_min:
            raise ConfigError(f"support_max ({self.support_max}) 小于 support_min ({self.support_min})")
        if self.grad_clip < 0:
            raise ConfigError("grad_clip 不能为负（0 表示不裁剪）")

    @classmethod
    def from_config(cls, config):
        """从 ConfigManager 构造"""
        names = cls.__dataclass_fields__
        return cls(**{name: config.get(name) for name in names})


@dataclass
class AdamState:
    """Adam 一阶/二阶矩累积量与步数"""

    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)
    step: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8


def adam_step(params, grads, state, lr):
    """
    带偏差修正的 Adam 更新，原地替换参数张量

    参数:
        params (ModelParams): 待更新参数
        grads (dict): {参数名: 梯度数组}
        state (AdamState): 优化器状态
        lr (float): 学习率

    返回:
        tuple: (params, state)
    """
    bad = [name for name, g in grads.items() if not np.all(np.isfinite(g))]
    if bad:
        raise NumericalError(f"梯度包含非有限值，参数: {', '.join(bad)} (step={state.step})")

    state.step += 1
    bc1 = 1.0 - state.beta1 ** state.step
    bc2 = 1.0 - state.beta2 ** state.step
    for name, g in grads.items():
        p = params.tensors[name].data
        if g.shape != p.shape:
            raise NumericalError(f"参数 {name} 的梯度形状 {g.shape} 与参数形状 {p.shape} 不一致")
        if name not in state.m:
            state.m[name] = np.zeros_like(p)
            state.v[name] = np.zeros_like(p)
        state.m[name] = state.beta1 * state.m[name] + (1.0 - state.beta1) * g
        state.v[name] = state.beta2 * state.v[name] + (1.0 - state.beta2) * (g * g)
        m_hat = state.m[name] / bc1
        v_hat = state.v[name] / bc2
        params.replace(name, p - lr * m_hat / (np.sqrt(v_hat) + state.eps))
    return params, state


def clip_gradients(grads, max_norm):
    """按全局范数裁剪梯度，max_norm 为 0 时不裁剪；返回 (梯度, 裁剪前范数)"""
    norm = math.sqrt(sum(float(np.sum(g * g)) for g in grads.values()))
    if max_norm and norm > max_norm:
        scale = max_norm / norm
        grads = {name: g * scale for name, g in grads.items()}
    return grads, norm


@dataclass
class TrainingLog:
    """逐步训练损失与每次检查的验证损失"""

    steps: list = field(default_factory=list)
    checks: list = field(default_factory=list)
    best_iteration: int = 0
    best_val_loss: float = float("nan")
    stopped_early: bool = False

    def add_step(self, iteration, train_loss, n_support):
        self.steps.append((iteration, train_loss, n_support))

    def add_check(self, iteration, val_loss):
        self.checks.append((iteration, val_loss))

    @property
    def val_losses(self):
        return [v for _, v in self.checks]

    def to_frame(self):
        """按迭代合并为一张表: iteration, train_loss, val_loss, n_support"""
        steps = pd.DataFrame(self.steps, columns=["iteration", "train_loss", "n_support"])
        checks = pd.DataFrame(self.checks, columns=["iteration", "val_loss"])
        frame = pd.merge(steps, checks, on="iteration", how="outer").sort_values("iteration")
        frame = frame[["iteration", "train_loss", "val_loss", "n_support"]]
        frame["n_support"] = frame["n_support"].astype("Int64")
        return frame.reset_index(drop=True)

    def to_csv(self, path):
        self.to_frame().to_csv(path, index=False)


def _episode_loss(episode, params):
    adapted = adapt_to_support(episode.s_nu, episode.s_de, params)
    return float(query_loss(episode.q_nu, episode.q_de, adapted))


def validation_loss(params, episodes, pool=None):
    """
    冻结验证任务集上查询损失的平均值，不记录梯度

    参数:
        params (ModelParams): 模型参数
        episodes (list[Episode]): 验证任务
        pool (WorkerPool, optional): 并行计算用的线程池（结果按固定顺序归约）

    返回:
        float: 平均验证损失
    """
    if not episodes:
        raise DataError("验证任务集为空")
    if ng.active_tape() is not None:
        raise NumericalError("validation_loss 不应在记录梯度时调用")
    pool = pool or WorkerPool(1)
    losses = pool.map(lambda ep: _episode_loss(ep, params), episodes, description="验证")
    return float(math.fsum(losses) / len(losses))


class MetaTrainer:
    """
    元训练器

    参数:
        config (TrainConfig): 训练配置
    """

    def __init__(self, config):
        self.config = config
        self.logger = logging.getLogger("MetaTrainer")
        self.pool = WorkerPool(config.threads)

    def _sample(self, datasets, rng):
        cfg = self.config
        n_support = int(rng.integers(cfg.support_min, cfg.support_max + 1))
        if cfg.mode == "outlier":
            return sample_outlier_episode(datasets, n_support, cfg.n_support_un, cfg.n_query, rng, cfg.alpha)
        return sample_pair_episode(datasets, n_support, cfg.n_query, rng, cfg.alpha)

    def frozen_validation_episodes(self, validation):
        """用独立的验证子流一次性采样验证任务集"""
        rng = make_rng(self.config.seed, STREAM_VALIDATION)
        return [self._sample(validation, rng) for _ in range(self.config.n_val_episodes)]

    def train(self, sources, validation, params=None, progress_callback=None, **model_kwargs):
        """
        执行元训练

        参数:
            sources (list[DatasetSample]): 源数据集
            validation (list[DatasetSample]): 验证数据集
            params (ModelParams, optional): 初始参数，为None时按种子初始化
            progress_callback (callable, optional): 进度回调函数
            **model_kwargs: 初始化参数时传给 init_params 的模型尺寸与变体

        返回:
            tuple: (验证损失最低的参数, TrainingLog)
        """
        cfg = self.config
        if not sources or not validation:
            raise DataError("源数据集和验证数据集都不能为空")
        if cfg.mode == "outlier":
            missing = [d.id for d in list(sources) + list(validation) if not d.has_roles]
            if missing:
                raise DataError(f"离群检测模式需要 role 列，缺少的数据集: {', '.join(missing[:5])}")

        if params is None:
            params = init_params(cfg.seed, sources[0].dim, alpha=cfg.alpha, **model_kwargs)
        params = params.copy()
        log = TrainingLog()
        if cfg.max_iters == 0:
            self.logger.info("max_iters 为 0，直接返回初始参数")
            return params, log

        val_episodes = self.frozen_validation_episodes(validation)
        rng = make_rng(cfg.seed, STREAM_TRAIN)
        state = AdamState()
        names = params.names()

        best = params.copy()
        best_loss = validation_loss(params, val_episodes, self.pool)
        log.add_check(0, best_loss)
        log.best_iteration, log.best_val_loss = 0, best_loss
        self.logger.info(f"初始验证损失: {best_loss:.6f}")
        bad_checks = 0

        for it in range(1, cfg.max_iters + 1):
            episode = self._sample(sources, rng)
            with ng.Tape() as tape:
                adapted = adapt_to_support(episode.s_nu, episode.s_de, params)
                loss = query_loss(episode.q_nu, episode.q_de, adapted)
            loss_value = float(loss)
            if not math.isfinite(loss_value):
                raise NumericalError(f"第 {it} 步损失非有限: {loss_value}")
            leaves = [params.tensors[n] for n in names]
            grads = dict(zip(names, tape.gradient(loss, leaves)))
            grads, norm = clip_gradients(grads, cfg.grad_clip)
            if cfg.grad_clip and norm > cfg.grad_clip:
                self.logger.debug(f"迭代 {it}: 梯度范数 {norm:.3g} 已裁剪到 {cfg.grad_clip}")
            adam_step(params, grads, state, cfg.learning_rate)
            log.add_step(it, loss_value, episode.n_support)

            if it % cfg.check_interval == 0:
                val = validation_loss(params, val_episodes, self.pool)
                log.add_check(it, val)
                if val < best_loss:
                    best_loss, best = val, params.copy()
                    log.best_iteration, log.best_val_loss = it, val
                    bad_checks = 0
                else:
                    bad_checks += 1
                self.logger.info(f"迭代 {it}: 训练损失 {loss_value:.6f}, 验证损失 {val:.6f}, "
                                 f"最佳 {best_loss:.6f} (第 {log.best_iteration} 步), λ={params.lam:.4g}")
                if bad_checks >= cfg.patience:
                    log.stopped_early = True
                    self.logger.info(f"验证损失连续 {bad_checks} 次未改善，提前停止")
                    break

            if progress_callback:
                progress_callback(int(it * 100 / cfg.max_iters), f"迭代 {it}/{cfg.max_iters}")

        self.logger.info(f"训练结束: 最佳验证损失 {log.best_val_loss:.6f} (第 {log.best_iteration} 步)")
        return best, log


def meta_train(sources, validation, config, params=None, progress_callback=None, **model_kwargs):
    """MetaTrainer 的函数式入口，返回 (最佳参数, TrainingLog)"""
    return MetaTrainer(config).train(sources, validation, params=params,
                                     progress_callback=progress_callback, **model_kwargs)
