#!/usr/bin/env python
# -*- coding: utf-8 -*-

"""
数据与任务采样模块
数据集数据模型、CSV读写、合成数据生成、元训练任务（episode）采样与数据集划分
"""

import csv
import glob
import logging
import os
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import DataError
from .worker_pool import WorkerPool

logger = logging.getLogger("Episodes")

ROLE_NORMAL = "nor"
ROLE_UNLABELED = "un"
LABEL_COLUMN = "label"
ROLE_COLUMN = "role"


def _readonly(arr):
    if arr is not None:
        arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class DatasetSample:
    """
    来自同一分布的一组 M 维特征向量

    labels 为离群标记（1=离群，仅用于评估，从不参与训练），
    roles 为离群检测模式下的实例角色（nor: 正常池, un: 未标注池）
    """

    id: str
    features: np.ndarray
    labels: Optional[np.ndarray] = None
    roles: Optional[np.ndarray] = None

    def __post_init__(self):
        features = np.array(self.features, dtype=np.float64)
        if features.ndim == 1:
            features = features.reshape(-1, 1)
        if features.ndim != 2 or features.shape[0] < 1 or features.shape[1] < 1:
            raise DataError(f"数据集 {self.id} 至少需要一个实例 (shape={features.shape})")
        if not np.all(np.isfinite(features)):
            raise DataError(f"数据集 {self.id} 包含非有限特征值")
        object.__setattr__(self, "features", _readonly(features))

        n = features.shape[0]
        if self.labels is not None:
            labels = np.array(self.labels, dtype=np.int64)
            if labels.shape != (n,):
                raise DataError(f"数据集 {self.id} 的标签长度 {labels.shape} 与实例数 {n} 不一致")
            if not np.all(np.isin(labels, (0, 1))):
                raise DataError(f"数据集 {self.id} 的标签只能为 0/1")
            object.__setattr__(self, "labels", _readonly(labels))
        if self.roles is not None:
            roles = np.array(self.roles, dtype=object)
            if roles.shape != (n,):
                raise DataError(f"数据集 {self.id} 的角色列长度与实例数不一致")
            if not np.all(np.isin(roles, (ROLE_NORMAL, ROLE_UNLABELED))):
                raise DataError(f"数据集 {self.id} 的角色只能为 {ROLE_NORMAL}/{ROLE_UNLABELED}")
            object.__setattr__(self, "roles", _readonly(roles))

    @property
    def n_instances(self):
        return self.features.shape[0]

    @property
    def dim(self):
        return self.features.shape[1]

    @property
    def has_roles(self):
        return self.roles is not None

    def pool(self, role):
        """返回指定角色实例的下标"""
        if self.roles is None:
            raise DataError(f"数据集 {self.id} 没有正常/未标注划分")
        return np.flatnonzero(self.roles == role)

    def take(self, indices):
        """按下标取子集（保留标签和角色），id 不变"""
        indices = np.asarray(indices, dtype=np.int64)
        return DatasetSample(
            self.id,
            self.features[indices],
            None if self.labels is None else self.labels[indices],
            None if self.roles is None else self.roles[indices],
        )


@dataclass(frozen=True, eq=False)
class Episode:
    """一次元训练任务：分子/分母支持集与查询集（查询集包含对应支持集）"""

    s_nu: DatasetSample
    s_de: DatasetSample
    q_nu: DatasetSample
    q_de: DatasetSample
    alpha: float
    n_support: int


# ---------------------------------------------------------------------------
# 采样
# ---------------------------------------------------------------------------

def _support_and_query(sample, pool, n_support, n_query, rng):
    """
    从下标池中无放回地抽取支持集，再从剩余部分抽取至多 n_query 个实例并与支持集合并

    返回:
        tuple: (支持集, 查询集)
    """
    if n_support < 1:
        raise DataError(f"支持集大小必须为正，实际 {n_support}")
    if len(pool) < n_support:
        raise DataError(f"数据集 {sample.id} 只有 {len(pool)} 个可用实例，不足支持集大小 {n_support}")
    order = rng.permutation(pool)
    support = order[:n_support]
    extra = order[n_support:n_support + min(n_query, len(pool) - n_support)]
    query = np.concatenate([support, extra])
    return sample.take(support), sample.take(query)


def sample_pair_episode(sources, n_support, n_query, rng, alpha=0.5):
    """
    成对任务采样：有放回地均匀抽取两个数据集 d、d′（d = d′ 的概率为 1/D）

    参数:
        sources (list[DatasetSample]): 源数据集
        n_support (int): 每侧支持集大小 N_S
        n_query (int): 每侧附加查询实例数 N_Q
        rng (numpy.random.Generator): 随机数生成器
        alpha (float): 相对参数

    返回:
        Episode: 采样得到的任务
    """
    if not sources:
        raise DataError("没有可用的源数据集")
    d_nu, d_de = rng.integers(len(sources), size=2)
    nu, de = sources[d_nu], sources[d_de]
    s_nu, q_nu = _support_and_query(nu, np.arange(nu.n_instances), n_support, n_query, rng)
    s_de, q_de = _support_and_query(de, np.arange(de.n_instances), n_support, n_query, rng)
    return Episode(s_nu, s_de, q_nu, q_de, alpha, n_support)


def sample_outlier_episode(sources, n_support_nor, n_support_un, n_query, rng, alpha=0.5):
    """
    离群检测任务采样：抽取一个数据集，分子取自正常池，分母取自未标注池

    参数:
        sources (list[DatasetSample]): 带 nor/un 角色划分的源数据集
        n_support_nor (int): 正常支持集大小
        n_support_un (int): 未标注支持集大小
        n_query (int): 每侧附加查询实例数
        rng (numpy.random.Generator): 随机数生成器
        alpha (float): 相对参数

    返回:
        Episode: 采样得到的任务
    """
    if not sources:
        raise DataError("没有可用的源数据集")
    sample = sources[rng.integers(len(sources))]
    normal = sample.pool(ROLE_NORMAL)
    unlabeled = sample.pool(ROLE_UNLABELED)
    if len(normal) == 0 or len(unlabeled) == 0:
        raise DataError(f"数据集 {sample.id} 的正常池或未标注池为空")
    s_nu, q_nu = _support_and_query(sample, normal, n_support_nor, n_query, rng)
    s_de, q_de = _support_and_query(sample, unlabeled, n_support_un, n_query, rng)
    return Episode(s_nu, s_de, q_nu, q_de, alpha, n_support_nor)


def draw_pair_supports(a, b, n_support, rng, same=False):
    """
    为目标数据对抽取支持集，其余实例作为测试集

    同一数据集自配对时两侧支持集取自同一排列的不相交部分，测试集为两者之外的实例

    返回:
        tuple: (S_nu, S_de, T_nu, T_de)，测试集为空时对应项为 None
    """
    if same:
        need = 2 * n_support
        if a.n_instances < need:
            raise DataError(f"数据集 {a.id} 只有 {a.n_instances} 个实例，自配对需要 {need} 个")
        order = rng.permutation(a.n_instances)
        rest = order[need:]
        test = a.take(rest) if len(rest) else None
        return a.take(order[:n_support]), a.take(order[n_support:need]), test, test

    for sample in (a, b):
        if sample.n_instances < n_support:
            raise DataError(f"数据集 {sample.id} 只有 {sample.n_instances} 个实例，不足支持集大小 {n_support}")
    order_a = rng.permutation(a.n_instances)
    order_b = rng.permutation(b.n_instances)
    rest_a, rest_b = order_a[n_support:], order_b[n_support:]
    return (a.take(order_a[:n_support]), b.take(order_b[:n_support]),
            a.take(rest_a) if len(rest_a) else None, b.take(rest_b) if len(rest_b) else None)


# ---------------------------------------------------------------------------
# 合成数据
# ---------------------------------------------------------------------------

def _check_counts(**counts):
    for name, value in counts.items():
        if int(value) != value or value < 1:
            raise DataError(f"{name} 必须为正整数，实际 {value}")


def gen_synthetic_gaussian_suite(n_source, n_val, n_target, n_per_dataset, rng):
    """
    一维高斯合成数据: 每个数据集 N(μ_d, σ_d²)，μ_d ~ U[−1.5, 1.5]，σ_d ~ U[0.1, 2]

    返回:
        tuple: (源, 验证, 目标) 三个数据集列表，以及 {数据集id: {"mu": [...], "sigma": [...]}}
    """
    _check_counts(n_source=n_source, n_val=n_val, n_target=n_target, n_per_dataset=n_per_dataset)
    records = {}
    splits = []
    for prefix, count in (("src", n_source), ("val", n_val), ("tgt", n_target)):
        datasets = []
        for i in range(count):
            mu = rng.uniform(-1.5, 1.5)
            sigma = rng.uniform(0.1, 2.0)
            name = f"{prefix}_{i:03d}"
            datasets.append(DatasetSample(name, rng.normal(mu, sigma, size=(n_per_dataset, 1))))
            records[name] = {"mu": [float(mu)], "sigma": [float(sigma)]}
        splits.append(datasets)
    logger.info(f"生成高斯合成数据: 源 {n_source} / 验证 {n_val} / 目标 {n_target}，每个 {n_per_dataset} 个实例")
    return splits[0], splits[1], splits[2], records


def gen_synthetic_outlier_suite(n_source, n_val, n_target, n_normal, n_unlabeled, outlier_rate, rng,
                                dim=2, shift=5.0, outlier_variance=0.1):
    """
    离群检测合成数据

    每个数据集正常实例来自 N(μ_d, I)，μ_d ~ U[−1,1]^dim；未标注池中按 outlier_rate
    混入来自 N(μ_d + shift, outlier_variance·I) 的离群实例

    返回:
        tuple: (源, 验证, 目标) 三个数据集列表，以及 {数据集id: {"mu": [...], "sigma": [...]}}
    """
    _check_counts(n_source=n_source, n_val=n_val, n_target=n_target,
                  n_normal=n_normal, n_unlabeled=n_unlabeled, dim=dim)
    if not 0.0 <= outlier_rate < 1.0:
        raise DataError(f"离群比例必须在 [0, 1) 内，实际 {outlier_rate}")

    n_outliers = int(round(outlier_rate * n_unlabeled))
    records = {}
    splits = []
    for prefix, count in (("src", n_source), ("val", n_val), ("tgt", n_target)):
        datasets = []
        for i in range(count):
            mu = rng.uniform(-1.0, 1.0, size=dim)
            normal = rng.normal(mu, 1.0, size=(n_normal, dim))
            inliers = rng.normal(mu, 1.0, size=(n_unlabeled - n_outliers, dim))
            outliers = rng.normal(mu + shift, np.sqrt(outlier_variance), size=(n_outliers, dim))
            unlabeled = np.vstack([inliers, outliers])
            flags = np.concatenate([np.zeros(len(inliers), dtype=np.int64), np.ones(n_outliers, dtype=np.int64)])
            order = rng.permutation(n_unlabeled)
            name = f"{prefix}_{i:03d}"
            datasets.append(DatasetSample(
                name,
                np.vstack([normal, unlabeled[order]]),
                labels=np.concatenate([np.zeros(n_normal, dtype=np.int64), flags[order]]),
                roles=np.array([ROLE_NORMAL] * n_normal + [ROLE_UNLABELED] * n_unlabeled, dtype=object),
            ))
            records[name] = {"mu": [float(m) for m in mu], "sigma": [1.0] * dim}
        splits.append(datasets)
    logger.info(f"生成离群检测合成数据: 源 {n_source} / 验证 {n_val} / 目标 {n_target}，"
                f"未标注池离群比例 {outlier_rate}")
    return splits[0], splits[1], splits[2], records


# ---------------------------------------------------------------------------
# CSV 读写
# ---------------------------------------------------------------------------

def _is_number(cell):
    try:
        float(cell)
        return True
    except ValueError:
        return False


def load_dataset_file(path):
    """
    读取单个CSV数据集（每行一个实例）

    可选表头；表头中名为 label 的列为 0/1 离群标记，名为 role 的列为 nor/un 角色

    参数:
        path (str): CSV文件路径

    返回:
        DatasetSample: 数据集，id 为文件名（不含扩展名）
    """
    name = os.path.splitext(os.path.basename(path))[0]
    with open(path, 'r', encoding='utf-8', newline='') as f:
        rows = [(i, row) for i, row in enumerate(csv.reader(f), start=1) if any(c.strip() for c in row)]
    if not rows:
        raise DataError(f"{path}: 文件为空")

    header = None
    first_line, first = rows[0]
    if not all(_is_number(c) for c in first):
        header = [c.strip() for c in first]
        rows = rows[1:]
        if not rows:
            raise DataError(f"{path}: 只有表头没有数据")
    width = len(header) if header else len(rows[0][1])

    label_col = header.index(LABEL_COLUMN) if header and LABEL_COLUMN in header else None
    role_col = header.index(ROLE_COLUMN) if header and ROLE_COLUMN in header else None
    feature_cols = [j for j in range(width) if j not in (label_col, role_col)]
    if not feature_cols:
        raise DataError(f"{path}: 没有特征列")

    features, labels, roles = [], [], []
    for line, row in rows:
        if len(row) != width:
            raise DataError(f"{path}: 第{line}行有 {len(row)} 列，应为 {width} 列")
        try:
            features.append([float(row[j]) for j in feature_cols])
            if label_col is not None:
                labels.append(int(float(row[label_col])))
        except ValueError:
            raise DataError(f"{path}: 第{line}行包含非数值单元格")
        if role_col is not None:
            roles.append(row[role_col].strip())

    try:
        return DatasetSample(name, np.array(features),
                             labels=np.array(labels) if label_col is not None else None,
                             roles=np.array(roles, dtype=object) if role_col is not None else None)
    except DataError as e:
        raise DataError(f"{path}: {e}")


def load_dataset_dir(path, threads=0):
    """
    读取目录下所有CSV数据集（每个文件一个数据集），并检查特征维度一致

    参数:
        path (str): 数据目录
        threads (int): 读取线程数

    返回:
        list[DatasetSample]: 按文件名排序的数据集
    """
    if not os.path.isdir(path):
        raise DataError(f"数据目录不存在: {path}")
    files = sorted(glob.glob(os.path.join(path, "*.csv")))
    if not files:
        raise DataError(f"目录 {path} 中没有CSV文件")

    datasets = WorkerPool(threads).map(load_dataset_file, files, description="读取数据集")
    dim = datasets[0].dim
    for f, sample in zip(files, datasets):
        if sample.dim != dim:
            raise DataError(f"{f}: 特征维度 {sample.dim} 与 {files[0]} 的 {dim} 不一致")
    logger.info(f"从 {path} 读取 {len(datasets)} 个数据集 (M={dim})")
    return datasets


def write_dataset_dir(datasets, path):
    """
    把数据集写成 <path>/<id>.csv，浮点数用 repr 保证重新读取时逐位一致

    参数:
        datasets (list[DatasetSample]): 数据集
        path (str): 输出目录
    """
    os.makedirs(path, exist_ok=True)
    for sample in datasets:
        header = [f"x{j}" for j in range(sample.dim)]
        if sample.roles is not None:
            header.append(ROLE_COLUMN)
        if sample.labels is not None:
            header.append(LABEL_COLUMN)
        with open(os.path.join(path, f"{sample.id}.csv"), 'w', encoding='utf-8', newline='') as f:
            writer = csv.writer(f)
            writer.writerow(header)
            for i in range(sample.n_instances):
                row = [repr(float(v)) for v in sample.features[i]]
                if sample.roles is not None:
                    row.append(sample.roles[i])
                if sample.labels is not None:
                    row.append(str(int(sample.labels[i])))
                writer.writerow(row)
    logger.info(f"写入 {len(datasets)} 个数据集到 {path}")


def split_sources(datasets, counts, rng):
    """
    随机划分源/验证/目标数据集（互不相交）

    参数:
        datasets (list[DatasetSample]): 全部数据集
        counts (tuple): (源, 验证, 目标) 的数量，或三个比例（均为小于1的小数）
        rng (numpy.random.Generator): 随机数生成器

    返回:
        tuple: (源, 验证, 目标)
    """
    total = len(datasets)
    if len(counts) != 3:
        raise DataError(f"划分需要三个数量，实际 {counts}")
    if all(isinstance(c, float) and 0 <= c < 1 for c in counts):
        counts = [int(np.floor(c * total)) for c in counts]
    counts = [int(c) for c in counts]
    if any(c < 0 for c in counts) or sum(counts) > total:
        raise DataError(f"划分数量 {counts} 超过数据集总数 {total}")
    order = rng.permutation(total)
    a, b, c = counts
    pick = lambda idx: [datasets[i] for i in idx]
    return pick(order[:a]), pick(order[a:a + b]), pick(order[a + b:a + b + c])
