#!/usr/bin/env python
# -*- coding: utf-8 -*-

"""
测试公共配置与夹具
"""

import os
import sys

import numpy as np
import pytest

sys.path.insert(0, os.path.join(os.path.dirname(__file__), '..'))

from utils.episodes import DatasetSample  # noqa: E402
from utils.model import init_params  # noqa: E402
from utils.rng import make_rng  # noqa: E402


def pytest_addoption(parser):
    parser.addoption("--runslow", action="store_true", default=False, help="运行完整规模的验收测试")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--runslow"):
        return
    skip_slow = pytest.mark.skip(reason="需要 --runslow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


@pytest.fixture
def rng():
    return make_rng(1234)


@pytest.fixture
def tiny_params():
    """M=2, K=4, T=8 的小模型"""
    return init_params(7, input_dim=2, latent_dim=4, alpha=0.5, embed_dim=8, hidden_dim=8)


@pytest.fixture
def tiny_episode(rng):
    """|S|=3, |Q|=5 的随机二维任务"""
    s_nu = DatasetSample("a", rng.normal(0.0, 1.0, size=(3, 2)))
    s_de = DatasetSample("b", rng.normal(0.5, 1.2, size=(3, 2)))
    q_nu = DatasetSample("a", np.vstack([s_nu.features, rng.normal(0.0, 1.0, size=(2, 2))]))
    q_de = DatasetSample("b", np.vstack([s_de.features, rng.normal(0.5, 1.2, size=(2, 2))]))
    return s_nu, s_de, q_nu, q_de

