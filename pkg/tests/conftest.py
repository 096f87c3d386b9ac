"""
测试公共设置
脚本按平铺方式放在仓库根目录，这里把根目录加入 sys.path。
"""

import os
import sys

import pytest

sys.path.insert(0, os.path.join(os.path.dirname(__file__), '..'))

from marginal_model import make_rng  # noqa: E402


@pytest.fixture
def rng():
    """固定种子的随机流"""
    return make_rng(12345)


@pytest.fixture
def rng_factory():
    return make_rng
