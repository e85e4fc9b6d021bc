"""
pytest 全局配置

- 把仓库根目录加入 sys.path，测试以 `src.*` 导入
- 注册 slow 标记；只有加 --run-slow 时才运行
"""
import sys
from pathlib import Path

import pytest

ROOT = Path(__file__).resolve().parent
if str(ROOT) not in sys.path:
    sys.path.insert(0, str(ROOT))


def pytest_addoption(parser):
    parser.addoption("--run-slow", action="store_true", default=False, help="运行耗时较长的复现实验")


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: 耗时较长的复现实验，需要 --run-slow")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--run-slow"):
        return
    skip = pytest.mark.skip(reason="需要 --run-slow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip)
