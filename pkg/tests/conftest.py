"""pytest配置文件"""

import pytest
import sys
from pathlib import Path

# 添加项目根目录到Python路径
project_root = Path(__file__).parent.parent
sys.path.insert(0, str(project_root))

from drlab.core import discrete  # noqa: E402
from drlab.models.types import FamilyKind, ModelFamily  # noqa: E402


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: 长时间验收运行（n = 2000 迭代、10⁵ 棵树、ν 窗口扫描）")


@pytest.fixture
def temp_config_file(tmp_path):
    """创建临时配置文件"""
    config_file = tmp_path / "drlab.yaml"
    config_content = """
experiments:
  fig5:
    n: 300
    every: 5
  critical-point:
    family: two-delta

output:
  dir: custom_results

performance:
  threads: 2
  seed: 7
"""
    config_file.write_text(config_content, encoding='utf-8')
    return str(config_file)


@pytest.fixture
def out_dir(tmp_path):
    """实验输出目录"""
    path = tmp_path / "results"
    path.mkdir()
    return str(path)


@pytest.fixture
def two_delta_critical():
    """临界 two-delta 族（p = 1/5）"""
    return ModelFamily(FamilyKind.TWO_DELTA, 0.2)


@pytest.fixture
def small_history(two_delta_critical):
    """临界 two-delta 的 Q_0..Q_12（K = 256）"""
    return discrete.iterate_history(discrete.make_family(two_delta_critical, K=256), 12)
