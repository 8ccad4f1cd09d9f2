"""配置管理模块

配置分四段：experiments（各实验的参数覆盖）、output、performance、logging。
优先级：命令行 > DRLAB_* 环境变量 > drlab.yaml > 默认值。
"""

import copy
import os
import re
from pathlib import Path
from typing import Any, Dict, Optional

import yaml

from drlab import constants
from drlab.models.types import ExperimentConfig, ExperimentKind


DEFAULT_CONFIG_FILE = 'drlab.yaml'

_ENV_PATTERN = re.compile(r'\$\{([A-Za-z_][A-Za-z0-9_]*)\}')

# 环境变量 -> (配置路径, 类型转换)
_ENV_OVERRIDES = {
    'DRLAB_OUTPUT_DIR': ('output.dir', str),
    'DRLAB_THREADS': ('performance.threads', int),
    'DRLAB_SEED': ('performance.seed', int),
    'DRLAB_LOG_LEVEL': ('logging.level', str),
    'DRLAB_LOG_FILE': ('logging.file', str),
}


def _merge(base: Dict, update: Dict):
    """把 update 递归合并进 base；只有两边都是字典时才下钻"""
    for key, value in update.items():
        if isinstance(base.get(key), dict) and isinstance(value, dict):
            _merge(base[key], value)
        else:
            base[key] = value


class Config:
    """实验室配置"""

    DEFAULT_CONFIG = {
        # 空字典表示全部取实验目录中的示例值
        'experiments': {name: {} for name in constants.EXPERIMENT_KINDS},
        'output': {'dir': constants.DEFAULT_OUTPUT_DIR},
        'performance': {'threads': constants.DEFAULT_THREADS, 'seed': constants.DEFAULT_SEED},
        'logging': {'level': 'INFO', 'file': None},
    }

    def __init__(self, config_file: Optional[str] = None):
        self.config = copy.deepcopy(self.DEFAULT_CONFIG)

        path = config_file if config_file and Path(config_file).exists() else DEFAULT_CONFIG_FILE
        if Path(path).exists():
            self._load_yaml(path)

        for name, (key_path, convert) in _ENV_OVERRIDES.items():
            if name in os.environ:
                self.set(key_path, convert(os.environ[name]))

    def _load_yaml(self, path: str):
        """读取 YAML，${VAR} 先按环境变量展开；读不了就保留默认值"""
        try:
            text = Path(path).read_text(encoding='utf-8')
            text = _ENV_PATTERN.sub(lambda m: os.environ.get(m.group(1), m.group(0)), text)
            loaded = yaml.safe_load(text)
        except (OSError, yaml.YAMLError) as e:
            print(f"[警告] 加载配置文件失败: {e}")
            return
        if isinstance(loaded, dict):
            _merge(self.config, loaded)

    def get(self, key_path: str, default=None) -> Any:
        """按点分路径取值，如 'experiments.fig5.n'；路径不存在时返回 default"""
        node = self.config
        for key in key_path.split('.'):
            if not isinstance(node, dict) or key not in node:
                return default
            node = node[key]
        return node

    def set(self, key_path: str, value: Any):
        """按点分路径写值，中间层缺失或不是字典时新建"""
        *parents, leaf = key_path.split('.')
        node = self.config
        for key in parents:
            if not isinstance(node.get(key), dict):
                node[key] = {}
            node = node[key]
        node[leaf] = value

    def override_from_args(self, args):
        """命令行参数覆盖（优先级最高）"""
        if getattr(args, 'out', None):
            self.set('output.dir', args.out)
        if getattr(args, 'seed', None) is not None:
            self.set('performance.seed', args.seed)
        if getattr(args, 'threads', None):
            self.set('performance.threads', args.threads)
        if getattr(args, 'log_level', None):
            self.set('logging.level', args.log_level)

        # --set experiments.fig6.n_values=[10, 20]；右侧按 YAML 解析
        for item in getattr(args, 'overrides', None) or []:
            key_path, _, raw = item.partition('=')
            self.set(key_path.strip(), yaml.safe_load(raw))

        # --param n=50 只作用于当前实验
        experiment = getattr(args, 'experiment', None)
        if experiment:
            for item in getattr(args, 'params', None) or []:
                key, _, raw = item.partition('=')
                self.set(f'experiments.{experiment}.{key.strip()}', yaml.safe_load(raw))

    def section(self, name: str) -> Dict:
        """某个配置段的副本"""
        return copy.deepcopy(self.config.get(name, {}))

    def experiment_config(self, experiment) -> ExperimentConfig:
        """
        组装单个实验的 ExperimentConfig

        params 只含用户覆盖的键，其余参数由 experiments.validate_config 补全。
        """
        kind = experiment if isinstance(experiment, ExperimentKind) else ExperimentKind(experiment)
        overrides = self.get(f'experiments.{kind.value}') or {}
        return ExperimentConfig(
            experiment=kind,
            params=copy.deepcopy(overrides),
            seed=self.get('performance.seed'),
            out=self.get('output.dir', constants.DEFAULT_OUTPUT_DIR),
            threads=self.get('performance.threads', constants.DEFAULT_THREADS),
        )

    def to_dict(self) -> Dict:
        return copy.deepcopy(self.config)

    @staticmethod
    def create_template(file_path='config_example.yaml'):
        """写出带注释的 drlab.yaml 模板"""
        template = f"""# drlab 配置（复制为 {DEFAULT_CONFIG_FILE} 即生效）
# 值里可以写 ${{VAR}}，加载时按环境变量展开
# 覆盖顺序：命令行 > DRLAB_* 环境变量 > 本文件 > 内置默认

# 各实验只写需要改的参数，完整参数表见 `python dre.py list`
experiments:
  critical-point:
    family: power-law  # 初始律：two-delta / power-law / log-corrected
    alpha: 3.0  # P(X=k) ~ k^{{-alpha}}
  fig5:
    family: two-delta
    n: 2000  # 迭代代数
    every: 10  # 写出间隔
  fig6:
    n_values: [250, 500, 1000]  # 标度塌缩用的代数
  fig7:
    m_values: [20, 40, 80]  # 离散树的根层
  pde-run:
    dx: 0.02  # 收敛阶检验的粗网格
  tree-sample:
    trees: 1000  # 统计用的树
    mc_trees: 100000  # 不分叉频率的 Monte Carlo 树
    cutoff_fraction: 0.1  # 连续树叶子截断 t_min/t，取值 (0, 1)；越小树越大
  nu-window:
    nu: 3  # 每个节点的子代数

output:
  dir: {constants.DEFAULT_OUTPUT_DIR}  # CSV/JSON 结果目录

performance:
  threads: {constants.DEFAULT_THREADS}  # 参数扫描与抽样的线程数
  seed: {constants.DEFAULT_SEED}  # 随机实验的种子，同一种子输出与线程数无关

logging:
  level: INFO  # DEBUG 会打印每个求解步的诊断
  file: null  # 额外写入的日志文件
"""
        Path(file_path).write_text(template, encoding='utf-8')
        print(f"配置模板已创建: {file_path}")
