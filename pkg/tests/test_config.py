"""测试配置管理功能"""

import argparse

import pytest

from drlab import constants
from drlab.models.types import ExperimentKind
from drlab.utils.config import Config


@pytest.fixture(autouse=True)
def clean_env(monkeypatch, tmp_path):
    """隔离 DRLAB_* 环境变量与当前目录下的 drlab.yaml"""
    for name in ('DRLAB_OUTPUT_DIR', 'DRLAB_THREADS', 'DRLAB_SEED', 'DRLAB_LOG_LEVEL', 'DRLAB_LOG_FILE'):
        monkeypatch.delenv(name, raising=False)
    monkeypatch.chdir(tmp_path)


def test_default_config():
    """测试默认配置"""
    config = Config()

    assert config.get('output.dir') == constants.DEFAULT_OUTPUT_DIR
    assert config.get('performance.threads') == constants.DEFAULT_THREADS
    assert config.get('performance.seed') == constants.DEFAULT_SEED
    assert config.get('logging.level') == 'INFO'
    assert config.get('experiments.fig5') == {}


def test_load_from_file(temp_config_file):
    """测试从文件加载配置"""
    config = Config(config_file=temp_config_file)

    assert config.get('experiments.fig5.n') == 300
    assert config.get('experiments.critical-point.family') == 'two-delta'
    assert config.get('output.dir') == 'custom_results'
    assert config.get('performance.threads') == 2
    # 文件未写出的段保留默认值
    assert config.get('logging.level') == 'INFO'


def test_env_vars_in_file(tmp_path, monkeypatch):
    """${VAR} 在加载时展开"""
    monkeypatch.setenv('RESULTS_ROOT', '/data/dr')
    path = tmp_path / "env.yaml"
    path.write_text("output:\n  dir: ${RESULTS_ROOT}/run1\n", encoding='utf-8')

    assert Config(str(path)).get('output.dir') == '/data/dr/run1'


def test_env_overrides_file(temp_config_file, monkeypatch):
    """环境变量优先于配置文件"""
    monkeypatch.setenv('DRLAB_THREADS', '6')
    monkeypatch.setenv('DRLAB_SEED', '99')
    monkeypatch.setenv('DRLAB_LOG_LEVEL', 'DEBUG')
    config = Config(temp_config_file)

    assert config.get('performance.threads') == 6
    assert config.get('performance.seed') == 99
    assert config.get('logging.level') == 'DEBUG'


def test_broken_file_keeps_defaults(tmp_path, capsys):
    path = tmp_path / "broken.yaml"
    path.write_text("output: [unclosed\n", encoding='utf-8')
    config = Config(str(path))

    assert config.get('output.dir') == constants.DEFAULT_OUTPUT_DIR
    assert "加载配置文件失败" in capsys.readouterr().out


def test_get_and_set():
    """测试设置配置"""
    config = Config()

    config.set('experiments.fig5.n', 500)
    assert config.get('experiments.fig5.n') == 500

    config.set('new.nested.key', 'value')
    assert config.get('new.nested.key') == 'value'
    assert config.get('nonexistent.key', 'default') == 'default'


def test_override_from_args(temp_config_file):
    """命令行优先级最高"""
    config = Config(temp_config_file)
    args = argparse.Namespace(out='cli_out', seed=0, threads=8, log_level='WARNING',
                              overrides=['experiments.fig6.n_values=[10, 20]'],
                              params=['n=50', 'family=power-law'], experiment='fig5')
    config.override_from_args(args)

    assert config.get('output.dir') == 'cli_out'
    assert config.get('performance.seed') == 0
    assert config.get('performance.threads') == 8
    assert config.get('logging.level') == 'WARNING'
    assert config.get('experiments.fig6.n_values') == [10, 20]
    assert config.get('experiments.fig5.n') == 50
    assert config.get('experiments.fig5.family') == 'power-law'
    assert config.get('experiments.fig5.every') == 5


def test_experiment_config(temp_config_file):
    config = Config(temp_config_file)
    exp = config.experiment_config('fig5')

    assert exp.experiment == ExperimentKind.FIG5
    assert exp.params == {'n': 300, 'every': 5}
    assert exp.seed == 7
    assert exp.out == 'custom_results'
    assert exp.threads == 2

    other = config.experiment_config(ExperimentKind.NU_WINDOW)
    assert other.params == {}


def test_to_dict_is_a_copy():
    config = Config()
    data = config.to_dict()
    data['output']['dir'] = 'changed'

    assert config.get('output.dir') == constants.DEFAULT_OUTPUT_DIR


def test_create_template(tmp_path):
    """模板可以被重新加载"""
    path = tmp_path / "template.yaml"
    Config.create_template(str(path))

    config = Config(str(path))
    assert config.get('experiments.fig5.n') == 2000
    assert config.get('experiments.critical-point.family') == 'power-law'
    assert config.get('logging.file') is None


def test_template_uses_lab_defaults(tmp_path):
    """模板的输出与性能段取自 constants"""
    path = tmp_path / "template.yaml"
    Config.create_template(str(path))

    config = Config(str(path))
    assert config.get('output.dir') == constants.DEFAULT_OUTPUT_DIR
    assert config.get('performance.threads') == constants.DEFAULT_THREADS
    assert config.get('performance.seed') == constants.DEFAULT_SEED
    assert config.get('experiments.tree-sample.cutoff_fraction') == pytest.approx(0.1)
    assert config.experiment_config('nu-window').params == {'nu': 3}
