"""测试命令行入口"""

import os

import pytest

import dre


@pytest.fixture(autouse=True)
def isolated_cwd(monkeypatch, tmp_path):
    """在空目录中运行，避免读到仓库里的 drlab.yaml"""
    for name in ('DRLAB_OUTPUT_DIR', 'DRLAB_THREADS', 'DRLAB_SEED', 'DRLAB_LOG_LEVEL', 'DRLAB_LOG_FILE'):
        monkeypatch.delenv(name, raising=False)
    monkeypatch.chdir(tmp_path)


def test_list_prints_catalog(capsys):
    assert dre.main(['list']) == 0
    out = capsys.readouterr().out
    assert 'critical-point' in out
    assert 'nu-window' in out


def test_no_command_prints_help(capsys):
    assert dre.main([]) == 0
    assert 'COMMAND' in capsys.readouterr().out


def test_init_config(tmp_path):
    path = tmp_path / "generated.yaml"
    assert dre.main(['init-config', str(path)]) == 0
    assert path.exists()


def test_run_critical_point_and_analyze(tmp_path, capsys):
    """检查全部通过时退出码为 0，--analyze 汇总同一目录"""
    out = str(tmp_path / "results")
    code = dre.main(['critical-point', '--out', out, '-p', 'family=two-delta', '-q'])
    assert code == 0
    assert os.path.exists(os.path.join(out, 'critical-point_summary.json'))
    assert '通过' in capsys.readouterr().out

    assert dre.main(['--analyze', out]) == 0
    assert 'critical-point' in capsys.readouterr().out


def test_config_file_is_used(tmp_path):
    config = tmp_path / "run.yaml"
    out = tmp_path / "from_file"
    config.write_text(f"output:\n  dir: {out}\nexperiments:\n  critical-point:\n    family: two-delta\n",
                      encoding='utf-8')

    assert dre.main(['critical-point', '--config', str(config), '-q']) == 0
    assert (out / 'critical_point.csv').exists()


def test_invalid_param_exit_code(tmp_path, capsys):
    """配置错误返回 2"""
    code = dre.main(['fig5', '--out', str(tmp_path), '-p', 'n=0', '-q'])
    assert code == 2
    assert 'params.n' in capsys.readouterr().out


def test_param_not_allowed_with_all():
    with pytest.raises(SystemExit) as exc_info:
        dre.main(['all', '-p', 'n=10'])
    assert exc_info.value.code == 2


def test_analyze_empty_dir(tmp_path):
    assert dre.main(['--analyze', str(tmp_path)]) == 1
    assert dre.main(['--analyze', str(tmp_path / "missing")]) == 1


def test_unknown_command():
    with pytest.raises(SystemExit):
        dre.main(['fig4'])
