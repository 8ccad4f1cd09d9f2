"""测试实验编排"""

import json
import os

import pytest

from drlab import constants
from drlab.core import experiments
from drlab.core.exceptions import ConfigValidationError
from drlab.models.types import ExperimentConfig, ExperimentKind


def _config(name, out, seed=constants.DEFAULT_SEED, threads=2, **params):
    return ExperimentConfig(experiment=ExperimentKind(name), params=params, seed=seed, out=out, threads=threads)


SMALL_TREES = dict(family='two-delta', K=64, n=8, X=4, m_prime=4, trees=20, mc_trees=400,
                   x=1.0, t=1.0, cutoff_fraction=0.1)


class TestCatalog:
    """实验目录"""

    def test_order_follows_kinds(self):
        names = [entry['experiment'] for entry in experiments.list_experiments()]
        assert names == list(constants.EXPERIMENT_KINDS)

    def test_entries_are_complete(self):
        for entry in experiments.list_experiments():
            assert entry['figure']
            assert entry['description']
            assert entry['config']['experiment'] == entry['experiment']
            assert entry['config']['seed'] == constants.DEFAULT_SEED

    @pytest.mark.parametrize("name", list(constants.EXPERIMENT_KINDS))
    def test_sample_configs_validate(self, name):
        """每个示例配置都能通过校验"""
        config = experiments.validate_config(experiments.sample_config(name))
        assert config.experiment.value == name

    def test_sample_config_is_a_copy(self):
        first = experiments.sample_config('fig2')
        first.params['n_values'].append(999)
        assert 999 not in experiments.sample_config('fig2').params['n_values']

    def test_unknown_experiment(self):
        with pytest.raises(ConfigValidationError):
            experiments.sample_config('fig4')


class TestValidation:
    """配置校验"""

    def test_fills_defaults(self, out_dir):
        config = experiments.validate_config(_config('fig5', out_dir, n=100))
        assert config.params['n'] == 100
        assert config.params['every'] == 10
        assert config.out == out_dir

    @pytest.mark.parametrize("name,params,field", [
        ('fig5', {'bogus': 1}, 'params.bogus'),
        ('fig5', {'n': 0}, 'params.n'),
        ('fig5', {'n': True}, 'params.n'),
        ('fig5', {'family': 'gaussian'}, 'params.family'),
        ('fig2', {'offsets': [0.1, 0.2]}, 'params.offsets'),
        ('fig6', {'window': [2.0, 1.0]}, 'params.window'),
        ('fig3', {'family': 'two-delta'}, 'params.family'),
        ('fig5', {'arity': 3, 'family': 'power-law'}, 'params.arity'),
        ('pde-run', {'sum_a': [1.0]}, 'params.sum_b'),
        ('pde-run', {'T': 20.0}, 'params.T'),
        ('scaling-profile', {'tail_F0': 6.0}, 'params.tail_F0'),
        ('tree-sample', {'m_prime': 30}, 'params.m_prime'),
    ])
    def test_rejects_bad_params(self, out_dir, name, params, field):
        with pytest.raises(ConfigValidationError) as exc_info:
            experiments.validate_config(_config(name, out_dir, **params))
        assert exc_info.value.field == field

    def test_random_experiment_needs_seed(self, out_dir):
        with pytest.raises(ConfigValidationError) as exc_info:
            experiments.validate_config(_config('tree-sample', out_dir, seed=None))
        assert exc_info.value.field == 'seed'

    def test_rejects_bad_threads_and_seed(self, out_dir):
        with pytest.raises(ConfigValidationError):
            experiments.validate_config(_config('fig5', out_dir, threads=0))
        with pytest.raises(ConfigValidationError):
            experiments.validate_config(_config('fig5', out_dir, seed=-1))


class TestRun:
    """端到端运行（小参数）"""

    def test_critical_point_two_delta(self, out_dir):
        result = experiments.run(_config('critical-point', out_dir, family='two-delta'), quiet=True)

        assert result.passed
        assert result.summary['p_c'] == pytest.approx(0.2, abs=1e-10)
        assert {'critical_point.csv', 'critical_point.json'} <= set(result.files)
        summary = json.load(open(os.path.join(out_dir, 'critical-point_summary.json'), encoding='utf-8'))
        assert summary['passed'] is True
        assert summary['config']['params']['family'] == 'two-delta'

    def test_fig5_writes_series(self, out_dir):
        result = experiments.run(_config('fig5', out_dir, n=100, every=10), quiet=True)

        assert result.files == ['fig5_two-delta.csv']
        names = [c.name for c in result.checks]
        assert names[:2] == ['factor_law', 'monotone_approach']
        assert result.summary['target'] == pytest.approx(4.0)

    def test_output_independent_of_threads(self, tmp_path):
        """同一种子下输出与线程数无关"""
        contents = []
        for threads in (1, 4):
            out = str(tmp_path / f"t{threads}")
            result = experiments.run(_config('tree-sample', out, threads=threads, **SMALL_TREES), quiet=True)
            contents.append({name: open(os.path.join(out, name), 'rb').read() for name in result.files})
        assert contents[0] == contents[1]

    def test_tree_sample_checks(self, out_dir):
        result = experiments.run(_config('tree-sample', out_dir, **SMALL_TREES), quiet=True)
        checks = {c.name: c for c in result.checks}

        assert checks['branch_probability_sum'].passed
        assert checks['monte_carlo_no_branching'].passed
        assert result.summary['discrete']['trees'] == 20
        assert 'tree_discrete_first.json' in result.files

    @pytest.mark.slow
    def test_scaling_profile_passes(self, out_dir):
        result = experiments.run(_config('scaling-profile', out_dir), quiet=True)
        assert result.passed, [c.to_dict() for c in result.checks if not c.passed]
        assert 'perturb_eigenfunction.csv' in result.files

    @pytest.mark.slow
    def test_pde_run_passes(self, out_dir):
        result = experiments.run(_config('pde-run', out_dir), quiet=True)
        assert result.passed, [c.to_dict() for c in result.checks if not c.passed]


class TestAcceptance:
    """示例配置下的完整验收（长时间）"""

    @pytest.mark.slow
    @pytest.mark.parametrize("name,params,check,tolerance", [
        ('fig7', {'family': 'two-delta'}, 'no_branching_at_largest_m', constants.TREE_CURVE_RTOL),
        ('fig7', {'family': 'power-law', 'alpha': 6.0}, 'no_branching_at_largest_m', constants.TREE_CURVE_RTOL),
        ('fig7', {'family': 'power-law', 'alpha': 3.0}, 'no_branching_at_largest_m',
         constants.TREE_CURVE_RTOL_GENERAL),
        ('fig8', {'family': 'power-law', 'alpha': 3.0}, 'split_law_at_largest_m',
         constants.TREE_CURVE_RTOL_GENERAL),
    ])
    def test_tree_curves_within_tolerance(self, out_dir, name, params, check, tolerance):
        """离散树与连续极限的最大相对误差：指数类 3%，α = 3 用 F0 = 3/2 剖面 5%"""
        result = experiments.run(_config(name, out_dir, **params), quiet=True)
        checks = {c.name: c for c in result.checks}
        assert checks[check].passed
        assert checks[check].measured <= tolerance
        assert result.summary['max_rel_error']['80'] <= tolerance

    @pytest.mark.slow
    def test_free_energy_extrapolation(self, out_dir):
        """(log 𝓕_n)^{-2} 的直线外推截距接近 p_c，且 R² 随 n 增大"""
        result = experiments.run(_config('fig2', out_dir), quiet=True)
        assert result.passed, [c.to_dict() for c in result.checks if not c.passed]
        assert {c.name for c in result.checks} >= {'intercept_at_largest_n', 'r2_improves_with_n'}

    @pytest.mark.slow
    def test_inverse_log_for_power_law(self, out_dir):
        """α = 3 幂律族上 (−log 𝓕_n)^{-1} 更接近直线"""
        result = experiments.run(_config('fig3', out_dir), quiet=True)
        assert result.passed, [c.to_dict() for c in result.checks if not c.passed]
        assert 'inverse_log_linearizes' in {c.name for c in result.checks}

    @pytest.mark.slow
    def test_nu_window(self, out_dir):
        """ν = 3：下端与 ν/(ν−1) 一致，上端约为 2.6"""
        result = experiments.run(_config('nu-window', out_dir), quiet=True)
        assert result.passed, [c.to_dict() for c in result.checks if not c.passed]
        names = {c.name for c in result.checks}
        assert names == {'window_lower_theory', 'window_lower', 'window_upper'}
        assert result.summary['alpha_theory'] == pytest.approx(1.5)
