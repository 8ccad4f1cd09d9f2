"""
实验编排模块

实验目录（稳定顺序、对应的图、一句话说明与示例配置）、配置校验，
以及每种 ExperimentKind 的运行器。扫描点交给 ThreadPoolExecutor 并发计算，
结果按点序号重新排序后由单线程写出，输出与调度顺序无关。
"""

import copy
import os
import math
from concurrent.futures import ThreadPoolExecutor, as_completed
from typing import Any, Callable, Dict, List, Optional, Sequence

import numpy as np

from drlab import constants
from drlab.core import discrete, exactsol, pde, perturb, scaling, trees
from drlab.core.analyzer import convergence_order, linear_fit, make_check
from drlab.core.exceptions import ConfigValidationError, DRLabError
from drlab.core.reporter import Reporter
from drlab.models.types import (
    BlowupMonitor,
    EvolutionConfig,
    ExperimentConfig,
    ExperimentKind,
    ExperimentResult,
    ExponentialSum,
    FamilyKind,
    GridFunction,
    ModelFamily,
)
from drlab.utils.buffered_output import SweepProgress
from drlab.utils.logger import get_logger


logger = get_logger()


# ============================================
# 实验目录
# ============================================

_DESCRIPTIONS = {
    'fig2': "近临界自由能：(log 𝓕_n)^{-2} 对 p 的直线外推到 p_c",
    'fig3': "α=3 幂律族：(−log 𝓕_n)^{-1} 比 (log 𝓕_n)^{-2} 更接近直线",
    'fig5': "临界点处 n²(1 − Q_n(0)) 趋于 4（或 α(α−2)/2）",
    'fig6': "n²·2^k·Q_n(k) 对 k/n 收敛到标度函数 F",
    'fig7': "离散树不分叉概率与连续极限 ψ 的对比",
    'fig8': "离散树分裂律与 F(x1/t)F((x−x1)/t) 的对比",
    'critical-point': "分布族临界点 p_c 的二分求解与闭式对照",
    'pde-run': "PDE 网格解与精确解、爆破时间、不变量和正性级数的交叉校验",
    'scaling-profile': "标度函数：指数解、有理 Laplace 形式、F0=12 零点、正性与尾部",
    'tree-sample': "离散/连续随机树抽样、Monte Carlo 不分叉频率与叶子数检验",
    'nu-window': "ν 叉推广标度函数的正性窗口",
}

_SAMPLE_PARAMS = {
    'fig2': {
        'family': 'two-delta', 'alpha': 6.0, 'K': 1024,
        'n_values': [50, 100, 200],
        'offsets': [0.01, 0.02, 0.03, 0.04, 0.05, 0.06, 0.08, 0.1],
    },
    'fig3': {
        'family': 'power-law', 'alpha': 3.0, 'K': 1024,
        'n_values': [100, 200, 400],
        'offsets': [0.02, 0.03, 0.04, 0.05, 0.06, 0.08, 0.1, 0.12, 0.15],
    },
    'fig5': {
        'family': 'two-delta', 'alpha': 3.0, 'arity': 2, 'n': 2000, 'every': 10, 'K': None,
    },
    'fig6': {
        'family': 'two-delta', 'alpha': 3.0, 'n_values': [250, 500, 1000], 'K': None,
        'x_max': 3.0, 'window': [0.1, 2.0],
    },
    'fig7': {
        'family': 'two-delta', 'alpha': 6.0, 'K': 512, 'm_values': [20, 40, 80],
        'window': list(constants.COMPARISON_WINDOW),
    },
    'fig8': {
        'family': 'two-delta', 'alpha': 6.0, 'K': 512, 'm_values': [20, 40, 80],
        'edge_fraction': 0.1,
    },
    'critical-point': {
        'family': 'power-law', 'alpha': 3.0, 'arity': 2, 'alpha_log': 0.0,
        'K': constants.DEFAULT_TRUNCATION,
    },
    'pde-run': {
        'a0': 0.5, 'b0': -1.0, 'L': 12.0, 'T': 2.0, 'dx': 0.02,
        'blowup_a0': 2.0, 'blowup_b0': -1.0, 'blowup_dx': 2e-3,
        'linear_p': 1.0, 'series_t': 0.05, 'series_dx': 1e-3, 'series_terms': 8,
        'sum_a': [0.5, 2.0], 'sum_b': [-1.0, -2.0], 'sum_T': 10.0,
    },
    'scaling-profile': {
        'dx': 1e-3, 'L': 10.0,
        'positive_F0': [1.0, 2.0, 3.0, 4.0], 'negative_F0': [6.0, 8.0],
        'horizon': constants.WINDOW_HORIZON, 'window_dx': constants.WINDOW_DX,
        'tail_F0': 3.0, 'tail_L': 40.0, 'tail_dx': 1e-2, 'tail_range': [20.0, 40.0],
    },
    'tree-sample': {
        'family': 'two-delta', 'alpha': 6.0, 'K': 512, 'n': 20, 'X': 20,
        'trees': 1000, 'mc_trees': 100000, 'm_prime': 15,
        'x': 1.0, 't': 1.0, 'cutoff_fraction': 0.1,
    },
    'nu-window': {
        'nu': 3, 'horizon': constants.WINDOW_HORIZON, 'dx': constants.WINDOW_DX,
        'xtol': constants.WINDOW_XTOL, 'scan_step': 0.1,
    },
}


# scaling-profile 中写出分类记录的 (β, γ)
_REGIME_EXAMPLES = [(1.5, -1.0), (1.5, 0.0), (1.5, 1.0), (1.5, 2.0), (1.5, 3.0), (1.0, 1.0)]


def list_experiments() -> List[Dict[str, Any]]:
    """
    实验目录，顺序与 EXPERIMENT_KINDS 一致

    Returns:
        [{'experiment', 'figure', 'description', 'config'}]，config 为示例配置的字典形式
    """
    catalog = []
    for name in constants.EXPERIMENT_KINDS:
        sample = ExperimentConfig(experiment=ExperimentKind(name),
                                  params=copy.deepcopy(_SAMPLE_PARAMS[name]),
                                  seed=constants.DEFAULT_SEED)
        catalog.append({
            'experiment': name,
            'figure': constants.EXPERIMENT_FIGURES[name],
            'description': _DESCRIPTIONS[name],
            'config': sample.to_dict()
        })
    return catalog


def sample_config(kind) -> ExperimentConfig:
    """某个实验的示例配置"""
    name = kind.value if isinstance(kind, ExperimentKind) else str(kind)
    if name not in _SAMPLE_PARAMS:
        raise ConfigValidationError(f"未知实验: {name}", field='experiment')
    return ExperimentConfig(experiment=ExperimentKind(name), params=copy.deepcopy(_SAMPLE_PARAMS[name]),
                            seed=constants.DEFAULT_SEED)


# ============================================
# 配置校验
# ============================================

def _is_number(v) -> bool:
    return isinstance(v, (int, float)) and not isinstance(v, bool) and math.isfinite(v)


def _is_int(v) -> bool:
    return isinstance(v, int) and not isinstance(v, bool)


def _int_list(v, low: int) -> bool:
    return isinstance(v, list) and len(v) > 0 and all(_is_int(x) and x >= low for x in v)


def _number_list(v, min_len: int = 1) -> bool:
    return isinstance(v, list) and len(v) >= min_len and all(_is_number(x) for x in v)


def _interval(v) -> bool:
    return _number_list(v, 2) and len(v) == 2 and 0 <= v[0] < v[1]


# 参数名 → (校验函数, 错误说明)；同名参数在各实验中含义相同
_PARAM_RULES: Dict[str, tuple] = {
    'family': (lambda v: v in ('two-delta', 'power-law', 'log-corrected'),
               "必须是 two-delta、power-law 或 log-corrected"),
    'alpha': (lambda v: _is_number(v) and v > 2, "必须是大于 2 的数"),
    'alpha_log': (lambda v: _is_number(v) and v >= 0, "必须是非负数"),
    'arity': (lambda v: _is_int(v) and v >= 2, "必须是 ≥ 2 的整数"),
    'K': (lambda v: v is None or (_is_int(v) and v >= 8), "必须为空或 ≥ 8 的整数"),
    'n': (lambda v: _is_int(v) and v >= 1, "必须是正整数"),
    'X': (lambda v: _is_int(v) and v >= 1, "必须是正整数"),
    'every': (lambda v: _is_int(v) and v >= 1, "必须是正整数"),
    'n_values': (lambda v: _int_list(v, 1), "必须是非空正整数列表"),
    'm_values': (lambda v: _int_list(v, 2), "必须是非空的 ≥ 2 整数列表"),
    'offsets': (lambda v: _number_list(v, 3) and all(x > 0 for x in v), "必须是至少 3 个正数"),
    'x_max': (lambda v: _is_number(v) and v > 0, "必须是正数"),
    'window': (_interval, "必须是 [lo, hi] 且 0 ≤ lo < hi"),
    'tail_range': (_interval, "必须是 [lo, hi] 且 0 ≤ lo < hi"),
    'edge_fraction': (lambda v: _is_number(v) and 0 <= v < 0.5, "必须位于 [0, 0.5)"),
    'a0': (lambda v: _is_number(v) and v > 0, "必须是正数"),
    'b0': (lambda v: _is_number(v) and v < 0, "必须是负数"),
    'blowup_a0': (lambda v: _is_number(v) and v > 0, "必须是正数"),
    'blowup_b0': (lambda v: _is_number(v) and v < 0, "必须是负数"),
    'L': (lambda v: _is_number(v) and v > 0, "必须是正数"),
    'T': (lambda v: _is_number(v) and v > 0, "必须是正数"),
    'dx': (lambda v: _is_number(v) and 0 < v < 1, "必须位于 (0, 1)"),
    'blowup_dx': (lambda v: _is_number(v) and 0 < v < 1, "必须位于 (0, 1)"),
    'series_dx': (lambda v: _is_number(v) and 0 < v < 1, "必须位于 (0, 1)"),
    'window_dx': (lambda v: _is_number(v) and 0 < v < 1, "必须位于 (0, 1)"),
    'tail_dx': (lambda v: _is_number(v) and 0 < v < 1, "必须位于 (0, 1)"),
    'linear_p': (lambda v: _is_number(v) and v > 0, "必须是正数"),
    'series_t': (lambda v: _is_number(v) and v > 0, "必须是正数"),
    'series_terms': (lambda v: _is_int(v) and 1 <= v <= 40, "必须是 1..40 的整数"),
    'sum_a': (lambda v: _number_list(v) and all(x > 0 for x in v), "必须是正数列表"),
    'sum_b': (lambda v: _number_list(v) and all(x < 0 for x in v), "必须是负数列表"),
    'sum_T': (lambda v: _is_number(v) and v > 0, "必须是正数"),
    'positive_F0': (lambda v: _number_list(v) and all(x > 0 for x in v), "必须是正数列表"),
    'negative_F0': (lambda v: _number_list(v) and all(x > 0 for x in v), "必须是正数列表"),
    'horizon': (lambda v: _is_number(v) and v > 0, "必须是正数"),
    'tail_F0': (lambda v: _is_number(v) and 0 < v < 4, "必须位于 (0, 4)（α < 4 才有幂律尾）"),
    'tail_L': (lambda v: _is_number(v) and v > 0, "必须是正数"),
    'trees': (lambda v: _is_int(v) and v >= 1, "必须是正整数"),
    'mc_trees': (lambda v: _is_int(v) and v >= 1, "必须是正整数"),
    'm_prime': (lambda v: _is_int(v) and v >= 0, "必须是非负整数"),
    'x': (lambda v: _is_number(v) and v >= 0, "必须是非负数"),
    't': (lambda v: _is_number(v) and v > 0, "必须是正数"),
    'cutoff_fraction': (lambda v: _is_number(v) and 0 < v < 1, "必须位于 (0, 1)"),
    'nu': (lambda v: _is_int(v) and v >= 2, "必须是 ≥ 2 的整数"),
    'xtol': (lambda v: _is_number(v) and v > 0, "必须是正数"),
    'scan_step': (lambda v: _is_number(v) and v > 0, "必须是正数"),
}


def validate_config(config: ExperimentConfig) -> ExperimentConfig:
    """
    校验配置并补全缺省参数

    Returns:
        参数已补全的新配置

    Raises:
        ConfigValidationError: field 指向出错的字段，如 'params.n'
    """
    if not isinstance(config.experiment, ExperimentKind):
        raise ConfigValidationError(f"未知实验: {config.experiment}", field='experiment')
    name = config.experiment.value
    defaults = _SAMPLE_PARAMS[name]
    for key in config.params:
        if key not in defaults:
            raise ConfigValidationError(f"实验 {name} 不接受该参数", field=f'params.{key}')
    params = copy.deepcopy(defaults)
    params.update(copy.deepcopy(config.params))
    for key, value in params.items():
        check, message = _PARAM_RULES[key]
        if not check(value):
            raise ConfigValidationError(f"{message}，实际为 {value!r}", field=f'params.{key}')

    # 跨字段约束
    if name == 'fig3' and params['family'] == 'two-delta':
        raise ConfigValidationError("fig3 需要幂律族", field='params.family')
    if params.get('arity', 2) > 2 and params.get('family') != 'two-delta':
        raise ConfigValidationError("m 叉推广只支持 two-delta 族", field='params.arity')
    if name == 'tree-sample':
        if params['m_prime'] > params['n']:
            raise ConfigValidationError("m_prime 不能超过 n", field='params.m_prime')
        if config.seed is None:
            raise ConfigValidationError("随机实验必须给出种子", field='seed')
    if name == 'pde-run' and len(params['sum_a']) != len(params['sum_b']):
        raise ConfigValidationError("sum_a 与 sum_b 长度必须相同", field='params.sum_b')
    if name == 'pde-run' and params['T'] >= params['L']:
        raise ConfigValidationError("演化时长必须小于区域长度", field='params.T')
    if not _is_int(config.threads) or config.threads < 1:
        raise ConfigValidationError("必须是正整数", field='threads')
    if config.seed is not None and (not _is_int(config.seed) or config.seed < 0):
        raise ConfigValidationError("必须是非负整数", field='seed')

    return ExperimentConfig(experiment=config.experiment, params=params, seed=config.seed,
                            out=config.out, threads=config.threads)


# ============================================
# 公共工具
# ============================================

def _sweep(label: str, points: Sequence[Any], func: Callable[[Any], Any], threads: int,
           quiet: bool = False, describe: Optional[Callable[[Any], str]] = None) -> List[Any]:
    """并发计算扫描点，返回与 points 同序的结果"""
    results: List[Any] = [None] * len(points)
    with SweepProgress(label, len(points), quiet=quiet) as progress:
        with ThreadPoolExecutor(max_workers=max(1, min(threads, len(points) or 1))) as executor:
            future_to_index = {executor.submit(func, point): i for i, point in enumerate(points)}
            for future in as_completed(future_to_index):
                i = future_to_index[future]
                results[i] = future.result()
                progress.advance(describe(points[i]) if describe else "")
    return results


def _family_tag(params: Dict) -> str:
    if params['family'] == 'two-delta':
        arity = params.get('arity', 2)
        return 'two-delta' if arity == 2 else f'two-delta-m{arity}'
    return f"{params['family']}-alpha{params['alpha']:g}"


def _exponential_class(params: Dict) -> bool:
    """标度函数为 4e^{−2x} 的情形：two-delta 或 α > 4"""
    return params['family'] == 'two-delta' or params['alpha'] > 4.0


def _template(params: Dict) -> ModelFamily:
    return ModelFamily(FamilyKind(params['family']), 0.0, alpha=params.get('alpha'),
                       alpha_log=params.get('alpha_log', 0.0), arity=params.get('arity', 2))


def _critical_family(params: Dict, K: int) -> ModelFamily:
    """
    截断长度 K 下恰好临界的分布族参数

    two-delta 取闭式 1/(2m³ − 3m² + 1)；幂律族取截断和给出的 p_K。
    """
    template = _template(params)
    if template.kind == FamilyKind.TWO_DELTA:
        m = template.arity
        return template.with_p(1.0 / (2.0 * m ** 3 - 3.0 * m ** 2 + 1.0))
    if template.kind == FamilyKind.POWER_LAW:
        return template.with_p(discrete.truncated_critical_p(template.alpha, K))
    return template.with_p(discrete.critical_point(template.kind, template.alpha,
                                                   alpha_log=template.alpha_log).p_c)


def _rescaled_K(params: Dict, n: int) -> int:
    if params.get('K'):
        return int(params['K'])
    factor = (constants.RESCALED_K_FACTOR if _exponential_class(params)
              else constants.RESCALED_K_FACTOR_HEAVY)
    return factor * n


def _reference_profile(params: Dict, L: float, dx: float = 1e-3):
    """与该分布族对应的标度函数：指数类为 4e^{−2x}，α < 4 取 F0 = α(α−2)/2"""
    if _exponential_class(params):
        return scaling.exponential_profile(L=L, dx=dx)
    alpha = params['alpha']
    return scaling.solve_profile(alpha * (alpha - 2.0) / 2.0, L=L, dx=dx)


def _factor_target(params: Dict) -> float:
    if params['family'] == 'two-delta':
        return 4.0 / (params.get('arity', 2) - 1.0) ** 2
    alpha = params['alpha']
    if alpha == 4.0:
        logger.warning("α = 4 处存在对数修正，n²(1 − Q_n(0)) 的收敛很慢")
    return 4.0 if alpha >= 4.0 else alpha * (alpha - 2.0) / 2.0


def _sign_changes(values: Sequence[float]) -> int:
    diffs = np.diff(np.asarray(values, dtype=float))
    signs = np.sign(diffs[diffs != 0])
    return int(np.count_nonzero(np.diff(signs)))


# ============================================
# 运行器
# ============================================

def _run_critical_point(params: Dict, config: ExperimentConfig, reporter: Reporter,
                        quiet: bool) -> ExperimentResult:
    result = discrete.critical_point(params['family'], alpha=params.get('alpha'), arity=params['arity'],
                                     K=params['K'], alpha_log=params['alpha_log'])
    checks = [make_check('delta_at_root', 0.0, result.delta_at_root, constants.CRITICAL_DELTA_TOL)]
    if result.closed_form is not None:
        checks.append(make_check('closed_form_agreement', result.closed_form, result.p_c,
                                 constants.CLOSED_FORM_AGREEMENT_TOL, mode='rel'))
    key = (params['family'], params['arity'] if params['family'] == 'two-delta' else float(params['alpha']))
    known = constants.KNOWN_CRITICAL_POINTS.get(key)
    if known is not None and params['alpha_log'] == 0.0:
        checks.append(make_check('known_value', known, result.p_c, constants.CRITICAL_POINT_TOL))

    reporter.save_csv('critical_point.csv', ['family', 'alpha', 'arity', 'p_c', 'closed_form', 'delta_at_root'],
                      [[params['family'], params.get('alpha'), params['arity'], result.p_c,
                        result.closed_form, result.delta_at_root]])
    reporter.save_json('critical_point.json', result.to_dict())
    return ExperimentResult(ExperimentKind.CRITICAL_POINT, checks=checks, summary=result.to_dict())


def _free_energy_sweep(kind: ExperimentKind, params: Dict, config: ExperimentConfig,
                       reporter: Reporter, quiet: bool):
    """fig2/fig3 共用：对 p = p_c(1 + δ) 计算 𝓕_n 并对两种坐标做直线拟合"""
    K = params['K']
    template = _template(params)
    p_c = _critical_family(params, K).p
    n_values = sorted(params['n_values'])
    n_max = n_values[-1]
    points = [p_c * (1.0 + d) for d in params['offsets']]

    def compute(p):
        values = discrete.free_energy(discrete.make_family(template.with_p(p), K=K), n_max)
        return [values[n] for n in n_values]

    energies = _sweep(kind.value, points, compute, config.threads, quiet,
                      describe=lambda p: f"p={p:.8g}")

    rows, fits = [], {}
    for j, n in enumerate(n_values):
        F = np.array([e[j] for e in energies])
        if np.any(F <= 0) or np.any(F >= 1):
            raise DRLabError(f"n={n} 时 𝓕_n 超出 (0, 1)，无法取 log")
        log_f = np.log(F)
        inv_sq = log_f ** -2
        inv = -1.0 / log_f
        fits[n] = {'inv_sq': linear_fit(points, inv_sq), 'inv': linear_fit(points, inv)}
        for p, d, f, lf, y2, y1 in zip(points, params['offsets'], F, log_f, inv_sq, inv):
            rows.append([n, p, d, f, lf, y2, y1])
    reporter.save_csv(f"{kind.value}_{_family_tag(params)}.csv",
                      ['n', 'p', 'offset', 'free_energy', 'log_free_energy', 'inv_log_sq', 'inv_neg_log'],
                      rows, meta={'p_c': p_c, 'K': K})
    summary = {'p_c': p_c, 'fits': {str(n): fits[n] for n in n_values}}
    return p_c, n_values, fits, summary


def _run_fig2(params: Dict, config: ExperimentConfig, reporter: Reporter, quiet: bool) -> ExperimentResult:
    p_c, n_values, fits, summary = _free_energy_sweep(ExperimentKind.FIG2, params, config, reporter, quiet)
    largest, smallest = fits[n_values[-1]]['inv_sq'], fits[n_values[0]]['inv_sq']
    checks = [
        make_check('intercept_at_largest_n', p_c, largest['root'], constants.INTERCEPT_RTOL, mode='rel'),
        make_check('r2_improves_with_n', 0.0, largest['r2'] - smallest['r2'], 0.0, mode='min'),
    ]
    return ExperimentResult(ExperimentKind.FIG2, checks=checks, summary=summary)


def _run_fig3(params: Dict, config: ExperimentConfig, reporter: Reporter, quiet: bool) -> ExperimentResult:
    p_c, n_values, fits, summary = _free_energy_sweep(ExperimentKind.FIG3, params, config, reporter, quiet)
    largest = fits[n_values[-1]]
    margin = largest['inv']['r2'] - largest['inv_sq']['r2']
    checks = [make_check('inverse_log_linearizes', 1e-15, margin, 0.0, mode='min')]
    summary['r2_margin'] = margin
    return ExperimentResult(ExperimentKind.FIG3, checks=checks, summary=summary)


def _run_fig5(params: Dict, config: ExperimentConfig, reporter: Reporter, quiet: bool) -> ExperimentResult:
    n = params['n']
    K = _rescaled_K(params, n)
    family = _critical_family(params, K)
    m = family.arity
    rows = []

    def observe(dist):
        cond = discrete.conditional_probabilities(dist, 3)
        rows.append([dist.n, 1.0 / dist.n, dist.n ** 2 * dist.nonzero_mass] + cond.tolist())

    start = discrete.make_rescaled_family(family, K)
    with SweepProgress(ExperimentKind.FIG5.value, 1, quiet=quiet) as progress:
        final = discrete.iterate_rescaled(start, n, observe=observe, every=params['every'])
        progress.advance(f"n={n} K={K}")
    if final.n % params['every']:
        observe(final)

    target = _factor_target(params)
    scaled = [row[2] for row in rows]
    half = [value for row, value in zip(rows, scaled) if row[0] >= n // 2]
    checks = [
        make_check('factor_law', target, scaled[-1], constants.FACTOR_LAW_RTOL, mode='rel'),
        make_check('monotone_approach', 0.0, _sign_changes(half), 0.0, mode='max'),
    ]
    for k in (1, 2, 3):
        checks.append(make_check(f'conditional_law_k{k}', (m - 1.0) * float(m) ** (-k),
                                 rows[-1][2 + k], constants.CONDITIONAL_LAW_RTOL, mode='rel'))

    reporter.save_csv(f"fig5_{_family_tag(params)}.csv",
                      ['n', 'inv_n', 'scaled_nonzero', 'cond_1', 'cond_2', 'cond_3'], rows,
                      meta={'p': family.p, 'K': K, 'target': target},
                      footer={'delta_final': discrete.rescaled_delta(final)})
    return ExperimentResult(ExperimentKind.FIG5, checks=checks,
                            summary={'p': family.p, 'K': K, 'target': target, 'final': scaled[-1]})


def _run_fig6(params: Dict, config: ExperimentConfig, reporter: Reporter, quiet: bool) -> ExperimentResult:
    n_values = sorted(params['n_values'])
    K = _rescaled_K(params, n_values[-1])
    family = _critical_family(params, K)
    profile = _reference_profile(params, L=params['x_max'] + 1.0)
    snapshots = {}

    def observe(dist):
        if dist.n in n_values:
            snapshots[dist.n] = dist

    with SweepProgress(ExperimentKind.FIG6.value, 1, quiet=quiet) as progress:
        discrete.iterate_rescaled(discrete.make_rescaled_family(family, K), n_values[-1], observe=observe)
        progress.advance(f"n={n_values[-1]} K={K}")

    lo, hi = params['window']
    rows, errors = [], []
    for n in n_values:
        x, scaled = discrete.rescaled_profile(snapshots[n])
        keep = x <= params['x_max']
        reference = np.asarray(scaling.evaluate(profile, x[keep]))
        for xi, si, fi in zip(x[keep], scaled[keep], reference):
            rows.append([n, xi, si, fi])
        inside = (x[keep] >= lo) & (x[keep] <= hi)
        errors.append(float(np.max(np.abs(scaled[keep][inside] - reference[inside]))))

    reporter.save_csv(f"fig6_{_family_tag(params)}.csv", ['n', 'x', 'scaled', 'F'], rows,
                      meta={'p': family.p, 'K': K, 'F0': profile.F0})
    checks = [
        make_check('collapse_at_largest_n', 0.0, errors[-1] / profile.F0, constants.PROFILE_COLLAPSE_TOL, mode='max'),
        make_check('collapse_improves_with_n', 0.0, errors[0] - errors[-1], 0.0, mode='min'),
    ]
    return ExperimentResult(ExperimentKind.FIG6, checks=checks,
                            summary={'errors': dict(zip(map(str, n_values), errors)), 'F0': profile.F0})


def _tree_histories(kind: ExperimentKind, params: Dict, config: ExperimentConfig, quiet: bool):
    """fig7/fig8 共用：对每个 m 迭代保存 Q_0..Q_m"""
    K = params['K']
    family = _critical_family(params, K)
    start = discrete.make_family(family, K=K)
    m_values = sorted(params['m_values'])
    histories = _sweep(kind.value, m_values, lambda m: discrete.iterate_history(start, m),
                       config.threads, quiet, describe=lambda m: f"m={m}")
    profile = _reference_profile(params, L=10.0)
    tolerance = constants.TREE_CURVE_RTOL if _exponential_class(params) else constants.TREE_CURVE_RTOL_GENERAL
    return family, m_values, histories, profile, tolerance


def _run_fig7(params: Dict, config: ExperimentConfig, reporter: Reporter, quiet: bool) -> ExperimentResult:
    family, m_values, histories, profile, tolerance = _tree_histories(
        ExperimentKind.FIG7, params, config, quiet)
    rows, worst = [], {}
    for m, h in zip(m_values, histories):
        comp = trees.compare_no_branching(h, m, m, profile, window=tuple(params['window']))
        worst[m] = float(np.max(comp['rel_error']))
        for r, d, c in zip(comp['ratio'], comp['discrete'], comp['continuous']):
            rows.append([m, r, d, c])
    reporter.save_csv(f"fig7_{_family_tag(params)}.csv", ['m', 'ratio', 'discrete', 'continuous'], rows,
                      meta={'p': family.p, 'K': params['K'], 'F0': profile.F0})
    checks = [make_check('no_branching_at_largest_m', 0.0, worst[m_values[-1]], tolerance, mode='max')]
    return ExperimentResult(ExperimentKind.FIG7, checks=checks,
                            summary={'max_rel_error': {str(m): worst[m] for m in m_values}})


def _run_fig8(params: Dict, config: ExperimentConfig, reporter: Reporter, quiet: bool) -> ExperimentResult:
    family, m_values, histories, profile, tolerance = _tree_histories(
        ExperimentKind.FIG8, params, config, quiet)
    rows, worst = [], {}
    for m, h in zip(m_values, histories):
        comp = trees.compare_split_law(h, m, m, profile, edge_fraction=params['edge_fraction'])
        worst[m] = float(np.max(comp['rel_error']))
        total = m + 1.0
        # 密度对 u = x1/(X+1) 作图：乘以 X+1
        for x1, d, c in zip(comp['x1'], comp['discrete'], comp['continuous']):
            rows.append([m, x1, x1 / total, total * d, total * c])
    reporter.save_csv(f"fig8_{_family_tag(params)}.csv",
                      ['m', 'x1', 'u', 'scaled_discrete', 'scaled_continuous'], rows,
                      meta={'p': family.p, 'K': params['K'], 'F0': profile.F0})
    checks = [make_check('split_law_at_largest_m', 0.0, worst[m_values[-1]], tolerance, mode='max')]
    return ExperimentResult(ExperimentKind.FIG8, checks=checks,
                            summary={'max_rel_error': {str(m): worst[m] for m in m_values}})


# --- pde-run 的各个子任务 ---

def _pde_convergence(params: Dict) -> Dict:
    """单指数初值在 dx 与 dx/2 上相对闭式解的误差"""
    a0, b0, L, T = params['a0'], params['b0'], params['L'], params['T']
    kappa, t0 = exactsol.kappa_from_initial(a0, b0)
    a_T, b_T, _ = exactsol.single_exp(kappa, t0, T)
    errors, trajectory = [], None
    for dx in (params['dx'], params['dx'] / 2.0):
        result = pde.evolve(pde.exponential_grid(a0, b0, L, dx), EvolutionConfig(dt=dx), T)
        x = result.final.x
        valid = x <= L - T - 1.0
        exact = a_T * np.exp(b_T * x[valid])
        errors.append(float(np.max(np.abs(result.final.values[valid] - exact))))
        trajectory = result
    return {'errors': errors, 'order': convergence_order(errors[0], errors[1]),
            'rows': trajectory.diagnostics_rows()}


def _pde_single_blowup(params: Dict) -> Dict:
    a0, b0, dx = params['blowup_a0'], params['blowup_b0'], params['blowup_dx']
    kappa, t0 = exactsol.kappa_from_initial(a0, b0)
    target = exactsol.single_exp_blowup_time(kappa, t0)
    if target is None:
        raise DRLabError(f"初值 a={a0}, b={b0} 不爆破（要求 a > b²）")
    # 区域只比视界略长：爆破前解沿 x 指数增长，区域过长时 FFT 舍入误差会淹没 f(0,t)
    horizon = 1.05 * target
    f0 = pde.exponential_grid(a0, b0, horizon + 0.1, dx)
    result = pde.blowup_time(f0, horizon=horizon, threshold_factor=1e3,
                             monitor=BlowupMonitor.ORIGIN, use_fft=True)
    return {'target': target, 'measured': result.t_c if result.t_c is not None else math.inf}


def _pde_linear_blowup(params: Dict) -> Dict:
    p, dx = params['linear_p'], params['blowup_dx']
    target = exactsol.linear_blowup_time(p)
    horizon = 1.05 * target
    x = dx * np.arange(int(round((horizon + 0.1) / dx)) + 1)
    steps = int(math.floor(horizon / dx))
    cfg = EvolutionConfig(dt=dx, blowup_threshold=1e3, use_fft=True)
    result = pde.evolve(GridFunction(p * x, dx), cfg, steps * dx, on_blowup='return')
    measured = result.blowup.t_c if result.blowup is not None else math.inf
    return {'target': target, 'measured': measured}


def _pde_invariants(params: Dict) -> Dict:
    s = ExponentialSum(np.array(params['sum_a'], dtype=float), np.array(params['sum_b'], dtype=float))
    trajectory = exactsol.evolve_exp_sum(s, params['sum_T'], record_times=np.linspace(0.0, params['sum_T'], 21))
    return {'drift': max(trajectory.drift.values()), 'rows': trajectory.rows()}


def _pde_series(params: Dict) -> Dict:
    """正性级数与网格解在 t = series_t 的对比"""
    t, dx = params['series_t'], params['series_dx']
    f_init = pde.exponential_grid(params['a0'], params['b0'], 6.0, dx)
    series = pde.positivity_series(f_init, t, params['series_terms'])
    grid = pde.evolve(f_init, EvolutionConfig(dt=dx, use_fft=True), t).final
    size = min(series.values.size, grid.values.size)
    x = series.x[:size]
    keep = x <= 5.0
    diff = np.abs(series.values[:size][keep] - grid.values[:size][keep])
    return {'max_diff': float(diff.max())}


_PDE_TASKS = [
    ('convergence', _pde_convergence),
    ('single_blowup', _pde_single_blowup),
    ('linear_blowup', _pde_linear_blowup),
    ('invariants', _pde_invariants),
    ('series', _pde_series),
]


def _run_pde(params: Dict, config: ExperimentConfig, reporter: Reporter, quiet: bool) -> ExperimentResult:
    outputs = _sweep(ExperimentKind.PDE_RUN.value, _PDE_TASKS, lambda task: task[1](params),
                     config.threads, quiet, describe=lambda task: task[0])
    out = {name: value for (name, _), value in zip(_PDE_TASKS, outputs)}

    conv = out['convergence']
    lo, hi = constants.CONVERGENCE_ORDER_RANGE
    checks = [
        make_check('convergence_order', 0.5 * (lo + hi), conv['order'], 0.5 * (hi - lo)),
        make_check('single_exp_blowup_time', out['single_blowup']['target'], out['single_blowup']['measured'],
                   constants.BLOWUP_RTOL, mode='rel'),
        make_check('linear_data_blowup_time', out['linear_blowup']['target'], out['linear_blowup']['measured'],
                   constants.BLOWUP_RTOL, mode='rel'),
        make_check('exp_sum_invariant_drift', 0.0, out['invariants']['drift'],
                   constants.INVARIANT_DRIFT_TOL, mode='max'),
        make_check('series_vs_grid', 0.0, out['series']['max_diff'], constants.SERIES_AGREEMENT_TOL, mode='max'),
    ]

    reporter.save_csv('pde_run_trajectory.csv', ['t', 'origin', 'moment', 'max'], conv['rows'],
                      meta={'a0': params['a0'], 'b0': params['b0'], 'dx': params['dx'] / 2.0},
                      footer={'moment_drift': conv['rows'][-1][2] - conv['rows'][0][2]})
    reporter.save_csv('pde_run_convergence.csv', ['dx', 'error'],
                      [[params['dx'], conv['errors'][0]], [params['dx'] / 2.0, conv['errors'][1]]],
                      meta={'order': conv['order']})
    width = len(params['sum_a'])
    columns = ['t'] + [f'{name}{i}' for i in range(1, width + 1) for name in ('a', 'b')]
    reporter.save_csv('pde_run_exp_sum.csv', columns, out['invariants']['rows'],
                      footer={'drift': out['invariants']['drift']})
    summary = {
        'order': conv['order'],
        'single_blowup': out['single_blowup'],
        'linear_blowup': out['linear_blowup'],
        'invariant_drift': out['invariants']['drift'],
        'series_max_diff': out['series']['max_diff']
    }
    return ExperimentResult(ExperimentKind.PDE_RUN, checks=checks, summary=summary)


def _run_scaling(params: Dict, config: ExperimentConfig, reporter: Reporter, quiet: bool) -> ExperimentResult:
    dx, L = params['dx'], params['L']
    F0_list = [('positive', v) for v in params['positive_F0']] + [('negative', v) for v in params['negative_F0']]

    def positivity(item):
        _, F0 = item
        return scaling.solve_nu_profile(2, F0, L=params['horizon'], dx=params['window_dx'],
                                        richardson=False, stop_at_zero=True)

    def exponential_task(_):
        profile = scaling.solve_profile(4.0, L=L, dx=dx)
        exact = 4.0 * np.exp(-2.0 * profile.samples.x)
        return profile, exact

    def f12_task(_):
        profile = scaling.solve_profile(12.0, L=min(L, 3.0), dx=dx)
        return profile, scaling.closed_form_F12(profile.samples.x)

    def tail_task(_):
        profile = scaling.solve_profile(params['tail_F0'], L=params['tail_L'], dx=params['tail_dx'])
        return profile, scaling.fit_tail(profile, tuple(params['tail_range']))

    def perturb_task(_):
        q_eig = np.geomspace(0.1, 10.0, 25)
        table = perturb.tabulate(1.5, 2.0, 1.0, q_eig)
        closed = perturb.special_eigenfunction(1.5, 2.0, 1.0, q_eig)
        regimes = [perturb.classify(beta, gamma).to_dict() for beta, gamma in _REGIME_EXAMPLES]
        return table, closed, perturb.linear_term(1.5, 1.0), regimes

    tasks = [('exponential', exponential_task), ('F12', f12_task), ('tail', tail_task),
             ('perturb', perturb_task)]
    tasks += [(f'positivity F0={F0:g}', lambda _, item=(kind, F0): positivity(item)) for kind, F0 in F0_list]
    outputs = _sweep(ExperimentKind.SCALING_PROFILE.value, tasks, lambda task: task[1](None),
                     config.threads, quiet, describe=lambda task: task[0])

    exp_profile, exp_exact = outputs[0]
    f12_profile, f12_exact = outputs[1]
    tail_profile, (tail_alpha, tail_A) = outputs[2]
    eig_table, eig_closed, linear_coef, regimes = outputs[3]
    eig_err = float(np.max(np.abs(eig_table.values - eig_closed)))
    pos_profiles = outputs[4:]

    q = np.geomspace(1e-2, 50.0, 40)
    laplace_rows, laplace_err = [], 0.0
    num15, num25 = scaling.laplace_profile(1.5, q), scaling.laplace_profile(2.5, q)
    rat15, rat25 = scaling.rational_profile(1.5, q), scaling.rational_profile(2.5, q)
    laplace_err = float(max(np.max(np.abs(num15 - rat15)), np.max(np.abs(num25 - rat25))))
    for row in zip(q, num15, rat15, num25, rat25):
        laplace_rows.append(list(row))

    correct = sum(1 for (kind, _), prof in zip(F0_list, pos_profiles)
                  if prof.positive == (kind == 'positive'))
    expected_A = scaling.tail_amplitude(tail_profile.beta)
    f12_zero = f12_profile.first_zero if f12_profile.first_zero is not None else math.inf
    checks = [
        make_check('exponential_profile', 0.0, float(np.max(np.abs(exp_profile.samples.values - exp_exact))),
                   constants.EXPONENTIAL_PROFILE_TOL, mode='max'),
        make_check('rational_laplace_forms', 0.0, laplace_err, constants.RATIONAL_LAPLACE_TOL, mode='max'),
        make_check('F12_first_zero', constants.F12_FIRST_ZERO, f12_zero, constants.F12_FIRST_ZERO_TOL),
        make_check('F12_closed_form', 0.0, float(np.max(np.abs(f12_profile.samples.values - f12_exact))) / 12.0,
                   1e-5, mode='max'),
        make_check('positivity_classification', float(len(F0_list)), float(correct), 0.0),
        make_check('tail_exponent', tail_profile.alpha, tail_alpha, constants.TAIL_EXPONENT_RTOL, mode='rel'),
        make_check('tail_amplitude', expected_A, tail_A, constants.TAIL_AMPLITUDE_RTOL, mode='rel'),
        make_check('eigenfunction_closed_form', 0.0, eig_err, constants.EIGENFUNCTION_TOL, mode='max'),
        make_check('no_linear_term', 0.0, abs(linear_coef), constants.LINEAR_TERM_TOL, mode='max'),
    ]

    stride = max(1, int(round(0.01 / dx)))
    reporter.save_csv('scaling_exponential.csv', ['x', 'F', 'exact'],
                      [[x, f, e] for x, f, e in zip(exp_profile.samples.x[::stride],
                                                    exp_profile.samples.values[::stride], exp_exact[::stride])],
                      meta={'profile': exp_profile.to_dict()})
    reporter.save_csv('scaling_F12.csv', ['x', 'F', 'closed_form'],
                      [[x, f, e] for x, f, e in zip(f12_profile.samples.x[::stride],
                                                    f12_profile.samples.values[::stride], f12_exact[::stride])],
                      meta={'profile': f12_profile.to_dict()})
    tail_x = tail_profile.samples.x[1:]
    reporter.save_csv('scaling_tail.csv', ['x', 'F', 'power_tail'],
                      [[x, f, expected_A * x ** -tail_profile.alpha]
                       for x, f in zip(tail_x[::10], tail_profile.samples.values[1:][::10])],
                      meta={'fitted_alpha': tail_alpha, 'fitted_A': tail_A, 'expected_A': expected_A})
    reporter.save_csv('scaling_positivity.csv', ['F0', 'alpha', 'expected_positive', 'positive', 'first_zero'],
                      [[F0, prof.alpha, kind == 'positive', prof.positive, prof.first_zero]
                       for (kind, F0), prof in zip(F0_list, pos_profiles)],
                      meta={'horizon': params['horizon'], 'dx': params['window_dx']})
    reporter.save_csv('scaling_laplace.csv', ['q', 'beta_1.5', 'rational_1.5', 'beta_2.5', 'rational_2.5'],
                      laplace_rows)
    expansion = scaling.small_q_expansion(scaling.beta_from_F0(params['tail_F0']))
    reporter.save_json('scaling_expansion.json', expansion.to_dict())
    reporter.save_csv('perturb_eigenfunction.csv', ['q', 'G', 'closed_form'],
                      [[q, g, c] for (q, g), c in zip(eig_table.rows(), eig_closed)],
                      meta={'beta': eig_table.beta, 'gamma': eig_table.gamma, 'G0': eig_table.G0})
    reporter.save_json('perturb_regimes.json', regimes)

    summary = {
        'F12_first_zero': f12_profile.first_zero,
        'tail_alpha': tail_alpha,
        'tail_A': tail_A,
        'laplace_error': laplace_err,
        'eigenfunction_error': eig_err,
        'linear_term': linear_coef,
        'positivity': {f'{F0:g}': prof.positive for (_, F0), prof in zip(F0_list, pos_profiles)}
    }
    return ExperimentResult(ExperimentKind.SCALING_PROFILE, checks=checks, summary=summary)


def _run_trees(params: Dict, config: ExperimentConfig, reporter: Reporter, quiet: bool) -> ExperimentResult:
    seed = config.seed
    K, n, X = params['K'], params['n'], params['X']
    family = _critical_family(params, K)
    history = discrete.iterate_history(discrete.make_family(family, K=K), n)
    sampler = trees.DiscreteTreeSampler(history)

    indices = list(range(params['trees']))
    discrete_trees = _sweep('tree-sample:discrete', indices, lambda i: sampler.sample(n, X, seed, i),
                            config.threads, True)
    discrete_stats = trees.tree_statistics(discrete_trees)

    exact = trees.no_branching_prob(history, params['m_prime'], n, X)
    freq, se = trees.empirical_no_branching(history, n, X, params['m_prime'], params['mc_trees'], seed + 1)

    profile = scaling.exponential_profile()
    x, t, cutoff = params['x'], params['t'], params['cutoff_fraction']
    sampler_c = trees.ContinuousTreeSampler(profile, cutoff_fraction=cutoff)
    small = _sweep('tree-sample:continuous', indices, lambda i: sampler_c.sample(x, t, seed + 2, i),
                   config.threads, True)
    large = _sweep('tree-sample:continuous-2x', indices, lambda i: sampler_c.sample(2.0 * x, 2.0 * t, seed + 3, i),
                   config.threads, True)
    small_stats, large_stats = trees.tree_statistics(small), trees.tree_statistics(large)
    p_value = trees.leaf_count_test(small_stats, large_stats)
    if not quiet:
        print(f"[信息] tree-sample: 离散树 {len(indices)} 棵，连续树 {2 * len(indices)} 棵")

    checks = [
        make_check('branch_probability_sum', 0.0, sampler.max_conservation_error(),
                   constants.PROBABILITY_TOL, mode='max'),
        make_check('monte_carlo_no_branching', exact, freq, constants.MC_SIGMA * se),
        make_check('leaf_count_scale_invariance', constants.KS_PVALUE_FLOOR, p_value, 0.0, mode='min'),
    ]

    leaves = sorted(set(discrete_stats.leaf_counts) | set(small_stats.leaf_counts) | set(large_stats.leaf_counts))
    reporter.save_csv('tree_leaf_counts.csv', ['leaves', 'discrete', 'continuous', 'continuous_2x'],
                      [[k, discrete_stats.leaf_counts.get(k, 0), small_stats.leaf_counts.get(k, 0),
                        large_stats.leaf_counts.get(k, 0)] for k in leaves],
                      meta={'p': family.p, 'n': n, 'X': X, 'K': K})
    reporter.save_tree('tree_discrete_first.json', discrete_trees[0])
    reporter.save_tree('tree_continuous_first.json', small[0])
    summary = {
        'discrete': discrete_stats.summary(),
        'continuous': small_stats.summary(),
        'continuous_2x': large_stats.summary(),
        'no_branching': {'exact': exact, 'frequency': freq, 'stderr': se},
        'ks_pvalue': p_value,
        'majorant_violations': sampler_c.majorant_violations
    }
    return ExperimentResult(ExperimentKind.TREE_SAMPLE, checks=checks, summary=summary)


def _run_nu_window(params: Dict, config: ExperimentConfig, reporter: Reporter, quiet: bool) -> ExperimentResult:
    nu = params['nu']
    horizon = params['horizon']
    alpha_min, alpha_max = scaling.positivity_window(nu, L=horizon, dx=params['dx'], xtol=params['xtol'])
    alpha_theory = nu / (nu - 1.0)
    scan = list(np.arange(max(alpha_min, alpha_theory) + 0.05, alpha_max + 0.5, params['scan_step']))

    def solve(alpha):
        F0 = scaling.nu_F0_from_alpha(nu, alpha)
        return scaling.solve_nu_profile(nu, F0, L=horizon, dx=params['dx'],
                                        richardson=False, stop_at_zero=True)

    profiles = _sweep(ExperimentKind.NU_WINDOW.value, scan, solve, config.threads, quiet,
                      describe=lambda a: f"α={a:.4f}")
    # 正号剖面的拟合尾部指数，与由 F(0) 公式换算的 α 对照
    rows = []
    for a, prof in zip(scan, profiles):
        fitted = scaling.fit_shifted_tail(prof.samples, (0.5 * horizon, horizon)) if prof.positive else None
        rows.append([a, prof.F0, prof.positive, prof.first_zero, fitted])
    reporter.save_csv(f'nu_window_nu{nu}.csv', ['alpha', 'F0', 'positive', 'first_zero', 'fitted_alpha'], rows,
                      meta={'alpha_min': alpha_min, 'alpha_max': alpha_max, 'alpha_theory': alpha_theory})
    checks = [make_check('window_lower_theory', alpha_theory, alpha_min, constants.WINDOW_LOWER_THEORY_TOL)]
    known = constants.KNOWN_NU_WINDOWS.get(nu)
    if known is not None:
        (lo, lo_tol), (hi, hi_tol) = known
        checks.append(make_check('window_lower', lo, alpha_min, lo_tol))
        checks.append(make_check('window_upper', hi, alpha_max, hi_tol))
    return ExperimentResult(ExperimentKind.NU_WINDOW, checks=checks,
                            summary={'nu': nu, 'alpha_min': alpha_min, 'alpha_max': alpha_max,
                                     'alpha_theory': alpha_theory})


RUNNERS: Dict[ExperimentKind, Callable] = {
    ExperimentKind.FIG2: _run_fig2,
    ExperimentKind.FIG3: _run_fig3,
    ExperimentKind.FIG5: _run_fig5,
    ExperimentKind.FIG6: _run_fig6,
    ExperimentKind.FIG7: _run_fig7,
    ExperimentKind.FIG8: _run_fig8,
    ExperimentKind.CRITICAL_POINT: _run_critical_point,
    ExperimentKind.PDE_RUN: _run_pde,
    ExperimentKind.SCALING_PROFILE: _run_scaling,
    ExperimentKind.TREE_SAMPLE: _run_trees,
    ExperimentKind.NU_WINDOW: _run_nu_window,
}


def run(config: ExperimentConfig, quiet: bool = False) -> ExperimentResult:
    """
    运行一个实验

    Args:
        config: 实验配置（缺省参数由示例配置补全）
        quiet: 为 True 时不打印进度

    Returns:
        ExperimentResult，files 为写出的文件名

    Raises:
        ConfigValidationError: 配置不合法
    """
    config = validate_config(config)
    name = config.experiment.value
    echo = {'experiment': name, 'params': config.params, 'seed': config.seed}
    reporter = Reporter(config.out, name, echo)
    logger.info("开始实验 %s: %s", name, config.params)
    result = RUNNERS[config.experiment](config.params, config, reporter, quiet)
    result.files = [os.path.basename(f) for f in reporter.files]
    reporter.save_summary(result)
    logger.info("实验 %s 完成: %d/%d 项检查通过", name,
                sum(1 for c in result.checks if c.passed), len(result.checks))
    return result
