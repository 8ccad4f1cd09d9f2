"""结果分析器 - 拟合、收敛阶、验收检查与结果目录汇总"""

import json
import math
from pathlib import Path
from typing import Dict, List, Sequence

import numpy as np
from scipy import stats

from drlab.core.exceptions import InvalidParameterError
from drlab.models.types import AcceptanceCheck
from drlab.utils.logger import get_logger


logger = get_logger()


# ============================================
# 拟合
# ============================================

def linear_fit(x: Sequence[float], y: Sequence[float]) -> Dict[str, float]:
    """
    最小二乘直线 y = slope·x + intercept

    Returns:
        {'slope', 'intercept', 'r2', 'stderr', 'root'}，root 为直线与 y = 0 的交点
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.size < 2:
        raise InvalidParameterError("线性拟合至少需要两个点", field='x', value=x.size)
    res = stats.linregress(x, y)
    root = -res.intercept / res.slope if res.slope != 0 else math.nan
    return {
        'slope': float(res.slope),
        'intercept': float(res.intercept),
        'r2': float(res.rvalue ** 2),
        'stderr': float(res.stderr),
        'root': float(root)
    }


def power_law_fit(x: Sequence[float], y: Sequence[float]) -> Dict[str, float]:
    """log-log 直线拟合 y ≈ A·x^k"""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    mask = (x > 0) & (y > 0)
    fit = linear_fit(np.log(x[mask]), np.log(y[mask]))
    return {'exponent': fit['slope'], 'amplitude': math.exp(fit['intercept']), 'r2': fit['r2']}


def convergence_order(err_coarse: float, err_fine: float, refinement: float = 2.0) -> float:
    """由步长 h 与 h/refinement 的误差得到的观测收敛阶"""
    if err_coarse <= 0 or err_fine <= 0:
        raise InvalidParameterError("误差必须为正", field='error')
    return math.log(err_coarse / err_fine) / math.log(refinement)


def relative_error(measured: float, target: float) -> float:
    return abs(measured - target) / abs(target) if target != 0 else abs(measured)


def make_check(name: str, target: float, measured: float, tolerance: float, mode: str = 'abs') -> AcceptanceCheck:
    """
    构造验收检查

    mode:
        'abs': |measured − target| ≤ tolerance
        'rel': |measured − target| ≤ tolerance·|target|
        'max': measured ≤ tolerance（target 仅作记录）
        'min': measured ≥ target（tolerance 仅作记录）
    """
    measured = float(measured)
    if mode == 'abs':
        passed = abs(measured - target) <= tolerance
    elif mode == 'rel':
        passed = relative_error(measured, target) <= tolerance
    elif mode == 'max':
        passed = measured <= tolerance
    elif mode == 'min':
        passed = measured >= target
    else:
        raise InvalidParameterError(f"未知检查模式: {mode}", field='mode', value=mode)
    passed = bool(passed) and math.isfinite(measured)
    if not passed:
        logger.warning("检查未通过 %s: 目标=%.10g, 实测=%.10g, 容差=%.3g (%s)", name, target, measured, tolerance, mode)
    return AcceptanceCheck(name=name, target=float(target), measured=measured,
                           tolerance=float(tolerance), passed=passed, mode=mode)


# ============================================
# 结果目录汇总
# ============================================

class ResultAnalyzer:
    """实验结果汇总器 - 读取输出目录下的 *_summary.json（带缓存）"""

    def __init__(self):
        self._file_cache = {}
        self._cache_hits = 0
        self._cache_misses = 0

    def _load(self, path: Path) -> Dict:
        key = (str(path), path.stat().st_mtime)
        if key in self._file_cache:
            self._cache_hits += 1
            return self._file_cache[key]
        self._cache_misses += 1
        with open(path, 'r', encoding='utf-8') as f:
            data = json.load(f)
        self._file_cache[key] = data
        return data

    def summarize_dir(self, out_dir: str) -> List[Dict]:
        """
        汇总输出目录中的实验摘要

        Returns:
            每个实验一行：{'experiment', 'checks', 'passed_checks', 'passed', 'file'}
        """
        base = Path(out_dir)
        if not base.exists():
            raise InvalidParameterError(f"目录不存在: {out_dir}", field='out', value=out_dir)
        rows = []
        for path in sorted(base.glob('*_summary.json')):
            try:
                data = self._load(path)
            except (OSError, json.JSONDecodeError) as e:
                logger.error("读取摘要失败 %s: %s", path, e)
                continue
            checks = [AcceptanceCheck.from_dict(c) for c in data.get('checks', [])]
            rows.append({
                'experiment': data.get('experiment', path.stem),
                'checks': len(checks),
                'passed_checks': sum(1 for c in checks if c.passed),
                'passed': all(c.passed for c in checks),
                'file': str(path)
            })
        return rows

    def failed_checks(self, out_dir: str) -> List[AcceptanceCheck]:
        """所有未通过的检查"""
        failed = []
        for path in sorted(Path(out_dir).glob('*_summary.json')):
            data = self._load(path)
            failed.extend(c for c in (AcceptanceCheck.from_dict(d) for d in data.get('checks', [])) if not c.passed)
        return failed

    def get_cache_stats(self) -> Dict[str, int]:
        return {'hits': self._cache_hits, 'misses': self._cache_misses, 'size': len(self._file_cache)}
