"""扰动区间分类器"""

import json
from typing import Dict, Iterable, List, Optional, Tuple

from drlab.core.exceptions import InvalidParameterError
from drlab.models.types import RegimeKind, RegimeRecord


# 等号判定的容差（γ 落在区间端点上）
BOUNDARY_TOL = 1e-9


class RegimeClassifier:
    """
    扰动区间分类器 - 根据 (β, γ) 判断线性化扰动的长时间行为

    支持的区间：
    - irrelevant: γ < 0，扰动衰减（γ = −1 为时间平移模）
    - marginal: γ = 0，沿标度函数族移动 F(0)
    - relevant-on-manifold: 0 < γ < 2β−1，留在临界流形上，尾部指数变为 1+2β−γ
    - off-manifold: γ = 2β−1，离开临界流形，t_c ~ ε^{−1/(2β−1)}
    - heavy-tail: γ > 2β−1，初值尾部变重，𝓕 指数 1/(γ−2β+1)

    区间端点用锚点名描述：'zero' 为 0，'threshold' 为 2β−1。
    """

    # 默认分类规则（按优先级顺序）
    DEFAULT_RULES = {
        'marginal': {
            'at': 'zero',
            'exponent': None,
            'description': '沿标度函数族平移 F(0)'
        },
        'off-manifold': {
            'at': 'threshold',
            'exponent': 'offmanifold',
            'description': '离开临界流形，临界时间 t_c ~ ε^{-1/(2β-1)}'
        },
        'irrelevant': {
            'lower': None,
            'upper': 'zero',
            'exponent': None,
            'description': '扰动衰减，回到同一个标度函数'
        },
        'relevant-on-manifold': {
            'lower': 'zero',
            'upper': 'threshold',
            'exponent': 'tail',
            'description': '留在临界流形上，趋向尾部指数为 1+2β-γ 的标度函数'
        },
        'heavy-tail': {
            'lower': 'threshold',
            'upper': None,
            'exponent': 'heavy',
            'description': '初值尾部 x^{γ-2β-1}，自由能指数 1/(γ-2β+1)'
        }
    }

    ORDER = ['marginal', 'off-manifold', 'irrelevant', 'relevant-on-manifold', 'heavy-tail']

    EXPONENTS = {
        'tail': lambda beta, gamma: 1.0 + 2.0 * beta - gamma,
        'offmanifold': lambda beta, gamma: 1.0 / (2.0 * beta - 1.0),
        'heavy': lambda beta, gamma: 1.0 / (gamma - 2.0 * beta + 1.0),
    }

    def __init__(self, rules: Dict = None, tol: float = BOUNDARY_TOL):
        """
        Args:
            rules: 自定义分类规则（可选）
            tol: 端点判定容差
        """
        self.rules = rules or self.DEFAULT_RULES
        self.tol = tol

    @classmethod
    def from_file(cls, rules_file: str):
        """从 JSON 文件加载分类规则"""
        with open(rules_file, 'r', encoding='utf-8') as f:
            rules = json.load(f)
        return cls(rules)

    @staticmethod
    def _anchor(name: Optional[str], beta: float) -> Optional[float]:
        if name is None:
            return None
        if name == 'zero':
            return 0.0
        if name == 'threshold':
            return 2.0 * beta - 1.0
        raise InvalidParameterError(f"未知锚点: {name}", field='anchor', value=name)

    def _matches(self, rule: Dict, beta: float, gamma: float) -> bool:
        if 'at' in rule:
            return abs(gamma - self._anchor(rule['at'], beta)) <= self.tol
        lower = self._anchor(rule.get('lower'), beta)
        upper = self._anchor(rule.get('upper'), beta)
        if lower is not None and gamma <= lower + self.tol:
            return False
        if upper is not None and gamma >= upper - self.tol:
            return False
        return True

    def classify(self, beta: float, gamma: float) -> RegimeRecord:
        """
        分类 (β, γ)

        Args:
            beta: 背景标度函数的阶数，β > 1/2
            gamma: 扰动的本征指数

        Returns:
            RegimeRecord；γ 落在 0 或 2β−1 上时 boundary 为 True

        Raises:
            InvalidParameterError: β ≤ 1/2
        """
        if not beta > 0.5:
            raise InvalidParameterError(f"要求 β > 1/2: {beta}", field='beta', value=beta)

        for kind in self.ORDER:
            rule = self.rules.get(kind)
            if rule is None or not self._matches(rule, beta, gamma):
                continue
            exponent_name = rule.get('exponent')
            exponent = self.EXPONENTS[exponent_name](beta, gamma) if exponent_name else None
            return RegimeRecord(
                kind=RegimeKind(kind),
                exponent=exponent,
                description=rule.get('description', ''),
                boundary='at' in rule,
                beta=beta,
                gamma=gamma
            )
        raise InvalidParameterError(f"没有规则覆盖 (β={beta}, γ={gamma})", field='gamma', value=gamma)

    def classify_batch(self, pairs: Iterable[Tuple[float, float]]) -> List[RegimeRecord]:
        """批量分类 (β, γ) 对"""
        return [self.classify(beta, gamma) for beta, gamma in pairs]

    def get_statistics(self, pairs: Iterable[Tuple[float, float]]) -> Dict[str, int]:
        """
        区间统计

        Returns:
            {kind: count} 统计字典
        """
        stats = {}
        for record in self.classify_batch(pairs):
            stats[record.kind.value] = stats.get(record.kind.value, 0) + 1
        return stats

    def save_rules(self, output_file: str):
        """保存分类规则到文件"""
        with open(output_file, 'w', encoding='utf-8') as f:
            json.dump(self.rules, f, ensure_ascii=False, indent=2)
