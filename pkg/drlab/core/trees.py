"""
随机树模块

临界随机树：
- 离散模型的分叉/不分叉概率（由保存的 Q_0..Q_n 精确给出）与逐层抽样
- 标度极限下的不分叉概率 ψ_{t',t}(x) 与连续树抽样（稀疏化 + 逆 CDF 分裂）
- 树统计与两样本检验

层级 m 从 n（根）递减到 0（叶子）；连续时间同样从 t（根）递减到 0，
沿未分叉的边质量按 μ_{t'} = μ_t + t − t' 增长。
"""

import math
from typing import Dict, Optional, Tuple

import numpy as np
from scipy import integrate, stats

from drlab import constants
from drlab.core import scaling
from drlab.core.exceptions import (
    BranchError,
    InvalidParameterError,
    ProbabilityConservationError,
    ProfileDomainError,
    SupportError,
)
from drlab.models.types import (
    BranchStep,
    ContinuousTreeNode,
    DiscreteTreeNode,
    QHistory,
    ScalingProfile,
    TreeStatistics,
)
from drlab.utils.logger import get_logger


logger = get_logger()


def make_rng(seed: int, index: int = 0) -> np.random.Generator:
    """第 index 棵树的独立随机流，与调度顺序无关"""
    return np.random.default_rng(np.random.SeedSequence([int(seed), int(index)]))


# ============================================
# 离散树
# ============================================

def branch_step_distribution(h: QHistory, m: int, X: int) -> BranchStep:
    """
    第 m 层取值 X 时的单步分支律

    - 不分叉：p = 2Q_{m−1}(X+1)Q_{m−1}(0)/Q_m(X)，子节点取 X+1
    - 分裂为 (x1, X+1−x1)，x1 = 1..X：权重 Q_{m−1}(x1)Q_{m−1}(X+1−x1)/Q_m(X)

    两者之和由递推关系恒等于 1。

    Raises:
        SupportError: Q_m(X) = 0 或层级越界
        ProbabilityConservationError: 总概率偏离 1 超过 1e-12
    """
    if m < 1 or m >= len(h) or X < 1:
        raise SupportError(f"层级或取值越界: m={m}, X={X}", level=m, value=X)
    denom = h.prob(m, X)
    if denom <= 0.0:
        raise SupportError(f"Q_{m}({X}) = 0，该取值不可达", level=m, value=X)

    prev = h[m - 1].q
    p_nobranch = 2.0 * h.prob(m - 1, X + 1) * h.prob(m - 1, 0) / denom
    x1 = np.arange(1, X + 1)
    x2 = X + 1 - x1
    inside = (x1 < prev.size) & (x2 < prev.size)
    weights = np.zeros(X)
    weights[inside] = prev[x1[inside]] * prev[x2[inside]] / denom
    total = p_nobranch + math.fsum(weights)
    if abs(total - 1.0) > constants.PROBABILITY_TOL:
        raise ProbabilityConservationError(
            f"第 {m} 层 X={X} 的分支律总概率为 {total!r}（截断 K 可能过小）", total=total)

    if not np.any(weights > 0.0):
        # 分裂不可能：条件律为空，必然不分叉
        return BranchStep(p_nobranch=1.0, pairs=[], weights=np.zeros(0), total=total)
    pairs = [(int(a), int(b)) for a, b in zip(x1, x2)]
    return BranchStep(p_nobranch=p_nobranch, pairs=pairs, weights=weights, total=total)


def no_branching_prob(h: QHistory, m_prime: int, m: int, X: int) -> float:
    """
    从第 m 层取值 X 出发，直到第 m' 层都不分叉的概率

    P = 2^{m−m'}·Q_{m'}(X+m−m')/Q_m(X)·∏_{μ=m'}^{m−1}Q_μ(0)
    """
    if not 0 <= m_prime <= m < len(h):
        raise SupportError(f"要求 0 ≤ m' ≤ m: m'={m_prime}, m={m}", level=m, value=X)
    denom = h.prob(m, X)
    if denom <= 0.0:
        raise SupportError(f"Q_{m}({X}) = 0，该取值不可达", level=m, value=X)
    if m_prime == m:
        return 1.0
    zeros = [h.prob(mu, 0) for mu in range(m_prime, m)]
    top = h.prob(m_prime, X + m - m_prime)
    if top <= 0.0 or min(zeros) <= 0.0:
        return 0.0
    log_prod = math.fsum(math.log(z) for z in zeros)
    return math.exp((m - m_prime) * math.log(2.0) + math.log(top) - math.log(denom) + log_prod)


class DiscreteTreeSampler:
    """
    离散树抽样器

    同一份 QHistory 的分支律按 (m, X) 缓存；缓存只在首次访问时写入，
    并发线程重复写入同一个值是无害的。
    """

    def __init__(self, history: QHistory):
        self.history = history
        self._cdf: Dict[Tuple[int, int], Tuple[BranchStep, np.ndarray]] = {}

    def step(self, m: int, X: int) -> Tuple[BranchStep, np.ndarray]:
        key = (m, X)
        cached = self._cdf.get(key)
        if cached is None:
            step = branch_step_distribution(self.history, m, X)
            cdf = step.p_nobranch + np.cumsum(step.weights) if step.pairs else np.zeros(0)
            cached = (step, cdf)
            self._cdf[key] = cached
        return cached

    def max_conservation_error(self) -> float:
        """已访问节点中 |Σ 分支概率 − 1| 的最大值"""
        if not self._cdf:
            return 0.0
        return max(abs(step.total - 1.0) for step, _ in self._cdf.values())

    def _draw(self, m: int, X: int, rng: np.random.Generator) -> Optional[Tuple[int, int]]:
        """返回分裂对；不分叉时返回 None"""
        step, cdf = self.step(m, X)
        u = rng.random()
        if not step.pairs or u < step.p_nobranch:
            return None
        idx = int(np.searchsorted(cdf, u, side='right'))
        idx = min(idx, len(step.pairs) - 1)
        return step.pairs[idx]

    def sample(self, n: int, X_n: int, seed: int, index: int = 0) -> DiscreteTreeNode:
        """从第 n 层取值 X_n 的根抽样整棵树，叶子都在第 0 层"""
        rng = make_rng(seed, index)
        root = DiscreteTreeNode(level=n, value=X_n)
        stack = [root]
        while stack:
            node = stack.pop()
            if node.level == 0:
                continue
            pair = self._draw(node.level, node.value, rng)
            if pair is None:
                node.children = [DiscreteTreeNode(level=node.level - 1, value=node.value + 1)]
            else:
                node.children = [DiscreteTreeNode(level=node.level - 1, value=pair[0]),
                                 DiscreteTreeNode(level=node.level - 1, value=pair[1])]
            stack.extend(node.children)
        return root

    def first_branch_level(self, m: int, X: int, rng: np.random.Generator) -> Optional[int]:
        """
        沿根链抽样第一次分叉发生的层级

        Returns:
            分叉后子节点所在层级 m'；直到第 0 层都不分叉时返回 None
        """
        level, value = m, X
        while level > 0:
            if self._draw(level, value, rng) is not None:
                return level - 1
            level -= 1
            value += 1
        return None


def sample_discrete_tree(h: QHistory, n: int, X_n: int, seed: int, index: int = 0) -> DiscreteTreeNode:
    """抽样一棵离散树（同 seed、index 得到同一棵树）"""
    return DiscreteTreeSampler(h).sample(n, X_n, seed, index)


def empirical_no_branching(h: QHistory, m: int, X: int, m_prime: int, count: int, seed: int) -> Tuple[float, float]:
    """
    Monte Carlo 估计 P_{m',m}(X)

    Returns:
        (频率, 标准误差)
    """
    sampler = DiscreteTreeSampler(h)
    hits = 0
    for i in range(count):
        level = sampler.first_branch_level(m, X, make_rng(seed, i))
        if level is None or level < m_prime:
            hits += 1
    freq = hits / count
    return freq, math.sqrt(max(freq * (1.0 - freq), 1e-300) / count)


# ============================================
# 连续极限
# ============================================

def continuous_no_branching(F: ScalingProfile, t_prime: float, t: float, x: float) -> float:
    """
    ψ_{t',t}(x) = (t/t')²·F((x+t−t')/t')/F(x/t)

    Raises:
        ProfileDomainError: t' 不在 (0, t] 内或 x < 0
    """
    if not 0 < t_prime <= t or x < 0:
        raise ProfileDomainError(f"要求 0 < t' ≤ t 且 x ≥ 0: t'={t_prime}, t={t}, x={x}", argument=t_prime)
    if t_prime == t:
        return 1.0
    if F.exact_exponential:
        return (t / t_prime) ** 2 * math.exp(-2.0 * (t - t_prime) * (x + t) / (t * t_prime))
    top = scaling.evaluate(F, (x + t - t_prime) / t_prime)
    bottom = scaling.evaluate(F, x / t)
    return (t / t_prime) ** 2 * top / bottom


def branching_rate(F: ScalingProfile, t_prime: float, mass: float) -> float:
    """
    t' 时刻、质量 μ 的分叉率

    指数剖面为 2μ/t'²；一般剖面为 −2/t' − (1/t' + μ/t'²)·F'(μ/t')/F(μ/t')，负值截为 0。
    """
    if F.exact_exponential:
        return 2.0 * mass / (t_prime * t_prime)
    y = mass / t_prime
    value = scaling.evaluate(F, y)
    if value <= 0.0:
        raise ProfileDomainError(f"F({y:.6g}) ≤ 0，分叉率无定义", argument=y)
    ratio = scaling.evaluate_derivative(F, y) / value
    rate = -2.0 / t_prime - (1.0 / t_prime + mass / (t_prime * t_prime)) * ratio
    return max(rate, 0.0)


def survival_by_quadrature(F: ScalingProfile, x: float, t: float, t_prime: float) -> float:
    """exp(−∫_{t'}^{t} rate(s, x+t−s) ds)，用于校验稀疏化抽样"""
    integral, _ = integrate.quad(lambda s: branching_rate(F, s, x + t - s), t_prime, t,
                                 epsabs=1e-13, epsrel=1e-11, limit=200)
    return math.exp(-integral)


class ContinuousTreeSampler:
    """
    连续树抽样器

    分叉时间用分段常数上界的稀疏化抽样：时间按二进面板 [hi/2, hi] 划分，
    每个面板在 MAJORANT_SAMPLES 个点上取速率最大值再乘 MAJORANT_SAFETY。

    t' → 0 时分叉率按 1/t'² 发散，整棵树的节点数随 (t/t_min)² 增长，
    所以抽样截断在 t_min = cutoff_fraction·t：到达 t_min 仍未分叉的节点成为叶子，
    其 end_time 记为 t_min。
    """

    def __init__(self, profile: ScalingProfile,
                 cutoff_fraction: float = constants.CONTINUOUS_CUTOFF_FRACTION,
                 split_points: int = constants.SPLIT_TABLE_POINTS,
                 max_nodes: int = constants.CONTINUOUS_MAX_NODES):
        if not 0 < cutoff_fraction < 1:
            raise InvalidParameterError(f"cutoff_fraction 必须位于 (0, 1): {cutoff_fraction}",
                                        field='cutoff_fraction', value=cutoff_fraction)
        self.profile = profile
        self.cutoff_fraction = cutoff_fraction
        self.split_points = split_points
        self.max_nodes = max_nodes
        self.majorant_violations = 0

    def _majorant(self, lo: float, hi: float, t_start: float, mass: float) -> float:
        s = np.linspace(lo, hi, constants.MAJORANT_SAMPLES)
        rates = [branching_rate(self.profile, si, mass + t_start - si) for si in s]
        return constants.MAJORANT_SAFETY * max(rates)

    def first_branch_time(self, t_start: float, mass: float, t_min: float,
                          rng: np.random.Generator) -> Optional[float]:
        """从 (t_start, mass) 出发的第一次分叉时间；到达 t_min 前未分叉返回 None"""
        hi = t_start
        while hi > t_min:
            lo = max(0.5 * hi, t_min)
            bound = self._majorant(lo, hi, t_start, mass)
            s = hi
            while bound > 0.0:
                s -= rng.exponential(1.0 / bound)
                if s <= lo:
                    break
                rate = branching_rate(self.profile, s, mass + t_start - s)
                if rate > bound:
                    self.majorant_violations += 1
                    logger.warning("分叉率 %.6g 超过上界 %.6g (t'=%.6g)", rate, bound, s)
                if rng.random() * bound < rate:
                    return s
            hi = lo
        return None

    def split(self, mass: float, t_prime: float, rng: np.random.Generator) -> float:
        """按 F(x1/t')F((μ−x1)/t') 抽 x1；指数剖面为均匀分布"""
        if self.profile.exact_exponential:
            return float(rng.uniform(0.0, mass))
        x1 = np.linspace(0.0, mass, self.split_points)
        density = (np.asarray(scaling.evaluate(self.profile, x1 / t_prime))
                   * np.asarray(scaling.evaluate(self.profile, (mass - x1) / t_prime)))
        density = np.maximum(density, 0.0)
        cdf = integrate.cumulative_trapezoid(density, x1, initial=0.0)
        cdf /= cdf[-1]
        return float(np.interp(rng.random(), cdf, x1))

    def sample(self, x: float, t: float, seed: int, index: int = 0) -> ContinuousTreeNode:
        """
        从时间 t、质量 x 的根向 0 抽样整棵树

        Raises:
            BranchError: 节点数超过 max_nodes
        """
        if t <= 0 or x < 0:
            raise ProfileDomainError(f"要求 t > 0 且 x ≥ 0: t={t}, x={x}", argument=t)
        rng = make_rng(seed, index)
        t_min = self.cutoff_fraction * t
        if not self.profile.exact_exponential and (x + t) / t_min > self.profile.samples.length:
            logger.warning("剖面网格 L=%.3g 未覆盖 μ/t' 的最大值 %.3g，超出部分使用幂律尾部",
                           self.profile.samples.length, (x + t) / t_min)
        root = ContinuousTreeNode(time=t, mass=x)
        stack = [root]
        nodes = 1
        while stack:
            node = stack.pop()
            t_branch = self.first_branch_time(node.time, node.mass, t_min, rng)
            if t_branch is None:
                node.end_time = t_min
                continue
            total = node.mass + node.time - t_branch
            x1 = self.split(total, t_branch, rng)
            node.children = [ContinuousTreeNode(time=t_branch, mass=x1),
                             ContinuousTreeNode(time=t_branch, mass=total - x1)]
            nodes += 2
            if nodes > self.max_nodes:
                raise BranchError(f"树的节点数超过 {self.max_nodes}", time=t_branch)
            stack.extend(node.children)
        return root


def sample_continuous_tree(F: ScalingProfile, x: float, t: float, seed: int, index: int = 0,
                           cutoff_fraction: float = constants.CONTINUOUS_CUTOFF_FRACTION) -> ContinuousTreeNode:
    """抽样一棵连续树，叶子截断在 cutoff_fraction·t"""
    return ContinuousTreeSampler(F, cutoff_fraction=cutoff_fraction).sample(x, t, seed, index)


def empirical_continuous_no_branching(F: ScalingProfile, x: float, t: float, t_prime: float,
                                      count: int, seed: int) -> Tuple[float, float]:
    """
    稀疏化抽样给出的 [t', t] 内不分叉频率

    Returns:
        (频率, 标准误差)
    """
    if not 0 < t_prime < t:
        raise ProfileDomainError(f"要求 0 < t' < t: t'={t_prime}, t={t}", argument=t_prime)
    sampler = ContinuousTreeSampler(F, cutoff_fraction=t_prime / t)
    hits = sum(1 for i in range(count)
               if sampler.first_branch_time(t, x, t_prime, make_rng(seed, i)) is None)
    freq = hits / count
    return freq, math.sqrt(max(freq * (1.0 - freq), 1e-300) / count)


# ============================================
# 统计与对比
# ============================================

def tree_statistics(trees) -> TreeStatistics:
    """对树的迭代器做流式统计"""
    collected = TreeStatistics()
    for root in trees:
        collected.add(root)
    return collected


def leaf_count_test(a: TreeStatistics, b: TreeStatistics) -> float:
    """叶子数分布的两样本 KS 检验 p 值"""
    return float(stats.ks_2samp(a.leaf_samples(), b.leaf_samples()).pvalue)


def compare_no_branching(h: QHistory, m: int, X: int, profile: ScalingProfile,
                         window: Tuple[float, float] = constants.COMPARISON_WINDOW) -> Dict[str, np.ndarray]:
    """
    离散 P_{m',m}(X) 与连续 ψ_{m',m}(X) 在 m'/m ∈ window 上的对比

    标度关系 2^k Q_n(k) ≈ F(k/n)/n² 下层级即时间、取值即质量。
    """
    levels = [mp for mp in range(1, m + 1) if window[0] <= mp / m <= window[1]]
    discrete = np.array([no_branching_prob(h, mp, m, X) for mp in levels])
    continuous = np.array([continuous_no_branching(profile, float(mp), float(m), float(X)) for mp in levels])
    ratio = np.array(levels, dtype=float) / m
    return {
        'ratio': ratio,
        'discrete': discrete,
        'continuous': continuous,
        'rel_error': np.abs(discrete - continuous) / np.abs(continuous)
    }


def compare_split_law(h: QHistory, m: int, X: int, profile: ScalingProfile,
                      edge_fraction: float = 0.1) -> Dict[str, np.ndarray]:
    """
    离散分裂律与 F(x1/t)F((x−x1)/t) 归一化密度的逐点对比（去掉两端 edge_fraction）
    """
    step = branch_step_distribution(h, m, X)
    if not step.pairs:
        raise SupportError(f"第 {m} 层 X={X} 处分裂不可能", level=m, value=X)
    law = step.conditional_law()
    x1 = np.array([p[0] for p in step.pairs], dtype=float)
    total = float(X + 1)
    t = float(m)
    density = (np.asarray(scaling.evaluate(profile, x1 / t))
               * np.asarray(scaling.evaluate(profile, (total - x1) / t)))
    density = density / density.sum()
    keep = (x1 >= edge_fraction * total) & (x1 <= (1.0 - edge_fraction) * total)
    return {
        'x1': x1[keep],
        'discrete': law[keep],
        'continuous': density[keep],
        'rel_error': np.abs(law[keep] - density[keep]) / density[keep]
    }
