"""
离散最大值递推模块

X_{n+1} = max(X⁽¹⁾ + X⁽²⁾ − 1, 0) 的分布迭代、生成函数、到临界流形的距离 Δ、
参数族临界点求解、自由能序列以及 m 叉推广。

截断约定：概率向量只保留 k = 0..K，被推到 K 以上的质量合并进
DiscreteDistribution.overflow（同时记录其均值贡献），Q(0) 由归一化给出。
"""

import math
from typing import Callable, List, Optional

import mpmath
import numpy as np
from scipy import optimize, signal

from drlab import constants
from drlab.core import specfun
from drlab.core.exceptions import (
    BracketError,
    DegenerateDistributionError,
    DivergenceError,
    InvalidParameterError,
)
from drlab.models.types import (
    CriticalPointResult,
    DiscreteDistribution,
    FamilyKind,
    ModelFamily,
    QHistory,
    RescaledDistribution,
)
from drlab.utils.logger import get_logger


logger = get_logger()


# ============================================
# 初始分布族
# ============================================

def _power_law_weights(family: ModelFamily, K: int) -> np.ndarray:
    k = np.arange(1, K + 1, dtype=float)
    log_w = math.log(family.p) - k * math.log(2.0) - family.alpha * np.log(k)
    if family.kind == FamilyKind.LOG_CORRECTED and family.alpha_log:
        log_w -= family.alpha_log * np.log(np.log(k + 1.0))
    return np.exp(log_w)


def make_family(family: ModelFamily, K: int = constants.DEFAULT_TRUNCATION) -> DiscreteDistribution:
    """
    构造初始分布 Q_0，Q_0(0) 由归一化给出

    Args:
        family: 分布族参数
        K: 截断长度

    Returns:
        DiscreteDistribution

    Raises:
        InvalidParameterError: 归一化后 Q_0(0) 为负或参数越界
    """
    if K < 2:
        raise InvalidParameterError(f"截断长度至少为 2: {K}", field='K', value=K)
    q = np.zeros(K + 1)

    if family.kind == FamilyKind.TWO_DELTA:
        q[2] = family.p
        q[0] = 1.0 - family.p
        return DiscreteDistribution(q, n=0, family=family)

    if family.kind in (FamilyKind.POWER_LAW, FamilyKind.LOG_CORRECTED):
        if family.kind == FamilyKind.POWER_LAW and family.p * specfun.polylog(family.alpha) > 1.0 + constants.PROBABILITY_TOL:
            raise InvalidParameterError(
                f"p·Li_α(1/2) > 1: p={family.p}, α={family.alpha}", field='p', value=family.p)
        if family.p > 0:
            q[1:] = _power_law_weights(family, K)
        q0 = 1.0 - math.fsum(q[1:])
        if q0 < -constants.PROBABILITY_TOL:
            raise InvalidParameterError(f"归一化给出负的 Q(0): {q0}", field='p', value=family.p)
        q[0] = max(q0, 0.0)
        return DiscreteDistribution(q, n=0, family=family)

    raise InvalidParameterError(f"custom 分布请直接构造 DiscreteDistribution: {family.kind}",
                                field='kind', value=family.kind.value)


def delta_distribution(k: int, K: int) -> DiscreteDistribution:
    """在 k 处的单点分布"""
    q = np.zeros(K + 1)
    q[k] = 1.0
    return DiscreteDistribution(q)


# ============================================
# 迭代
# ============================================

def _recursion_step(dist: DiscreteDistribution, m: int) -> DiscreteDistribution:
    """
    一步 m 叉递推 X' = max(X₁ + … + X_m − 1, 0)

    卷积直接计算（小概率项的相对精度优于 FFT）；
    涉及 overflow 的组合全部计入新的 overflow。
    """
    q = dist.q
    K = dist.K
    s = q
    for _ in range(m - 1):
        s = np.convolve(s, q)

    new = np.zeros(K + 1)
    new[1:] = s[2:K + 2]
    tail = s[K + 2:]
    tail_k = np.arange(K + 1, K + 1 + tail.size, dtype=float)

    o = dist.overflow
    m_in = math.fsum(np.arange(K + 1) * q)
    p_hit = 1.0 - (1.0 - o) ** m if o > 0 else 0.0
    hit_mean = m * (dist.overflow_mean + m_in * (1.0 - (1.0 - o) ** (m - 1))) - p_hit if o > 0 else 0.0

    overflow = math.fsum(tail) + p_hit
    overflow_mean = math.fsum(tail_k * tail) + hit_mean
    new[0] = 1.0 - overflow - math.fsum(new[1:])
    if new[0] < 0.0:
        new[0] = 0.0
    return DiscreteDistribution(new, n=dist.n + 1, family=dist.family,
                                overflow=overflow, overflow_mean=overflow_mean)


def _resize(dist: DiscreteDistribution, K: Optional[int]) -> DiscreteDistribution:
    if K is None or K <= dist.K:
        return dist
    q = np.zeros(K + 1)
    q[:dist.q.size] = dist.q
    return DiscreteDistribution(q, n=dist.n, family=dist.family,
                                overflow=dist.overflow, overflow_mean=dist.overflow_mean)


def _warn_tail(dist: DiscreteDistribution):
    if dist.overflow > constants.TAIL_MASS_WARNING:
        logger.warning("截断尾部质量 %.3e 超过阈值（n=%d, K=%d）", dist.overflow, dist.n, dist.K)


def iterate(dist: DiscreteDistribution, steps: int = 1, K: Optional[int] = None) -> DiscreteDistribution:
    """
    应用二叉递推 steps 次

    Args:
        dist: 当前分布
        steps: 步数
        K: 若给出且大于当前截断，先把支撑扩展到 K

    Returns:
        迭代后的分布（截断长度固定）
    """
    current = _resize(dist, K)
    for _ in range(steps):
        current = _recursion_step(current, 2)
    _warn_tail(current)
    return current


def m_ary_iterate(dist: DiscreteDistribution, m: int, steps: int = 1,
                  K: Optional[int] = None) -> DiscreteDistribution:
    """m 叉递推 X' = max(ΣX⁽ⁱ⁾ − 1, 0)，由 m 重卷积给出"""
    if m < 2:
        raise InvalidParameterError(f"分叉数必须 ≥ 2: {m}", field='m', value=m)
    current = _resize(dist, K)
    for _ in range(steps):
        current = _recursion_step(current, m)
    _warn_tail(current)
    return current


def iterate_history(dist: DiscreteDistribution, steps: int, K: Optional[int] = None,
                    m: int = 2) -> QHistory:
    """保留 Q_0..Q_n 的前向迭代"""
    current = _resize(dist, K)
    history = [current]
    for _ in range(steps):
        current = _recursion_step(current, m)
        history.append(current)
    _warn_tail(current)
    return QHistory(history)


# ============================================
# 生成函数
# ============================================

def generating_function(dist: DiscreteDistribution, z: float) -> float:
    """H(z) = Σ Q(k) z^k（只对截断内部求和）"""
    k = np.arange(dist.q.size)
    return math.fsum(dist.q * np.power(float(z), k))


def generating_function_step(dist: DiscreteDistribution, z: float) -> float:
    """
    由生成函数递推直接计算 H_{n+1}(z)

    H_{n+1}(z) = H_n(z)²/z + (1 − 1/z)·H_n(0)²，z = 0 时取极限 Q(0)² + 2Q(0)Q(1)。
    """
    h0 = float(dist.q[0])
    if z == 0:
        return h0 * h0 + 2.0 * h0 * float(dist.q[1])
    hz = generating_function(dist, z)
    return hz * hz / z + (1.0 - 1.0 / z) * h0 * h0


# ============================================
# 临界流形距离
# ============================================

def _tail_estimate(terms: np.ndarray) -> float:
    """几何级数外推截断尾部；末项比值 ≥ 1 视为发散"""
    nonzero = np.nonzero(terms)[0]
    if nonzero.size == 0 or nonzero[-1] < terms.size - 1:
        return 0.0
    last, prev = terms[-1], terms[-2]
    if prev == 0:
        return abs(last)
    ratio = last / prev
    if ratio >= 1.0 or ratio < 0.0:
        raise DivergenceError(f"截断项比值 {ratio:.6g} 不收敛", tail_estimate=math.inf)
    return abs(last * ratio / (1.0 - ratio))


def _overflow_weight(overflow: float, K: int) -> float:
    """overflow 质量在 2^k 加权下的下界 overflow·2^{K+1}·K"""
    log_w = math.log(overflow) + (K + 1) * math.log(2.0) + math.log(K)
    return math.exp(log_w) if log_w < 700 else math.inf


def power_law_delta(p: float, alpha: float) -> float:
    """幂律族 n=0 的闭式 Δ = p(ζ(α−1) − ζ(α) + Li_α(1/2)) − 1"""
    if alpha <= 2:
        raise DivergenceError(f"α ≤ 2 时 Δ 发散: α={alpha}", tail_estimate=math.inf)
    return p * (specfun.zeta(alpha - 1.0) - specfun.zeta(alpha) + specfun.polylog(alpha)) - 1.0


def _power_law_delta_truncated(dist: DiscreteDistribution) -> float:
    """截断求和加 Hurwitz ζ 尾部，与闭式独立"""
    fam = dist.family
    K = dist.K
    k = np.arange(K + 1, dtype=float)
    terms = np.ldexp(dist.q, np.arange(K + 1)) * (k - 1.0)
    tail = fam.p * (specfun.zeta(fam.alpha - 1.0, K + 1) - specfun.zeta(fam.alpha, K + 1))
    return math.fsum(terms) + tail


def delta(dist: DiscreteDistribution) -> float:
    """
    Δ = 2H'(2) − H(2) = Σ (k−1)·2^k·Q(k)

    幂律族初始分布使用闭式并与截断求和交叉校验；其余情形用几何外推估计尾部。

    Raises:
        DivergenceError: 尾部估计超过 1e-8·|Δ|
    """
    fam = dist.family
    if fam is not None and fam.kind == FamilyKind.POWER_LAW and dist.n == 0:
        closed = power_law_delta(fam.p, fam.alpha)
        truncated = _power_law_delta_truncated(dist)
        if abs(closed - truncated) > constants.POWER_LAW_CLOSED_FORM_TOL:
            logger.warning("幂律 Δ 闭式 %.12g 与截断求和 %.12g 不一致", closed, truncated)
        return closed

    K = dist.K
    k = np.arange(K + 1)
    terms = np.ldexp(dist.q, k) * (k - 1.0)
    value = math.fsum(terms)
    tail = _tail_estimate(terms)
    if dist.overflow > 0:
        tail += _overflow_weight(dist.overflow, K)
    if tail > constants.DELTA_TAIL_RTOL * abs(value):
        raise DivergenceError(f"Δ 的截断尾部 {tail:.3e} 相对 |Δ|={abs(value):.3e} 过大",
                              tail_estimate=tail)
    return value


def m_ary_delta(dist: DiscreteDistribution, m: int) -> float:
    """H(m) − m(m−1)H'(m) = Σ Q(k)·m^k·(1 − (m−1)k)"""
    if m < 2:
        raise InvalidParameterError(f"分叉数必须 ≥ 2: {m}", field='m', value=m)
    k = np.arange(dist.q.size, dtype=float)
    weights = np.zeros_like(dist.q)
    positive = dist.q > 0
    weights[positive] = np.exp(np.log(dist.q[positive]) + k[positive] * math.log(m))
    terms = weights * (1.0 - (m - 1.0) * k)
    value = math.fsum(terms)
    tail = _tail_estimate(terms)
    if tail > constants.DELTA_TAIL_RTOL * abs(value):
        raise DivergenceError(f"m 叉 Δ 的截断尾部 {tail:.3e} 过大", tail_estimate=tail)
    return value


# ============================================
# 临界点
# ============================================

def _log_corrected_sum(alpha: float, alpha_log: float) -> float:
    """Σ_k [(k−1) + 2^{−k}] / (k^α (log(k+1))^{α'})，Δ = p·S − 1"""
    with mpmath.workdps(30):
        def term(k):
            return ((k - 1) + mpmath.power(2, -k)) / (mpmath.power(k, alpha) * mpmath.power(mpmath.log(k + 1), alpha_log))
        return float(mpmath.nsum(term, [1, mpmath.inf]))


def critical_point(kind, alpha: Optional[float] = None, arity: int = 2,
                   K: int = constants.DEFAULT_TRUNCATION, alpha_log: float = 0.0) -> CriticalPointResult:
    """
    二分求解 Δ(p) = 0

    Args:
        kind: 分布族（FamilyKind 或其字符串值）
        alpha: 幂律尾指数
        arity: 分叉数 m（two-delta 族支持 m ≥ 2）
        K: 幂律族截断求和所用的长度
        alpha_log: 对数修正指数

    Returns:
        CriticalPointResult，包含二分根与闭式值

    Raises:
        BracketError: 区间两端 Δ 不变号或抽样不单调
    """
    kind = FamilyKind(kind) if isinstance(kind, str) else kind

    if kind == FamilyKind.TWO_DELTA:
        bracket = (0.0, 1.0)
        closed = 1.0 / (2.0 * arity ** 3 - 3.0 * arity ** 2 + 1.0)
        template = ModelFamily(kind, 0.0, arity=arity)

        def func(p):
            dist = make_family(template.with_p(p), K=8)
            if arity == 2:
                return delta(dist)
            return -m_ary_delta(dist, arity)
    elif kind == FamilyKind.POWER_LAW:
        if alpha is None or alpha <= 2:
            raise InvalidParameterError(f"幂律族临界点要求 α > 2: {alpha}", field='alpha', value=alpha)
        bracket = (0.0, 1.0 / specfun.polylog(alpha))
        closed = 1.0 / (specfun.zeta(alpha - 1.0) + specfun.polylog(alpha) - specfun.zeta(alpha))
        template = ModelFamily(kind, 0.0, alpha=alpha)

        def func(p):
            return _power_law_delta_truncated(make_family(template.with_p(p), K=K))
    elif kind == FamilyKind.LOG_CORRECTED:
        if alpha is None or alpha <= 2:
            raise InvalidParameterError(f"对数修正族要求 α > 2: {alpha}", field='alpha', value=alpha)
        total = _log_corrected_sum(alpha, alpha_log)
        closed = 1.0 / total
        template = ModelFamily(kind, 0.0, alpha=alpha, alpha_log=alpha_log)
        bracket = (0.0, 2.0 * closed)

        def func(p):
            return p * total - 1.0
    else:
        raise InvalidParameterError(f"不支持的分布族: {kind}", field='kind', value=kind)

    samples = np.linspace(bracket[0], bracket[1], constants.MONOTONICITY_SAMPLES)
    values = np.array([func(p) for p in samples])
    if values[0] * values[-1] > 0:
        raise BracketError("Δ 在区间两端不变号", bracket=bracket, values=(values[0], values[-1]))
    if not (np.all(np.diff(values) > 0) or np.all(np.diff(values) < 0)):
        raise BracketError("Δ(p) 在区间内不单调", bracket=bracket, values=tuple(values))

    root, info = optimize.bisect(func, bracket[0], bracket[1], xtol=constants.BISECTION_XTOL,
                                 full_output=True)
    logger.info("临界点 %s α=%s m=%d: p_c=%.12g（闭式 %.12g）", kind.value, alpha, arity, root, closed)
    return CriticalPointResult(
        p_c=root,
        closed_form=closed,
        iterations=info.iterations,
        bracket=bracket,
        delta_at_root=func(root),
        family=template.with_p(root)
    )


# ============================================
# 缩放表示 r(k) = 2^k·Q(k)
# ============================================

def truncated_critical_p(alpha: float, K: int) -> float:
    """
    截断在 k ≤ K 的幂律族恰好落在临界流形上的 p

    p·Σ_{k≤K} [(k−1) + 2^{−k}]·k^{−α} = 1。长时间迭代用截断后的初值，
    以它为临界点可以避免截断本身带来的 O(K^{2−α}) 偏离。
    """
    if alpha <= 2:
        raise InvalidParameterError(f"幂律族临界点要求 α > 2: {alpha}", field='alpha', value=alpha)
    k = np.arange(1, K + 1, dtype=float)
    w = np.power(k, -alpha)
    return 1.0 / math.fsum(np.concatenate(((k - 1.0) * w, np.ldexp(w, -np.arange(1, K + 1)))))


def make_rescaled_family(family: ModelFamily, K: int) -> RescaledDistribution:
    """
    在缩放表示下构造 Q_0，分叉数取 family.arity

    Raises:
        InvalidParameterError: Q_0(0) 为负或分布族不支持
    """
    if K < 2:
        raise InvalidParameterError(f"截断长度至少为 2: {K}", field='K', value=K)
    m = family.arity
    r = np.zeros(K + 1)
    if family.kind == FamilyKind.TWO_DELTA:
        r[2] = m * m * family.p
        r[0] = 1.0 - family.p
        return RescaledDistribution(r, n=0, family=family, arity=m)
    if family.kind in (FamilyKind.POWER_LAW, FamilyKind.LOG_CORRECTED):
        if m != 2:
            raise InvalidParameterError("幂律族只支持二叉递推", field='arity', value=m)
        if family.p > 0:
            k = np.arange(1, K + 1, dtype=float)
            log_w = math.log(family.p) - family.alpha * np.log(k)
            if family.kind == FamilyKind.LOG_CORRECTED and family.alpha_log:
                log_w -= family.alpha_log * np.log(np.log(k + 1.0))
            r[1:] = np.exp(log_w)
        dist = RescaledDistribution(r, n=0, family=family)
        q0 = 1.0 - dist.nonzero_mass
        if q0 < -constants.PROBABILITY_TOL:
            raise InvalidParameterError(f"归一化给出负的 Q(0): {q0}", field='p', value=family.p)
        dist.r[0] = max(q0, 0.0)
        return dist
    raise InvalidParameterError(f"不支持的分布族: {family.kind}", field='kind', value=family.kind.value)


def rescaled_step(dist: RescaledDistribution) -> RescaledDistribution:
    """
    缩放表示下的一步 m 叉递推

    c = r 的 m 重卷积；r'(k) = c[k+1]/m（k ≥ 1），r'(0) = c[0] + c[1]/m。
    卷积用 FFT；舍入产生的负值截为 0，超出 K 的部分丢弃。
    """
    r = dist.r
    K = dist.K
    m = dist.arity
    c = r
    for _ in range(m - 1):
        c = signal.fftconvolve(c, r)[:K + 2]
    new = np.empty(K + 1)
    new[1:] = c[2:K + 2] / m
    np.maximum(new, 0.0, out=new)
    # 低端两项直接相乘，不受 FFT 舍入影响
    new[0] = r[0] ** m + r[0] ** (m - 1) * r[1]
    return RescaledDistribution(new, n=dist.n + 1, family=dist.family, arity=m)


def iterate_rescaled(dist: RescaledDistribution, steps: int,
                     observe: Optional[Callable[[RescaledDistribution], None]] = None,
                     every: int = 1) -> RescaledDistribution:
    """
    缩放表示下迭代 steps 步

    Args:
        dist: 初始缩放分布
        steps: 步数
        observe: 每 every 步对当前分布调用一次的回调
        every: 观测间隔

    Returns:
        迭代后的缩放分布
    """
    if every < 1:
        raise InvalidParameterError(f"观测间隔必须 ≥ 1: {every}", field='every', value=every)
    current = dist
    for _ in range(steps):
        current = rescaled_step(current)
        if observe is not None and current.n % every == 0:
            observe(current)
    edge = float(np.max(current.r[-max(current.K // 16, 1):]))
    if edge > constants.RESCALED_EDGE_WARNING * float(np.max(current.r[1:])):
        logger.warning("缩放分布在截断末端仍有权重 %.3e（n=%d, K=%d），应增大 K", edge, current.n, current.K)
    return current


def rescaled_delta(dist: RescaledDistribution) -> float:
    """
    Σ ((m−1)k − 1)·r(k)，二叉时即 Δ = Σ (k−1)·r(k)

    二叉递推每步满足 Δ_{n+1} = H_n(2)·Δ_n，H_n(2) = Σ r(k)。
    """
    k = np.arange(dist.r.size, dtype=float)
    return math.fsum(((dist.arity - 1.0) * k - 1.0) * dist.r)


def conditional_probabilities(dist, k_max: int) -> np.ndarray:
    """
    P(X = k | X ≠ 0)，k = 1..k_max，两种表示通用

    Raises:
        DegenerateDistributionError: Q = δ₀
    """
    mass = dist.nonzero_mass
    if mass <= constants.DEGENERATE_GUARD:
        raise DegenerateDistributionError("分布退化为 δ₀，条件分布不存在")
    if isinstance(dist, RescaledDistribution):
        values = [dist.prob(k) for k in range(1, k_max + 1)]
    else:
        values = [float(dist.q[k]) if k <= dist.K else 0.0 for k in range(1, k_max + 1)]
    return np.array(values) / mass


# ============================================
# 观测量
# ============================================

def mean_value(dist: DiscreteDistribution) -> float:
    """⟨X⟩，包含 overflow 的均值贡献"""
    return math.fsum(np.arange(dist.q.size) * dist.q) + dist.overflow_mean


def free_energy(dist: DiscreteDistribution, n: int, K: Optional[int] = None) -> List[float]:
    """
    𝓕_m = 2^{−m}·⟨X_m⟩，m = 0..n

    Args:
        dist: 初始分布 Q_0
        n: 迭代步数
        K: 可选的截断扩展

    Returns:
        长度 n+1 的自由能序列
    """
    if n < 0:
        raise InvalidParameterError(f"n 必须非负: {n}", field='n', value=n)
    current = _resize(dist, K)
    values = [math.ldexp(mean_value(current), -current.n)]
    for _ in range(n):
        current = _recursion_step(current, 2)
        values.append(math.ldexp(mean_value(current), -current.n))
    _warn_tail(current)
    return values


def conditional_tail(dist: DiscreteDistribution) -> DiscreteDistribution:
    """
    条件分布 P(X = k | X ≠ 0) = Q(k)/(1 − Q(0))

    Raises:
        DegenerateDistributionError: Q = δ₀
    """
    mass = dist.nonzero_mass
    if mass <= constants.DEGENERATE_GUARD:
        raise DegenerateDistributionError("分布退化为 δ₀，条件分布不存在")
    q = dist.q / mass
    q[0] = 0.0
    return DiscreteDistribution(q, n=dist.n, family=dist.family,
                                overflow=dist.overflow / mass,
                                overflow_mean=dist.overflow_mean / mass)


def rescaled_profile(dist):
    """
    (k/n, n²·2^k·Q_n(k))，k ≥ 1

    用于对比离散分布与标度函数 F；接受 DiscreteDistribution 或 RescaledDistribution。
    """
    n = max(dist.n, 1)
    if isinstance(dist, RescaledDistribution):
        k = np.arange(1, dist.r.size)
        return k / n, n * n * dist.r[1:]
    k = np.arange(1, dist.q.size)
    return k / n, n * n * np.ldexp(dist.q[1:], k)
