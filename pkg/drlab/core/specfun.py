"""
特殊函数模块

提供其余模块需要的特殊函数：任意实阶修正 Bessel 函数 K_β、Bessel J_1、
Γ（含负非整数自变量）、Riemann ζ 以及自变量为 1/2 的多重对数。
所有函数都是纯函数，可以在线程间并发调用。
"""

import math
from typing import Callable, List

import mpmath
import numpy as np
from scipy import integrate, optimize, special

from drlab import constants
from drlab.core.exceptions import DivergenceError, InvalidParameterError, PoleError
from drlab.models.types import RealOrder
from drlab.utils.logger import get_logger


logger = get_logger()


# ============================================
# 阶数处理
# ============================================

def check_order(beta: float) -> RealOrder:
    """
    构造 RealOrder 并在 β 接近整数时记录告警

    Args:
        beta: 实阶数 β > 0

    Returns:
        RealOrder，调用方通过 near_integer 判断是否需要 ε 偏移
    """
    order = RealOrder(float(beta))
    if order.near_integer:
        logger.warning("阶数 β=%.12g 接近整数 %d，需使用 ε 偏移极限", order.beta, order.nearest_integer)
    return order


def near_integer(x: float, tol: float = constants.NEAR_INTEGER_TOL) -> bool:
    """x 是否在整数的 tol 范围内"""
    return abs(x - round(x)) < tol


def epsilon_limit(func: Callable[[float], float], x: float,
                  eps: float = constants.EPSILON_OFFSET) -> float:
    """
    对称 ε 偏移加 Richardson 外推求 func 在 x 处的极限

    S(ε) = [func(x+ε) + func(x−ε)]/2 消去 1/ε 的奇次项，
    (4S(ε) − S(2ε))/3 再消去 ε² 项。
    """
    def sym(e):
        return 0.5 * (func(x + e) + func(x - e))
    return (4.0 * sym(eps) - sym(2.0 * eps)) / 3.0


# ============================================
# 修正 Bessel 函数 K_β
# ============================================

def _k_log_integrand_peak(beta: float, q: float) -> float:
    """主导项 βt − q(cosh t − 1) 的极大点 t* = asinh(β/q)"""
    return math.asinh(beta / q) if beta > 0 else 0.0


def _k_cutoff(beta: float, q: float, t_peak: float) -> float:
    """被积函数相对峰值下降 e^{-CUTOFF} 的位置"""
    def h(t):
        return beta * t - q * (math.cosh(t) - 1.0)

    target = h(t_peak) - constants.BESSEL_K_CUTOFF_LOG - math.log(2.0)
    hi = t_peak + 1.0
    while h(hi) > target:
        hi = t_peak + 2.0 * (hi - t_peak)
    return optimize.brentq(lambda t: h(t) - target, t_peak, hi, xtol=1e-14)


def log_bessel_K(beta: float, q: float, cutoff_factor: float = 1.0) -> float:
    """
    ln K_β(q)，直接由积分表示计算

    K_β(q) = ∫₀^∞ cosh(βt)·exp(−q·cosh t) dt，
    被积函数按峰值缩放后在相对下降 e^{-36} 处截断。

    Args:
        beta: 阶数（K_{-β} = K_β，取绝对值）
        q: 自变量，必须 > 0
        cutoff_factor: 截断位置的放大倍数（用于截断无关性检验）
    """
    if not q > 0:
        raise DivergenceError(f"K_β(q) 要求 q > 0: q={q}")
    beta = abs(float(beta))
    q = float(q)
    t_peak = _k_log_integrand_peak(beta, q)
    h_peak = beta * t_peak - q * (math.cosh(t_peak) - 1.0)
    t_max = _k_cutoff(beta, q, t_peak) * cutoff_factor

    def integrand(t):
        return 0.5 * (math.exp(beta * t - q * (math.cosh(t) - 1.0) - h_peak)
                      + math.exp(-beta * t - q * (math.cosh(t) - 1.0) - h_peak))

    points = [t_peak] if 0.0 < t_peak < t_max else None
    value, _ = integrate.quad(integrand, 0.0, t_max, points=points,
                              epsabs=0.0, epsrel=constants.BESSEL_K_RTOL, limit=400)
    return h_peak - q + math.log(value)


def bessel_K(beta: float, q, method: str = 'integral', scaled: bool = False):
    """
    任意实阶修正 Bessel 函数 K_β(q)

    Args:
        beta: 实阶数
        q: 自变量（标量或数组），必须 > 0
        method: 'integral' 使用积分表示，'scipy' 使用 scipy.special.kve
        scaled: 为 True 时返回 e^q·K_β(q)

    Returns:
        K_β(q) 或其缩放形式
    """
    q_arr = np.asarray(q, dtype=float)
    if np.any(q_arr <= 0):
        raise DivergenceError(f"K_β(q) 要求 q > 0: q={q}")

    if method == 'scipy':
        values = special.kve(beta, q_arr)
        if not scaled:
            values = values * np.exp(-q_arr)
        return values if q_arr.ndim else float(values)

    if method != 'integral':
        raise InvalidParameterError(f"未知方法: {method}", field='method', value=method)

    if q_arr.ndim == 0:
        qv = float(q_arr)
        log_k = log_bessel_K(beta, qv)
        return math.exp(log_k + qv) if scaled else math.exp(log_k)
    out = np.empty_like(q_arr)
    for idx, qv in np.ndenumerate(q_arr):
        log_k = log_bessel_K(beta, float(qv))
        out[idx] = math.exp(log_k + qv) if scaled else math.exp(log_k)
    return out


def bessel_K_derivative(beta: float, q, method: str = 'scipy'):
    """dK_β/dq = −(K_{β−1} + K_{β+1})/2"""
    return -0.5 * (bessel_K(beta - 1.0, q, method=method) + bessel_K(beta + 1.0, q, method=method))


def bessel_K_log_derivative(beta: float, q):
    """K_β'(q)/K_β(q)，用缩放函数之比避免下溢"""
    q = np.asarray(q, dtype=float)
    ratio = -0.5 * (special.kve(beta - 1.0, q) + special.kve(beta + 1.0, q)) / special.kve(beta, q)
    return ratio if ratio.ndim else float(ratio)


# ============================================
# Bessel J_1
# ============================================

def bessel_J1(x):
    """
    J_1(x) = (1/2π)∫₀^{2π} cos(t − x sin t) dt

    周期被积函数的梯形公式是谱精度的，节点数取 x + 40 以上。
    """
    x_arr = np.asarray(x, dtype=float)
    if np.any(x_arr < 0):
        raise InvalidParameterError("J_1 只接受 x ≥ 0", field='x')
    x_max = float(x_arr.max()) if x_arr.size else 0.0
    nodes = max(64, int(math.ceil(x_max + constants.BESSEL_J1_EXTRA_NODES + 10.0 * x_max ** (1.0 / 3.0))))
    t = 2.0 * math.pi * np.arange(nodes) / nodes
    flat = x_arr.reshape(-1)
    values = np.cos(t[None, :] - np.outer(flat, np.sin(t))).mean(axis=1)
    values = values.reshape(x_arr.shape)
    return values if x_arr.ndim else float(values)


def bessel_J1_zeros(count: int, step: float = 0.5) -> List[float]:
    """J_1 的前 count 个正零点（网格变号后 brentq 细化）"""
    zeros = []
    a = step
    fa = bessel_J1(a)
    while len(zeros) < count:
        b = a + step
        fb = bessel_J1(b)
        if fa * fb < 0:
            zeros.append(optimize.brentq(bessel_J1, a, b, xtol=1e-14))
        a, fa = b, fb
    return zeros


# ============================================
# Γ、ζ 与多重对数
# ============================================

def gamma(x: float) -> float:
    """
    Γ(x)，负非整数自变量由反射公式 π/(sin(πx)·Γ(1−x)) 给出

    Raises:
        PoleError: x 为非正整数
    """
    x = float(x)
    if x <= 0 and x == math.floor(x):
        raise PoleError(f"Γ 在非正整数处有极点: x={x}", argument=x)
    if x > 0:
        return float(special.gamma(x))
    return math.pi / (math.sin(math.pi * x) * float(special.gamma(1.0 - x)))


def rgamma(x):
    """1/Γ(x)，在极点处为 0"""
    return special.rgamma(x)


def zeta(s: float, a: float = 1.0) -> float:
    """Riemann（或 Hurwitz）ζ(s, a)，要求 s > 1"""
    if not s > 1:
        raise InvalidParameterError(f"ζ(s) 要求 s > 1: s={s}", field='s', value=s)
    return float(mpmath.zeta(s, a))


def polylog(s: float, z: float = constants.POLYLOG_DEFAULT_Z, method: str = 'series') -> float:
    """
    多重对数 Li_s(z) = Σ_{k≥1} z^k / k^s

    method='series' 直接求和，余项上界 z^{N+1}/((N+1)^s (1−z))；
    method='mpmath' 使用 mpmath.polylog 作交叉校验。
    """
    if not 0 <= z < 1:
        raise InvalidParameterError(f"级数要求 0 ≤ z < 1: z={z}", field='z', value=z)
    if method == 'mpmath' or s < 0:
        return float(mpmath.polylog(s, z))
    if method != 'series':
        raise InvalidParameterError(f"未知方法: {method}", field='method', value=method)

    terms = []
    k = 1
    zk = z
    while True:
        terms.append(zk / k ** s)
        bound = zk * z / ((k + 1) ** s * (1.0 - z))
        if bound < constants.POLYLOG_REMAINDER * max(abs(terms[0]), 1e-300):
            break
        k += 1
        zk *= z
    return math.fsum(terms)
