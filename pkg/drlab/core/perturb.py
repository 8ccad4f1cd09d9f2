"""
线性化扰动模块

标度函数附近的本征扰动 G̃_γ：
- 积分表示 G̃_γ(q) = G0·q^{−γ}·y(q/2)^{−2}·∫_q^∞ q₁^{γ−1}y(q₁/2)²dq₁，y = K_β
- γ = −1、γ = 0、(3/2, 2)、(5/2, 4) 的闭式
- 小 q 振幅 d(β,γ) 与线性项检验
- 区间分类（委托给 RegimeClassifier）
"""

import math
from functools import lru_cache
from typing import Sequence, Tuple

import numpy as np
from scipy import integrate, special

from drlab import constants
from drlab.core import scaling, specfun
from drlab.core.classifier import RegimeClassifier
from drlab.core.exceptions import InvalidParameterError
from drlab.models.types import Eigenfunction, RegimeRecord
from drlab.utils.logger import get_logger


logger = get_logger()

_classifier = RegimeClassifier()


# ============================================
# 求积
# ============================================

@lru_cache(maxsize=4)
def _substitution_rule(nodes: int = constants.GAUSS_LEGENDRE_NODES,
                       dyadic: int = constants.DYADIC_PANELS,
                       uniform: int = constants.UNIFORM_PANELS,
                       s_max: float = constants.SUBSTITUTION_S_MAX) -> Tuple[np.ndarray, np.ndarray]:
    """
    s ∈ [0, s_max] 上的复合 Gauss–Legendre 节点与权重

    面板：[0, 2^{−dyadic}]、二进面板直到 1/2、再均匀分成 uniform 段。
    """
    edges = [0.0] + [2.0 ** (-k) for k in range(dyadic, 0, -1)]
    edges.extend(np.linspace(0.5, s_max, uniform + 1)[1:].tolist())
    x, w = np.polynomial.legendre.leggauss(nodes)
    s_all, w_all = [], []
    for a, b in zip(edges[:-1], edges[1:]):
        half = 0.5 * (b - a)
        s_all.append(a + half * (x + 1.0))
        w_all.append(half * w)
    return np.concatenate(s_all), np.concatenate(w_all)


def _integral_ratio(beta: float, gamma: float, q: float) -> float:
    """
    q^{−γ}·y(q/2)^{−2}·∫_q^∞ q₁^{γ−1}y(q₁/2)²dq₁

    代换 q₁ = q + s²/(1−s)；y 用 kve 缩放后被积函数为
    (q₁/q)^γ·q₁^{−1}·[kve(q₁/2)/kve(q/2)]²·e^{−(q₁−q)}。
    """
    s, w = _substitution_rule()
    shift = s * s / (1.0 - s)
    jac = s * (2.0 - s) / (1.0 - s) ** 2
    q1 = q + shift
    ratio = special.kve(beta, q1 / 2.0) / special.kve(beta, q / 2.0)
    integrand = np.exp(gamma * np.log(q1 / q) - shift) * ratio * ratio / q1
    return float(np.dot(w, integrand * jac))


def eigenfunction(beta: float, gamma: float, G0: float, q):
    """
    本征扰动的 Laplace 变换 G̃_γ(q)

    Args:
        beta: 背景标度函数阶数
        gamma: 本征指数
        G0: 归一化 G_γ(0)
        q: 正实数或数组

    Returns:
        G̃_γ(q)（与 q 同形状）
    """
    q_arr = np.asarray(q, dtype=float)
    if np.any(q_arr <= 0):
        raise InvalidParameterError("eigenfunction 要求 q > 0", field='q')
    flat = np.array([G0 * _integral_ratio(beta, gamma, float(qi)) for qi in q_arr.reshape(-1)])
    out = flat.reshape(q_arr.shape)
    return out if out.ndim else float(out)


def tabulate(beta: float, gamma: float, G0: float, q_samples: Sequence[float]) -> Eigenfunction:
    """在 q_samples 上采样本征函数"""
    q_samples = np.asarray(q_samples, dtype=float)
    return Eigenfunction(beta=beta, gamma=gamma, G0=G0, q_samples=q_samples,
                         values=np.asarray(eigenfunction(beta, gamma, G0, q_samples)))


def _derivative(func, q: float) -> float:
    """五点中心差分，步长 h = 1e-3·q"""
    h = constants.EIGEN_DIFF_REL_STEP * q
    return (-func(q + 2 * h) + 8 * func(q + h) - 8 * func(q - h) + func(q - 2 * h)) / (12.0 * h)


def ode_residual(beta: float, gamma: float, G0: float, q: float) -> float:
    """
    qG̃ + F̃G̃ − qG̃' − (γ−1)G̃ − G(0)

    G̃' 由 eigenfunction 的五点差分得到。
    """
    if q <= 0:
        raise InvalidParameterError("ode_residual 要求 q > 0", field='q', value=q)
    G = eigenfunction(beta, gamma, G0, q)
    dG = _derivative(lambda v: eigenfunction(beta, gamma, G0, v), q)
    F_tilde = scaling.laplace_profile(beta, q)
    return q * G + F_tilde * G - q * dG - (gamma - 1.0) * G - G0


# ============================================
# 闭式
# ============================================

def time_shift_mode(beta: float, G0: float, q):
    """γ = −1：G0/(2F(0))·(F̃ − qF̃')"""
    q = np.asarray(q, dtype=float)
    F0 = scaling.F0_from_beta(beta)
    out = G0 / (2.0 * F0) * (scaling.laplace_profile(beta, q) - q * scaling.laplace_profile_derivative(beta, q))
    return out if np.ndim(out) else float(out)


def family_mode(beta: float, G0: float, q, h: float = 1e-5):
    """γ = 0：G0·∂F̃/∂F(0)，由 β 的中心差分与 dβ/dF0 = 1/(4β) 得到"""
    dF_dbeta = (scaling.laplace_profile(beta + h, q) - scaling.laplace_profile(beta - h, q)) / (2.0 * h)
    return G0 * dF_dbeta / (4.0 * beta)


def special_eigenfunction(beta: float, gamma: float, G0: float, q):
    """
    已知闭式的本征函数

    - (3/2, 2): G0(q+4)/(q+2)²
    - (5/2, 4): G0(q³+14q²+74q+144)/(q²+6q+12)²
    - γ = −1 与 γ = 0 对任意 β
    """
    q = np.asarray(q, dtype=float)
    if abs(gamma + 1.0) < 1e-12:
        return time_shift_mode(beta, G0, q)
    if abs(gamma) < 1e-12:
        return family_mode(beta, G0, q)
    if abs(beta - 1.5) < 1e-12 and abs(gamma - 2.0) < 1e-12:
        return G0 * (q + 4.0) / (q + 2.0) ** 2
    if abs(beta - 2.5) < 1e-12 and abs(gamma - 4.0) < 1e-12:
        return G0 * (q ** 3 + 14 * q ** 2 + 74 * q + 144) / (q * q + 6 * q + 12) ** 2
    raise InvalidParameterError(f"(β={beta}, γ={gamma}) 没有登记的闭式", field='gamma', value=gamma)


# ============================================
# 小 q 振幅
# ============================================

def _y_squared_leading(beta: float) -> float:
    """y(q/2)² ≈ A·q^{−2β}，A = 2^{4β−2}Γ(β)²"""
    return 2.0 ** (4.0 * beta - 2.0) * specfun.gamma(beta) ** 2


def _y_squared(beta: float, q1):
    k = special.kve(beta, q1 / 2.0)
    return k * k * np.exp(-q1)


def d_amplitude(beta: float, gamma: float, delta: float = 1e-2) -> float:
    """
    G̃_γ 小 q 展开中 G0·q^{2β−γ} 项的系数 d(β,γ)

    - γ−2β > 0：∫₀^∞ q₁^{γ−1}y² dq₁ / A
    - −1 < γ−2β < 0：∫₀^∞ q₁^{γ−1}(y² − A·q₁^{−2β})dq₁ / A，
      [0, δ] 段用 K_β 的小宗量展开解析积分

    Raises:
        InvalidParameterError: 其余区间（没有闭式），或减法分支中 β 接近整数、γ ≤ 0
    """
    A = _y_squared_leading(beta)
    sector = gamma - 2.0 * beta
    if sector > 0:
        head, _ = integrate.quad(lambda v: v ** (2.0 * beta) * _y_squared(beta, v), 0.0, 1.0,
                                 weight='alg', wvar=(sector - 1.0, 0.0), epsabs=0.0, epsrel=1e-12, limit=200)
        tail, _ = integrate.quad(lambda v: v ** (gamma - 1.0) * _y_squared(beta, v), 1.0, np.inf,
                                 epsabs=0.0, epsrel=1e-12, limit=200)
        return (head + tail) / A
    if -1.0 < sector < 0:
        if gamma <= 0:
            # 常数项 Γ(β)Γ(−β)/2 与 q₁^{γ−1} 的积分在 0 处发散
            raise InvalidParameterError(f"减法公式要求 γ > 0: {gamma}", field='gamma', value=gamma)
        if specfun.near_integer(beta):
            raise InvalidParameterError(f"减法公式要求 β 非整数: {beta}", field='beta', value=beta)
        # y² − A q^{−2β} ≈ A q^{2−2β}/(8(1−β)) + Γ(β)Γ(−β)/2
        near = (A * delta ** (sector + 2.0) / (8.0 * (1.0 - beta) * (sector + 2.0))
                + 0.5 * specfun.gamma(beta) * specfun.gamma(-beta) * delta ** gamma / gamma)
        body, _ = integrate.quad(lambda v: v ** (gamma - 1.0) * _y_squared(beta, v), delta, 1.0,
                                 epsabs=0.0, epsrel=1e-13, limit=200)
        tail, _ = integrate.quad(lambda v: v ** (gamma - 1.0) * _y_squared(beta, v), 1.0, np.inf,
                                 epsabs=0.0, epsrel=1e-13, limit=200)
        subtracted = body + tail - A * delta ** sector / (-sector)
        return (near + subtracted) / A
    raise InvalidParameterError(f"γ−2β={sector:.6g} 不在有闭式的区间内", field='gamma', value=gamma)


def _fit(q: np.ndarray, values: np.ndarray, exponents: Sequence[float]) -> np.ndarray:
    """以 q^e 为基的尺度化最小二乘；指数重复时改用 q^e·log q"""
    columns = []
    seen = []
    for e in exponents:
        if any(abs(e - s) < 1e-6 for s in seen):
            columns.append(q ** e * np.log(q))
        else:
            columns.append(q ** e)
        seen.append(e)
    A = np.column_stack(columns)
    scale = np.abs(A).max(axis=0)
    coef, *_ = np.linalg.lstsq(A / scale, values, rcond=None)
    return coef / scale


def fit_d_amplitude(beta: float, gamma: float, G0: float = 1.0,
                    window: Tuple[float, float] = constants.SMALL_Q_FIT_WINDOW, samples: int = 48) -> float:
    """由小 q 处的本征函数值拟合 d(β,γ)，拟合窗口记录在调用方的输出中"""
    q = np.geomspace(window[0], window[1], samples)
    values = np.asarray(eigenfunction(beta, gamma, G0, q)) / G0
    coef = _fit(q, values, [0.0, 2.0 * beta - gamma, 2.0 * beta - gamma + 1.0, 2.0, 2.0 * beta])
    return float(coef[1])


def linear_term(beta: float, gamma: float, G0: float = 1.0,
                window: Tuple[float, float] = constants.LINEAR_TERM_WINDOW, samples: int = 48) -> float:
    """
    G̃_γ 在 q → 0 处拟合得到的线性系数

    0 < γ < 2β−1 时应为 0（扰动不改变 ∫xF dx）。
    """
    q = np.geomspace(window[0], window[1], samples)
    values = np.asarray(eigenfunction(beta, gamma, G0, q))
    coef = _fit(q, values, [0.0, 1.0, 2.0 * beta - gamma, 2.0])
    return float(coef[1])


def small_q_limit(beta: float, gamma: float, G0: float) -> float:
    """G̃_γ(0⁺) = G0/(2β−γ)，要求 γ < 2β"""
    if gamma >= 2.0 * beta:
        raise InvalidParameterError("γ ≥ 2β 时 G̃_γ(0⁺) 发散", field='gamma', value=gamma)
    return G0 / (2.0 * beta - gamma)


def decay_onset(beta: float, gamma: float, G0: float, q_max: float = 50.0, samples: int = 200) -> float:
    """
    G̃_γ 开始单调衰减的位置 q*

    Returns:
        q*；若在 (0, q_max] 内 |G̃| 的末端仍在增长则返回 inf
    """
    q = np.geomspace(1e-2, q_max, samples)
    values = np.abs(np.asarray(eigenfunction(beta, gamma, G0, q)))
    growing = np.nonzero(np.diff(values) > 0)[0]
    if growing.size == 0:
        return float(q[0])
    last = int(growing[-1])
    if last == values.size - 2:
        logger.warning("G̃_γ 在 q=%.3g 处仍在增长 (β=%.4g, γ=%.4g)", q_max, beta, gamma)
        return math.inf
    return float(q[last + 1])


# ============================================
# 分类
# ============================================

def classify(beta: float, gamma: float) -> RegimeRecord:
    """扰动区间分类"""
    record = _classifier.classify(beta, gamma)
    if record.boundary:
        logger.info("γ=%.6g 位于区间端点 (β=%.6g): %s", gamma, beta, record.kind.value)
    return record
