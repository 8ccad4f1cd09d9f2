"""
标度函数模块

临界标度函数 F 的单参数族：
- (1+x)F' = −2F − ½∫₀ˣF(y)F(x−y)dy 的 Volterra 型积分（含 ν 叉推广）
- Bessel K 的 Laplace 表示 F̃(q) = −1 − q − q·y'(q/2)/y(q/2)，y = K_β
- 小 q 展开、x^{−α} 尾部振幅、临界流形积分与正性窗口
"""

import math
from typing import Dict, Optional, Sequence, Tuple

import mpmath
import numpy as np
from scipy import integrate, interpolate, optimize, special

from drlab import constants
from drlab.core import specfun
from drlab.core.exceptions import (
    InvalidParameterError,
    ProfileDomainError,
    ProfileInstabilityError,
)
from drlab.models.types import ExpansionRecord, GridFunction, NuProfile, ScalingProfile
from drlab.utils.logger import get_logger


logger = get_logger()


# ============================================
# 参数换算
# ============================================

def beta_from_F0(F0: float) -> float:
    """β = √(1/4 + F0/2)"""
    return math.sqrt(0.25 + F0 / 2.0)


def F0_from_beta(beta: float) -> float:
    """F0 = 2β² − 1/2"""
    return 2.0 * beta * beta - 0.5


def alpha_from_F0(F0: float) -> float:
    """α = 1 + √(1 + 2F0)"""
    return 1.0 + math.sqrt(1.0 + 2.0 * F0)


def nu_F0_from_alpha(nu: int, alpha: float) -> float:
    """ν 叉推广：F(0) = (α/ν)(α − ν/(ν−1))^{1/(ν−1)}"""
    alpha_min = nu / (nu - 1.0)
    if alpha <= alpha_min:
        raise InvalidParameterError(f"α 必须大于 ν/(ν−1)={alpha_min:.6g}", field='alpha', value=alpha)
    return (alpha / nu) * (alpha - alpha_min) ** (1.0 / (nu - 1.0))


def nu_alpha_from_F0(nu: int, F0: float) -> float:
    """nu_F0_from_alpha 的反函数（单调，brentq 求根）"""
    alpha_min = nu / (nu - 1.0)
    hi = alpha_min + 1.0
    while nu_F0_from_alpha(nu, hi) < F0:
        hi = alpha_min + 2.0 * (hi - alpha_min)
    return optimize.brentq(lambda a: nu_F0_from_alpha(nu, a) - F0, alpha_min * (1.0 + 1e-12), hi, xtol=1e-14)


# ============================================
# Volterra 积分
# ============================================

def _volterra_heun(F0: float, nu: int, L: float, dx: float, stop_at_zero: bool = False):
    """
    Heun 方法积分 F' + xF' + ν/(ν−1)·F + (1/ν)·F^{∗ν} = 0

    卷积幂 P_k = F ∗ P_{k−1} 逐层用已存历史的梯形公式累积，
    新点的值在预估和校正两次求值中各重算一次。

    Returns:
        (F 采样, 首个变号位置或 None)
    """
    n = int(round(L / dx))
    F = np.zeros(n + 1)
    P = np.zeros((nu + 1, n + 1))
    c_lin = nu / (nu - 1.0)
    F[0] = F0
    P[1, 0] = F0

    def powers_at(i, f_new):
        """给定 F_i = f_new，返回 (P_2..P_ν)(x_i)"""
        vals = np.zeros(nu + 1)
        vals[1] = f_new
        for k in range(2, nu + 1):
            if i == 0:
                vals[k] = 0.0
                continue
            # Σ_{j=1}^{i−1} F_j P_{k−1, i−j} + ½(F_0 P_{k−1,i} + F_i P_{k−1,0})
            inner = np.dot(F[1:i], P[k - 1, i - 1:0:-1]) if i > 1 else 0.0
            edge = 0.5 * (F[0] * vals[k - 1] + f_new * P[k - 1, 0])
            vals[k] = dx * (inner + edge)
        return vals

    def slope(i, f_val, p_nu):
        return -(c_lin * f_val + p_nu / nu) / (1.0 + i * dx)

    first_zero = None
    limit = constants.INSTABILITY_FACTOR * F0
    g_prev = slope(0, F0, 0.0)
    for i in range(n):
        predictor = F[i] + dx * g_prev
        p_pred = powers_at(i + 1, predictor)
        g_pred = slope(i + 1, predictor, p_pred[nu])
        corrected = F[i] + 0.5 * dx * (g_prev + g_pred)
        p_corr = powers_at(i + 1, corrected)
        F[i + 1] = corrected
        P[1:, i + 1] = p_corr[1:]
        g_prev = slope(i + 1, corrected, p_corr[nu])

        if not math.isfinite(corrected) or abs(corrected) > limit:
            raise ProfileInstabilityError(f"|F| 在 x={(i + 1) * dx:.6g} 超过 {limit:.3g}", x=(i + 1) * dx)
        if first_zero is None and corrected < -constants.SIGN_CHANGE_TOL * F0:
            # 在 F_i > 0 与 F_{i+1} < 0 之间线性插值
            x_i = i * dx
            first_zero = x_i + dx * F[i] / (F[i] - corrected) if F[i] > 0 else x_i
            if stop_at_zero:
                return F[:i + 2], first_zero
    return F, first_zero


def _richardson(F0: float, nu: int, L: float, dx: float):
    """dx 与 2dx 的两次解组合成 (4F_dx − F_2dx)/3，修正量插值回细网格"""
    fine, zero_fine = _volterra_heun(F0, nu, L, dx)
    coarse, _ = _volterra_heun(F0, nu, L, 2.0 * dx)
    n_coarse = coarse.size
    correction = (fine[0:2 * n_coarse:2][:n_coarse] - coarse) / 3.0
    x_coarse = 2.0 * dx * np.arange(n_coarse)
    x_fine = dx * np.arange(fine.size)
    spline = interpolate.CubicSpline(x_coarse, correction)
    improved = fine + spline(np.minimum(x_fine, x_coarse[-1]))
    zero = _first_zero(improved, dx, F0) if zero_fine is not None else None
    return improved, zero


def _first_zero(values: np.ndarray, dx: float, F0: float) -> Optional[float]:
    below = np.nonzero(values < -constants.SIGN_CHANGE_TOL * F0)[0]
    if below.size == 0:
        return None
    i = int(below[0])
    if i == 0 or values[i - 1] <= 0:
        return i * dx
    return (i - 1) * dx + dx * values[i - 1] / (values[i - 1] - values[i])


def solve_profile(F0: float, L: float = 10.0, dx: float = 1e-3, richardson: bool = True) -> ScalingProfile:
    """
    从 F(0) = F0 积分标度函数方程 (1+x)F' = −2F − ½(F∗F)

    Args:
        F0: F(0) > 0
        L: 积分区间长度
        dx: 步长
        richardson: 是否做 Richardson 外推（默认开启）

    Returns:
        ScalingProfile，first_zero 记录首个变号位置

    Raises:
        ProfileInstabilityError: |F| 超过 1e3·F0
    """
    if F0 <= 0:
        raise InvalidParameterError(f"F0 必须为正: {F0}", field='F0', value=F0)
    if richardson:
        values, zero = _richardson(F0, 2, L, dx)
    else:
        values, zero = _volterra_heun(F0, 2, L, dx)
    profile = ScalingProfile(F0=F0, samples=GridFunction(values, dx), first_zero=zero)
    logger.debug("标度函数 F0=%.6g: α=%.6g, 首个零点=%s", F0, profile.alpha, zero)
    return profile


def exponential_profile(L: float = 10.0, dx: float = 1e-3) -> ScalingProfile:
    """F0 = 4 的精确剖面 F(x) = 4e^{−2x}"""
    x = dx * np.arange(int(round(L / dx)) + 1)
    return ScalingProfile(F0=4.0, samples=GridFunction(4.0 * np.exp(-2.0 * x), dx), exact_exponential=True)


def closed_form_F12(x) -> np.ndarray:
    """F0 = 12（β = 5/2）的闭式 12e^{−3x}cos(√3x) + 4√3·e^{−3x}sin(√3x)"""
    x = np.asarray(x, dtype=float)
    r3 = math.sqrt(3.0)
    return np.exp(-3.0 * x) * (12.0 * np.cos(r3 * x) + 4.0 * r3 * np.sin(r3 * x))


def solve_nu_profile(nu: int, F0: float, L: float = 10.0, dx: float = 1e-3,
                     richardson: bool = True, stop_at_zero: bool = False) -> NuProfile:
    """
    ν 叉推广 F' + xF' + ν/(ν−1)·F + (1/ν)·F^{∗ν} = 0

    ν = 2 时与 solve_profile 完全一致。
    """
    if nu < 2:
        raise InvalidParameterError(f"ν 必须 ≥ 2: {nu}", field='nu', value=nu)
    if F0 <= 0:
        raise InvalidParameterError(f"F0 必须为正: {F0}", field='F0', value=F0)
    if richardson and not stop_at_zero:
        values, zero = _richardson(F0, nu, L, dx)
    else:
        values, zero = _volterra_heun(F0, nu, L, dx, stop_at_zero=stop_at_zero)
    return NuProfile(nu=nu, F0=F0, alpha=nu_alpha_from_F0(nu, F0),
                     samples=GridFunction(values, dx), first_zero=zero)


def fit_shifted_tail(samples: GridFunction, x_range: Tuple[float, float]) -> float:
    """在 x_range 上对 log F 与 log(1+x) 拟合，返回指数（F0 → 0 时剖面趋于 F0·(1+x)^{−ν/(ν−1)}）"""
    mask = (samples.x >= x_range[0]) & (samples.x <= x_range[1]) & (samples.values > 0)
    slope, _ = np.polyfit(np.log1p(samples.x[mask]), np.log(samples.values[mask]), 1)
    return float(-slope)


def window_lower_end(nu: int, L: float = constants.WINDOW_HORIZON, dx: float = constants.WINDOW_DX,
                     xtol: float = constants.WINDOW_XTOL) -> float:
    """
    正性窗口下端：F0 → 0 时数值剖面的尾部指数

    依次取 F0 = 10⁻², 10⁻⁴, ...，在 [L/2, L] 上拟合尾部指数，相邻两次相差小于 xtol 时停止。

    Raises:
        InvalidParameterError: 小 F0 的剖面出现变号
    """
    previous = None
    for k in range(1, constants.WINDOW_LOWER_STEPS + 1):
        F0 = 10.0 ** (-2 * k)
        profile = solve_nu_profile(nu, F0, L=L, dx=dx, richardson=False, stop_at_zero=True)
        if not profile.positive:
            raise InvalidParameterError(f"F0={F0:.1e} 的剖面在 x={profile.first_zero:.4g} 变号",
                                        field='nu', value=nu)
        exponent = fit_shifted_tail(profile.samples, (0.5 * L, L))
        logger.debug("ν=%d, F0=%.1e: 尾部指数 %.6f", nu, F0, exponent)
        if previous is not None and abs(exponent - previous) < xtol:
            return exponent
        previous = exponent
    logger.warning("ν=%d 下端指数在 F0=1e-%d 时仍未收敛", nu, 2 * constants.WINDOW_LOWER_STEPS)
    return previous


def positivity_window(nu: int, L: float = constants.WINDOW_HORIZON, dx: float = constants.WINDOW_DX,
                      xtol: float = constants.WINDOW_XTOL) -> Tuple[float, float]:
    """
    F 在 [0, L] 上保持正号的 α 区间

    下端点取 F0 → 0 剖面的拟合尾部指数（window_lower_end），可与 ν/(ν−1) 对照；
    上端点对"是否出现变号"做二分，α 与 F0 之间用 nu_F0_from_alpha 换算。
    """
    alpha_low = window_lower_end(nu, L=L, dx=dx, xtol=xtol)

    def has_zero(alpha):
        F0 = nu_F0_from_alpha(nu, alpha)
        profile = solve_nu_profile(nu, F0, L=L, dx=dx, richardson=False, stop_at_zero=True)
        return profile.first_zero is not None

    lo = max(alpha_low, nu / (nu - 1.0)) + 0.05
    if has_zero(lo):
        raise InvalidParameterError(f"α={lo:.4g} 处已出现变号，正性窗口为空", field='nu', value=nu)
    hi = lo + 0.5
    while not has_zero(hi):
        lo = hi
        hi += 0.5
        if hi > 20.0:
            raise InvalidParameterError("在 α ≤ 20 内未找到变号", field='nu', value=nu)
    while hi - lo > xtol:
        mid = 0.5 * (lo + hi)
        if has_zero(mid):
            hi = mid
        else:
            lo = mid
    alpha_max = 0.5 * (lo + hi)
    logger.info("ν=%d 正性窗口: (%.4f, %.4f)", nu, alpha_low, alpha_max)
    return alpha_low, alpha_max


# ============================================
# 剖面求值
# ============================================

def _spline(profile: ScalingProfile):
    if 'spline' not in profile._cache:
        grid = profile.samples
        profile._cache['spline'] = interpolate.CubicSpline(grid.x, grid.values)
    return profile._cache['spline']


def _tail_coefficient(profile: ScalingProfile) -> float:
    if 'tail' not in profile._cache:
        profile._cache['tail'] = tail_amplitude(profile.beta)
    return profile._cache['tail']


def evaluate(profile: ScalingProfile, x) -> np.ndarray:
    """
    F(x)：网格内用三次样条，网格外接解析尾部 A·x^{−α}

    Raises:
        ProfileDomainError: x < 0
    """
    x = np.asarray(x, dtype=float)
    if np.any(x < 0):
        raise ProfileDomainError("标度函数只定义在 x ≥ 0", argument=float(x.min()))
    if profile.exact_exponential:
        out = 4.0 * np.exp(-2.0 * x)
        return out if out.ndim else float(out)
    L = profile.samples.length
    inside = x <= L
    out = np.empty_like(x)
    out[inside] = _spline(profile)(x[inside])
    if np.any(~inside):
        out[~inside] = _tail_coefficient(profile) * x[~inside] ** (-profile.alpha)
    return out if out.ndim else float(out)


def evaluate_derivative(profile: ScalingProfile, x) -> np.ndarray:
    """F'(x)，与 evaluate 使用同一插值"""
    x = np.asarray(x, dtype=float)
    if np.any(x < 0):
        raise ProfileDomainError("标度函数只定义在 x ≥ 0", argument=float(x.min()))
    if profile.exact_exponential:
        out = -8.0 * np.exp(-2.0 * x)
        return out if out.ndim else float(out)
    L = profile.samples.length
    inside = x <= L
    out = np.empty_like(x)
    out[inside] = _spline(profile)(x[inside], 1)
    if np.any(~inside):
        out[~inside] = -profile.alpha * _tail_coefficient(profile) * x[~inside] ** (-profile.alpha - 1.0)
    return out if out.ndim else float(out)


def numerical_laplace(profile: ScalingProfile, q: float) -> float:
    """
    ∫₀^∞ e^{−qx}F(x) dx：网格部分用 Simpson，尾部 A·x^{−α} 用不完全 Γ 解析积分
    """
    grid = profile.samples
    body = integrate.simpson(np.exp(-q * grid.x) * grid.values, x=grid.x)
    if profile.exact_exponential:
        L = grid.length
        return float(body + 4.0 * math.exp(-(q + 2.0) * L) / (q + 2.0))
    A = _tail_coefficient(profile)
    L = grid.length
    tail = A * q ** (profile.alpha - 1.0) * float(mpmath.gammainc(1.0 - profile.alpha, q * L))
    return float(body + tail)


def critical_manifold_integral(profile: ScalingProfile) -> float:
    """∫₀^∞ xF(x) dx，尾部 A·L^{2−α}/(α−2) 解析补上"""
    grid = profile.samples
    body = integrate.simpson(grid.x * grid.values, x=grid.x)
    if profile.exact_exponential:
        L = grid.length
        return float(body + math.exp(-2.0 * L) * (2.0 * L + 1.0))
    if profile.alpha <= 2:
        raise InvalidParameterError("α ≤ 2 时 ∫xF 发散", field='alpha', value=profile.alpha)
    L = grid.length
    return float(body + _tail_coefficient(profile) * L ** (2.0 - profile.alpha) / (profile.alpha - 2.0))


def fit_tail(profile, x_range: Tuple[float, float] = (20.0, 40.0)) -> Tuple[float, float]:
    """在 x_range 上对 log F 与 log x 做线性拟合，返回 (指数 α, 振幅 A)"""
    grid = profile.samples
    mask = (grid.x >= x_range[0]) & (grid.x <= x_range[1]) & (grid.values > 0)
    slope, intercept = np.polyfit(np.log(grid.x[mask]), np.log(grid.values[mask]), 1)
    return float(-slope), float(math.exp(intercept))


# ============================================
# Laplace 表示
# ============================================

def _log_derivative(beta: float, z, method: str):
    """L(z) = y'(z)/y(z)，y = K_β"""
    if method == 'recurrence':
        return specfun.bessel_K_log_derivative(beta, z)
    if method == 'central':
        z = np.asarray(z, dtype=float)
        h = constants.CENTRAL_DIFF_REL_STEP * z
        # ln K_β(z) = ln kve(β, z) − z
        up = np.log(special.kve(beta, z + h))
        down = np.log(special.kve(beta, z - h))
        out = (up - down) / (2.0 * h) - 1.0
        return out if out.ndim else float(out)
    if method == 'integral':
        z = np.asarray(z, dtype=float)
        flat = [-(specfun.bessel_K(beta - 1.0, zi) + specfun.bessel_K(beta + 1.0, zi))
                / (2.0 * specfun.bessel_K(beta, zi)) for zi in z.reshape(-1)]
        out = np.array(flat).reshape(z.shape)
        return out if out.ndim else float(out)
    raise InvalidParameterError(f"未知方法: {method}", field='method', value=method)


def laplace_profile(beta: float, q, method: str = 'recurrence'):
    """
    F̃(q) = −1 − q − q·y'(q/2)/y(q/2)，y = K_β

    Args:
        beta: Bessel 阶数 β（β 接近整数时取 ε 偏移极限）
        q: 正实数或数组
        method: 'recurrence'（K 的导数恒等式）、'central'（中心差分）或 'integral'

    Returns:
        F̃(q)
    """
    q_arr = np.asarray(q, dtype=float)
    if np.any(q_arr <= 0):
        raise InvalidParameterError("laplace_profile 要求 q > 0", field='q')
    order = specfun.check_order(beta)
    if order.near_integer:
        return specfun.epsilon_limit(lambda b: laplace_profile(b, q, method), float(order.nearest_integer))
    out = -1.0 - q_arr - q_arr * _log_derivative(beta, q_arr / 2.0, method)
    return out if out.ndim else float(out)


def laplace_profile_derivative(beta: float, q):
    """
    dF̃/dq = −1 − L(z) − (q/2)·L'(z)，z = q/2

    L' = 1 + β²/z² − L/z − L²（由 Bessel 方程）。
    """
    q_arr = np.asarray(q, dtype=float)
    z = q_arr / 2.0
    L = specfun.bessel_K_log_derivative(beta, z)
    dL = 1.0 + beta * beta / (z * z) - L / z - L * L
    out = -1.0 - L - z * dL
    return out if out.ndim else float(out)


def rational_profile(beta: float, q):
    """β = 3/2 与 β = 5/2 时 F̃ 的有理闭式"""
    q = np.asarray(q, dtype=float)
    if abs(beta - 1.5) < 1e-12:
        return 4.0 / (q + 2.0)
    if abs(beta - 2.5) < 1e-12:
        return 12.0 * (q + 4.0) / (q * q + 6.0 * q + 12.0)
    raise InvalidParameterError(f"β={beta} 没有登记的有理闭式", field='beta', value=beta)


def c_beta(beta: float) -> float:
    """非解析项振幅 c(β) = 2^{2−4β}Γ(1−β)/Γ(β)"""
    def raw(b):
        return 2.0 ** (2.0 - 4.0 * b) * specfun.gamma(1.0 - b) / specfun.gamma(b)
    if specfun.near_integer(beta):
        return specfun.epsilon_limit(raw, float(round(beta)))
    return raw(beta)


def small_q_expansion(beta: float, window: Tuple[float, float] = constants.SMALL_Q_FIT_WINDOW,
                      samples: int = 64) -> ExpansionRecord:
    """
    F̃(q) ≈ (2β−1) − q + q²/(4(β−1)) + c(β)·q^{2β} + …

    解析系数与 laplace_profile 在 window 内的最小二乘拟合一起返回：
    - 'constant'/'linear'/'quadratic'：以 {1, q, q², q^{2β}, q^{2β+1}} 为基的拟合
    - 'c_beta'：扣除解析部分后对 {q^{2β}, q^{2β+1}, q³} 的拟合
    """
    if beta <= 0.5:
        raise InvalidParameterError(f"要求 β > 1/2: {beta}", field='beta', value=beta)
    quadratic = 1.0 / (4.0 * (beta - 1.0)) if not specfun.near_integer(beta) else math.nan
    amplitude = c_beta(beta) if not specfun.near_integer(beta) else math.nan
    note = ""
    if abs(beta - 1.0) < 0.05:
        note = "β 接近 1：q² 与 q^{2β} 两项需要重新排序合并，拟合窗口内两者不可分"
    elif beta < 1.0:
        note = "β < 1：q^{2β} 项先于 q² 项"
    else:
        note = "β > 1：q² 项先于 q^{2β} 项"

    q = np.geomspace(window[0], window[1], samples)
    values = laplace_profile(beta, q)

    def lstsq(columns, target):
        A = np.column_stack(columns)
        scale = np.abs(A).max(axis=0)
        coef, *_ = np.linalg.lstsq(A / scale, target, rcond=None)
        return coef / scale

    fitted: Dict[str, float] = {}
    full = lstsq([np.ones_like(q), q, q ** 2, q ** (2 * beta), q ** (2 * beta + 1)], values)
    fitted['constant'], fitted['linear'], fitted['quadratic'] = map(float, full[:3])
    if not math.isnan(quadratic):
        residual = values - (2 * beta - 1) + q - quadratic * q ** 2
        sub = lstsq([q ** (2 * beta), q ** (2 * beta + 1), q ** 3], residual)
        fitted['c_beta'] = float(sub[0])
        fitted['cubic'] = float(sub[2])

    return ExpansionRecord(
        beta=beta,
        constant=2 * beta - 1,
        linear=-1.0,
        quadratic=quadratic,
        c_beta=amplitude,
        fitted=fitted,
        window=tuple(window),
        ordering_note=note
    )


def tail_amplitude(beta: float) -> float:
    """
    F(x) ≈ A·x^{−α} 的振幅 A = 2^{4−2α}Γ((3−α)/2)/(Γ(1−α)Γ((α−1)/2))

    β 接近整数（Γ((3−α)/2) 的极点）时取 ε 偏移极限。
    """
    if beta <= 0.5:
        raise InvalidParameterError(f"要求 β > 1/2: {beta}", field='beta', value=beta)

    def raw(b):
        alpha = 1.0 + 2.0 * b
        return (2.0 ** (4.0 - 2.0 * alpha) * specfun.gamma((3.0 - alpha) / 2.0)
                * float(specfun.rgamma(1.0 - alpha)) * float(specfun.rgamma((alpha - 1.0) / 2.0)))

    if specfun.near_integer(beta):
        logger.warning("β=%.12g 接近整数，尾部振幅取 ε 偏移极限", beta)
        return specfun.epsilon_limit(raw, float(round(beta)))
    return raw(beta)


def profile_table(profile, stride: int = 1) -> Sequence[Tuple[float, float]]:
    """(x, F) 行"""
    grid = profile.samples
    return list(zip(grid.x[::stride].tolist(), grid.values[::stride].tolist()))
