"""
精确解模块

单指数解族、指数和的耦合 ODE 流及其不变量、双指数临界闭式解，
以及线性初值 f(x,0) = p·x 的闭式解。
"""

import math
from typing import Optional, Sequence, Tuple

import mpmath
import numpy as np

from drlab import constants
from drlab.core.exceptions import (
    BlowUpSignal,
    BranchError,
    InvalidParameterError,
    PoleError,
    RateCollisionError,
)
from drlab.models.types import ExponentialSum, ExpSumTrajectory, TwoExpCritical
from drlab.utils.logger import get_logger


logger = get_logger()


# ============================================
# 单指数解
# ============================================

def single_exp(kappa, t0: float, t) -> Tuple[np.ndarray, np.ndarray, float]:
    """
    单指数解 f = a(t)·exp(b(t)·x)

    a = 4κ²/sin²(κ(t+t₀))，b = −2κ/tan(κ(t+t₀))，Δ = 1/cos²(κt₀) − 1。
    κ 可以是纯虚数（Δ < 0），κ = 0 时取临界极限 a = 4/(t+t₀)²，b = −2/(t+t₀)。

    Args:
        kappa: 实数或纯虚数
        t0: 时间偏移
        t: 时间（标量或数组）

    Returns:
        (a, b, Δ)

    Raises:
        PoleError: sin(κ(t+t₀)) = 0，即 t = t_c
    """
    t_arr = np.asarray(t, dtype=float)
    tau = t_arr + t0
    kappa = complex(kappa)

    if kappa == 0:
        if np.any(tau == 0):
            raise PoleError("t + t₀ = 0 处为极点", argument=float(-t0))
        a = 4.0 / tau ** 2
        b = -2.0 / tau
        return _maybe_scalar(a, t_arr), _maybe_scalar(b, t_arr), 0.0

    s = np.sin(kappa * tau)
    if np.any(np.abs(s) < 1e-300 + 1e-14 * np.abs(kappa * tau)):
        raise PoleError(f"sin(κ(t+t₀)) = 0，t 到达爆破时间", argument=float(np.pi / kappa.real - t0) if kappa.real else None)
    a = (4.0 * kappa ** 2 / s ** 2).real
    b = (-2.0 * kappa / np.tan(kappa * tau)).real
    delta = (1.0 / np.cos(kappa * t0) ** 2 - 1.0).real
    return _maybe_scalar(a, t_arr), _maybe_scalar(b, t_arr), float(delta)


def _maybe_scalar(values, t_arr):
    return values if t_arr.ndim else float(values)


def single_exp_blowup_time(kappa, t0: float) -> Optional[float]:
    """κ 为正实数时 t_c = π/κ − t₀，否则不爆破"""
    kappa = complex(kappa)
    if kappa.imag != 0 or kappa.real <= 0:
        return None
    return math.pi / kappa.real - t0


def kappa_from_initial(a0: float, b0: float) -> Tuple[complex, float]:
    """
    由初值 (a(0), b(0)) 反解 (κ, t₀)

    a = 2ḃ 给出 b² − a = −4κ²（与 t 无关），再由 b(0) 定 t₀。
    """
    if a0 <= 0 or b0 >= 0:
        raise InvalidParameterError("单指数初值要求 a > 0, b < 0", field='terms')
    k2 = (a0 - b0 * b0) / 4.0
    if k2 > 0:
        kappa = math.sqrt(k2)
        # cot(κ t₀) = −b/(2κ)
        t0 = math.atan2(2.0 * kappa, -b0) / kappa
        return complex(kappa), t0
    if k2 < 0:
        khat = math.sqrt(-k2)
        # coth(κ̂ t₀) = −b/(2κ̂)
        t0 = math.atanh(2.0 * khat / -b0) / khat
        return complex(0.0, khat), t0
    return 0j, -2.0 / b0


# ============================================
# 指数和流
# ============================================

def exp_sum_rhs(a: np.ndarray, b: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """ȧᵢ = aᵢbᵢ + aᵢΣ_{j≠i} a_j/(bᵢ−b_j)，ḃᵢ = aᵢ/2"""
    diff = b[:, None] - b[None, :]
    np.fill_diagonal(diff, np.inf)
    coupling = (a[None, :] / diff).sum(axis=1)
    return a * b + a * coupling, 0.5 * a


def invariants(s: ExponentialSum) -> Tuple[float, float]:
    """(Σ(aᵢ − bᵢ²), Σ aᵢ/bᵢ²)，后者为 1 表示处于临界流形"""
    return float(math.fsum(s.a - s.b ** 2)), float(math.fsum(s.a / s.b ** 2))


def _collision(b: np.ndarray) -> Optional[Tuple[int, int]]:
    n = b.size
    for i in range(n):
        for j in range(i + 1, n):
            if abs(b[i] - b[j]) < constants.RATE_COLLISION_TOL * abs(b[i]):
                return (i, j)
    return None


def _rk4(a, b, h):
    k1a, k1b = exp_sum_rhs(a, b)
    k2a, k2b = exp_sum_rhs(a + 0.5 * h * k1a, b + 0.5 * h * k1b)
    k3a, k3b = exp_sum_rhs(a + 0.5 * h * k2a, b + 0.5 * h * k2b)
    k4a, k4b = exp_sum_rhs(a + h * k3a, b + h * k3b)
    return (a + h / 6.0 * (k1a + 2 * k2a + 2 * k3a + k4a),
            b + h / 6.0 * (k1b + 2 * k2b + 2 * k3b + k4b))


def evolve_exp_sum(s: ExponentialSum, T: float, dt: Optional[float] = None,
                   record_times: Optional[Sequence[float]] = None,
                   step_tol: float = constants.EXP_SUM_STEP_TOL,
                   blowup: float = constants.EXP_SUM_BLOWUP,
                   on_signal: str = 'raise') -> ExpSumTrajectory:
    """
    自适应 RK4 积分指数和参数

    步长 h = step_tol / max(|ȧᵢ/aᵢ|, |ḃᵢ|/max(|bᵢ|, 1))，再截到 dt 与下一个记录时刻。
    bᵢ 在爆破前可能穿过 0，速率的尺度因此不小于 1。

    Args:
        s: 初始指数和
        T: 积分时长
        dt: 步长上限；None 时只用自适应步长
        record_times: 记录时刻；None 时记录每个接受的步
        step_tol: 相对步长控制
        blowup: 振幅爆破阈值
        on_signal: 'raise' 抛出碰撞/爆破信号，'halt' 停止并在轨迹中标注

    Returns:
        ExpSumTrajectory，drift 记录 Σ(aᵢ − bᵢ²) 的相对漂移；
        初值位于临界流形时再记录 Σaᵢ/bᵢ² 的漂移
    """
    if dt is not None and not dt > 0:
        raise InvalidParameterError(f"dt 必须为正: {dt}", field='dt', value=dt)
    a = s.a.copy()
    b = s.b.copy()
    inv0 = invariants(s)
    targets = sorted(set(float(x) for x in record_times)) if record_times is not None else None
    if targets is not None and (targets[0] < 0 or targets[-1] > T):
        raise InvalidParameterError("记录时刻必须位于 [0, T]", field='record_times')

    times, a_rows, b_rows = [], [], []

    def record(t_now):
        times.append(t_now)
        a_rows.append(a.copy())
        b_rows.append(b.copy())

    t = 0.0
    if targets is None or targets[0] == 0.0:
        record(0.0)
    pending = [x for x in targets if x > 0.0] if targets is not None else None
    halted = None

    while t < T:
        da, db = exp_sum_rhs(a, b)
        with np.errstate(divide='ignore', invalid='ignore'):
            rates = np.concatenate([np.abs(da / a), np.abs(db) / np.maximum(np.abs(b), 1.0)])
        rates = rates[np.isfinite(rates)]
        h = step_tol / float(rates.max()) if rates.size and rates.max() > 0 else T - t
        if dt is not None:
            h = min(h, dt)
        stop = pending[0] if pending else T
        h = min(h, stop - t)
        a, b = _rk4(a, b, h)
        t = stop if abs(stop - (t + h)) < 1e-14 * max(1.0, stop) else t + h

        if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b))) or np.max(np.abs(a)) > blowup:
            halted = 'blowup'
            if on_signal == 'raise':
                raise BlowUpSignal(f"指数和振幅在 t={t:.6g} 爆破", time=t, max_value=float(np.max(np.abs(a))))
            break
        pair = _collision(b)
        if pair is not None:
            halted = 'collision'
            if on_signal == 'raise':
                raise RateCollisionError(f"速率 b{pair[0]} 与 b{pair[1]} 在 t={t:.6g} 碰撞",
                                         index_pair=pair, time=t)
            break

        if pending is None:
            record(t)
        elif t == pending[0]:
            record(t)
            pending.pop(0)

    if halted is not None:
        record(t)
        logger.warning("指数和积分在 t=%.6g 停止: %s", t, halted)

    final = ExponentialSum(a, b) if halted is None else None
    drift = {}
    if final is not None:
        inv1, inv2 = invariants(final)
        drift = {'inv1': abs(inv1 - inv0[0]) / max(abs(inv0[0]), 1e-300)}
        # Σaᵢ/bᵢ² 只在临界流形上守恒：d/dt Σaᵢ/bᵢ² = M₀(Σaᵢ/bᵢ² − 1)
        if abs(inv0[1] - 1.0) < constants.CRITICAL_MANIFOLD_TOL:
            drift['inv2'] = abs(inv2 - inv0[1])
    return ExpSumTrajectory(np.array(times), np.array(a_rows), np.array(b_rows), drift=drift, halted=halted)


def reconstruct(s: ExponentialSum, x) -> np.ndarray:
    """f(x) = Σ aᵢ·exp(bᵢx)"""
    return s.evaluate(x)


# ============================================
# 双指数临界闭式解
# ============================================

def two_exp_closed_form(c: TwoExpCritical, t: float) -> Tuple[float, float, float, float]:
    """
    双指数闭式解 (a₁, b₁, a₂, b₂)

    b_{1,2} = −4K / [Kτ₁ ± √(K²τ₁² − 4Kτ₁·tanh(Kτ₀) + 4)]，τᵢ = t + tᵢ，
    b₁ 取较不负的根；aᵢ = 2ḃᵢ 解析求导。a₂ 随时间指数衰减且由相消得到，
    因此整个计算在 mpmath 高精度下完成。

    Raises:
        BranchError: 根式为负或结果不是实数
    """
    with mpmath.workdps(constants.MP_DPS):
        K = mpmath.mpmathify(c.K)
        tau1 = mpmath.mpf(t) + mpmath.mpmathify(c.t1)
        tau0 = mpmath.mpf(t) + mpmath.mpmathify(c.t0)
        th = mpmath.tanh(K * tau0)
        sech2 = 1 - th * th
        R = K * K * tau1 * tau1 - 4 * K * tau1 * th + 4
        if mpmath.im(R) == 0 and mpmath.re(R) < 0:
            raise BranchError(f"根式为负: R={mpmath.nstr(R, 8)}", time=t)
        sqrt_r = mpmath.sqrt(R)
        dR = 2 * K * K * tau1 - 4 * K * th - 4 * K * K * tau1 * sech2

        results = []
        for sign in (1, -1):
            D = K * tau1 + sign * sqrt_r
            dD = K + sign * dR / (2 * sqrt_r)
            b = -4 * K / D
            a = 2 * 4 * K * dD / (D * D)
            results.extend([a, b])

        out = []
        for value in results:
            re, im = mpmath.re(value), mpmath.im(value)
            if abs(im) > mpmath.mpf('1e-20') * max(abs(re), 1):
                raise BranchError(f"闭式解在 t={t} 不是实数", time=t)
            out.append(float(re))
    a1, b1, a2, b2 = out
    return a1, b1, a2, b2


def linear_data_solution(p: float, t: float) -> Tuple[float, float, float, float]:
    """
    初值 f(x,0) = p·x 的双指数解

    b_± = [3pt² ± √(288pt − 3p²t⁴)]/(24 − pt³)，aᵢ = 2ḃᵢ，在 t_c = (24/p)^{1/3} 爆破。
    """
    if p <= 0 or t <= 0:
        raise InvalidParameterError("要求 p > 0 且 t > 0", field='t', value=t)
    den = 24.0 - p * t ** 3
    if den <= 0:
        raise PoleError(f"t={t} 已超过爆破时间", argument=linear_blowup_time(p))
    rad = 288.0 * p * t - 3.0 * p * p * t ** 4
    if rad < 0:
        raise BranchError(f"根式为负: {rad}", time=t)
    sq = math.sqrt(rad)
    d_rad = 288.0 * p - 12.0 * p * p * t ** 3
    d_den = -3.0 * p * t * t
    out = []
    for sign in (1.0, -1.0):
        num = 3.0 * p * t * t + sign * sq
        d_num = 6.0 * p * t + sign * d_rad / (2.0 * sq)
        b = num / den
        db = (d_num * den - num * d_den) / (den * den)
        out.extend([2.0 * db, b])
    a1, b1, a2, b2 = out
    return a1, b1, a2, b2


def linear_blowup_time(p: float) -> float:
    """(24/p)^{1/3}"""
    return (24.0 / p) ** (1.0 / 3.0)
