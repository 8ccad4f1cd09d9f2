"""
凝聚方程 PDE 演化模块

df/dt = df/dx + ½∫₀ˣ f(x−y) f(y) dy（hmp 变体再减去 f）的网格演化、
Laplace 变换流、爆破检测、正性级数小时间解以及不动点剖面。

数值格式：dt = dx，平流项沿特征线精确平移一个格点，卷积项沿特征线用 Heun
（梯形）方法推进，卷积本身用梯形公式；网格右端以外视为 0。
"""

import math
from typing import List, Optional, Sequence

import numpy as np
from scipy import integrate, interpolate, signal

from drlab import constants
from drlab.core import specfun
from drlab.core.exceptions import (
    BlowUpSignal,
    InvalidParameterError,
    NumericalOverflowError,
    SeriesConditionError,
)
from drlab.models.types import (
    BlowupMonitor,
    BlowupResult,
    EvolutionConfig,
    EvolutionResult,
    GridFunction,
    Variant,
)
from drlab.utils.logger import get_logger


logger = get_logger()


# ============================================
# 卷积
# ============================================

def trapezoid_convolution(f: np.ndarray, g: np.ndarray, dx: float, use_fft: bool = False) -> np.ndarray:
    """
    (f∗g)(x_i) = ∫₀^{x_i} f(x_i−y) g(y) dy 的梯形近似

    dx·[Σ_{j=0}^{i} f_{i−j} g_j − ½(f_i g_0 + f_0 g_i)]
    """
    n = f.size
    if use_fft:
        full = signal.fftconvolve(f, g)[:n]
    else:
        full = np.convolve(f, g)[:n]
    return dx * (full - 0.5 * (f * g[0] + f[0] * g))


def _nonlinear(values: np.ndarray, dx: float, variant: Variant, use_fft: bool) -> np.ndarray:
    out = 0.5 * trapezoid_convolution(values, values, dx, use_fft)
    if variant == Variant.HMP:
        out = out - values
    return out


def _heun_step(values: np.ndarray, dx: float, variant: Variant, use_fft: bool) -> np.ndarray:
    """沿特征线从 (x_{i+1}, t) 推进到 (x_i, t+dt)"""
    padded = np.append(values, 0.0)
    n_old = _nonlinear(padded, dx, variant, use_fft)
    shifted = padded[1:]
    predictor = shifted + dx * n_old[1:]
    n_new = _nonlinear(predictor, dx, variant, use_fft)
    return shifted + 0.5 * dx * (n_old[1:] + n_new)


# ============================================
# 演化
# ============================================

def _diagnostics(grid: GridFunction):
    values = grid.values
    x = grid.x
    return values[0], integrate.trapezoid(x * values, x), float(values.max())


def _refine_blowup(times: np.ndarray, monitor: np.ndarray) -> Optional[float]:
    """
    monitor ~ C/(t_c − t)² 时 monitor^{-1/2} 在 t_c 附近线性趋于 0，
    对最后若干点做线性外推。
    """
    mask = np.isfinite(monitor) & (monitor > 0)
    times, monitor = times[mask], monitor[mask]
    count = min(constants.BLOWUP_FIT_POINTS, times.size)
    if count < 3:
        return None
    slope, intercept = np.polyfit(times[-count:], monitor[-count:] ** -0.5, 1)
    if slope >= 0:
        return None
    return float(-intercept / slope)


def evolve(f: GridFunction, cfg: EvolutionConfig, T: float, on_blowup: str = 'raise') -> EvolutionResult:
    """
    把 f 推进到时间 f.t + T，并逐步记录诊断量

    Args:
        f: 初始网格函数
        cfg: 演化参数，cfg.dt 必须等于 f.dx
        T: 演化时长，必须是 dt 的整数倍
        on_blowup: 'raise' 抛出 BlowUpSignal，'return' 在结果中记录爆破

    Returns:
        EvolutionResult（末态网格与 (t, f(0,t), ∫xf dx, max f) 序列）

    Raises:
        BlowUpSignal: 监测量超过阈值
        NumericalOverflowError: 出现 NaN/inf
    """
    if abs(cfg.dt - f.dx) > 1e-12 * f.dx:
        raise InvalidParameterError(f"dt={cfg.dt} 必须等于 dx={f.dx}", field='dt', value=cfg.dt)
    steps = int(round(T / cfg.dt))
    if abs(steps * cfg.dt - T) > 1e-9 * max(T, 1.0):
        raise InvalidParameterError(f"T={T} 不是 dt 的整数倍", field='T', value=T)

    values = f.values.copy()
    dx = f.dx
    t = f.t
    grid = GridFunction(values, dx, t)
    origin0, moment0, max0 = _diagnostics(grid)
    times, origin, moment, maximum = [t], [origin0], [moment0], [max0]
    tail_start = int((1.0 - constants.TAIL_FRACTION) * values.size)
    warned_positivity = warned_tail = False
    blowup = None

    for step in range(1, steps + 1):
        values = _heun_step(values, dx, cfg.variant, cfg.use_fft)
        t = f.t + step * dx

        if not np.all(np.isfinite(values)):
            if on_blowup == 'return':
                blowup = _blowup_record(np.array(times), np.array(origin), np.array(maximum), cfg, t, f.t + T)
                break
            raise NumericalOverflowError(f"t={t:.6g} 出现 NaN/inf", time=t)

        grid = GridFunction(values, dx, t)
        if step % cfg.record_every == 0 or step == steps:
            o, mom, mx = _diagnostics(grid)
            times.append(t)
            origin.append(o)
            moment.append(mom)
            maximum.append(mx)

            scale = float(np.max(np.abs(values)))
            if not warned_positivity and values.min() < -constants.POSITIVITY_TOL * scale:
                logger.warning("t=%.6g 时 min f = %.3e 低于正性容差", t, values.min())
                warned_positivity = True
            total = integrate.trapezoid(np.abs(values), dx=dx)
            tail = integrate.trapezoid(np.abs(values[tail_start:]), dx=dx)
            if not warned_tail and total > 0 and tail > constants.TAIL_MONITOR_TOL * total:
                logger.warning("t=%.6g 时区域末端质量占比 %.3e，截断误差可能显著", t, tail / total)
                warned_tail = True

            watched = o if cfg.monitor == BlowupMonitor.ORIGIN else mx
            if watched > cfg.blowup_threshold:
                blowup = _blowup_record(np.array(times), np.array(origin), np.array(maximum), cfg, t, f.t + T)
                if on_blowup == 'raise':
                    raise BlowUpSignal(f"t={t:.6g} 时监测量 {watched:.3e} 超过阈值",
                                       time=t, max_value=watched)
                break

    result = EvolutionResult(
        final=grid,
        times=np.array(times),
        origin=np.array(origin),
        moment=np.array(moment),
        maximum=np.array(maximum),
        blowup=blowup
    )
    return result


def _blowup_record(times, origin, maximum, cfg: EvolutionConfig, crossing: float, horizon: float) -> BlowupResult:
    watched = origin if cfg.monitor == BlowupMonitor.ORIGIN else maximum
    refined = _refine_blowup(times, watched)
    t_c = refined if refined is not None and refined >= times[-1] else crossing
    logger.info("检测到爆破：穿越阈值于 t=%.6g，外推 t_c=%.6g", crossing, t_c)
    return BlowupResult(t_c=t_c, crossing_time=crossing, monitor=cfg.monitor, horizon=horizon)


def blowup_time(f0: GridFunction, horizon: float, threshold_factor: float = 1e4,
                monitor: BlowupMonitor = BlowupMonitor.MAX, use_fft: bool = False) -> BlowupResult:
    """
    检测视界内的爆破时间

    阈值取 threshold_factor × 初始监测量。默认监测 max f；区域长度应大于视界，
    使 f(0,t) 不受右端截断影响；但超临界解在爆破前沿 x 指数增长，
    区域过长时卷积的舍入误差由远端大值决定，长度取视界加少量余量即可。
    超临界指数初值在 b(t) > 0 后最大值位于区域右端，这时应监测原点（monitor='origin'）。

    Returns:
        BlowupResult，t_c 为 None 表示视界内未爆破
    """
    if f0.values.min() < 0:
        raise InvalidParameterError("爆破检测要求非负初值", field='f0')
    monitor = BlowupMonitor(monitor) if isinstance(monitor, str) else monitor
    start = f0.values[0] if monitor == BlowupMonitor.ORIGIN else f0.values.max()
    cfg = EvolutionConfig(dt=f0.dx, blowup_threshold=threshold_factor * max(start, 1e-12),
                          monitor=monitor, use_fft=use_fft)
    steps = int(math.floor(horizon / f0.dx + 1e-9))
    result = evolve(f0, cfg, steps * f0.dx, on_blowup='return')
    if result.blowup is not None:
        return result.blowup
    return BlowupResult(t_c=None, crossing_time=None, monitor=monitor, horizon=horizon)


# ============================================
# Laplace 变换
# ============================================

def laplace_transform(grid: GridFunction, p: float, valid_length: Optional[float] = None) -> float:
    """网格函数在 [0, valid_length] 上的 Laplace 变换（梯形公式）"""
    x = grid.x
    values = grid.values
    if valid_length is not None:
        keep = x <= valid_length + 1e-12
        x, values = x[keep], values[keep]
    return float(integrate.trapezoid(np.exp(-p * x) * values, x))


def laplace_evolve(times: Optional[Sequence[float]], origin: Optional[Sequence[float]], p: float,
                   f_tilde0: float, T: float, blowup_threshold: float = constants.DEFAULT_BLOWUP_THRESHOLD) -> float:
    """
    积分 df̃/dt = −f(0,t) + p·f̃ + f̃²/2

    Args:
        times, origin: f(0,t) 的时间序列（非局部项），None 表示 f(0,t) ≡ 0
        p: 变换变量 p ≥ 0
        f_tilde0: 初始变换值
        T: 积分时长（从 times[0] 起算）

    Returns:
        f̃(p, T)

    Raises:
        BlowUpSignal: |f̃| 超过阈值
    """
    if p < 0:
        raise InvalidParameterError(f"p 必须非负: {p}", field='p', value=p)
    if times is None:
        t_start = 0.0

        def forcing(t):
            return 0.0
    else:
        times = np.asarray(times, dtype=float)
        spline = interpolate.CubicSpline(times, np.asarray(origin, dtype=float))
        t_start = float(times[0])
        if times[-1] < t_start + T - 1e-12:
            raise InvalidParameterError("f(0,t) 序列未覆盖积分区间", field='times')

        def forcing(t):
            return float(spline(t))

    def rhs(t, y):
        return [-forcing(t) + p * y[0] + 0.5 * y[0] * y[0]]

    def escape(t, y):
        return blowup_threshold - abs(y[0])
    escape.terminal = True

    sol = integrate.solve_ivp(rhs, (t_start, t_start + T), [f_tilde0], method='DOP853',
                              rtol=constants.LAPLACE_RTOL, atol=constants.LAPLACE_ATOL, events=escape)
    if sol.status == 1:
        t_hit = float(sol.t_events[0][0])
        raise BlowUpSignal(f"Laplace 流在 t={t_hit:.6g} 爆破", time=t_hit, max_value=blowup_threshold)
    return float(sol.y[0, -1])


# ============================================
# 正性级数
# ============================================

def positivity_series_terms(f_init: GridFunction, t: float, n_max: int, check: bool = True) -> List[np.ndarray]:
    """
    正性级数各项 u_n(x, t)，n = 0..n_max

    u₀(x,τ) = f_init(x+τ)，
    u_n(x,τ) = ∫₀^τ S_n(x+τ−s, s) ds，S_n = ½Σ_m u_m ∗ u_{n−m−1}。
    时间方向与空间同步长（s_j = j·dx），τ 积分用梯形公式。

    Args:
        f_init: 初值网格（需覆盖 [0, L_out + t]）
        t: 目标时间（dx 的整数倍）
        n_max: 级数深度
        check: 是否校验收敛条件、非负性与上界

    Returns:
        u_n 在输出网格 [0, L_out] 上的取值列表，L_out = f_init.length − 2t
    """
    dx = f_init.dx
    K = int(round(t / dx))
    if abs(K * dx - t) > 1e-9 * max(t, 1.0):
        raise InvalidParameterError(f"t={t} 不是 dx 的整数倍", field='t', value=t)
    M = f_init.N - K
    N_out = M - K
    if N_out < 1:
        raise InvalidParameterError("初值网格太短", field='f_init')

    f_vals = f_init.values
    g = np.maximum.accumulate(f_vals)
    x_out = dx * np.arange(N_out + 1)
    if check:
        condition = t * (x_out + t) * g[K:K + N_out + 1]
        worst = float(condition.max())
        if worst >= 2.0:
            raise SeriesConditionError(f"收敛条件 t(x+t)g(x+t) < 2 不满足: max={worst:.4g}", worst=worst)

    # u[n][j, idx]：时间层 s_j 上、空间下标 idx ≤ M 的取值
    u = []
    u0 = np.zeros((K + 1, M + 1))
    for j in range(K + 1):
        u0[j] = f_vals[j:j + M + 1]
    u.append(u0)

    for n in range(1, n_max + 1):
        S = np.zeros((K + 1, M + 1))
        for j in range(K + 1):
            acc = np.zeros(M + 1)
            for m in range(n):
                acc += trapezoid_convolution(u[m][j], u[n - m - 1][j], dx, use_fft=True)
            S[j] = 0.5 * acc
        un = np.zeros((K + 1, M + 1))
        for k in range(1, K + 1):
            width = M + 1 - k
            acc = np.zeros(width)
            for j in range(k + 1):
                w = 0.5 if j in (0, k) else 1.0
                acc += w * S[j, k - j:k - j + width]
            un[k, :width] = dx * acc
        u.append(un)

    terms = [un[K, :N_out + 1] for un in u]
    if check:
        scale = max(float(np.max(np.abs(terms[0]))), 1e-300)
        for n, term in enumerate(terms):
            if term.min() < -1e-12 * scale:
                raise SeriesConditionError(f"u_{n} 出现负值 {term.min():.3e}", worst=float(term.min()))
            bound = (t / 2.0) ** n * (x_out + t) ** n * g[K:K + N_out + 1] ** (n + 1)
            excess = term - bound
            if n > 0 and np.any(excess > 1e-12 * scale):
                raise SeriesConditionError(f"u_{n} 超过上界", worst=float(excess.max()))
    return terms


def positivity_series(f_init: GridFunction, t: float, n_max: int) -> GridFunction:
    """Σ_{n ≤ n_max} u_n(x, t)，作为小时间的独立解"""
    terms = positivity_series_terms(f_init, t, n_max)
    return GridFunction(np.sum(terms, axis=0), f_init.dx, f_init.t + t)


# ============================================
# 不动点
# ============================================

def fixed_point_profile(f0: float, L: float, dx: float) -> GridFunction:
    """
    不动点 f(x) = √(2f0)·J₁(x√(2f0))/x，f(0) = f0

    小自变量处改用级数 f0 − f0²x²/4 + f0³x⁴/48 − f0⁴x⁶/1152。
    """
    if f0 <= 0:
        raise InvalidParameterError(f"f0 必须为正: {f0}", field='f0', value=f0)
    c = math.sqrt(2.0 * f0)
    x = dx * np.arange(int(round(L / dx)) + 1)
    values = np.empty_like(x)
    small = c * x < 1e-2
    xs = x[small]
    values[small] = f0 - f0 ** 2 * xs ** 2 / 4.0 + f0 ** 3 * xs ** 4 / 48.0 - f0 ** 4 * xs ** 6 / 1152.0
    xl = x[~small]
    values[~small] = c * specfun.bessel_J1(c * xl) / xl
    return GridFunction(values, dx)


def fixed_point_laplace(f0: float, p):
    """不动点的 Laplace 变换 √(p² + 2f0) − p"""
    return np.sqrt(np.asarray(p, dtype=float) ** 2 + 2.0 * f0) - p


def stationarity_residual(profile: GridFunction) -> np.ndarray:
    """f'(x) + ½(f∗f)(x)，导数用二阶中心差分"""
    derivative = np.gradient(profile.values, profile.dx, edge_order=2)
    return derivative + 0.5 * trapezoid_convolution(profile.values, profile.values, profile.dx)


def sign_changes(values: np.ndarray, tol: float = 0.0) -> int:
    """严格变号次数"""
    signs = np.sign(values[np.abs(values) > tol])
    return int(np.count_nonzero(np.diff(signs)))


def exponential_grid(a: float, b: float, L: float, dx: float, t: float = 0.0) -> GridFunction:
    """a·exp(b·x) 的网格采样"""
    x = dx * np.arange(int(round(L / dx)) + 1)
    return GridFunction(a * np.exp(b * x), dx, t)
