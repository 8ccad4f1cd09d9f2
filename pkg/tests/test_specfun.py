"""测试特殊函数"""

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import special

from drlab.core import specfun
from drlab.core.exceptions import DivergenceError, InvalidParameterError, PoleError


def test_bessel_K_half_order_closed_form():
    """K_{1/2}(q) = √(π/2q)·e^{−q}"""
    for q in (0.1, 1.0, 5.0, 30.0):
        expected = math.sqrt(math.pi / (2.0 * q)) * math.exp(-q)
        assert specfun.bessel_K(0.5, q) == pytest.approx(expected, rel=1e-10)


def test_bessel_K_matches_scipy():
    """积分表示与 scipy.special.kv 一致"""
    for beta in (0.0, 0.3, 1.5, 2.7, 6.0):
        for q in (0.05, 0.7, 3.0, 40.0):
            assert specfun.bessel_K(beta, q) == pytest.approx(special.kv(beta, q), rel=1e-9)


def test_bessel_K_scaled_avoids_underflow():
    """大 q 时缩放形式仍然有限"""
    value = specfun.bessel_K(1.5, 800.0, scaled=True)
    assert value == pytest.approx(special.kve(1.5, 800.0), rel=1e-9)
    assert value > 0


def test_bessel_K_array_input():
    """数组输入逐点计算"""
    q = np.array([0.5, 1.0, 2.0])
    values = specfun.bessel_K(2.5, q)
    assert values.shape == q.shape
    assert np.allclose(values, special.kv(2.5, q), rtol=1e-9)


def test_bessel_K_cutoff_independence():
    """截断位置加倍不改变结果"""
    base = specfun.log_bessel_K(3.3, 0.2)
    wider = specfun.log_bessel_K(3.3, 0.2, cutoff_factor=2.0)
    assert wider == pytest.approx(base, abs=1e-11)


def test_bessel_K_requires_positive_argument():
    """q ≤ 0 抛出 DivergenceError"""
    with pytest.raises(DivergenceError):
        specfun.bessel_K(1.0, 0.0)
    with pytest.raises(DivergenceError):
        specfun.bessel_K(1.0, np.array([1.0, -1.0]))


def test_bessel_K_unknown_method():
    """未知方法被拒绝"""
    with pytest.raises(InvalidParameterError):
        specfun.bessel_K(1.0, 1.0, method='series')


def test_bessel_K_derivative_recurrence():
    """K' 与中心差分一致"""
    beta, q, h = 1.7, 2.0, 1e-5
    numeric = (special.kv(beta, q + h) - special.kv(beta, q - h)) / (2 * h)
    assert specfun.bessel_K_derivative(beta, q) == pytest.approx(numeric, rel=1e-7)


def test_bessel_K_log_derivative():
    """对数导数等于 K'/K"""
    beta, q = 2.5, 3.0
    expected = specfun.bessel_K_derivative(beta, q) / special.kv(beta, q)
    assert specfun.bessel_K_log_derivative(beta, q) == pytest.approx(expected, rel=1e-10)


def test_bessel_J1_matches_scipy():
    """梯形公式的 J_1 与 scipy.special.j1 一致"""
    x = np.linspace(0.0, 60.0, 121)
    assert np.allclose(specfun.bessel_J1(x), special.j1(x), atol=1e-12)


def test_bessel_J1_zeros():
    """J_1 的前两个正零点"""
    zeros = specfun.bessel_J1_zeros(2)
    assert zeros[0] == pytest.approx(3.8317059702075125, abs=1e-10)
    assert zeros[1] == pytest.approx(7.015586669815619, abs=1e-10)


def test_bessel_J1_rejects_negative():
    """负自变量被拒绝"""
    with pytest.raises(InvalidParameterError):
        specfun.bessel_J1(-1.0)


def test_gamma_negative_non_integer():
    """Γ(−1/2) = −2√π"""
    assert specfun.gamma(-0.5) == pytest.approx(-2.0 * math.sqrt(math.pi), rel=1e-13)
    assert specfun.gamma(-2.5) == pytest.approx(special.gamma(-2.5), rel=1e-12)


def test_gamma_poles():
    """非正整数处抛出 PoleError"""
    for x in (0.0, -1.0, -3.0):
        with pytest.raises(PoleError) as exc_info:
            specfun.gamma(x)
        assert exc_info.value.argument == x


def test_rgamma_zero_at_poles():
    """1/Γ 在极点处为 0"""
    assert specfun.rgamma(-2.0) == 0.0
    assert specfun.rgamma(3.0) == pytest.approx(0.5)


@given(st.floats(min_value=-6.0, max_value=6.0, allow_nan=False, allow_infinity=False))
@settings(max_examples=60, deadline=None)
def test_gamma_reflection(x):
    """Γ(x)Γ(1−x) = π/sin(πx)"""
    if abs(x - round(x)) < 1e-3:
        return
    lhs = specfun.gamma(x) * specfun.gamma(1.0 - x)
    assert lhs == pytest.approx(math.pi / math.sin(math.pi * x), rel=1e-9)


def test_zeta_values():
    """ζ(2) = π²/6，ζ(4) = π⁴/90"""
    assert specfun.zeta(2.0) == pytest.approx(math.pi ** 2 / 6.0, rel=1e-14)
    assert specfun.zeta(4.0) == pytest.approx(math.pi ** 4 / 90.0, rel=1e-14)


def test_zeta_requires_s_above_one():
    """s ≤ 1 被拒绝"""
    with pytest.raises(InvalidParameterError):
        specfun.zeta(1.0)


def test_polylog_half_known_values():
    """Li_1(1/2) = ln 2，Li_2(1/2) = π²/12 − (ln 2)²/2"""
    assert specfun.polylog(1.0) == pytest.approx(math.log(2.0), rel=1e-14)
    expected = math.pi ** 2 / 12.0 - math.log(2.0) ** 2 / 2.0
    assert specfun.polylog(2.0) == pytest.approx(expected, rel=1e-14)


def test_polylog_series_matches_mpmath():
    """级数与 mpmath 交叉校验"""
    for s in (2.5, 3.0, 6.0, 11.0):
        assert specfun.polylog(s) == pytest.approx(specfun.polylog(s, method='mpmath'), rel=1e-14)


def test_polylog_rejects_z_outside_disc():
    """z ≥ 1 被拒绝"""
    with pytest.raises(InvalidParameterError):
        specfun.polylog(2.0, z=1.0)


def test_near_integer_order_warning():
    """接近整数的阶数被标记"""
    assert specfun.check_order(2.0 + 1e-9).near_integer
    assert not specfun.check_order(2.5).near_integer


def test_epsilon_limit_removes_pole():
    """ε 偏移极限对可去奇点给出极限值"""
    limit = specfun.epsilon_limit(lambda x: math.sin(x - 1.0) / (x - 1.0), 1.0)
    assert limit == pytest.approx(1.0, abs=1e-9)
