"""测试离散最大值递推"""

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from drlab.core import discrete
from drlab.core.exceptions import (
    BracketError,
    DegenerateDistributionError,
    InvalidParameterError,
)
from drlab.models.types import DiscreteDistribution, FamilyKind, ModelFamily, RescaledDistribution


def two_delta(p, K=64):
    return discrete.make_family(ModelFamily(FamilyKind.TWO_DELTA, p), K=K)


def test_two_delta_family():
    """two-delta 族：Q(0) = 1 − p，Q(2) = p"""
    dist = two_delta(0.3)
    assert dist.q[0] == pytest.approx(0.7)
    assert dist.q[2] == pytest.approx(0.3)
    assert dist.total == pytest.approx(1.0, abs=1e-15)


def test_power_law_family_normalized():
    """幂律族的 Q(0) 由归一化给出"""
    fam = ModelFamily(FamilyKind.POWER_LAW, 1.0, alpha=3.0)
    dist = discrete.make_family(fam, K=512)
    assert dist.q[1] == pytest.approx(0.5)
    assert dist.q[2] == pytest.approx(1.0 / 32.0)
    assert dist.total == pytest.approx(1.0, abs=1e-14)


def test_power_law_family_rejects_large_p():
    """p·Li_α(1/2) > 1 时无法归一化"""
    fam = ModelFamily(FamilyKind.POWER_LAW, 3.0, alpha=3.0)
    with pytest.raises(InvalidParameterError) as exc_info:
        discrete.make_family(fam, K=64)
    assert exc_info.value.field == 'p'


def test_make_family_rejects_tiny_truncation():
    """K < 2 被拒绝"""
    with pytest.raises(InvalidParameterError):
        two_delta(0.2, K=1)


def test_distribution_validation():
    """概率之和必须为 1"""
    with pytest.raises(InvalidParameterError):
        DiscreteDistribution(np.array([0.5, 0.4]))
    with pytest.raises(InvalidParameterError):
        DiscreteDistribution(np.array([1.2, -0.2]))


def test_iterate_single_step_two_delta():
    """一步迭代：X' = max(X₁ + X₂ − 1, 0)"""
    p = 0.3
    q = discrete.iterate(two_delta(p)).q
    assert q[3] == pytest.approx(p * p)
    assert q[1] == pytest.approx(2 * p * (1 - p))
    assert q[0] == pytest.approx((1 - p) ** 2)
    assert q[2] == 0.0


def test_iterate_conserves_mass_with_overflow():
    """推出截断的质量进入 overflow，总和仍为 1"""
    dist = discrete.iterate(two_delta(0.6, K=16), steps=6)
    assert dist.overflow > 0
    assert dist.total == pytest.approx(1.0, abs=1e-12)


def test_generating_function_step_matches_iteration():
    """H_{n+1}(z) = H_n(z)²/z + (1 − 1/z)H_n(0)²"""
    dist = discrete.iterate(two_delta(0.25), steps=2)
    nxt = discrete.iterate(dist)
    for z in (0.0, 0.5, 1.0, 1.7, 2.0):
        assert discrete.generating_function(nxt, z) == pytest.approx(
            discrete.generating_function_step(dist, z), rel=1e-12, abs=1e-15)


def test_delta_two_delta_closed_form():
    """two-delta 族 Δ = 5p − 1"""
    for p in (0.1, 0.2, 0.35):
        assert discrete.delta(two_delta(p)) == pytest.approx(5 * p - 1, abs=1e-14)


@given(p=st.floats(min_value=0.01, max_value=0.99), steps=st.integers(min_value=0, max_value=4))
@settings(max_examples=50, deadline=None)
def test_delta_recursion_identity(p, steps):
    """Δ_{n+1} = H_n(2)·Δ_n"""
    dist = discrete.iterate(two_delta(p), steps=steps)
    nxt = discrete.iterate(dist)
    expected = discrete.generating_function(dist, 2.0) * discrete.delta(dist)
    assert discrete.delta(nxt) == pytest.approx(expected, rel=1e-10, abs=1e-12)


@given(p=st.floats(min_value=0.0, max_value=1.0), steps=st.integers(min_value=1, max_value=5))
@settings(max_examples=50, deadline=None)
def test_iteration_preserves_normalization(p, steps):
    """任意 p 迭代后概率之和为 1 且非负"""
    dist = discrete.iterate(two_delta(p), steps=steps)
    assert dist.total == pytest.approx(1.0, abs=1e-12)
    assert dist.q.min() >= 0.0


def test_power_law_delta_closed_form_vs_truncated():
    """幂律族 Δ 闭式与截断求和一致"""
    fam = ModelFamily(FamilyKind.POWER_LAW, 1.5, alpha=4.0)
    dist = discrete.make_family(fam, K=2048)
    closed = discrete.power_law_delta(1.5, 4.0)
    assert discrete.delta(dist) == pytest.approx(closed)
    assert discrete._power_law_delta_truncated(dist) == pytest.approx(closed, abs=1e-9)


def test_critical_point_two_delta():
    """two-delta 临界点 p_c = 1/5，|Δ(p_c)| < 1e-10"""
    result = discrete.critical_point('two-delta')
    assert result.p_c == pytest.approx(0.2, abs=1e-12)
    assert abs(result.delta_at_root) < 1e-10
    assert result.closed_form == pytest.approx(0.2)


def test_critical_point_power_law_known_values():
    """幂律族 α = 6 与 α = 3 的临界点"""
    assert discrete.critical_point('power-law', alpha=6.0).p_c == pytest.approx(1.90956, abs=1e-4)
    result = discrete.critical_point(FamilyKind.POWER_LAW, alpha=3.0)
    assert result.p_c == pytest.approx(1.02031, abs=1e-4)
    assert result.p_c == pytest.approx(result.closed_form, rel=1e-6)


@pytest.mark.parametrize("m", [2, 3, 4])
def test_critical_point_m_ary(m):
    """m 叉 two-delta：p_c = 1/(2m³ − 3m² + 1)"""
    result = discrete.critical_point('two-delta', arity=m)
    assert result.p_c == pytest.approx(1.0 / (2 * m ** 3 - 3 * m ** 2 + 1), rel=1e-9)


def test_critical_point_rejects_alpha_at_most_two():
    """α ≤ 2 时 Δ 发散，没有临界点"""
    with pytest.raises(InvalidParameterError):
        discrete.critical_point('power-law', alpha=2.0)


def test_critical_point_log_corrected():
    """对数修正族的临界点满足 p·S = 1"""
    result = discrete.critical_point('log-corrected', alpha=3.0, alpha_log=1.0)
    assert result.p_c == pytest.approx(result.closed_form, rel=1e-9)


def test_bracket_error_is_reportable():
    """BracketError 携带区间信息"""
    error = BracketError("Δ 在区间两端不变号", bracket=(0.0, 1.0), values=(1.0, 2.0))
    assert error.bracket == (0.0, 1.0)


def test_free_energy_nonincreasing_and_sign():
    """𝓕_n 单调不增；亚临界趋于 0，超临界保持正值"""
    sub = discrete.free_energy(two_delta(0.15, K=512), 30)
    sup = discrete.free_energy(two_delta(0.3, K=512), 30)
    assert all(b <= a + 1e-15 for a, b in zip(sub, sub[1:]))
    assert all(b <= a + 1e-15 for a, b in zip(sup, sup[1:]))
    assert sub[-1] < 1e-6
    assert sup[-1] > 0.05


def test_free_energy_initial_value():
    """𝓕_0 = ⟨X_0⟩"""
    assert discrete.free_energy(two_delta(0.3), 0) == [pytest.approx(0.6)]


def test_conditional_tail_is_distribution():
    """条件分布 Q(k)/(1 − Q(0)) 之和为 1"""
    dist = discrete.iterate(two_delta(0.2), steps=4)
    cond = discrete.conditional_tail(dist)
    assert cond.q[0] == 0.0
    assert cond.total == pytest.approx(1.0, abs=1e-12)


def test_conditional_on_degenerate_distribution():
    """Q = δ₀ 时条件分布不存在"""
    with pytest.raises(DegenerateDistributionError):
        discrete.conditional_tail(discrete.delta_distribution(0, 8))
    with pytest.raises(DegenerateDistributionError):
        discrete.conditional_probabilities(discrete.delta_distribution(0, 8), 3)


def test_m_ary_iterate_single_step():
    """三叉递推一步：X' = max(X₁ + X₂ + X₃ − 1, 0)"""
    p = 0.1
    q = discrete.m_ary_iterate(two_delta(p), 3).q
    assert q[5] == pytest.approx(p ** 3)
    assert q[3] == pytest.approx(3 * p * p * (1 - p))
    assert q[1] == pytest.approx(3 * p * (1 - p) ** 2)


def test_iterate_history_length(small_history):
    """QHistory 保留 Q_0..Q_n"""
    assert len(small_history) == 13
    assert small_history.n == 12
    assert small_history.prob(0, 2) == pytest.approx(0.2)
    assert small_history.prob(3, 10 ** 6) == 0.0


# ---- 缩放表示 ----

def test_rescaled_family_two_delta():
    """缩放表示 r(k) = 2^k·Q(k)"""
    fam = ModelFamily(FamilyKind.TWO_DELTA, 0.2)
    dist = discrete.make_rescaled_family(fam, 64)
    assert dist.r[2] == pytest.approx(0.8)
    assert dist.r[0] == pytest.approx(0.8)
    assert dist.nonzero_mass == pytest.approx(0.2)


def test_rescaled_step_matches_plain_iteration():
    """缩放递推与直接递推逐项一致"""
    fam = ModelFamily(FamilyKind.TWO_DELTA, 0.2)
    plain = discrete.iterate(discrete.make_family(fam, K=256), steps=10)
    scaled = discrete.iterate_rescaled(discrete.make_rescaled_family(fam, 256), 10)
    k = np.arange(21)
    assert scaled.n == 10
    assert np.allclose(np.ldexp(scaled.r[:21], -k), plain.q[:21], rtol=1e-9, atol=1e-15)
    assert scaled.nonzero_mass == pytest.approx(plain.nonzero_mass, rel=1e-9)


def test_rescaled_delta_matches_delta():
    """二叉时 Σ(k−1)r(k) 等于 Δ"""
    fam = ModelFamily(FamilyKind.TWO_DELTA, 0.3)
    assert discrete.rescaled_delta(discrete.make_rescaled_family(fam, 64)) == pytest.approx(0.5)


def test_rescaled_delta_recursion():
    """缩放表示下 Δ_{n+1} = H_n(2)·Δ_n，H_n(2) = Σr(k)"""
    fam = ModelFamily(FamilyKind.TWO_DELTA, 0.22)
    dist = discrete.iterate_rescaled(discrete.make_rescaled_family(fam, 512), 3)
    nxt = discrete.rescaled_step(dist)
    expected = math.fsum(dist.r) * discrete.rescaled_delta(dist)
    assert discrete.rescaled_delta(nxt) == pytest.approx(expected, rel=1e-9)


def test_truncated_critical_p_converges_to_closed_form():
    """截断临界点随 K 增大趋于无穷和的临界点"""
    closed = discrete.critical_point('power-law', alpha=6.0).closed_form
    assert discrete.truncated_critical_p(6.0, 4096) == pytest.approx(closed, rel=1e-9)
    assert discrete.truncated_critical_p(3.0, 64) > discrete.truncated_critical_p(3.0, 4096)


def test_rescaled_power_law_is_critical_at_truncated_p():
    """p = p_K 时截断幂律初值恰好在临界流形上"""
    p = discrete.truncated_critical_p(3.0, 1024)
    fam = ModelFamily(FamilyKind.POWER_LAW, p, alpha=3.0)
    dist = discrete.make_rescaled_family(fam, 1024)
    assert discrete.rescaled_delta(dist) == pytest.approx(0.0, abs=1e-12)


def test_rescaled_rejects_non_binary_power_law():
    """幂律族缩放表示只支持二叉"""
    fam = ModelFamily(FamilyKind.POWER_LAW, 1.0, alpha=3.0, arity=3)
    with pytest.raises(InvalidParameterError):
        discrete.make_rescaled_family(fam, 64)


def test_rescaled_distribution_validation():
    """缩放分布要求有限值与合法分叉数"""
    with pytest.raises(InvalidParameterError):
        RescaledDistribution(np.array([1.0, np.nan, 0.0]))
    with pytest.raises(InvalidParameterError):
        RescaledDistribution(np.array([1.0, 0.0, 0.0]), arity=1)


def test_iterate_rescaled_observe_every():
    """observe 回调每 every 步调用一次"""
    fam = ModelFamily(FamilyKind.TWO_DELTA, 0.2)
    seen = []
    discrete.iterate_rescaled(discrete.make_rescaled_family(fam, 256), 12,
                              observe=lambda d: seen.append(d.n), every=4)
    assert seen == [4, 8, 12]
    with pytest.raises(InvalidParameterError):
        discrete.iterate_rescaled(discrete.make_rescaled_family(fam, 256), 1, every=0)


def test_conditional_probabilities_both_representations():
    """两种表示给出相同的条件概率"""
    fam = ModelFamily(FamilyKind.TWO_DELTA, 0.2)
    plain = discrete.iterate(discrete.make_family(fam, K=256), steps=8)
    scaled = discrete.iterate_rescaled(discrete.make_rescaled_family(fam, 256), 8)
    assert np.allclose(discrete.conditional_probabilities(plain, 3),
                       discrete.conditional_probabilities(scaled, 3), rtol=1e-9)


def test_rescaled_profile_shape():
    """(k/n, n²·r(k)) 从 k = 1 开始"""
    fam = ModelFamily(FamilyKind.TWO_DELTA, 0.2)
    dist = discrete.iterate_rescaled(discrete.make_rescaled_family(fam, 128), 4)
    x, scaled = discrete.rescaled_profile(dist)
    assert x[0] == pytest.approx(0.25)
    assert scaled[0] == pytest.approx(16.0 * dist.r[1])
    assert x.size == dist.K


def test_factor_law_reduced_run():
    """n = 200 时 n²(1 − Q_n(0)) 已接近 4"""
    fam = ModelFamily(FamilyKind.TWO_DELTA, 0.2)
    dist = discrete.iterate_rescaled(discrete.make_rescaled_family(fam, 3200), 200)
    assert 3.0 < 200 ** 2 * dist.nonzero_mass < 5.0


@pytest.mark.slow
def test_factor_law_and_conditional_law_at_n_2000():
    """n = 2000：n²(1 − Q_n(0)) 距 4 在 10% 内，条件概率距 2^{−k} 在 2% 内"""
    fam = ModelFamily(FamilyKind.TWO_DELTA, 0.2)
    dist = discrete.iterate_rescaled(discrete.make_rescaled_family(fam, 32000), 2000)
    assert 2000 ** 2 * dist.nonzero_mass == pytest.approx(4.0, rel=0.10)
    cond = discrete.conditional_probabilities(dist, 3)
    assert np.allclose(cond, [0.5, 0.25, 0.125], rtol=0.02)


@pytest.mark.slow
def test_power_law_factor_law_alpha_3():
    """α = 3 的幂律族：n²(1 − Q_n(0)) 趋于 α(α−2)/2 = 3/2"""
    K = 64000
    fam = ModelFamily(FamilyKind.POWER_LAW, discrete.truncated_critical_p(3.0, K), alpha=3.0)
    dist = discrete.iterate_rescaled(discrete.make_rescaled_family(fam, K), 2000)
    assert 2000 ** 2 * dist.nonzero_mass == pytest.approx(1.5, rel=0.10)


@pytest.mark.slow
def test_m_ary_factor_law():
    """三叉 two-delta：n²(1 − Q_n(0)) 趋于 4/(m−1)² = 1"""
    fam = ModelFamily(FamilyKind.TWO_DELTA, 1.0 / 28.0, arity=3)
    dist = discrete.iterate_rescaled(discrete.make_rescaled_family(fam, 16000), 1000)
    assert 1000 ** 2 * dist.nonzero_mass == pytest.approx(1.0, rel=0.10)
