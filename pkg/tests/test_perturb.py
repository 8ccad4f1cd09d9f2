"""测试线性化扰动"""

import numpy as np
import pytest

from drlab import constants
from drlab.core import perturb
from drlab.core.exceptions import InvalidParameterError
from drlab.models.types import RegimeKind


Q = np.geomspace(0.1, 10.0, 25)


class TestClosedForms:
    """积分表示与闭式"""

    @pytest.mark.parametrize("beta,gamma", [(1.5, 2.0), (2.5, 4.0)])
    def test_rational_eigenfunctions(self, beta, gamma):
        """(3/2, 2) 与 (5/2, 4) 的有理闭式"""
        numeric = perturb.eigenfunction(beta, gamma, 1.0, Q)
        closed = perturb.special_eigenfunction(beta, gamma, 1.0, Q)
        assert np.max(np.abs(numeric - closed)) < constants.EIGENFUNCTION_TOL

    def test_time_shift_mode(self):
        """γ = −1 为时间平移模"""
        numeric = perturb.eigenfunction(1.3, -1.0, 1.0, Q)
        assert np.allclose(numeric, perturb.time_shift_mode(1.3, 1.0, Q), rtol=1e-6, atol=0)

    def test_family_mode(self):
        """γ = 0 为沿标度函数族的移动"""
        numeric = perturb.eigenfunction(1.3, 0.0, 1.0, Q)
        assert np.allclose(numeric, perturb.family_mode(1.3, 1.0, Q), rtol=1e-4, atol=0)

    def test_G0_scales_linearly(self):
        assert perturb.eigenfunction(1.5, 2.0, 3.0, 1.0) == pytest.approx(3.0 * 5.0 / 9.0, rel=1e-8)

    def test_tabulate(self):
        table = perturb.tabulate(1.5, 2.0, 1.0, [0.5, 1.0])
        rows = table.rows()
        assert len(rows) == 2
        assert rows[1][0] == 1.0
        assert rows[1][1] == pytest.approx(5.0 / 9.0, rel=1e-8)

    def test_unregistered_closed_form(self):
        with pytest.raises(InvalidParameterError):
            perturb.special_eigenfunction(1.3, 2.0, 1.0, Q)

    def test_rejects_nonpositive_q(self):
        with pytest.raises(InvalidParameterError):
            perturb.eigenfunction(1.5, 2.0, 1.0, [0.0, 1.0])


class TestLinearizedEquation:
    """G̃_γ 满足的线性方程"""

    @pytest.mark.parametrize("beta,gamma,tol", [(1.5, 2.0, 1e-6), (1.3229, 0.5, 1e-5)])
    def test_ode_residual(self, beta, gamma, tol):
        for q in (0.5, 1.0, 3.0):
            assert abs(perturb.ode_residual(beta, gamma, 1.0, q)) < tol

    def test_ode_residual_rejects_nonpositive_q(self):
        with pytest.raises(InvalidParameterError):
            perturb.ode_residual(1.5, 2.0, 1.0, 0.0)


class TestSmallQ:
    """q → 0 的行为"""

    def test_small_q_limit(self):
        """G̃_γ(0⁺) = G0/(2β−γ)"""
        limit = perturb.small_q_limit(1.5, 1.0, 1.0)
        assert limit == pytest.approx(0.5)
        assert perturb.eigenfunction(1.5, 1.0, 1.0, 1e-3) == pytest.approx(limit, abs=1e-4)

    def test_small_q_limit_diverges(self):
        with pytest.raises(InvalidParameterError):
            perturb.small_q_limit(1.5, 3.0, 1.0)

    @pytest.mark.parametrize("gamma", [2.0, 3.0])
    def test_d_amplitude_matches_fit(self, gamma):
        """d(β,γ) 的积分公式与小 q 拟合相差 1% 以内"""
        analytic = perturb.d_amplitude(1.25, gamma)
        fitted = perturb.fit_d_amplitude(1.25, gamma)
        assert fitted == pytest.approx(analytic, rel=1e-2)

    def test_d_amplitude_outside_known_sectors(self):
        with pytest.raises(InvalidParameterError):
            perturb.d_amplitude(1.25, 0.5)

    @pytest.mark.parametrize("beta,gamma", [(0.4, 0.0), (0.45, -0.05)])
    def test_d_amplitude_rejects_non_positive_gamma(self, beta, gamma):
        """−1 < γ−2β < 0 但 γ ≤ 0 时减法公式不收敛"""
        with pytest.raises(InvalidParameterError) as exc_info:
            perturb.d_amplitude(beta, gamma)
        assert exc_info.value.field == 'gamma'

    def test_no_linear_term_on_manifold(self):
        """0 < γ < 2β−1 时没有线性项"""
        assert abs(perturb.linear_term(1.5, 0.5)) < constants.LINEAR_TERM_TOL

    def test_decay_onset(self):
        """(3/2, 2) 的闭式从 q = 0 起单调衰减"""
        onset = perturb.decay_onset(1.5, 2.0, 1.0)
        assert np.isfinite(onset)
        assert onset == pytest.approx(1e-2)


def test_classify_delegates_to_classifier():
    """分类结果带上 (β, γ)"""
    record = perturb.classify(1.5, 1.0)
    assert record.kind == RegimeKind.RELEVANT_ON_MANIFOLD
    assert record.beta == 1.5
    assert perturb.classify(1.5, 2.0).boundary
