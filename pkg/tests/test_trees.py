"""测试随机树"""

import math

import numpy as np
import pytest
from scipy import integrate

from drlab import constants
from drlab.core import scaling, trees
from drlab.core.exceptions import InvalidParameterError, ProfileDomainError, SupportError
from drlab.models.types import TreeStatistics


class TestDiscreteBranching:
    """离散模型的分支律"""

    def test_step_probabilities_sum_to_one(self, small_history):
        step = trees.branch_step_distribution(small_history, 6, 3)
        assert abs(step.total - 1.0) <= constants.PROBABILITY_TOL
        assert len(step.pairs) == 3
        assert all(a + b == 4 for a, b in step.pairs)
        law = step.conditional_law()
        assert law.sum() == pytest.approx(1.0)

    def test_unreachable_value(self, small_history):
        """Q_1(2) = 0"""
        with pytest.raises(SupportError):
            trees.branch_step_distribution(small_history, 1, 2)
        with pytest.raises(SupportError):
            trees.branch_step_distribution(small_history, 0, 1)

    def test_no_branching_is_product_of_steps(self, small_history):
        """P_{m',m}(X) 等于沿根链的不分叉概率之积"""
        m, X = 10, 3
        product = 1.0
        for k in range(4):
            product *= trees.branch_step_distribution(small_history, m - k, X + k).p_nobranch
        assert trees.no_branching_prob(small_history, m - 4, m, X) == pytest.approx(product, rel=1e-10)
        assert trees.no_branching_prob(small_history, m, m, X) == 1.0

    def test_no_branching_rejects_bad_levels(self, small_history):
        with pytest.raises(SupportError):
            trees.no_branching_prob(small_history, 8, 6, 3)


class TestDiscreteSampling:
    """离散树抽样"""

    def test_sample_is_reproducible(self, small_history):
        first = trees.sample_discrete_tree(small_history, 12, 3, seed=11, index=4)
        second = trees.sample_discrete_tree(small_history, 12, 3, seed=11, index=4)
        assert first.to_dict() == second.to_dict()

    def test_leaves_sit_in_support(self, small_history):
        """叶子都在第 0 层，取值只能是 2（Q_0 的非零支撑）"""
        sampler = trees.DiscreteTreeSampler(small_history)
        for i in range(20):
            root = sampler.sample(12, 3, seed=3, index=i)
            leaves = root.leaves()
            assert all(leaf.level == 0 for leaf in leaves)
            assert all(leaf.value == 2 for leaf in leaves)
        assert sampler.max_conservation_error() <= constants.PROBABILITY_TOL

    def test_children_follow_recursion(self, small_history):
        root = trees.sample_discrete_tree(small_history, 12, 3, seed=5)
        for node in root.iter_nodes():
            if len(node.children) == 1:
                assert node.children[0].value == node.value + 1
            elif len(node.children) == 2:
                assert node.children[0].value + node.children[1].value == node.value + 1

    def test_empirical_no_branching(self, small_history):
        """Monte Carlo 频率与精确值在 5 个标准误差内"""
        exact = trees.no_branching_prob(small_history, 6, 12, 3)
        freq, se = trees.empirical_no_branching(small_history, 12, 3, 6, 2000, seed=1)
        assert abs(freq - exact) < 5 * se + 1e-3


class TestContinuousLimit:
    """标度极限下的树"""

    profile = scaling.exponential_profile()

    def test_no_branching_closed_form(self):
        """指数剖面：ψ = (t/t')²·exp(−2(t−t')(x+t)/(tt'))"""
        psi = trees.continuous_no_branching(self.profile, 0.5, 1.0, 0.3)
        assert psi == pytest.approx(4.0 * math.exp(-2.0 * 0.5 * 1.3 / 0.5))
        assert trees.continuous_no_branching(self.profile, 1.0, 1.0, 0.3) == 1.0

    @pytest.mark.parametrize("t_prime", [0.2, 0.5, 0.9])
    def test_survival_matches_rate_integral(self, t_prime):
        """exp(−∫rate) 与 ψ 一致"""
        psi = trees.continuous_no_branching(self.profile, t_prime, 1.0, 0.4)
        assert trees.survival_by_quadrature(self.profile, 0.4, 1.0, t_prime) == pytest.approx(psi, rel=1e-9)

    def test_no_branching_domain(self):
        with pytest.raises(ProfileDomainError):
            trees.continuous_no_branching(self.profile, 1.5, 1.0, 0.3)
        with pytest.raises(ProfileDomainError):
            trees.continuous_no_branching(self.profile, 0.5, 1.0, -0.1)

    def test_branching_rate_exponential(self):
        assert trees.branching_rate(self.profile, 0.5, 1.0) == pytest.approx(8.0)

    def test_sample_conserves_mass(self):
        """分叉时子节点质量之和 = μ + (t − t')"""
        sampler = trees.ContinuousTreeSampler(self.profile, cutoff_fraction=1e-2)
        root = sampler.sample(1.0, 1.0, seed=2)
        for node in root.iter_nodes():
            if node.children:
                left, right = node.children
                assert left.time == right.time < node.time
                assert left.mass + right.mass == pytest.approx(node.mass + node.time - left.time)
                assert left.mass >= 0 and right.mass >= 0
        assert sampler.majorant_violations == 0

    def test_sample_is_reproducible(self):
        first = trees.sample_continuous_tree(self.profile, 1.0, 1.0, seed=9, index=2, cutoff_fraction=1e-2)
        second = trees.sample_continuous_tree(self.profile, 1.0, 1.0, seed=9, index=2, cutoff_fraction=1e-2)
        assert first.to_dict() == second.to_dict()

    def test_split_is_uniform_for_exponential(self):
        sampler = trees.ContinuousTreeSampler(self.profile)
        rng = trees.make_rng(0)
        draws = np.array([sampler.split(2.0, 0.5, rng) for _ in range(2000)])
        assert draws.min() >= 0.0 and draws.max() <= 2.0
        assert draws.mean() == pytest.approx(1.0, abs=0.1)

    def test_sample_rejects_bad_root(self):
        with pytest.raises(ProfileDomainError):
            trees.ContinuousTreeSampler(self.profile).sample(1.0, 0.0, seed=0)

    def test_default_arguments_sample(self):
        """默认截断下能抽出整棵树，叶子截断在 t_min"""
        root = trees.sample_continuous_tree(self.profile, 1.0, 1.0, seed=0)
        t_min = constants.CONTINUOUS_CUTOFF_FRACTION
        for node in root.iter_nodes():
            if node.children:
                assert node.end_time is None
            else:
                assert node.end_time == pytest.approx(t_min)
                assert node.time > t_min
        assert root.leaves()[0].to_dict()['end_time'] == pytest.approx(t_min)

    @pytest.mark.parametrize("cutoff", [0.0, 1.0, -0.1])
    def test_rejects_bad_cutoff(self, cutoff):
        with pytest.raises(InvalidParameterError) as exc_info:
            trees.ContinuousTreeSampler(self.profile, cutoff_fraction=cutoff)
        assert exc_info.value.field == 'cutoff_fraction'

    def test_thinning_matches_no_branching(self):
        """稀疏化抽样的首次分叉分布与 ψ = exp(−∫rate) 一致"""
        psi = trees.continuous_no_branching(self.profile, 0.5, 1.0, 0.4)
        freq, se = trees.empirical_continuous_no_branching(self.profile, 0.4, 1.0, 0.5, 4000, seed=7)
        assert abs(freq - psi) < 5 * se

    def test_empirical_no_branching_domain(self):
        with pytest.raises(ProfileDomainError):
            trees.empirical_continuous_no_branching(self.profile, 0.4, 1.0, 1.0, 10, seed=0)


@pytest.fixture(scope="module")
def small_F0_profile():
    """F0 = 0.2 的数值标度函数"""
    return scaling.solve_profile(0.2, L=10.0, dx=1e-2)


class TestSolvedProfileTrees:
    """数值标度函数驱动的连续树"""

    def test_rate_integral_matches_no_branching(self, small_F0_profile):
        """一般剖面上 exp(−∫rate) 与 ψ 一致"""
        psi = trees.continuous_no_branching(small_F0_profile, 0.5, 1.0, 1.0)
        survival = trees.survival_by_quadrature(small_F0_profile, 1.0, 1.0, 0.5)
        assert survival == pytest.approx(psi, rel=1e-4)
        assert 0.0 < psi < 1.0

    def test_sampler_no_branching_frequency(self, small_F0_profile):
        """抽样得到的不分叉频率与 ψ 在 5 个标准误差内"""
        psi = trees.continuous_no_branching(small_F0_profile, 0.5, 1.0, 1.0)
        freq, se = trees.empirical_continuous_no_branching(small_F0_profile, 1.0, 1.0, 0.5, 2000, seed=3)
        assert abs(freq - psi) < 5 * se + 1e-3

    def test_split_histogram_follows_profile(self, small_F0_profile):
        """分裂点的直方图服从 F(x1/t')F((μ−x1)/t') 的归一化密度"""
        sampler = trees.ContinuousTreeSampler(small_F0_profile)
        mass, t_prime, count = 2.0, 0.5, 4000
        rng = trees.make_rng(5)
        draws = np.array([sampler.split(mass, t_prime, rng) for _ in range(count)])

        def density(x1):
            return (scaling.evaluate(small_F0_profile, x1 / t_prime)
                    * scaling.evaluate(small_F0_profile, (mass - x1) / t_prime))

        edges = np.linspace(0.0, mass, 9)
        total, _ = integrate.quad(density, 0.0, mass)
        counts, _ = np.histogram(draws, bins=edges)
        for lo, hi, observed in zip(edges[:-1], edges[1:], counts):
            p = integrate.quad(density, lo, hi)[0] / total
            assert abs(observed - count * p) < 5 * math.sqrt(count * p * (1 - p)) + 1

    def test_small_F0_rarely_branches(self):
        """F0 → 0 时分叉率为 O(F0)，几乎所有树都不分叉"""
        profile = scaling.solve_profile(1e-3, L=25.0, dx=1e-2)
        trees_count = 400
        unbranched = sum(1 for i in range(trees_count)
                         if not trees.sample_continuous_tree(profile, 1.0, 1.0, seed=13, index=i,
                                                             cutoff_fraction=0.1).children)
        assert unbranched / trees_count >= 0.99


class TestStatistics:
    """树统计"""

    def test_statistics_and_merge(self, small_history):
        sampler = trees.DiscreteTreeSampler(small_history)
        first = trees.tree_statistics(sampler.sample(12, 3, 0, i) for i in range(10))
        second = trees.tree_statistics(sampler.sample(12, 3, 0, i) for i in range(10, 30))
        merged = first.merge(second)
        assert merged.trees == 30
        assert sum(merged.leaf_counts.values()) == 30
        summary = merged.summary()
        assert sum(summary['leaf_frequency'].values()) == pytest.approx(1.0)
        assert summary['mean_leaves'] >= 1.0

    def test_identical_samples_are_indistinguishable(self, small_history):
        sampler = trees.DiscreteTreeSampler(small_history)
        stats = trees.tree_statistics(sampler.sample(12, 3, 0, i) for i in range(20))
        assert trees.leaf_count_test(stats, stats) == pytest.approx(1.0)

    def test_empty_statistics(self):
        summary = TreeStatistics().summary()
        assert summary['trees'] == 0
        assert summary['mean_leaves'] == 0.0


class TestDiscreteVersusContinuous:
    """离散与连续的对比"""

    def test_no_branching_comparison_layout(self, small_history):
        profile = scaling.exponential_profile()
        result = trees.compare_no_branching(small_history, 12, 3, profile)
        assert np.all((result['ratio'] >= 0.75) & (result['ratio'] <= 1.0))
        assert result['discrete'].shape == result['continuous'].shape
        assert result['discrete'][-1] == pytest.approx(1.0)
        assert result['continuous'][-1] == pytest.approx(1.0)

    def test_split_law_comparison_layout(self, small_history):
        profile = scaling.exponential_profile()
        result = trees.compare_split_law(small_history, 10, 9, profile)
        assert result['x1'].size > 0
        assert np.all(result['discrete'] >= 0)
        assert np.all(np.isfinite(result['rel_error']))
