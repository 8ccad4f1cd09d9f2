"""测试扰动区间分类器"""

import json

import pytest

from drlab.core.classifier import RegimeClassifier
from drlab.core.exceptions import InvalidParameterError
from drlab.models.types import RegimeKind


def test_classify_irrelevant():
    """γ < 0 时扰动衰减"""
    classifier = RegimeClassifier()

    record = classifier.classify(1.5, -1.0)
    assert record.kind == RegimeKind.IRRELEVANT
    assert record.exponent is None
    assert not record.boundary


def test_classify_marginal():
    """γ = 0 是端点"""
    classifier = RegimeClassifier()

    record = classifier.classify(1.5, 0.0)
    assert record.kind == RegimeKind.MARGINAL
    assert record.boundary


def test_classify_relevant_on_manifold():
    """0 < γ < 2β−1 时尾部指数为 1+2β−γ"""
    classifier = RegimeClassifier()

    record = classifier.classify(1.5, 1.0)
    assert record.kind == RegimeKind.RELEVANT_ON_MANIFOLD
    assert record.exponent == pytest.approx(3.0)


def test_classify_off_manifold():
    """γ = 2β−1 时 t_c 指数为 1/(2β−1)"""
    classifier = RegimeClassifier()

    record = classifier.classify(1.5, 2.0)
    assert record.kind == RegimeKind.OFF_MANIFOLD
    assert record.exponent == pytest.approx(0.5)
    assert record.boundary


def test_classify_heavy_tail():
    """γ > 2β−1 时自由能指数为 1/(γ−2β+1)"""
    classifier = RegimeClassifier()

    record = classifier.classify(1.5, 3.0)
    assert record.kind == RegimeKind.HEAVY_TAIL
    assert record.exponent == pytest.approx(1.0)


def test_boundary_tolerance():
    """端点附近 1e-12 仍视为端点，1e-6 不算"""
    classifier = RegimeClassifier()

    assert classifier.classify(1.25, 1.5 + 1e-12).kind == RegimeKind.OFF_MANIFOLD
    assert classifier.classify(1.25, 1.5 + 1e-6).kind == RegimeKind.HEAVY_TAIL
    assert classifier.classify(1.25, -1e-6).kind == RegimeKind.IRRELEVANT


def test_rejects_small_beta():
    """β ≤ 1/2 没有标度函数"""
    classifier = RegimeClassifier()

    with pytest.raises(InvalidParameterError):
        classifier.classify(0.5, 0.0)


def test_classify_batch_and_statistics():
    """测试批量分类与统计"""
    classifier = RegimeClassifier()
    pairs = [(1.5, -1.0), (1.5, -0.5), (1.5, 0.0), (1.5, 1.0), (1.5, 2.0), (1.5, 3.0)]

    records = classifier.classify_batch(pairs)
    assert [r.kind for r in records][:2] == [RegimeKind.IRRELEVANT, RegimeKind.IRRELEVANT]

    stats = classifier.get_statistics(pairs)
    assert stats == {
        'irrelevant': 2,
        'marginal': 1,
        'relevant-on-manifold': 1,
        'off-manifold': 1,
        'heavy-tail': 1
    }


def test_record_to_dict():
    record = RegimeClassifier().classify(2.0, 1.0)
    data = record.to_dict()
    assert data['kind'] == 'relevant-on-manifold'
    assert data['beta'] == 2.0
    assert data['exponent'] == pytest.approx(4.0)


def test_save_and_load_rules(tmp_path):
    """测试规则保存与加载"""
    rules_file = tmp_path / "rules.json"
    RegimeClassifier().save_rules(str(rules_file))

    saved = json.loads(rules_file.read_text(encoding='utf-8'))
    assert set(saved) == set(RegimeClassifier.DEFAULT_RULES)

    loaded = RegimeClassifier.from_file(str(rules_file))
    assert loaded.classify(1.5, 2.0).kind == RegimeKind.OFF_MANIFOLD


def test_custom_rules_unknown_anchor():
    """未知锚点名报错"""
    rules = {'irrelevant': {'lower': None, 'upper': 'origin', 'exponent': None}}
    with pytest.raises(InvalidParameterError):
        RegimeClassifier(rules).classify(1.5, -1.0)


def test_custom_rules_without_coverage():
    """规则不覆盖 γ 时报错"""
    rules = {'irrelevant': dict(RegimeClassifier.DEFAULT_RULES['irrelevant'])}
    classifier = RegimeClassifier(rules)
    assert classifier.classify(1.5, -2.0).kind == RegimeKind.IRRELEVANT
    with pytest.raises(InvalidParameterError):
        classifier.classify(1.5, 1.0)
