"""模型定义模块"""

from drlab.models.types import (
    FamilyKind,
    Variant,
    BlowupMonitor,
    RegimeKind,
    ExperimentKind,
    RealOrder,
    ModelFamily,
    DiscreteDistribution,
    QHistory,
    RescaledDistribution,
    GridFunction,
    EvolutionConfig,
    ScalingProfile,
    ExponentialSum,
    TreeStatistics,
    AcceptanceCheck,
    ExperimentResult
)

__all__ = [
    'FamilyKind',
    'Variant',
    'BlowupMonitor',
    'RegimeKind',
    'ExperimentKind',
    'RealOrder',
    'ModelFamily',
    'DiscreteDistribution',
    'QHistory',
    'RescaledDistribution',
    'GridFunction',
    'EvolutionConfig',
    'ScalingProfile',
    'ExponentialSum',
    'TreeStatistics',
    'AcceptanceCheck',
    'ExperimentResult'
]
