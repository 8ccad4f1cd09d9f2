"""核心模块"""

from .exceptions import (
    DRLabError,
    InvalidParameterError,
    DivergenceError,
    PoleError,
    BracketError,
    BlowUpSignal,
    SupportError
)

__all__ = [
    'DRLabError',
    'InvalidParameterError',
    'DivergenceError',
    'PoleError',
    'BracketError',
    'BlowUpSignal',
    'SupportError'
]
