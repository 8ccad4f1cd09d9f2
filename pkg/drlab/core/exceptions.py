"""自定义异常类"""


class DRLabError(Exception):
    """基础异常类"""
    pass


class InvalidParameterError(DRLabError):
    """参数非法"""
    def __init__(self, message, field=None, value=None):
        self.field = field
        self.value = value
        super().__init__(message)


class DivergenceError(DRLabError):
    """级数或积分发散（截断尾部估计过大）"""
    def __init__(self, message, tail_estimate=None):
        self.tail_estimate = tail_estimate
        super().__init__(message)


class PoleError(DRLabError):
    """在极点处求值"""
    def __init__(self, message, argument=None):
        self.argument = argument
        super().__init__(message)


class BracketError(DRLabError):
    """二分区间两端不变号或非单调"""
    def __init__(self, message, bracket=None, values=None):
        self.bracket = bracket
        self.values = values
        super().__init__(message)


class BlowUpSignal(DRLabError):
    """解在有限时间爆破"""
    def __init__(self, message, time=None, max_value=None):
        self.time = time
        self.max_value = max_value
        super().__init__(message)


class NumericalOverflowError(DRLabError):
    """数值溢出（出现 NaN 或 inf）"""
    def __init__(self, message, time=None):
        self.time = time
        super().__init__(message)


class RateCollisionError(DRLabError):
    """指数和中两个速率过于接近"""
    def __init__(self, message, index_pair=None, time=None):
        self.index_pair = index_pair
        self.time = time
        super().__init__(message)


class BranchError(DRLabError):
    """闭式解的根式为负（分支不存在）"""
    def __init__(self, message, time=None):
        self.time = time
        super().__init__(message)


class SupportError(DRLabError):
    """取值不在分布支撑内"""
    def __init__(self, message, level=None, value=None):
        self.level = level
        self.value = value
        super().__init__(message)


class DegenerateDistributionError(DRLabError):
    """分布退化为 δ₀"""
    pass


class ProfileInstabilityError(DRLabError):
    """标度函数积分失稳"""
    def __init__(self, message, x=None):
        self.x = x
        super().__init__(message)


class ProfileDomainError(DRLabError):
    """自变量超出标度函数可求值范围"""
    def __init__(self, message, argument=None):
        self.argument = argument
        super().__init__(message)


class SeriesConditionError(DRLabError):
    """正性级数的收敛条件不满足"""
    def __init__(self, message, worst=None):
        self.worst = worst
        super().__init__(message)


class ProbabilityConservationError(DRLabError):
    """分支概率之和偏离 1"""
    def __init__(self, message, total=None):
        self.total = total
        super().__init__(message)


class ConfigValidationError(DRLabError):
    """实验配置校验失败"""
    def __init__(self, message, field=None):
        self.field = field
        super().__init__(f"{field}: {message}" if field else message)
