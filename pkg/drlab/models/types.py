"""类型定义模块 - 使用dataclass标准化数据结构"""

import math
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Tuple
from enum import Enum

import numpy as np

from drlab import constants
from drlab.core.exceptions import InvalidParameterError


class FamilyKind(Enum):
    """初始分布族枚举"""
    TWO_DELTA = "two-delta"
    POWER_LAW = "power-law"
    LOG_CORRECTED = "log-corrected"
    CUSTOM = "custom"


class Variant(Enum):
    """凝聚方程变体"""
    STANDARD = "standard"
    HMP = "hmp"


class BlowupMonitor(Enum):
    """爆破监测量"""
    ORIGIN = "origin"
    MAX = "max"


class RegimeKind(Enum):
    """扰动分类"""
    IRRELEVANT = "irrelevant"
    MARGINAL = "marginal"
    RELEVANT_ON_MANIFOLD = "relevant-on-manifold"
    OFF_MANIFOLD = "off-manifold"
    HEAVY_TAIL = "heavy-tail"


class ExperimentKind(Enum):
    """实验类型"""
    FIG2 = "fig2"
    FIG3 = "fig3"
    FIG5 = "fig5"
    FIG6 = "fig6"
    FIG7 = "fig7"
    FIG8 = "fig8"
    CRITICAL_POINT = "critical-point"
    PDE_RUN = "pde-run"
    SCALING_PROFILE = "scaling-profile"
    TREE_SAMPLE = "tree-sample"
    NU_WINDOW = "nu-window"


# ============================================
# 特殊函数
# ============================================

@dataclass(frozen=True)
class RealOrder:
    """修正 Bessel 函数的实阶数 β"""
    beta: float

    def __post_init__(self):
        if not math.isfinite(self.beta) or self.beta <= 0:
            raise InvalidParameterError(f"阶数必须为有限正数: {self.beta}", field='beta', value=self.beta)

    @property
    def nearest_integer(self) -> int:
        return int(round(self.beta))

    @property
    def near_integer(self) -> bool:
        """β 是否在整数的 NEAR_INTEGER_TOL 范围内"""
        return abs(self.beta - self.nearest_integer) < constants.NEAR_INTEGER_TOL


# ============================================
# 离散递推
# ============================================

@dataclass
class ModelFamily:
    """参数化初始分布族"""
    kind: FamilyKind
    p: float
    alpha: Optional[float] = None
    alpha_log: float = 0.0
    arity: int = 2

    def __post_init__(self):
        if isinstance(self.kind, str):
            self.kind = FamilyKind(self.kind)
        if not math.isfinite(self.p) or self.p < 0:
            raise InvalidParameterError(f"p 必须非负: {self.p}", field='p', value=self.p)
        if self.kind == FamilyKind.TWO_DELTA and self.p > 1:
            raise InvalidParameterError(f"two-delta 族要求 p ∈ [0,1]: {self.p}", field='p', value=self.p)
        if self.kind in (FamilyKind.POWER_LAW, FamilyKind.LOG_CORRECTED):
            if self.alpha is None or self.alpha <= 1:
                raise InvalidParameterError(f"幂律族要求 α > 1: {self.alpha}", field='alpha', value=self.alpha)
        if self.arity < 2:
            raise InvalidParameterError(f"分叉数必须 ≥ 2: {self.arity}", field='arity', value=self.arity)

    def with_p(self, p: float) -> 'ModelFamily':
        """返回仅修改 p 的副本"""
        return ModelFamily(self.kind, p, self.alpha, self.alpha_log, self.arity)

    def to_dict(self) -> Dict:
        """转换为字典"""
        return {
            'kind': self.kind.value,
            'p': self.p,
            'alpha': self.alpha,
            'alpha_log': self.alpha_log,
            'arity': self.arity
        }

    @classmethod
    def from_dict(cls, data: Dict) -> 'ModelFamily':
        """从字典创建"""
        return cls(
            kind=FamilyKind(data['kind']),
            p=float(data['p']),
            alpha=data.get('alpha'),
            alpha_log=data.get('alpha_log', 0.0),
            arity=data.get('arity', 2)
        )


@dataclass
class DiscreteDistribution:
    """
    截断概率向量 Q(k), k = 0..K

    overflow 记录被推到 K 以上的概率质量，overflow_mean 为该部分的
    期望贡献 Σ_{k>K} k·Q(k)。两者共同保证归一化与自由能在截断下仍然精确。
    """
    q: np.ndarray
    n: int = 0
    family: Optional[ModelFamily] = None
    overflow: float = 0.0
    overflow_mean: float = 0.0

    def __post_init__(self):
        self.q = np.asarray(self.q, dtype=float)
        if self.q.ndim != 1 or self.q.size < 2:
            raise InvalidParameterError("分布至少需要 K ≥ 1", field='K', value=self.q.size - 1)
        if not np.all(np.isfinite(self.q)):
            raise InvalidParameterError("分布含有非有限值", field='q')
        if self.q.min() < -constants.PROBABILITY_TOL or self.overflow < -constants.PROBABILITY_TOL:
            raise InvalidParameterError(f"分布含有负概率: {self.q.min()}", field='q')
        total = self.total
        if abs(total - 1.0) > constants.PROBABILITY_TOL:
            raise InvalidParameterError(f"概率之和偏离 1: {total!r}", field='q', value=total)

    @property
    def K(self) -> int:
        return self.q.size - 1

    @property
    def total(self) -> float:
        return math.fsum(self.q) + self.overflow

    @property
    def nonzero_mass(self) -> float:
        """1 − Q(0)，不经过 1 − Q(0) 的相减以保留小量精度"""
        return math.fsum(self.q[1:]) + self.overflow

    def to_dict(self) -> Dict:
        """元数据（不含概率向量）"""
        return {
            'n': self.n,
            'family': self.family.kind.value if self.family else 'custom',
            'p': self.family.p if self.family else None,
            'K': self.K,
            'tail_mass': self.overflow
        }


@dataclass
class CriticalPointResult:
    """临界点求解结果"""
    p_c: float
    closed_form: Optional[float]
    iterations: int
    bracket: Tuple[float, float]
    delta_at_root: float
    family: ModelFamily

    def to_dict(self) -> Dict:
        """转换为字典"""
        return {
            'p_c': self.p_c,
            'closed_form': self.closed_form,
            'iterations': self.iterations,
            'bracket': list(self.bracket),
            'delta_at_root': self.delta_at_root,
            'family': self.family.to_dict()
        }


@dataclass
class QHistory:
    """前向迭代保留的分布序列 Q_0..Q_n"""
    distributions: List[DiscreteDistribution] = field(default_factory=list)

    def __getitem__(self, m: int) -> DiscreteDistribution:
        return self.distributions[m]

    def __len__(self) -> int:
        return len(self.distributions)

    @property
    def n(self) -> int:
        return len(self.distributions) - 1

    def prob(self, m: int, k: int) -> float:
        """Q_m(k)，超出截断时返回 0"""
        q = self.distributions[m].q
        if k < 0 or k >= q.size:
            return 0.0
        return float(q[k])


@dataclass
class RescaledDistribution:
    """
    缩放表示 r(k) = m^k·Q(k)（m 为分叉数）

    临界附近 Q_n(k) ~ m^{−k}，二叉时 k 超过约 1074 后 Q 下溢为 0；r 保持 O(1/n²)，
    长时间迭代（n ~ 10³）需要这种表示。r[0] 即 Q(0)。
    """
    r: np.ndarray
    n: int = 0
    family: Optional[ModelFamily] = None
    arity: int = 2

    def __post_init__(self):
        self.r = np.asarray(self.r, dtype=float)
        if self.r.ndim != 1 or self.r.size < 3:
            raise InvalidParameterError("缩放分布至少需要 K ≥ 2", field='K', value=self.r.size - 1)
        if not np.all(np.isfinite(self.r)):
            raise InvalidParameterError("缩放分布含有非有限值", field='r')
        if self.arity < 2:
            raise InvalidParameterError(f"分叉数必须 ≥ 2: {self.arity}", field='arity', value=self.arity)

    @property
    def K(self) -> int:
        return self.r.size - 1

    def weights(self) -> np.ndarray:
        """m^{−k}，k = 0..K"""
        k = np.arange(self.r.size)
        if self.arity == 2:
            return np.ldexp(1.0, -k)
        return np.power(float(self.arity), -k.astype(float))

    @property
    def nonzero_mass(self) -> float:
        """1 − Q(0) = Σ_{k≥1} m^{−k}·r(k)"""
        return math.fsum((self.r * self.weights())[1:])

    def prob(self, k: int) -> float:
        if k < 0 or k > self.K:
            return 0.0
        if self.arity == 2:
            return math.ldexp(float(self.r[k]), -k)
        return float(self.r[k]) * float(self.arity) ** (-k)


# ============================================
# PDE 演化
# ============================================

@dataclass
class GridFunction:
    """均匀网格 x_i = i·dx 上的函数快照"""
    values: np.ndarray
    dx: float
    t: float = 0.0

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.dx <= 0:
            raise InvalidParameterError(f"网格步长必须为正: {self.dx}", field='dx', value=self.dx)

    @property
    def N(self) -> int:
        return self.values.size - 1

    @property
    def length(self) -> float:
        return self.N * self.dx

    @property
    def x(self) -> np.ndarray:
        return self.dx * np.arange(self.values.size)

    def at_origin(self) -> float:
        return float(self.values[0])

    def to_dict(self) -> Dict:
        """元数据"""
        return {'t': self.t, 'dx': self.dx, 'L': self.length, 'N': self.N}


@dataclass
class EvolutionConfig:
    """PDE 演化参数（dt 等于 dx）"""
    dt: float
    variant: Variant = Variant.STANDARD
    blowup_threshold: float = constants.DEFAULT_BLOWUP_THRESHOLD
    monitor: BlowupMonitor = BlowupMonitor.ORIGIN
    use_fft: bool = False
    record_every: int = 1

    def __post_init__(self):
        if isinstance(self.variant, str):
            self.variant = Variant(self.variant)
        if isinstance(self.monitor, str):
            self.monitor = BlowupMonitor(self.monitor)
        if self.dt <= 0:
            raise InvalidParameterError(f"dt 必须为正: {self.dt}", field='dt', value=self.dt)

    def to_dict(self) -> Dict:
        return {
            'dt': self.dt,
            'variant': self.variant.value,
            'blowup_threshold': self.blowup_threshold,
            'monitor': self.monitor.value,
            'use_fft': self.use_fft
        }


@dataclass
class BlowupResult:
    """爆破检测结果，t_c 为 None 表示视界内未爆破"""
    t_c: Optional[float]
    crossing_time: Optional[float] = None
    monitor: BlowupMonitor = BlowupMonitor.ORIGIN
    horizon: float = 0.0

    @property
    def blew_up(self) -> bool:
        return self.t_c is not None

    def to_dict(self) -> Dict:
        return {
            't_c': self.t_c,
            'crossing_time': self.crossing_time,
            'monitor': self.monitor.value,
            'horizon': self.horizon
        }


@dataclass
class EvolutionResult:
    """演化结果：末态网格与逐步诊断时间序列"""
    final: GridFunction
    times: np.ndarray
    origin: np.ndarray
    moment: np.ndarray
    maximum: np.ndarray
    blowup: Optional[BlowupResult] = None

    def diagnostics_rows(self) -> List[Tuple[float, float, float, float]]:
        """(t, f(0,t), ∫xf dx, max f) 行"""
        return list(zip(self.times.tolist(), self.origin.tolist(),
                        self.moment.tolist(), self.maximum.tolist()))


# ============================================
# 标度函数
# ============================================

@dataclass
class ScalingProfile:
    """
    以 F(0) 为参数的标度函数

    beta 与 alpha 由 F0 推出：β² = 1/4 + F0/2，α = 1 + 2β。
    """
    F0: float
    samples: GridFunction
    first_zero: Optional[float] = None
    exact_exponential: bool = False
    beta: float = field(init=False)
    alpha: float = field(init=False)
    _cache: Dict[str, Any] = field(default_factory=dict, init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.F0 <= 0:
            raise InvalidParameterError(f"F0 必须为正: {self.F0}", field='F0', value=self.F0)
        self.beta = math.sqrt(0.25 + self.F0 / 2.0)
        self.alpha = 1.0 + 2.0 * self.beta

    @property
    def positive(self) -> bool:
        return self.first_zero is None

    def to_dict(self) -> Dict:
        return {
            'F0': self.F0,
            'beta': self.beta,
            'alpha': self.alpha,
            'first_zero': self.first_zero,
            'dx': self.samples.dx,
            'L': self.samples.length
        }


@dataclass
class NuProfile:
    """ν 叉推广的标度函数"""
    nu: int
    F0: float
    alpha: float
    samples: GridFunction
    first_zero: Optional[float] = None

    def __post_init__(self):
        if self.nu < 2:
            raise InvalidParameterError(f"ν 必须 ≥ 2: {self.nu}", field='nu', value=self.nu)

    @property
    def positive(self) -> bool:
        return self.first_zero is None

    def to_dict(self) -> Dict:
        return {
            'nu': self.nu,
            'F0': self.F0,
            'alpha': self.alpha,
            'first_zero': self.first_zero,
            'dx': self.samples.dx,
            'L': self.samples.length
        }


@dataclass
class ExpansionRecord:
    """F̃(q) 小 q 展开系数与数值拟合结果"""
    beta: float
    constant: float
    linear: float
    quadratic: float
    c_beta: float
    fitted: Dict[str, float] = field(default_factory=dict)
    window: Tuple[float, float] = constants.SMALL_Q_FIT_WINDOW
    ordering_note: str = ""

    def to_dict(self) -> Dict:
        return {
            'beta': self.beta,
            'alpha': 1.0 + 2.0 * self.beta,
            'constant': self.constant,
            'linear': self.linear,
            'quadratic': self.quadratic,
            'c_beta': self.c_beta,
            'fitted': dict(self.fitted),
            'window': list(self.window),
            'ordering_note': self.ordering_note
        }


# ============================================
# 线性化扰动
# ============================================

@dataclass
class Eigenfunction:
    """线性化本征函数 G̃_γ(q) 的采样表"""
    beta: float
    gamma: float
    G0: float
    q_samples: np.ndarray
    values: np.ndarray

    def rows(self) -> List[Tuple[float, float]]:
        return list(zip(np.asarray(self.q_samples).tolist(), np.asarray(self.values).tolist()))


@dataclass
class RegimeRecord:
    """扰动分类结果"""
    kind: RegimeKind
    exponent: Optional[float]
    description: str
    boundary: bool = False
    beta: Optional[float] = None
    gamma: Optional[float] = None

    def to_dict(self) -> Dict:
        return {
            'kind': self.kind.value,
            'exponent': self.exponent,
            'description': self.description,
            'boundary': self.boundary,
            'beta': self.beta,
            'gamma': self.gamma
        }


# ============================================
# 指数和精确解
# ============================================

@dataclass
class ExponentialSum:
    """f(x) = Σ a_i·exp(b_i·x)，要求 b_i < 0 且两两不同"""
    a: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        self.a = np.asarray(self.a, dtype=float).copy()
        self.b = np.asarray(self.b, dtype=float).copy()
        if self.a.shape != self.b.shape or self.a.ndim != 1 or self.a.size == 0:
            raise InvalidParameterError("振幅与速率的长度必须一致且非空", field='terms')
        if np.any(self.b >= 0):
            raise InvalidParameterError(f"速率必须为负: {self.b}", field='b')
        if np.unique(self.b).size != self.b.size:
            raise InvalidParameterError(f"速率必须两两不同: {self.b}", field='b')

    @property
    def terms(self) -> List[Tuple[float, float]]:
        return list(zip(self.a.tolist(), self.b.tolist()))

    def evaluate(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return np.sum(self.a[:, None] * np.exp(np.outer(self.b, x)), axis=0).reshape(x.shape)

    def to_dict(self) -> Dict:
        return {'a': self.a.tolist(), 'b': self.b.tolist()}


@dataclass
class ExpSumTrajectory:
    """指数和 ODE 轨迹"""
    times: np.ndarray
    a: np.ndarray
    b: np.ndarray
    drift: Dict[str, float] = field(default_factory=dict)
    halted: Optional[str] = None

    def at(self, index: int) -> ExponentialSum:
        return ExponentialSum(self.a[index], self.b[index])

    def rows(self) -> List[List[float]]:
        rows = []
        for t, a_row, b_row in zip(self.times, self.a, self.b):
            row = [float(t)]
            for ai, bi in zip(a_row, b_row):
                row.extend([float(ai), float(bi)])
            rows.append(row)
        return rows


@dataclass
class TwoExpCritical:
    """双指数临界闭式解参数，K 可以为纯虚数"""
    K: complex
    t0: complex = 0.0
    t1: float = 0.0


# ============================================
# 随机树
# ============================================

@dataclass
class BranchStep:
    """单层分支律：不分叉概率与分裂对的（无条件）权重"""
    p_nobranch: float
    pairs: List[Tuple[int, int]]
    weights: np.ndarray
    total: float

    @property
    def split_probability(self) -> float:
        return float(np.sum(self.weights)) if len(self.pairs) else 0.0

    def conditional_law(self) -> np.ndarray:
        """分裂条件下的分布；分裂不可能时返回空数组"""
        s = self.split_probability
        if s <= 0.0:
            return np.zeros(0)
        return self.weights / s


@dataclass
class DiscreteTreeNode:
    """离散树节点：层级 m 与取值 X_m"""
    level: int
    value: int
    children: List['DiscreteTreeNode'] = field(default_factory=list)

    def iter_nodes(self):
        stack = [self]
        while stack:
            node = stack.pop()
            yield node
            stack.extend(reversed(node.children))

    def leaves(self) -> List['DiscreteTreeNode']:
        return [node for node in self.iter_nodes() if not node.children]

    def to_dict(self) -> Dict:
        return {
            'level': self.level,
            'value': self.value,
            'children': [child.to_dict() for child in self.children]
        }


@dataclass
class ContinuousTreeNode:
    """
    连续树节点：时间 t' 与质量 μ

    抽样在 t_min > 0 处截断：没有分叉的节点的 end_time 为 t_min，表示这条边只抽样到 t_min，
    而不是一直延伸到 0。
    """
    time: float
    mass: float
    children: List['ContinuousTreeNode'] = field(default_factory=list)
    end_time: Optional[float] = None

    def iter_nodes(self):
        stack = [self]
        while stack:
            node = stack.pop()
            yield node
            stack.extend(reversed(node.children))

    def leaves(self) -> List['ContinuousTreeNode']:
        return [node for node in self.iter_nodes() if not node.children]

    def to_dict(self) -> Dict:
        data = {
            'time': self.time,
            'mass': self.mass,
            'children': [child.to_dict() for child in self.children]
        }
        if self.end_time is not None:
            data['end_time'] = self.end_time
        return data


@dataclass
class TreeStatistics:
    """
    随机树的流式统计

    离散树的分叉"时间"记为层级，连续树记为 t'；两种树都可以累积。
    """
    trees: int = 0
    leaf_counts: Dict[int, int] = field(default_factory=dict)
    branch_times: List[float] = field(default_factory=list)
    unbranched: int = 0

    def add(self, root) -> 'TreeStatistics':
        self.trees += 1
        leaves = len(root.leaves())
        self.leaf_counts[leaves] = self.leaf_counts.get(leaves, 0) + 1
        branched = False
        for node in root.iter_nodes():
            if len(node.children) == 2:
                branched = True
                child = node.children[0]
                self.branch_times.append(float(getattr(child, 'time', getattr(child, 'level', 0))))
        if not branched:
            self.unbranched += 1
        return self

    def merge(self, other: 'TreeStatistics') -> 'TreeStatistics':
        merged = TreeStatistics(trees=self.trees + other.trees,
                                leaf_counts=dict(self.leaf_counts),
                                branch_times=self.branch_times + other.branch_times,
                                unbranched=self.unbranched + other.unbranched)
        for k, v in other.leaf_counts.items():
            merged.leaf_counts[k] = merged.leaf_counts.get(k, 0) + v
        return merged

    def leaf_samples(self) -> np.ndarray:
        """按叶子数展开的样本（用于两样本检验）"""
        keys = sorted(self.leaf_counts)
        return np.repeat(np.array(keys, dtype=float), [self.leaf_counts[k] for k in keys])

    def summary(self) -> Dict:
        total = max(self.trees, 1)
        return {
            'trees': self.trees,
            'leaf_histogram': {str(k): self.leaf_counts[k] for k in sorted(self.leaf_counts)},
            'leaf_frequency': {str(k): self.leaf_counts[k] / total for k in sorted(self.leaf_counts)},
            'mean_leaves': float(self.leaf_samples().mean()) if self.trees else 0.0,
            'branch_events': len(self.branch_times),
            'unbranched_fraction': self.unbranched / total
        }


# ============================================
# 实验
# ============================================

@dataclass
class AcceptanceCheck:
    """可机器校验的验收记录"""
    name: str
    target: float
    measured: float
    tolerance: float
    passed: bool
    mode: str = 'abs'

    def to_dict(self) -> Dict:
        return {
            'name': self.name,
            'target': self.target,
            'measured': self.measured,
            'tolerance': self.tolerance,
            'passed': bool(self.passed),
            'mode': self.mode
        }

    @classmethod
    def from_dict(cls, data: Dict) -> 'AcceptanceCheck':
        return cls(
            name=data['name'],
            target=data['target'],
            measured=data['measured'],
            tolerance=data['tolerance'],
            passed=data['passed'],
            mode=data.get('mode', 'abs')
        )


@dataclass
class ExperimentConfig:
    """单次实验配置"""
    experiment: ExperimentKind
    params: Dict[str, Any] = field(default_factory=dict)
    seed: Optional[int] = None
    out: str = constants.DEFAULT_OUTPUT_DIR
    threads: int = constants.DEFAULT_THREADS

    def __post_init__(self):
        if isinstance(self.experiment, str):
            self.experiment = ExperimentKind(self.experiment)

    def to_dict(self) -> Dict:
        return {
            'experiment': self.experiment.value,
            'params': dict(self.params),
            'seed': self.seed,
            'out': self.out,
            'threads': self.threads
        }

    @classmethod
    def from_dict(cls, data: Dict) -> 'ExperimentConfig':
        return cls(
            experiment=ExperimentKind(data['experiment']),
            params=dict(data.get('params', {})),
            seed=data.get('seed'),
            out=data.get('out', constants.DEFAULT_OUTPUT_DIR),
            threads=data.get('threads', constants.DEFAULT_THREADS)
        )


@dataclass
class ExperimentResult:
    """实验结果摘要"""
    experiment: ExperimentKind
    files: List[str] = field(default_factory=list)
    checks: List[AcceptanceCheck] = field(default_factory=list)
    summary: Dict[str, Any] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(check.passed for check in self.checks)

    def to_dict(self) -> Dict:
        return {
            'experiment': self.experiment.value,
            'files': list(self.files),
            'checks': [check.to_dict() for check in self.checks],
            'summary': dict(self.summary),
            'passed': self.passed
        }
