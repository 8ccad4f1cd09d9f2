"""常量配置文件 - 集中管理所有数值容差和默认参数"""

# ============================================
# 特殊函数常量
# ============================================

# 接近整数阶数的判定容差（β 与整数的距离）
NEAR_INTEGER_TOL = 1e-6

# 整数/半整数 β 的 ε 偏移步长（配合 Richardson 外推）
EPSILON_OFFSET = 1e-5

# K_β 积分表示的截断常数：cosh(t) > (36 + ln cosh(βt)) / q
BESSEL_K_CUTOFF_LOG = 36.0

# K_β 积分的相对容差
BESSEL_K_RTOL = 1e-12

# J_1 梯形积分的额外节点数（节点数 > x + 该值）
BESSEL_J1_EXTRA_NODES = 40

# 多重对数级数的截断余项上限
POLYLOG_REMAINDER = 1e-16

# 多重对数的默认自变量
POLYLOG_DEFAULT_Z = 0.5

# mpmath 高精度计算位数
MP_DPS = 60

# ============================================
# 离散递推常量
# ============================================

# 概率归一化容差
PROBABILITY_TOL = 1e-12

# 截断尾部质量告警阈值
TAIL_MASS_WARNING = 1e-12

# Δ 尾部估计相对容差
DELTA_TAIL_RTOL = 1e-8

# 幂律族闭式与截断求和的一致性容差
POWER_LAW_CLOSED_FORM_TOL = 1e-6

# 临界点二分法容差
BISECTION_XTOL = 1e-13

# 二分区间单调性抽样点数
MONOTONICITY_SAMPLES = 17

# 条件分布的退化下限
DEGENERATE_GUARD = 1e-300

# 默认截断长度
DEFAULT_TRUNCATION = 4096

# 缩放迭代：截断末端 1/16 内的权重相对峰值的告警阈值
RESCALED_EDGE_WARNING = 1e-3

# 缩放迭代的截断倍数 K = 该值 × n（two-delta 与 α > 4 / α < 4 幂律）
RESCALED_K_FACTOR = 16
RESCALED_K_FACTOR_HEAVY = 32

# ============================================
# PDE 演化常量
# ============================================

# 默认空间步长（时间步长与之相等）
DEFAULT_DX = 1e-2

# 默认区域长度
DEFAULT_DOMAIN_LENGTH = 20.0

# 默认爆破阈值
DEFAULT_BLOWUP_THRESHOLD = 1e6

# 正性监测容差（相对于 max|f|）
POSITIVITY_TOL = 1e-9

# 尾部监测：区域末端比例与相对阈值
TAIL_FRACTION = 0.1
TAIL_MONITOR_TOL = 1e-8

# 爆破外推使用的末端采样点数
BLOWUP_FIT_POINTS = 8

# 卷积直接法与FFT法的一致性容差
CONVOLUTION_AGREEMENT_TOL = 1e-10

# Laplace 流积分容差
LAPLACE_RTOL = 1e-10
LAPLACE_ATOL = 1e-12

# ============================================
# 标度函数常量
# ============================================

# 失稳判据：|F| > 该倍数 × F0
INSTABILITY_FACTOR = 1e3

# 变号判据：F < -该值 × F0
SIGN_CHANGE_TOL = 1e-8

# 正性窗口扫描的区域长度与步长
WINDOW_HORIZON = 200.0
WINDOW_DX = 2e-2

# 正性窗口的二分容差（α 单位）
WINDOW_XTOL = 2e-3

# 正性窗口下端：F0 = 10^{-2k} 的最大 k
WINDOW_LOWER_STEPS = 4

# 下端拟合指数与 ν/(ν−1) 的容差
WINDOW_LOWER_THEORY_TOL = 1e-2

# 小 q 非解析振幅拟合窗口
SMALL_Q_FIT_WINDOW = (1e-3, 1e-2)

# 中心差分相对步长
CENTRAL_DIFF_REL_STEP = 1e-6

# 采样网格上的三次样条外推起点比例
TAIL_FIT_FRACTION = 0.5

# ============================================
# 线性化本征函数常量
# ============================================

# Gauss-Legendre 每个面板的节点数
GAUSS_LEGENDRE_NODES = 32

# s 变量的上界（q1 = q + s²/(1-s)）
SUBSTITUTION_S_MAX = 0.995

# s 靠近 0 的二进面板层数
DYADIC_PANELS = 12

# s 均匀面板数
UNIFORM_PANELS = 24

# 本征函数导数的五点差分相对步长
EIGEN_DIFF_REL_STEP = 1e-3

# 线性项检验的拟合窗口
LINEAR_TERM_WINDOW = (1e-4, 1e-3)

# 本征函数与闭式的最大绝对误差
EIGENFUNCTION_TOL = 1e-8

# 0 < γ < 2β−1 时拟合线性系数的上限
LINEAR_TERM_TOL = 1e-3

# ============================================
# 指数和精确解常量
# ============================================

# 速率碰撞阈值 |b_i - b_j| < 该值 × |b_i|
RATE_COLLISION_TOL = 1e-6

# 自适应 RK4 步长控制
EXP_SUM_STEP_TOL = 2e-3

# 指数和振幅爆破阈值
EXP_SUM_BLOWUP = 1e8

# Σaᵢ/bᵢ² 与 1 相差小于该值视为位于临界流形
CRITICAL_MANIFOLD_TOL = 1e-10

# ============================================
# 随机树常量
# ============================================

# 分裂律逆 CDF 的离散点数
SPLIT_TABLE_POINTS = 2048

# 速率上界放大因子
MAJORANT_SAFETY = 1.5

# 每个二进时间面板内的速率采样点数
MAJORANT_SAMPLES = 33

# 连续树的最小时间截断（相对根时间）；叶子数约为 (t/t_min)² 量级
CONTINUOUS_CUTOFF_FRACTION = 1e-2

# 连续树的节点数上限
CONTINUOUS_MAX_NODES = 200000

# 离散-连续对比的层级比例区间
COMPARISON_WINDOW = (0.75, 1.0)

# ============================================
# 输出格式常量
# ============================================

# CSV 浮点格式（17 位有效数字）
FLOAT_FORMAT = '%.17g'

# CSV 元数据行前缀
META_PREFIX = '# '

# 默认输出目录
DEFAULT_OUTPUT_DIR = 'results'

# 默认随机种子
DEFAULT_SEED = 20240101

# 默认线程数
DEFAULT_THREADS = 4

# ============================================
# 实验目录
# ============================================

EXPERIMENT_KINDS = (
    'fig2', 'fig3', 'fig5', 'fig6', 'fig7', 'fig8',
    'critical-point', 'pde-run', 'scaling-profile', 'tree-sample', 'nu-window',
)

# 实验对应的图（画什么对什么）
EXPERIMENT_FIGURES = {
    'fig2': '(log 𝓕_n)^{-2} 对 p',
    'fig3': '(−log 𝓕_n)^{-1} 对 p',
    'fig5': 'n²(1 − Q_n(0)) 对 1/n',
    'fig6': 'n²·2^k·Q_n(k) 对 k/n',
    'fig7': '不分叉概率对 m\'/m',
    'fig8': '分裂律对 x1/X',
    'critical-point': 'p_c 数值表',
    'pde-run': 'f(0,t) 与精确解',
    'scaling-profile': 'F(x) 与 F̃(q)',
    'tree-sample': '叶子数分布',
    'nu-window': 'F 的正性对 α',
}

# ============================================
# 验收容差
# ============================================

# 已知临界点（族, α 或分叉数）→ 数值
KNOWN_CRITICAL_POINTS = {
    ('two-delta', 2): 0.2,
    ('power-law', 3.0): 1.02031,
    ('power-law', 6.0): 1.90956,
}
CRITICAL_POINT_TOL = 1e-4
CRITICAL_DELTA_TOL = 1e-10
CLOSED_FORM_AGREEMENT_TOL = 1e-6

# n²(1 − Q_n(0)) 的相对容差与条件分布的相对容差
FACTOR_LAW_RTOL = 0.10
CONDITIONAL_LAW_RTOL = 0.02

# 自由能拟合截距相对 p_c 的容差
INTERCEPT_RTOL = 0.05

# 缩放剖面与 F 的最大偏差（相对 F(0)）
PROFILE_COLLAPSE_TOL = 0.10

# 不分叉曲线与分裂律的相对容差（指数剖面 / 一般剖面）
TREE_CURVE_RTOL = 0.03
TREE_CURVE_RTOL_GENERAL = 0.05

# PDE 交叉校验
CONVERGENCE_ORDER_RANGE = (1.8, 2.2)
BLOWUP_RTOL = 0.03
INVARIANT_DRIFT_TOL = 1e-8
SERIES_AGREEMENT_TOL = 1e-5

# 标度函数
EXPONENTIAL_PROFILE_TOL = 1e-6
RATIONAL_LAPLACE_TOL = 1e-8
F12_FIRST_ZERO = 1.2092
F12_FIRST_ZERO_TOL = 1e-3
TAIL_EXPONENT_RTOL = 0.02
TAIL_AMPLITUDE_RTOL = 0.05

# ν 叉正性窗口：ν → ((下端, 容差), (上端, 容差))
KNOWN_NU_WINDOWS = {
    3: ((1.50, 0.02), (2.6, 0.1)),
}

# 随机树：Monte Carlo 标准误差倍数，KS 检验 p 值下限
MC_SIGMA = 3.0
KS_PVALUE_FLOOR = 1e-3
