# -*- coding: utf-8 -*-
"""
空间剖面回归配置模块

提供所有默认配置项：
- 先验超参数默认值（与已发表分析的设置一致）
- MCMC 调度默认值
- 数值容差与截断常数
- 后处理与输出配置
- 终端 UI 显示配置
"""

from typing import Dict

# ============================================================================
# 先验超参数默认值
# ============================================================================

DEFAULT_S_ALPHA: float = 2.0          # α ~ Gamma(s_α, r_α) 的形状参数
DEFAULT_R_ALPHA: float = 1.0          # α 的速率参数
DEFAULT_DIRICHLET_A: float = 1.0      # 每个协变量 Dirichlet(a_j) 的统一浓度
DEFAULT_MU_THETA: float = 0.0         # θ_c 的 t 先验位置
DEFAULT_SIGMA_THETA: float = 2.5      # θ_c 的 t 先验尺度
DEFAULT_MU_BETA: float = 0.0          # β_k 的 t 先验位置
DEFAULT_SIGMA_BETA: float = 2.5       # β_k 的 t 先验尺度
DEFAULT_T_DF: int = 7                 # t 先验自由度
DEFAULT_S_TAU_Y: float = 2.5          # τ_Y = 1/σ_Y² 的形状参数
DEFAULT_R_TAU_Y: float = 2.5          # τ_Y 的速率参数
DEFAULT_A_TAU: float = 1.0            # 空间精度 τ 的形状参数（原分析未给出）
DEFAULT_B_TAU: float = 1.0            # 空间精度 τ 的速率参数（原分析未给出）

# ============================================================================
# MCMC 调度默认值
# ============================================================================

DEFAULT_N_ITER: int = 10000           # 总迭代次数（含预烧期）
DEFAULT_BURN_IN: int = 5000           # 预烧期
DEFAULT_THIN: int = 1                 # 保留样本的抽稀间隔
DEFAULT_N_INIT_CLUSTERS: int = 50     # 初始聚类数（从较多聚类开始）
DEFAULT_SEED: int = 1                 # 主随机种子
DEFAULT_N_CHAINS: int = 1             # 链数
DEFAULT_U_THIN: int = 10              # 空间场 u 快照的额外抽稀间隔
DEFAULT_PROGRESS_EVERY: int = 500     # 进度输出间隔（0 表示关闭）

# ============================================================================
# 数值常数
# ============================================================================

STICK_RESIDUAL_TOL: float = 1e-8      # 截断后剩余棍子质量上限
STICK_CLAMP_EPS: float = 1e-12        # V_c 夹在 (ε, 1-ε) 内
MAX_TRUNCATION: int = 1000            # 截断层数硬上限
SIMPLEX_TOL: float = 1e-12            # Φ 单纯形容差
CENTER_TOL: float = 1e-8              # Σu = 0 的容差

TARGET_ACCEPTANCE: float = 0.44       # 一维随机游走 Metropolis 的目标接受率
ADAPT_BATCH: int = 50                 # 自适应步长的批大小
INITIAL_STEP: float = 0.5             # 初始提议步长
MIN_LOG_STEP: float = -10.0           # log 步长下界
MAX_LOG_STEP: float = 5.0             # log 步长上界

ARS_MAX_POINTS: int = 64              # 自适应拒绝采样的最大包络段数
ARS_MAX_EXPANSIONS: int = 60          # 众数括定的最大扩展次数
ARS_MAX_NEWTON: int = 100             # 安全牛顿法最大迭代次数
ARS_MAX_TRIALS: int = 10000           # 单次抽样最多尝试次数

# ============================================================================
# 后处理与输出配置
# ============================================================================

PAM_MAX_K: int = 20                   # 默认 k 范围上界
PAM_MAX_SWAPS: int = 1000             # SWAP 阶段最大迭代次数
DENSE_SIMILARITY_LIMIT: int = 2000    # 超过该面积数时相似度矩阵只写上三角
SUMMARY_QUANTILES = (0.025, 0.25, 0.5, 0.75, 0.975)
MISSING_TOKENS = ('NA', 'NAN', 'MISSING', '')

# 输出文件名
TRACE_SCALARS_FILE: str = "trace_scalars.csv"
ALLOCATIONS_FILE: str = "allocations.csv"
SIMILARITY_FILE: str = "similarity.csv"
PARTITION_FILE: str = "partition.csv"
CLUSTER_SUMMARY_FILE: str = "cluster_summary.csv"
SPATIAL_U_FILE: str = "spatial_u.csv"
PREDICTIONS_FILE: str = "predictions.csv"
DIAGNOSTICS_FILE: str = "diagnostics.csv"
TRACE_STORE_FILE: str = "trace.jsonl"
ERROR_RECORD_FILE: str = "error.json"

# ============================================================================
# UI配置
# ============================================================================

ENABLE_COLORS: bool = True                     # 是否启用终端颜色

# 颜文字符号配置（TTY 兼容）
SYMBOLS: Dict[str, str] = {
    # 状态相关
    'success': '(◕‿◕)',
    'error': '(╯︵╰)',
    'warning': '(￣□￣;)',
    'info': '(^•ﻌ•^)',

    # 操作相关
    'start': '╭( ･ㅂ･)و',
    'chain': '⚡(^_^)',
    'docs': '(◕‿◕)✎',
    'folder': '◢(◕‿◕)',
    'end': '(￣▽￣)/',

    # 装饰性符号
    'separator': '━',
    'bullet': '•',
    'arrow_right': '▶',
    'star': '★',
}

# ANSI 颜色代码配置
COLORS: Dict[str, str] = {
    'reset': '\033[0m',
    'red': '\033[31m',
    'green': '\033[32m',
    'yellow': '\033[33m',
    'cyan': '\033[36m',
    'white': '\033[37m',
    'bright_white': '\033[97m',
    'bold': '\033[1m',

    # 输出配色方案
    'system_info': '\033[36m',
    'system_success': '\033[32m',
    'system_warning': '\033[33m',
    'system_error': '\033[31m',
    'separator_line': '\033[36m',
    'table_text': '\033[37m',
}
