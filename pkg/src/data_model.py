# -*- coding: utf-8 -*-
"""
数据模型模块

保存经过校验的输入，提供：
- 邻接图 NeighborhoodGraph（对称、无自环、邻居数 n_i）
- 数据集 Dataset（响应、分类协变量、固定效应、偏移量、邻接图）
- 先验超参数 Hyperparameters
- 五分位离散化
- 数据 CSV 与邻接文件的读写
"""

import warnings
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path
from typing import Iterable, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from . import config
from .errors import DataError, InputError, ProfileRegressionWarning


class ResponseKind(str, Enum):
    """响应模型类型"""

    GAUSSIAN = 'gaussian'
    POISSON = 'poisson'

    @classmethod
    def parse(cls, value: Union[str, 'ResponseKind']) -> 'ResponseKind':
        if isinstance(value, ResponseKind):
            return value
        try:
            return cls(str(value).strip().lower())
        except ValueError:
            raise InputError(f"未知的响应类型: {value}（可选 gaussian / poisson）")


# ============================================================================
# 邻接图
# ============================================================================

@dataclass
class NeighborhoodGraph:
    """面积单元的邻接关系

    Attributes:
        n: 面积数
        adjacency: 每个面积排好序的邻居索引
        n_neighbors: 每个面积的邻居数 n_i
        edges: 无向边数组 (m, 2)，每行 i < j
        warnings: 构建时产生的警告记录
    """

    n: int
    adjacency: Tuple[Tuple[int, ...], ...]
    n_neighbors: np.ndarray = field(init=False)
    edges: np.ndarray = field(init=False)
    warnings: List[str] = field(default_factory=list)

    def __post_init__(self) -> None:
        self.n_neighbors = np.array([len(a) for a in self.adjacency], dtype=int)
        pairs = [(i, j) for i, adj in enumerate(self.adjacency) for j in adj if i < j]
        self.edges = np.array(pairs, dtype=int).reshape(-1, 2)
        self._component_labels, self._n_components = self._find_components()

    def _find_components(self) -> Tuple[np.ndarray, int]:
        """计算非孤立节点的连通分量，孤立节点标记为 -1"""
        labels = np.full(self.n, -1, dtype=int)
        active = np.flatnonzero(self.n_neighbors > 0)
        if active.size == 0:
            return labels, 0
        rows = np.concatenate([self.edges[:, 0], self.edges[:, 1]])
        cols = np.concatenate([self.edges[:, 1], self.edges[:, 0]])
        matrix = coo_matrix((np.ones(rows.size), (rows, cols)), shape=(self.n, self.n))
        _, all_labels = connected_components(matrix, directed=False)
        # 重新编号，只统计非孤立节点所在的分量
        _, compact = np.unique(all_labels[active], return_inverse=True)
        labels[active] = compact
        return labels, int(compact.max()) + 1

    @property
    def isolated(self) -> np.ndarray:
        """孤立节点掩码（n_i = 0）"""
        return self.n_neighbors == 0

    @property
    def component_labels(self) -> np.ndarray:
        return self._component_labels

    @property
    def n_components(self) -> int:
        """非孤立节点构成的连通分量数 k"""
        return self._n_components

    @property
    def n_effective(self) -> int:
        """参与 ICAR 二次型的面积数（排除孤立节点）"""
        return int(np.count_nonzero(self.n_neighbors > 0))

    def is_symmetric(self) -> bool:
        """检查 j ∈ adj(i) ⇔ i ∈ adj(j)，且无自环、索引在范围内"""
        sets = [set(a) for a in self.adjacency]
        for i, neighbors in enumerate(sets):
            for j in neighbors:
                if j == i or not 0 <= j < self.n or i not in sets[j]:
                    return False
        return True

    def precision_matrix(self) -> np.ndarray:
        """稠密的 ICAR 结构矩阵 P（对角为 n_i，相邻为 -1），仅用于小规模校验"""
        matrix = np.diag(self.n_neighbors.astype(float))
        for i, j in self.edges:
            matrix[i, j] = -1.0
            matrix[j, i] = -1.0
        return matrix

    def permuted(self, perm: Sequence[int]) -> 'NeighborhoodGraph':
        """按 perm 重排面积：新索引 k 对应旧索引 perm[k]"""
        perm = np.asarray(perm, dtype=int)
        inverse = np.empty_like(perm)
        inverse[perm] = np.arange(perm.size)
        return build_graph([(inverse[i], inverse[j]) for i, j in self.edges], n=self.n)


def build_graph(edge_list: Iterable[Tuple[int, int]], n: Optional[int] = None) -> NeighborhoodGraph:
    """由边列表构建对称、去重的邻接图

    Args:
        edge_list: (i, j) 索引对
        n: 面积数；缺省时取最大索引 + 1

    Returns:
        NeighborhoodGraph 实例

    Raises:
        InputError: 自环或索引越界
    """
    pairs = [(int(i), int(j)) for i, j in edge_list]
    if n is None:
        n = max((max(i, j) for i, j in pairs), default=-1) + 1
    neighbor_sets = [set() for _ in range(n)]

    for i, j in pairs:
        if i == j:
            raise InputError(f"邻接图中存在自环: ({i}, {j})")
        if not (0 <= i < n and 0 <= j < n):
            raise InputError(f"邻接索引越界: ({i}, {j})，面积数为 {n}")
        neighbor_sets[i].add(j)
        neighbor_sets[j].add(i)

    adjacency = tuple(tuple(sorted(s)) for s in neighbor_sets)
    graph = NeighborhoodGraph(n=n, adjacency=adjacency)

    isolated = np.flatnonzero(graph.isolated)
    if isolated.size > 0:
        message = (
            f"邻接图包含 {isolated.size} 个孤立节点 {isolated[:10].tolist()}，"
            f"其空间效应固定为 0"
        )
        graph.warnings.append(message)
        warnings.warn(message, ProfileRegressionWarning, stacklevel=2)
    return graph


def grid_graph(rows: int, cols: int) -> NeighborhoodGraph:
    """rook 邻接的规则网格，面积按行优先编号"""
    edges = []
    for r in range(rows):
        for c in range(cols):
            k = r * cols + c
            if c + 1 < cols:
                edges.append((k, k + 1))
            if r + 1 < rows:
                edges.append((k, k + cols))
    return build_graph(edges, n=rows * cols)


def path_graph(n: int) -> NeighborhoodGraph:
    """0–1–…–(n-1) 的路径图"""
    return build_graph([(i, i + 1) for i in range(n - 1)], n=n)


# ============================================================================
# 超参数
# ============================================================================

@dataclass
class Hyperparameters:
    """所有先验常数

    a 为每个协变量的 Dirichlet 浓度向量，长度为 K_j。
    """

    a: Tuple[np.ndarray, ...]
    s_alpha: float = config.DEFAULT_S_ALPHA
    r_alpha: float = config.DEFAULT_R_ALPHA
    mu_theta: float = config.DEFAULT_MU_THETA
    sigma_theta: float = config.DEFAULT_SIGMA_THETA
    mu_beta: float = config.DEFAULT_MU_BETA
    sigma_beta: float = config.DEFAULT_SIGMA_BETA
    t_df: int = config.DEFAULT_T_DF
    s_tauY: float = config.DEFAULT_S_TAU_Y
    r_tauY: float = config.DEFAULT_R_TAU_Y
    a_tau: float = config.DEFAULT_A_TAU
    b_tau: float = config.DEFAULT_B_TAU

    def __post_init__(self) -> None:
        self.a = tuple(np.asarray(a_j, dtype=float) for a_j in self.a)
        self.validate()

    @classmethod
    def default(cls, categories: Sequence[int], **overrides) -> 'Hyperparameters':
        """按类别数生成默认超参数（a_j ≡ 1）"""
        a = tuple(np.full(int(k), config.DEFAULT_DIRICHLET_A) for k in categories)
        return cls(a=a, **overrides)

    def validate(self) -> None:
        positive = {
            's_alpha': self.s_alpha, 'r_alpha': self.r_alpha,
            'sigma_theta': self.sigma_theta, 'sigma_beta': self.sigma_beta,
            't_df': self.t_df, 's_tauY': self.s_tauY, 'r_tauY': self.r_tauY,
            'a_tau': self.a_tau, 'b_tau': self.b_tau,
        }
        for name, value in positive.items():
            if not (np.isfinite(value) and value > 0):
                raise InputError(f"超参数 {name} 必须为正数，当前为 {value}")
        for j, a_j in enumerate(self.a):
            if a_j.ndim != 1 or a_j.size == 0 or np.any(~np.isfinite(a_j)) or np.any(a_j <= 0):
                raise InputError(f"协变量 {j} 的 Dirichlet 浓度必须逐元素为正")

    @property
    def categories(self) -> Tuple[int, ...]:
        return tuple(a_j.size for a_j in self.a)


# ============================================================================
# 数据集
# ============================================================================

@dataclass
class Dataset:
    """经过校验的输入数据

    Attributes:
        y: 响应向量，长度 n
        x: n×J 分类编码矩阵，协变量 j 取值于 {0,…,K_j−1}
        w: n×p 固定效应矩阵（p 可为 0）
        offsets: Poisson 期望计数 E（高斯响应为 None）
        graph: 邻接图
        response_kind: 响应类型
        categories: 每个协变量的类别数 K_j
    """

    y: np.ndarray
    x: np.ndarray
    w: np.ndarray
    offsets: Optional[np.ndarray]
    graph: NeighborhoodGraph
    response_kind: ResponseKind
    categories: Tuple[int, ...]
    covariate_names: Tuple[str, ...] = ()
    fixed_effect_names: Tuple[str, ...] = ()

    @property
    def n(self) -> int:
        return int(self.y.size)

    @property
    def J(self) -> int:
        return int(self.x.shape[1])

    @property
    def p(self) -> int:
        return int(self.w.shape[1])

    @property
    def log_offsets(self) -> np.ndarray:
        """log E_i；高斯响应为全 0"""
        if self.offsets is None:
            return np.zeros(self.n)
        return np.log(self.offsets)

    def permuted(self, perm: Sequence[int]) -> 'Dataset':
        """一致地重排所有行与邻接图"""
        perm = np.asarray(perm, dtype=int)
        return replace(
            self,
            y=self.y[perm],
            x=self.x[perm],
            w=self.w[perm],
            offsets=None if self.offsets is None else self.offsets[perm],
            graph=self.graph.permuted(perm),
        )

    def to_frame(self) -> pd.DataFrame:
        """转换为数据 CSV 的列布局"""
        columns = {'y': self.y}
        names = self.covariate_names or tuple(f"x_{j}" for j in range(self.J))
        for j, name in enumerate(names):
            columns[name] = self.x[:, j]
        w_names = self.fixed_effect_names or tuple(f"w_{k}" for k in range(self.p))
        for k, name in enumerate(w_names):
            columns[name] = self.w[:, k]
        if self.offsets is not None:
            columns['offset'] = self.offsets
        return pd.DataFrame(columns)


def validate_dataset(
    raw_table: Union[pd.DataFrame, Mapping[str, Sequence]],
    graph: NeighborhoodGraph,
    response_kind: Union[str, ResponseKind] = ResponseKind.GAUSSIAN,
    categories: Optional[Sequence[int]] = None,
) -> Dataset:
    """校验原始表格并构建 Dataset

    列约定：`y` 为响应，`x_` 前缀为分类协变量，`w_` 前缀为固定效应，
    可选 `offset` 列为 Poisson 期望计数。

    Args:
        raw_table: 已解析的列
        graph: 邻接图
        response_kind: 响应类型
        categories: 声明的类别数 K_j；缺省时取最大编码 + 1

    Returns:
        Dataset 实例

    Raises:
        DataError: 维度不符、编码越界、偏移量缺失或非正、邻接不对称
    """
    kind = ResponseKind.parse(response_kind)
    table = raw_table if isinstance(raw_table, pd.DataFrame) else pd.DataFrame(dict(raw_table))

    if 'y' not in table.columns:
        raise DataError("数据缺少响应列 `y`")
    x_cols = [c for c in table.columns if str(c).startswith('x_')]
    w_cols = [c for c in table.columns if str(c).startswith('w_')]
    if not x_cols:
        raise DataError("数据至少需要一个以 `x_` 开头的协变量列")

    n = len(table)
    if n != graph.n:
        raise DataError(f"维度不符：数据有 {n} 行，邻接图有 {graph.n} 个面积")
    if not graph.is_symmetric():
        raise DataError("邻接关系不对称或含自环")

    y = pd.to_numeric(table['y'], errors='coerce').to_numpy(dtype=float)
    if np.any(~np.isfinite(y)):
        raise DataError("响应列 `y` 含缺失或非有限值")

    x = _parse_codes(table[x_cols])
    inferred = tuple(int(col.max()) + 1 for col in x.T)
    if categories is None:
        declared = inferred
    else:
        declared = tuple(int(k) for k in categories)
        if len(declared) != len(x_cols):
            raise DataError(f"声明了 {len(declared)} 个类别数，但有 {len(x_cols)} 个协变量")
        for j, (k_decl, k_seen) in enumerate(zip(declared, inferred)):
            if k_seen > k_decl:
                raise DataError(f"协变量 {x_cols[j]} 的编码 {k_seen - 1} 超出声明范围 [0, {k_decl})")

    if w_cols:
        w = table[w_cols].apply(pd.to_numeric, errors='coerce').to_numpy(dtype=float)
        if np.any(~np.isfinite(w)):
            raise DataError("固定效应列含缺失或非有限值")
    else:
        w = np.zeros((n, 0))

    offsets = None
    has_offset = 'offset' in table.columns
    if kind is ResponseKind.POISSON:
        if not has_offset:
            raise DataError("Poisson 响应需要 `offset` 列")
        offsets = pd.to_numeric(table['offset'], errors='coerce').to_numpy(dtype=float)
        if np.any(~np.isfinite(offsets)) or np.any(offsets <= 0):
            raise DataError("偏移量 E_i 必须全部为正的有限值")
        if np.any(y < 0) or np.any(y != np.round(y)):
            raise DataError("Poisson 响应必须是非负整数计数")
    elif has_offset:
        raise DataError("高斯响应不接受 `offset` 列")

    return Dataset(
        y=y,
        x=x,
        w=w,
        offsets=offsets,
        graph=graph,
        response_kind=kind,
        categories=declared,
        covariate_names=tuple(str(c) for c in x_cols),
        fixed_effect_names=tuple(str(c) for c in w_cols),
    )


def _parse_codes(frame: pd.DataFrame) -> np.ndarray:
    """把协变量列解析为非负整数编码"""
    values = frame.apply(pd.to_numeric, errors='coerce').to_numpy(dtype=float)
    if np.any(~np.isfinite(values)):
        raise DataError("协变量含缺失或非数值编码")
    if np.any(values != np.round(values)):
        raise DataError("协变量编码必须为整数")
    if np.any(values < 0):
        raise DataError("协变量编码越界：出现负数")
    return values.astype(int)


# ============================================================================
# 五分位离散化
# ============================================================================

def quintile_discretize(values: Sequence[float]) -> np.ndarray:
    """把连续值映射为五分位编码 {0,…,4}

    分界点为经验 20/40/60/80 百分位数；等于分界点的值归入较低的五分位。

    Args:
        values: 有限实数向量，长度至少为 5

    Returns:
        整数编码向量
    """
    arr = np.asarray(values, dtype=float)
    if arr.ndim != 1 or arr.size < 5:
        raise InputError("五分位离散化至少需要 5 个值")
    if np.any(~np.isfinite(arr)):
        raise InputError("五分位离散化的输入含非有限值")
    boundaries = np.percentile(arr, [20, 40, 60, 80])
    return np.searchsorted(boundaries, arr, side='left').astype(int)


# ============================================================================
# 文件读写
# ============================================================================

def load_data_csv(path: Union[str, Path]) -> pd.DataFrame:
    """读取数据 CSV（首行为表头，行序即面积索引）"""
    path = Path(path)
    if not path.exists():
        raise InputError(f"数据文件不存在: {path}")
    try:
        return pd.read_csv(path)
    except Exception as e:
        raise InputError(f"读取数据文件失败 {path}: {e}")


def load_adjacency(path: Union[str, Path], n: Optional[int] = None) -> NeighborhoodGraph:
    """读取邻接文件：每行一条无向边（两个从 0 开始的索引），`#` 开头为注释"""
    path = Path(path)
    if not path.exists():
        raise InputError(f"邻接文件不存在: {path}")

    edges = []
    with open(path, 'r', encoding='utf-8') as f:
        for line_number, line in enumerate(f, start=1):
            line = line.strip()
            # 跳过空行和注释
            if not line or line.startswith('#'):
                continue
            parts = line.split()
            if len(parts) != 2:
                raise InputError(f"{path} 第 {line_number} 行应为两个索引: {line!r}")
            try:
                edges.append((int(parts[0]), int(parts[1])))
            except ValueError:
                raise InputError(f"{path} 第 {line_number} 行含非整数索引: {line!r}")
    return build_graph(edges, n=n)


def write_adjacency(graph: NeighborhoodGraph, path: Union[str, Path]) -> None:
    """按邻接文件格式写出每条无向边"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, 'w', encoding='utf-8') as f:
        f.write(f"# {graph.n} areas, {len(graph.edges)} edges\n")
        for i, j in graph.edges:
            f.write(f"{i} {j}\n")


def load_dataset(
    data_path: Union[str, Path],
    adjacency_path: Union[str, Path],
    response_kind: Union[str, ResponseKind],
    categories: Optional[Sequence[int]] = None,
) -> Dataset:
    """读取数据 CSV 与邻接文件并完成校验"""
    table = load_data_csv(data_path)
    graph = load_adjacency(adjacency_path, n=len(table))
    return validate_dataset(table, graph, response_kind, categories)
